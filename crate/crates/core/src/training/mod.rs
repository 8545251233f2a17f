//! Losses, the optimizer and learning-rate schedule, early stopping, and the
//! regression and comparative training loops.

mod config;
mod early_stop;
mod loops;
mod loss;
mod optim;

pub use config::TrainConfig;
pub use early_stop::{EarlyStopping, StopDecision};
pub use loops::{
    pairwise_objective, regression_objective, score_dataset, train_pairwise, train_regression, EpochRecord, TrainReport,
};
pub use loss::{hinge_loss, ranking_penalized_mae};
pub use optim::{adam_step, cosine_lr, OptimizerState};
