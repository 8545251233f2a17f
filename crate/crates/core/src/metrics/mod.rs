//! Evaluation and agreement statistics.

mod agreement;
mod correlation;
mod raters;

pub use agreement::{
    agreement, cohen_kappa, expected_agreement, majority_label, observed_agreement, ratings_to_pairwise,
    AgreementReport,
};
pub use correlation::{
    fractional_ranks, mae, metrics_report, mse, pairwise_accuracy, pearson, spearman, MetricsReport,
};
pub use raters::{
    agreement_matrix, majority_preference, AgreementTable, MajoritySummary, MeanAgreement, PairCell, RaterMatrix,
    RatingSummary, TaskKind, TRUTH,
};
