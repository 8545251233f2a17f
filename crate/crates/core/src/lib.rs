//! Preference learning over precomputed image-caption embeddings.
//!
//! Two model families share one scoring network `f(x)`:
//!
//! * a regression model fitted to normalized direct ratings with a
//!   ranking-penalized MAE objective, and
//! * a comparative model fitted to pairwise judgments with a margin hinge
//!   loss on the score difference `C_ij = f(x_i) - f(x_j)`.
//!
//! The crate also carries the evaluation metrics (MSE, MAE, Pearson,
//! Spearman, pairwise accuracy) and the agreement statistics used to analyse
//! human annotation studies (observed/expected agreement, Cohen's kappa,
//! majority aggregation).
//!
//! ```text
//! data ──► pairs ──► training ──► scorer ──► metrics
//!                        ▲                      ▲
//!                        └── protocols ─────────┘
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod label;
pub mod metrics;
pub mod protocols;
pub mod scorer;
pub mod seed;
pub mod study;
pub mod synthetic;
pub mod training;

pub use data::{Dataset, Item, PairExample};
pub use error::{Error, Result};
pub use label::Label;
pub use scorer::{ForwardMode, ScorerModel};
pub use training::{TrainConfig, TrainReport};
