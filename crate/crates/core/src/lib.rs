//! Newton gradient-boosted decision trees for label-imbalanced binary
//! classification.
//!
//! The crate trains an additive ensemble of regression trees on the
//! second-order expansion of one of three losses:
//!
//! * plain binary cross-entropy,
//! * weighted cross-entropy, where the positive-label term is scaled by `alpha`,
//! * focal loss, where each instance is damped by `(1 - p_t)^gamma`.
//!
//! ```
//! use imboost::{train, Dataset, LossParams, TrainConfig};
//!
//! let data = Dataset::from_rows(
//!     &[vec![0.1], vec![0.4], vec![0.5], vec![0.9]],
//!     &[0, 0, 1, 1],
//! ).unwrap();
//! let config = TrainConfig {
//!     min_child_hessian: 0.0,
//!     ..TrainConfig::default().with_loss(LossParams::Focal { gamma: 2.0 })
//! };
//! let model = train(&data, &config).unwrap();
//! let labels = model.predict_determine(data.features()).unwrap();
//! assert_eq!(labels.iter().map(|&y| u8::from(y)).collect::<Vec<_>>(), [0, 0, 1, 1]);
//! ```

pub mod booster;
pub mod cli;
pub mod data;
pub mod error;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod model_selection;
pub mod tree;

pub use booster::{train, BoostedModel, TrainConfig};
pub use data::Dataset;
pub use error::{Error, Result};
pub use loss::{
    batch_grad_hess, focal_grad_hess, focal_loss_value, sigmoid, weighted_grad_hess,
    weighted_loss_value, EtaTerms, GradHess, Label, LossKernel, LossParams, PROB_EPS,
};
pub use metrics::{
    confusion_from_predictions, correct_eval, score, Cell, ConfusionCounts, MetricMode,
    MetricScores,
};
pub use model_selection::{
    cross_validate, grid_search, make_splits, CvReport, Fold, GridResult, SearchGrid, SplitPlan,
};
pub use tree::{split_gain, TreeNode};

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/newton_boosting.md")]
    mod newton_boosting {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
