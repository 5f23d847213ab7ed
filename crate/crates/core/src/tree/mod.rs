//! Regression trees, least-squares boosting and predictor importance.

pub mod boost;
pub mod cart;
pub mod importance;

pub use boost::{fit_lsboost, BoostParams, BoostStage, BoostedEnsemble};
pub use cart::{fit_tree, Features, TreeNode, TreeParams};
pub use importance::{predictor_importance, select_factors, ImportanceEntry, ImportanceReport, ImportanceStatus};
