//! Metrics, the comparison harness, batch runs and map exports.

pub mod batch;
pub mod compare;
pub mod maps;
pub mod metrics;
pub mod model;

pub use batch::{run_batch, BatchCase, BatchManifest, BatchReport, BatchRow};
pub use compare::{
    rank_factors, resolve_covariates, run_comparison, ComparisonConfig, ComparisonReport, ErrorInfo, FactorSelection,
    Improvement, ModelOutcome, RecordPrediction, SplitInfo,
};
pub use maps::{build_grid_export, export_maps, lattice, residual_rows, GridExport, GridRow, LatticeSpec, ResidualRow};
pub use metrics::{improvement_pct, r_squared, rmse};
pub use model::{fit_model, FittedModel, LocalModel, ModelConfig, ModelKind, MODEL_FORMAT, MODEL_VERSION};
