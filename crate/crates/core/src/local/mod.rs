//! Geographically and covariate-distance weighted regression.

pub mod fit;
pub mod predict;
pub mod search;

pub use fit::{fit_local, LocalFit, TrainingContext, TrainingPoints};
pub use predict::{nearest_neighbors, predict_query, predict_table, query_distances, PredictMode, QueryPoint, DEFAULT_NEIGHBORS};
pub use search::{
    auto_bandwidth_grid, default_rate_grid, fit_searched, select_bandwidth, select_rate, BandwidthGrid,
    BandwidthStrategy, HyperSearchTrace, RateScoring, RateSelection, SearchCandidate, AUTO_GRID_SIZE,
};
