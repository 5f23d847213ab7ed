//! Tables, schemas, CSV ingestion, standardization, splitting and the
//! synthetic generator.

pub mod csvio;
pub mod schema;
pub mod split;
pub mod standardize;
pub mod synth;
pub mod table;

pub use csvio::{load_csv, load_query_csv, read_csv, read_query_csv, write_csv, write_csv_to, IngestionReport, Rejection};
pub use schema::{Axis, ColumnRole, ColumnSpec, Schema, SCHEMA_VERSION};
pub use split::{split, split_indices, SplitSpec, SPLIT_ALGORITHM};
pub use standardize::{standardize, ColumnStats, StandardizationTransform};
pub use synth::{generate_synthetic, Regime, SyntheticConfig, SyntheticData};
pub use table::{dummy_encode, CategoricalColumn, ColumnKind, Covariate, ObservationTable};
