pub mod data;
pub mod distance;
pub mod error;
pub mod eval;
pub mod local;
pub mod tree;
pub mod wls;

pub use error::{Error, Result};
