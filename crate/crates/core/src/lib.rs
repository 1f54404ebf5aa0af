pub mod chart;
pub mod dataset;
pub mod error;
pub mod family;
pub mod fit;
pub mod formula;
pub mod numeric;
pub mod predict;
pub mod service;

pub use error::{Error, ErrorCode, Result};
