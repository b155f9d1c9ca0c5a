//! Distances between kanji computed by matching nested stroke components
//! with unbalanced optimal transport.

pub mod error;
pub mod decomposition;
pub mod geometry;
pub mod kanjivg;
pub mod lp;
pub mod matching;
pub mod metric;
pub mod ot;
pub mod raster;
pub mod store;
pub mod engine;
pub mod analysis;
pub mod fit;
pub mod config;

pub use error::{Error, Result};
