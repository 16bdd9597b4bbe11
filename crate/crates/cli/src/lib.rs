//! Benchmark runner library: config files, dataset loading, suite
//! execution, and SVG plotting on top of `albench-core`.

pub mod config;
pub mod formats;
pub mod suite;
pub mod svg;
