//! File formats, configuration, the end-to-end pipeline and report
//! rendering on top of `verdoorn-core`.

pub mod config;
pub mod error;
pub mod fixture;
pub mod io;
pub mod pipeline;
pub mod render;

pub use verdoorn_core as core;
