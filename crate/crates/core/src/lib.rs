#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod error;
pub mod ingest;
pub mod lisa;
pub mod moran;
pub mod ols;
pub mod optimize;
pub mod rng;
pub mod spatial_ml;
pub mod specsearch;
pub mod stats;
pub mod weights;
