//! Single-snapshot direction-of-arrival estimation toolkit.
//!
//! The crate simulates narrowband array snapshots, scans spatial spectra with
//! three estimators (the classical Bartlett beamformer, an L1-constrained
//! sparse solver, and a learned coordinate-scoring network), and benchmarks
//! them with a reproducible Monte-Carlo harness.

pub mod array;
pub mod bartlett;
pub mod bench;
pub mod error;
pub mod infer;
pub mod manifold;
pub mod net;
pub mod rng;
pub mod scenario;
pub mod sparse;
pub mod spectrum;
pub mod train;

pub use error::{Error, Result};

/// Cap the global worker pool. Results never depend on the thread count;
/// this only bounds CPU usage. No-op after any parallel work has started.
pub fn configure_threads(n: usize) {
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}
