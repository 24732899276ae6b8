//! Shared fixtures for the benchmarks.

use anderson_lab::measures::{sample_window, BaseMeasure, PotentialWindow, ProductLaw};
use anderson_lab::RngStream;

pub fn bernoulli() -> ProductLaw {
    ProductLaw::exact(BaseMeasure::bernoulli(-1.0, 1.0, 0.5).expect("valid measure"))
}

/// A Bernoulli window `[0, len)` at a fixed seed.
pub fn window(len: usize) -> PotentialWindow {
    sample_window(&bernoulli(), 0, len as i64 - 1, RngStream::new(1, 0)).expect("sampling a bounded law")
}
