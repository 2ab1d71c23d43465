//! Shared fixtures for the benchmarks.

use circlab::CircleMap;

/// A piecewise-linear homeomorphism with three breaks.
pub fn pl_map() -> CircleMap {
    CircleMap::piecewise_linear(vec![(0.0, 0.0), (0.2, 0.5), (0.7, 0.6), (1.0, 1.0)])
        .expect("valid breakpoints")
}
