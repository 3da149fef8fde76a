//! Fixtures shared by the benchmarks.

use somlab::meanfield::grid_state;
use somlab::{Lattice, NetworkState};

/// Units at `(2i + 1) / 2n`.
pub fn midpoints(n: usize) -> NetworkState {
    let v: Vec<f64> = (0..n).map(|i| (2 * i + 1) as f64 / (2 * n) as f64).collect();
    NetworkState::scalar(&v).expect("non-empty")
}

/// An `n x n` grid at the product of midpoint axes.
pub fn midpoint_grid(n: usize) -> (Lattice, NetworkState) {
    grid_state(&[midpoints(n), midpoints(n)]).expect("square grid")
}
