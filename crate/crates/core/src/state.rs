use crate::error::{invalid, Result};

/// Weights `m = (m_1, ..., m_n)` of all units, stored row-major `n x d`,
/// plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    weights: Vec<f64>,
    dim: usize,
    time: u64,
}

impl NetworkState {
    pub fn new(dim: usize, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || weights.is_empty() || !weights.len().is_multiple_of(dim) {
            return Err(invalid(format!(
                "{} weights do not form whole units of dimension {dim}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("weights must be finite"));
        }
        Ok(Self {
            weights,
            dim,
            time: 0,
        })
    }

    /// A 1-D state from scalar weights.
    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::new(1, values.to_vec())
    }

    pub fn len(&self) -> usize {
        self.weights.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn set_time(&mut self, t: u64) {
        self.time = t;
    }

    pub(crate) fn tick(&mut self) {
        self.time += 1;
    }

    #[inline]
    pub fn unit(&self, i: usize) -> &[f64] {
        &self.weights[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn unit_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.weights[i * self.dim..(i + 1) * self.dim]
    }

    pub fn units(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Copy with flat coordinate `k` shifted by `delta`.
    pub fn perturbed(&self, k: usize, delta: f64) -> Self {
        let mut s = self.clone();
        s.weights[k] += delta;
        s
    }

    /// Units in reverse order.
    pub fn reversed(&self) -> Self {
        let mut weights = Vec::with_capacity(self.weights.len());
        for u in self.weights.chunks(self.dim).rev() {
            weights.extend_from_slice(u);
        }
        Self {
            weights,
            dim: self.dim,
            time: self.time,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Euclidean norm of the difference over all `n * d` coordinates.
    pub fn distance(&self, other: &Self) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// First pair of units with identical weights, if any.
    pub fn coinciding_units(&self) -> Option<(usize, usize)> {
        let n = self.len();
        for i in 0..n {
            for j in i + 1..n {
                if self.unit(i) == self.unit(j) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn inside(&self, bounds: &[(f64, f64)]) -> bool {
        self.units()
            .all(|u| u.iter().zip(bounds).all(|(x, &(lo, hi))| (lo..=hi).contains(x)))
    }
}
