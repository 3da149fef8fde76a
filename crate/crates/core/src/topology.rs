//! Unit lattices and neighborhood functions.
//!
//! Units are indexed by flattened 0-based integers. On a grid the first axis
//! varies fastest: unit `(i1, i2)` has index `i1 + n1 * i2`, so that weight
//! coordinate `k` lines up with lattice axis `k` in the usual plots.

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeKind {
    String1d,
    Grid2d,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    kind: LatticeKind,
    dims: Vec<usize>,
}

impl Lattice {
    pub fn string(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("lattice needs at least one unit"));
        }
        Ok(Self {
            kind: LatticeKind::String1d,
            dims: vec![n],
        })
    }

    pub fn grid(n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(invalid("grid axes must have at least one unit"));
        }
        Ok(Self {
            kind: LatticeKind::Grid2d,
            dims: vec![n1, n2],
        })
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lattice coordinates of a unit; `(i, 0)` on a string.
    pub fn coords(&self, i: usize) -> (usize, usize) {
        match self.kind {
            LatticeKind::String1d => (i, 0),
            LatticeKind::Grid2d => (i % self.dims[0], i / self.dims[0]),
        }
    }

    pub fn index(&self, i1: usize, i2: usize) -> usize {
        match self.kind {
            LatticeKind::String1d => i1,
            LatticeKind::Grid2d => i1 + self.dims[0] * i2,
        }
    }

    fn check(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            Err(Error::Index {
                index: i,
                len: self.len(),
            })
        } else {
            Ok(())
        }
    }

    /// `|i - j|` on a string, Chebyshev distance on a grid.
    pub fn unit_distance(&self, i: usize, j: usize) -> Result<usize> {
        self.check(i)?;
        self.check(j)?;
        Ok(self.distance_unchecked(i, j))
    }

    pub(crate) fn distance_unchecked(&self, i: usize, j: usize) -> usize {
        let (a1, a2) = self.coords(i);
        let (b1, b2) = self.coords(j);
        a1.abs_diff(b1).max(a2.abs_diff(b2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborhoodKind {
    /// Weight 1 up to lattice distance k, 0 beyond.
    Step(usize),
    Table,
    /// Winner only (competitive learning).
    Indicator0,
    /// `Step(1)` under the Chebyshev grid metric.
    Indicator8,
}

/// A time-invariant neighborhood function Λ stored per lattice distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    kind: NeighborhoodKind,
    values: Vec<f64>,
}

impl Neighborhood {
    pub fn step(k: usize) -> Self {
        Self {
            kind: NeighborhoodKind::Step(k),
            values: vec![1.0; k + 1],
        }
    }

    pub fn indicator0() -> Self {
        Self {
            kind: NeighborhoodKind::Indicator0,
            values: vec![1.0],
        }
    }

    pub fn indicator8() -> Self {
        Self {
            kind: NeighborhoodKind::Indicator8,
            values: vec![1.0, 1.0],
        }
    }

    /// Explicit weights for distances `0..values.len()`; zero beyond.
    pub fn table(values: Vec<f64>) -> Result<Self> {
        match values.first() {
            Some(&1.0) => {}
            _ => return Err(invalid("neighborhood table must start with 1")),
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid("neighborhood weights must lie in [0, 1]"));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("neighborhood weights must be non-increasing"));
        }
        Ok(Self {
            kind: NeighborhoodKind::Table,
            values,
        })
    }

    pub fn kind(&self) -> NeighborhoodKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, dist: usize) -> f64 {
        self.values.get(dist).copied().unwrap_or(0.0)
    }

    /// Whether Λ only takes the values 0 and 1.
    pub fn is_step_like(&self) -> bool {
        self.values.iter().all(|&v| v == 1.0)
    }

    /// Condition H_Λ for `n` units: some `k0 < (n - 1) / 2` with `Λ(k0 + 1) < Λ(k0)`.
    pub fn satisfies_h_lambda(&self, n: usize) -> bool {
        (0..n)
            .take_while(|&k| 2 * k + 1 < n)
            .any(|k| self.value(k + 1) < self.value(k))
    }

    pub fn label(&self) -> String {
        match self.kind {
            NeighborhoodKind::Step(k) => format!("step({k})"),
            NeighborhoodKind::Indicator0 => "indicator-0".into(),
            NeighborhoodKind::Indicator8 => "indicator-8".into(),
            NeighborhoodKind::Table => {
                let v: Vec<String> = self.values.iter().map(|x| x.to_string()).collect();
                format!("table({})", v.join(","))
            }
        }
    }
}

/// The dense `n x n` matrix `Λ(dist(i, j))` for a lattice.
#[derive(Debug, Clone)]
pub struct Coupling {
    n: usize,
    weights: Vec<f64>,
}

impl Coupling {
    pub fn new(lattice: &Lattice, neighborhood: &Neighborhood) -> Self {
        let n = lattice.len();
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                weights.push(neighborhood.value(lattice.distance_unchecked(i, j)));
            }
        }
        Self { n, weights }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }
}
