//! Integrals of μ over the Voronoi cells of a state.
//!
//! Every mean-field and distortion formula reduces to three per-cell
//! quantities: the mass `μ(C_i)`, the first moment `∫_{C_i} x dμ` and the
//! spread `∫_{C_i} ‖x - m_i‖² dμ`. They are computed exactly where the
//! geometry allows it:
//!
//! * 1-D continuous laws: cells are intervals between midpoints of sorted
//!   weights (closed form for uniform, adaptive quadrature for densities);
//! * 2-D uniform boxes: cells are convex polygons obtained by clipping the
//!   box with bisector half-planes, integrated with shoelace formulas;
//! * discrete laws: finite sums with the lowest-index tie-break;
//! * anything else: Monte Carlo with reported standard errors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::som_engine::euclidean_winner;
use crate::state::NetworkState;
use crate::stimuli::{Marginal, StimuliDistribution};

/// Monte Carlo sample count used when no deterministic path exists.
pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellPath {
    Exact1d,
    Quadrature1d,
    Polygon2d,
    Discrete,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// The exact path for the distribution; an error if there is none.
    Deterministic,
    MonteCarlo { samples: usize, seed: u64 },
}

impl Policy {
    /// Deterministic when possible, Monte Carlo otherwise.
    pub fn auto(dist: &StimuliDistribution) -> Self {
        if deterministic_path(dist).is_some() {
            Policy::Deterministic
        } else {
            Policy::MonteCarlo {
                samples: DEFAULT_MC_SAMPLES,
                seed: 0,
            }
        }
    }
}

pub fn deterministic_path(dist: &StimuliDistribution) -> Option<CellPath> {
    match dist {
        StimuliDistribution::Discrete(_) => Some(CellPath::Discrete),
        StimuliDistribution::Product(m) if m.len() == 1 => Some(match m[0] {
            Marginal::Uniform { .. } => CellPath::Exact1d,
            Marginal::Density(_) => CellPath::Quadrature1d,
        }),
        StimuliDistribution::Product(m) if m.len() == 2 && dist.is_uniform_box() => {
            Some(CellPath::Polygon2d)
        }
        _ => None,
    }
}

/// Standard errors of a Monte Carlo [`CellMoments`].
#[derive(Debug, Clone, PartialEq)]
pub struct MomentErrors {
    pub mass: Vec<f64>,
    pub first: Vec<f64>,
    pub spread: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellMoments {
    pub path: CellPath,
    pub dim: usize,
    pub mass: Vec<f64>,
    /// `n x d`, row-major.
    pub first: Vec<f64>,
    pub spread: Vec<f64>,
    pub errors: Option<MomentErrors>,
}

impl CellMoments {
    fn zeros(path: CellPath, n: usize, dim: usize) -> Self {
        Self {
            path,
            dim,
            mass: vec![0.0; n],
            first: vec![0.0; n * dim],
            spread: vec![0.0; n],
            errors: None,
        }
    }

    pub fn first(&self, i: usize) -> &[f64] {
        &self.first[i * self.dim..(i + 1) * self.dim]
    }

    /// Conditional mean of cell `i`; `None` for an empty cell.
    pub fn mean(&self, i: usize) -> Option<Vec<f64>> {
        (self.mass[i] > 0.0).then(|| self.first(i).iter().map(|f| f / self.mass[i]).collect())
    }
}

pub fn cell_moments(dist: &StimuliDistribution, state: &NetworkState, policy: Policy) -> Result<CellMoments> {
    if state.dim() != dist.dim() {
        return Err(Error::Dimension {
            expected: dist.dim(),
            got: state.dim(),
        });
    }
    match policy {
        Policy::MonteCarlo { samples, seed } => Ok(monte_carlo(dist, state, samples, seed)),
        Policy::Deterministic => match deterministic_path(dist) {
            Some(CellPath::Discrete) => Ok(discrete(dist, state)),
            Some(CellPath::Exact1d) | Some(CellPath::Quadrature1d) => intervals(dist, state),
            Some(CellPath::Polygon2d) => polygons(dist, state),
            _ => Err(Error::Usage(format!(
                "no deterministic cell integration for {}; use Monte Carlo",
                dist.label()
            ))),
        },
    }
}

/// Unit indices sorted by weight; an error names the first coinciding pair.
pub(crate) fn sorted_units(state: &NetworkState) -> Result<Vec<usize>> {
    let w = state.weights();
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w[a].total_cmp(&w[b]).then(a.cmp(&b)));
    for pair in order.windows(2) {
        if w[pair[0]] == w[pair[1]] {
            return Err(Error::Degenerate {
                first: pair[0].min(pair[1]),
                second: pair[0].max(pair[1]),
            });
        }
    }
    Ok(order)
}

/// Cell boundaries `[a, b]` of each unit of a 1-D state, indexed by unit.
pub(crate) fn interval_cells(state: &NetworkState, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
    let order = sorted_units(state)?;
    let w = state.weights();
    let mut cells = vec![(0.0, 0.0); w.len()];
    for (k, &i) in order.iter().enumerate() {
        let a = if k == 0 { lo } else { 0.5 * (w[order[k - 1]] + w[i]) };
        let b = if k + 1 == order.len() { hi } else { 0.5 * (w[i] + w[order[k + 1]]) };
        cells[i] = (a.max(lo), b.min(hi));
    }
    Ok(cells)
}

fn intervals(dist: &StimuliDistribution, state: &NetworkState) -> Result<CellMoments> {
    let marginal = dist.as_1d().expect("1-D continuous law");
    let (lo, hi) = marginal.bounds();
    let cells = interval_cells(state, lo, hi)?;
    let path = if marginal.is_uniform() {
        CellPath::Exact1d
    } else {
        CellPath::Quadrature1d
    };
    let mut out = CellMoments::zeros(path, state.len(), 1);
    for (i, &(a, b)) in cells.iter().enumerate() {
        if b <= a {
            continue;
        }
        let (mass, first) = marginal.interval_moments(a, b);
        out.mass[i] = mass;
        out.first[i] = first;
        out.spread[i] = marginal.interval_spread(a, b, state.weights()[i]);
    }
    Ok(out)
}

fn discrete(dist: &StimuliDistribution, state: &NetworkState) -> CellMoments {
    let StimuliDistribution::Discrete(set) = dist else {
        unreachable!("discrete path on a continuous law")
    };
    let d = set.dim();
    let mut out = CellMoments::zeros(CellPath::Discrete, state.len(), d);
    let w = 1.0 / set.len() as f64;
    for x in set.points() {
        let i = euclidean_winner(state.weights(), d, x);
        out.mass[i] += w;
        let m = state.unit(i);
        let mut s = 0.0;
        for k in 0..d {
            out.first[i * d + k] += w * x[k];
            s += (x[k] - m[k]) * (x[k] - m[k]);
        }
        out.spread[i] += w * s;
    }
    out
}

fn monte_carlo(dist: &StimuliDistribution, state: &NetworkState, samples: usize, seed: u64) -> CellMoments {
    let n = state.len();
    let d = dist.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut count = vec![0.0; n];
    let mut first = vec![0.0; n * d];
    let mut first_sq = vec![0.0; n * d];
    let mut spread = vec![0.0; n];
    let mut spread_sq = vec![0.0; n];
    let mut x = vec![0.0; d];
    for _ in 0..samples {
        dist.sample_into(&mut rng, &mut x);
        let i = euclidean_winner(state.weights(), d, &x);
        count[i] += 1.0;
        let m = state.unit(i);
        let mut s = 0.0;
        for k in 0..d {
            first[i * d + k] += x[k];
            first_sq[i * d + k] += x[k] * x[k];
            s += (x[k] - m[k]) * (x[k] - m[k]);
        }
        spread[i] += s;
        spread_sq[i] += s * s;
    }
    let s = samples.max(1) as f64;
    let se = |sum: f64, sum_sq: f64| ((sum_sq / s - (sum / s).powi(2)).max(0.0) / s).sqrt();
    let errors = MomentErrors {
        mass: count.iter().map(|&c| se(c, c)).collect(),
        first: first.iter().zip(&first_sq).map(|(&a, &b)| se(a, b)).collect(),
        spread: spread.iter().zip(&spread_sq).map(|(&a, &b)| se(a, b)).collect(),
    };
    CellMoments {
        path: CellPath::MonteCarlo,
        dim: d,
        mass: count.iter().map(|c| c / s).collect(),
        first: first.iter().map(|f| f / s).collect(),
        spread: spread.iter().map(|v| v / s).collect(),
        errors: Some(errors),
    }
}

/// A convex polygon, counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon(pub Vec<[f64; 2]>);

impl Polygon {
    pub fn rectangle(x: (f64, f64), y: (f64, f64)) -> Self {
        Polygon(vec![[x.0, y.0], [x.1, y.0], [x.1, y.1], [x.0, y.1]])
    }

    /// Keeps the part where `a · p <= c`.
    pub fn clip(&self, a: [f64; 2], c: f64) -> Self {
        let pts = &self.0;
        let mut out = Vec::with_capacity(pts.len() + 1);
        for k in 0..pts.len() {
            let p = pts[k];
            let q = pts[(k + 1) % pts.len()];
            let fp = a[0] * p[0] + a[1] * p[1] - c;
            let fq = a[0] * q[0] + a[1] * q[1] - c;
            if fp <= 0.0 {
                out.push(p);
            }
            if (fp <= 0.0) != (fq <= 0.0) {
                let t = fp / (fp - fq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
        if out.len() < 3 {
            out.clear();
        }
        Polygon(out)
    }

    /// `(area, ∫ (p - c) dp, ∫ ‖p - c‖² dp)`.
    pub fn moments_about(&self, c: [f64; 2]) -> (f64, [f64; 2], f64) {
        let pts = &self.0;
        let (mut area, mut fx, mut fy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for k in 0..pts.len() {
            let (x0, y0) = (pts[k][0] - c[0], pts[k][1] - c[1]);
            let q = pts[(k + 1) % pts.len()];
            let (x1, y1) = (q[0] - c[0], q[1] - c[1]);
            let cross = x0 * y1 - x1 * y0;
            area += cross;
            fx += (x0 + x1) * cross;
            fy += (y0 + y1) * cross;
            sxx += (x0 * x0 + x0 * x1 + x1 * x1) * cross;
            syy += (y0 * y0 + y0 * y1 + y1 * y1) * cross;
        }
        (area / 2.0, [fx / 6.0, fy / 6.0], (sxx + syy) / 12.0)
    }
}

/// The Voronoi cell of unit `i` inside the box, ties resolved toward the lower index.
pub fn voronoi_polygon(state: &NetworkState, i: usize, bounds: &[(f64, f64)]) -> Polygon {
    let mi = state.unit(i);
    let mut poly = Polygon::rectangle(bounds[0], bounds[1]);
    let ni = mi[0] * mi[0] + mi[1] * mi[1];
    for (j, mj) in state.units().enumerate() {
        if j == i || poly.0.is_empty() {
            continue;
        }
        // ‖p - m_i‖² <= ‖p - m_j‖²  <=>  2 (m_j - m_i) · p <= ‖m_j‖² - ‖m_i‖²
        let a = [2.0 * (mj[0] - mi[0]), 2.0 * (mj[1] - mi[1])];
        let c = mj[0] * mj[0] + mj[1] * mj[1] - ni;
        if a == [0.0, 0.0] {
            if j < i {
                poly.0.clear();
            }
            continue;
        }
        poly = poly.clip(a, c);
    }
    poly
}

fn polygons(dist: &StimuliDistribution, state: &NetworkState) -> Result<CellMoments> {
    if let Some((first, second)) = state.coinciding_units() {
        return Err(Error::Degenerate { first, second });
    }
    let bounds = dist.bounds();
    let box_area = (bounds[0].1 - bounds[0].0) * (bounds[1].1 - bounds[1].0);
    let mut out = CellMoments::zeros(CellPath::Polygon2d, state.len(), 2);
    for i in 0..state.len() {
        let poly = voronoi_polygon(state, i, &bounds);
        if poly.0.is_empty() {
            continue;
        }
        let m = state.unit(i);
        let (area, f, s) = poly.moments_about([m[0], m[1]]);
        out.mass[i] = area / box_area;
        out.first[2 * i] = (f[0] + m[0] * area) / box_area;
        out.first[2 * i + 1] = (f[1] + m[1] * area) / box_area;
        out.spread[i] = s / box_area;
    }
    Ok(out)
}

/// Pairs of units whose cells share a boundary of positive length (1-D: consecutive weights).
pub fn voronoi_adjacency(dist: &StimuliDistribution, state: &NetworkState) -> Result<Vec<(usize, usize)>> {
    match dist.dim() {
        1 => {
            let order = sorted_units(state)?;
            Ok(order.windows(2).map(|p| (p[0].min(p[1]), p[0].max(p[1]))).collect())
        }
        2 => {
            let bounds = dist.bounds();
            let scale = (bounds[0].1 - bounds[0].0).max(bounds[1].1 - bounds[1].0);
            let tol = 1e-12 * scale;
            let mut pairs = Vec::new();
            for i in 0..state.len() {
                let poly = voronoi_polygon(state, i, &bounds);
                let mi = state.unit(i);
                for j in i + 1..state.len() {
                    let mj = state.unit(j);
                    let a = [mj[0] - mi[0], mj[1] - mi[1]];
                    let norm = (a[0] * a[0] + a[1] * a[1]).sqrt();
                    if norm == 0.0 {
                        continue;
                    }
                    let mid = [0.5 * (mi[0] + mj[0]), 0.5 * (mi[1] + mj[1])];
                    let on = |p: &[f64; 2]| ((p[0] - mid[0]) * a[0] + (p[1] - mid[1]) * a[1]).abs() / norm <= tol;
                    let pts = &poly.0;
                    let shared = (0..pts.len()).any(|k| {
                        let (p, q) = (&pts[k], &pts[(k + 1) % pts.len()]);
                        on(p) && on(q) && ((p[0] - q[0]).hypot(p[1] - q[1]) > tol)
                    });
                    if shared {
                        pairs.push((i, j));
                    }
                }
            }
            Ok(pairs)
        }
        d => Err(Error::Usage(format!("adjacency is only tracked for d <= 2, got d = {d}"))),
    }
}

/// A region of Ω to integrate μ over.
#[derive(Debug, Clone, Copy)]
pub enum Cell<'a> {
    Interval(f64, f64),
    Voronoi { state: &'a NetworkState, unit: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellStatistics {
    pub mass: f64,
    /// `None` when the cell carries no mass.
    pub mean: Option<Vec<f64>>,
    pub mass_se: Option<f64>,
    pub mean_se: Option<Vec<f64>>,
}

/// Mass and conditional mean of μ over a cell.
pub fn cell_statistics(dist: &StimuliDistribution, cell: Cell<'_>, policy: Policy) -> Result<CellStatistics> {
    match cell {
        Cell::Interval(a, b) => {
            if dist.dim() != 1 {
                return Err(Error::Usage("interval cells need a 1-D law".into()));
            }
            let (mass, first) = match dist {
                StimuliDistribution::Product(m) => m[0].interval_moments(a, b),
                StimuliDistribution::Discrete(set) => {
                    let w = 1.0 / set.len() as f64;
                    set.points()
                        .filter(|p| (a..=b).contains(&p[0]))
                        .fold((0.0, 0.0), |(m, f), p| (m + w, f + w * p[0]))
                }
            };
            Ok(CellStatistics {
                mass,
                mean: (mass > 0.0).then(|| vec![first / mass]),
                mass_se: None,
                mean_se: None,
            })
        }
        Cell::Voronoi { state, unit } => {
            if unit >= state.len() {
                return Err(Error::Index {
                    index: unit,
                    len: state.len(),
                });
            }
            let cm = cell_moments(dist, state, policy)?;
            let mass = cm.mass[unit];
            let (mass_se, mean_se) = match &cm.errors {
                Some(e) if mass > 0.0 => (
                    Some(e.mass[unit]),
                    Some(
                        (0..cm.dim)
                            .map(|k| e.first[unit * cm.dim + k] / mass)
                            .collect(),
                    ),
                ),
                Some(e) => (Some(e.mass[unit]), None),
                None => (None, None),
            };
            Ok(CellStatistics {
                mass,
                mean: cm.mean(unit),
                mass_se,
                mean_se,
            })
        }
    }
}
