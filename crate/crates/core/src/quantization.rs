//! Vector quantization: the distortion `V_n(m) = ½ ∫ min_i ‖m_i - x‖² dμ`,
//! its gradient, optimal quantizers and the quantized measure.
//!
//! The ½ factor is kept throughout, so `∇V_n` is exactly the 0-neighbor
//! mean field `h`.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cells::{cell_moments, interval_cells, Policy};
use crate::error::{Error, Result};
use crate::meanfield::{sup_norm, MeanField};
use crate::quad::integrate;
use crate::report::real;
use crate::som_engine::{euclidean_winner, initial_state, GainSchedule, Init, RunOptions, Som};
use crate::state::NetworkState;
use crate::stimuli::{DiscreteSet, Marginal, StimuliDistribution};
use crate::topology::{Lattice, Neighborhood};

pub const LLOYD_MAX_ITER: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Standard error; `None` when computed exactly.
    pub se: Option<f64>,
}

/// Collapses coinciding units. Returns the distinct weights and, for each,
/// the lowest unit index carrying it (the tie-break winner).
fn distinct_units(state: &NetworkState) -> (NetworkState, Vec<usize>) {
    let mut keep = Vec::new();
    for i in 0..state.len() {
        if !keep.iter().any(|&j: &usize| state.unit(j) == state.unit(i)) {
            keep.push(i);
        }
    }
    let w: Vec<f64> = keep.iter().flat_map(|&i| state.unit(i).to_vec()).collect();
    (NetworkState::new(state.dim(), w).expect("subset of a valid state"), keep)
}

pub fn distortion(state: &NetworkState, dist: &StimuliDistribution) -> Result<Estimate> {
    distortion_with(state, dist, Policy::auto(dist))
}

/// `V_n`; coinciding weights are allowed.
pub fn distortion_with(state: &NetworkState, dist: &StimuliDistribution, policy: Policy) -> Result<Estimate> {
    if state.dim() != dist.dim() {
        return Err(Error::Dimension {
            expected: dist.dim(),
            got: state.dim(),
        });
    }
    match policy {
        Policy::Deterministic => {
            let (distinct, _) = distinct_units(state);
            let cm = cell_moments(dist, &distinct, Policy::Deterministic)?;
            Ok(Estimate {
                value: 0.5 * cm.spread.iter().sum::<f64>(),
                se: None,
            })
        }
        Policy::MonteCarlo { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = dist.dim();
            let mut x = vec![0.0; d];
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..samples {
                dist.sample_into(&mut rng, &mut x);
                let i = euclidean_winner(state.weights(), d, &x);
                let v: f64 = 0.5 * state.unit(i).iter().zip(&x).map(|(m, x)| (m - x) * (m - x)).sum::<f64>();
                sum += v;
                sum_sq += v * v;
            }
            let s = samples.max(1) as f64;
            let mean = sum / s;
            Ok(Estimate {
                value: mean,
                se: Some(((sum_sq / s - mean * mean).max(0.0) / s).sqrt()),
            })
        }
    }
}

/// `∇V_n`, component `i` being `μ(C_i) m_i - ∫_{C_i} x dμ`.
pub fn distortion_gradient(state: &NetworkState, dist: &StimuliDistribution) -> Result<Vec<f64>> {
    if let Some((first, second)) = state.coinciding_units() {
        return Err(Error::Degenerate { first, second });
    }
    let cm = cell_moments(dist, state, Policy::auto(dist))?;
    let d = state.dim();
    let mut g = vec![0.0; state.weights().len()];
    for i in 0..state.len() {
        for k in 0..d {
            g[i * d + k] = cm.mass[i] * state.unit(i)[k] - cm.first[i * d + k];
        }
    }
    Ok(g)
}

/// Cell masses with the tie-break rule: among coinciding units the lowest
/// index owns the shared cell.
pub fn cell_masses(state: &NetworkState, dist: &StimuliDistribution) -> Result<Vec<f64>> {
    let (distinct, owners) = distinct_units(state);
    let cm = cell_moments(dist, &distinct, Policy::auto(dist))?;
    let mut masses = vec![0.0; state.len()];
    for (k, &i) in owners.iter().enumerate() {
        masses[i] = cm.mass[k];
    }
    Ok(masses)
}

#[derive(Debug, Clone)]
pub struct QuantizerReport {
    pub label: String,
    pub state: NetworkState,
    pub distortion: Estimate,
    pub masses: Vec<f64>,
    /// `n^{2/d} V_n`.
    pub scaled: f64,
    /// `‖∇V_n‖∞`; `None` at degenerate states.
    pub gradient_residual: Option<f64>,
    /// `∫ (F_n - F)²`, 1-D only.
    pub f_distance: Option<f64>,
    /// `sup |F_n - F|`, 1-D only.
    pub ks: Option<f64>,
}

impl QuantizerReport {
    pub fn new(label: impl Into<String>, state: NetworkState, dist: &StimuliDistribution) -> Result<Self> {
        let distortion = distortion(&state, dist)?;
        let masses = cell_masses(&state, dist)?;
        let gradient_residual = distortion_gradient(&state, dist).ok().map(|g| sup_norm(&g));
        let n = state.len() as f64;
        let scaled = n.powf(2.0 / state.dim() as f64) * distortion.value;
        let mut report = Self {
            label: label.into(),
            state,
            distortion,
            masses,
            scaled,
            gradient_residual,
            f_distance: None,
            ks: None,
        };
        if dist.as_1d().is_some() {
            let qm = quantized_measure(&report, dist)?;
            report.f_distance = qm.f_distance;
            report.ks = qm.ks;
        }
        Ok(report)
    }

    pub fn components_distinct(&self) -> bool {
        self.state.coinciding_units().is_none()
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub n: usize,
    pub dist: StimuliDistribution,
    pub schedule: GainSchedule,
    pub steps: u64,
    pub init: Init,
    pub seed: u64,
}

/// 0-neighbor training: stochastic gradient descent on `V_n`.
pub fn train_0neighbor(config: &TrainConfig) -> Result<QuantizerReport> {
    if !config.schedule.robbins_monro() {
        return Err(Error::Usage(format!(
            "0-neighbor training needs a Robbins-Monro schedule, got {}",
            config.schedule.label()
        )));
    }
    let som = Som::new(Lattice::string(config.n)?, Neighborhood::indicator0());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let initial = initial_state(som.lattice(), &config.dist, &config.init, &mut rng)?;
    let out = som.run(
        initial,
        &config.dist,
        &config.schedule,
        &RunOptions::steps(config.steps),
        &mut rng,
        &mut [],
    );
    QuantizerReport::new("trained", out.state, &config.dist)
}

fn marginal_quantile(m: &Marginal, u: f64) -> f64 {
    match m {
        Marginal::Uniform { lo, hi } => lo + (hi - lo) * u,
        Marginal::Density(d) => d.quantile(u),
    }
}

/// One Lloyd map `m_i <- E[x | C_i]` on a 1-D law; returns the largest move.
fn lloyd_1d(marginal: &Marginal, state: &mut NetworkState) -> Result<f64> {
    let (lo, hi) = marginal.bounds();
    let cells = interval_cells(state, lo, hi)?;
    let mut moved: f64 = 0.0;
    for (i, (a, b)) in cells.into_iter().enumerate() {
        let (mass, first) = marginal.interval_moments(a, b);
        if mass > 0.0 {
            let next = first / mass;
            moved = moved.max((next - state.weights()[i]).abs());
            state.weights_mut()[i] = next;
        }
    }
    Ok(moved)
}

/// The unique optimal `n`-quantizer of a log-concave 1-D law: Lloyd
/// iterations from the quantile grid, polished by Newton on `∇V_n`.
pub fn optimal_quantizer_1d(n: usize, dist: &StimuliDistribution, tolerance: f64) -> Result<QuantizerReport> {
    let Some(marginal) = dist.as_1d() else {
        return Err(Error::Usage("optimal 1-D quantizer needs a continuous 1-D law".into()));
    };
    if let Marginal::Density(d) = marginal {
        if !d.satisfies_h_mu() {
            return Err(Error::Usage(format!("density {} is not certified log-concave", d.name())));
        }
    }
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one code point".into()));
    }
    let start: Vec<f64> = (0..n)
        .map(|i| marginal_quantile(marginal, (2 * i + 1) as f64 / (2 * n) as f64))
        .collect();
    let mut state = NetworkState::scalar(&start)?;
    let lloyd_tol = tolerance.max(1e-10);
    for _ in 0..LLOYD_MAX_ITER {
        if lloyd_1d(marginal, &mut state)? < lloyd_tol {
            break;
        }
    }
    let mf = MeanField::new(Lattice::string(n)?, Neighborhood::indicator0(), dist.clone());
    let polished = mf.solve_equilibrium(&state, tolerance)?;
    let state = polished.state;
    if let Some((first, second)) = state.coinciding_units() {
        return Err(Error::Degenerate { first, second });
    }
    QuantizerReport::new("optimal", state, dist)
}

/// Best local minimum over `restarts` runs of stochastic descent followed by
/// Lloyd iterations, for laws of any dimension.
pub fn best_local_quantizer(n: usize, dist: &StimuliDistribution, restarts: usize, seed: u64) -> Result<QuantizerReport> {
    if restarts == 0 {
        return Err(Error::InvalidParameter("need at least one restart".into()));
    }
    let som = Som::new(Lattice::string(n)?, Neighborhood::indicator0());
    let schedule = GainSchedule::power(0.5, 1.0, 0.51)?;
    let policy = Policy::auto(dist);
    let candidates: Vec<Result<(f64, NetworkState)>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ r as u64);
            let initial = initial_state(som.lattice(), dist, &Init::Uniform, &mut rng)?;
            let steps = 20_000 * n as u64;
            let mut state = som.run(initial, dist, &schedule, &RunOptions::steps(steps), &mut rng, &mut []).state;
            for _ in 0..2_000 {
                let cm = cell_moments(dist, &state, policy)?;
                let mut moved: f64 = 0.0;
                for i in 0..n {
                    if let Some(mean) = cm.mean(i) {
                        for (w, c) in state.unit_mut(i).iter_mut().zip(mean) {
                            moved = moved.max((*w - c).abs());
                            *w = c;
                        }
                    }
                }
                if moved < 1e-12 {
                    break;
                }
            }
            Ok((distortion(&state, dist)?.value, state))
        })
        .collect();
    let mut best: Option<(f64, NetworkState)> = None;
    for c in candidates {
        let (v, s) = c?;
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, s));
        }
    }
    let (_, state) = best.expect("at least one restart");
    QuantizerReport::new(format!("best of {restarts} restarts"), state, dist)
}

#[derive(Debug, Clone)]
pub struct ZadorRow {
    pub n: usize,
    pub label: String,
    pub distortion: f64,
    pub scaled: f64,
    pub f_distance: Option<f64>,
}

/// `(n, V_n(m*_n), n^{2/d} V_n)` per `n`. 1-D laws use the exact optimum;
/// other laws the best local minimum over `restarts`.
pub fn zador_scan(ns: &[usize], dist: &StimuliDistribution, restarts: usize, seed: u64) -> Result<Vec<ZadorRow>> {
    ns.par_iter()
        .map(|&n| {
            let rep = if dist.as_1d().is_some() {
                optimal_quantizer_1d(n, dist, 1e-12)?
            } else {
                best_local_quantizer(n, dist, restarts, seed)?
            };
            Ok(ZadorRow {
                n,
                label: rep.label.clone(),
                distortion: rep.distortion.value,
                scaled: rep.scaled,
                f_distance: rep.f_distance,
            })
        })
        .collect()
}

pub fn write_zador_csv<W: Write>(rows: &[ZadorRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "kind", "distortion", "scaled_distortion", "f_distance"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.label.clone(),
            real(r.distortion),
            real(r.scaled),
            r.f_distance.map(real).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `μ_n = Σ μ(C_i) δ_{m_i}` and, in 1-D, its distances to μ.
#[derive(Debug, Clone)]
pub struct QuantizedMeasure {
    pub atoms: NetworkState,
    pub weights: Vec<f64>,
    pub f_distance: Option<f64>,
    pub ks: Option<f64>,
}

pub fn quantized_measure(report: &QuantizerReport, dist: &StimuliDistribution) -> Result<QuantizedMeasure> {
    let mut qm = QuantizedMeasure {
        atoms: report.state.clone(),
        weights: report.masses.clone(),
        f_distance: None,
        ks: None,
    };
    if let Some(marginal) = dist.as_1d() {
        let (f2, ks) = distribution_distances(marginal, report.state.weights(), &report.masses);
        qm.f_distance = Some(f2);
        qm.ks = Some(ks);
    }
    Ok(qm)
}

/// `(∫ (F_n - F)², sup |F_n - F|)` for atoms `points` with `weights`.
pub fn distribution_distances(marginal: &Marginal, points: &[f64], weights: &[f64]) -> (f64, f64) {
    let (lo, hi) = marginal.bounds();
    let mut atoms: Vec<(f64, f64)> = points.iter().copied().zip(weights.iter().copied()).collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut breaks: Vec<f64> = atoms.iter().map(|a| a.0).chain([lo, hi]).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let (mut l2, mut ks) = (0.0_f64, 0.0_f64);
    let mut k = 0;
    let mut level = 0.0;
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        while k < atoms.len() && atoms[k].0 <= a {
            level += atoms[k].1;
            k += 1;
        }
        let c = level;
        l2 += integrate(|x| (c - marginal.cdf(x)).powi(2), a, b, 1e-15);
        ks = ks.max((c - marginal.cdf(a)).abs()).max((c - marginal.cdf(b)).abs());
    }
    (l2, ks)
}

/// `Σ μ(C_i) g(m_i)`.
pub fn quantize_integrate<G: Fn(&[f64]) -> f64>(g: G, report: &QuantizerReport) -> f64 {
    report
        .state
        .units()
        .zip(&report.masses)
        .map(|(m, w)| w * g(m))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagnificationRow {
    pub unit: usize,
    pub position: f64,
    pub cell: (f64, f64),
    /// `1 / (n · cell width)`.
    pub code_density: f64,
    /// `f^{1/3} / ∫ f^{1/3}` at the code point.
    pub zador_density: f64,
    /// `μ(C_i) / cell width`.
    pub weight_density: f64,
    pub f: f64,
}

#[derive(Debug, Clone)]
pub struct MagnificationReport {
    pub rows: Vec<MagnificationRow>,
    /// Least-squares slope of `ln code_density` against `ln f`; `None`
    /// when `f` is flat over the code points or `n < 3`.
    pub exponent: Option<f64>,
}

/// Puts the code-point density of the optimal quantizer next to `f^{1/3}`
/// and the weights of `μ_n`. Descriptive only.
pub fn magnification_experiment(dist: &StimuliDistribution, n: usize) -> Result<MagnificationReport> {
    let Some(marginal) = dist.as_1d() else {
        return Err(Error::Usage("magnification needs a 1-D law".into()));
    };
    let rep = optimal_quantizer_1d(n, dist, 1e-12)?;
    let (lo, hi) = marginal.bounds();
    let pdf = |x: f64| match marginal {
        Marginal::Uniform { lo, hi } => {
            if (*lo..=*hi).contains(&x) {
                1.0 / (hi - lo)
            } else {
                0.0
            }
        }
        Marginal::Density(d) => d.pdf(x),
    };
    let norm = integrate(|x| pdf(x).cbrt(), lo, hi, 1e-14);
    let cells = interval_cells(&rep.state, lo, hi)?;
    let rows: Vec<MagnificationRow> = cells
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let m = rep.state.weights()[i];
            let width = b - a;
            MagnificationRow {
                unit: i,
                position: m,
                cell: (a, b),
                code_density: 1.0 / (n as f64 * width),
                zador_density: pdf(m).cbrt() / norm,
                weight_density: rep.masses[i] / width,
                f: pdf(m),
            }
        })
        .collect();
    let exponent = fitted_exponent(&rows);
    Ok(MagnificationReport { rows, exponent })
}

fn fitted_exponent(rows: &[MagnificationRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.f > 0.0)
        .map(|r| (r.f.ln(), r.code_density.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx < 1e-12 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

impl MagnificationReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "unit",
            "position",
            "cell_lo",
            "cell_hi",
            "code_density",
            "zador_density",
            "weight_density",
            "f",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.unit.to_string(),
                real(r.position),
                real(r.cell.0),
                real(r.cell.1),
                real(r.code_density),
                real(r.zador_density),
                real(r.weight_density),
                real(r.f),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `(1/2N) Σ_l Σ_j Λ(i(l), j) ‖m_j - x_l‖²` with `i(l)` the winner of `x_l`.
pub fn discrete_potential(som: &Som, state: &NetworkState, data: &DiscreteSet) -> Result<f64> {
    if state.dim() != data.dim() {
        return Err(Error::Dimension {
            expected: data.dim(),
            got: state.dim(),
        });
    }
    let mut total = 0.0;
    for x in data.points() {
        let i = som.winner(state, x);
        for (j, m) in state.units().enumerate() {
            let lam = som.coupling().get(i, j);
            if lam != 0.0 {
                total += lam * m.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            }
        }
    }
    Ok(total / (2.0 * data.len() as f64))
}

/// Exact expected change of the discrete potential over one step with gain
/// `eps`, the input drawn uniformly from the data. `None` when some input
/// would move a data point across a Voronoi border.
pub fn expected_potential_change(som: &Som, state: &NetworkState, data: &DiscreteSet, eps: f64) -> Result<Option<f64>> {
    let before = discrete_potential(som, state, data)?;
    let assignment: Vec<usize> = data.points().map(|x| som.winner(state, x)).collect();
    let mut total = 0.0;
    for x in data.points() {
        let next = som.stepped(state, x, eps);
        if data.points().zip(&assignment).any(|(y, &a)| som.winner(&next, y) != a) {
            return Ok(None);
        }
        total += discrete_potential(som, &next, data)? - before;
    }
    Ok(Some(total / data.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimuli::Density1d;

    fn s(v: &[f64]) -> NetworkState {
        NetworkState::scalar(v).unwrap()
    }

    fn midpoints(n: usize) -> NetworkState {
        s(&(1..=n).map(|i| (2 * i - 1) as f64 / (2 * n) as f64).collect::<Vec<_>>())
    }

    #[test]
    fn distortion_examples() {
        let u = StimuliDistribution::unit_cube(1);
        assert!((distortion(&s(&[0.5]), &u).unwrap().value - 1.0 / 24.0).abs() < 1e-15);
        assert!((distortion(&s(&[0.25, 0.75]), &u).unwrap().value - 1.0 / 96.0).abs() < 1e-15);
        let set = DiscreteSet::new(vec![0.0, 1.0], 1, vec![(0.0, 1.0)]).unwrap();
        let v = distortion(&s(&[0.5]), &StimuliDistribution::discrete(set)).unwrap();
        assert!((v.value - 0.125).abs() < 1e-15);
        // coinciding weights are fine
        let v = distortion(&s(&[0.5, 0.5]), &u).unwrap();
        assert!((v.value - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let u = StimuliDistribution::unit_cube(1);
        assert!(sup_norm(&distortion_gradient(&midpoints(7), &u).unwrap()) < 1e-15);
        assert!((distortion_gradient(&s(&[0.3]), &u).unwrap()[0] + 0.2).abs() < 1e-15);
        assert!(distortion_gradient(&s(&[0.3, 0.3]), &u).is_err());
    }

    #[test]
    fn optimal_uniform() {
        let u = StimuliDistribution::unit_cube(1);
        let r = optimal_quantizer_1d(4, &u, 1e-13).unwrap();
        assert!(r.state.max_abs_diff(&s(&[0.125, 0.375, 0.625, 0.875])) < 1e-12);
        let r = optimal_quantizer_1d(1, &u, 1e-13).unwrap();
        assert!((r.state.weights()[0] - 0.5).abs() < 1e-13);
    }

    #[test]
    fn midpoint_integration() {
        let u = StimuliDistribution::unit_cube(1);
        let rep = QuantizerReport::new("midpoints", midpoints(10), &u).unwrap();
        let v = quantize_integrate(|x| x[0] * x[0], &rep);
        assert!((v - 0.3325).abs() < 1e-14);
        assert!((quantize_integrate(|_| 2.5, &rep) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn measure_of_two_midpoints() {
        let u = StimuliDistribution::unit_cube(1);
        let rep = QuantizerReport::new("midpoints", midpoints(2), &u).unwrap();
        let qm = quantized_measure(&rep, &u).unwrap();
        assert_eq!(qm.weights, vec![0.5, 0.5]);
        // sawtooth of height 1/4 over two cells: 1 / (12 n²)
        assert!((qm.f_distance.unwrap() - 1.0 / 48.0).abs() < 1e-14);
        assert!((qm.ks.unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn magnification_uniform_agrees() {
        let rep = magnification_experiment(&StimuliDistribution::unit_cube(1), 8).unwrap();
        for r in &rep.rows {
            assert!((r.code_density - 1.0).abs() < 1e-9);
            assert!((r.zador_density - 1.0).abs() < 1e-9);
            assert!((r.weight_density - 1.0).abs() < 1e-9);
        }
        assert!(rep.exponent.is_none());
        let one = magnification_experiment(&StimuliDistribution::density(Density1d::linear()), 1).unwrap();
        assert_eq!(one.rows.len(), 1);
    }

    #[test]
    fn discrete_potential_examples() {
        let set = DiscreteSet::new(vec![0.1, 0.3, 0.8, 0.9], 1, vec![(0.0, 1.0)]).unwrap();
        let zero = Som::new(Lattice::string(2).unwrap(), Neighborhood::indicator0());
        let st = s(&[0.25, 0.7]);
        let dist = StimuliDistribution::discrete(set.clone());
        let u = discrete_potential(&zero, &st, &set).unwrap();
        assert!((u - distortion(&st, &dist).unwrap().value).abs() < 1e-15);
        let single = DiscreteSet::new(vec![0.2], 1, vec![(0.0, 1.0)]).unwrap();
        let one = Som::new(Lattice::string(1).unwrap(), Neighborhood::indicator0());
        assert!((discrete_potential(&one, &s(&[0.6]), &single).unwrap() - 0.08).abs() < 1e-15);
    }

    #[test]
    fn training_requires_robbins_monro() {
        let cfg = TrainConfig {
            n: 3,
            dist: StimuliDistribution::unit_cube(1),
            schedule: GainSchedule::constant(0.1).unwrap(),
            steps: 10,
            init: Init::Ordered,
            seed: 1,
        };
        assert!(train_0neighbor(&cfg).is_err());
        let zero = TrainConfig {
            schedule: GainSchedule::power(1.0, 100.0, 1.0).unwrap(),
            steps: 0,
            init: Init::Explicit(s(&[0.2, 0.5, 0.6])),
            ..cfg
        };
        let rep = train_0neighbor(&zero).unwrap();
        assert_eq!(rep.state.weights(), &[0.2, 0.5, 0.6]);
    }
}
