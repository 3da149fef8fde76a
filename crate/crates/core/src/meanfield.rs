//! The mean field `h(m) = E[H(x, m)]`, its Jacobian, the flow `dm/dt = -h(m)`
//! and equilibrium analysis.
//!
//! Sign convention: [`Jacobian`] holds `∇h`. The flow's linearization is
//! `-∇h`, so stability is read off the spectrum of `-∇h` and cooperativity
//! means the off-diagonal entries of `∇h` are non-positive.

use nalgebra::{Complex, DMatrix, DVector, Schur};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cells::{cell_moments, voronoi_adjacency, CellMoments, Policy};
use crate::error::{Error, Result};
use crate::som_engine::euclidean_winner;
use crate::state::NetworkState;
use crate::stimuli::{Marginal, StimuliDistribution};
use crate::topology::{Coupling, Lattice, Neighborhood};

pub const FD_STEP: f64 = 1e-5;
pub const NEWTON_MAX_ITER: usize = 60;
/// Half-width of the band where a spectrum is called inconclusive.
pub const STABILITY_BAND: f64 = 1e-8;
pub const COOPERATIVE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct MeanField {
    lattice: Lattice,
    neighborhood: Neighborhood,
    coupling: Coupling,
    dist: StimuliDistribution,
    policy: Policy,
}

/// `h` with Monte Carlo standard errors when sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldValue {
    pub h: Vec<f64>,
    pub se: Option<Vec<f64>>,
}

impl FieldValue {
    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.h)
    }
}

fn sort_by_real(z: &mut [Complex<f64>]) {
    z.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
}

pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

#[derive(Debug, Clone)]
pub struct Jacobian {
    /// `∇h`, rows and columns over flat coordinates `i * d + k`.
    pub matrix: DMatrix<f64>,
    /// Columns whose ± perturbation changed the Voronoi adjacency.
    pub flagged: Vec<bool>,
}

impl Jacobian {
    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.matrix.nrows();
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(self.matrix[(i, j)]);
                }
            }
        }
        worst
    }

    pub fn is_cooperative(&self, tol: f64) -> bool {
        self.matrix.nrows() < 2 || self.max_off_diagonal() <= tol
    }

    /// Eigenvalues of the flow linearization `-∇h`.
    pub fn spectrum(&self) -> Result<Spectrum> {
        Spectrum::of(&(-&self.matrix))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    Inconclusive,
}

impl Stability {
    pub fn from_max_real(max_real: f64) -> Self {
        if max_real < -STABILITY_BAND {
            Stability::Stable
        } else if max_real > STABILITY_BAND {
            Stability::Unstable
        } else {
            Stability::Inconclusive
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Sorted by decreasing real part.
    pub eigenvalues: Vec<Complex<f64>>,
}

impl Spectrum {
    /// Eigenvalues through a real Schur decomposition. The QR iteration is
    /// capped and retried with looser deflation thresholds, since it can
    /// stall on clustered spectra.
    pub fn of(matrix: &DMatrix<f64>) -> Result<Self> {
        for eps in [f64::EPSILON, 1e-13, 1e-11] {
            if let Some(schur) = Schur::try_new(matrix.clone(), eps, 10_000) {
                let mut eigenvalues: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
                sort_by_real(&mut eigenvalues);
                return Ok(Self { eigenvalues });
            }
        }
        Err(Error::NoConvergence {
            what: "eigenvalues",
            residual: f64::NAN,
        })
    }

    pub fn max_real(&self) -> f64 {
        self.eigenvalues.first().map_or(f64::NEG_INFINITY, |z| z.re)
    }

    pub fn top_real_parts(&self, k: usize) -> Vec<f64> {
        self.eigenvalues.iter().take(k).map(|z| z.re).collect()
    }

    pub fn verdict(&self) -> Stability {
        Stability::from_max_real(self.max_real())
    }
}

#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub state: NetworkState,
    pub residual: f64,
    pub iterations: usize,
    pub used_flow: bool,
    pub jacobian: Jacobian,
    pub spectrum: Spectrum,
    pub cooperative: bool,
}

impl EquilibriumReport {
    pub fn max_real(&self) -> f64 {
        self.spectrum.max_real()
    }

    pub fn stability(&self) -> Stability {
        self.spectrum.verdict()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub dt: f64,
    /// Recorded trajectory samples are `record_every` integrator steps apart; 0 disables.
    pub record_every: usize,
    /// Endpoint change allowed when the step is halved.
    pub tolerance: f64,
    pub max_halvings: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            dt: 0.1,
            record_every: 0,
            tolerance: 1e-8,
            max_halvings: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Flow {
    pub state: NetworkState,
    /// `(time, state)` samples including both ends when recording.
    pub trajectory: Vec<(f64, NetworkState)>,
    /// Step that passed the halving check.
    pub dt: f64,
    /// Endpoint change observed when halving `dt`.
    pub halving_change: f64,
}

impl MeanField {
    pub fn new(lattice: Lattice, neighborhood: Neighborhood, dist: StimuliDistribution) -> Self {
        let coupling = Coupling::new(&lattice, &neighborhood);
        let policy = Policy::auto(&dist);
        Self {
            lattice,
            neighborhood,
            coupling,
            dist,
            policy,
        }
    }

    pub fn with_policy(mut self, policy: Policy) -> Self {
        self.policy = policy;
        self
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn neighborhood(&self) -> &Neighborhood {
        &self.neighborhood
    }

    pub fn distribution(&self) -> &StimuliDistribution {
        &self.dist
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    fn check(&self, state: &NetworkState) -> Result<()> {
        if state.len() != self.lattice.len() {
            return Err(Error::Dimension {
                expected: self.lattice.len(),
                got: state.len(),
            });
        }
        if state.dim() != self.dist.dim() {
            return Err(Error::Dimension {
                expected: self.dist.dim(),
                got: state.dim(),
            });
        }
        Ok(())
    }

    /// `h` and, on the sampled path, its standard errors.
    pub fn evaluate(&self, state: &NetworkState) -> Result<FieldValue> {
        self.evaluate_with(state, self.policy)
    }

    pub fn h(&self, state: &NetworkState) -> Result<Vec<f64>> {
        Ok(self.evaluate(state)?.h)
    }

    fn evaluate_with(&self, state: &NetworkState, policy: Policy) -> Result<FieldValue> {
        self.check(state)?;
        match policy {
            Policy::Deterministic => {
                let cm = cell_moments(&self.dist, state, Policy::Deterministic)?;
                Ok(FieldValue {
                    h: self.field_from_moments(state, &cm),
                    se: None,
                })
            }
            Policy::MonteCarlo { samples, seed } => Ok(self.sampled_field(state, samples, seed)),
        }
    }

    /// `h_i = Σ_j Λ_ij (μ(C_j) m_i - ∫_{C_j} x dμ)`.
    pub fn field_from_moments(&self, state: &NetworkState, cm: &CellMoments) -> Vec<f64> {
        let d = state.dim();
        let mut h = vec![0.0; state.weights().len()];
        for i in 0..state.len() {
            let m = state.unit(i);
            for (j, &lam) in self.coupling.row(i).iter().enumerate() {
                if lam == 0.0 || cm.mass[j] == 0.0 {
                    continue;
                }
                for k in 0..d {
                    h[i * d + k] += lam * (cm.mass[j] * m[k] - cm.first[j * d + k]);
                }
            }
        }
        h
    }

    fn sampled_field(&self, state: &NetworkState, samples: usize, seed: u64) -> FieldValue {
        let d = state.dim();
        let len = state.weights().len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sum = vec![0.0; len];
        let mut sum_sq = vec![0.0; len];
        let mut x = vec![0.0; d];
        for _ in 0..samples {
            self.dist.sample_into(&mut rng, &mut x);
            let j = euclidean_winner(state.weights(), d, &x);
            for i in 0..state.len() {
                let lam = self.coupling.get(j, i);
                if lam == 0.0 {
                    continue;
                }
                let m = state.unit(i);
                for k in 0..d {
                    let v = lam * (m[k] - x[k]);
                    sum[i * d + k] += v;
                    sum_sq[i * d + k] += v * v;
                }
            }
        }
        let s = samples.max(1) as f64;
        let h: Vec<f64> = sum.iter().map(|v| v / s).collect();
        let se = h
            .iter()
            .zip(&sum_sq)
            .map(|(mean, sq)| ((sq / s - mean * mean).max(0.0) / s).sqrt())
            .collect();
        FieldValue { h, se: Some(se) }
    }

    /// Central finite-difference `∇h`; columns are computed in parallel and a
    /// sampled policy reuses one stream for both sides of each column.
    pub fn jacobian(&self, state: &NetworkState, step: f64) -> Result<Jacobian> {
        self.check(state)?;
        if step <= 0.0 {
            return Err(Error::InvalidParameter(format!("finite-difference step {step} must be positive")));
        }
        let len = state.weights().len();
        let base_adjacency = self.adjacency(state);
        let columns: Vec<Result<(Vec<f64>, bool)>> = (0..len)
            .into_par_iter()
            .map(|c| {
                let policy = match self.policy {
                    Policy::MonteCarlo { samples, seed } => Policy::MonteCarlo {
                        samples,
                        seed: seed ^ (c as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
                    },
                    p => p,
                };
                let plus = state.perturbed(c, step);
                let minus = state.perturbed(c, -step);
                let hp = self.evaluate_with(&plus, policy)?.h;
                let hm = self.evaluate_with(&minus, policy)?.h;
                let col = hp.iter().zip(&hm).map(|(a, b)| (a - b) / (2.0 * step)).collect();
                let flagged = match &base_adjacency {
                    Some(base) => {
                        self.adjacency(&plus).as_ref() != Some(base) || self.adjacency(&minus).as_ref() != Some(base)
                    }
                    None => false,
                };
                Ok((col, flagged))
            })
            .collect();
        let mut matrix = DMatrix::zeros(len, len);
        let mut flagged = vec![false; len];
        for (c, col) in columns.into_iter().enumerate() {
            let (col, flag) = col?;
            matrix.set_column(c, &DVector::from_vec(col));
            flagged[c] = flag;
        }
        Ok(Jacobian { matrix, flagged })
    }

    fn adjacency(&self, state: &NetworkState) -> Option<Vec<(usize, usize)>> {
        if self.dist.dim() > 2 {
            return None;
        }
        voronoi_adjacency(&self.dist, state).ok()
    }

    fn rk4(&self, state: &NetworkState, horizon: f64, dt: f64, record_every: usize) -> Result<Flow> {
        let steps = (horizon / dt).ceil().max(1.0) as usize;
        let h = horizon / steps as f64;
        let mut m = state.clone();
        let mut trajectory = Vec::new();
        if record_every > 0 {
            trajectory.push((0.0, m.clone()));
        }
        let axpy = |base: &NetworkState, k: &[f64], a: f64| {
            let mut s = base.clone();
            for (w, kv) in s.weights_mut().iter_mut().zip(k) {
                *w -= a * kv;
            }
            s
        };
        for s in 1..=steps {
            let k1 = self.h(&m)?;
            let k2 = self.h(&axpy(&m, &k1, h / 2.0))?;
            let k3 = self.h(&axpy(&m, &k2, h / 2.0))?;
            let k4 = self.h(&axpy(&m, &k3, h))?;
            for (i, w) in m.weights_mut().iter_mut().enumerate() {
                *w -= h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if record_every > 0 && (s % record_every == 0 || s == steps) {
                trajectory.push((s as f64 * h, m.clone()));
            }
        }
        Ok(Flow {
            state: m,
            trajectory,
            dt: h,
            halving_change: 0.0,
        })
    }

    /// Integrates `dm/dt = -h(m)` with classical RK4. The step is halved until
    /// halving it once more moves the endpoint by less than the tolerance.
    pub fn ode_flow(&self, initial: &NetworkState, horizon: f64, options: FlowOptions) -> Result<Flow> {
        self.check(initial)?;
        if !(horizon >= 0.0) || !(options.dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "flow needs horizon >= 0 and dt > 0, got {horizon} and {}",
                options.dt
            )));
        }
        if horizon == 0.0 {
            return Ok(Flow {
                state: initial.clone(),
                trajectory: if options.record_every > 0 {
                    vec![(0.0, initial.clone())]
                } else {
                    Vec::new()
                },
                dt: options.dt,
                halving_change: 0.0,
            });
        }
        let mut dt = options.dt;
        let mut coarse = self.rk4(initial, horizon, dt, options.record_every)?;
        for _ in 0..=options.max_halvings {
            let fine = self.rk4(initial, horizon, dt / 2.0, 0)?;
            let change = coarse.state.max_abs_diff(&fine.state);
            if change < options.tolerance {
                coarse.halving_change = change;
                return Ok(coarse);
            }
            dt /= 2.0;
            coarse = self.rk4(initial, horizon, dt, options.record_every.saturating_mul(2))?;
        }
        Err(Error::Integration(format!(
            "step still not validated after {} halvings (dt = {dt:e})",
            options.max_halvings
        )))
    }

    /// Damped Newton on `h` with the finite-difference Jacobian, falling back
    /// to the flow when Newton stalls.
    pub fn solve_equilibrium(&self, initial: &NetworkState, tolerance: f64) -> Result<EquilibriumReport> {
        self.check(initial)?;
        let mut state = initial.clone();
        let mut used_flow = false;
        let mut iterations = 0;
        let mut best = f64::INFINITY;
        for attempt in 0..2 {
            match self.newton(&mut state, tolerance, &mut iterations) {
                Ok(residual) if residual <= tolerance => return self.report(state, residual, iterations, used_flow),
                Ok(residual) => best = best.min(residual),
                Err(Error::NoConvergence { residual, .. }) => best = best.min(residual),
                Err(e) if attempt == 1 => return Err(e),
                Err(_) => {}
            }
            if attempt == 0 {
                used_flow = true;
                let flow = self.ode_flow(&state, 200.0, FlowOptions::default())?;
                state = flow.state;
                let r = sup_norm(&self.h(&state)?);
                best = best.min(r);
                if r <= tolerance {
                    return self.report(state, r, iterations, used_flow);
                }
            }
        }
        Err(Error::NoConvergence {
            what: "equilibrium",
            residual: best,
        })
    }

    fn newton(&self, state: &mut NetworkState, tolerance: f64, iterations: &mut usize) -> Result<f64> {
        let mut h = self.h(state)?;
        let mut residual = sup_norm(&h);
        for _ in 0..NEWTON_MAX_ITER {
            if residual <= tolerance {
                return Ok(residual);
            }
            *iterations += 1;
            let jac = self.jacobian(state, FD_STEP)?;
            let rhs = DVector::from_iterator(h.len(), h.iter().map(|v| -v));
            let delta = jac
                .matrix
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Singular("Newton Jacobian".into()))?;
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let mut trial = state.clone();
                for (w, dv) in trial.weights_mut().iter_mut().zip(delta.iter()) {
                    *w += lambda * dv;
                }
                if let Ok(th) = self.h(&trial) {
                    let r = sup_norm(&th);
                    if r < residual {
                        *state = trial;
                        h = th;
                        residual = r;
                        accepted = true;
                        break;
                    }
                }
                lambda /= 2.0;
            }
            if !accepted {
                break;
            }
        }
        if residual <= tolerance {
            Ok(residual)
        } else {
            Err(Error::NoConvergence {
                what: "Newton",
                residual,
            })
        }
    }

    fn report(&self, state: NetworkState, residual: f64, iterations: usize, used_flow: bool) -> Result<EquilibriumReport> {
        let jacobian = self.jacobian(&state, FD_STEP)?;
        let spectrum = jacobian.spectrum()?;
        let cooperative = jacobian.is_cooperative(COOPERATIVE_TOL);
        Ok(EquilibriumReport {
            state,
            residual,
            iterations,
            used_flow,
            jacobian,
            spectrum,
            cooperative,
        })
    }
}

/// The ordered equilibrium of `n` units under uniform μ on `[0, 1]` for a
/// 0/1-valued Λ on a string.
///
/// In an ordered state the units with `Λ_ij = 1` own a contiguous union of
/// cells `[A_i, B_i]`, and `h_i = 0` says `m_i` is its midpoint. With cell
/// bounds at midpoints of consecutive weights, `2 m_i = A_i + B_i` is linear.
pub fn uniform_limit_linear_system(n: usize, neighborhood: &Neighborhood) -> Result<NetworkState> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one unit".into()));
    }
    if !neighborhood.is_step_like() {
        return Err(Error::Usage(format!(
            "the ordered uniform equilibrium is linear only for 0/1 neighborhoods, got {}",
            neighborhood.label()
        )));
    }
    let reach = neighborhood.values().len() - 1;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    // boundary k sits between units k-1 and k; boundary 0 is 0 and boundary n is 1
    let mut add_boundary = |row: usize, k: usize, a: &mut DMatrix<f64>| {
        if k == 0 {
        } else if k == n {
            b[row] += 1.0;
        } else {
            a[(row, k - 1)] -= 0.5;
            a[(row, k)] -= 0.5;
        }
    };
    for i in 0..n {
        a[(i, i)] += 2.0;
        let lo = i.saturating_sub(reach);
        let hi = (i + reach).min(n - 1);
        add_boundary(i, lo, &mut a);
        add_boundary(i, hi + 1, &mut a);
    }
    let m = a.clone().lu().solve(&b).ok_or_else(|| {
        Error::Singular(format!("uniform limit system for n = {n}, {}", neighborhood.label()))
    })?;
    NetworkState::scalar(m.as_slice())
}

/// Product grid state: unit `(i1, i2)` (flat index `i1 + n1 * i2`) gets
/// weight `(a[i1], b[i2])`.
pub fn grid_state(axes: &[NetworkState]) -> Result<(Lattice, NetworkState)> {
    let [a, b] = axes else {
        return Err(Error::Usage(format!("grid states need two axes, got {}", axes.len())));
    };
    if a.dim() != 1 || b.dim() != 1 {
        return Err(Error::Usage("axis equilibria must be scalar states".into()));
    }
    let lattice = Lattice::grid(a.len(), b.len())?;
    let mut w = Vec::with_capacity(2 * lattice.len());
    for &y in b.weights() {
        for &x in a.weights() {
            w.push(x);
            w.push(y);
        }
    }
    Ok((lattice, NetworkState::new(2, w)?))
}

#[derive(Debug, Clone)]
pub struct DimensionSelection {
    pub state: NetworkState,
    pub residual: f64,
    pub spectrum: Spectrum,
    pub stability: Stability,
}

/// Embeds a 1-D equilibrium `m1` of `base` into two dimensions with the
/// second coordinate of every unit at the mean of `noise`, and reports the
/// residual and spectrum of the augmented field.
///
/// A zero-width `noise` is handled analytically: the field decouples into the
/// base field and a relaxation `-Σ_j Λ_ij μ(C_j)` of each unit's second
/// coordinate.
pub fn dimension_selection(base: &MeanField, m1: &NetworkState, noise: Marginal, offset: f64) -> Result<DimensionSelection> {
    let Some(first) = base.distribution().as_1d().cloned() else {
        return Err(Error::Usage("dimension selection needs a 1-D base distribution".into()));
    };
    base.check(m1)?;
    let center = noise.mean() + offset;
    let mut w = Vec::with_capacity(2 * m1.len());
    for &x in m1.weights() {
        w.push(x);
        w.push(center);
    }
    let state = NetworkState::new(2, w)?;
    let (lo, hi) = noise.bounds();
    if hi <= lo {
        let cm = cell_moments(base.distribution(), m1, base.policy())?;
        let h1 = base.field_from_moments(m1, &cm);
        let mut residual = sup_norm(&h1);
        let mut spectrum = base.jacobian(m1, FD_STEP)?.spectrum()?;
        for i in 0..m1.len() {
            let rate: f64 = base
                .coupling
                .row(i)
                .iter()
                .zip(&cm.mass)
                .map(|(lam, mass)| lam * mass)
                .sum();
            residual = residual.max((rate * (center - lo)).abs());
            spectrum.eigenvalues.push(Complex::new(-rate, 0.0));
        }
        sort_by_real(&mut spectrum.eigenvalues);
        let stability = spectrum.verdict();
        return Ok(DimensionSelection {
            state,
            residual,
            spectrum,
            stability,
        });
    }
    let dist = StimuliDistribution::product(vec![first, noise])?;
    let mf = MeanField::new(base.lattice.clone(), base.neighborhood.clone(), dist);
    let residual = mf.evaluate(&state)?.sup_norm();
    let spectrum = mf.jacobian(&state, FD_STEP)?.spectrum()?;
    let stability = spectrum.verdict();
    Ok(DimensionSelection {
        state,
        residual,
        spectrum,
        stability,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimuli::Density1d;

    fn uniform_string(n: usize, lam: Neighborhood) -> MeanField {
        MeanField::new(Lattice::string(n).unwrap(), lam, StimuliDistribution::unit_cube(1))
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn h_examples() {
        let one = uniform_string(1, Neighborhood::indicator0());
        assert!(one.h(&NetworkState::scalar(&[0.5]).unwrap()).unwrap()[0].abs() < 1e-15);
        assert!((one.h(&NetworkState::scalar(&[0.3]).unwrap()).unwrap()[0] + 0.2).abs() < 1e-15);
        let three = uniform_string(3, Neighborhood::step(1));
        let h = three.h(&NetworkState::scalar(&[0.3, 0.5, 0.7]).unwrap()).unwrap();
        assert!(sup_norm(&h) < 1e-15);
    }

    #[test]
    fn degenerate_state_is_an_error() {
        let mf = uniform_string(3, Neighborhood::step(1));
        let s = NetworkState::scalar(&[0.4, 0.4, 0.7]).unwrap();
        assert!(matches!(mf.h(&s), Err(Error::Degenerate { first: 0, second: 1 })));
    }

    #[test]
    fn jacobian_of_single_unit_is_one() {
        let mf = uniform_string(1, Neighborhood::indicator0());
        for m in [0.1, 0.5, 0.77] {
            let j = mf.jacobian(&NetworkState::scalar(&[m]).unwrap(), FD_STEP).unwrap();
            assert!((j.matrix[(0, 0)] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn three_unit_equilibrium() {
        let mf = uniform_string(3, Neighborhood::step(1));
        let rep = mf
            .solve_equilibrium(&NetworkState::scalar(&[0.1, 0.45, 0.8]).unwrap(), 1e-12)
            .unwrap();
        assert!(close(rep.state.weights(), &[0.3, 0.5, 0.7], 1e-10));
        assert!(rep.cooperative);
        assert_eq!(rep.stability(), Stability::Stable);
        // ∇h eigenvalues are 0.45, 0.75 and 1
        let re = rep.spectrum.top_real_parts(3);
        assert!(close(&re, &[-0.45, -0.75, -1.0], 1e-8), "{re:?}");
    }

    #[test]
    fn flow_converges_and_fixed_points_stay() {
        let mf = uniform_string(3, Neighborhood::step(1));
        let start = NetworkState::scalar(&[0.2, 0.4, 0.9]).unwrap();
        let flow = mf.ode_flow(&start, 60.0, FlowOptions::default()).unwrap();
        assert!(close(flow.state.weights(), &[0.3, 0.5, 0.7], 1e-6));
        let eq = NetworkState::scalar(&[0.3, 0.5, 0.7]).unwrap();
        let stay = mf.ode_flow(&eq, 10.0, FlowOptions::default()).unwrap();
        assert!(stay.state.max_abs_diff(&eq) < 1e-8);
        let none = mf.ode_flow(&start, 0.0, FlowOptions::default()).unwrap();
        assert_eq!(none.state, start);
    }

    #[test]
    fn linear_system_examples() {
        let m = uniform_limit_linear_system(3, &Neighborhood::step(1)).unwrap();
        assert!(close(m.weights(), &[0.3, 0.5, 0.7], 1e-14));
        let m = uniform_limit_linear_system(2, &Neighborhood::step(1)).unwrap();
        assert!(close(m.weights(), &[0.5, 0.5], 1e-14));
        let m = uniform_limit_linear_system(10, &Neighborhood::indicator0()).unwrap();
        let mid: Vec<f64> = (1..=10).map(|i| (2 * i - 1) as f64 / 20.0).collect();
        assert!(close(m.weights(), &mid, 1e-14));
        let soft = Neighborhood::table(vec![1.0, 0.5]).unwrap();
        assert!(uniform_limit_linear_system(4, &soft).is_err());
    }

    #[test]
    fn newton_matches_linear_system() {
        for lam in [Neighborhood::indicator0(), Neighborhood::step(1), Neighborhood::step(2)] {
            for n in 3..=10 {
                let exact = uniform_limit_linear_system(n, &lam).unwrap();
                let start: Vec<f64> = (0..n).map(|i| (i as f64 + 0.3) / n as f64).collect();
                let rep = uniform_string(n, lam.clone())
                    .solve_equilibrium(&NetworkState::scalar(&start).unwrap(), 1e-13)
                    .unwrap();
                assert!(rep.state.max_abs_diff(&exact) < 1e-8, "{} n={n}", lam.label());
            }
        }
    }

    #[test]
    fn gaussian_equilibrium_is_cooperative_and_stable() {
        let dist = StimuliDistribution::density(Density1d::truncated_gaussian(0.5, 0.25).unwrap());
        let mf = MeanField::new(Lattice::string(5).unwrap(), Neighborhood::step(1), dist);
        let start = NetworkState::scalar(&[0.1, 0.3, 0.5, 0.7, 0.9]).unwrap();
        let rep = mf.solve_equilibrium(&start, 1e-11).unwrap();
        assert!(rep.cooperative);
        assert_eq!(rep.stability(), Stability::Stable);
    }

    #[test]
    fn grid_equilibrium_residual() {
        let axis = NetworkState::scalar(&[0.3, 0.5, 0.7]).unwrap();
        let (lattice, state) = grid_state(&[axis.clone(), axis]).unwrap();
        let mf = MeanField::new(lattice, Neighborhood::indicator8(), StimuliDistribution::unit_cube(2));
        assert!(mf.evaluate(&state).unwrap().sup_norm() < 1e-12);
        // unit (2, 1) sits at (0.7, 0.5)
        assert_eq!(state.unit(5), &[0.7, 0.5]);
    }

    #[test]
    fn small_grid_is_stable() {
        let axis = NetworkState::scalar(&[0.25, 0.75]).unwrap();
        let (lattice, state) = grid_state(&[axis.clone(), axis]).unwrap();
        let mf = MeanField::new(lattice, Neighborhood::indicator0(), StimuliDistribution::unit_cube(2));
        let j = mf.jacobian(&state, FD_STEP).unwrap();
        assert_eq!(j.spectrum().unwrap().verdict(), Stability::Stable);
    }

    #[test]
    fn sampled_field_brackets_exact() {
        let dist = StimuliDistribution::unit_cube(2);
        let s = NetworkState::new(2, vec![0.2, 0.3, 0.7, 0.4, 0.5, 0.8]).unwrap();
        let exact = MeanField::new(Lattice::string(3).unwrap(), Neighborhood::step(1), dist.clone());
        let mc = exact.clone().with_policy(Policy::MonteCarlo { samples: 200_000, seed: 3 });
        let e = exact.evaluate(&s).unwrap();
        let m = mc.evaluate(&s).unwrap();
        let se = m.se.unwrap();
        for (k, se) in se.iter().enumerate() {
            assert!((e.h[k] - m.h[k]).abs() <= 4.0 * se, "coord {k}");
        }
    }

    #[test]
    fn dimension_selection_zero_width() {
        let mf = uniform_string(3, Neighborhood::step(1));
        let m1 = NetworkState::scalar(&[0.3, 0.5, 0.7]).unwrap();
        let flat = Marginal::Uniform { lo: 0.0, hi: 0.0 };
        let r = dimension_selection(&mf, &m1, flat.clone(), 0.0).unwrap();
        assert!(r.residual < 1e-15);
        assert_eq!(r.spectrum.eigenvalues.len(), 6);
        assert_eq!(r.stability, Stability::Stable);
        let off = dimension_selection(&mf, &m1, flat, 0.5).unwrap();
        assert!(off.residual > 0.1);
    }

    #[test]
    fn dimension_selection_thin_noise() {
        let mf = uniform_string(3, Neighborhood::step(1));
        let m1 = NetworkState::scalar(&[0.3, 0.5, 0.7]).unwrap();
        let r = dimension_selection(&mf, &m1, Marginal::Uniform { lo: -0.01, hi: 0.01 }, 0.0).unwrap();
        assert!(r.residual < 1e-12);
        assert_eq!(r.stability, Stability::Stable);
    }
}
