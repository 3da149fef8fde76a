//! The Kohonen process: winner selection, the one-step update and trajectory
//! simulation under a gain schedule.
//!
//! One step draws `x`, finds the winner `i0` and moves every unit toward `x`:
//!
//! ```text
//! m_i <- m_i - eps_t * Λ(dist(i0, i)) * (m_i - x)
//! ```

use std::ops::ControlFlow;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::state::NetworkState;
use crate::stimuli::StimuliDistribution;
use crate::topology::{Coupling, Lattice, LatticeKind, Neighborhood};

/// Observer stride used when callers do not choose one.
pub const DEFAULT_STRIDE: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainSchedule {
    Constant(f64),
    /// `a / (b + t)^gamma`
    Power { a: f64, b: f64, gamma: f64 },
    /// `a / ln(t + e)`
    Log { a: f64 },
}

impl GainSchedule {
    pub fn constant(eps: f64) -> Result<Self> {
        Self::Constant(eps).validated()
    }

    /// `ε = 0`: the process never moves. Only useful as a control.
    pub fn frozen() -> Self {
        Self::Constant(0.0)
    }

    pub fn is_frozen(&self) -> bool {
        *self == Self::Constant(0.0)
    }

    pub fn power(a: f64, b: f64, gamma: f64) -> Result<Self> {
        if !(b > 0.0 && gamma > 0.0) {
            return Err(invalid("power schedule needs b > 0 and gamma > 0"));
        }
        Self::Power { a, b, gamma }.validated()
    }

    pub fn log(a: f64) -> Result<Self> {
        Self::Log { a }.validated()
    }

    // every kind is non-increasing in t, so checking t = 0 bounds all gains
    fn validated(self) -> Result<Self> {
        let g0 = self.gain(0);
        if g0 > 0.0 && g0 < 1.0 {
            Ok(self)
        } else {
            Err(invalid(format!("gain at t=0 is {g0}, must lie in ]0,1[")))
        }
    }

    #[inline]
    pub fn gain(&self, t: u64) -> f64 {
        match *self {
            GainSchedule::Constant(eps) => eps,
            GainSchedule::Power { a, b, gamma } => a / (b + t as f64).powf(gamma),
            GainSchedule::Log { a } => a / (t as f64 + std::f64::consts::E).ln(),
        }
    }

    /// `Σ ε_t = ∞` and `Σ ε_t² < ∞`.
    pub fn robbins_monro(&self) -> bool {
        matches!(*self, GainSchedule::Power { gamma, .. } if gamma > 0.5 && gamma <= 1.0)
    }

    pub fn label(&self) -> String {
        match *self {
            GainSchedule::Constant(e) => format!("constant({e})"),
            GainSchedule::Power { a, b, gamma } => format!("power({a},{b},{gamma})"),
            GainSchedule::Log { a } => format!("log({a})"),
        }
    }
}

/// Distance used to pick the winner.
#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Euclidean,
    /// `Σ_t (x_t - m_t)² / mass_t`
    Chi2 { masses: Vec<f64> },
}

impl Metric {
    pub fn chi2(masses: Vec<f64>) -> Result<Self> {
        if masses.iter().any(|&w| !(w > 0.0)) {
            return Err(invalid("chi-square masses must be strictly positive"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("chi-square masses sum to {total}, not 1")));
        }
        Ok(Metric::Chi2 { masses })
    }

    /// Squared distance.
    #[inline]
    pub fn dist2(&self, x: &[f64], m: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum(),
            Metric::Chi2 { masses } => x
                .iter()
                .zip(m)
                .zip(masses)
                .map(|((a, b), w)| (a - b) * (a - b) / w)
                .sum(),
        }
    }
}

/// Closest unit to `x`; ties go to the lowest index.
pub fn winner(state: &NetworkState, x: &[f64], metric: &Metric) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, m) in state.units().enumerate() {
        let d = metric.dist2(x, m);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

#[inline]
pub(crate) fn euclidean_winner(weights: &[f64], dim: usize, x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    if dim == 1 {
        let x = x[0];
        for (i, &m) in weights.iter().enumerate() {
            let d = (x - m).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
    } else {
        for (i, m) in weights.chunks_exact(dim).enumerate() {
            let d: f64 = x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
    }
    best
}

/// Observers see the state at `t = 0` and then every `stride` steps.
pub trait Observer {
    fn observe(&mut self, state: &NetworkState) -> ControlFlow<()>;
}

impl<F: FnMut(&NetworkState) -> ControlFlow<()>> Observer for F {
    fn observe(&mut self, state: &NetworkState) -> ControlFlow<()> {
        self(state)
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub steps: u64,
    pub stride: u64,
    pub record_trajectory: bool,
}

impl RunOptions {
    pub fn steps(steps: u64) -> Self {
        Self {
            steps,
            stride: DEFAULT_STRIDE,
            record_trajectory: false,
        }
    }

    pub fn stride(mut self, stride: u64) -> Self {
        self.stride = stride.max(1);
        self
    }

    pub fn recording(mut self) -> Self {
        self.record_trajectory = true;
        self
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: NetworkState,
    /// States at the observation times, when recording was requested.
    pub trajectory: Vec<NetworkState>,
    /// Set when an observer asked to stop.
    pub stopped: bool,
}

/// How to draw the initial weights.
#[derive(Debug, Clone)]
pub enum Init {
    /// Each weight i.i.d. uniform on the box Ω.
    Uniform,
    /// Sorted draws: inside `F_n^+` on a string, inside `F^{++}` on a grid.
    Ordered,
    Explicit(NetworkState),
}

pub fn initial_state<R: Rng + ?Sized>(
    lattice: &Lattice,
    dist: &StimuliDistribution,
    init: &Init,
    rng: &mut R,
) -> Result<NetworkState> {
    let n = lattice.len();
    let d = dist.dim();
    let bounds = dist.bounds();
    let draw = |rng: &mut R, k: usize| {
        let (lo, hi) = bounds[k];
        lo + (hi - lo) * rng.random::<f64>()
    };
    match init {
        Init::Explicit(s) => {
            if s.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: s.len(),
                });
            }
            if s.dim() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: s.dim(),
                });
            }
            Ok(s.clone())
        }
        Init::Uniform => {
            let mut w = Vec::with_capacity(n * d);
            for _ in 0..n {
                for k in 0..d {
                    w.push(draw(rng, k));
                }
            }
            NetworkState::new(d, w)
        }
        Init::Ordered => match (lattice.kind(), d) {
            (LatticeKind::String1d, 1) => {
                let mut w: Vec<f64> = (0..n).map(|_| draw(rng, 0)).collect();
                w.sort_by(f64::total_cmp);
                NetworkState::new(1, w)
            }
            (LatticeKind::Grid2d, 2) => {
                let (n1, n2) = (lattice.dims()[0], lattice.dims()[1]);
                let mut a: Vec<f64> = (0..n1).map(|_| draw(rng, 0)).collect();
                let mut b: Vec<f64> = (0..n2).map(|_| draw(rng, 1)).collect();
                a.sort_by(f64::total_cmp);
                b.sort_by(f64::total_cmp);
                let mut w = Vec::with_capacity(2 * n);
                for i in 0..n {
                    let (i1, i2) = lattice.coords(i);
                    w.push(a[i1]);
                    w.push(b[i2]);
                }
                NetworkState::new(2, w)
            }
            _ => Err(Error::Usage(
                "ordered start needs a string with d=1 or a grid with d=2".into(),
            )),
        },
    }
}

/// A lattice, a neighborhood function and a winner metric.
#[derive(Debug, Clone)]
pub struct Som {
    lattice: Lattice,
    neighborhood: Neighborhood,
    coupling: Coupling,
    metric: Metric,
}

impl Som {
    pub fn new(lattice: Lattice, neighborhood: Neighborhood) -> Self {
        let coupling = Coupling::new(&lattice, &neighborhood);
        Self {
            lattice,
            neighborhood,
            coupling,
            metric: Metric::Euclidean,
        }
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn neighborhood(&self) -> &Neighborhood {
        &self.neighborhood
    }

    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn winner(&self, state: &NetworkState, x: &[f64]) -> usize {
        match self.metric {
            Metric::Euclidean => euclidean_winner(state.weights(), state.dim(), x),
            _ => winner(state, x, &self.metric),
        }
    }

    /// Applies one update in place and returns the winner.
    pub fn step(&self, state: &mut NetworkState, x: &[f64], eps: f64) -> usize {
        let i0 = self.winner(state, x);
        self.update(state, i0, x, eps);
        i0
    }

    /// Moves every unit toward `x` with gain `eps * Λ(dist(i0, i))`.
    #[inline]
    pub fn update(&self, state: &mut NetworkState, i0: usize, x: &[f64], eps: f64) {
        let d = state.dim();
        let row = self.coupling.row(i0);
        let w = state.weights_mut();
        if d == 1 {
            let x = x[0];
            for (m, &lam) in w.iter_mut().zip(row) {
                if lam != 0.0 {
                    *m -= eps * lam * (*m - x);
                }
            }
        } else {
            for (m, &lam) in w.chunks_exact_mut(d).zip(row) {
                if lam != 0.0 {
                    let g = eps * lam;
                    for (mk, xk) in m.iter_mut().zip(x) {
                        *mk -= g * (*mk - xk);
                    }
                }
            }
        }
        state.tick();
    }

    /// Pure form of [`Som::step`].
    pub fn stepped(&self, state: &NetworkState, x: &[f64], eps: f64) -> NetworkState {
        let mut next = state.clone();
        self.step(&mut next, x, eps);
        next
    }

    /// `H(x, m)`, so that one step is `m - eps * H(x, m)`.
    pub fn drift_sample(&self, state: &NetworkState, x: &[f64]) -> Vec<f64> {
        let i0 = self.winner(state, x);
        let row = self.coupling.row(i0);
        let mut out = Vec::with_capacity(state.weights().len());
        for (m, &lam) in state.units().zip(row) {
            for (mk, xk) in m.iter().zip(x) {
                out.push(lam * (mk - xk));
            }
        }
        out
    }

    /// Runs `options.steps` steps with gains from `schedule`, taken at the
    /// state's own clock. Deterministic given the RNG state.
    pub fn run<R: Rng + ?Sized>(
        &self,
        initial: NetworkState,
        dist: &StimuliDistribution,
        schedule: &GainSchedule,
        options: &RunOptions,
        rng: &mut R,
        observers: &mut [&mut dyn Observer],
    ) -> RunOutcome {
        let mut state = initial;
        let mut trajectory = Vec::new();
        let stride = options.stride.max(1);
        let bounds = dist.bounds();
        let mut x = vec![0.0; dist.dim()];
        let started_inside = state.inside(&bounds);

        let mut notify = |state: &NetworkState, trajectory: &mut Vec<NetworkState>| {
            if options.record_trajectory {
                trajectory.push(state.clone());
            }
            let mut stop = false;
            for obs in observers.iter_mut() {
                stop |= obs.observe(state).is_break();
            }
            stop
        };

        if notify(&state, &mut trajectory) {
            return RunOutcome {
                state,
                trajectory,
                stopped: true,
            };
        }
        for s in 1..=options.steps {
            dist.sample_into(rng, &mut x);
            let eps = schedule.gain(state.time());
            self.step(&mut state, &x, eps);
            debug_assert!(!started_inside || state.inside(&bounds), "trajectory left the domain");
            if (s % stride == 0 || s == options.steps) && notify(&state, &mut trajectory) {
                return RunOutcome {
                    state,
                    trajectory,
                    stopped: true,
                };
            }
        }
        RunOutcome {
            state,
            trajectory,
            stopped: false,
        }
    }
}
