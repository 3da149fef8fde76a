//! Organization predicates and Monte Carlo experiments on hitting times,
//! exit times and the concentration of the constant-gain process.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::som_engine::{initial_state, GainSchedule, Init, Som};
use crate::state::NetworkState;
use crate::stimuli::StimuliDistribution;
use crate::topology::{Lattice, LatticeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering1d {
    Increasing,
    Decreasing,
    Unordered,
}

impl Ordering1d {
    pub fn is_ordered(self) -> bool {
        self != Ordering1d::Unordered
    }
}

/// Strict comparisons: any tie is unordered.
pub fn classify_1d(state: &NetworkState) -> Result<Ordering1d> {
    if state.dim() != 1 {
        return Err(Error::Usage(format!("1-D ordering needs scalar weights, got d = {}", state.dim())));
    }
    let w = state.weights();
    if w.len() < 2 {
        return Ok(Ordering1d::Increasing);
    }
    if w.windows(2).all(|p| p[0] < p[1]) {
        Ok(Ordering1d::Increasing)
    } else if w.windows(2).all(|p| p[0] > p[1]) {
        Ok(Ordering1d::Decreasing)
    } else {
        Ok(Ordering1d::Unordered)
    }
}

/// Both coordinates separately increasing along their grid axes.
pub fn classify_fpp(lattice: &Lattice, state: &NetworkState) -> Result<bool> {
    let dims = lattice.dims();
    if lattice.kind() != LatticeKind::Grid2d || dims[0] != dims[1] {
        return Err(Error::Usage("F++ is defined on square grids".into()));
    }
    if state.dim() != 2 || state.len() != lattice.len() {
        return Err(Error::Usage(format!(
            "F++ needs {} two-dimensional weights, got {} of dimension {}",
            lattice.len(),
            state.len(),
            state.dim()
        )));
    }
    let n = dims[0];
    for a in 0..n {
        for b in 0..n - 1 {
            // first coordinate along the first axis, second along the second
            if state.unit(lattice.index(b, a))[0] >= state.unit(lattice.index(b + 1, a))[0] {
                return Ok(false);
            }
            if state.unit(lattice.index(a, b))[1] >= state.unit(lattice.index(a, b + 1))[1] {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predicate {
    /// Inside `F_n^+ ∪ F_n^-`.
    Ordered1d,
    Fpp,
}

impl Predicate {
    pub fn holds(self, lattice: &Lattice, state: &NetworkState) -> Result<bool> {
        match self {
            Predicate::Ordered1d => Ok(classify_1d(state)?.is_ordered()),
            Predicate::Fpp => classify_fpp(lattice, state),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Predicate::Ordered1d => "ordered-1d",
            Predicate::Fpp => "fpp",
        }
    }
}

/// Shared parameters of the trial-based experiments.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub som: Som,
    pub dist: StimuliDistribution,
    pub schedule: GainSchedule,
    pub init: Init,
    pub trials: usize,
    pub budget: u64,
    pub seed: u64,
}

/// Stream seed of one trial.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    master ^ trial as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialTime {
    pub trial: usize,
    pub seed: u64,
    /// `None` when the budget ran out first.
    pub time: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HittingTimeReport {
    pub trials: Vec<TrialTime>,
    pub budget: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSummary {
    pub finite: usize,
    pub timeouts: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub max: Option<u64>,
}

impl HittingTimeReport {
    pub fn finite_count(&self) -> usize {
        self.trials.iter().filter(|t| t.time.is_some()).count()
    }

    pub fn summary(&self) -> TimeSummary {
        let mut times: Vec<u64> = self.trials.iter().filter_map(|t| t.time).collect();
        times.sort_unstable();
        let k = times.len();
        let median = (k > 0).then(|| {
            if k % 2 == 1 {
                times[k / 2] as f64
            } else {
                0.5 * (times[k / 2 - 1] + times[k / 2]) as f64
            }
        });
        TimeSummary {
            finite: k,
            timeouts: self.trials.len() - k,
            mean: (k > 0).then(|| times.iter().map(|&t| t as f64).sum::<f64>() / k as f64),
            median,
            max: times.last().copied(),
        }
    }

    /// One row per trial; a timeout is written as `-1`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trial", "seed", "tau"])?;
        for t in &self.trials {
            let tau = t.time.map_or(-1, |v| v as i64);
            w.write_record([t.trial.to_string(), t.seed.to_string(), tau.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_scenario(sc: &Scenario, predicate: Predicate) -> Result<()> {
    if sc.dist.dim() == 0 {
        return Err(Error::Usage("empty input space".into()));
    }
    match predicate {
        Predicate::Ordered1d if sc.som.lattice().kind() != LatticeKind::String1d || sc.dist.dim() != 1 => {
            Err(Error::Usage("1-D ordering needs a string lattice and scalar inputs".into()))
        }
        Predicate::Fpp if sc.dist.dim() != 2 => Err(Error::Usage("F++ needs two-dimensional inputs".into())),
        _ => Ok(()),
    }
}

/// Runs one trial until `stop(state)` or the budget; returns the stopping time.
fn first_time<F>(sc: &Scenario, trial: usize, start: Option<NetworkState>, mut stop: F) -> Result<(u64, Option<u64>)>
where
    F: FnMut(&NetworkState) -> Result<bool>,
{
    let seed = trial_seed(sc.seed, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = match start {
        Some(s) => s,
        None => initial_state(sc.som.lattice(), &sc.dist, &sc.init, &mut rng)?,
    };
    if stop(&state)? {
        return Ok((seed, Some(0)));
    }
    if sc.schedule.is_frozen() {
        return Ok((seed, None));
    }
    let mut x = vec![0.0; sc.dist.dim()];
    for t in 1..=sc.budget {
        sc.dist.sample_into(&mut rng, &mut x);
        let eps = sc.schedule.gain(state.time());
        sc.som.step(&mut state, &x, eps);
        if stop(&state)? {
            return Ok((seed, Some(t)));
        }
    }
    Ok((seed, None))
}

fn collect(results: Vec<Result<(u64, Option<u64>)>>, budget: u64) -> Result<HittingTimeReport> {
    let mut trials = Vec::with_capacity(results.len());
    for (trial, r) in results.into_iter().enumerate() {
        let (seed, time) = r?;
        trials.push(TrialTime { trial, seed, time });
    }
    Ok(HittingTimeReport { trials, budget })
}

/// First time each trial satisfies the predicate.
pub fn hitting_time_experiment(sc: &Scenario, predicate: Predicate) -> Result<HittingTimeReport> {
    check_scenario(sc, predicate)?;
    let lattice = sc.som.lattice();
    let results = (0..sc.trials)
        .into_par_iter()
        .map(|trial| first_time(sc, trial, None, |s| predicate.holds(lattice, s)))
        .collect();
    collect(results, sc.budget)
}

/// First time each trial leaves the organized set; every start must lie inside it.
pub fn exit_time_experiment(sc: &Scenario, predicate: Predicate) -> Result<HittingTimeReport> {
    check_scenario(sc, predicate)?;
    let lattice = sc.som.lattice();
    let results = (0..sc.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(sc.seed, trial));
            let start = initial_state(lattice, &sc.dist, &sc.init, &mut rng)?;
            if !predicate.holds(lattice, &start)? {
                return Err(Error::Usage(format!(
                    "trial {trial} does not start inside the {} set",
                    predicate.label()
                )));
            }
            first_time(sc, trial, Some(start), |s| Ok(!predicate.holds(lattice, s)?))
        })
        .collect();
    collect(results, sc.budget)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationRow {
    pub eps: f64,
    pub seed: u64,
    /// Mean of `‖m(t) - m*‖` over the horizon (the burn-in state when the horizon is 0).
    pub mean_distance: f64,
    pub final_distance: f64,
}

/// Time-averaged distance to `target` of the constant-gain process, one row per gain.
#[allow(clippy::too_many_arguments)]
pub fn invariant_concentration_experiment(
    som: &Som,
    dist: &StimuliDistribution,
    gains: &[f64],
    target: &NetworkState,
    init: &Init,
    burn_in: u64,
    horizon: u64,
    seed: u64,
) -> Result<Vec<ConcentrationRow>> {
    let schedules = gains
        .iter()
        .map(|&e| GainSchedule::constant(e))
        .collect::<Result<Vec<_>>>()?;
    schedules
        .par_iter()
        .enumerate()
        .map(|(k, schedule)| {
            let seed = trial_seed(seed, k);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut state = initial_state(som.lattice(), dist, init, &mut rng)?;
            if state.dim() != target.dim() || state.len() != target.len() {
                return Err(Error::Dimension {
                    expected: target.weights().len(),
                    got: state.weights().len(),
                });
            }
            let mut x = vec![0.0; dist.dim()];
            let mut advance = |state: &mut NetworkState, rng: &mut ChaCha8Rng| {
                dist.sample_into(rng, &mut x);
                som.step(state, &x, schedule.gain(state.time()));
            };
            for _ in 0..burn_in {
                advance(&mut state, &mut rng);
            }
            let mean_distance = if horizon == 0 {
                state.distance(target)
            } else {
                let mut total = 0.0;
                for _ in 0..horizon {
                    advance(&mut state, &mut rng);
                    total += state.distance(target);
                }
                total / horizon as f64
            };
            Ok(ConcentrationRow {
                eps: schedule.gain(0),
                seed,
                mean_distance,
                final_distance: state.distance(target),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Neighborhood;

    fn s(v: &[f64]) -> NetworkState {
        NetworkState::scalar(v).unwrap()
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_1d(&s(&[0.1, 0.2, 0.3])).unwrap(), Ordering1d::Increasing);
        assert_eq!(classify_1d(&s(&[0.3, 0.2, 0.9])).unwrap(), Ordering1d::Unordered);
        assert_eq!(classify_1d(&s(&[0.7, 0.1])).unwrap(), Ordering1d::Decreasing);
        assert_eq!(classify_1d(&s(&[0.4, 0.4])).unwrap(), Ordering1d::Unordered);
        let two = NetworkState::new(2, vec![0.0; 4]).unwrap();
        assert!(matches!(classify_1d(&two), Err(Error::Usage(_))));
    }

    #[test]
    fn fpp_examples() {
        let g = Lattice::grid(2, 2).unwrap();
        let canon = NetworkState::new(2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(classify_fpp(&g, &canon).unwrap());
        let swapped = NetworkState::new(2, vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(!classify_fpp(&g, &swapped).unwrap());
        assert!(classify_fpp(&Lattice::string(4).unwrap(), &canon).is_err());
        assert!(classify_fpp(&Lattice::grid(2, 3).unwrap(), &canon).is_err());
    }

    fn scenario(n: usize, eps: f64, init: Init, trials: usize, budget: u64) -> Scenario {
        Scenario {
            som: Som::new(Lattice::string(n).unwrap(), Neighborhood::step(1)),
            dist: StimuliDistribution::unit_cube(1),
            schedule: if eps == 0.0 {
                GainSchedule::frozen()
            } else {
                GainSchedule::constant(eps).unwrap()
            },
            init,
            trials,
            budget,
            seed: 11,
        }
    }

    #[test]
    fn trivial_hitting_times() {
        let rep = hitting_time_experiment(&scenario(5, 0.1, Init::Ordered, 10, 100), Predicate::Ordered1d).unwrap();
        assert!(rep.trials.iter().all(|t| t.time == Some(0)));
        let rep = hitting_time_experiment(&scenario(2, 0.1, Init::Uniform, 10, 100), Predicate::Ordered1d).unwrap();
        assert!(rep.trials.iter().all(|t| t.time == Some(0)));
    }

    #[test]
    fn hits_are_finite_and_reproducible() {
        let sc = scenario(6, 0.1, Init::Uniform, 20, 200_000);
        let a = hitting_time_experiment(&sc, Predicate::Ordered1d).unwrap();
        assert_eq!(a.finite_count(), 20);
        let b = hitting_time_experiment(&sc, Predicate::Ordered1d).unwrap();
        assert_eq!(a, b);
        let sum = a.summary();
        assert_eq!(sum.finite, 20);
        assert!(sum.max.unwrap() as f64 >= sum.median.unwrap());
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 21);
    }

    #[test]
    fn ordered_set_is_not_left() {
        let rep = exit_time_experiment(&scenario(5, 0.1, Init::Ordered, 4, 100_000), Predicate::Ordered1d).unwrap();
        assert_eq!(rep.finite_count(), 0);
        let frozen = exit_time_experiment(&scenario(5, 0.0, Init::Ordered, 4, 1_000), Predicate::Ordered1d).unwrap();
        assert_eq!(frozen.finite_count(), 0);
        assert!(exit_time_experiment(&scenario(5, 0.1, Init::Uniform, 50, 10), Predicate::Ordered1d).is_err());
    }

    #[test]
    fn concentration_rows() {
        let som = Som::new(Lattice::string(3).unwrap(), Neighborhood::step(1));
        let dist = StimuliDistribution::unit_cube(1);
        let target = s(&[0.3, 0.5, 0.7]);
        let rows = invariant_concentration_experiment(&som, &dist, &[0.1, 0.01], &target, &Init::Ordered, 10_000, 50_000, 5)
            .unwrap();
        assert!(rows[1].mean_distance < rows[0].mean_distance);
        let again =
            invariant_concentration_experiment(&som, &dist, &[0.1, 0.01], &target, &Init::Ordered, 10_000, 50_000, 5)
                .unwrap();
        assert_eq!(rows, again);
        let burn = invariant_concentration_experiment(&som, &dist, &[0.1], &target, &Init::Ordered, 100, 0, 5).unwrap();
        assert_eq!(burn[0].mean_distance, burn[0].final_distance);
    }
}
