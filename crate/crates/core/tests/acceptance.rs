//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! `cargo test -p somlab-core --test acceptance` (about a minute on one core).
//! Pass criterion numbers as arguments to run a subset.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use somlab::categorical::{
    block_table, build_burt, kacm_run, korresp_run, korresp_structure_recovered, MapOptions, Responses,
};
use somlab::meanfield::{dimension_selection, grid_state, uniform_limit_linear_system, FD_STEP};
use somlab::order_analysis::{
    exit_time_experiment, hitting_time_experiment, invariant_concentration_experiment, trial_seed, Predicate,
    Scenario,
};
use somlab::quantization::{
    distortion, distortion_gradient, optimal_quantizer_1d, quantize_integrate, quantized_measure, train_0neighbor,
    zador_scan, QuantizerReport, TrainConfig,
};
use somlab::som_engine::{initial_state, RunOptions};
use somlab::stimuli::Density1d;
use somlab::{
    GainSchedule, Init, Lattice, Marginal, MeanField, Neighborhood, NetworkState, Som, Stability,
    StimuliDistribution,
};

const SEED: u64 = 2024;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn uniform() -> StimuliDistribution {
    StimuliDistribution::unit_cube(1)
}

fn linear() -> StimuliDistribution {
    StimuliDistribution::density(Density1d::linear())
}

fn midpoints(n: usize) -> NetworkState {
    let v: Vec<f64> = (1..=n).map(|i| (2 * i - 1) as f64 / (2 * n) as f64).collect();
    NetworkState::scalar(&v).unwrap()
}

fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Uniform random states with every gap at least `gap`, sorted when `sorted`.
fn random_states(rng: &mut ChaCha8Rng, count: usize, n: usize, gap: f64, sorted: bool) -> Vec<NetworkState> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let mut s = v.clone();
        s.sort_by(f64::total_cmp);
        if s.windows(2).any(|w| w[1] - w[0] < gap) {
            continue;
        }
        if sorted {
            v = s;
        }
        out.push(NetworkState::scalar(&v).unwrap());
    }
    out
}

fn ordering() -> Verdict {
    let sc = Scenario {
        som: Som::new(Lattice::string(10).unwrap(), Neighborhood::step(1)),
        dist: uniform(),
        schedule: GainSchedule::constant(0.1).unwrap(),
        init: Init::Uniform,
        trials: 200,
        budget: 1_000_000,
        seed: SEED,
    };
    let r = hitting_time_experiment(&sc, Predicate::Ordered1d).unwrap();
    let s = r.summary();
    verdict(
        s.finite == 200,
        format!("{}/200 ordered, mean time {:.0}, max {:?}", s.finite, s.mean.unwrap_or(f64::NAN), s.max),
    )
}

fn absorption() -> Verdict {
    let sc = Scenario {
        som: Som::new(Lattice::string(10).unwrap(), Neighborhood::step(1)),
        dist: uniform(),
        schedule: GainSchedule::constant(0.1).unwrap(),
        init: Init::Ordered,
        trials: 50,
        budget: 1_000_000,
        seed: SEED,
    };
    let r = exit_time_experiment(&sc, Predicate::Ordered1d).unwrap();
    verdict(r.finite_count() == 0, format!("{} exits in 50 x 1e6 steps", r.finite_count()))
}

fn convergence() -> Verdict {
    let som = Som::new(Lattice::string(3).unwrap(), Neighborhood::step(1));
    let dist = uniform();
    let schedule = GainSchedule::power(1.0, 100.0, 1.0).unwrap();
    let target = [0.3, 0.5, 0.7];
    let errors: Vec<f64> = (0..100)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(SEED, trial));
            let init = initial_state(som.lattice(), &dist, &Init::Ordered, &mut rng).unwrap();
            let out = som.run(init, &dist, &schedule, &RunOptions::steps(10_000_000), &mut rng, &mut []);
            max_dev(out.state.weights(), &target)
        })
        .collect();
    let hits = errors.iter().filter(|&&e| e <= 1e-2).count();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    verdict(hits >= 95, format!("{hits}/100 within 1e-2, worst {worst:.3e}"))
}

fn quantization_optimum() -> Verdict {
    let cfg = TrainConfig {
        n: 10,
        dist: uniform(),
        // Robbins-Monro gains that stay large long enough to spread the
        // codebook; 1/(100+t) stalls far from the optimum at this budget.
        schedule: GainSchedule::power(0.5, 1.0, 0.51).unwrap(),
        steps: 10_000_000,
        init: Init::Ordered,
        seed: SEED,
    };
    let trained = train_0neighbor(&cfg).unwrap();
    let optimum = midpoints(10);
    let sim = max_dev(trained.state.weights(), optimum.weights());
    let mf = MeanField::new(Lattice::string(10).unwrap(), Neighborhood::indicator0(), uniform());
    let eq = mf.solve_equilibrium(&trained.state, 1e-12).unwrap();
    let solved = max_dev(eq.state.weights(), optimum.weights());
    verdict(
        sim <= 1e-2 && solved <= 1e-8,
        format!("simulation off by {sim:.3e}, solver off by {solved:.3e}"),
    )
}

fn scaling() -> Verdict {
    let mut worst: f64 = 0.0;
    for n in [2, 4, 8, 16] {
        let v = distortion(&midpoints(n), &uniform()).unwrap().value;
        worst = worst.max(((n * n) as f64 * v - 1.0 / 24.0).abs() * 24.0);
    }
    let rows = zador_scan(&[32, 64], &linear(), 1, SEED).unwrap();
    let change = (rows[1].scaled - rows[0].scaled).abs() / rows[0].scaled;
    verdict(
        worst < 5e-13 && change < 0.1,
        format!("n^2 V_n relative error {worst:.1e}; f=2x scaled {:.6e} -> {:.6e}, change {:.2}%", rows[0].scaled, rows[1].scaled, 100.0 * change),
    )
}

fn gradient() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let dist = uniform();
    let h = 1e-6;
    let worst = random_states(&mut rng, 20, 8, 1e-3, false)
        .iter()
        .map(|s| {
            let g = distortion_gradient(s, &dist).unwrap();
            let fd: Vec<f64> = (0..s.len())
                .map(|k| {
                    let up = distortion(&s.perturbed(k, h), &dist).unwrap().value;
                    let down = distortion(&s.perturbed(k, -h), &dist).unwrap().value;
                    (up - down) / (2.0 * h)
                })
                .collect();
            let scale = g.iter().map(|x| x.abs()).fold(0.0, f64::max);
            max_dev(&g, &fd) / scale
        })
        .fold(0.0, f64::max);
    verdict(worst <= 1e-5, format!("worst relative error {worst:.2e}"))
}

fn mean_field_consistency() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let dist = uniform();
    let som = Som::new(Lattice::string(5).unwrap(), Neighborhood::step(1));
    let mf = MeanField::new(som.lattice().clone(), som.neighborhood().clone(), dist.clone());
    let eps = 0.05;
    let samples = 100_000;
    let states = random_states(&mut rng, 10, 5, 1e-3, false);
    let worst = states
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            let h = mf.h(s).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(SEED, k + 1));
            let (mut sum, mut sq) = ([0.0; 5], [0.0; 5]);
            for _ in 0..samples {
                let x = [rng.random::<f64>()];
                let next = som.stepped(s, &x, eps);
                for c in 0..5 {
                    let v = (s.weights()[c] - next.weights()[c]) / eps;
                    sum[c] += v;
                    sq[c] += v * v;
                }
            }
            let n = samples as f64;
            (0..5)
                .map(|c| {
                    let mean = sum[c] / n;
                    let se = ((sq[c] / n - mean * mean) / n).sqrt();
                    (mean - h[c]).abs() / se
                })
                .fold(0.0, f64::max)
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(0.0, f64::max);
    verdict(worst <= 3.0, format!("largest deviation {worst:.2} standard errors"))
}

fn cooperativity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let laws = [
        ("uniform", uniform()),
        ("gaussian", StimuliDistribution::density(Density1d::truncated_gaussian(0.5, 0.2).unwrap())),
    ];
    let mut detail = Vec::new();
    let mut pass = true;
    for (name, dist) in laws {
        let mf = MeanField::new(Lattice::string(6).unwrap(), Neighborhood::step(1), dist);
        let worst = random_states(&mut rng, 20, 6, 1e-3, true)
            .iter()
            .map(|s| mf.jacobian(s, FD_STEP).unwrap().max_off_diagonal())
            .fold(f64::NEG_INFINITY, f64::max);
        pass &= worst <= 1e-8;
        detail.push(format!("{name} max off-diagonal {worst:.2e}"));
    }
    verdict(pass, detail.join(", "))
}

fn grid_equilibrium() -> Verdict {
    let axis = NetworkState::scalar(&[0.3, 0.5, 0.7]).unwrap();
    let (lattice, state) = grid_state(&[axis.clone(), axis]).unwrap();
    let mf = MeanField::new(lattice, Neighborhood::indicator8(), StimuliDistribution::unit_cube(2));
    let h = mf.evaluate(&state).unwrap().sup_norm();
    verdict(h < 1e-6, format!("|h| = {h:.2e}"))
}

fn fpp_exits() -> Verdict {
    let axis = NetworkState::scalar(&[0.3, 0.5, 0.7]).unwrap();
    let (lattice, state) = grid_state(&[axis.clone(), axis]).unwrap();
    let sc = Scenario {
        som: Som::new(lattice, Neighborhood::indicator8()),
        dist: StimuliDistribution::unit_cube(2),
        schedule: GainSchedule::constant(0.2).unwrap(),
        init: Init::Explicit(state),
        trials: 10_000,
        budget: 1_000,
        seed: SEED,
    };
    let r = exit_time_experiment(&sc, Predicate::Fpp).unwrap();
    verdict(r.finite_count() >= 1, format!("{} of 10000 trials left F++", r.finite_count()))
}

fn dim_selection() -> Verdict {
    let base = MeanField::new(Lattice::string(10).unwrap(), Neighborhood::step(1), uniform());
    let m1 = uniform_limit_linear_system(10, &Neighborhood::step(1)).unwrap();
    let r = dimension_selection(&base, &m1, Marginal::Uniform { lo: -0.01, hi: 0.01 }, 0.0).unwrap();
    let top = r.spectrum.max_real();
    verdict(
        top < 0.0 && r.stability == Stability::Stable,
        format!("max real eigenvalue {top:.3e}, residual {:.1e}", r.residual),
    )
}

fn concentration() -> Verdict {
    let som = Som::new(Lattice::string(3).unwrap(), Neighborhood::step(1));
    let target = NetworkState::scalar(&[0.3, 0.5, 0.7]).unwrap();
    let rows = invariant_concentration_experiment(
        &som,
        &uniform(),
        &[0.1, 0.01],
        &target,
        &Init::Ordered,
        100_000,
        1_000_000,
        SEED,
    )
    .unwrap();
    verdict(
        rows[1].mean_distance < rows[0].mean_distance,
        format!(
            "mean distance {:.4e} at eps=0.1, {:.4e} at eps=0.01",
            rows[0].mean_distance, rows[1].mean_distance
        ),
    )
}

fn integration() -> Verdict {
    let mut errs = Vec::new();
    let mut digits_ok = true;
    for n in [10, 20, 40] {
        let rep = QuantizerReport::new("midpoints", midpoints(n), &uniform()).unwrap();
        let v = quantize_integrate(|x| x[0] * x[0], &rep);
        let exact = 1.0 / 3.0 - 1.0 / (12.0 * (n * n) as f64);
        digits_ok &= (v - exact).abs() < 1e-10;
        errs.push((v - 1.0 / 3.0).abs());
    }
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    let pass = digits_ok && ratios.iter().all(|r| (3.8..=4.2).contains(r));
    verdict(pass, format!("error ratios {:.4}, {:.4}", ratios[0], ratios[1]))
}

fn quantized_measures() -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, dist) in [("uniform", uniform()), ("2x", linear())] {
        let d: Vec<f64> = [2, 4, 8, 16]
            .iter()
            .map(|&n| {
                let rep = optimal_quantizer_1d(n, &dist, 1e-12).unwrap();
                quantized_measure(&rep, &dist).unwrap().f_distance.unwrap()
            })
            .collect();
        pass &= d.windows(2).all(|w| w[1] < w[0]);
        detail.push(format!("{name}: {}", d.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" > ")));
    }
    verdict(pass, detail.join("; "))
}

fn korresp() -> Verdict {
    let table = block_table(3, 20, 1);
    let ok = (0..20u64)
        .into_par_iter()
        .filter(|&seed| {
            let opts = MapOptions {
                seed,
                ..MapOptions::default()
            };
            korresp_structure_recovered(&table, &korresp_run(&table, &opts).unwrap()).unwrap()
        })
        .count();
    verdict(ok >= 18, format!("{ok}/20 runs recover the blocks"))
}

fn random_responses(rng: &mut ChaCha8Rng) -> Responses {
    let k = rng.random_range(1..6);
    let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(1..6)).collect();
    let n = rng.random_range(1..200);
    let answers = (0..n)
        .map(|_| sizes.iter().map(|&m| rng.random_range(0..m)).collect())
        .collect();
    Responses::new(
        (0..k).map(|q| format!("q{q}")).collect(),
        sizes.iter().map(|&m| (0..m).map(|l| format!("m{l}")).collect()).collect(),
        answers,
    )
    .unwrap()
}

fn kacm_integrity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut broken = 0;
    let mut last = None;
    for _ in 0..1000 {
        let burt = build_burt(&random_responses(&mut rng)).unwrap();
        if burt.check_invariants().is_err() {
            broken += 1;
        }
        last = Some(burt);
    }
    let burt = last.unwrap();
    let opts = MapOptions {
        seed: SEED,
        steps: 5_000,
        ..MapOptions::default()
    };
    let bits = |m: &somlab::ModalityMap| m.weights.weights().iter().map(|w| w.to_bits()).collect::<Vec<_>>();
    let a = kacm_run(&burt, &opts).unwrap().map;
    let b = kacm_run(&burt, &opts).unwrap().map;
    let same = a.entries == b.entries && bits(&a) == bits(&b);
    verdict(
        broken == 0 && same,
        format!("{broken} of 1000 tables break an invariant; reruns identical: {same}"),
    )
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 16] = [
        ("ordering", ordering),
        ("absorption", absorption),
        ("convergence", convergence),
        ("quantization optimum", quantization_optimum),
        ("scaling", scaling),
        ("gradient consistency", gradient),
        ("mean-field consistency", mean_field_consistency),
        ("cooperativity", cooperativity),
        ("grid equilibrium", grid_equilibrium),
        ("F++ non-absorption", fpp_exits),
        ("dimension selection", dim_selection),
        ("invariant-measure concentration", concentration),
        ("numerical integration", integration),
        ("quantized measure", quantized_measures),
        ("KORRESP structure recovery", korresp),
        ("KACM integrity", kacm_integrity),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        let status = if v.pass { "PASS" } else { "FAIL" };
        if !v.pass {
            failures += 1;
        }
        println!("{status} {id:>2} {name}: {} [{:.1}s]", v.detail, start.elapsed().as_secs_f64());
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
