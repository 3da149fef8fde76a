use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use somlab::categorical::{build_burt, chi2_distance, korresp_build_d, ContingencyTable, Responses};
use somlab::cells::{cell_moments, cell_statistics, Cell, Policy};
use somlab::meanfield::{MeanField, COOPERATIVE_TOL, FD_STEP};
use somlab::order_analysis::{classify_1d, Ordering1d};
use somlab::quantization::{distortion, distortion_gradient};
use somlab::som_engine::RunOptions;
use somlab::stimuli::Density1d;
use somlab::{GainSchedule, Lattice, Neighborhood, NetworkState, Som, StimuliDistribution};

/// Strictly increasing points of (0, 1) at least `gap` apart.
fn ordered_state(n: usize, gap: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, n).prop_filter_map("units too close", move |mut v| {
        v.sort_by(f64::total_cmp);
        let ok = v.windows(2).all(|w| w[1] - w[0] > gap) && v[0] > gap && v[n - 1] < 1.0 - gap;
        ok.then_some(v)
    })
}

fn neighborhoods() -> impl Strategy<Value = Neighborhood> {
    prop_oneof![
        Just(Neighborhood::indicator0()),
        (1usize..4).prop_map(Neighborhood::step),
        prop::collection::vec(0.0..1.0f64, 1..6).prop_map(|mut tail| {
            tail.sort_by(|a, b| b.total_cmp(a));
            let mut v = vec![1.0];
            v.extend(tail);
            Neighborhood::table(v).unwrap()
        }),
    ]
}

#[test]
fn unit_distance_symmetric_up_to_100() {
    for n in 1..=100 {
        let l = Lattice::string(n).unwrap();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(l.unit_distance(i, j).unwrap(), l.unit_distance(j, i).unwrap());
            }
        }
    }
    let g = Lattice::grid(10, 10).unwrap();
    for i in 0..100 {
        for j in 0..100 {
            assert_eq!(g.unit_distance(i, j).unwrap(), g.unit_distance(j, i).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn neighborhood_non_increasing(lam in neighborhoods()) {
        for d in 0..lam.values().len() + 2 {
            prop_assert!(lam.value(d + 1) <= lam.value(d));
        }
    }

    #[test]
    fn h_lambda_matches_scan(lam in neighborhoods(), n in 1usize..20) {
        let scan = (0..n).any(|k| (k as f64) < (n as f64 - 1.0) / 2.0 && lam.value(k + 1) < lam.value(k));
        prop_assert_eq!(lam.satisfies_h_lambda(n), scan);
    }

    #[test]
    fn cell_masses_sum_to_one(v in ordered_state(6, 1e-4)) {
        let s = NetworkState::scalar(&v).unwrap();
        let cm = cell_moments(&StimuliDistribution::unit_cube(1), &s, Policy::Deterministic).unwrap();
        prop_assert!((cm.mass.iter().sum::<f64>() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn total_expectation_1d(c in 0.01..0.99f64) {
        let lin = StimuliDistribution::density(Density1d::linear());
        let a = cell_statistics(&lin, Cell::Interval(0.0, c), Policy::Deterministic).unwrap();
        let b = cell_statistics(&lin, Cell::Interval(c, 1.0), Policy::Deterministic).unwrap();
        let mean = a.mass * a.mean.unwrap()[0] + b.mass * b.mean.unwrap()[0];
        prop_assert!((mean - 2.0 / 3.0).abs() < 1e-8);
        prop_assert!((a.mass + b.mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn reversal_flips_ordering(v in ordered_state(5, 1e-6)) {
        let s = NetworkState::scalar(&v).unwrap();
        prop_assert_eq!(classify_1d(&s).unwrap(), Ordering1d::Increasing);
        prop_assert_eq!(classify_1d(&s.reversed()).unwrap(), Ordering1d::Decreasing);
    }

    #[test]
    fn zero_neighbor_step_is_local(v in ordered_state(5, 1e-3), x in 0.0..1.0f64, eps in 0.0..1.0f64) {
        let som = Som::new(Lattice::string(5).unwrap(), Neighborhood::indicator0());
        let s = NetworkState::scalar(&v).unwrap();
        let i0 = som.winner(&s, &[x]);
        let next = som.stepped(&s, &[x], eps);
        for i in 0..5 {
            if i != i0 {
                prop_assert_eq!(next.unit(i), s.unit(i));
            }
        }
    }

    #[test]
    fn trajectories_stay_in_the_box(seed in any::<u64>(), eps in 0.0..1.0f64) {
        let som = Som::new(Lattice::grid(3, 3).unwrap(), Neighborhood::indicator8());
        let dist = StimuliDistribution::unit_cube(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = somlab::som_engine::initial_state(som.lattice(), &dist, &somlab::Init::Uniform, &mut rng).unwrap();
        let sched = GainSchedule::constant(eps).unwrap();
        let mut inside = |s: &NetworkState| {
            assert!(s.inside(&dist.bounds()));
            std::ops::ControlFlow::Continue(())
        };
        som.run(init, &dist, &sched, &RunOptions::steps(500).stride(1), &mut rng, &mut [&mut inside]);
    }

    #[test]
    fn runs_are_deterministic(seed in any::<u64>()) {
        let som = Som::new(Lattice::string(4).unwrap(), Neighborhood::step(1));
        let dist = StimuliDistribution::unit_cube(1);
        let sched = GainSchedule::power(1.0, 10.0, 0.75).unwrap();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let init = somlab::som_engine::initial_state(som.lattice(), &dist, &somlab::Init::Uniform, &mut rng).unwrap();
            som.run(init, &dist, &sched, &RunOptions::steps(1000).recording(), &mut rng, &mut []).trajectory
        };
        prop_assert_eq!(run(), run());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn gradient_matches_finite_differences_1d(v in ordered_state(6, 1e-3)) {
        for dist in [StimuliDistribution::unit_cube(1), StimuliDistribution::density(Density1d::linear())] {
            let s = NetworkState::scalar(&v).unwrap();
            let g = distortion_gradient(&s, &dist).unwrap();
            let fd = central_differences(&s, &dist);
            prop_assert!(relative_error(&g, &fd) <= 1e-5, "{:?} vs {:?}", g, fd);
        }
    }

    #[test]
    fn zero_neighbor_field_is_the_gradient(v in ordered_state(6, 1e-3)) {
        let dist = StimuliDistribution::unit_cube(1);
        let s = NetworkState::scalar(&v).unwrap();
        let mf = MeanField::new(Lattice::string(6).unwrap(), Neighborhood::indicator0(), dist.clone());
        let h = mf.h(&s).unwrap();
        let g = distortion_gradient(&s, &dist).unwrap();
        for (a, b) in h.iter().zip(&g) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn field_is_cooperative_on_ordered_states(v in ordered_state(5, 1e-3), k in 1usize..3) {
        let gauss = StimuliDistribution::density(Density1d::truncated_gaussian(0.5, 0.2).unwrap());
        for dist in [StimuliDistribution::unit_cube(1), gauss] {
            let mf = MeanField::new(Lattice::string(5).unwrap(), Neighborhood::step(k), dist);
            let j = mf.jacobian(&NetworkState::scalar(&v).unwrap(), FD_STEP).unwrap();
            prop_assert!(j.is_cooperative(COOPERATIVE_TOL), "off-diagonal {}", j.max_off_diagonal());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn gradient_matches_finite_differences_2d(w in prop::collection::vec(0.02..0.98f64, 8)) {
        let s = NetworkState::new(2, w).unwrap();
        let far_apart = (0..4).all(|i| (0..i).all(|j| {
            let (a, b) = (s.unit(i), s.unit(j));
            (a[0] - b[0]).hypot(a[1] - b[1]) > 0.02
        }));
        prop_assume!(far_apart);
        let dist = StimuliDistribution::unit_cube(2);
        let g = distortion_gradient(&s, &dist).unwrap();
        let fd = central_differences(&s, &dist);
        prop_assert!(relative_error(&g, &fd) <= 1e-5, "{:?} vs {:?}", g, fd);
    }
}

fn central_differences(s: &NetworkState, dist: &StimuliDistribution) -> Vec<f64> {
    let h = 1e-6;
    (0..s.weights().len())
        .map(|k| {
            let up = distortion(&s.perturbed(k, h), dist).unwrap().value;
            let down = distortion(&s.perturbed(k, -h), dist).unwrap().value;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.iter().map(|x| x.abs()).fold(0.0, f64::max);
    diff / scale
}

fn responses() -> impl Strategy<Value = Responses> {
    prop::collection::vec(1usize..5, 1..5).prop_flat_map(|sizes| {
        let row = sizes.iter().map(|&m| 0..m).collect::<Vec<_>>();
        prop::collection::vec(row, 1..40).prop_map(move |answers| {
            let questions = (0..sizes.len()).map(|k| format!("q{k}")).collect();
            let modalities = sizes.iter().map(|&m| (0..m).map(|l| format!("m{l}")).collect()).collect();
            Responses::new(questions, modalities, answers).unwrap()
        })
    })
}

fn tables() -> impl Strategy<Value = ContingencyTable> {
    (1usize..6, 1usize..6).prop_flat_map(|(p, q)| {
        prop::collection::vec(1u64..50, p * q).prop_map(move |c| ContingencyTable::new(p, q, c).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn burt_invariants_hold(r in responses()) {
        let b = build_burt(&r).unwrap();
        prop_assert!(b.check_invariants().is_ok());
        for s in 0..b.size() {
            if b.get(s, s) > 0 {
                prop_assert!((b.normalized_row(s).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn profiles_and_d_shape(t in tables()) {
        for i in 0..t.rows() {
            prop_assert!((t.row_profile(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        for j in 0..t.cols() {
            prop_assert!((t.col_profile(j).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        prop_assert!((t.row_masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let d = korresp_build_d(&t).unwrap();
        prop_assert_eq!(d.values.len(), (t.rows() + t.cols()) * (t.cols() + t.rows()));
        prop_assert_eq!(d.height(), t.rows() + t.cols());
    }

    #[test]
    fn chi2_is_a_metric(
        raw in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.05..1.0f64), 2..8)
    ) {
        let norm = |v: Vec<f64>| { let s: f64 = v.iter().sum(); v.into_iter().map(|x| x / s.max(1e-300)).collect::<Vec<_>>() };
        prop_assume!(raw.iter().all(|r| r.0 + r.1 + r.2 > 0.0));
        let u = norm(raw.iter().map(|r| r.0 + 1e-3).collect());
        let v = norm(raw.iter().map(|r| r.1 + 1e-3).collect());
        let w = norm(raw.iter().map(|r| r.2 + 1e-3).collect());
        let masses = norm(raw.iter().map(|r| r.3).collect());
        let d = |a: &[f64], b: &[f64]| chi2_distance(a, b, &masses).unwrap();
        prop_assert_eq!(d(&u, &v), d(&v, &u));
        prop_assert!(d(&u, &w) <= d(&u, &v) + d(&v, &w) + 1e-12);
        prop_assert_eq!(d(&u, &u), 0.0);
    }
}
