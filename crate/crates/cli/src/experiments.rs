//! One builder per subcommand. A builder reads everything it needs from the
//! config and returns the run as a closure, so that all validation happens
//! before the first output is written.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use somlab::categorical::{
    block_table, build_burt, kacm_run, korresp_run, korresp_structure_recovered, ContingencyTable, MapOptions,
    Responses, WinnerMode,
};
use somlab::meanfield::{dimension_selection, grid_state, uniform_limit_linear_system, FlowOptions, Spectrum};
use somlab::order_analysis::{
    exit_time_experiment, hitting_time_experiment, invariant_concentration_experiment, trial_seed, HittingTimeReport,
    Predicate, Scenario,
};
use somlab::quad::integrate;
use somlab::quantization::{
    magnification_experiment, optimal_quantizer_1d, quantize_integrate, write_zador_csv, zador_scan, QuantizerReport,
};
use somlab::report::real;
use somlab::som_engine::{initial_state, RunOptions};
use somlab::stimuli::Density1d;
use somlab::topology::LatticeKind;
use somlab::{
    Error, GainSchedule, Init, Lattice, Marginal, MeanField, Neighborhood, NetworkState, Som, StimuliDistribution,
};

use crate::config::Config;

pub const KINDS: [&str; 12] = [
    "ordering",
    "exit",
    "converge",
    "invariant",
    "meanfield",
    "zador",
    "integrate",
    "magnification",
    "dimsel",
    "grid",
    "korresp",
    "kacm",
];

/// Where a run writes its files, plus the summary being assembled.
pub struct Output {
    dir: PathBuf,
    pub summary: String,
}

impl Output {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            summary: String::new(),
        }
    }

    pub fn file(&self, name: &str) -> somlab::Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    pub fn line(&mut self, text: impl AsRef<str>) {
        let _ = writeln!(self.summary, "{}", text.as_ref());
    }
}

pub type Run = Box<dyn FnOnce(&mut Output) -> somlab::Result<()> + Send>;

/// Reads the config for `kind`; `Err` carries every problem found.
pub fn prepare(kind: &str, cfg: &mut Config) -> Result<Run, Vec<String>> {
    let seed = cfg.get("seed", 2024u64);
    let run = match kind {
        "ordering" => hitting(cfg, seed, false),
        "exit" => hitting(cfg, seed, true),
        "converge" => converge(cfg, seed),
        "invariant" => invariant(cfg, seed),
        "meanfield" => meanfield(cfg),
        "zador" => zador(cfg, seed),
        "integrate" => integrate_run(cfg),
        "magnification" => magnification(cfg),
        "dimsel" => dimsel(cfg),
        "grid" => grid(cfg),
        "korresp" => korresp(cfg, seed),
        "kacm" => kacm(cfg, seed),
        other => Err(format!("unknown experiment '{other}'")),
    };
    match run {
        Ok(run) => {
            cfg.finish()?;
            Ok(run)
        }
        // keys after the failing one were never read, so unknown-key
        // reporting would only add noise
        Err(e) => {
            let mut problems = cfg.take_problems();
            problems.push(e);
            Err(problems)
        }
    }
}

fn lattice(cfg: &mut Config, default_kind: &str, default_n: usize) -> Result<Lattice, String> {
    let kind = cfg.choice("lattice.kind", default_kind, &["string", "grid"]);
    let built = if kind == "grid" {
        let n1 = cfg.count("lattice.n1", 3, 1);
        let n2 = cfg.count("lattice.n2", 3, 1);
        Lattice::grid(n1, n2)
    } else {
        Lattice::string(cfg.count("lattice.n", default_n, 1))
    };
    built.map_err(|e| format!("lattice: {e}"))
}

fn neighborhood(cfg: &mut Config, default: &str) -> Result<Neighborhood, String> {
    let kind = cfg.choice("neighborhood.kind", default, &["step", "indicator0", "indicator8", "table"]);
    match kind.as_str() {
        "indicator0" => Ok(Neighborhood::indicator0()),
        "indicator8" => Ok(Neighborhood::indicator8()),
        "table" => {
            let values = cfg.list("neighborhood.values", &[1.0f64]);
            Neighborhood::table(values).map_err(|e| format!("neighborhood.values: {e}"))
        }
        _ => Ok(Neighborhood::step(cfg.count("neighborhood.radius", 1, 0))),
    }
}

fn marginal(cfg: &mut Config, law: &str) -> Result<Marginal, String> {
    match law {
        "linear" => Ok(Marginal::Density(Density1d::linear().into())),
        "gaussian" => {
            let mean = cfg.number("stimuli.mean", 0.5, 0.0..=1.0);
            let sd = cfg.number("stimuli.sd", 0.2, 1e-6..=1e6);
            Density1d::truncated_gaussian(mean, sd)
                .map(|d| Marginal::Density(d.into()))
                .map_err(|e| format!("stimuli: {e}"))
        }
        _ => {
            let lo = cfg.get("stimuli.lo", 0.0f64);
            let hi = cfg.get("stimuli.hi", 1.0f64);
            if lo < hi {
                Ok(Marginal::Uniform { lo, hi })
            } else {
                Err(format!("stimuli: lo = {lo} must be below hi = {hi}"))
            }
        }
    }
}

/// Inputs matching the lattice: scalar on a string, planar on a grid unless set.
fn stimuli(cfg: &mut Config, lattice: &Lattice, default_law: &str) -> Result<StimuliDistribution, String> {
    let law = cfg.choice("stimuli.law", default_law, &["uniform", "linear", "gaussian", "discrete"]);
    let default_dim = if lattice.kind() == LatticeKind::Grid2d { 2 } else { 1 };
    if law == "discrete" {
        let Some(path) = cfg.optional_string("stimuli.file") else {
            return Err("stimuli.file: required for the discrete law".into());
        };
        let file = File::open(&path).map_err(|e| format!("stimuli.file: {path}: {e}"))?;
        return StimuliDistribution::discrete_from_csv(file, None).map_err(|e| format!("stimuli.file: {e}"));
    }
    let dim = cfg.count("stimuli.dim", default_dim, 1);
    let m = marginal(cfg, &law)?;
    StimuliDistribution::product(vec![m; dim]).map_err(|e| format!("stimuli: {e}"))
}

fn schedule(cfg: &mut Config, default: GainSchedule) -> Result<GainSchedule, String> {
    let (kind, eps, a, b, gamma) = match default {
        GainSchedule::Constant(e) => ("constant", e, 1.0, 100.0, 1.0),
        GainSchedule::Power { a, b, gamma } => ("power", 0.1, a, b, gamma),
        GainSchedule::Log { a } => ("log", 0.1, a, 100.0, 1.0),
    };
    let kind = cfg.choice("schedule.kind", kind, &["constant", "power", "log"]);
    let built = match kind.as_str() {
        "power" => GainSchedule::power(
            cfg.get("schedule.a", a),
            cfg.get("schedule.b", b),
            cfg.get("schedule.gamma", gamma),
        ),
        "log" => GainSchedule::log(cfg.get("schedule.a", a)),
        _ => {
            let eps = cfg.number("schedule.eps", eps, 0.0..=1.0);
            // an out-of-range gain is already recorded as a problem
            if eps <= 0.0 || eps > 1.0 {
                Ok(GainSchedule::frozen())
            } else {
                GainSchedule::constant(eps)
            }
        }
    };
    built.map_err(|e| format!("schedule: {e}"))
}

/// `axis = a,b,c` places a grid or string at explicit coordinates.
fn init(cfg: &mut Config, lattice: &Lattice, default: &str) -> Result<Init, String> {
    let kind = cfg.choice("run.init", default, &["uniform", "ordered", "explicit"]);
    match kind.as_str() {
        "uniform" => Ok(Init::Uniform),
        "ordered" => Ok(Init::Ordered),
        _ => {
            let axis = cfg.list("run.axis", &[0.3f64, 0.5, 0.7]);
            let a = NetworkState::scalar(&axis).map_err(|e| format!("run.axis: {e}"))?;
            let state = if lattice.kind() == LatticeKind::Grid2d {
                let (l, s) = grid_state(&[a.clone(), a]).map_err(|e| format!("run.axis: {e}"))?;
                if &l != lattice {
                    return Err("run.axis: grid size does not match lattice.n1 x lattice.n2".into());
                }
                s
            } else {
                a
            };
            if state.len() != lattice.len() {
                return Err(format!("run.axis: {} values for {} units", state.len(), lattice.len()));
            }
            Ok(Init::Explicit(state))
        }
    }
}

fn write_hitting(out: &mut Output, name: &str, report: &HittingTimeReport, what: &str) -> somlab::Result<()> {
    report.write_csv(out.file(name)?)?;
    let s = report.summary();
    out.line(format!("trials: {}", report.trials.len()));
    out.line(format!("{what} within {} steps: {}", report.budget, s.finite));
    out.line(format!("timeouts: {}", s.timeouts));
    if let (Some(mean), Some(median), Some(max)) = (s.mean, s.median, s.max) {
        out.line(format!("time mean {} median {} max {max}", real(mean), real(median)));
    }
    Ok(())
}

fn hitting(cfg: &mut Config, seed: u64, exits: bool) -> Result<Run, String> {
    let lattice = lattice(cfg, "string", 10)?;
    let nbhd = neighborhood(cfg, if lattice.kind() == LatticeKind::Grid2d { "indicator8" } else { "step" })?;
    let dist = stimuli(cfg, &lattice, "uniform")?;
    let sched = schedule(cfg, GainSchedule::Constant(if exits { 0.2 } else { 0.1 }))?;
    let init = init(cfg, &lattice, if exits { "ordered" } else { "uniform" })?;
    let trials = cfg.count("run.trials", if exits { 50 } else { 200 }, 1);
    let budget = cfg.get("run.steps", 1_000_000u64);
    let predicate = if lattice.kind() == LatticeKind::Grid2d {
        Predicate::Fpp
    } else {
        Predicate::Ordered1d
    };
    let sc = Scenario {
        som: Som::new(lattice, nbhd),
        dist,
        schedule: sched,
        init,
        trials,
        budget,
        seed,
    };
    Ok(Box::new(move |out| {
        if exits {
            let r = exit_time_experiment(&sc, predicate)?;
            write_hitting(out, "exit_times.csv", &r, &format!("exits from {}", predicate.label()))
        } else {
            let r = hitting_time_experiment(&sc, predicate)?;
            write_hitting(out, "hitting_times.csv", &r, &format!("reached {}", predicate.label()))
        }
    }))
}

/// Starting guess for the mean-field solver: evenly spread units.
fn spread_state(lattice: &Lattice, dist: &StimuliDistribution) -> somlab::Result<NetworkState> {
    let axis = |n: usize, (lo, hi): (f64, f64)| {
        let v: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * (2 * i + 1) as f64 / (2 * n) as f64).collect();
        NetworkState::scalar(&v)
    };
    let bounds = dist.bounds();
    match (lattice.kind(), bounds.len()) {
        (LatticeKind::String1d, 1) => axis(lattice.len(), bounds[0]),
        (LatticeKind::Grid2d, 2) => {
            let d = lattice.dims();
            Ok(grid_state(&[axis(d[0], bounds[0])?, axis(d[1], bounds[1])?])?.1)
        }
        _ => Err(Error::Usage("the mean-field solver needs a string with scalar inputs or a grid with planar inputs".into())),
    }
}

fn equilibrium(mf: &MeanField) -> somlab::Result<somlab::meanfield::EquilibriumReport> {
    let start = spread_state(mf.lattice(), mf.distribution())?;
    mf.solve_equilibrium(&start, 1e-10)
}

fn converge(cfg: &mut Config, seed: u64) -> Result<Run, String> {
    let lattice = lattice(cfg, "string", 3)?;
    let nbhd = neighborhood(cfg, "step")?;
    let dist = stimuli(cfg, &lattice, "uniform")?;
    let sched = schedule(
        cfg,
        GainSchedule::Power {
            a: 1.0,
            b: 100.0,
            gamma: 1.0,
        },
    )?;
    let init = init(cfg, &lattice, "ordered")?;
    let trials = cfg.count("run.trials", 100, 1);
    let steps = cfg.get("run.steps", 10_000_000u64);
    let tol = cfg.number("run.tolerance", 1e-2, 0.0..=f64::MAX);
    Ok(Box::new(move |out| {
        let som = Som::new(lattice.clone(), nbhd.clone());
        let eq = equilibrium(&MeanField::new(lattice, nbhd, dist.clone()))?;
        let target = eq.state.weights().to_vec();
        let rows: Vec<(u64, NetworkState)> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let s = trial_seed(seed, trial);
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let start = initial_state(som.lattice(), &dist, &init, &mut rng)?;
                let end = som.run(start, &dist, &sched, &RunOptions::steps(steps), &mut rng, &mut []);
                Ok((s, end.state))
            })
            .collect::<somlab::Result<_>>()?;
        let mut w = csv::Writer::from_writer(out.file("converge.csv")?);
        let mut header = vec!["trial".to_string(), "seed".into(), "max_error".into()];
        header.extend((0..target.len()).map(|k| format!("w{k}")));
        w.write_record(&header)?;
        let mut hits = 0;
        for (trial, (s, state)) in rows.iter().enumerate() {
            let err = state
                .weights()
                .iter()
                .zip(&target)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            hits += usize::from(err <= tol);
            let mut rec = vec![trial.to_string(), s.to_string(), real(err)];
            rec.extend(state.weights().iter().map(|&x| real(x)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        out.line(format!("equilibrium: {}", somlab::report::reals(&target).join(", ")));
        out.line(format!("trials within {} of it after {steps} steps: {hits}/{trials}", real(tol)));
        Ok(())
    }))
}

fn invariant(cfg: &mut Config, seed: u64) -> Result<Run, String> {
    let lattice = lattice(cfg, "string", 3)?;
    let nbhd = neighborhood(cfg, "step")?;
    let dist = stimuli(cfg, &lattice, "uniform")?;
    let init = init(cfg, &lattice, "ordered")?;
    let gains = cfg.list("invariant.gains", &[0.1f64, 0.01]);
    if let Some(g) = gains.iter().find(|g| !(**g > 0.0 && **g < 1.0)) {
        cfg.problem(format!("invariant.gains: {g} is outside ]0, 1["));
    }
    let burn_in = cfg.get("invariant.burn_in", 100_000u64);
    let horizon = cfg.get("invariant.horizon", 1_000_000u64);
    Ok(Box::new(move |out| {
        let som = Som::new(lattice.clone(), nbhd.clone());
        let eq = equilibrium(&MeanField::new(lattice, nbhd, dist.clone()))?;
        let rows = invariant_concentration_experiment(&som, &dist, &gains, &eq.state, &init, burn_in, horizon, seed)?;
        let mut w = csv::Writer::from_writer(out.file("concentration.csv")?);
        w.write_record(["eps", "seed", "mean_distance", "final_distance"])?;
        for r in &rows {
            w.write_record([real(r.eps), r.seed.to_string(), real(r.mean_distance), real(r.final_distance)])?;
            out.line(format!("eps {}: time-averaged distance {}", real(r.eps), real(r.mean_distance)));
        }
        w.flush()?;
        Ok(())
    }))
}

fn write_spectrum(out: &Output, name: &str, spectrum: &Spectrum) -> somlab::Result<()> {
    let mut w = csv::Writer::from_writer(out.file(name)?);
    w.write_record(["k", "re", "im"])?;
    for (k, z) in spectrum.eigenvalues.iter().enumerate() {
        w.write_record([k.to_string(), real(z.re), real(z.im)])?;
    }
    w.flush()?;
    Ok(())
}

fn write_state(out: &Output, name: &str, state: &NetworkState) -> somlab::Result<()> {
    let mut w = csv::Writer::from_writer(out.file(name)?);
    let mut header = vec!["unit".to_string()];
    header.extend((0..state.dim()).map(|k| format!("x{k}")));
    w.write_record(&header)?;
    for (i, u) in state.units().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(u.iter().map(|&x| real(x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn meanfield(cfg: &mut Config) -> Result<Run, String> {
    let lattice = lattice(cfg, "string", 10)?;
    let nbhd = neighborhood(cfg, "step")?;
    let dist = stimuli(cfg, &lattice, "uniform")?;
    let tol = cfg.number("meanfield.tolerance", 1e-10, 0.0..=1.0);
    let horizon = cfg.number("meanfield.flow_horizon", 0.0, 0.0..=1e6);
    let dt = cfg.number("meanfield.dt", 0.1, 1e-9..=10.0);
    Ok(Box::new(move |out| {
        let mf = MeanField::new(lattice, nbhd, dist);
        let mut start = spread_state(mf.lattice(), mf.distribution())?;
        if horizon > 0.0 {
            let opts = FlowOptions {
                dt,
                record_every: 10,
                ..FlowOptions::default()
            };
            let flow = mf.ode_flow(&start, horizon, opts)?;
            let mut w = csv::Writer::from_writer(out.file("flow.csv")?);
            let mut header = vec!["t".to_string()];
            header.extend((0..flow.state.weights().len()).map(|k| format!("w{k}")));
            w.write_record(&header)?;
            for (t, s) in &flow.trajectory {
                let mut rec = vec![real(*t)];
                rec.extend(s.weights().iter().map(|&x| real(x)));
                w.write_record(&rec)?;
            }
            w.flush()?;
            out.line(format!("flow to t={}: step {}, halving change {}", real(horizon), real(flow.dt), real(flow.halving_change)));
            start = flow.state;
        }
        let eq = mf.solve_equilibrium(&start, tol)?;
        write_state(out, "equilibrium.csv", &eq.state)?;
        write_spectrum(out, "spectrum.csv", &eq.spectrum)?;
        if mf.lattice().kind() == LatticeKind::String1d && mf.distribution().is_uniform_box() {
            if let Ok(lin) = uniform_limit_linear_system(mf.lattice().len(), mf.neighborhood()) {
                let gap = lin.max_abs_diff(&eq.state);
                out.line(format!("distance to the linear-system solution: {}", real(gap)));
            }
        }
        out.line(format!("residual |h|: {}", real(eq.residual)));
        out.line(format!("newton iterations: {}, flow fallback: {}", eq.iterations, eq.used_flow));
        out.line(format!("cooperative: {}", eq.cooperative));
        out.line(format!("max real eigenvalue of -grad h: {}", real(eq.max_real())));
        out.line(format!("stability: {}", eq.stability().label()));
        Ok(())
    }))
}

fn zador(cfg: &mut Config, seed: u64) -> Result<Run, String> {
    let line = Lattice::string(1).expect("one unit");
    let dist = stimuli(cfg, &line, "linear")?;
    let ns = cfg.list("zador.ns", &[2usize, 4, 8, 16, 32, 64]);
    if ns.contains(&0) {
        cfg.problem("zador.ns: sizes must be positive".into());
    }
    let restarts = cfg.count("zador.restarts", 20, 1);
    Ok(Box::new(move |out| {
        let rows = zador_scan(&ns, &dist, restarts, seed)?;
        write_zador_csv(&rows, out.file("zador.csv")?)?;
        for r in &rows {
            out.line(format!("n {:>4}: n^(2/d) V_n = {} ({})", r.n, real(r.scaled), r.label));
        }
        if let [.., a, b] = rows.as_slice() {
            out.line(format!("relative change between the last two sizes: {}", real((b.scaled - a.scaled).abs() / a.scaled)));
        }
        Ok(())
    }))
}

fn integrand(name: &str) -> fn(f64) -> f64 {
    match name {
        "cube" => |x| x * x * x,
        "exp" => f64::exp,
        "sin" => f64::sin,
        _ => |x| x * x,
    }
}

fn integrate_run(cfg: &mut Config) -> Result<Run, String> {
    let line = Lattice::string(1).expect("one unit");
    let dist = stimuli(cfg, &line, "uniform")?;
    if dist.as_1d().is_none() {
        return Err("integrate: needs a 1-D continuous law".into());
    }
    let function = cfg.choice("integrate.function", "square", &["square", "cube", "exp", "sin"]);
    let quantizer = cfg.choice("integrate.quantizer", "midpoints", &["midpoints", "optimal"]);
    let ns = cfg.list("integrate.ns", &[10usize, 20, 40]);
    if ns.contains(&0) {
        cfg.problem("integrate.ns: sizes must be positive".into());
    }
    Ok(Box::new(move |out| {
        let g = integrand(&function);
        let marginal = dist.as_1d().expect("checked").clone();
        let (lo, hi) = marginal.bounds();
        let reference = match &marginal {
            Marginal::Uniform { .. } => integrate(g, lo, hi, 1e-15) / (hi - lo),
            Marginal::Density(d) => d.integrate_against(g, lo, hi),
        };
        let mut w = csv::Writer::from_writer(out.file("integrate.csv")?);
        w.write_record(["n", "value", "reference", "error"])?;
        let mut prev: Option<f64> = None;
        for &n in &ns {
            let rep = if quantizer == "optimal" {
                optimal_quantizer_1d(n, &dist, 1e-12)?
            } else {
                let v: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * (2 * i + 1) as f64 / (2 * n) as f64).collect();
                QuantizerReport::new("midpoints", NetworkState::scalar(&v)?, &dist)?
            };
            let value = quantize_integrate(|x| g(x[0]), &rep);
            let err = (value - reference).abs();
            w.write_record([n.to_string(), real(value), real(reference), real(err)])?;
            let ratio = prev.map(|p| format!(", ratio to previous {}", real(p / err))).unwrap_or_default();
            out.line(format!("n {n:>4}: {} error {}{ratio}", real(value), real(err)));
            prev = Some(err);
        }
        w.flush()?;
        Ok(())
    }))
}

fn magnification(cfg: &mut Config) -> Result<Run, String> {
    let line = Lattice::string(1).expect("one unit");
    let dist = stimuli(cfg, &line, "linear")?;
    let n = cfg.count("magnification.n", 64, 1);
    Ok(Box::new(move |out| {
        let rep = magnification_experiment(&dist, n)?;
        rep.write_csv(out.file("magnification.csv")?)?;
        match rep.exponent {
            Some(e) => out.line(format!("fitted exponent of code density against f: {}", real(e))),
            None => out.line("fitted exponent: undefined (flat density)"),
        }
        Ok(())
    }))
}

fn dimsel(cfg: &mut Config) -> Result<Run, String> {
    let n = cfg.count("lattice.n", 10, 1);
    let nbhd = neighborhood(cfg, "step")?;
    let line = Lattice::string(n).map_err(|e| e.to_string())?;
    let dist = stimuli(cfg, &line, "uniform")?;
    if dist.as_1d().is_none() {
        return Err("dimsel: the base law must be one-dimensional".into());
    }
    let lo = cfg.get("dimsel.noise_lo", -0.01f64);
    let hi = cfg.get("dimsel.noise_hi", 0.01f64);
    if hi < lo {
        cfg.problem(format!("dimsel: noise_lo = {lo} exceeds noise_hi = {hi}"));
    }
    let offset = cfg.get("dimsel.offset", 0.0f64);
    Ok(Box::new(move |out| {
        let base = MeanField::new(line, nbhd, dist);
        let m1 = equilibrium(&base)?.state;
        let r = dimension_selection(&base, &m1, Marginal::Uniform { lo, hi }, offset)?;
        write_state(out, "augmented_state.csv", &r.state)?;
        write_spectrum(out, "spectrum.csv", &r.spectrum)?;
        out.line(format!("second-coordinate noise: [{}, {}]", real(lo), real(hi)));
        out.line(format!("residual |h|: {}", real(r.residual)));
        out.line(format!("max real eigenvalue of -grad h: {}", real(r.spectrum.max_real())));
        out.line(format!("stability: {}", r.stability.label()));
        Ok(())
    }))
}

fn parse_size(s: &str) -> Option<(usize, usize)> {
    let (a, b) = s.split_once('x')?;
    let (a, b) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
    (a > 0 && b > 0).then_some((a, b))
}

fn grid(cfg: &mut Config) -> Result<Run, String> {
    let sizes = cfg.list("grid.sizes", &["2x2".to_string(), "3x3".into(), "4x4".into(), "5x5".into(), "6x6".into()]);
    let sizes: Vec<(usize, usize)> = sizes
        .iter()
        .map(|s| parse_size(s).ok_or_else(|| format!("grid.sizes: '{s}' is not of the form AxB")))
        .collect::<Result<_, _>>()?;
    let radius = match cfg.choice("grid.neighborhood", "step", &["step", "indicator0"]).as_str() {
        "indicator0" => 0,
        _ => cfg.count("grid.radius", 1, 0),
    };
    Ok(Box::new(move |out| {
        let rows: Vec<_> = sizes
            .par_iter()
            .map(|&(n1, n2)| -> somlab::Result<_> {
                // product of the string equilibria for the same radius; step(0)
                // is the winner-only neighborhood
                let a = uniform_limit_linear_system(n1, &Neighborhood::step(radius))?;
                let b = uniform_limit_linear_system(n2, &Neighborhood::step(radius))?;
                let (lattice, state) = grid_state(&[a, b])?;
                if state.coinciding_units().is_some() {
                    return Ok((n1, n2, None));
                }
                let mf = MeanField::new(lattice, Neighborhood::step(radius), StimuliDistribution::unit_cube(2));
                let residual = mf.evaluate(&state)?.sup_norm();
                let spectrum = mf.jacobian(&state, somlab::meanfield::FD_STEP)?.spectrum()?;
                Ok((n1, n2, Some((residual, spectrum))))
            })
            .collect::<somlab::Result<_>>()?;
        let mut w = csv::Writer::from_writer(out.file("grid.csv")?);
        w.write_record(["n1", "n2", "residual", "max_real", "stability"])?;
        for (n1, n2, result) in &rows {
            match result {
                Some((residual, spectrum)) => {
                    let label = spectrum.verdict().label();
                    w.write_record([n1.to_string(), n2.to_string(), real(*residual), real(spectrum.max_real()), label.into()])?;
                    out.line(format!("{n1}x{n2}: residual {} max real {} {label}", real(*residual), real(spectrum.max_real())));
                }
                None => {
                    w.write_record([n1.to_string(), n2.to_string(), String::new(), String::new(), "degenerate".into()])?;
                    out.line(format!("{n1}x{n2}: equilibrium has coinciding units, no cell structure"));
                }
            }
        }
        w.flush()?;
        Ok(())
    }))
}

fn map_options(cfg: &mut Config, seed: u64, section: &str) -> Result<MapOptions, String> {
    let d = MapOptions::default();
    let n1 = cfg.count(&format!("{section}.n1"), d.lattice.dims()[0], 1);
    let n2 = cfg.count(&format!("{section}.n2"), d.lattice.dims()[1], 1);
    let steps = cfg.get(&format!("{section}.steps"), d.steps);
    Ok(MapOptions {
        lattice: Lattice::grid(n1, n2).map_err(|e| e.to_string())?,
        neighborhood: neighborhood(cfg, "step")?,
        schedule: schedule(cfg, d.schedule)?,
        steps,
        seed,
        winner: d.winner,
    })
}

fn write_map(out: &mut Output, map: &somlab::ModalityMap) -> somlab::Result<()> {
    map.write_csv(out.file("modality_map.csv")?)?;
    let report = map.class_report();
    out.file("classes.txt")?.write_all(report.as_bytes())?;
    out.line(format!("classes:\n{}", report.trim_end()));
    Ok(())
}

fn korresp(cfg: &mut Config, seed: u64) -> Result<Run, String> {
    let mut opts = map_options(cfg, seed, "korresp")?;
    let winner = cfg.choice("korresp.winner", "block", &["block", "full"]);
    opts.winner = if winner == "full" { WinnerMode::Full } else { WinnerMode::Block };
    let table = match cfg.optional_string("korresp.table") {
        Some(path) => {
            let file = File::open(&path).map_err(|e| format!("korresp.table: {path}: {e}"))?;
            ContingencyTable::from_csv(file).map_err(|e| format!("korresp.table: {e}"))?
        }
        None => {
            let block = cfg.count("korresp.block", 3, 1);
            let within = cfg.get("korresp.within", 20u64);
            let across = cfg.get("korresp.across", 1u64);
            block_table(block, within, across)
        }
    };
    Ok(Box::new(move |out| {
        let map = korresp_run(&table, &opts)?;
        write_map(out, &map)?;
        let ok = korresp_structure_recovered(&table, &map)?;
        out.line(format!("every row next to its most associated column: {ok}"));
        Ok(())
    }))
}

fn kacm(cfg: &mut Config, seed: u64) -> Result<Run, String> {
    let opts = map_options(cfg, seed, "kacm")?;
    let Some(path) = cfg.optional_string("kacm.responses") else {
        return Err("kacm.responses: required".into());
    };
    let file = File::open(&path).map_err(|e| format!("kacm.responses: {path}: {e}"))?;
    let responses = Responses::from_csv(file).map_err(|e| format!("kacm.responses: {e}"))?;
    let burt = build_burt(&responses).map_err(|e| format!("kacm.responses: {e}"))?;
    Ok(Box::new(move |out| {
        burt.check_invariants()?;
        let r = kacm_run(&burt, &opts)?;
        for w in &r.warnings {
            out.line(format!("warning: {w}"));
        }
        write_map(out, &r.map)
    }))
}
