use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

mod config;
mod experiments;

use config::Config;
use experiments::Output;

#[derive(Parser)]
#[command(name = "somlab", version, about = "Run Kohonen-map experiments from a config file")]
struct Cli {
    #[command(subcommand)]
    experiment: Experiment,

    /// Config file of `key = value` lines under `[section]` headers.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory, created if needed.
    #[arg(long, global = true, default_value = "somlab-out")]
    out: PathBuf,

    /// Validate the config and print the resolved values; run nothing.
    #[arg(long, global = true)]
    dry_run: bool,

    /// Worker threads for parallel trials (default: all cores).
    #[arg(long, global = true, env = "SOMLAB_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Experiment {
    /// Hitting times of the ordered set from random starts.
    Ordering,
    /// Exit times from the ordered set.
    Exit,
    /// Decreasing-gain runs against the mean-field equilibrium.
    Converge,
    /// Time-averaged distance to equilibrium at constant gains.
    Invariant,
    /// Mean-field equilibrium, spectrum and stability.
    Meanfield,
    /// Optimal distortion against the number of units.
    Zador,
    /// Quantization-based numerical integration.
    Integrate,
    /// Code-point density of the optimal quantizer.
    Magnification,
    /// Stability of a 1-D equilibrium under thin transverse noise.
    Dimsel,
    /// Product equilibria on grids of several sizes.
    Grid,
    /// Map of a contingency table.
    Korresp,
    /// Map of a multiple-choice survey through its Burt table.
    Kacm,
}

impl Experiment {
    fn name(self) -> &'static str {
        use Experiment::*;
        let k = match self {
            Ordering => 0,
            Exit => 1,
            Converge => 2,
            Invariant => 3,
            Meanfield => 4,
            Zador => 5,
            Integrate => 6,
            Magnification => 7,
            Dimsel => 8,
            Grid => 9,
            Korresp => 10,
            Kacm => 11,
        };
        experiments::KINDS[k]
    }
}

fn load(cli: &Cli) -> Result<Config, Vec<String>> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path).map_err(|e| vec![format!("{}: {e}", path.display())])?,
        None => String::new(),
    };
    let mut cfg = Config::parse(&text)?;
    if let Some(seed) = cli.seed {
        cfg.set("seed", seed.to_string());
    }
    Ok(cfg)
}

fn fail_validation(problems: &[String]) -> ExitCode {
    eprintln!("invalid configuration:");
    for p in problems {
        eprintln!("  {p}");
    }
    ExitCode::from(2)
}

fn write_summary(dir: &Path, kind: &str, echo: &str, body: &str, secs: f64) -> std::io::Result<()> {
    let text = format!("experiment: {kind}\n\n{body}\nwall clock: {secs:.3} s\n\nconfiguration:\n{echo}");
    fs::write(dir.join("summary.txt"), text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let kind = cli.experiment.name();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot set up {n} workers: {e}");
            return ExitCode::from(2);
        }
    }
    let mut cfg = match load(&cli) {
        Ok(c) => c,
        Err(p) => return fail_validation(&p),
    };
    let run = match experiments::prepare(kind, &mut cfg) {
        Ok(r) => r,
        Err(p) => return fail_validation(&p),
    };
    let echo = cfg.echo();
    if cli.dry_run {
        print!("{echo}");
        println!("# {kind}: configuration is valid");
        return ExitCode::SUCCESS;
    }
    if let Err(e) = fs::create_dir_all(&cli.out).and_then(|_| fs::write(cli.out.join("config.txt"), &echo)) {
        eprintln!("cannot write to {}: {e}", cli.out.display());
        return ExitCode::FAILURE;
    }
    let start = Instant::now();
    let mut out = Output::new(&cli.out);
    match run(&mut out) {
        Ok(()) => {
            let secs = start.elapsed().as_secs_f64();
            if let Err(e) = write_summary(&cli.out, kind, &echo, &out.summary, secs) {
                eprintln!("cannot write summary: {e}");
                return ExitCode::FAILURE;
            }
            print!("{}", out.summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = fs::write(cli.out.join("error.txt"), format!("experiment: {kind}\nerror: {e}\n\nconfiguration:\n{echo}"));
            eprintln!("{kind} failed: {e}");
            ExitCode::FAILURE
        }
    }
}
