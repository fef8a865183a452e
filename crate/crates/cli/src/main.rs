//! `ckdv`: simulations, consistency checks and stability experiments for
//! the coupled KdV system.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use ckdv_core::stability::{PerturbationMode, TranslationMode};
use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{Experiment, RunConfig, TimeStep};
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "ckdv", version, about = "Coupled KdV laboratory")]
struct Cli {
    /// Worker threads (default: one per core; CKDV_THREADS takes precedence).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExperimentKind {
    Soliton,
    Ground,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    UOnly,
    XiOnly,
    Mixed,
}

impl From<ModeArg> for PerturbationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::UOnly => PerturbationMode::UOnly,
            ModeArg::XiOnly => PerturbationMode::XiOnly,
            ModeArg::Mixed => PerturbationMode::Mixed,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TranslationArg {
    UOnly,
    Both,
}

impl From<TranslationArg> for TranslationMode {
    fn from(m: TranslationArg) -> Self {
        match m {
            TranslationArg::UOnly => TranslationMode::UOnly,
            TranslationArg::Both => TranslationMode::Both,
        }
    }
}

#[derive(clap::Args)]
struct GridArgs {
    /// Domain length (default 40π).
    #[arg(long)]
    length: Option<f64>,
    /// Grid points.
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the initial condition described by a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Travelling-wave residual and propagation error of the soliton.
    SolitonCheck {
        #[arg(long = "c", value_delimiter = ',', default_value = "0.5,1,4", allow_negative_numbers = true)]
        speeds: Vec<f64>,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
        #[arg(long, default_value = "out/soliton-check")]
        out: PathBuf,
    },
    /// Compare the bracket-generated flow with the equations of motion.
    BracketCheck {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 2)]
        components: usize,
        /// Number of random states added to the battery.
        #[arg(long, default_value_t = 10)]
        random: u64,
        #[arg(long, default_value_t = 100)]
        seed: u64,
        #[arg(long, default_value = "out/bracket-check")]
        out: PathBuf,
    },
    /// Perturbed soliton or ground-state stability experiment.
    Stability {
        /// Base configuration; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        experiment: Option<ExperimentKind>,
        #[arg(long = "c")]
        speed: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Number of seeds, starting from `--first-seed`.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        first_seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, value_enum)]
        translation: Option<TranslationArg>,
        /// Keep the raw perturbation instead of moving it onto the soliton's V level.
        #[arg(long)]
        no_v_rescale: bool,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        components: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        sample_every: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Temporal and spatial convergence studies on the soliton.
    Convergence {
        #[arg(long, default_value = "out/convergence")]
        out: PathBuf,
    },
}

fn configure_threads(flag: Option<usize>) -> CliResult<()> {
    let env = match std::env::var("CKDV_THREADS") {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("CKDV_THREADS: expected a thread count, got {v:?}")))?,
        ),
        Err(_) => None,
    };
    let threads = env.or(flag).unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn grid_override(cfg: &mut RunConfig, grid: &GridArgs) {
    if let Some(l) = grid.length {
        cfg.domain.length = l;
    }
    if let Some(n) = grid.points {
        cfg.domain.n_points = n;
    }
}

fn defaults_with(grid: &GridArgs) -> RunConfig {
    let mut cfg = RunConfig::default();
    grid_override(&mut cfg, grid);
    cfg
}

fn run(cli: Cli) -> CliResult<u8> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let out = out.unwrap_or_else(|| cfg.output.clone());
            commands::simulate::run(&cfg, &out)
        }
        Command::SolitonCheck { speeds, grid, dt, t_end, out } => {
            let base = defaults_with(&grid);
            let opts = commands::soliton_check::Options {
                speeds,
                length: base.domain.length,
                n_points: base.domain.n_points,
                dt,
                t_end,
            };
            if !(dt.is_finite() && dt > 0.0) || !(t_end.is_finite() && t_end >= 0.0) {
                return Err(CliError::Config("--dt must be positive and --t-end non-negative".into()));
            }
            commands::soliton_check::run(&opts, &out)
        }
        Command::BracketCheck { grid, components, random, seed, out } => {
            let base = defaults_with(&grid);
            let opts = commands::bracket_check::Options {
                length: base.domain.length,
                n_points: base.domain.n_points,
                n_components: components,
                random_states: random,
                seed,
            };
            commands::bracket_check::run(&opts, &out)
        }
        Command::Stability {
            config,
            experiment,
            speed,
            delta,
            seeds,
            first_seed,
            mode,
            translation,
            no_v_rescale,
            grid,
            components,
            dt,
            t_end,
            sample_every,
            out,
        } => {
            let mut cfg = match &config {
                Some(path) => RunConfig::load(path)?,
                None => RunConfig::default(),
            };
            grid_override(&mut cfg, &grid);
            if let Some(nc) = components {
                cfg.n_components = nc;
            }
            if let Some(dt) = dt {
                cfg.dt = TimeStep::Fixed(dt);
            }
            if let Some(t) = t_end {
                cfg.t_end = t;
            }
            if let Some(s) = sample_every {
                cfg.sample_every = s;
            }
            if let Some(s) = first_seed {
                cfg.seed = s;
            }
            let kind = match (experiment, &cfg.experiment) {
                (Some(k), _) => k,
                (None, Some(Experiment::Soliton { .. })) => ExperimentKind::Soliton,
                (None, Some(Experiment::Ground { .. })) => ExperimentKind::Ground,
                (None, None) => ExperimentKind::Soliton,
            };
            cfg.experiment = Some(build_experiment(
                kind,
                cfg.experiment.take(),
                speed,
                delta,
                seeds,
                mode,
                translation,
                no_v_rescale,
            )?);
            cfg.validate()?;
            let dt = match cfg.dt {
                TimeStep::Fixed(dt) => dt,
                TimeStep::Auto => {
                    return Err(CliError::Config("dt: stability runs need a fixed step".into()));
                }
            };
            let opts = commands::stability::Options {
                length: cfg.domain.length,
                n_points: cfg.domain.n_points,
                n_components: cfg.n_components,
                dt,
                t_end: cfg.t_end,
                sample_every: cfg.sample_every,
                first_seed: cfg.seed,
                experiment: cfg.experiment.clone().expect("set above"),
            };
            let out = out.unwrap_or_else(|| {
                if config.is_some() {
                    cfg.output.clone()
                } else {
                    PathBuf::from("out/stability")
                }
            });
            commands::stability::run(&opts, &out)
        }
        Command::Convergence { out } => {
            commands::convergence::run(&commands::convergence::Options::default(), &out)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn build_experiment(
    kind: ExperimentKind,
    base: Option<Experiment>,
    speed: Option<f64>,
    delta: Option<f64>,
    seeds: Option<u64>,
    mode: Option<ModeArg>,
    translation: Option<TranslationArg>,
    no_v_rescale: bool,
) -> CliResult<Experiment> {
    let mode = mode.map(PerturbationMode::from);
    Ok(match kind {
        ExperimentKind::Soliton => {
            let (mut c, mut d, mut n, mut m, mut v, mut tr) = match base {
                Some(Experiment::Soliton { speed, delta, seeds, mode, v_rescale, translation }) => {
                    (speed, delta, seeds, mode, v_rescale, translation)
                }
                _ => (1.0, 1e-2, 10, PerturbationMode::default(), true, TranslationMode::default()),
            };
            c = speed.unwrap_or(c);
            d = delta.unwrap_or(d);
            n = seeds.unwrap_or(n);
            m = mode.unwrap_or(m);
            v &= !no_v_rescale;
            tr = translation.map(TranslationMode::from).unwrap_or(tr);
            Experiment::Soliton {
                speed: c,
                delta: d,
                seeds: n,
                mode: m,
                v_rescale: v,
                translation: tr,
            }
        }
        ExperimentKind::Ground => {
            if speed.is_some() || translation.is_some() || no_v_rescale {
                return Err(CliError::Config(
                    "--c, --translation and --no-v-rescale apply to the soliton experiment only".into(),
                ));
            }
            let (mut d, mut n, mut m) = match base {
                Some(Experiment::Ground { delta, seeds, mode }) => (delta, seeds, mode),
                _ => (0.1, 10, PerturbationMode::default()),
            };
            d = delta.unwrap_or(d);
            n = seeds.unwrap_or(n);
            m = mode.unwrap_or(m);
            Experiment::Ground { delta: d, seeds: n, mode: m }
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
