//! `mirs`: single solves with trace export, Monte-Carlo sweeps and the
//! invariant self-check. Log verbosity follows `RUST_LOG`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use mirs_core::channel::draw_channels_seeded;
use mirs_core::experiment::{write_csv, ScenarioSource};
use mirs_core::*;

#[derive(Parser)]
#[command(name = "mirs", version, about = "Weighted sum-rate maximization for multi-IRS aided MISO downlinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one channel realization and write the per-iteration trace as CSV.
    Solve(SolveArgs),
    /// Monte-Carlo sweep over the power budget or the IRS size.
    Sweep(SweepArgs),
    /// Check the solver invariants on random instances.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// 4 antennas, 4 users, 2 IRSs of 16 elements.
    Desk,
    /// 8 antennas, 8 users, 4 IRSs of 60 elements.
    Full,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario config file (key = value lines); overrides --preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    preset: Preset,
}

#[derive(Clone, Copy, ValueEnum)]
enum Init {
    Random,
    Ones,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Seed for user placement, fading and the initial phases.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Init::Random)]
    init: Init,
    /// Relative WSR increase below which the loop stops.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_outer: usize,
    /// Trace CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// pmax (W), pmax-dbm or m (elements per IRS).
    #[arg(long, default_value = "pmax")]
    axis: SweepAxis,
    /// Strictly increasing comma-separated sweep points.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, value_delimiter = ',', default_value = "proposed,random_phase,no_irs")]
    schemes: Vec<Scheme>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; one per core when omitted.
    #[arg(long)]
    threads: Option<usize>,
    /// Result CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    trials: usize,
}

fn load_scenario(args: &ScenarioArgs, seed: Option<u64>) -> Result<ScenarioParams> {
    let mut params = match &args.config {
        Some(path) => ScenarioParams::from_config_file(path).with_context(|| format!("reading {}", path.display()))?,
        None => match args.preset {
            Preset::Desk => ScenarioParams::desk(seed.unwrap_or(0)),
            Preset::Full => ScenarioParams::full(seed.unwrap_or(0)),
        },
    };
    if let Some(s) = seed {
        params.rng_seed = s;
    }
    Ok(params)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run_solve(args: SolveArgs) -> Result<()> {
    let params = load_scenario(&args.scenario, args.seed)?;
    let mut out = open_output(args.out.as_deref())?;
    let channels = draw_channels_seeded(&params)?;
    let opts = SolverOptions {
        outer_tol: args.tol,
        max_outer: args.max_outer,
        init: match args.init {
            Init::Random => InitMode::RandomPhase,
            Init::Ones => InitMode::AllOnes,
        },
        ..Default::default()
    };
    let sol = solve(&params, &channels, &opts)?;
    let ln2 = std::f64::consts::LN_2;

    writeln!(out, "iter,wsr_nats,wsr_bits,wmse_objective,lambda,inner_iters,time_ms")?;
    let w0 = sol.trace.initial_wsr;
    writeln!(out, "0,{w0},{},,,0,0", w0 / ln2)?;
    for (i, r) in sol.trace.records.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.3}",
            i + 1,
            r.wsr,
            r.wsr / ln2,
            r.wmse_objective,
            r.lambda,
            r.inner_iterations,
            r.elapsed_ms
        )?;
    }
    out.flush()?;
    info!(
        "{} outer iterations, converged: {}, WSR {:.6} -> {:.6} nats/s/Hz",
        sol.trace.iterations(),
        sol.trace.converged,
        w0,
        sol.trace.final_wsr()
    );
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let scenario = match &args.scenario.config {
        Some(_) => ScenarioSource::Fixed(load_scenario(&args.scenario, None)?),
        None => match args.scenario.preset {
            Preset::Desk => ScenarioSource::Desk,
            Preset::Full => ScenarioSource::Full,
        },
    };
    let mut spec = ExperimentSpec::new(args.axis, args.values);
    spec.scenario = scenario;
    spec.n_trials = args.trials;
    spec.schemes = args.schemes;
    spec.base_seed = args.seed;
    spec.threads = args.threads;
    spec.output = args.out.clone();
    let result = run_experiment(&spec)?;
    match args.out {
        Some(path) => {
            info!("wrote {} rows to {}", result.rows.len(), path.display());
            print!("{result}");
        }
        None => {
            let stdout = io::stdout().lock();
            write_csv(&result.rows, stdout)?;
            eprint!("{result}");
        }
    }
    Ok(())
}

fn run_validate(args: ValidateArgs) -> Result<()> {
    if args.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let outcomes = mirs_core::validate::run_all(args.seed, args.trials)?;
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        bail!("{failed} of {} checks failed", outcomes.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Validate(a) => run_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
