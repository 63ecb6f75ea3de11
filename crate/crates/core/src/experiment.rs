//! Monte-Carlo sweeps over the power budget or the IRS size.
//!
//! Every (sweep point, trial) pair is an independent work item. The trial
//! seed depends only on the base seed and the trial index, so all sweep
//! points of a trial share user positions and direct channels; rows are
//! sorted before writing, so output never depends on scheduling.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::alt_opt::{solve_from, Solution, SolverOptions};
use crate::channel::{draw_channels_seeded, effective_channels, ChannelSet, PhaseConfig};
use crate::error::{Error, Result};
use crate::scenario::{dbm_to_watt, ScenarioParams};
use crate::wmmse::BeamformerSet;

/// Stream id of the fixed random phases used by the baselines.
const STREAM_BASELINE_PHASE: u64 = 0xbb5;

pub const CSV_HEADER: &str = "scheme,sweep_name,sweep_value,trial,seed,wsr_nats,wsr_bits,outer_iters,time_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    /// Joint beamforming and phase optimization.
    Proposed,
    /// Beamforming only, phases fixed at a random draw.
    RandomPhase,
    /// Beamforming only, reflected paths removed.
    NoIrs,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Proposed, Scheme::RandomPhase, Scheme::NoIrs];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::RandomPhase => "random_phase",
            Scheme::NoIrs => "no_irs",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Usage(format!("unknown scheme `{s}` (expected proposed, random_phase or no_irs)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// BS power budget in Watts.
    PmaxWatt,
    /// BS power budget in dBm.
    PmaxDbm,
    /// Elements per IRS.
    Elements,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::PmaxWatt => "p_max_w",
            SweepAxis::PmaxDbm => "p_max_dbm",
            SweepAxis::Elements => "n_elements",
        }
    }

    fn apply(self, params: &mut ScenarioParams, value: f64) -> Result<()> {
        match self {
            SweepAxis::PmaxWatt => params.p_max = value,
            SweepAxis::PmaxDbm => params.p_max = dbm_to_watt(value),
            SweepAxis::Elements => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::Usage(format!("element count must be a positive integer, got {value}")));
                }
                params.n_elements = value as usize;
            }
        }
        Ok(())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pmax" | "p_max" | "p_max_w" => Ok(SweepAxis::PmaxWatt),
            "pmax-dbm" | "p_max_dbm" => Ok(SweepAxis::PmaxDbm),
            "m" | "elements" | "n_elements" => Ok(SweepAxis::Elements),
            other => Err(Error::Usage(format!("unknown sweep axis `{other}` (expected pmax, pmax-dbm or m)"))),
        }
    }
}

/// Where trial scenarios come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    /// Small preset; users re-placed every trial.
    Desk,
    /// Full-size preset; users re-placed every trial.
    Full,
    /// Fixed geometry; only the fading changes between trials.
    Fixed(ScenarioParams),
}

impl ScenarioSource {
    fn trial_params(&self, seed: u64) -> ScenarioParams {
        match self {
            ScenarioSource::Desk => ScenarioParams::desk(seed),
            ScenarioSource::Full => ScenarioParams::full(seed),
            ScenarioSource::Fixed(p) => ScenarioParams { rng_seed: seed, ..p.clone() },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenario: ScenarioSource,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub n_trials: usize,
    pub schemes: Vec<Scheme>,
    pub base_seed: u64,
    pub output: Option<PathBuf>,
    /// Worker count; `None` uses one per core.
    pub threads: Option<usize>,
    pub solver: SolverOptions,
}

impl ExperimentSpec {
    pub fn new(axis: SweepAxis, values: Vec<f64>) -> Self {
        ExperimentSpec {
            scenario: ScenarioSource::Desk,
            axis,
            values,
            n_trials: 10,
            schemes: Scheme::ALL.to_vec(),
            base_seed: 1,
            output: None,
            threads: None,
            solver: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::Usage("at least one trial is required".into()));
        }
        if self.values.is_empty() {
            return Err(Error::Usage("sweep values are empty".into()));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Usage("sweep values must be strictly increasing".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Usage("no schemes selected".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Usage("thread count must be positive".into()));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub sweep_name: &'static str,
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub wsr_nats: f64,
    pub wsr_bits: f64,
    pub outer_iters: usize,
    pub time_ms: f64,
}

impl Serialize for Scheme {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub sweep_value: f64,
    pub n: usize,
    pub mean_nats: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std_nats: f64,
}

impl SummaryRow {
    pub fn std_error(&self) -> f64 {
        self.std_nats / (self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentResult {
    pub fn summary_for(&self, scheme: Scheme) -> Vec<&SummaryRow> {
        self.summary.iter().filter(|s| s.scheme == scheme).collect()
    }

    pub fn wsr_samples(&self, scheme: Scheme, sweep_value: f64) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.scheme == scheme && r.sweep_value == sweep_value)
            .map(|r| r.wsr_nats)
            .collect()
    }
}

impl fmt::Display for ExperimentResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14} {:>12} {:>6} {:>14} {:>12}", "scheme", "sweep", "n", "mean WSR", "std")?;
        for s in &self.summary {
            writeln!(
                f,
                "{:<14} {:>12} {:>6} {:>14.6} {:>12.6}",
                s.scheme.as_str(),
                s.sweep_value,
                s.n,
                s.mean_nats,
                s.std_nats
            )?;
        }
        Ok(())
    }
}

/// SplitMix64 finalizer.
fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of trial `trial` under `base_seed`.
pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    mix64(base_seed ^ mix64(trial as u64))
}

#[derive(Debug, Clone)]
pub struct SchemeOutcome {
    pub wsr: f64,
    pub outer_iters: usize,
    pub time_ms: f64,
}

/// Fixed random phases drawn from the scenario seed.
pub fn baseline_phases(scenario: &ScenarioParams, channels: &ChannelSet) -> PhaseConfig {
    let mut rng = ChaCha20Rng::seed_from_u64(scenario.rng_seed);
    rng.set_stream(STREAM_BASELINE_PHASE);
    PhaseConfig::random(channels.n_irs(), channels.n_elements(), &mut rng)
}

fn beamforming_only(
    scenario: &ScenarioParams,
    channels: &ChannelSet,
    phases: PhaseConfig,
    opts: &SolverOptions,
) -> Result<Solution> {
    let opts = SolverOptions { optimize_phases: false, ..*opts };
    let hbar = effective_channels(channels, &phases)?;
    let w0 = BeamformerSet::matched_filter(&hbar, scenario.p_max);
    solve_from(scenario, channels, w0, phases, &opts)
}

/// WSR of a benchmark scheme: beamforming-only WMMSE with the reflected paths
/// dropped (`NoIrs`) or with phases fixed at a seeded random draw (`RandomPhase`).
pub fn run_baseline(scheme: Scheme, scenario: &ScenarioParams, channels: &ChannelSet, opts: &SolverOptions) -> Result<f64> {
    Ok(run_scheme(scheme, scenario, channels, opts)?.wsr)
}

/// Runs any scheme. The proposed method starts from the random-phase
/// baseline's solution, so it never ends below it.
pub fn run_scheme(scheme: Scheme, scenario: &ScenarioParams, channels: &ChannelSet, opts: &SolverOptions) -> Result<SchemeOutcome> {
    let started = Instant::now();
    let (wsr, outer_iters) = match scheme {
        Scheme::NoIrs => {
            let direct = channels.without_reflection();
            let sol = beamforming_only(scenario, &direct, PhaseConfig::ones(0, 0), opts)?;
            (sol.trace.final_wsr(), sol.trace.iterations())
        }
        Scheme::RandomPhase => {
            let sol = beamforming_only(scenario, channels, baseline_phases(scenario, channels), opts)?;
            (sol.trace.final_wsr(), sol.trace.iterations())
        }
        Scheme::Proposed => {
            let warm = beamforming_only(scenario, channels, baseline_phases(scenario, channels), opts)?;
            let opts = SolverOptions { optimize_phases: true, ..*opts };
            let sol = solve_from(scenario, channels, warm.beamformers, warm.phases, &opts)?;
            (sol.trace.final_wsr(), warm.trace.iterations() + sol.trace.iterations())
        }
    };
    Ok(SchemeOutcome { wsr, outer_iters, time_ms: started.elapsed().as_secs_f64() * 1e3 })
}

fn summarize(rows: &[ResultRow], spec: &ExperimentSpec) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &scheme in &spec.schemes {
        for &value in &spec.values {
            let xs: Vec<f64> = rows
                .iter()
                .filter(|r| r.scheme == scheme && r.sweep_value == value)
                .map(|r| r.wsr_nats)
                .collect();
            let n = xs.len();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
            out.push(SummaryRow { scheme, sweep_value: value, n, mean_nats: mean, std_nats: var.sqrt() });
        }
    }
    out
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Runs the sweep, writes the CSV (if an output path is set) and returns
/// rows plus per-(scheme, sweep value) summary.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    // fail on an unwritable path before doing any work
    let file = spec.output.as_ref().map(File::create).transpose()?;

    let items: Vec<(usize, usize)> =
        (0..spec.values.len()).flat_map(|s| (0..spec.n_trials).map(move |t| (s, t))).collect();
    let work = || -> Result<Vec<ResultRow>> {
        let nested: Vec<Vec<ResultRow>> = items
            .par_iter()
            .map(|&(s, t)| {
                let seed = trial_seed(spec.base_seed, t);
                let value = spec.values[s];
                let mut params = spec.scenario.trial_params(seed);
                spec.axis.apply(&mut params, value)?;
                let channels = draw_channels_seeded(&params)?;
                spec.schemes
                    .iter()
                    .map(|&scheme| {
                        let o = run_scheme(scheme, &params, &channels, &spec.solver)?;
                        Ok(ResultRow {
                            scheme,
                            sweep_name: spec.axis.name(),
                            sweep_value: value,
                            trial: t,
                            seed,
                            wsr_nats: o.wsr,
                            wsr_bits: o.wsr / std::f64::consts::LN_2,
                            outer_iters: o.outer_iters,
                            time_ms: o.time_ms,
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(nested.into_iter().flatten().collect())
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = spec.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
    let mut rows = pool.install(work)?;

    let scheme_rank = |s: Scheme| spec.schemes.iter().position(|&x| x == s).unwrap_or(usize::MAX);
    let value_rank = |v: f64| spec.values.iter().position(|&x| x == v).unwrap_or(usize::MAX);
    rows.sort_by_key(|r| (scheme_rank(r.scheme), value_rank(r.sweep_value), r.trial));

    if let Some(file) = file {
        write_csv(&rows, std::io::BufWriter::new(file))?;
    }
    let summary = summarize(&rows, spec);
    Ok(ExperimentResult { rows, summary })
}
