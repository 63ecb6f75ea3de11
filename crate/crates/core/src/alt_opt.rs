//! Outer block-coordinate loop: decoders, weights, beamformers, phases.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::beamformer::{solve_beamforming, BisectionOptions};
use crate::channel::{effective_channels, ChannelSet, PhaseConfig};
use crate::error::{Error, Result};
use crate::phase_opt::{rmcg_solve, QuadraticForm, RmcgOptions};
use crate::scenario::ScenarioParams;
use crate::wmmse::{
    compute_mse, compute_rates, update_decoders, update_weights, weighted_sum_rate, wmse_objective, BeamformerSet,
};

/// Stream id for the random initial phases.
pub(crate) const STREAM_INIT: u64 = 0x1a1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Uniform random phases, matched-filter beamformers.
    RandomPhase,
    /// All phases at 1, matched-filter beamformers.
    AllOnes,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once the relative WSR increase of an outer iteration falls below this.
    pub outer_tol: f64,
    pub max_outer: usize,
    pub bisection: BisectionOptions,
    pub rmcg: RmcgOptions,
    pub init: InitMode,
    /// Set to `false` to keep the phases fixed (beamforming-only WMMSE).
    pub optimize_phases: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            outer_tol: 1e-4,
            max_outer: 100,
            bisection: BisectionOptions::default(),
            rmcg: RmcgOptions::default(),
            init: InitMode::RandomPhase,
            optimize_phases: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.outer_tol > 0.0) {
            return Err(Error::InvalidInput(format!("outer_tol must be positive, got {}", self.outer_tol)));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidInput("max_outer must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Weighted sum rate after the iteration (nats/s/Hz).
    pub wsr: f64,
    /// WMSE objective with this iteration's decoders and weights, after the phase step.
    pub wmse_objective: f64,
    pub lambda: f64,
    pub bisection_probes: usize,
    pub inner_iterations: usize,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub initial_wsr: f64,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl SolveTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_wsr(&self) -> f64 {
        self.records.last().map_or(self.initial_wsr, |r| r.wsr)
    }

    pub fn wsr_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.wsr).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub beamformers: BeamformerSet,
    pub phases: PhaseConfig,
    pub trace: SolveTrace,
}

/// Random (or all-ones) phases and a full-power matched filter on the
/// resulting effective channels.
pub fn initialize<R: Rng + ?Sized>(
    scenario: &ScenarioParams,
    channels: &ChannelSet,
    mode: InitMode,
    rng: &mut R,
) -> Result<(BeamformerSet, PhaseConfig)> {
    let phases = match mode {
        InitMode::RandomPhase => PhaseConfig::random(channels.n_irs(), channels.n_elements(), rng),
        InitMode::AllOnes => PhaseConfig::for_channels(channels),
    };
    let hbar = effective_channels(channels, &phases)?;
    Ok((BeamformerSet::matched_filter(&hbar, scenario.p_max), phases))
}

/// Weighted sum rate of a given operating point.
pub fn evaluate_wsr(scenario: &ScenarioParams, channels: &ChannelSet, w: &BeamformerSet, v: &PhaseConfig) -> Result<f64> {
    let hbar = effective_channels(channels, v)?;
    weighted_sum_rate(&scenario.weights, &compute_rates(&hbar, w, scenario.noise_power)?)
}

/// Initializes from the scenario seed and runs [`solve_from`].
pub fn solve(scenario: &ScenarioParams, channels: &ChannelSet, opts: &SolverOptions) -> Result<Solution> {
    let mut rng = ChaCha20Rng::seed_from_u64(scenario.rng_seed);
    rng.set_stream(STREAM_INIT);
    let (w0, v0) = initialize(scenario, channels, opts.init, &mut rng)?;
    solve_from(scenario, channels, w0, v0, opts)
}

pub fn solve_from(
    scenario: &ScenarioParams,
    channels: &ChannelSet,
    w0: BeamformerSet,
    v0: PhaseConfig,
    opts: &SolverOptions,
) -> Result<Solution> {
    opts.validate()?;
    scenario.validate()?;
    channels.validate()?;
    if channels.n_users() != scenario.n_users || channels.n_tx() != scenario.n_tx {
        return Err(Error::DimensionMismatch("channels do not match the scenario".into()));
    }
    let alpha = &scenario.weights;
    let s2 = scenario.noise_power;

    let mut w = w0;
    let mut v = v0;
    let mut hbar = effective_channels(channels, &v)?;
    let initial_wsr = weighted_sum_rate(alpha, &compute_rates(&hbar, &w, s2)?)?;
    let mut trace = SolveTrace { initial_wsr, records: Vec::new(), converged: false };
    let mut prev = initial_wsr;

    for it in 1..=opts.max_outer {
        let started = Instant::now();
        let mut step = || -> Result<IterationRecord> {
            let u = update_decoders(&hbar, &w, s2)?;
            let q = update_weights(&compute_mse(&hbar, &w, &u, s2)?)?;
            let bf = solve_beamforming(&hbar, &u, &q, alpha, scenario.p_max, &opts.bisection)?;
            w = bf.beamformers;

            let mut inner_iterations = 0;
            if opts.optimize_phases && !v.is_empty() {
                let form = QuadraticForm::assemble(channels, &w, &u, &q, alpha, s2)?;
                let rmcg = RmcgOptions { seed: opts.rmcg.seed ^ it as u64, ..opts.rmcg };
                let (v_new, inner) = rmcg_solve(&form, &v, &rmcg)?;
                v = v_new;
                inner_iterations = inner.iterations;
                hbar = effective_channels(channels, &v)?;
            }

            let wmse = wmse_objective(alpha, &q, &compute_mse(&hbar, &w, &u, s2)?);
            let wsr = weighted_sum_rate(alpha, &compute_rates(&hbar, &w, s2)?)?;
            Ok(IterationRecord {
                wsr,
                wmse_objective: wmse,
                lambda: bf.lambda,
                bisection_probes: bf.probes,
                inner_iterations,
                elapsed_ms: 0.0,
            })
        };
        let mut record = step().map_err(|e| e.at_iteration(it))?;
        record.elapsed_ms = started.elapsed().as_secs_f64() * 1e3;

        let rel = (record.wsr - prev) / prev.abs().max(f64::MIN_POSITIVE);
        prev = record.wsr;
        trace.records.push(record);
        if rel < opts.outer_tol || opts.outer_tol.is_infinite() {
            trace.converged = true;
            break;
        }
    }
    Ok(Solution { beamformers: w, phases: v, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::draw_channels_seeded;

    #[test]
    fn initialization_is_feasible_and_deterministic() {
        let p = ScenarioParams::desk(4);
        let ch = draw_channels_seeded(&p).unwrap();
        let mut r1 = ChaCha20Rng::seed_from_u64(1);
        let mut r2 = ChaCha20Rng::seed_from_u64(1);
        let (w1, v1) = initialize(&p, &ch, InitMode::RandomPhase, &mut r1).unwrap();
        let (w2, v2) = initialize(&p, &ch, InitMode::RandomPhase, &mut r2).unwrap();
        assert_eq!((&w1, &v1), (&w2, &v2));
        assert!((w1.total_power() - p.p_max).abs() <= 1e-12 * p.p_max);
        assert!(v1.as_vector().iter().all(|c| (c.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn infinite_tolerance_runs_one_iteration() {
        let p = ScenarioParams::desk(2);
        let ch = draw_channels_seeded(&p).unwrap();
        let opts = SolverOptions { outer_tol: f64::INFINITY, ..Default::default() };
        let sol = solve(&p, &ch, &opts).unwrap();
        assert_eq!(sol.trace.iterations(), 1);
        assert!(sol.trace.converged);
    }

    #[test]
    fn rejects_bad_options() {
        let p = ScenarioParams::desk(2);
        let ch = draw_channels_seeded(&p).unwrap();
        assert!(solve(&p, &ch, &SolverOptions { max_outer: 0, ..Default::default() }).is_err());
        assert!(solve(&p, &ch, &SolverOptions { outer_tol: 0.0, ..Default::default() }).is_err());
    }

    #[test]
    fn trace_is_monotone_and_feasible() {
        let p = ScenarioParams::desk(6);
        let ch = draw_channels_seeded(&p).unwrap();
        let sol = solve(&p, &ch, &SolverOptions::default()).unwrap();
        let mut prev = sol.trace.initial_wsr;
        for r in &sol.trace.records {
            assert!(r.wsr >= prev - 1e-9, "{} < {}", r.wsr, prev);
            prev = r.wsr;
        }
        assert!(sol.beamformers.total_power() <= p.p_max * (1.0 + 1e-6));
        assert!(sol.phases.as_vector().iter().all(|c| (c.norm() - 1.0).abs() < 1e-12));
        assert!(sol.trace.final_wsr() > sol.trace.initial_wsr);
    }
}
