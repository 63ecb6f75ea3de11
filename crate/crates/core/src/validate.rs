//! Self-checks of the solver invariants on random instances, used by the
//! `validate` CLI subcommand.

use std::fmt;

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::beamformer::{assemble_context, beamformers_at, lambda_upper_bound, power_g};
use crate::channel::{complex_normal, effective_channels, ChannelSet, PhaseConfig};
use crate::error::Result;
use crate::phase_opt::{project_tangent, rmcg_solve, QuadraticForm, RmcgOptions};
use crate::wmmse::{compute_mse, compute_rates, update_decoders, update_weights, weighted_mse, weighted_sum_rate, wmse_objective, BeamformerSet};
use crate::{CMatrix, CVector, C64};

/// Channel set with i.i.d. unit-variance complex Gaussian entries.
pub fn gaussian_channels<R: Rng + ?Sized>(rng: &mut R, n_tx: usize, n_users: usize, n_irs: usize, n_elements: usize) -> ChannelSet {
    let vec = |n: usize, rng: &mut R| CVector::from_fn(n, |_, _| complex_normal(rng));
    ChannelSet {
        h_direct: (0..n_users).map(|_| vec(n_tx, rng)).collect(),
        g_bs_irs: (0..n_irs).map(|_| CMatrix::from_fn(n_elements, n_tx, |_, _| complex_normal(rng))).collect(),
        h_irs_user: (0..n_irs).map(|_| (0..n_users).map(|_| vec(n_elements, rng)).collect()).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed deviation.
    pub worst: f64,
    pub tolerance: f64,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:<34} worst {:.3e} (tol {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance
        )
    }
}

fn outcome(name: &'static str, worst: f64, tolerance: f64) -> CheckOutcome {
    CheckOutcome { name, passed: worst <= tolerance, worst, tolerance }
}

struct Sample {
    channels: ChannelSet,
    hbar: Vec<CVector>,
    w: BeamformerSet,
    alpha: Vec<f64>,
    noise: f64,
}

fn sample(rng: &mut ChaCha20Rng) -> Sample {
    let n_tx = rng.random_range(1..=6);
    let k = rng.random_range(1..=5);
    let l = rng.random_range(1..=3);
    let m = rng.random_range(1..=6);
    let channels = gaussian_channels(rng, n_tx, k, l, m);
    let v = PhaseConfig::random(l, m, rng);
    let hbar = effective_channels(&channels, &v).expect("consistent dimensions");
    let w = BeamformerSet::random(k, n_tx, 0.5 + 2.0 * rng.random::<f64>(), rng);
    let alpha = (0..k).map(|_| 0.1 + rng.random::<f64>()).collect();
    Sample { channels, hbar, w, alpha, noise: 0.05 + rng.random::<f64>() }
}

/// Runs every check on `trials` random instances.
pub fn run_all(seed: u64, trials: usize) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (mut equivalence, mut identity, mut grad, mut gfun, mut resid, mut tangency, mut descent) = (0f64, 0f64, 0f64, 0f64, 0f64, 0f64, 0f64);
    let mut bound_violations = 0f64;

    for _ in 0..trials {
        let s = sample(&mut rng);
        let u = update_decoders(&s.hbar, &s.w, s.noise)?;
        let e = compute_mse(&s.hbar, &s.w, &u, s.noise)?;
        let q = update_weights(&e)?;
        let wsr = weighted_sum_rate(&s.alpha, &compute_rates(&s.hbar, &s.w, s.noise)?)?;
        equivalence = equivalence.max((wmse_objective(&s.alpha, &q, &e) - wsr).abs());

        let ctx = assemble_context(&s.hbar, &u, &q, &s.alpha)?;
        let lam = 10f64.powf(rng.random_range(-3.0..1.0));
        let w_lam = beamformers_at(lam, &ctx)?;
        let direct = w_lam.total_power();
        if direct > 0.0 {
            gfun = gfun.max((power_g(lam, &ctx) - direct).abs() / direct);
        }
        let a = &ctx.h + CMatrix::identity(ctx.n_tx(), ctx.n_tx()) * C64::from(lam);
        for (wk, rk) in w_lam.vectors().iter().zip(&ctx.rhs) {
            if rk.norm() > 0.0 {
                resid = resid.max((&a * wk - rk).norm() / rk.norm());
            }
        }
        let p = 0.1 + rng.random::<f64>();
        if power_g(lambda_upper_bound(&ctx, p), &ctx) > p {
            bound_violations += 1.0;
        }

        let form = QuadraticForm::assemble(&s.channels, &s.w, &u, &q, &s.alpha, s.noise)?;
        let v = PhaseConfig::random(s.channels.n_irs(), s.channels.n_elements(), &mut rng);
        let direct_mse = weighted_mse(&s.alpha, &q, &compute_mse(&effective_channels(&s.channels, &v)?, &s.w, &u, s.noise)?);
        identity = identity.max((form.weighted_mse(&v)? - direct_mse).abs() / direct_mse.abs().max(1e-300));

        let x = v.as_vector();
        let g = form.euclidean_gradient(x);
        let h = 1e-5;
        for i in 0..x.len() {
            for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += dir * h;
                xm[i] -= dir * h;
                let fd = (form.ambient_value(&xp) - form.ambient_value(&xm)) / (2.0 * h);
                let an = (g[i].conj() * dir).re;
                grad = grad.max((fd - an).abs() / g.norm().max(1e-300));
            }
        }

        let (sol, trace) = rmcg_solve(&form, &v, &RmcgOptions::default())?;
        for wdw in trace.objective.windows(2) {
            descent = descent.max(wdw[1] - wdw[0]);
        }
        let rg = project_tangent(sol.as_vector(), &form.euclidean_gradient(sol.as_vector()));
        for (gi, vi) in rg.iter().zip(sol.as_vector().iter()) {
            tangency = tangency.max((gi.conj() * vi).re.abs());
        }
    }

    Ok(vec![
        outcome("WMSE/WSR equivalence (abs)", equivalence, 1e-9),
        outcome("phase quadratic identity (rel)", identity, 1e-9),
        outcome("euclidean gradient vs FD (rel)", grad, 1e-6),
        outcome("g(lambda) closed form (rel)", gfun, 1e-10),
        outcome("stationarity residual (rel)", resid, 1e-9),
        outcome("lambda_max feasibility (count)", bound_violations, 0.0),
        outcome("riemannian gradient tangency", tangency, 1e-10),
        outcome("phase descent increase", descent.max(0.0), 1e-12),
    ])
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_all(17, 40).unwrap() {
            assert!(c.passed, "{c}");
        }
    }
}
