//! Beamformer update for fixed decoders, weights and phases.
//!
//! The subproblem `min sum_k a_k q_k E_k  s.t.  sum_k |w_k|^2 <= P` is convex.
//! For a multiplier `lambda` the stationary point is
//! `w_k(lambda) = (H + lambda I)^-1 r_k` with `H = sum_j a_j q_j |u_j|^2 h_j h_j^H`
//! and `r_k = a_k q_k u_k h_k`. Diagonalizing `H` once makes the transmit power
//! `g(lambda)` a rational function that is cheap to probe, so the multiplier is
//! found by bisection.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::wmmse::BeamformerSet;
use crate::{CMatrix, CVector, C64};

/// Relative cut-off below which eigenvalues of `H` count as zero.
pub const EIGEN_REL_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionOptions {
    /// Stop when `|g(lambda) - P| <= power_tol_rel * P`.
    pub power_tol_rel: f64,
    /// Stop when the bracket is narrower than `lambda_tol_rel * lambda_max`.
    pub lambda_tol_rel: f64,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        BisectionOptions { power_tol_rel: 1e-8, lambda_tol_rel: 1e-12 }
    }
}

/// Reduced eigen-representation of the stationarity system.
#[derive(Debug, Clone)]
pub struct LagrangianContext {
    /// Full matrix `H`, kept for diagnostics.
    pub h: CMatrix,
    /// Eigenvectors of the positive eigenvalues, `n_tx x N`.
    pub f1: CMatrix,
    /// Positive eigenvalues `eps_i`.
    pub eigenvalues: Vec<f64>,
    /// `Z_k = F1^H h_k u_k u_k^H h_k^H F1`.
    pub z: Vec<CMatrix>,
    /// `r_k = a_k q_k h_k u_k`.
    pub rhs: Vec<CVector>,
    /// `a_k q_k`.
    pub scale: Vec<f64>,
    /// `F1^H r_k`.
    projected_rhs: Vec<CVector>,
}

impl LagrangianContext {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_tx(&self) -> usize {
        self.h.nrows()
    }
}

pub fn assemble_context(hbar: &[CVector], decoders: &[C64], q: &[f64], alpha: &[f64]) -> Result<LagrangianContext> {
    let k_users = hbar.len();
    if decoders.len() != k_users || q.len() != k_users || alpha.len() != k_users {
        return Err(Error::DimensionMismatch("per-user inputs differ in length".into()));
    }
    if let Some(bad) = q.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::NumericalDomain(format!("MSE weight {bad} is not positive")));
    }
    let n = hbar.first().map_or(0, |h| h.len());

    let mut h = CMatrix::zeros(n, n);
    let mut rhs = Vec::with_capacity(k_users);
    let mut scale = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let s = alpha[k] * q[k];
        // a q h u u^H h^H = (a q |u|^2) h h^H
        h += (&hbar[k] * hbar[k].adjoint()) * C64::from(s * decoders[k].norm_sqr());
        rhs.push(&hbar[k] * (decoders[k] * s));
        scale.push(s);
    }
    let h = (&h + h.adjoint()) * C64::from(0.5);

    let eig = SymmetricEigen::try_new(h.clone(), f64::EPSILON, 10_000).ok_or(Error::Eigensolver)?;
    let max_eig = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..n)
        .filter(|&i| max_eig > 0.0 && eig.eigenvalues[i] > EIGEN_REL_THRESHOLD * max_eig)
        .collect();
    let f1 = CMatrix::from_fn(n, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])]);
    let eigenvalues: Vec<f64> = keep.iter().map(|&i| eig.eigenvalues[i]).collect();

    let z = (0..k_users)
        .map(|k| {
            let p = f1.ad_mul(&hbar[k]) * decoders[k];
            &p * p.adjoint()
        })
        .collect();
    let projected_rhs = rhs.iter().map(|r| f1.ad_mul(r)).collect();

    Ok(LagrangianContext { h, f1, eigenvalues, z, rhs, scale, projected_rhs })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("multiplier must be finite and non-negative, got {lambda}")))
    }
}

/// `w_k = F1 (S1 + lambda I)^-1 F1^H r_k`, exact because `r_k` lies in the
/// range of `H`.
pub fn beamformers_at(lambda: f64, ctx: &LagrangianContext) -> Result<BeamformerSet> {
    check_lambda(lambda)?;
    let w = ctx
        .projected_rhs
        .iter()
        .map(|c| {
            let coeff = CVector::from_fn(c.len(), |i, _| c[i] / (ctx.eigenvalues[i] + lambda));
            &ctx.f1 * coeff
        })
        .collect();
    BeamformerSet::new(w)
}

/// Transmit power as a function of the multiplier,
/// `g(lambda) = sum_k (a_k q_k)^2 sum_i [Z_k]_ii / (eps_i + lambda)^2`.
pub fn power_g(lambda: f64, ctx: &LagrangianContext) -> f64 {
    ctx.z
        .iter()
        .zip(&ctx.scale)
        .map(|(z, s)| {
            let inner: f64 = ctx.eigenvalues.iter().enumerate().map(|(i, e)| z[(i, i)].re / (e + lambda).powi(2)).sum();
            s * s * inner
        })
        .sum()
}

/// `lambda_max = sqrt(sum_k (a_k q_k)^2 tr(Z_k) / P)`; `g(lambda_max) <= P`.
pub fn lambda_upper_bound(ctx: &LagrangianContext, p_max: f64) -> f64 {
    let total: f64 = ctx.z.iter().zip(&ctx.scale).map(|(z, s)| s * s * z.trace().re).sum();
    (total / p_max).sqrt()
}

#[derive(Debug, Clone)]
pub struct BeamformingSolution {
    pub beamformers: BeamformerSet,
    pub lambda: f64,
    /// Number of `g` evaluations made by the bisection (zero if `g(0) <= P`).
    pub probes: usize,
    pub lambda_max: f64,
}

/// Solves the beamformer subproblem to global optimality.
pub fn solve_beamforming(
    hbar: &[CVector],
    decoders: &[C64],
    q: &[f64],
    alpha: &[f64],
    p_max: f64,
    opts: &BisectionOptions,
) -> Result<BeamformingSolution> {
    if !(p_max > 0.0 && p_max.is_finite()) {
        return Err(Error::InvalidInput(format!("p_max must be positive, got {p_max}")));
    }
    let ctx = assemble_context(hbar, decoders, q, alpha)?;
    let lambda_max = lambda_upper_bound(&ctx, p_max);
    let g_zero = power_g(0.0, &ctx);
    if g_zero <= p_max {
        return Ok(BeamformingSolution { beamformers: beamformers_at(0.0, &ctx)?, lambda: 0.0, probes: 0, lambda_max });
    }
    let g_max = power_g(lambda_max, &ctx);
    if !(g_max <= p_max) {
        return Err(Error::Bracketing { g_zero, g_max, p_max });
    }

    let power_tol = opts.power_tol_rel * p_max;
    let lambda_tol = opts.lambda_tol_rel * lambda_max;
    let (mut lo, mut hi) = (0.0, lambda_max);
    let mut probes = 0;
    let lambda = loop {
        let mid = 0.5 * (lo + hi);
        probes += 1;
        let g = power_g(mid, &ctx);
        if (g - p_max).abs() <= power_tol {
            break mid;
        }
        if g > p_max {
            lo = mid;
        } else {
            hi = mid;
        }
        // `hi` is always feasible
        if hi - lo <= lambda_tol || mid == lo && mid == hi {
            break hi;
        }
    };
    Ok(BeamformingSolution { beamformers: beamformers_at(lambda, &ctx)?, lambda, probes, lambda_max })
}
