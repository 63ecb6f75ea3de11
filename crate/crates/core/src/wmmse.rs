//! Rates, MSEs and the closed-form decoder/weight updates of the weighted
//! MMSE reformulation. Rates are in nats.

use rand::Rng;

use crate::channel::complex_normal;
use crate::error::{Error, Result};
use crate::{CMatrix, CVector, C64};

/// Per-user transmit beamformers `w_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    w: Vec<CVector>,
}

impl BeamformerSet {
    pub fn new(w: Vec<CVector>) -> Result<Self> {
        if let Some(first) = w.first() {
            if w.iter().any(|x| x.len() != first.len()) {
                return Err(Error::DimensionMismatch("beamformers differ in length".into()));
            }
        }
        Ok(BeamformerSet { w })
    }

    pub fn zeros(n_users: usize, n_tx: usize) -> Self {
        BeamformerSet { w: vec![CVector::zeros(n_tx); n_users] }
    }

    /// Random Gaussian directions scaled to `power` in total.
    pub fn random<R: Rng + ?Sized>(n_users: usize, n_tx: usize, power: f64, rng: &mut R) -> Self {
        let w: Vec<CVector> = (0..n_users).map(|_| CVector::from_fn(n_tx, |_, _| complex_normal(rng))).collect();
        let mut set = BeamformerSet { w };
        set.scale_to_power(power);
        set
    }

    /// Matched filter `w_k ~ h_bar_k / |h_bar_k|` with the budget split evenly
    /// over users whose channel is non-zero.
    pub fn matched_filter(hbar: &[CVector], p_max: f64) -> Self {
        let active = hbar.iter().filter(|h| h.norm() > 0.0).count();
        let w = hbar
            .iter()
            .map(|h| {
                let nrm = h.norm();
                if nrm > 0.0 {
                    h * C64::from((p_max / active as f64).sqrt() / nrm)
                } else {
                    CVector::zeros(h.len())
                }
            })
            .collect();
        BeamformerSet { w }
    }

    pub fn scale_to_power(&mut self, power: f64) {
        let p = self.total_power();
        if p > 0.0 {
            let s = C64::from((power / p).sqrt());
            for w in &mut self.w {
                *w *= s;
            }
        }
    }

    /// `sum_k |w_k|^2`.
    pub fn total_power(&self) -> f64 {
        self.w.iter().map(|w| w.norm_squared()).sum()
    }

    pub fn vectors(&self) -> &[CVector] {
        &self.w
    }

    pub fn n_users(&self) -> usize {
        self.w.len()
    }

    pub fn n_tx(&self) -> usize {
        self.w.first().map_or(0, |w| w.len())
    }

    /// Transmit covariance `sum_k w_k w_k^H`.
    pub fn covariance(&self) -> CMatrix {
        let n = self.n_tx();
        let mut s = CMatrix::zeros(n, n);
        for w in &self.w {
            s += w * w.adjoint();
        }
        s
    }
}

/// Decoders, MSE weights and MSEs for all users.
#[derive(Debug, Clone, PartialEq)]
pub struct WmmseState {
    pub decoders: Vec<C64>,
    pub weights: Vec<f64>,
    pub mse: Vec<f64>,
}

impl WmmseState {
    /// MMSE decoders, then the matching MSEs and weights `q_k = 1/E_k`.
    pub fn optimal(hbar: &[CVector], w: &BeamformerSet, noise_power: f64) -> Result<Self> {
        let decoders = update_decoders(hbar, w, noise_power)?;
        let mse = compute_mse(hbar, w, &decoders, noise_power)?;
        let weights = update_weights(&mse)?;
        Ok(WmmseState { decoders, weights, mse })
    }
}

/// Matrix of received amplitudes `a[k, j] = h_bar_k^H w_j`.
pub fn cross_gains(hbar: &[CVector], w: &BeamformerSet) -> Result<CMatrix> {
    if hbar.len() != w.n_users() {
        return Err(Error::DimensionMismatch(format!("{} channels, {} beamformers", hbar.len(), w.n_users())));
    }
    if hbar.iter().any(|h| h.len() != w.n_tx()) {
        return Err(Error::DimensionMismatch("channel and beamformer lengths differ".into()));
    }
    let k = hbar.len();
    Ok(CMatrix::from_fn(k, k, |i, j| hbar[i].dotc(&w.vectors()[j])))
}

fn check_noise(noise_power: f64) -> Result<()> {
    if noise_power > 0.0 && noise_power.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("noise power must be positive, got {noise_power}")))
    }
}

/// Achievable rate of every user treating interference as noise.
pub fn compute_rates(hbar: &[CVector], w: &BeamformerSet, noise_power: f64) -> Result<Vec<f64>> {
    check_noise(noise_power)?;
    let a = cross_gains(hbar, w)?;
    Ok((0..hbar.len())
        .map(|k| {
            let interference: f64 = (0..hbar.len()).filter(|&j| j != k).map(|j| a[(k, j)].norm_sqr()).sum();
            (a[(k, k)].norm_sqr() / (interference + noise_power)).ln_1p()
        })
        .collect())
}

pub fn weighted_sum_rate(weights: &[f64], rates: &[f64]) -> Result<f64> {
    if weights.len() != rates.len() {
        return Err(Error::DimensionMismatch(format!("{} weights, {} rates", weights.len(), rates.len())));
    }
    Ok(weights.iter().zip(rates).map(|(a, r)| a * r).sum())
}

/// MSE of the estimate `u_k^* y_k`:
/// `E_k = |u_k|^2 (sum_j |h_bar_k^H w_j|^2 + s2) - 2 Re(u_k^* h_bar_k^H w_k) + 1`,
/// evaluated as `|u_k|^2 (I_k + s2) + |1 - u_k^* a_kk|^2` so it stays positive.
pub fn compute_mse(hbar: &[CVector], w: &BeamformerSet, decoders: &[C64], noise_power: f64) -> Result<Vec<f64>> {
    check_noise(noise_power)?;
    if decoders.len() != hbar.len() {
        return Err(Error::DimensionMismatch(format!("{} decoders for {} users", decoders.len(), hbar.len())));
    }
    let a = cross_gains(hbar, w)?;
    Ok(decoders
        .iter()
        .enumerate()
        .map(|(k, u)| {
            let interference: f64 = (0..hbar.len()).filter(|&j| j != k).map(|j| a[(k, j)].norm_sqr()).sum();
            u.norm_sqr() * (interference + noise_power) + (C64::new(1.0, 0.0) - u.conj() * a[(k, k)]).norm_sqr()
        })
        .collect())
}

/// MMSE receivers `u_k = h_bar_k^H w_k / (sum_j |h_bar_k^H w_j|^2 + s2)`.
pub fn update_decoders(hbar: &[CVector], w: &BeamformerSet, noise_power: f64) -> Result<Vec<C64>> {
    check_noise(noise_power)?;
    let a = cross_gains(hbar, w)?;
    Ok((0..hbar.len())
        .map(|k| {
            let total: f64 = (0..hbar.len()).map(|j| a[(k, j)].norm_sqr()).sum::<f64>() + noise_power;
            a[(k, k)] / total
        })
        .collect())
}

/// `q_k = 1/E_k`.
pub fn update_weights(mse: &[f64]) -> Result<Vec<f64>> {
    mse.iter()
        .enumerate()
        .map(|(k, &e)| {
            if e > 0.0 && e.is_finite() {
                Ok(1.0 / e)
            } else {
                Err(Error::NumericalDomain(format!("MSE of user {k} is {e}")))
            }
        })
        .collect()
}

/// `sum_k a_k (ln q_k - q_k E_k + 1)`.
pub fn wmse_objective(alpha: &[f64], q: &[f64], mse: &[f64]) -> f64 {
    alpha.iter().zip(q).zip(mse).map(|((a, q), e)| a * (q.ln() - q * e + 1.0)).sum()
}

/// `sum_k a_k q_k E_k`, the quantity minimized by the beamformer and phase steps.
pub fn weighted_mse(alpha: &[f64], q: &[f64], mse: &[f64]) -> f64 {
    alpha.iter().zip(q).zip(mse).map(|((a, q), e)| a * q * e).sum()
}
