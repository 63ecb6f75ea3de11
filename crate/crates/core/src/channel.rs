//! Small-scale fading draws and the combined direct-plus-reflected channel.

use std::f64::consts::PI;

use nalgebra::DVectorView;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scenario::{distance, path_loss, LosModel, Position, ScenarioParams};
use crate::{CMatrix, CVector, C64};

/// Stream id used by [`draw_channels_seeded`].
pub(crate) const STREAM_CHANNELS: u64 = 0xc4a;

/// Tolerance on `|v_i| = 1`.
pub const UNIT_MODULUS_TOL: f64 = 1e-12;

/// One channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS to user `k`, length `n_tx`.
    pub h_direct: Vec<CVector>,
    /// BS to IRS `l`, `M x n_tx`.
    pub g_bs_irs: Vec<CMatrix>,
    /// IRS `l` to user `k`, length `M`, indexed `[l][k]`.
    pub h_irs_user: Vec<Vec<CVector>>,
}

impl ChannelSet {
    pub fn n_tx(&self) -> usize {
        self.h_direct.first().map_or(0, |h| h.len())
    }

    pub fn n_users(&self) -> usize {
        self.h_direct.len()
    }

    pub fn n_irs(&self) -> usize {
        self.g_bs_irs.len()
    }

    pub fn n_elements(&self) -> usize {
        self.g_bs_irs.first().map_or(0, |g| g.nrows())
    }

    /// Same realization with every reflected path removed.
    pub fn without_reflection(&self) -> ChannelSet {
        ChannelSet { h_direct: self.h_direct.clone(), g_bs_irs: Vec::new(), h_irs_user: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        let (n, k, l, m) = (self.n_tx(), self.n_users(), self.n_irs(), self.n_elements());
        if k == 0 || n == 0 {
            return Err(Error::DimensionMismatch("channel set has no users or antennas".into()));
        }
        if self.h_direct.iter().any(|h| h.len() != n) {
            return Err(Error::DimensionMismatch("direct channels differ in length".into()));
        }
        if self.g_bs_irs.iter().any(|g| g.shape() != (m, n)) {
            return Err(Error::DimensionMismatch(format!("BS-IRS channels must be {m}x{n}")));
        }
        if self.h_irs_user.len() != l || self.h_irs_user.iter().any(|hl| hl.len() != k || hl.iter().any(|h| h.len() != m)) {
            return Err(Error::DimensionMismatch("IRS-user channels inconsistent".into()));
        }
        let finite = self.h_direct.iter().flat_map(|h| h.iter())
            .chain(self.g_bs_irs.iter().flat_map(|g| g.iter()))
            .chain(self.h_irs_user.iter().flatten().flat_map(|h| h.iter()))
            .all(|c| c.re.is_finite() && c.im.is_finite());
        if !finite {
            return Err(Error::InvalidInput("non-finite channel entry".into()));
        }
        Ok(())
    }
}

/// Stacked IRS phase vector `[v_1; ...; v_L]`, every entry on the unit circle.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    v_hat: CVector,
    n_elements: usize,
}

impl PhaseConfig {
    pub fn new(v_hat: CVector, n_elements: usize) -> Result<Self> {
        if n_elements == 0 && !v_hat.is_empty() {
            return Err(Error::InvalidInput("zero elements per IRS".into()));
        }
        if n_elements > 0 && !v_hat.len().is_multiple_of(n_elements) {
            return Err(Error::DimensionMismatch(format!(
                "phase vector of length {} is not a multiple of {n_elements}",
                v_hat.len()
            )));
        }
        if let Some(i) = v_hat.iter().position(|c| (c.norm() - 1.0).abs() > UNIT_MODULUS_TOL) {
            return Err(Error::InvalidInput(format!("phase entry {i} has modulus {}", v_hat[i].norm())));
        }
        Ok(PhaseConfig { v_hat, n_elements })
    }

    pub fn ones(n_irs: usize, n_elements: usize) -> Self {
        PhaseConfig { v_hat: CVector::from_element(n_irs * n_elements, C64::new(1.0, 0.0)), n_elements }
    }

    pub fn from_angles(angles: &[f64], n_elements: usize) -> Result<Self> {
        let v = CVector::from_iterator(angles.len(), angles.iter().map(|&t| C64::from_polar(1.0, t)));
        Self::new(v, n_elements)
    }

    /// Independent uniform phases.
    pub fn random<R: Rng + ?Sized>(n_irs: usize, n_elements: usize, rng: &mut R) -> Self {
        let v = CVector::from_fn(n_irs * n_elements, |_, _| C64::from_polar(1.0, 2.0 * PI * rng.random::<f64>()));
        PhaseConfig { v_hat: v, n_elements }
    }

    pub fn for_channels(channels: &ChannelSet) -> Self {
        Self::ones(channels.n_irs(), channels.n_elements())
    }

    pub fn as_vector(&self) -> &CVector {
        &self.v_hat
    }

    pub fn into_vector(self) -> CVector {
        self.v_hat
    }

    pub fn len(&self) -> usize {
        self.v_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_hat.is_empty()
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn n_irs(&self) -> usize {
        self.v_hat.len().checked_div(self.n_elements).unwrap_or(0)
    }

    /// Diagonal of `Phi_l`.
    pub fn block(&self, l: usize) -> DVectorView<'_, C64> {
        self.v_hat.rows(l * self.n_elements, self.n_elements)
    }

    pub fn angles(&self) -> Vec<f64> {
        self.v_hat.iter().map(|c| c.arg()).collect()
    }
}

/// Circularly-symmetric complex Gaussian with unit variance.
pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Half-wavelength ULA response `exp(j*pi*n*sin(phi))`.
pub fn ula_steering(n: usize, azimuth: f64) -> CVector {
    let s = azimuth.sin();
    CVector::from_fn(n, |i, _| C64::from_polar(1.0, PI * i as f64 * s))
}

fn azimuth(from: &Position, to: &Position) -> f64 {
    (to[1] - from[1]).atan2(to[0] - from[0])
}

/// Rician mixing weights `(sqrt(k/(1+k)), sqrt(1/(1+k)))`, exact in the limits.
fn rician_weights(kappa: f64) -> (f64, f64) {
    if kappa.is_infinite() {
        (1.0, 0.0)
    } else {
        ((kappa / (1.0 + kappa)).sqrt(), (1.0 / (1.0 + kappa)).sqrt())
    }
}

/// Draws one realization. The generator is only used to key one independent
/// stream per link type, so e.g. the direct channels do not depend on the IRS
/// size.
pub fn draw_channels<R: Rng + ?Sized>(params: &ScenarioParams, rng: &mut R) -> Result<ChannelSet> {
    params.validate()?;
    let mut rng_bu = ChaCha20Rng::seed_from_u64(rng.random());
    let mut rng_br = ChaCha20Rng::seed_from_u64(rng.random());
    let mut rng_ru = ChaCha20Rng::seed_from_u64(rng.random());

    let (n, m) = (params.n_tx, params.n_elements);
    let (w_los, w_nlos) = rician_weights(params.rician_k());

    let h_direct = params
        .user_pos
        .iter()
        .map(|u| {
            let amp = path_loss(distance(&params.bs_pos, u), params.beta_bu, params.ref_gain_db)?.sqrt();
            Ok(CVector::from_fn(n, |_, _| complex_normal(&mut rng_bu) * amp))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut g_bs_irs = Vec::with_capacity(params.n_irs);
    for irs in &params.irs_pos {
        let amp = path_loss(distance(&params.bs_pos, irs), params.beta_br, params.ref_gain_db)?.sqrt();
        let los = match params.los_model {
            LosModel::Ula => {
                let a_rx = ula_steering(m, azimuth(irs, &params.bs_pos));
                let a_tx = ula_steering(n, azimuth(&params.bs_pos, irs));
                &a_rx * a_tx.adjoint()
            }
            LosModel::AllOnes => CMatrix::from_element(m, n, C64::new(1.0, 0.0)),
        };
        let nlos = CMatrix::from_fn(m, n, |_, _| complex_normal(&mut rng_br));
        g_bs_irs.push((los * C64::from(w_los) + nlos * C64::from(w_nlos)) * C64::from(amp));
    }

    let mut h_irs_user = Vec::with_capacity(params.n_irs);
    for irs in &params.irs_pos {
        let per_user = params
            .user_pos
            .iter()
            .map(|u| {
                let amp = path_loss(distance(irs, u), params.beta_ru, params.ref_gain_db)?.sqrt();
                let los = match params.los_model {
                    LosModel::Ula => ula_steering(m, azimuth(irs, u)),
                    LosModel::AllOnes => CVector::from_element(m, C64::new(1.0, 0.0)),
                };
                let nlos = CVector::from_fn(m, |_, _| complex_normal(&mut rng_ru));
                Ok((los * C64::from(w_los) + nlos * C64::from(w_nlos)) * C64::from(amp))
            })
            .collect::<Result<Vec<_>>>()?;
        h_irs_user.push(per_user);
    }

    Ok(ChannelSet { h_direct, g_bs_irs, h_irs_user })
}

/// Draws with the scenario's own seed.
pub fn draw_channels_seeded(params: &ScenarioParams) -> Result<ChannelSet> {
    let mut rng = ChaCha20Rng::seed_from_u64(params.rng_seed);
    rng.set_stream(STREAM_CHANNELS);
    draw_channels(params, &mut rng)
}

/// `h_bar_k = h_k + sum_l G_l^H diag(conj(v_l)) h_{l,k}`, i.e. the column form
/// of `h_bar_k^H = h_k^H + sum_l h_{l,k}^H Phi_l G_l`.
pub fn effective_channels(channels: &ChannelSet, phases: &PhaseConfig) -> Result<Vec<CVector>> {
    let (l_count, m) = (channels.n_irs(), channels.n_elements());
    if phases.len() != l_count * m || (l_count > 0 && phases.n_elements() != m) {
        return Err(Error::DimensionMismatch(format!(
            "{} phases for {l_count} IRSs of {m} elements",
            phases.len()
        )));
    }
    let n = channels.n_tx();
    channels
        .h_direct
        .iter()
        .enumerate()
        .map(|(k, h)| {
            if h.len() != n {
                return Err(Error::DimensionMismatch("direct channel length".into()));
            }
            let mut hbar = h.clone();
            for l in 0..l_count {
                let g = &channels.g_bs_irs[l];
                let h_lk = &channels.h_irs_user[l][k];
                if g.shape() != (m, n) || h_lk.len() != m {
                    return Err(Error::DimensionMismatch(format!("IRS {l} channel shapes")));
                }
                let scaled = phases.block(l).map(|c| c.conj()).component_mul(h_lk);
                hbar += g.ad_mul(&scaled);
            }
            Ok(hbar)
        })
        .collect()
}
