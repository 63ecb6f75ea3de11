//! IRS phase update for fixed beamformers, decoders and weights.
//!
//! Substituting the effective channel into the MSEs turns
//! `sum_k a_k q_k E_k` into a Hermitian quadratic form in the stacked phase
//! vector `v`:
//!
//! ```text
//! f(v) = v^H (J + w I) v + v^H z + z^H v
//! ```
//!
//! where block `(i, j)` of `J` is `(sum_k a_k q_k A_ijk) .* E_ij^T` with
//! `A_ijk = h_ik u_k u_k^H h_jk^H` and `E_ij = G_j S G_i^H`, `S = sum_k w_k w_k^H`.
//! On the unit-modulus set `v^H w I v = w * ML`, so the shift `w` changes the
//! value but not the minimizer.
//!
//! The minimization runs on the product of complex circles: Euclidean
//! gradient, projection onto the tangent space, Polak-Ribiere conjugate
//! direction with projection as vector transport, Armijo backtracking, and
//! entrywise normalization as the retraction.

use std::f64::consts::PI;

use log::warn;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::channel::{ChannelSet, PhaseConfig, UNIT_MODULUS_TOL};
use crate::error::{Error, Result};
use crate::wmmse::BeamformerSet;
use crate::{CMatrix, CVector, C64};

/// Quadratic model of the weighted MSE in the phase vector.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    pub j_hat: CMatrix,
    pub z: CVector,
    pub omega: f64,
    /// `sum_k a_k q_k (c_k - 2 Re(e_k) + 1)`, the part that does not depend on `v`.
    pub const_term: f64,
    n_elements: usize,
}

fn check_lengths(channels: &ChannelSet, w: &BeamformerSet, decoders: &[C64], q: &[f64], alpha: &[f64]) -> Result<()> {
    let k = channels.n_users();
    if w.n_users() != k || decoders.len() != k || q.len() != k || alpha.len() != k {
        return Err(Error::DimensionMismatch("per-user inputs differ in length".into()));
    }
    if w.n_tx() != channels.n_tx() {
        return Err(Error::DimensionMismatch("beamformer length differs from antenna count".into()));
    }
    channels.validate()
}

impl QuadraticForm {
    /// Builds `J`, `z`, the constant and the shift `w = max_i sum_j |J_ij|`.
    pub fn assemble(
        channels: &ChannelSet,
        w: &BeamformerSet,
        decoders: &[C64],
        q: &[f64],
        alpha: &[f64],
        noise_power: f64,
    ) -> Result<Self> {
        check_lengths(channels, w, decoders, q, alpha)?;
        let (l_count, m, k_users) = (channels.n_irs(), channels.n_elements(), channels.n_users());
        let dim = l_count * m;
        let s = w.covariance();
        let aq: Vec<f64> = alpha.iter().zip(q).map(|(a, q)| a * q).collect();

        // Y_i has columns u_k h_ik, so sum_k a_k q_k A_ijk = Y_i diag(a q) Y_j^H.
        let y: Vec<CMatrix> = (0..l_count)
            .map(|i| CMatrix::from_fn(m, k_users, |r, c| channels.h_irs_user[i][c][r] * decoders[c]))
            .collect();
        let y_weighted: Vec<CMatrix> = y
            .iter()
            .map(|yi| CMatrix::from_fn(m, k_users, |r, c| yi[(r, c)] * aq[c]))
            .collect();
        // S G_i^H, reused by every E_ij
        let s_gh: Vec<CMatrix> = channels.g_bs_irs.iter().map(|g| &s * g.adjoint()).collect();

        let mut j_hat = CMatrix::zeros(dim, dim);
        for i in 0..l_count {
            for j in 0..l_count {
                let a_sum = &y_weighted[i] * y[j].adjoint();
                let e_bar = &channels.g_bs_irs[j] * &s_gh[i];
                let block = a_sum.component_mul(&e_bar.transpose());
                j_hat.view_mut((i * m, j * m), (m, m)).copy_from(&block);
            }
        }
        let j_hat = (&j_hat + j_hat.adjoint()) * C64::from(0.5);

        // diag(D_lk - B_lk) = h_lk .* conj(G_l (|u_k|^2 S h_k - conj(u_k) w_k))
        let mut z = CVector::zeros(dim);
        let mut const_term = 0.0;
        for k in 0..k_users {
            let u = decoders[k];
            let h_k = &channels.h_direct[k];
            let w_k = &w.vectors()[k];
            let s_h = &s * h_k;
            let y_k = &s_h * C64::from(u.norm_sqr()) - w_k * u.conj();
            for l in 0..l_count {
                let g_y = &channels.g_bs_irs[l] * &y_k;
                let diag = channels.h_irs_user[l][k].component_mul(&g_y.map(|c| c.conj()));
                let mut seg = z.rows_mut(l * m, m);
                seg += diag * C64::from(aq[k]);
            }
            let c_k = u.norm_sqr() * (h_k.dotc(&s_h).re + noise_power);
            let e_k = w_k.dotc(h_k) * u;
            const_term += aq[k] * (c_k - 2.0 * e_k.re + 1.0);
        }

        let omega = (0..dim).map(|r| j_hat.row(r).iter().map(|c| c.norm()).sum::<f64>()).fold(0.0, f64::max);

        Ok(QuadraticForm { j_hat, z, omega, const_term, n_elements: m })
    }

    /// Same form with a different shift.
    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    /// `Re(v^H (J + w I) v) + 2 Re(v^H z)` for an arbitrary ambient point.
    pub fn ambient_value(&self, v: &CVector) -> f64 {
        let jv = &self.j_hat * v;
        self.value_with(v, &jv)
    }

    fn value_with(&self, v: &CVector, jv: &CVector) -> f64 {
        v.dotc(jv).re + self.omega * v.norm_squared() + 2.0 * v.dotc(&self.z).re
    }

    /// Objective on the manifold; rejects points off the unit circle.
    pub fn objective(&self, v: &CVector) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("phase vector of length {}, form of size {}", v.len(), self.dim())));
        }
        if let Some(i) = v.iter().position(|c| (c.norm() - 1.0).abs() > UNIT_MODULUS_TOL) {
            return Err(Error::InvalidInput(format!("entry {i} is off the unit circle")));
        }
        Ok(self.ambient_value(v))
    }

    /// `sum_k a_k q_k E_k` at `v`, recovered from the form.
    pub fn weighted_mse(&self, v: &PhaseConfig) -> Result<f64> {
        Ok(self.objective(v.as_vector())? - self.omega * self.dim() as f64 + self.const_term)
    }

    /// `2 (J + w I) v + 2 z`; the steepest-descent direction is its negation.
    pub fn euclidean_gradient(&self, v: &CVector) -> CVector {
        let jv = &self.j_hat * v;
        self.gradient_with(v, &jv)
    }

    fn gradient_with(&self, v: &CVector, jv: &CVector) -> CVector {
        (jv + v * C64::from(self.omega) + &self.z) * C64::from(2.0)
    }

    /// `|J + w I|_inf`.
    pub fn shifted_inf_norm(&self) -> f64 {
        (0..self.dim())
            .map(|r| {
                self.j_hat
                    .row(r)
                    .iter()
                    .enumerate()
                    .map(|(c, x)| if c == r { (x + self.omega).norm() } else { x.norm() })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// Convenience wrapper for [`QuadraticForm::assemble`].
pub fn assemble_quadratic(
    channels: &ChannelSet,
    w: &BeamformerSet,
    decoders: &[C64],
    q: &[f64],
    alpha: &[f64],
    noise_power: f64,
) -> Result<QuadraticForm> {
    QuadraticForm::assemble(channels, w, decoders, q, alpha, noise_power)
}

/// Projection onto the tangent space at `v`: `x - Re(conj(x) .* v) .* v`.
pub fn project_tangent(v: &CVector, x: &CVector) -> CVector {
    x.zip_map(v, |xi, vi| xi - vi * (xi.conj() * vi).re)
}

/// Real inner product `Re(a^H b)`.
pub fn inner(a: &CVector, b: &CVector) -> f64 {
    a.dotc(b).re
}

/// Entrywise normalization onto the unit circle.
pub fn retract(v_plus: &CVector, n_elements: usize) -> Result<PhaseConfig> {
    if let Some(index) = v_plus.iter().position(|c| c.norm() == 0.0) {
        return Err(Error::DegenerateRetraction { index });
    }
    PhaseConfig::new(v_plus.map(|c| c / c.norm()), n_elements)
}

/// Like [`retract`], but zero entries get a random phase.
fn retract_or_reseed(v_plus: &CVector, n_elements: usize, rng: &mut ChaCha20Rng) -> PhaseConfig {
    let v = v_plus.map(|c| {
        let r = c.norm();
        if r == 0.0 || !r.is_finite() {
            C64::from_polar(1.0, 2.0 * PI * rng.random::<f64>())
        } else {
            c / r
        }
    });
    PhaseConfig::new(v, n_elements).expect("normalized entries are unit modulus")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmcgOptions {
    /// Riemannian gradient norm threshold; `None` means `1e-6 * sqrt(ML)`.
    pub tol_grad: Option<f64>,
    /// Cap on iterations (gradient evaluations).
    pub max_iters: usize,
    pub armijo_c: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
    /// First trial step of every line search; `None` means `1 / (2 |J + w I|_inf)`.
    pub initial_step: Option<f64>,
    /// Seeds the phase draw for the measure-zero case of a zero entry at retraction.
    pub seed: u64,
}

impl Default for RmcgOptions {
    fn default() -> Self {
        RmcgOptions {
            tol_grad: None,
            max_iters: 100,
            armijo_c: 1e-4,
            shrink: 0.5,
            max_backtracks: 60,
            initial_step: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RmcgTrace {
    /// Objective at the start point and after every accepted step.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    /// The last line search found no sufficient decrease; the incumbent was returned.
    pub line_search_failed: bool,
}

/// Riemannian conjugate gradient on the product of complex circles.
pub fn rmcg_solve(form: &QuadraticForm, v_init: &PhaseConfig, opts: &RmcgOptions) -> Result<(PhaseConfig, RmcgTrace)> {
    let dim = form.dim();
    if v_init.len() != dim {
        return Err(Error::DimensionMismatch(format!("start point of length {}, form of size {dim}", v_init.len())));
    }
    let n_elements = v_init.n_elements();
    let mut trace = RmcgTrace::default();
    if dim == 0 {
        trace.converged = true;
        return Ok((v_init.clone(), trace));
    }
    let tol = opts.tol_grad.unwrap_or(1e-6 * (dim as f64).sqrt());
    let t0 = opts.initial_step.unwrap_or_else(|| {
        let nrm = form.shifted_inf_norm();
        if nrm > 0.0 { 0.5 / nrm } else { 1.0 }
    });
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);

    let mut x = v_init.clone();
    let jx = &form.j_hat * x.as_vector();
    let mut fx = form.value_with(x.as_vector(), &jx);
    let mut rgrad = project_tangent(x.as_vector(), &form.gradient_with(x.as_vector(), &jx));
    let mut dir = -&rgrad;
    trace.objective.push(fx);

    for iter in 1..=opts.max_iters {
        trace.iterations = iter;
        let gnorm = rgrad.norm();
        trace.grad_norm = gnorm;
        if gnorm < tol {
            trace.converged = true;
            break;
        }
        let mut slope = inner(&rgrad, &dir);
        if slope >= 0.0 {
            dir = -&rgrad;
            slope = -gnorm * gnorm;
        }

        let mut step = t0;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let cand = retract_or_reseed(&(x.as_vector() + &dir * C64::from(step)), n_elements, &mut rng);
            let jc = &form.j_hat * cand.as_vector();
            let fc = form.value_with(cand.as_vector(), &jc);
            if fc <= fx + opts.armijo_c * step * slope {
                accepted = Some((cand, jc, fc));
                break;
            }
            step *= opts.shrink;
        }
        let Some((cand, jc, fc)) = accepted else {
            trace.line_search_failed = true;
            warn!("phase line search stalled at iteration {iter}, |grad| = {gnorm:e}");
            break;
        };

        let new_rgrad = project_tangent(cand.as_vector(), &form.gradient_with(cand.as_vector(), &jc));
        let moved_grad = project_tangent(cand.as_vector(), &rgrad);
        let moved_dir = project_tangent(cand.as_vector(), &dir);
        let beta = (inner(&new_rgrad, &(&new_rgrad - &moved_grad)) / (gnorm * gnorm)).max(0.0);
        dir = &moved_dir * C64::from(beta) - &new_rgrad;

        x = cand;
        fx = fc;
        rgrad = new_rgrad;
        trace.objective.push(fx);
    }
    trace.grad_norm = rgrad.norm();
    Ok((x, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_normal;
    use rand::SeedableRng;

    fn random_vec(n: usize, rng: &mut ChaCha20Rng) -> CVector {
        CVector::from_fn(n, |_, _| complex_normal(rng))
    }

    fn random_form(n: usize, seed: u64) -> QuadraticForm {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(n, n, |_, _| complex_normal(&mut rng));
        let j = &a * a.adjoint();
        let omega = (0..n).map(|r| j.row(r).iter().map(|c| c.norm()).sum::<f64>()).fold(0.0, f64::max);
        QuadraticForm { j_hat: j, z: random_vec(n, &mut rng), omega, const_term: 0.0, n_elements: n }
    }

    fn unit(n: usize, rng: &mut ChaCha20Rng) -> PhaseConfig {
        PhaseConfig::random(1, n, rng)
    }

    #[test]
    fn projection_basics() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let v = unit(6, &mut rng);
        let v = v.as_vector();
        assert!(project_tangent(v, v).norm() < 1e-15);
        let jv = v * C64::new(0.0, 1.0);
        assert!((project_tangent(v, &jv) - &jv).norm() < 1e-15);
        let x = random_vec(6, &mut rng);
        let p = project_tangent(v, &x);
        assert!((project_tangent(v, &p) - &p).norm() < 1e-12);
        for (pi, vi) in p.iter().zip(v.iter()) {
            assert!((pi.conj() * vi).re.abs() < 1e-12);
        }
    }

    #[test]
    fn retraction_basics() {
        let v = CVector::from_vec(vec![C64::new(2.0, 0.0), C64::from_polar(1.0, 0.4)]);
        let r = retract(&v, 2).unwrap();
        assert!((r.as_vector()[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((r.as_vector()[1] - v[1]).norm() < 1e-15);
        let bad = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        assert!(matches!(retract(&bad, 2), Err(Error::DegenerateRetraction { index: 1 })));
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let fixed = retract_or_reseed(&bad, 2, &mut rng);
        assert!((fixed.as_vector()[1].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn objective_rejects_off_manifold_points() {
        let f = random_form(3, 1);
        let v = CVector::from_element(3, C64::new(0.9, 0.0));
        assert!(matches!(f.objective(&v), Err(Error::InvalidInput(_))));
        assert!(f.objective(&CVector::from_element(2, C64::new(1.0, 0.0))).is_err());
    }

    #[test]
    fn omega_shift_is_constant_on_manifold() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let f0 = random_form(5, 3).with_omega(0.0);
        let f5 = f0.clone().with_omega(5.0);
        for _ in 0..20 {
            let v = unit(5, &mut rng);
            let d = f5.objective(v.as_vector()).unwrap() - f0.objective(v.as_vector()).unwrap();
            assert!((d - 25.0).abs() < 1e-10);
        }
    }

    #[test]
    fn hermitian_form_is_real() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let f = random_form(7, 5);
        let v = unit(7, &mut rng);
        assert!(v.as_vector().dotc(&(&f.j_hat * v.as_vector())).im.abs() < 1e-10);
    }

    #[test]
    fn linear_form_gradient() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let z = random_vec(4, &mut rng);
        let f = QuadraticForm { j_hat: CMatrix::zeros(4, 4), z: z.clone(), omega: 0.0, const_term: 0.0, n_elements: 4 };
        let v = unit(4, &mut rng);
        assert!((f.euclidean_gradient(v.as_vector()) - &z * C64::from(2.0)).norm() < 1e-15);
        // minimizer of 2 Re(v^H z) is -z/|z|
        let (sol, _) = rmcg_solve(&f, &v, &RmcgOptions::default()).unwrap();
        for (s, zi) in sol.as_vector().iter().zip(z.iter()) {
            assert!((s + zi / zi.norm()).norm() < 1e-5);
        }
    }

    #[test]
    fn stationary_start_returns_immediately() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut f = random_form(4, 8);
        let v = unit(4, &mut rng);
        // choose z so that (J + w I) v + z = 0
        f.z = -(&f.j_hat * v.as_vector() + v.as_vector() * C64::from(f.omega));
        assert!(f.euclidean_gradient(v.as_vector()).norm() < 1e-12);
        let (sol, trace) = rmcg_solve(&f, &v, &RmcgOptions::default()).unwrap();
        assert_eq!(sol, v);
        assert_eq!(trace.iterations, 1);
        assert!(trace.converged);
    }

    #[test]
    fn descent_is_monotone_and_tangent() {
        for seed in 0..10 {
            let f = random_form(12, 100 + seed);
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let v = unit(12, &mut rng);
            let (sol, trace) = rmcg_solve(&f, &v, &RmcgOptions { max_iters: 200, ..Default::default() }).unwrap();
            for w in trace.objective.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
            assert!(f.objective(sol.as_vector()).unwrap() <= f.objective(v.as_vector()).unwrap());
            let g = project_tangent(sol.as_vector(), &f.euclidean_gradient(sol.as_vector()));
            for (gi, vi) in g.iter().zip(sol.as_vector().iter()) {
                assert!((gi.conj() * vi).re.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn empty_problem_is_trivial() {
        let f = QuadraticForm { j_hat: CMatrix::zeros(0, 0), z: CVector::zeros(0), omega: 0.0, const_term: 1.5, n_elements: 0 };
        let (sol, trace) = rmcg_solve(&f, &PhaseConfig::ones(0, 0), &RmcgOptions::default()).unwrap();
        assert!(sol.is_empty());
        assert!(trace.converged);
    }
}
