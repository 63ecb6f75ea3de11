//! Reference implementations written directly from the model definitions,
//! shared by the integration tests. Nothing here calls into the solver.

#![allow(dead_code)]

use mirs_core::{CMatrix, CVector, ChannelSet, C64};
use nalgebra::RowDVector;

pub type Row = RowDVector<C64>;
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;

pub fn cn<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn cvec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| cn(rng))
}

pub fn cmat<R: Rng + ?Sized>(rng: &mut R, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| cn(rng))
}

pub fn channels<R: Rng + ?Sized>(rng: &mut R, n_tx: usize, k: usize, l: usize, m: usize) -> ChannelSet {
    ChannelSet {
        h_direct: (0..k).map(|_| cvec(rng, n_tx)).collect(),
        g_bs_irs: (0..l).map(|_| cmat(rng, m, n_tx)).collect(),
        h_irs_user: (0..l).map(|_| (0..k).map(|_| cvec(rng, m)).collect()).collect(),
    }
}

pub fn unit_phases<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
}

/// Row vector `h_k^H + sum_l h_lk^H diag(v_l) G_l`, built with explicit
/// diagonal reflection matrices.
pub fn effective_row(ch: &ChannelSet, v: &CVector, k: usize) -> Row {
    let m = ch.g_bs_irs.first().map_or(0, |g| g.nrows());
    let mut row = ch.h_direct[k].adjoint();
    for l in 0..ch.g_bs_irs.len() {
        let phi = CMatrix::from_diagonal(&v.rows(l * m, m).into_owned());
        row += ch.h_irs_user[l][k].adjoint() * phi * &ch.g_bs_irs[l];
    }
    row
}

/// Received amplitude of stream `j` at user `k`.
pub fn gain(row: &Row, w: &CVector) -> C64 {
    (row * w)[(0, 0)]
}

/// `ln(1 + SINR_k)` per user.
pub fn rates(rows: &[Row], w: &[CVector], noise: f64) -> Vec<f64> {
    rows.iter()
        .enumerate()
        .map(|(k, row)| {
            let mut signal = 0.0;
            let mut interference = noise;
            for (j, wj) in w.iter().enumerate() {
                let p = gain(row, wj).norm_sqr();
                if j == k {
                    signal += p;
                } else {
                    interference += p;
                }
            }
            (1.0 + signal / interference).ln()
        })
        .collect()
}

/// `E|s_k - conj(u_k) y_k|^2` for unit-power independent symbols.
pub fn mse(rows: &[Row], w: &[CVector], u: &[C64], noise: f64) -> Vec<f64> {
    rows.iter()
        .enumerate()
        .map(|(k, row)| {
            let mut e = (C64::new(1.0, 0.0) - u[k].conj() * gain(row, &w[k])).norm_sqr();
            for (j, wj) in w.iter().enumerate() {
                if j != k {
                    e += (u[k].conj() * gain(row, wj)).norm_sqr();
                }
            }
            e + u[k].norm_sqr() * noise
        })
        .collect()
}

/// `sum_k a_k q_k E_k` at phases `v`.
pub fn weighted_mse(ch: &ChannelSet, v: &CVector, w: &[CVector], u: &[C64], q: &[f64], alpha: &[f64], noise: f64) -> f64 {
    let rows: Vec<Row> = (0..ch.h_direct.len()).map(|k| effective_row(ch, v, k)).collect();
    mse(&rows, w, u, noise).iter().enumerate().map(|(k, e)| alpha[k] * q[k] * e).sum()
}

/// Rows for plain (column) effective channels.
pub fn rows_of(hbar: &[CVector]) -> Vec<Row> {
    hbar.iter().map(|h| h.adjoint()).collect()
}

/// Dense complex solve by Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &CMatrix, b: &CVector) -> CVector {
    let n = a.nrows();
    let mut m = a.clone();
    let mut x = b.clone();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[(i, c)].norm().total_cmp(&m[(j, c)].norm())).unwrap();
        m.swap_rows(c, p);
        x.swap_rows(c, p);
        for r in c + 1..n {
            let f = m[(r, c)] / m[(c, c)];
            for cc in c..n {
                let t = m[(c, cc)];
                m[(r, cc)] -= f * t;
            }
            let t = x[c];
            x[r] -= f * t;
        }
    }
    for c in (0..n).rev() {
        let mut s = x[c];
        for cc in c + 1..n {
            s -= m[(c, cc)] * x[cc];
        }
        x[c] = s / m[(c, c)];
    }
    x
}
