//! Property tests of the model invariants.

mod common;

use mirs_core::beamformer::{assemble_context, lambda_upper_bound, power_g};
use mirs_core::phase_opt::{project_tangent, retract};
use mirs_core::wmmse::{compute_mse, update_decoders, update_weights, wmse_objective};
use mirs_core::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trips(seed in any::<u64>(), n_tx in 1usize..9, k in 1usize..9, l in 0usize..5, m in 1usize..65,
                          p in 1e-3f64..10.0, kdb in -5f64..20.0) {
        let mut params = ScenarioParams::ring_layout(n_tx, k, l, m, seed);
        params.p_max = p;
        params.rician_k_db = kdb;
        let back = ScenarioParams::from_config_str(&params.to_config_string()).unwrap();
        prop_assert_eq!(back, params);
    }

    #[test]
    fn path_loss_is_decreasing(d in 1f64..1e4, step in 1e-3f64..100.0, beta in 0.5f64..5.0, l0 in -60f64..0.0) {
        prop_assert!(path_loss(d + step, beta, l0).unwrap() < path_loss(d, beta, l0).unwrap());
    }

    #[test]
    fn projection_is_idempotent_and_tangent(seed in any::<u64>(), n in 1usize..40) {
        let mut r = rng(seed);
        let v = common::unit_phases(&mut r, n);
        let x = common::cvec(&mut r, n);
        let p = project_tangent(&v, &x);
        prop_assert!((project_tangent(&v, &p) - &p).norm() <= 1e-12 * (1.0 + x.norm()));
        for (pi, vi) in p.iter().zip(v.iter()) {
            prop_assert!((pi.conj() * vi).re.abs() <= 1e-12 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn retraction_lands_on_the_manifold(seed in any::<u64>(), n in 1usize..40, t in 1e-6f64..10.0) {
        let mut r = rng(seed);
        let v = common::unit_phases(&mut r, n);
        let d = project_tangent(&v, &common::cvec(&mut r, n));
        let out = retract(&(&v + &d * C64::from(t)), n).unwrap();
        prop_assert!(out.as_vector().iter().all(|c| (c.norm() - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn wmse_equals_wsr_at_optimal_receivers(seed in any::<u64>(), n in 1usize..9, k in 1usize..9, noise in 1e-3f64..10.0) {
        let mut r = rng(seed);
        let hbar: Vec<CVector> = (0..k).map(|_| common::cvec(&mut r, n)).collect();
        let w: Vec<CVector> = (0..k).map(|_| common::cvec(&mut r, n)).collect();
        let set = BeamformerSet::new(w.clone()).unwrap();
        let u = update_decoders(&hbar, &set, noise).unwrap();
        let e = compute_mse(&hbar, &set, &u, noise).unwrap();
        let q = update_weights(&e).unwrap();
        let wsr: f64 = common::rates(&common::rows_of(&hbar), &w, noise).iter().sum();
        prop_assert!((wmse_objective(&vec![1.0; k], &q, &e) - wsr).abs() < 1e-9);
    }

    #[test]
    fn effective_channel_matches_reflection_matrices(seed in any::<u64>(), n in 1usize..5, k in 1usize..4, l in 0usize..4, m in 1usize..7) {
        let mut r = rng(seed);
        let ch = common::channels(&mut r, n, k, l, m);
        let v = common::unit_phases(&mut r, l * m);
        let hbar = effective_channels(&ch, &PhaseConfig::new(v.clone(), m).unwrap()).unwrap();
        for i in 0..k {
            let row = common::effective_row(&ch, &v, i);
            prop_assert!((hbar[i].adjoint() - &row).norm() <= 1e-12 * (1.0 + row.norm()));
        }
    }

    #[test]
    fn beamformer_is_feasible_and_g_decreasing(seed in any::<u64>(), n in 1usize..7, k in 1usize..7, p in 1e-3f64..10.0) {
        let mut r = rng(seed);
        let hbar: Vec<CVector> = (0..k).map(|_| common::cvec(&mut r, n)).collect();
        let u: Vec<C64> = (0..k).map(|_| common::cn(&mut r)).collect();
        let q = vec![1.0; k];
        let alpha = vec![1.0; k];
        let sol = solve_beamforming(&hbar, &u, &q, &alpha, p, &BisectionOptions::default()).unwrap();
        prop_assert!(sol.beamformers.total_power() <= p * (1.0 + 1e-8));
        let ctx = assemble_context(&hbar, &u, &q, &alpha).unwrap();
        let lmax = lambda_upper_bound(&ctx, p);
        prop_assert!(power_g(lmax, &ctx) <= p * (1.0 + 1e-12));
        prop_assert!(power_g(lmax, &ctx) <= power_g(0.5 * lmax, &ctx));
    }
}
