use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hma_core::channel::{drop_users, ChannelModel, ChannelRealization, NoiseModel, CELL_RADIUS, EXCLUSION_RADIUS};
use hma_core::em_model::{power_conservation_gap, HmaModel};
use hma_core::geometry::{build_planar_layout, PlanarSpec};
use hma_core::link_optimizer::{
    evaluate_sinr, fp_auxiliary_update, fp_surrogate_sinr, optimize_rwd_fp, sinr_general, solve_multiuser,
    sum_rate, zf_digital_combiner, FpObjective, FpOptions, LinkState, WhiteNoise,
};
use hma_core::power_model::DeviceCatalog;
use hma_core::{db_to_linear, dbm_to_watts, linear_to_db, wavelength_for_ghz, CMatrix, CVector, C64};

fn setup(side: f64, k: usize) -> (HmaModel, ChannelModel, NoiseModel) {
    let lam = wavelength_for_ghz(3.0);
    let layout = Arc::new(build_planar_layout(&PlanarSpec::square_hma(side, 1, k, lam)).unwrap());
    let hma = HmaModel::new(layout.clone(), 0.7).unwrap();
    let model = ChannelModel::new(&layout, 3.0, false).unwrap();
    let stages = DeviceCatalog::default().rf_chain_stages().unwrap();
    let noise = NoiseModel::new(layout.unit_cell_area, lam, 20e6, 290.0, 290.0, &stages).unwrap();
    (hma, model, noise)
}

fn draw(model: &ChannelModel, k: usize, seed: u64) -> ChannelRealization {
    let users = drop_users(k, CELL_RADIUS, EXCLUSION_RADIUS, seed).unwrap();
    model.draw(&users, seed ^ 0xABCD).unwrap()
}

fn cvec(values: &[(f64, f64)]) -> CVector {
    CVector::from_iterator(values.len(), values.iter().map(|&(r, i)| C64::new(r, i)))
}

#[test]
fn surrogate_never_exceeds_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let a: f64 = rng.random_range(0.0..10.0);
        let b: f64 = rng.random_range(1e-3..10.0);
        let v: f64 = rng.random_range(0.0..10.0);
        assert!(fp_surrogate_sinr(v, a, b) <= a / b + 1e-12 * (a / b).max(1.0));
        let vs = fp_auxiliary_update(a, b).unwrap();
        assert!((fp_surrogate_sinr(vs, a, b) - a / b).abs() <= 1e-12 * (a / b).max(1.0));
    }
}

/// For one user the rate-optimal `t` is a generalized Rayleigh quotient
/// maximizer: `t ∝ (σ²_ant T Q + σ²_RF/Σp · diag(p))^{-1} a`.
#[test]
fn single_user_fp_reaches_closed_form() {
    let (hma, model, noise) = setup(2.0, 1);
    let n = hma.n_cells();
    for seed in 0..8u64 {
        let chan = draw(&model, 1, seed);
        let p_t = dbm_to_watts(10.0 * seed as f64);
        let obj = FpObjective::new(&hma, &chan, &noise, p_t).unwrap();
        let a = CVector::from_fn(n, |i, _| (hma.p_hms[(0, i)] * chan.h[(i, 0)]).conj());
        let p = obj.incident_power();
        let mut m = CMatrix::from_fn(n, n, |i, j| {
            hma.p_hms[(0, i)].conj() * chan.sigma_rx[(i, j)] * hma.p_hms[(0, j)] * (noise.sigma2_ant * hma.t_loss)
        });
        for i in 0..n {
            m[(i, i)] += C64::new(noise.sigma2_rf * p[i] / obj.budget(), 0.0);
        }
        let t_opt = obj.scale_to_boundary(&(m.try_inverse().unwrap() * a)).unwrap();
        let best = obj.rate(&t_opt);
        let fp = optimize_rwd_fp(&hma, &chan, &noise, p_t, &FpOptions { seed, ..FpOptions::default() }).unwrap();
        assert!(fp.sum_rate >= best * (1.0 - 1e-4), "seed {seed}: {} vs {best}", fp.sum_rate);
        assert!(fp.sum_rate <= best * (1.0 + 1e-9));
    }
}

/// Nulling costs noise enhancement, so ZF is only a sure gain once residual
/// interference dominates; this runs in that regime.
#[test]
fn zf_after_fp_rarely_hurts() {
    let (hma, model, noise) = setup(2.0, 2);
    let mut better = 0;
    let trials = 40;
    for seed in 0..trials {
        let chan = draw(&model, 2, 7_000 + seed);
        let p_t = dbm_to_watts(60.0);
        let sol = solve_multiuser(&hma, &chan, &noise, p_t, &FpOptions { seed, ..FpOptions::default() }).unwrap();
        let tuned = hma.clone().with_t(sol.t_hms.clone()).unwrap();
        let plain = sum_rate(&evaluate_sinr(&LinkState::with_identity(&tuned, &chan, &noise, p_t).unwrap()).unwrap())
            .unwrap();
        better += (sol.sum_rate >= plain) as usize;
    }
    assert!(better as f64 >= 0.95 * trials as f64, "{better}/{trials}");
}

#[test]
fn zf_residual_for_well_conditioned() {
    let (hma, model, _) = setup(1.0, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..20 {
        let chan = draw(&model, 2, seed);
        let t = CVector::from_fn(hma.n_cells(), |_, _| C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)));
        let tuned = hma.clone().with_t(t).unwrap();
        let h_eq = tuned.rwd_combiner().unwrap() * &chan.h;
        let w = zf_digital_combiner(&tuned, &chan).unwrap();
        let r = &w * &h_eq - CMatrix::identity(2, 2);
        assert!(r.iter().all(|v| v.norm() <= 1e-8));
    }
}

#[test]
fn kronecker_literal_mode_scales_by_beta() {
    let lam = wavelength_for_ghz(3.0);
    let layout = build_planar_layout(&PlanarSpec::square_hma(1.0, 1, 1, lam)).unwrap();
    let sqrt_mode = ChannelModel::new(&layout, 3.0, false).unwrap();
    let literal = ChannelModel::new(&layout, 3.0, true).unwrap();
    let a = sqrt_mode.draw_with_gains(&[4.0], 5);
    let b = literal.draw_with_gains(&[4.0], 5);
    let unit_a = sqrt_mode.draw_with_gains(&[1.0], 5);
    let unit_b = literal.draw_with_gains(&[1.0], 5);
    assert!((&a.h - &unit_a.h * C64::new(2.0, 0.0)).norm() < 1e-12);
    assert!((&b.h - &unit_b.h * C64::new(4.0, 0.0)).norm() < 1e-12);
}

proptest! {
    #[test]
    fn gap_ignores_phases(
        mags in prop::collection::vec(0.0f64..3.0, 1..12),
        phases in prop::collection::vec(-10.0f64..10.0, 12),
        p in prop::collection::vec(0.0f64..5.0, 12),
    ) {
        let n = mags.len();
        let a = CVector::from_fn(n, |i, _| C64::new(mags[i], 0.0));
        let b = CVector::from_fn(n, |i, _| C64::from_polar(mags[i], phases[i]));
        let ga = power_conservation_gap(&a, &p[..n]).unwrap();
        let gb = power_conservation_gap(&b, &p[..n]).unwrap();
        prop_assert!((ga - gb).abs() <= 1e-12 * (1.0 + ga.abs()));
    }

    #[test]
    fn sinr_ignores_global_phase_of_t(seed in 0u64..1000, phi in -3.2f64..3.2) {
        let (hma, model, noise) = setup(1.0, 2);
        let chan = draw(&model, 2, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = CVector::from_fn(hma.n_cells(), |_, _| C64::new(rng.random::<f64>(), rng.random::<f64>()));
        let rot = &t * C64::from_polar(1.0, phi);
        let h1 = hma.clone().with_t(t).unwrap();
        let h2 = hma.clone().with_t(rot).unwrap();
        let s1 = evaluate_sinr(&LinkState::with_identity(&h1, &chan, &noise, 1.0).unwrap()).unwrap();
        let s2 = evaluate_sinr(&LinkState::with_identity(&h2, &chan, &noise, 1.0).unwrap()).unwrap();
        for (a, b) in s1.iter().zip(&s2) {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs());
        }
    }

    #[test]
    fn sinr_ignores_common_rf_gain(
        g in 1e-3f64..1e3,
        h in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6),
        c in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6),
        w in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4),
    ) {
        let h = CMatrix::from_column_slice(3, 2, cvec(&h).as_slice());
        let comb = CMatrix::from_column_slice(2, 3, cvec(&c).as_slice());
        let wd = CMatrix::from_column_slice(2, 2, cvec(&w).as_slice());
        let sigma = DMatrix::identity(3, 3);
        let base = sinr_general(&comb, &h, &sigma, 1.0, 0.3, &[WhiteNoise { map: &wd, power: 0.2 }]);
        let gs = C64::new(g, 0.0);
        let (comb_g, wd_g) = (&comb * gs, &wd * gs);
        let scaled = sinr_general(&comb_g, &h, &sigma, 1.0, 0.3, &[WhiteNoise { map: &wd_g, power: 0.2 }]);
        if let (Ok(a), Ok(b)) = (base, scaled) {
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn db_round_trip(x in -200.0f64..200.0) {
        prop_assert!((linear_to_db(db_to_linear(x)) - x).abs() <= 1e-12 * x.abs().max(1.0));
    }
}
