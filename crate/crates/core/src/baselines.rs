//! Reference architectures: a fully digital phased array (one RF chain per
//! patch, MRC or ZF combining) and a fully-connected hybrid array with active
//! phase shifters.
//!
//! The hybrid array is modeled as two noisy blocks,
//! `y = g2 W^D (g1 W^ABF (x + z_ant + z1) + z2)`, where block 1 is the
//! divider / phase-shifter / combiner network and block 2 the RF chain.

use nalgebra::DMatrix;

use crate::channel::{friis_cascade, ChannelRealization, NoiseModel, Stage};
use crate::geometry::{build_planar_layout, ArrayLayout, PlanarSpec, PATCH_EFF_AREA};
use crate::link_optimizer::{condition_number, invert_equivalent, sinr_general, sum_rate, WhiteNoise, MAX_ZF_CONDITION};
use crate::{CMatrix, Error, Result, BOLTZMANN, C64};

/// Radiation efficiency of a patch element.
pub const PATCH_EFFICIENCY: f64 = 0.9;
/// Insertion loss of one 2-way Wilkinson stage, dB.
pub const WILKINSON_LOSS_DB: f64 = 3.9;
/// Gain and noise figure of an active phase shifter, dB.
pub const ACTIVE_PS_GAIN_DB: f64 = -4.5;
pub const ACTIVE_PS_NF_DB: f64 = 23.0;

/// λ/2-pitch patch array filling the given aperture. The element area field
/// carries the patch effective area.
pub fn patch_array_layout(aperture_z: f64, aperture_x: f64, wavelength: f64) -> Result<ArrayLayout> {
    let mut layout = build_planar_layout(&PlanarSpec {
        aperture_z,
        aperture_x,
        cell_pitch: wavelength / 2.0,
        dpa_rows: 1,
        dpa_cols: 1,
        d_sep: wavelength,
        wavelength,
    })?;
    layout.unit_cell_area = PATCH_EFF_AREA;
    layout.dpa_positions = layout.hms_positions.clone();
    Ok(layout)
}

/// Signal and noise scales seen at the ports of a patch array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchLink {
    /// Received power per user per element before fading, W.
    pub rx_power: f64,
    pub sigma2_ant: f64,
    pub sigma2_rf: f64,
}

impl PatchLink {
    /// `noise` must have been built for elements of area `a_eff`. The
    /// radiation efficiency scales everything the patch picks up from space.
    pub fn new(p_t: f64, a_eff: f64, efficiency: f64, noise: &NoiseModel) -> Result<Self> {
        if !(p_t > 0.0) || !(a_eff > 0.0) {
            return Err(Error::Domain(format!("need p_t > 0 and a_eff > 0, got {p_t}, {a_eff}")));
        }
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(Error::Domain(format!("efficiency must be in (0,1], got {efficiency}")));
        }
        Ok(Self {
            rx_power: efficiency * p_t * a_eff,
            sigma2_ant: efficiency * noise.sigma2_ant,
            sigma2_rf: noise.sigma2_rf,
        })
    }
}

#[derive(Debug, Clone)]
pub struct DpaSolution {
    /// `K×N` digital combiner.
    pub combiner: CMatrix,
    pub sinr: Vec<f64>,
    pub rate: f64,
}

fn dpa_evaluate(combiner: CMatrix, h: &CMatrix, sigma_rx: &DMatrix<f64>, link: &PatchLink) -> Result<DpaSolution> {
    let sinr = sinr_general(
        &combiner,
        h,
        sigma_rx,
        link.rx_power,
        link.sigma2_ant,
        &[WhiteNoise {
            map: &combiner,
            power: link.sigma2_rf,
        }],
    )?;
    let rate = sum_rate(&sinr)?;
    Ok(DpaSolution { combiner, sinr, rate })
}

/// Maximum-ratio combining for a single user.
pub fn dpa_mrc(chan: &ChannelRealization, link: &PatchLink) -> Result<DpaSolution> {
    if chan.n_users() != 1 {
        return Err(Error::DimensionMismatch(format!("MRC needs one user, got {}", chan.n_users())));
    }
    dpa_evaluate(chan.h.adjoint(), &chan.h, &chan.sigma_rx, link)
}

/// `(H^H H)^{-1} H^H`.
pub fn zf_pseudo_inverse(h: &CMatrix) -> Result<CMatrix> {
    if h.ncols() > h.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "ZF needs K <= N, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let cond = condition_number(h);
    if !(cond * cond <= MAX_ZF_CONDITION) {
        return Err(Error::SingularChannel { cond });
    }
    let hh = h.adjoint();
    let gram = &hh * h;
    let inv = gram.try_inverse().ok_or(Error::SingularChannel { cond })?;
    Ok(inv * hh)
}

/// Zero-forcing combining; works for any `K ≤ N`.
pub fn dpa_zf(chan: &ChannelRealization, link: &PatchLink) -> Result<DpaSolution> {
    let w = zf_pseudo_inverse(&chan.h)?;
    dpa_evaluate(w, &chan.h, &chan.sigma_rx, link)
}

/// Number of 2-way stages in an `n`-way Wilkinson tree.
pub fn wilkinson_stages(ways: usize) -> usize {
    if ways <= 1 {
        0
    } else {
        (usize::BITS - (ways - 1).leading_zeros()) as usize
    }
}

/// Insertion loss of an `n`-way divider or combiner tree, dB.
pub fn wilkinson_tree_loss_db(ways: usize, per_stage_db: f64) -> f64 {
    wilkinson_stages(ways) as f64 * per_stage_db
}

/// Noise factors and gains of the two hybrid blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockFactors {
    pub f1: f64,
    pub g1: f64,
    pub f2: f64,
    pub g2: f64,
}

/// Block 1: `M`-way divider behind each patch, one phase shifter per path and
/// an `N`-way combiner per RF chain. Block 2: the RF chain.
pub fn block_noise_factors(ps: Stage, wilkinson: Stage, n: usize, m: usize, rf_stages: &[Stage]) -> Result<BlockFactors> {
    if n == 0 || m == 0 {
        return Err(Error::Domain(format!("need N, M >= 1, got N={n}, M={m}")));
    }
    let mut block1 = vec![wilkinson; wilkinson_stages(m)];
    block1.push(ps);
    block1.extend(std::iter::repeat_n(wilkinson, wilkinson_stages(n)));
    let b1 = friis_cascade(&block1)?;
    let b2 = friis_cascade(rf_stages)?;
    Ok(BlockFactors {
        f1: b1.noise_factor,
        g1: b1.gain,
        f2: b2.noise_factor,
        g2: b2.gain,
    })
}

/// Rule used for the analog combiner rows before amplitude scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalogRule {
    Mrc,
    Zf,
}

#[derive(Debug, Clone)]
pub struct HybridBlockModel {
    pub g1: f64,
    pub g2: f64,
    pub f1: f64,
    pub f2: f64,
    /// `M×N` analog combiner, every entry of modulus at most one.
    pub w_abf: CMatrix,
}

#[derive(Debug, Clone)]
pub struct FchpSolution {
    pub block: HybridBlockModel,
    /// `K×M` digital combiner.
    pub w_d: CMatrix,
    pub sinr: Vec<f64>,
    pub rate: f64,
}

/// Scale each row so its largest entry has unit modulus.
pub fn scale_rows_to_unit_peak(w: &mut CMatrix) -> Result<()> {
    for (r, mut row) in w.row_iter_mut().enumerate() {
        let peak = row.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if !(peak > 0.0) {
            return Err(Error::DegenerateCombiner { row: r });
        }
        row /= C64::new(peak, 0.0);
    }
    Ok(())
}

/// Fully-connected hybrid array with active phase shifters and `M = K` RF
/// chains. `temp_bs` sets the block noise temperatures.
pub fn fchp_active(
    chan: &ChannelRealization,
    link: &PatchLink,
    factors: BlockFactors,
    rule: AnalogRule,
    bandwidth: f64,
    temp_bs: f64,
) -> Result<FchpSolution> {
    let k = chan.n_users();
    let mut w_abf = match rule {
        AnalogRule::Mrc => chan.h.adjoint(),
        AnalogRule::Zf => zf_pseudo_inverse(&chan.h)?,
    };
    scale_rows_to_unit_peak(&mut w_abf)?;

    let g1 = factors.g1.sqrt();
    let analog = &w_abf * C64::new(g1, 0.0);
    let w_d = invert_equivalent(&(&analog * &chan.h))?;
    let total = &w_d * &analog;

    let ktb = BOLTZMANN * temp_bs * bandwidth;
    let sinr = sinr_general(
        &total,
        &chan.h,
        &chan.sigma_rx,
        link.rx_power,
        link.sigma2_ant,
        &[
            WhiteNoise {
                map: &total,
                power: (factors.f1 - 1.0) * ktb,
            },
            WhiteNoise {
                map: &w_d,
                power: (factors.f2 - 1.0) * ktb,
            },
        ],
    )?;
    debug_assert_eq!(sinr.len(), k);
    let rate = sum_rate(&sinr)?;
    Ok(FchpSolution {
        block: HybridBlockModel {
            g1: factors.g1,
            g2: factors.g2,
            f1: factors.f1,
            f2: factors.f2,
            w_abf,
        },
        w_d,
        sinr,
        rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelModel;
    use crate::{db_to_linear, linear_to_db, CVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn iid(n: usize, k: usize, seed: u64) -> ChannelRealization {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ChannelRealization {
            h: CMatrix::from_fn(n, k, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)),
            beta: vec![1.0; k],
            sigma_rx: Arc::new(DMatrix::identity(n, n)),
            user_positions: None,
        }
    }

    fn link() -> PatchLink {
        PatchLink {
            rx_power: 2.0,
            sigma2_ant: 0.3,
            sigma2_rf: 0.7,
        }
    }

    #[test]
    fn patch_link_applies_efficiency() {
        let nm = NoiseModel {
            sigma2_ant: 1.0,
            sigma2_rf: 2.0,
            bandwidth: 1.0,
            temp_env: 290.0,
            temp_bs: 290.0,
        };
        let l = PatchLink::new(10.0, 0.5, 0.9, &nm).unwrap();
        assert!((l.rx_power - 4.5).abs() < 1e-15);
        assert!((l.sigma2_ant - 0.9).abs() < 1e-15);
        assert_eq!(l.sigma2_rf, 2.0);
        assert!(PatchLink::new(1.0, 1.0, 1.2, &nm).is_err());
    }

    #[test]
    fn mrc_on_basis_vector() {
        let mut chan = iid(4, 1, 0);
        chan.h = CMatrix::zeros(4, 1);
        chan.h[(0, 0)] = C64::new(1.0, 0.0);
        let sol = dpa_mrc(&chan, &link()).unwrap();
        assert_eq!(sol.combiner[(0, 0)], C64::new(1.0, 0.0));
        assert!(sol.combiner.iter().skip(1).all(|v| v.norm() == 0.0));
    }

    #[test]
    fn mrc_snr_white_noise() {
        let chan = iid(6, 1, 3);
        let l = link();
        let sol = dpa_mrc(&chan, &l).unwrap();
        let want = l.rx_power * chan.h.norm_squared() / (l.sigma2_ant + l.sigma2_rf);
        assert!((sol.sinr[0] - want).abs() < 1e-12 * want);
    }

    #[test]
    fn mrc_beats_random_probes() {
        let chan = iid(8, 1, 9);
        let l = link();
        let best = dpa_mrc(&chan, &l).unwrap().rate;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let w = CMatrix::from_fn(1, 8, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let w = &w / C64::new(w.norm(), 0.0);
            let probe = dpa_evaluate(w, &chan.h, &chan.sigma_rx, &l).unwrap();
            assert!(best >= probe.rate - 1e-12);
        }
    }

    #[test]
    fn zf_examples() {
        // orthonormal columns
        let mut h = CMatrix::zeros(3, 2);
        h[(0, 0)] = C64::new(0.0, 1.0);
        h[(2, 1)] = C64::new(1.0, 0.0);
        let w = zf_pseudo_inverse(&h).unwrap();
        assert!((w - h.adjoint()).norm() < 1e-14);

        let sq = iid(3, 3, 1).h;
        let w = zf_pseudo_inverse(&sq).unwrap();
        assert!((w - sq.clone().try_inverse().unwrap()).norm() < 1e-10);

        let tall = iid(8, 2, 2);
        let sol = dpa_zf(&tall, &link()).unwrap();
        let r = &sol.combiner * &tall.h - CMatrix::identity(2, 2);
        assert!(r.iter().all(|v| v.norm() < 1e-8));

        let mut rank1 = CMatrix::zeros(4, 2);
        rank1.set_column(0, &CVector::from_element(4, C64::new(1.0, 0.0)));
        rank1.set_column(1, &CVector::from_element(4, C64::new(2.0, 0.0)));
        assert!(matches!(zf_pseudo_inverse(&rank1), Err(Error::SingularChannel { .. })));
        assert!(zf_pseudo_inverse(&CMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn zf_matches_mrc_for_one_user() {
        let chan = iid(5, 1, 4);
        let a = dpa_zf(&chan, &link()).unwrap().rate;
        let b = dpa_mrc(&chan, &link()).unwrap().rate;
        assert!((a - b).abs() < 1e-12 * b);
    }

    #[test]
    fn wilkinson_tree() {
        assert_eq!(wilkinson_stages(1), 0);
        assert_eq!(wilkinson_stages(2), 1);
        assert_eq!(wilkinson_stages(3), 2);
        assert_eq!(wilkinson_stages(8), 3);
        assert_eq!(wilkinson_stages(64), 6);
        assert!((wilkinson_tree_loss_db(8, WILKINSON_LOSS_DB) - 11.7).abs() < 1e-12);
    }

    #[test]
    fn friis_oracles() {
        let w = Stage::passive(WILKINSON_LOSS_DB);
        assert!((linear_to_db(w.noise_factor) - WILKINSON_LOSS_DB).abs() < 1e-12);
        let two = friis_cascade(&[w, w]).unwrap();
        assert!((two.gain - 10f64.powf(-0.78)).abs() < 1e-12);
        assert!((two.noise_factor - 10f64.powf(0.78)).abs() < 1e-12);

        let ps = Stage::from_db(ACTIVE_PS_GAIN_DB, ACTIVE_PS_NF_DB);
        assert!((ps.noise_factor - 10f64.powf(2.3)).abs() < 1e-9);
        assert!((ps.gain - 10f64.powf(-0.45)).abs() < 1e-15);
        let alone = block_noise_factors(ps, w, 1, 1, &[Stage::from_db(0.0, 0.0)]).unwrap();
        assert!((alone.f1 - ps.noise_factor).abs() < 1e-9);
        assert!((alone.g1 - ps.gain).abs() < 1e-15);
        assert_eq!(alone.f2, 1.0);
    }

    #[test]
    fn block_factors_cascade_order() {
        let ps = Stage::from_db(ACTIVE_PS_GAIN_DB, ACTIVE_PS_NF_DB);
        let w = Stage::passive(WILKINSON_LOSS_DB);
        let b = block_noise_factors(ps, w, 4, 2, &[Stage::from_db(20.0, 3.0)]).unwrap();
        let manual = friis_cascade(&[w, ps, w, w]).unwrap();
        assert!((b.f1 - manual.noise_factor).abs() < 1e-9 * manual.noise_factor);
        assert!((linear_to_db(b.g1) - (-4.5 - 3.0 * 3.9)).abs() < 1e-9);
        assert!((b.g2 - db_to_linear(20.0)).abs() < 1e-9);
        assert!(block_noise_factors(ps, w, 0, 1, &[]).is_err());
    }

    #[test]
    fn lossless_hybrid_degenerates_to_mrc() {
        let chan = iid(6, 1, 8);
        let l = link();
        // bandwidth chosen so that kTB = 1
        let bw = 1.0 / (BOLTZMANN * 290.0);
        let ideal = BlockFactors {
            f1: 1.0,
            g1: 1.0,
            f2: 1.0 + l.sigma2_rf,
            g2: 1.0,
        };
        let hyb = fchp_active(&chan, &l, ideal, AnalogRule::Mrc, bw, 290.0).unwrap();
        let mrc = dpa_mrc(&chan, &l).unwrap();
        // RF noise enters once instead of once per element
        let want = l.rx_power * chan.h.norm_squared()
            / (l.sigma2_ant + l.sigma2_rf / (hyb.block.w_abf.norm_squared()));
        assert!((hyb.sinr[0] - want).abs() < 1e-9 * want);
        assert!(hyb.rate >= mrc.rate);

        let mut noisy = ideal;
        noisy.f1 = 3.0;
        let worse = fchp_active(&chan, &l, noisy, AnalogRule::Mrc, bw, 290.0).unwrap();
        let extra = 2.0;
        let want = l.rx_power * chan.h.norm_squared()
            / (l.sigma2_ant + extra + l.sigma2_rf / hyb.block.w_abf.norm_squared());
        assert!((worse.sinr[0] - want).abs() < 1e-9 * want);
    }

    #[test]
    fn hybrid_scaling_keeps_nulls() {
        let lam = 0.1;
        let layout = patch_array_layout(2.0 * lam, 2.0 * lam, lam).unwrap();
        assert_eq!(layout.n_cells(), 16);
        let model = ChannelModel::new(&layout, 3.0, false).unwrap();
        let chan = model.draw_with_gains(&[1e-10, 3e-11], 5);
        let ps = Stage::from_db(ACTIVE_PS_GAIN_DB, ACTIVE_PS_NF_DB);
        let w = Stage::passive(WILKINSON_LOSS_DB);
        let f = block_noise_factors(ps, w, 16, 2, &[Stage::from_db(30.0, 26.0)]).unwrap();
        let l = link();
        let sol = fchp_active(&chan, &l, f, AnalogRule::Zf, 20e6, 290.0).unwrap();
        for row in sol.block.w_abf.row_iter() {
            let peak = row.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!((peak - 1.0).abs() < 1e-14);
        }
        let eq = &sol.block.w_abf * &chan.h;
        for k in 0..2 {
            let off = eq[(k, 1 - k)].norm();
            assert!(off < 1e-8 * eq[(k, k)].norm());
        }
        assert!(sol.rate >= 0.0);
    }
}
