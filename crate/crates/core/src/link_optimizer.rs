//! Uplink SINR / sum-rate evaluation and combiner design for the HMA.
//!
//! The wave-domain combiner `t` is found with a quadratic-transform fractional
//! programming loop: with the auxiliary vector `v` fixed, each user's ratio
//! `A_k/B_k` is replaced by `2 v_k √A_k − v_k² B_k` and the resulting surrogate
//! is increased by projected gradient ascent on `t`. The feasible set is the
//! ellipsoid `Σ |t_n|² p_n ≤ Σ p_n`; every iterate is scaled radially onto its
//! boundary. The digital combiner is then a zero-forcing inverse of the
//! equivalent channel.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{ChannelRealization, NoiseModel};
use crate::em_model::{power_conservation_gap, HmaModel};
use crate::{CMatrix, CVector, Error, Result, C64, ETA0};

/// Condition number above which the equivalent channel is treated as singular.
pub const MAX_ZF_CONDITION: f64 = 1e12;

/// A white noise source of power `power` seen through the linear map `map`
/// (rows = output streams).
#[derive(Debug, Clone, Copy)]
pub struct WhiteNoise<'a> {
    pub map: &'a CMatrix,
    pub power: f64,
}

/// `g Σ g^H` for a row vector `g` and a real symmetric `Σ`.
fn colored_power(row: impl Iterator<Item = C64> + Clone, sigma: &DMatrix<f64>) -> f64 {
    let g: Vec<C64> = row.collect();
    let n = g.len();
    let mut acc = 0.0;
    for a in 0..n {
        let mut s = C64::new(0.0, 0.0);
        for b in 0..n {
            s += g[b].conj() * sigma[(a, b)];
        }
        acc += (g[a] * s).re;
    }
    acc
}

/// Per-stream SINR for a total combiner `combiner` (`K×N`) acting on the
/// received field `H s + z_ant`, with `z_ant ~ CN(0, σ²_ant Σ_rx)`, plus any
/// number of white noise sources injected behind the aperture.
///
/// `rx_power` is the per-user power captured by one element before
/// combining (transmit power density times effective area).
pub fn sinr_general(
    combiner: &CMatrix,
    h: &CMatrix,
    sigma_rx: &DMatrix<f64>,
    rx_power: f64,
    sigma2_ant: f64,
    white: &[WhiteNoise<'_>],
) -> Result<Vec<f64>> {
    let k = combiner.nrows();
    if combiner.ncols() != h.nrows() || h.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "combiner {}x{} does not fit channel {}x{}",
            combiner.nrows(),
            combiner.ncols(),
            h.nrows(),
            h.ncols()
        )));
    }
    if sigma_rx.nrows() != h.nrows() || sigma_rx.ncols() != h.nrows() {
        return Err(Error::DimensionMismatch("receive correlation size".into()));
    }
    for w in white {
        if w.map.nrows() != k {
            return Err(Error::DimensionMismatch(format!(
                "noise map has {} rows, expected {k}",
                w.map.nrows()
            )));
        }
    }
    let eff = combiner * h;
    (0..k)
        .map(|kk| {
            let signal = rx_power * eff[(kk, kk)].norm_sqr();
            let interference: f64 = (0..k).filter(|&j| j != kk).map(|j| rx_power * eff[(kk, j)].norm_sqr()).sum();
            let ant = sigma2_ant * colored_power(combiner.row(kk).iter().copied(), sigma_rx);
            let white_sum: f64 = white
                .iter()
                .map(|w| w.power * w.map.row(kk).iter().map(|v| v.norm_sqr()).sum::<f64>())
                .sum();
            let denom = interference + ant + white_sum;
            if !(denom > 0.0) {
                return Err(Error::DegenerateCombiner { row: kk });
            }
            Ok(signal / denom)
        })
        .collect()
}

/// Everything needed to evaluate the HMA uplink for a given digital combiner.
#[derive(Debug, Clone)]
pub struct LinkState<'a> {
    pub hma: &'a HmaModel,
    pub chan: &'a ChannelRealization,
    pub noise: &'a NoiseModel,
    /// Per-user transmit power density, W/m².
    pub p_t: f64,
    /// `K×M` digital combiner.
    pub w_d: CMatrix,
}

impl<'a> LinkState<'a> {
    pub fn new(hma: &'a HmaModel, chan: &'a ChannelRealization, noise: &'a NoiseModel, p_t: f64, w_d: CMatrix) -> Result<Self> {
        if !(p_t > 0.0) {
            return Err(Error::Domain(format!("transmit power must be positive, got {p_t}")));
        }
        if chan.n_rx() != hma.n_cells() {
            return Err(Error::DimensionMismatch(format!(
                "channel has {} rows, surface has {} cells",
                chan.n_rx(),
                hma.n_cells()
            )));
        }
        if w_d.nrows() != chan.n_users() || w_d.ncols() != hma.n_elements() {
            return Err(Error::DimensionMismatch(format!(
                "digital combiner is {}x{}, expected {}x{}",
                w_d.nrows(),
                w_d.ncols(),
                chan.n_users(),
                hma.n_elements()
            )));
        }
        Ok(Self {
            hma,
            chan,
            noise,
            p_t,
            w_d,
        })
    }

    /// Identity digital combiner; requires `M = K`.
    pub fn with_identity(hma: &'a HmaModel, chan: &'a ChannelRealization, noise: &'a NoiseModel, p_t: f64) -> Result<Self> {
        let w = CMatrix::identity(chan.n_users(), hma.n_elements());
        Self::new(hma, chan, noise, p_t, w)
    }

    /// Power captured by one unit-cell from one user before fading.
    pub fn rx_power(&self) -> f64 {
        self.p_t * self.hma.layout.unit_cell_area
    }
}

pub fn evaluate_sinr(state: &LinkState<'_>) -> Result<Vec<f64>> {
    let g = &state.w_d * state.hma.rwd_combiner()?;
    sinr_general(
        &g,
        &state.chan.h,
        &state.chan.sigma_rx,
        state.rx_power(),
        state.noise.sigma2_ant,
        &[WhiteNoise {
            map: &state.w_d,
            power: state.noise.sigma2_rf,
        }],
    )
}

pub fn sum_rate(sinr: &[f64]) -> Result<f64> {
    sinr.iter()
        .map(|&g| {
            if g >= 0.0 {
                Ok((1.0 + g).log2())
            } else {
                Err(Error::Domain(format!("negative SINR {g}")))
            }
        })
        .sum()
}

/// Optimal auxiliary variable of the quadratic transform for a fixed ratio.
pub fn fp_auxiliary_update(a: f64, b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::Domain(format!("denominator must be positive, got {b}")));
    }
    if !(a >= 0.0) {
        return Err(Error::Domain(format!("numerator must be non-negative, got {a}")));
    }
    Ok(a.sqrt() / b)
}

/// Quadratic-transform surrogate of `a/b`; never exceeds it and equals it at
/// `v = √a / b`.
pub fn fp_surrogate_sinr(v: f64, a: f64, b: f64) -> f64 {
    2.0 * v * a.sqrt() - v * v * b
}

/// Signal power reaching each unit-cell, summed over users.
pub fn per_cell_incident_power(chan: &ChannelRealization, p_t: f64, a_uc: f64) -> Vec<f64> {
    let scale = p_t * a_uc / (2.0 * ETA0);
    chan.h
        .row_iter()
        .map(|row| scale * row.iter().map(|v| v.norm_sqr()).sum::<f64>())
        .collect()
}

/// Ratios and surrogate of the FP problem at `W^D = I` for one instance.
///
/// With `c_kj[n] = conj(P[k,n] H[n,j])`, user `k` sees user `j` through
/// `sqrt(T)·c_kj^H t`, so
/// `A_k = P_rx T |c_kk^H t|²` and
/// `B_k = P_rx T Σ_{j≠k} |c_kj^H t|² + σ²_ant T (p_k∘t)^H Σ_rx (p_k∘t) + σ²_RF`.
#[derive(Debug, Clone)]
pub struct FpObjective {
    coupling: Vec<Vec<CVector>>,
    p_rows: Vec<CVector>,
    sigma_rx: std::sync::Arc<DMatrix<f64>>,
    signal_scale: f64,
    ant_scale: f64,
    sigma2_rf: f64,
    p_in: Vec<f64>,
    budget: f64,
}

impl FpObjective {
    pub fn new(hma: &HmaModel, chan: &ChannelRealization, noise: &NoiseModel, p_t: f64) -> Result<Self> {
        let (m, n, k) = (hma.n_elements(), hma.n_cells(), chan.n_users());
        if m != k {
            return Err(Error::DimensionMismatch(format!(
                "FP design needs as many RF chains as users, got M={m}, K={k}"
            )));
        }
        if chan.n_rx() != n {
            return Err(Error::DimensionMismatch(format!("channel has {} rows, surface {n} cells", chan.n_rx())));
        }
        if !(p_t > 0.0) {
            return Err(Error::Domain(format!("transmit power must be positive, got {p_t}")));
        }
        let p_rows: Vec<CVector> = (0..m).map(|r| hma.p_hms.row(r).transpose()).collect();
        let coupling = (0..k)
            .map(|kk| {
                (0..k)
                    .map(|j| CVector::from_fn(n, |nn, _| (hma.p_hms[(kk, nn)] * chan.h[(nn, j)]).conj()))
                    .collect()
            })
            .collect();
        let a_uc = hma.layout.unit_cell_area;
        let p_in = per_cell_incident_power(chan, p_t, a_uc);
        let budget = p_in.iter().sum();
        Ok(Self {
            coupling,
            p_rows,
            sigma_rx: chan.sigma_rx.clone(),
            signal_scale: p_t * a_uc * hma.t_loss,
            ant_scale: noise.sigma2_ant * hma.t_loss,
            sigma2_rf: noise.sigma2_rf,
            p_in,
            budget,
        })
    }

    pub fn n_users(&self) -> usize {
        self.p_rows.len()
    }

    pub fn n_cells(&self) -> usize {
        self.p_in.len()
    }

    pub fn incident_power(&self) -> &[f64] {
        &self.p_in
    }

    /// `Σ_n p_in[n]`, the right-hand side of the power constraint.
    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// `Σ_rx (p_k ∘ t)` and `(p_k ∘ t)`.
    fn colored(&self, k: usize, t: &CVector) -> (CVector, CVector) {
        let u = self.p_rows[k].component_mul(t);
        let re = self.sigma_rx.as_ref() * u.map(|c| c.re);
        let im = self.sigma_rx.as_ref() * u.map(|c| c.im);
        let su = CVector::from_fn(u.len(), |i, _| C64::new(re[i], im[i]));
        (u, su)
    }

    /// `(A_k, B_k)` for every user.
    pub fn ratios(&self, t: &CVector) -> Vec<(f64, f64)> {
        (0..self.n_users())
            .map(|k| {
                let a = self.signal_scale * self.coupling[k][k].dotc(t).norm_sqr();
                let interf: f64 = (0..self.n_users())
                    .filter(|&j| j != k)
                    .map(|j| self.coupling[k][j].dotc(t).norm_sqr())
                    .sum();
                let (u, su) = self.colored(k, t);
                let q = u.dotc(&su).re;
                (a, self.signal_scale * interf + self.ant_scale * q + self.sigma2_rf)
            })
            .collect()
    }

    /// Sum rate at `W^D = I`.
    pub fn rate(&self, t: &CVector) -> f64 {
        self.ratios(t).iter().map(|(a, b)| (1.0 + a / b).log2()).sum()
    }

    pub fn auxiliary(&self, t: &CVector) -> Result<Vec<f64>> {
        self.ratios(t).iter().map(|&(a, b)| fp_auxiliary_update(a, b)).collect()
    }

    /// Surrogate `Σ log2(1 + 2 v_k √A_k − v_k² B_k)`; `-inf` where a log
    /// argument is not positive.
    pub fn surrogate(&self, t: &CVector, v: &[f64]) -> f64 {
        let mut s = 0.0;
        for (k, (a, b)) in self.ratios(t).into_iter().enumerate() {
            let arg = 1.0 + fp_surrogate_sinr(v[k], a, b);
            if !(arg > 0.0) {
                return f64::NEG_INFINITY;
            }
            s += arg.log2();
        }
        s
    }

    /// Wirtinger cogradient `∂S/∂t*` of the surrogate. The real gradient with
    /// respect to `(Re t_n, Im t_n)` is `(2 Re g_n, 2 Im g_n)`.
    pub fn surrogate_gradient(&self, t: &CVector, v: &[f64]) -> CVector {
        let n = t.len();
        let mut grad = CVector::zeros(n);
        for k in 0..self.n_users() {
            let ckk = &self.coupling[k][k];
            let inner = ckk.dotc(t);
            let mag = inner.norm();
            let a = self.signal_scale * mag * mag;

            // ∂√A/∂t*
            let mut d_sqrt_a = CVector::zeros(n);
            if mag > 0.0 {
                d_sqrt_a = ckk * (inner * (self.signal_scale.sqrt() / (2.0 * mag)));
            }

            // ∂B/∂t*
            let mut d_b = CVector::zeros(n);
            let mut interf = 0.0;
            for j in (0..self.n_users()).filter(|&j| j != k) {
                let c = &self.coupling[k][j];
                let ip = c.dotc(t);
                interf += ip.norm_sqr();
                d_b += c * (ip * self.signal_scale);
            }
            let (u, su) = self.colored(k, t);
            let q = u.dotc(&su).re;
            d_b += self.p_rows[k].map(|p| p.conj()).component_mul(&su) * C64::new(self.ant_scale, 0.0);
            let b = self.signal_scale * interf + self.ant_scale * q + self.sigma2_rf;

            let gamma = fp_surrogate_sinr(v[k], a, b);
            let w = 1.0 / ((1.0 + gamma) * LN_2);
            grad += (d_sqrt_a * C64::new(2.0 * v[k], 0.0) - d_b * C64::new(v[k] * v[k], 0.0)) * C64::new(w, 0.0);
        }
        grad
    }

    /// Scale `t` radially so the power constraint holds with equality.
    pub fn scale_to_boundary(&self, t: &CVector) -> Option<CVector> {
        let used: f64 = t.iter().zip(&self.p_in).map(|(tn, p)| tn.norm_sqr() * p).sum();
        if !(used > 0.0) || !used.is_finite() {
            return None;
        }
        Some(t * C64::new((self.budget / used).sqrt(), 0.0))
    }

    pub fn gap(&self, t: &CVector) -> f64 {
        power_conservation_gap(t, &self.p_in).expect("t length checked at construction")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpOptions {
    pub max_outer: usize,
    /// Inner ascent iterations in the first outer round.
    pub inner_first: usize,
    /// Inner ascent iterations in later rounds.
    pub inner_rest: usize,
    /// Relative change of the sum rate that ends the outer loop.
    pub tol: f64,
    /// Sufficient-increase constant of the backtracking line search.
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Seed of the random initial `t`.
    pub seed: u64,
}

impl Default for FpOptions {
    fn default() -> Self {
        Self {
            max_outer: 30,
            inner_first: 100,
            inner_rest: 20,
            tol: 1e-5,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CombinerSolution {
    pub t_hms: CVector,
    pub w_d: CMatrix,
    /// Auxiliary vector from the last outer round (empty for closed-form combiners).
    pub v: Vec<f64>,
    pub sinr: Vec<f64>,
    pub sum_rate: f64,
    /// Sum rate at `W^D = I` before the first and after every outer round.
    pub trace: Vec<f64>,
    /// The equivalent channel could not be inverted and `W^D = I` was kept.
    pub zf_fallback: bool,
}

fn random_start(n: usize, seed: u64) -> CVector {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    })
}

struct Ascent {
    step: f64,
    /// Constraint weights normalized to unit mean. Steps are taken along
    /// `grad / weight`, i.e. plain gradient steps in `u = sqrt(weight)·t`
    /// where the feasible boundary is a sphere.
    weight: Vec<f64>,
}

impl Ascent {
    fn new(obj: &FpObjective) -> Self {
        let mean = obj.budget / obj.p_in.len() as f64;
        let weight = obj
            .p_in
            .iter()
            .map(|&p| if mean > 0.0 { (p / mean).max(1e-9) } else { 1.0 })
            .collect();
        Self { step: f64::NAN, weight }
    }

    fn direction(&self, grad: &CVector) -> CVector {
        CVector::from_fn(grad.len(), |i, _| grad[i] / self.weight[i])
    }

    /// Projected gradient ascent on the surrogate with fixed `v`. Every iterate
    /// lies on the constraint boundary and the surrogate never decreases.
    fn run(&mut self, obj: &FpObjective, t: &mut CVector, v: &[f64], iters: usize, opts: &FpOptions) {
        let mut value = obj.surrogate(t, v);
        let mut grad = obj.surrogate_gradient(t, v);
        for _ in 0..iters {
            let dir = self.direction(&grad);
            let dnorm = dir.norm();
            if !(dnorm > 0.0) || !dnorm.is_finite() {
                return;
            }
            if !(self.step > 0.0) || !self.step.is_finite() {
                self.step = 0.1 * t.norm() / dnorm;
            }
            let mut alpha = self.step;
            let mut accepted = None;
            for _ in 0..opts.max_backtracks {
                let trial = &*t + &dir * C64::new(alpha, 0.0);
                if let Some(cand) = obj.scale_to_boundary(&trial) {
                    let val = obj.surrogate(&cand, v);
                    let predicted = 2.0 * grad.dotc(&(&cand - &*t)).re;
                    if val.is_finite() && val >= value + opts.armijo * predicted.max(0.0) {
                        accepted = Some((cand, val));
                        break;
                    }
                }
                alpha *= opts.backtrack;
            }
            let Some((cand, val)) = accepted else {
                return;
            };
            let new_grad = obj.surrogate_gradient(&cand, v);
            // Barzilai-Borwein step in the weighted metric
            let s = &cand - &*t;
            let y = &new_grad - &grad;
            let curvature = -s.dotc(&y).re;
            let s_norm2: f64 = s.iter().zip(&self.weight).map(|(d, w)| d.norm_sqr() * w).sum();
            self.step = if curvature > 0.0 { s_norm2 / curvature } else { alpha * 2.0 };
            let done = val - value <= f64::EPSILON * value.abs();
            *t = cand;
            value = val;
            grad = new_grad;
            if done {
                return;
            }
        }
    }
}

/// Fractional-programming design of the transmission coefficients with the
/// digital combiner fixed to identity.
pub fn optimize_rwd_fp(
    hma: &HmaModel,
    chan: &ChannelRealization,
    noise: &NoiseModel,
    p_t: f64,
    opts: &FpOptions,
) -> Result<CombinerSolution> {
    let obj = FpObjective::new(hma, chan, noise, p_t)?;
    let init = random_start(obj.n_cells(), opts.seed);
    let mut t = obj.scale_to_boundary(&init).ok_or(Error::NumericalFailure { trace: vec![] })?;
    optimize_from(&obj, hma, chan, noise, p_t, &mut t, opts)
}

/// Run the FP loop from a given feasible starting point.
pub fn optimize_from(
    obj: &FpObjective,
    hma: &HmaModel,
    chan: &ChannelRealization,
    noise: &NoiseModel,
    p_t: f64,
    t: &mut CVector,
    opts: &FpOptions,
) -> Result<CombinerSolution> {
    let mut trace = vec![obj.rate(t)];
    if !trace[0].is_finite() {
        return Err(Error::NumericalFailure { trace });
    }
    let mut ascent = Ascent::new(obj);
    let mut v = Vec::new();
    for outer in 0..opts.max_outer {
        v = obj.auxiliary(t).map_err(|_| Error::NumericalFailure { trace: trace.clone() })?;
        let iters = if outer == 0 { opts.inner_first } else { opts.inner_rest };
        ascent.run(obj, t, &v, iters, opts);
        let rate = obj.rate(t);
        if !rate.is_finite() {
            trace.push(rate);
            return Err(Error::NumericalFailure { trace });
        }
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(rate);
        if (rate - prev).abs() <= opts.tol * prev.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }

    let tuned = hma.clone().with_t(t.clone())?;
    let state = LinkState::with_identity(&tuned, chan, noise, p_t)?;
    let sinr = evaluate_sinr(&state)?;
    let sum_rate = sum_rate(&sinr)?;
    Ok(CombinerSolution {
        t_hms: t.clone(),
        w_d: state.w_d,
        v,
        sinr,
        sum_rate,
        trace,
        zf_fallback: false,
    })
}

/// Inverse of the equivalent channel `G^HMS H`.
pub fn zf_digital_combiner(hma: &HmaModel, chan: &ChannelRealization) -> Result<CMatrix> {
    let h_eq = hma.rwd_combiner()? * &chan.h;
    invert_equivalent(&h_eq)
}

pub(crate) fn condition_number(m: &CMatrix) -> f64 {
    let sv = m.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

pub(crate) fn invert_equivalent(h_eq: &CMatrix) -> Result<CMatrix> {
    if !h_eq.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "equivalent channel is {}x{}, ZF needs M = K",
            h_eq.nrows(),
            h_eq.ncols()
        )));
    }
    let cond = condition_number(h_eq);
    if !(cond <= MAX_ZF_CONDITION) {
        return Err(Error::SingularChannel { cond });
    }
    h_eq.clone().try_inverse().ok_or(Error::SingularChannel { cond })
}

/// FP design of `t` followed by a zero-forcing digital combiner.
pub fn solve_multiuser(
    hma: &HmaModel,
    chan: &ChannelRealization,
    noise: &NoiseModel,
    p_t: f64,
    opts: &FpOptions,
) -> Result<CombinerSolution> {
    let mut sol = optimize_rwd_fp(hma, chan, noise, p_t, opts)?;
    let tuned = hma.clone().with_t(sol.t_hms.clone())?;
    let (w_d, fallback) = match zf_digital_combiner(&tuned, chan) {
        Ok(w) => (w, false),
        Err(Error::SingularChannel { .. }) => (CMatrix::identity(chan.n_users(), hma.n_elements()), true),
        Err(e) => return Err(e),
    };
    let state = LinkState::new(&tuned, chan, noise, p_t, w_d)?;
    sol.sinr = evaluate_sinr(&state)?;
    sol.sum_rate = sum_rate(&sol.sinr)?;
    sol.w_d = state.w_d;
    sol.zf_fallback = fallback;
    Ok(sol)
}

/// Single-user phase alignment: every cell cancels the phase of its channel
/// and propagation coefficient so all contributions add coherently.
pub fn smp_combiner(hma: &HmaModel, chan: &ChannelRealization) -> Result<CVector> {
    if chan.n_users() != 1 || hma.n_elements() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "phase alignment needs K = M = 1, got K={}, M={}",
            chan.n_users(),
            hma.n_elements()
        )));
    }
    if chan.n_rx() != hma.n_cells() {
        return Err(Error::DimensionMismatch("channel rows vs cells".into()));
    }
    Ok(CVector::from_fn(hma.n_cells(), |n, _| {
        let p = hma.p_hms[(0, n)];
        let h = chan.h[(n, 0)];
        let phase = if p.norm() == 0.0 { -h.arg() } else { -h.arg() - p.arg() };
        C64::from_polar(1.0, phase)
    }))
}

/// Rate of the phase-alignment combiner with `W^D = I`.
pub fn smp_solution(hma: &HmaModel, chan: &ChannelRealization, noise: &NoiseModel, p_t: f64) -> Result<CombinerSolution> {
    let t = smp_combiner(hma, chan)?;
    let tuned = hma.clone().with_t(t.clone())?;
    let state = LinkState::with_identity(&tuned, chan, noise, p_t)?;
    let sinr = evaluate_sinr(&state)?;
    let rate = sum_rate(&sinr)?;
    Ok(CombinerSolution {
        t_hms: t,
        w_d: state.w_d,
        v: Vec::new(),
        sinr,
        sum_rate: rate,
        trace: vec![rate],
        zf_fallback: false,
    })
}
