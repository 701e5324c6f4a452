//! Correlated Rayleigh uplink channels, user drops, noise powers and the
//! plain-text channel file format.
//!
//! Channel file layout (UTF-8):
//!
//! ```text
//! N K
//! re_1 im_1 ... re_K im_K      <- N rows
//! beta: b_1 ... b_K            <- optional
//! positions: x_1 y_1 ... x_K y_K   <- optional
//! ---                          <- separates realizations
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::ArrayLayout;
use crate::{CMatrix, Error, Result, BOLTZMANN, C64};

/// Eigenvalues of the receive correlation below `-PSD_TOL` are rejected,
/// those in `[-PSD_TOL, 0)` are clipped to zero.
pub const PSD_TOL: f64 = 1e-9;

/// Default hexagonal cell radius, meters.
pub const CELL_RADIUS: f64 = 250.0;
/// Default exclusion radius around the base station, meters.
pub const EXCLUSION_RADIUS: f64 = 25.0;

#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// `N×K` uplink channel.
    pub h: CMatrix,
    /// Per-user linear path gains.
    pub beta: Vec<f64>,
    /// Receive correlation, shared between realizations of one layout.
    pub sigma_rx: Arc<DMatrix<f64>>,
    pub user_positions: Option<Vec<[f64; 2]>>,
}

impl ChannelRealization {
    pub fn n_rx(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.h.ncols()
    }

    /// Replace the receive correlation, e.g. after importing a channel.
    pub fn with_correlation(mut self, sigma_rx: Arc<DMatrix<f64>>) -> Result<Self> {
        if sigma_rx.nrows() != self.h.nrows() || sigma_rx.ncols() != self.h.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "correlation is {}x{}, channel has {} rows",
                sigma_rx.nrows(),
                sigma_rx.ncols(),
                self.h.nrows()
            )));
        }
        self.sigma_rx = sigma_rx;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// External noise power captured per element, W.
    pub sigma2_ant: f64,
    /// Input-referred white noise per RF chain, W.
    pub sigma2_rf: f64,
    pub bandwidth: f64,
    pub temp_env: f64,
    pub temp_bs: f64,
}

impl NoiseModel {
    /// Noise powers for elements of effective area `a_eff` feeding RF chains
    /// built from `rf_stages`.
    pub fn new(
        a_eff: f64,
        wavelength: f64,
        bandwidth: f64,
        temp_env: f64,
        temp_bs: f64,
        rf_stages: &[Stage],
    ) -> Result<Self> {
        Ok(Self {
            sigma2_ant: antenna_noise_power(a_eff, wavelength, bandwidth, temp_env)?,
            sigma2_rf: rf_noise_power(rf_stages, bandwidth, temp_bs)?,
            bandwidth,
            temp_env,
            temp_bs,
        })
    }
}

/// `sin(πx)/(πx)`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Receive correlation of the unit-cells under 3-D isotropic scattering,
/// `sinc(2 d / λ)`.
pub fn receive_correlation(layout: &ArrayLayout) -> DMatrix<f64> {
    let n = layout.n_cells();
    let mut s = DMatrix::identity(n, n);
    for a in 0..n {
        for b in (a + 1)..n {
            let v = sinc(2.0 * layout.cell_distance(a, b) / layout.wavelength);
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    s
}

/// Symmetric PSD square root of a correlation matrix.
pub fn psd_sqrt(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(sigma.clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOL {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= roots[j];
    }
    let mut root = scaled * v.transpose();
    // restore exact symmetry lost to rounding
    let n = root.nrows();
    for a in 0..n {
        for b in (a + 1)..n {
            let m = 0.5 * (root[(a, b)] + root[(b, a)]);
            root[(a, b)] = m;
            root[(b, a)] = m;
        }
    }
    Ok(root)
}

/// Winner II urban-microcell NLOS path gain (linear), `distance` in meters,
/// `fc_ghz` in GHz. Distances inside the exclusion zone are rejected.
pub fn path_loss(distance: f64, fc_ghz: f64) -> Result<f64> {
    if !(distance >= EXCLUSION_RADIUS) {
        return Err(Error::Domain(format!(
            "distance {distance} m inside the {EXCLUSION_RADIUS} m exclusion zone"
        )));
    }
    if !(fc_ghz > 0.0) {
        return Err(Error::Domain(format!("carrier must be positive, got {fc_ghz} GHz")));
    }
    let pl_db = 36.7 * distance.log10() + 22.7 + 26.0 * fc_ghz.log10();
    Ok(10f64.powf(-pl_db / 10.0))
}

fn in_hexagon(x: f64, y: f64, radius: f64) -> bool {
    let s3 = 3f64.sqrt();
    y.abs() <= radius * s3 / 2.0 && s3 * x.abs() + y.abs() <= s3 * radius
}

/// Uniform user drops over a hexagon (vertices on the x axis) of circumradius
/// `cell_radius`, excluding a disk of radius `exclusion` around the origin.
pub fn drop_users(k: usize, cell_radius: f64, exclusion: f64, seed: u64) -> Result<Vec<[f64; 2]>> {
    let apothem = cell_radius * 3f64.sqrt() / 2.0;
    if !(exclusion >= 0.0 && exclusion < apothem) {
        return Err(Error::Domain(format!(
            "exclusion {exclusion} m must be below the hexagon apothem {apothem} m"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut users = Vec::with_capacity(k);
    while users.len() < k {
        let x = rng.random_range(-cell_radius..=cell_radius);
        let y = rng.random_range(-apothem..=apothem);
        if in_hexagon(x, y, cell_radius) && x.hypot(y) >= exclusion {
            users.push([x, y]);
        }
    }
    Ok(users)
}

fn complex_gaussian(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Kronecker Rayleigh channel generator for one layout.
///
/// Precomputes the receive correlation and its square root so repeated draws
/// only cost one `N×N` by `N×K` product.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub sigma_rx: Arc<DMatrix<f64>>,
    rx_factor: DMatrix<f64>,
    pub fc_ghz: f64,
    /// Use `Σ_rx·H̃·Σ_tx` literally instead of the square-root factors.
    pub no_sqrt: bool,
}

impl ChannelModel {
    pub fn new(layout: &ArrayLayout, fc_ghz: f64, no_sqrt: bool) -> Result<Self> {
        let sigma_rx = receive_correlation(layout);
        let rx_factor = if no_sqrt { sigma_rx.clone() } else { psd_sqrt(&sigma_rx)? };
        Ok(Self {
            sigma_rx: Arc::new(sigma_rx),
            rx_factor,
            fc_ghz,
            no_sqrt,
        })
    }

    pub fn n_rx(&self) -> usize {
        self.sigma_rx.nrows()
    }

    /// Draw a channel for users at the given positions (base station at the origin).
    pub fn draw(&self, users: &[[f64; 2]], seed: u64) -> Result<ChannelRealization> {
        let beta = users
            .iter()
            .map(|p| path_loss(p[0].hypot(p[1]), self.fc_ghz))
            .collect::<Result<Vec<_>>>()?;
        let mut chan = self.draw_with_gains(&beta, seed);
        chan.user_positions = Some(users.to_vec());
        Ok(chan)
    }

    /// Draw a channel for explicit per-user path gains.
    pub fn draw_with_gains(&self, beta: &[f64], seed: u64) -> ChannelRealization {
        let n = self.n_rx();
        let k = beta.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let white = CMatrix::from_fn(n, k, |_, _| complex_gaussian(&mut rng));
        let rx = self.rx_factor.map(|v| C64::new(v, 0.0));
        let mut h = rx * white;
        for (j, mut col) in h.column_iter_mut().enumerate() {
            let s = if self.no_sqrt { beta[j] } else { beta[j].sqrt() };
            col *= C64::new(s, 0.0);
        }
        ChannelRealization {
            h,
            beta: beta.to_vec(),
            sigma_rx: self.sigma_rx.clone(),
            user_positions: None,
        }
    }
}

/// One-shot channel draw; builds the correlation factor on every call.
pub fn draw_channel(layout: &ArrayLayout, users: &[[f64; 2]], fc_ghz: f64, seed: u64) -> Result<ChannelRealization> {
    ChannelModel::new(layout, fc_ghz, false)?.draw(users, seed)
}

/// External noise captured by one element of effective area `a_eff` over a
/// half-space solid angle.
pub fn antenna_noise_power(a_eff: f64, wavelength: f64, bandwidth: f64, temp_env: f64) -> Result<f64> {
    for (name, v) in [("a_eff", a_eff), ("wavelength", wavelength), ("bandwidth", bandwidth), ("temp_env", temp_env)] {
        if !(v > 0.0) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    let solid_angle = 2.0 * std::f64::consts::PI;
    Ok(BOLTZMANN * temp_env * bandwidth * (a_eff / (wavelength * wavelength)) * solid_angle)
}

/// Linear noise factor and gain of one cascade stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage {
    pub noise_factor: f64,
    pub gain: f64,
}

impl Stage {
    pub fn from_db(gain_db: f64, nf_db: f64) -> Self {
        Self {
            noise_factor: crate::db_to_linear(nf_db),
            gain: crate::db_to_linear(gain_db),
        }
    }

    /// A passive element whose noise figure equals its insertion loss.
    pub fn passive(loss_db: f64) -> Self {
        Self::from_db(-loss_db, loss_db)
    }
}

/// Friis cascade of noise factors and gains.
pub fn friis_cascade(stages: &[Stage]) -> Result<Stage> {
    let (first, rest) = stages
        .split_first()
        .ok_or_else(|| Error::Domain("empty stage list".into()))?;
    for s in stages {
        if !(s.gain > 0.0) || !(s.noise_factor >= 1.0) {
            return Err(Error::Domain(format!("invalid stage {s:?}")));
        }
    }
    let mut f = first.noise_factor;
    let mut g = first.gain;
    for s in rest {
        f += (s.noise_factor - 1.0) / g;
        g *= s.gain;
    }
    Ok(Stage { noise_factor: f, gain: g })
}

/// Input-referred RF-chain noise power `(F − 1)·k·T·B`.
pub fn rf_noise_power(stages: &[Stage], bandwidth: f64, temp_bs: f64) -> Result<f64> {
    let total = friis_cascade(stages)?;
    Ok((total.noise_factor - 1.0) * BOLTZMANN * temp_bs * bandwidth)
}

fn parse_floats(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("not a number: `{tok}`"),
            })
        })
        .collect()
}

/// Parse the channel file format. The receive correlation of each result is
/// the identity until replaced with [`ChannelRealization::with_correlation`].
pub fn parse_channels(text: &str) -> Result<Vec<ChannelRealization>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .peekable();
    let mut out = Vec::new();
    let last_line = text.lines().count();

    while let Some((hline, header)) = lines.next() {
        let dims: Vec<&str> = header.split_whitespace().collect();
        let parse_dim = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: hline,
                msg: format!("bad header `{header}`, expected `N K`"),
            })
        };
        if dims.len() != 2 {
            return Err(Error::Parse {
                line: hline,
                msg: format!("bad header `{header}`, expected `N K`"),
            });
        }
        let (n, k) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
        if n == 0 || k == 0 {
            return Err(Error::Parse {
                line: hline,
                msg: "N and K must be positive".into(),
            });
        }

        let mut h = CMatrix::zeros(n, k);
        for row in 0..n {
            let (lineno, line) = match lines.next() {
                Some((l, s)) if s != "---" && !s.contains(':') => (l, s),
                Some((l, _)) => {
                    return Err(Error::Parse {
                        line: l,
                        msg: format!("missing channel row {} of {n}", row + 1),
                    })
                }
                None => {
                    return Err(Error::Parse {
                        line: last_line + 1,
                        msg: format!("missing channel row {} of {n} (end of file)", row + 1),
                    })
                }
            };
            let vals = parse_floats(line, lineno)?;
            if vals.len() != 2 * k {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("row {} has {} values, expected {}", row + 1, vals.len(), 2 * k),
                });
            }
            for j in 0..k {
                h[(row, j)] = C64::new(vals[2 * j], vals[2 * j + 1]);
            }
        }

        let mut beta = None;
        let mut positions = None;
        while let Some(&(lineno, line)) = lines.peek() {
            if line == "---" {
                lines.next();
                break;
            }
            if let Some(rest) = line.strip_prefix("beta:") {
                let b = parse_floats(rest, lineno)?;
                if b.len() != k {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("beta has {} values, expected {k}", b.len()),
                    });
                }
                beta = Some(b);
            } else if let Some(rest) = line.strip_prefix("positions:") {
                let p = parse_floats(rest, lineno)?;
                if p.len() != 2 * k {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("positions has {} values, expected {}", p.len(), 2 * k),
                    });
                }
                positions = Some(p.chunks(2).map(|c| [c[0], c[1]]).collect());
            } else {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected `---`, `beta:` or `positions:`, found `{line}`"),
                });
            }
            lines.next();
        }

        let beta = beta.unwrap_or_else(|| {
            h.column_iter()
                .map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64)
                .collect()
        });
        out.push(ChannelRealization {
            h,
            beta,
            sigma_rx: Arc::new(DMatrix::identity(n, n)),
            user_positions: positions,
        });
    }
    Ok(out)
}

pub fn import_channels(path: impl AsRef<Path>) -> Result<Vec<ChannelRealization>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_channels(&text)
}

/// Serialize realizations in the channel file format. Floats are written in
/// shortest round-trip form.
pub fn format_channels(chans: &[ChannelRealization]) -> String {
    let mut s = String::new();
    for (i, c) in chans.iter().enumerate() {
        if i > 0 {
            s.push_str("---\n");
        }
        let _ = writeln!(s, "{} {}", c.n_rx(), c.n_users());
        for row in c.h.row_iter() {
            let vals: Vec<String> = row.iter().flat_map(|v| [format!("{:e}", v.re), format!("{:e}", v.im)]).collect();
            let _ = writeln!(s, "{}", vals.join(" "));
        }
        let b: Vec<String> = c.beta.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(s, "beta: {}", b.join(" "));
        if let Some(p) = &c.user_positions {
            let v: Vec<String> = p.iter().flat_map(|q| [format!("{:e}", q[0]), format!("{:e}", q[1])]).collect();
            let _ = writeln!(s, "positions: {}", v.join(" "));
        }
    }
    s
}

pub fn export_channels(chans: &[ChannelRealization], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_channels(chans)).map_err(|e| Error::io(path, e))
}
