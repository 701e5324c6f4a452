//! Monte-Carlo experiment runner.
//!
//! A scenario is read from a `key = value` file (`#` starts a comment, lists
//! are comma separated). Every trial is a (drop, channel) pair with its own
//! seeds derived from the scenario seed, so results do not depend on how
//! trials are spread over worker threads.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::baselines::{
    block_noise_factors, dpa_mrc, dpa_zf, fchp_active, patch_array_layout, AnalogRule, BlockFactors, PatchLink,
    PATCH_EFFICIENCY,
};
use crate::channel::{
    drop_users, import_channels, ChannelModel, ChannelRealization, NoiseModel, CELL_RADIUS, EXCLUSION_RADIUS,
};
use crate::em_model::HmaModel;
use crate::geometry::{build_planar_layout, ArrayLayout, PlanarSpec};
use crate::link_optimizer::{smp_solution, solve_multiuser, FpOptions};
use crate::power_model::{
    architecture_power, device, lna_input_power, Architecture, DeviceCatalog, Dims, PowerBreakdown,
};
use crate::{dbm_to_watts, wavelength_for_ghz, Error, Result};

/// Rows with a larger share of failed trials are flagged.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

pub const CSV_HEADER: [&str; 7] = [
    "arch",
    "p_t_dbm",
    "mean_rate_bps_hz",
    "rate_ci95",
    "mean_ee_bps_hz_per_w",
    "power_w",
    "n_trials",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    HmaFp,
    HmaSmp,
    DpaMrc,
    DpaZf,
    FchpAct,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::HmaFp, Scheme::HmaSmp, Scheme::DpaMrc, Scheme::DpaZf, Scheme::FchpAct];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::HmaFp => "HMA-FP",
            Scheme::HmaSmp => "HMA-SMP",
            Scheme::DpaMrc => "DPA-MRC",
            Scheme::DpaZf => "DPA-ZF",
            Scheme::FchpAct => "FCHP-ACT",
        }
    }

    pub fn architecture(self) -> Architecture {
        match self {
            Scheme::HmaFp | Scheme::HmaSmp => Architecture::Hma,
            Scheme::DpaMrc | Scheme::DpaZf => Architecture::Dpa,
            Scheme::FchpAct => Architecture::FchpActive,
        }
    }

    fn uses_metasurface(self) -> bool {
        self.architecture() == Architecture::Hma
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace('_', "-");
        Scheme::ALL
            .into_iter()
            .find(|a| a.label() == key)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown architecture `{}`", s.trim())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSource {
    Synthetic,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub fc_ghz: f64,
    pub bandwidth_hz: f64,
    /// Aperture side lengths in free-space wavelengths.
    pub aperture_z: f64,
    pub aperture_x: f64,
    /// Unit-cell pitch in wavelengths.
    pub cell_pitch: f64,
    /// Surface to dipole-array separation in wavelengths.
    pub d_sep: f64,
    pub k_users: usize,
    pub m_chains: usize,
    /// dBm/m²: start, stop, step.
    pub p_t_sweep: (f64, f64, f64),
    pub n_drops: usize,
    pub n_channels_per_drop: usize,
    pub seed: u64,
    pub architectures: Vec<Scheme>,
    pub fp: FpOptions,
    pub t_hms_loss: f64,
    pub channel_source: ChannelSource,
    pub kronecker_no_sqrt: bool,
    pub temp_env: f64,
    pub temp_bs: f64,
    pub cell_radius: f64,
    pub exclusion_radius: f64,
    pub catalog: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    /// Single-user setup: 4λ × 4λ aperture, λ/4 cells, one RF chain.
    fn default() -> Self {
        Self {
            fc_ghz: 3.0,
            bandwidth_hz: 20e6,
            aperture_z: 4.0,
            aperture_x: 4.0,
            cell_pitch: 0.25,
            d_sep: 1.0,
            k_users: 1,
            m_chains: 1,
            p_t_sweep: (0.0, 40.0, 10.0),
            n_drops: 10,
            n_channels_per_drop: 100,
            seed: 1,
            architectures: Scheme::ALL.to_vec(),
            fp: FpOptions::default(),
            t_hms_loss: 0.7,
            channel_source: ChannelSource::Synthetic,
            kronecker_no_sqrt: false,
            temp_env: 290.0,
            temp_bs: 290.0,
            cell_radius: CELL_RADIUS,
            exclusion_radius: EXCLUSION_RADIUS,
            catalog: None,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse::<T>().map_err(|_| Error::Parse {
        line,
        msg: format!("bad value `{value}` for `{key}`"),
    })
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Parse {
            line,
            msg: format!("bad boolean `{value}` for `{key}`"),
        }),
    }
}

impl ScenarioConfig {
    /// Parse a config file body. Keys not present keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected `key = value`, got `{body}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            match key {
                "fc_ghz" => cfg.fc_ghz = parse_value(key, value, line)?,
                "bandwidth_hz" => cfg.bandwidth_hz = parse_value(key, value, line)?,
                "aperture_z" => cfg.aperture_z = parse_value(key, value, line)?,
                "aperture_x" => cfg.aperture_x = parse_value(key, value, line)?,
                "cell_pitch" => cfg.cell_pitch = parse_value(key, value, line)?,
                "d_sep" => cfg.d_sep = parse_value(key, value, line)?,
                "k_users" => cfg.k_users = parse_value(key, value, line)?,
                "m_chains" => cfg.m_chains = parse_value(key, value, line)?,
                "p_t_sweep_dbm_per_m2" => {
                    let parts = value
                        .split(',')
                        .map(|v| parse_value::<f64>(key, v.trim(), line))
                        .collect::<Result<Vec<_>>>()?;
                    cfg.p_t_sweep = match parts[..] {
                        [single] => (single, single, 1.0),
                        [start, stop, step] => (start, stop, step),
                        _ => {
                            return Err(Error::Parse {
                                line,
                                msg: "sweep needs `start, stop, step` or a single value".into(),
                            })
                        }
                    };
                }
                "n_drops" => cfg.n_drops = parse_value(key, value, line)?,
                "n_channels_per_drop" => cfg.n_channels_per_drop = parse_value(key, value, line)?,
                "seed" => cfg.seed = parse_value(key, value, line)?,
                "architectures" => {
                    cfg.architectures = value
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| {
                            s.parse::<Scheme>().map_err(|e| Error::Parse {
                                line,
                                msg: e.to_string(),
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                }
                "fp_max_outer" => cfg.fp.max_outer = parse_value(key, value, line)?,
                "fp_inner_first" => cfg.fp.inner_first = parse_value(key, value, line)?,
                "fp_inner_rest" => cfg.fp.inner_rest = parse_value(key, value, line)?,
                "fp_tol" => cfg.fp.tol = parse_value(key, value, line)?,
                "t_hms_loss" => cfg.t_hms_loss = parse_value(key, value, line)?,
                "channel_source" => {
                    cfg.channel_source = if value.eq_ignore_ascii_case("synthetic") {
                        ChannelSource::Synthetic
                    } else {
                        ChannelSource::File(PathBuf::from(value))
                    }
                }
                "kronecker_no_sqrt" => cfg.kronecker_no_sqrt = parse_bool(key, value, line)?,
                "temp_env" => cfg.temp_env = parse_value(key, value, line)?,
                "temp_bs" => cfg.temp_bs = parse_value(key, value, line)?,
                "cell_radius" => cfg.cell_radius = parse_value(key, value, line)?,
                "exclusion_radius" => cfg.exclusion_radius = parse_value(key, value, line)?,
                "catalog" => cfg.catalog = Some(PathBuf::from(value)),
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        // relative paths inside the file are taken relative to it
        let base = path.parent().unwrap_or(Path::new("."));
        if let ChannelSource::File(p) = &cfg.channel_source {
            if p.is_relative() {
                cfg.channel_source = ChannelSource::File(base.join(p));
            }
        }
        if let Some(p) = &cfg.catalog {
            if p.is_relative() {
                cfg.catalog = Some(base.join(p));
            }
        }
        Ok(cfg)
    }

    /// Transmit power sweep in dBm/m².
    pub fn sweep_points(&self) -> Vec<f64> {
        let (start, stop, step) = self.p_t_sweep;
        if !(step > 0.0) || stop < start {
            return Vec::new();
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| start + i as f64 * step).collect()
    }

    pub fn wavelength(&self) -> f64 {
        wavelength_for_ghz(self.fc_ghz)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let positive = [
            ("fc_ghz", self.fc_ghz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("aperture_z", self.aperture_z),
            ("aperture_x", self.aperture_x),
            ("cell_pitch", self.cell_pitch),
            ("d_sep", self.d_sep),
            ("temp_env", self.temp_env),
            ("temp_bs", self.temp_bs),
            ("fp_tol", self.fp.tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.t_hms_loss > 0.0 && self.t_hms_loss <= 1.0) {
            return bad(format!("t_hms_loss must be in (0,1], got {}", self.t_hms_loss));
        }
        if self.sweep_points().is_empty() {
            return bad(format!("empty transmit power sweep {:?}", self.p_t_sweep));
        }
        if self.n_drops == 0 || self.n_channels_per_drop == 0 {
            return bad("n_drops and n_channels_per_drop must be at least 1".into());
        }
        if self.k_users == 0 || self.m_chains == 0 {
            return bad("k_users and m_chains must be at least 1".into());
        }
        if self.architectures.is_empty() {
            return bad("no architectures selected".into());
        }
        if !(self.exclusion_radius >= 0.0 && self.exclusion_radius < self.cell_radius) {
            return bad("exclusion_radius must lie in [0, cell_radius)".into());
        }
        for &s in &self.architectures {
            match s {
                Scheme::HmaFp | Scheme::FchpAct if self.m_chains != self.k_users => {
                    return bad(format!("{s} needs m_chains = k_users"));
                }
                Scheme::HmaSmp if self.k_users != 1 || self.m_chains != 1 => {
                    return bad(format!("{s} is single-user: needs k_users = m_chains = 1"));
                }
                Scheme::DpaMrc if self.k_users != 1 => {
                    return bad(format!("{s} is single-user: needs k_users = 1"));
                }
                _ => {}
            }
        }
        let layouts = Layouts::build(self)?;
        if layouts.hma.n_elements() > layouts.hma.n_cells() {
            return bad("more RF chains than unit-cells".into());
        }
        if self.k_users > layouts.patch.n_cells() {
            return bad(format!(
                "{} users exceed the {} patches of the digital array",
                self.k_users,
                layouts.patch.n_cells()
            ));
        }
        if let Some(p) = &self.catalog {
            DeviceCatalog::load(p)?;
        }
        if let ChannelSource::File(p) = &self.channel_source {
            let chans = import_channels(p)?;
            check_imported(self, &layouts, &chans)?;
        }
        Ok(())
    }
}

struct Layouts {
    hma: Arc<ArrayLayout>,
    patch: Arc<ArrayLayout>,
}

impl Layouts {
    fn build(cfg: &ScenarioConfig) -> Result<Self> {
        let lam = cfg.wavelength();
        let hma = build_planar_layout(&PlanarSpec {
            aperture_z: cfg.aperture_z * lam,
            aperture_x: cfg.aperture_x * lam,
            cell_pitch: cfg.cell_pitch * lam,
            dpa_rows: 1,
            dpa_cols: cfg.m_chains,
            d_sep: cfg.d_sep * lam,
            wavelength: lam,
        })?;
        let patch = patch_array_layout(cfg.aperture_z * lam, cfg.aperture_x * lam, lam)?;
        Ok(Self {
            hma: Arc::new(hma),
            patch: Arc::new(patch),
        })
    }

    fn for_scheme(&self, s: Scheme) -> &Arc<ArrayLayout> {
        if s.uses_metasurface() {
            &self.hma
        } else {
            &self.patch
        }
    }
}

fn check_imported(cfg: &ScenarioConfig, layouts: &Layouts, chans: &[ChannelRealization]) -> Result<()> {
    if chans.is_empty() {
        return Err(Error::InvalidConfig("channel file holds no realizations".into()));
    }
    for (i, c) in chans.iter().enumerate() {
        if c.n_users() != cfg.k_users {
            return Err(Error::InvalidConfig(format!(
                "realization {i} has {} users, config says {}",
                c.n_users(),
                cfg.k_users
            )));
        }
        for &s in &cfg.architectures {
            let n = layouts.for_scheme(s).n_cells();
            if c.n_rx() != n {
                return Err(Error::InvalidConfig(format!(
                    "realization {i} has {} rows but {s} has {n} elements",
                    c.n_rx()
                )));
            }
        }
    }
    Ok(())
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent seed for one random stream of one trial.
pub fn trial_seed(seed: u64, drop: u64, channel: u64, stream: u64) -> u64 {
    mix(mix(mix(mix(seed) ^ drop) ^ channel) ^ stream)
}

const STREAM_DROP: u64 = 1;
const STREAM_HMA: u64 = 2;
const STREAM_PATCH: u64 = 3;
const STREAM_FP: u64 = 4;

/// Channels seen by the two array types in one trial.
struct TrialChannels {
    hma: Option<ChannelRealization>,
    patch: Option<ChannelRealization>,
    fp_seed: u64,
}

struct Prepared {
    cfg: ScenarioConfig,
    layouts: Layouts,
    catalog: DeviceCatalog,
    hma_noise: NoiseModel,
    patch_noise: NoiseModel,
    blocks: BlockFactors,
    /// User positions of every synthetic drop.
    drops: Vec<Vec<[f64; 2]>>,
    imported: Option<Vec<ChannelRealization>>,
    hma_model: Option<ChannelModel>,
    patch_model: Option<ChannelModel>,
    mean_beta: f64,
}

impl Prepared {
    fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let layouts = Layouts::build(cfg)?;
        let catalog = match &cfg.catalog {
            Some(p) => DeviceCatalog::load(p)?,
            None => DeviceCatalog::default(),
        };
        let lam = cfg.wavelength();
        let stages = catalog.rf_chain_stages()?;
        let hma_noise = NoiseModel::new(
            layouts.hma.unit_cell_area,
            lam,
            cfg.bandwidth_hz,
            cfg.temp_env,
            cfg.temp_bs,
            &stages,
        )?;
        let patch_noise = NoiseModel::new(
            layouts.patch.unit_cell_area,
            lam,
            cfg.bandwidth_hz,
            cfg.temp_env,
            cfg.temp_bs,
            &stages,
        )?;
        let blocks = block_noise_factors(
            catalog.stage(device::PS_ACTIVE)?,
            catalog.stage(device::WILKINSON)?,
            layouts.patch.n_cells(),
            cfg.m_chains,
            &stages,
        )?;

        let (drops, imported, hma_model, patch_model, mean_beta) = match &cfg.channel_source {
            ChannelSource::Synthetic => {
                let drops = (0..cfg.n_drops as u64)
                    .map(|d| {
                        drop_users(
                            cfg.k_users,
                            cfg.cell_radius,
                            cfg.exclusion_radius,
                            trial_seed(cfg.seed, d, 0, STREAM_DROP),
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                let needs_hma = cfg.architectures.iter().any(|s| s.uses_metasurface());
                let needs_patch = cfg.architectures.iter().any(|s| !s.uses_metasurface());
                let hma_model = needs_hma
                    .then(|| ChannelModel::new(&layouts.hma, cfg.fc_ghz, cfg.kronecker_no_sqrt))
                    .transpose()?;
                let patch_model = needs_patch
                    .then(|| ChannelModel::new(&layouts.patch, cfg.fc_ghz, cfg.kronecker_no_sqrt))
                    .transpose()?;
                let mut betas = Vec::new();
                for users in &drops {
                    for u in users {
                        betas.push(crate::channel::path_loss(u[0].hypot(u[1]), cfg.fc_ghz)?);
                    }
                }
                let mean = betas.iter().sum::<f64>() / betas.len() as f64;
                (drops, None, hma_model, patch_model, mean)
            }
            ChannelSource::File(path) => {
                let chans = import_channels(path)?;
                check_imported(cfg, &layouts, &chans)?;
                let layout = if cfg.architectures.iter().any(|s| s.uses_metasurface()) {
                    &layouts.hma
                } else {
                    &layouts.patch
                };
                let sigma = ChannelModel::new(layout, cfg.fc_ghz, false)?.sigma_rx;
                let chans = chans
                    .into_iter()
                    .map(|c| c.with_correlation(sigma.clone()))
                    .collect::<Result<Vec<_>>>()?;
                let n_betas: usize = chans.iter().map(|c| c.beta.len()).sum();
                let mean = chans.iter().flat_map(|c| c.beta.iter()).sum::<f64>() / n_betas as f64;
                (Vec::new(), Some(chans), None, None, mean)
            }
        };

        Ok(Self {
            cfg: cfg.clone(),
            layouts,
            catalog,
            hma_noise,
            patch_noise,
            blocks,
            drops,
            imported,
            hma_model,
            patch_model,
            mean_beta,
        })
    }

    fn n_trials(&self) -> usize {
        match &self.imported {
            Some(c) => c.len(),
            None => self.cfg.n_drops * self.cfg.n_channels_per_drop,
        }
    }

    fn channels(&self, trial: usize) -> Result<TrialChannels> {
        if let Some(chans) = &self.imported {
            let c = chans[trial].clone();
            return Ok(TrialChannels {
                hma: Some(c.clone()),
                patch: Some(c),
                fp_seed: trial_seed(self.cfg.seed, 0, trial as u64, STREAM_FP),
            });
        }
        let per = self.cfg.n_channels_per_drop;
        let (d, c) = ((trial / per) as u64, (trial % per) as u64);
        let users = &self.drops[d as usize];
        let hma = self
            .hma_model
            .as_ref()
            .map(|m| m.draw(users, trial_seed(self.cfg.seed, d, c, STREAM_HMA)))
            .transpose()?;
        let patch = self
            .patch_model
            .as_ref()
            .map(|m| m.draw(users, trial_seed(self.cfg.seed, d, c, STREAM_PATCH)))
            .transpose()?;
        Ok(TrialChannels {
            hma,
            patch,
            fp_seed: trial_seed(self.cfg.seed, d, c, STREAM_FP),
        })
    }

    fn rate(&self, scheme: Scheme, chans: &TrialChannels, p_t: f64) -> Result<f64> {
        let missing = || Error::InvalidConfig(format!("no channel drawn for {scheme}"));
        match scheme {
            Scheme::HmaFp | Scheme::HmaSmp => {
                let chan = chans.hma.as_ref().ok_or_else(missing)?;
                let hma = HmaModel::new(self.layouts.hma.clone(), self.cfg.t_hms_loss)?;
                if scheme == Scheme::HmaSmp {
                    return Ok(smp_solution(&hma, chan, &self.hma_noise, p_t)?.sum_rate);
                }
                let opts = FpOptions {
                    seed: chans.fp_seed,
                    ..self.cfg.fp.clone()
                };
                Ok(solve_multiuser(&hma, chan, &self.hma_noise, p_t, &opts)?.sum_rate)
            }
            Scheme::DpaMrc | Scheme::DpaZf | Scheme::FchpAct => {
                let chan = chans.patch.as_ref().ok_or_else(missing)?;
                let a_eff = self.layouts.patch.unit_cell_area;
                let link = PatchLink::new(p_t, a_eff, PATCH_EFFICIENCY, &self.patch_noise)?;
                match scheme {
                    Scheme::DpaMrc => Ok(dpa_mrc(chan, &link)?.rate),
                    Scheme::DpaZf => Ok(dpa_zf(chan, &link)?.rate),
                    _ => {
                        let rule = if self.cfg.k_users == 1 { AnalogRule::Mrc } else { AnalogRule::Zf };
                        Ok(fchp_active(chan, &link, self.blocks, rule, self.cfg.bandwidth_hz, self.cfg.temp_bs)?.rate)
                    }
                }
            }
        }
    }

    fn power(&self, scheme: Scheme, p_t: f64) -> Result<PowerBreakdown> {
        let layout = self.layouts.for_scheme(scheme);
        let n = layout.n_cells();
        let arch = scheme.architecture();
        let dims = Dims::for_arch(arch, n, self.cfg.m_chains);
        let per_chain = n as f64 / dims.m as f64;
        let lna_in = lna_input_power(p_t, self.mean_beta, layout.unit_cell_area, per_chain);
        architecture_power(arch, dims, &self.catalog, lna_in)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub arch: String,
    pub p_t_dbm: f64,
    pub mean_rate: f64,
    pub rate_ci95: f64,
    pub mean_ee: f64,
    pub power_w: f64,
    pub n_trials: usize,
    pub failures: usize,
}

impl ResultRow {
    pub fn flagged(&self) -> bool {
        self.failures as f64 > MAX_FAILURE_FRACTION * self.n_trials as f64
    }
}

fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

/// Run every (architecture, transmit power) pair over all trials. `jobs`
/// caps the worker count; `None` uses rayon's default.
pub fn run_experiment(cfg: &ScenarioConfig, jobs: Option<usize>) -> Result<Vec<ResultRow>> {
    let prep = Prepared::new(cfg)?;
    let sweep = cfg.sweep_points();
    let schemes = &cfg.architectures;

    // rates[trial][scheme][p_t]
    let work = || -> Vec<Vec<Vec<Option<f64>>>> {
        (0..prep.n_trials())
            .into_par_iter()
            .map(|trial| {
                let chans = prep.channels(trial);
                schemes
                    .iter()
                    .map(|&s| {
                        sweep
                            .iter()
                            .map(|&dbm| {
                                let chans = chans.as_ref().ok()?;
                                prep.rate(s, chans, dbm_to_watts(dbm)).ok().filter(|r| r.is_finite())
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    };
    let rates = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let mut rows = Vec::new();
    for (si, &s) in schemes.iter().enumerate() {
        for (pi, &dbm) in sweep.iter().enumerate() {
            let power = prep.power(s, dbm_to_watts(dbm))?;
            let ok: Vec<f64> = rates.iter().filter_map(|t| t[si][pi]).collect();
            let ee: Vec<f64> = ok.iter().map(|r| r / power.total_w).collect();
            let (mean_rate, ci) = mean_ci95(&ok);
            let (mean_ee, _) = mean_ci95(&ee);
            rows.push(ResultRow {
                arch: s.label().to_string(),
                p_t_dbm: dbm,
                mean_rate,
                rate_ci95: ci,
                mean_ee,
                power_w: power.total_w,
                n_trials: rates.len(),
                failures: rates.len() - ok.len(),
            });
        }
    }
    sort_rows(&mut rows);
    Ok(rows)
}

pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| a.arch.cmp(&b.arch).then(a.p_t_dbm.total_cmp(&b.p_t_dbm)));
}

/// `printf("%.9g")`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..9).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mant), sign, exp.abs())
    } else {
        trim(&format!("{:.*}", (8 - exp) as usize, x))
    }
}

/// CSV text of `rows`, sorted by architecture then transmit power.
pub fn format_csv(rows: &[ResultRow]) -> String {
    let mut rows = rows.to_vec();
    sort_rows(&mut rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in &rows {
        w.write_record([
            r.arch.clone(),
            format_sig9(r.p_t_dbm),
            format_sig9(r.mean_rate),
            format_sig9(r.rate_ci95),
            format_sig9(r.mean_ee),
            format_sig9(r.power_w),
            r.n_trials.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

pub fn emit_csv(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_csv(rows)).map_err(|e| Error::io(path, e))
}

/// Parse CSV produced by [`format_csv`]. Failure counts are not stored and
/// come back as zero.
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
            if rec.len() != CSV_HEADER.len() {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} fields, got {}", CSV_HEADER.len(), rec.len()),
                });
            }
            let f = |j: usize| parse_value::<f64>(CSV_HEADER[j], &rec[j], line);
            Ok(ResultRow {
                arch: rec[0].to_string(),
                p_t_dbm: f(1)?,
                mean_rate: f(2)?,
                rate_ci95: f(3)?,
                mean_ee: f(4)?,
                power_w: f(5)?,
                n_trials: parse_value(CSV_HEADER[6], &rec[6], line)?,
                failures: 0,
            })
        })
        .collect()
}
