//! Hardware power consumption of each receiver architecture.
//!
//! Device figures come from a [`DeviceCatalog`], which defaults to the
//! datasheet values below and can be loaded from a CSV file with header
//! `name,power_w,gain_db,nf_db` (empty or `-` for a missing gain / NF).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::channel::Stage;
use crate::{db_to_linear, Error, Result};

/// Power-added efficiency of the LNA.
pub const LNA_PAE: f64 = 0.12;

pub mod device {
    pub const FILTER: &str = "filter";
    pub const LNA: &str = "lna";
    pub const MIXER: &str = "mixer";
    pub const IQD: &str = "iqd";
    pub const AAF: &str = "aaf";
    pub const ADC_DRIVER: &str = "adc_driver";
    pub const ADC: &str = "adc";
    pub const OSC: &str = "osc";
    pub const CLOCK_DIST: &str = "clock_distribution";
    pub const PS_PASSIVE: &str = "ps_passive";
    pub const PS_ACTIVE: &str = "ps_active";
    pub const WILKINSON: &str = "wilkinson";
    pub const DAC: &str = "dac";
    pub const HMS_CTRL: &str = "hms_controller";
    pub const FPGA: &str = "fpga";
}

/// Receive chain order used for the noise cascade.
pub const RF_CHAIN_ORDER: [&str; 7] = [
    device::FILTER,
    device::LNA,
    device::MIXER,
    device::IQD,
    device::AAF,
    device::ADC_DRIVER,
    device::ADC,
];

#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub name: String,
    pub power_w: f64,
    pub gain_db: Option<f64>,
    pub nf_db: Option<f64>,
}

impl Device {
    fn new(name: &str, power_w: f64, gain_db: Option<f64>, nf_db: Option<f64>) -> Self {
        Self {
            name: name.to_string(),
            power_w,
            gain_db,
            nf_db,
        }
    }

    /// Noise stage of this device; a missing gain is taken as 0 dB and a
    /// missing noise figure as noiseless.
    pub fn stage(&self) -> Stage {
        Stage::from_db(self.gain_db.unwrap_or(0.0), self.nf_db.unwrap_or(0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceCatalog {
    devices: BTreeMap<String, Device>,
}

impl Default for DeviceCatalog {
    fn default() -> Self {
        use device::*;
        let rows = [
            Device::new(FILTER, 0.0, Some(-3.0), Some(3.0)),
            Device::new(LNA, 0.75, Some(15.0), Some(3.5)),
            Device::new(MIXER, 0.4, Some(-7.1), Some(8.0)),
            Device::new(IQD, 2.2, Some(0.0), Some(31.0)),
            Device::new(AAF, 0.01, Some(0.0), Some(0.0)),
            Device::new(ADC_DRIVER, 0.15, Some(20.0), Some(6.4)),
            Device::new(ADC, 0.725, None, Some(30.0)),
            Device::new(OSC, 0.02, None, None),
            Device::new(CLOCK_DIST, 0.08, None, None),
            Device::new(PS_PASSIVE, 0.0, Some(-5.0), Some(5.0)),
            Device::new(PS_ACTIVE, 0.625, Some(-4.5), Some(23.0)),
            Device::new(WILKINSON, 0.0, Some(-3.9), Some(3.9)),
            Device::new(DAC, 0.002, None, None),
            Device::new(HMS_CTRL, 0.0006, None, None),
            Device::new(FPGA, 0.1, None, None),
        ];
        Self::from_devices(rows)
    }
}

fn parse_opt(field: &str, line: usize, col: &str) -> Result<Option<f64>> {
    let f = field.trim();
    if f.is_empty() || f == "-" {
        return Ok(None);
    }
    f.parse::<f64>().map(Some).map_err(|_| Error::Parse {
        line,
        msg: format!("bad {col} `{f}`"),
    })
}

impl DeviceCatalog {
    pub fn from_devices(devices: impl IntoIterator<Item = Device>) -> Self {
        Self {
            devices: devices.into_iter().map(|d| (d.name.clone(), d)).collect(),
        }
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?;
        if headers.iter().collect::<Vec<_>>() != ["name", "power_w", "gain_db", "nf_db"] {
            return Err(Error::Parse {
                line: 1,
                msg: "expected header `name,power_w,gain_db,nf_db`".into(),
            });
        }
        let mut devices = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                msg: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let power = rec[1].parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("bad power_w `{}`", &rec[1]),
            })?;
            if !(power >= 0.0) {
                return Err(Error::Parse {
                    line,
                    msg: format!("negative power for `{}`", &rec[0]),
                });
            }
            devices.push(Device {
                name: rec[0].to_string(),
                power_w: power,
                gain_db: parse_opt(&rec[2], line, "gain_db")?,
                nf_db: parse_opt(&rec[3], line, "nf_db")?,
            });
        }
        Ok(Self::from_devices(devices))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record(["name", "power_w", "gain_db", "nf_db"]).expect("in-memory write");
        for d in self.devices.values() {
            w.write_record([d.name.clone(), d.power_w.to_string(), opt(d.gain_db), opt(d.nf_db)])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn get(&self, name: &str) -> Result<&Device> {
        self.devices.get(name).ok_or_else(|| Error::MissingDevice(name.to_string()))
    }

    pub fn power(&self, name: &str) -> Result<f64> {
        Ok(self.get(name)?.power_w)
    }

    /// Linear gain, 0 dB when the catalog has none.
    pub fn gain(&self, name: &str) -> Result<f64> {
        Ok(db_to_linear(self.get(name)?.gain_db.unwrap_or(0.0)))
    }

    pub fn stage(&self, name: &str) -> Result<Stage> {
        Ok(self.get(name)?.stage())
    }

    /// Noise stages of one receive chain, front to back.
    pub fn rf_chain_stages(&self) -> Result<Vec<Stage>> {
        RF_CHAIN_ORDER.iter().map(|n| self.stage(n)).collect()
    }
}

/// LNA consumption: the larger of its static draw and the power needed to
/// amplify `p_in` at the given power-added efficiency.
pub fn lna_power(p_in: f64, g_lna: f64, pae: f64, p_static: f64) -> f64 {
    p_static.max((g_lna - 1.0) / pae * p_in)
}

/// Signal power reaching one LNA, estimated from the mean user path gain.
pub fn lna_input_power(p_t: f64, mean_beta: f64, a_eff: f64, antennas_per_chain: f64) -> f64 {
    p_t * mean_beta * a_eff * antennas_per_chain
}

/// Consumption of `m` RF chains sharing one oscillator. I/Q branches double
/// the AAF, ADC driver and ADC.
pub fn rf_chain_power(m: usize, catalog: &DeviceCatalog, lna_input: f64) -> Result<f64> {
    use device::*;
    if m == 0 {
        return Err(Error::Domain("at least one RF chain required".into()));
    }
    let lna = lna_power(lna_input, catalog.gain(LNA)?, LNA_PAE, catalog.power(LNA)?);
    let per_chain = catalog.power(FILTER)?
        + lna
        + catalog.power(MIXER)?
        + catalog.power(IQD)?
        + 2.0 * (catalog.power(AAF)? + catalog.power(ADC_DRIVER)? + catalog.power(ADC)?)
        + catalog.power(CLOCK_DIST)?;
    Ok(catalog.power(OSC)? + m as f64 * per_chain)
}

/// DAC plus control line per unit-cell, and one control FPGA. Varactors draw
/// nothing.
pub fn metasurface_power(n_cells: usize, catalog: &DeviceCatalog) -> Result<f64> {
    use device::*;
    if n_cells == 0 {
        return Err(Error::Domain("metasurface needs at least one cell".into()));
    }
    Ok(n_cells as f64 * (catalog.power(DAC)? + catalog.power(HMS_CTRL)?) + catalog.power(FPGA)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Architecture {
    Hma,
    Dpa,
    FchpActive,
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::Hma => "HMA",
            Architecture::Dpa => "DPA",
            Architecture::FchpActive => "FCHP-ACT",
        })
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "HMA" => Ok(Architecture::Hma),
            "DPA" => Ok(Architecture::Dpa),
            "FCHP-ACT" | "FCHP_ACT" | "FCHP" => Ok(Architecture::FchpActive),
            other => Err(Error::InvalidConfig(format!("unknown architecture `{other}`"))),
        }
    }
}

/// Element counts: `n` antennas or unit-cells, `m` RF chains, `n_ps` phase shifters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub n_ps: usize,
}

impl Dims {
    pub fn for_arch(arch: Architecture, n: usize, m: usize) -> Self {
        match arch {
            Architecture::Hma => Dims { n, m, n_ps: 0 },
            Architecture::Dpa => Dims { n, m: n, n_ps: 0 },
            Architecture::FchpActive => Dims { n, m, n_ps: m * n },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBreakdown {
    pub rf_chains_w: f64,
    pub metasurface_w: f64,
    pub phase_shifters_w: f64,
    pub total_w: f64,
    /// Set by [`PowerBreakdown::with_rate`].
    pub energy_efficiency: Option<f64>,
}

impl PowerBreakdown {
    fn new(rf_chains_w: f64, metasurface_w: f64, phase_shifters_w: f64) -> Self {
        Self {
            rf_chains_w,
            metasurface_w,
            phase_shifters_w,
            total_w: rf_chains_w + metasurface_w + phase_shifters_w,
            energy_efficiency: None,
        }
    }

    pub fn with_rate(mut self, rate: f64) -> Result<Self> {
        self.energy_efficiency = Some(energy_efficiency(rate, &self)?);
        Ok(self)
    }
}

impl fmt::Display for PowerBreakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rf_chains_w      {:.6}", self.rf_chains_w)?;
        writeln!(f, "metasurface_w    {:.6}", self.metasurface_w)?;
        writeln!(f, "phase_shifters_w {:.6}", self.phase_shifters_w)?;
        write!(f, "total_w          {:.6}", self.total_w)?;
        if let Some(ee) = self.energy_efficiency {
            write!(f, "\nee_bps_hz_per_w  {ee:.6}")?;
        }
        Ok(())
    }
}

pub fn architecture_power(arch: Architecture, dims: Dims, catalog: &DeviceCatalog, lna_input: f64) -> Result<PowerBreakdown> {
    if dims.n == 0 || dims.m == 0 {
        return Err(Error::Domain(format!("empty dimensions {dims:?}")));
    }
    match arch {
        Architecture::Hma => {
            if dims.n_ps != 0 || dims.m > dims.n {
                return Err(Error::Domain(format!("inconsistent HMA dimensions {dims:?}")));
            }
            Ok(PowerBreakdown::new(
                rf_chain_power(dims.m, catalog, lna_input)?,
                metasurface_power(dims.n, catalog)?,
                0.0,
            ))
        }
        Architecture::Dpa => {
            if dims.m != dims.n || dims.n_ps != 0 {
                return Err(Error::Domain(format!("DPA needs one RF chain per antenna, got {dims:?}")));
            }
            Ok(PowerBreakdown::new(rf_chain_power(dims.n, catalog, lna_input)?, 0.0, 0.0))
        }
        Architecture::FchpActive => {
            if dims.n_ps != dims.m * dims.n {
                return Err(Error::Domain(format!(
                    "fully-connected hybrid needs M·N phase shifters, got {dims:?}"
                )));
            }
            Ok(PowerBreakdown::new(
                rf_chain_power(dims.m, catalog, lna_input)?,
                0.0,
                dims.n_ps as f64 * catalog.power(device::PS_ACTIVE)?,
            ))
        }
    }
}

pub fn energy_efficiency(rate: f64, breakdown: &PowerBreakdown) -> Result<f64> {
    if !(breakdown.total_w > 0.0) {
        return Err(Error::Domain(format!("total power must be positive, got {}", breakdown.total_w)));
    }
    Ok(rate / breakdown.total_w)
}
