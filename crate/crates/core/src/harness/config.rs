//! TOML run configuration.
//!
//! ```toml
//! [scenario]            # every key is required
//! carrier_hz = 28e9
//! length_m = 50.0
//! height_m = 10.0
//! rotation_deg = 0.0
//! n_antennas = 16
//! min_spacing_m = 0.005353571428571429
//! eta_eff = 1.4
//! feed_x_m = -25.0
//! user_r_m = 21.213203435596427
//! user_phi_deg = 225.0
//! target_r_m = 30.0
//! target_phi_deg = 60.0
//! tx_power_dbm = 70.0
//! noise_power_dbm = -105.0
//! rate_qos = 10.0
//! alpha_s = 1.0
//! power_model = "equal"  # or "proportional"
//!
//! [solver]              # optional, any subset of the penalty settings
//! rho_init = 100.0
//!
//! [run]                 # optional
//! scheme = "pass"       # pass | ula | fixed | semi
//! seed = 0
//! semi_range_m = 0.107
//!
//! [sweep]               # required by the sweep command
//! variable = "P_T_dBm"  # P_T_dBm | N | beta_deg | d_m
//! values = [50.0, 60.0, 70.0]
//! schemes = ["pass", "semi", "ula", "fixed"]
//! power_models = ["equal"]
//! series_variable = "d_m"       # optional second axis
//! series_values = [3.0, 5.0, 10.0]
//!
//! [oracle]              # optional, used by the oracle command
//! instances = 10
//! resolution_m = 0.02
//! ```
//!
//! Angles are in degrees and powers in dBm; both are converted on load.

use serde::Deserialize;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{Polar, PowerModel, Scenario};
use crate::optimizer::PenaltyConfig;
use crate::units::dbm_to_watts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Pass,
    Ula,
    Fixed,
    Semi,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Pass, Scheme::Semi, Scheme::Ula, Scheme::Fixed];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Pass => "pass",
            Scheme::Ula => "ula",
            Scheme::Fixed => "fixed",
            Scheme::Semi => "semi",
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pass" => Ok(Scheme::Pass),
            "ula" => Ok(Scheme::Ula),
            "fixed" => Ok(Scheme::Fixed),
            "semi" => Ok(Scheme::Semi),
            other => Err(Error::Config {
                line: None,
                message: format!("unknown scheme `{other}` (expected pass, ula, fixed or semi)"),
            }),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Quantity varied along a sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    TxPowerDbm,
    Antennas,
    RotationDeg,
    HeightM,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::TxPowerDbm => "P_T_dBm",
            SweepVariable::Antennas => "N",
            SweepVariable::RotationDeg => "beta_deg",
            SweepVariable::HeightM => "d_m",
        }
    }

    /// Returns the scenario with this quantity set to `value`.
    pub fn apply(self, scn: &Scenario, value: f64) -> Result<Scenario> {
        let mut out = scn.clone();
        match self {
            SweepVariable::TxPowerDbm => out.tx_power = dbm_to_watts(value),
            SweepVariable::Antennas => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::Domain(format!(
                        "antenna count {value} is not a positive integer"
                    )));
                }
                out.n_antennas = value as usize;
            }
            SweepVariable::RotationDeg => out.rotation = value.to_radians(),
            SweepVariable::HeightM => out.height = value,
        }
        Ok(out)
    }
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "P_T_dBm" => Ok(SweepVariable::TxPowerDbm),
            "N" => Ok(SweepVariable::Antennas),
            "beta_deg" => Ok(SweepVariable::RotationDeg),
            "d_m" => Ok(SweepVariable::HeightM),
            other => Err(Error::Config {
                line: None,
                message: format!("unknown sweep variable `{other}` (expected P_T_dBm, N, beta_deg or d_m)"),
            }),
        }
    }
}

/// One sweep: every value of `variable` (and of the optional series axis)
/// crossed with every power model and scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub power_models: Vec<PowerModel>,
    pub series: Option<(SweepVariable, Vec<f64>)>,
    pub seed: u64,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        let sorted = |v: &[f64]| !v.is_empty() && v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| x.is_finite());
        if !sorted(&self.values) {
            return Err(config_err(
                "sweep values must be nonempty, finite and strictly increasing",
            ));
        }
        if let Some((_, vals)) = &self.series {
            if !sorted(vals) {
                return Err(config_err(
                    "series values must be nonempty, finite and strictly increasing",
                ));
            }
        }
        if self.schemes.is_empty() || self.power_models.is_empty() {
            return Err(config_err("sweep needs at least one scheme and one power model"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePlan {
    /// Random user and target placements; zero compares the configured scenario only.
    pub instances: usize,
    pub resolution: f64,
}

/// Everything a command needs, in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub solver: PenaltyConfig,
    pub scheme: Scheme,
    pub seed: u64,
    pub semi_range: Option<f64>,
    pub sweep: Option<SweepPlan>,
    pub oracle: OraclePlan,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileScenario {
    carrier_hz: f64,
    length_m: f64,
    height_m: f64,
    rotation_deg: f64,
    n_antennas: usize,
    min_spacing_m: f64,
    eta_eff: f64,
    feed_x_m: f64,
    user_r_m: f64,
    user_phi_deg: f64,
    target_r_m: f64,
    target_phi_deg: f64,
    tx_power_dbm: f64,
    noise_power_dbm: f64,
    rate_qos: f64,
    alpha_s: f64,
    power_model: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileRun {
    scheme: Option<String>,
    seed: Option<u64>,
    semi_range_m: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSweep {
    variable: String,
    values: Vec<f64>,
    schemes: Vec<String>,
    #[serde(default)]
    power_models: Option<Vec<String>>,
    series_variable: Option<String>,
    series_values: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileOracle {
    instances: Option<usize>,
    resolution_m: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    scenario: FileScenario,
    #[serde(default)]
    solver: PenaltyConfig,
    #[serde(default)]
    run: FileRun,
    sweep: Option<FileSweep>,
    #[serde(default)]
    oracle: FileOracle,
}

fn config_err(message: impl Into<String>) -> Error {
    Error::Config {
        line: None,
        message: message.into(),
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl FileScenario {
    fn into_scenario(self) -> Result<Scenario> {
        let scn = Scenario {
            carrier_hz: self.carrier_hz,
            length: self.length_m,
            height: self.height_m,
            rotation: self.rotation_deg.to_radians(),
            n_antennas: self.n_antennas,
            min_spacing: self.min_spacing_m,
            eta_eff: self.eta_eff,
            feed_x: self.feed_x_m,
            user: Polar::new(self.user_r_m, self.user_phi_deg.to_radians()),
            target: Polar::new(self.target_r_m, self.target_phi_deg.to_radians()),
            tx_power: dbm_to_watts(self.tx_power_dbm),
            noise_power: dbm_to_watts(self.noise_power_dbm),
            rate_qos: self.rate_qos,
            alpha_s: self.alpha_s,
            power_model: self.power_model.parse().map_err(|e: Error| config_err(e.to_string()))?,
        };
        scn.validate()
            .map_err(|e| config_err(format!("invalid scenario: {e}")))?;
        Ok(scn)
    }
}

/// Parses a configuration from TOML text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let file: FileConfig = toml::from_str(text).map_err(|e| Error::Config {
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    let scenario = file.scenario.into_scenario()?;
    file.solver
        .validate()
        .map_err(|e| config_err(format!("invalid solver settings: {e}")))?;
    let scheme = match &file.run.scheme {
        Some(s) => s.parse()?,
        None => Scheme::Pass,
    };
    let seed = file.run.seed.unwrap_or(0);
    let sweep = match file.sweep {
        None => None,
        Some(s) => {
            let series = match (s.series_variable, s.series_values) {
                (Some(v), Some(vals)) => Some((v.parse()?, vals)),
                (None, None) => None,
                _ => return Err(config_err("series_variable and series_values must be given together")),
            };
            let power_models = match s.power_models {
                Some(list) => list
                    .iter()
                    .map(|m| m.parse().map_err(|e: Error| config_err(e.to_string())))
                    .collect::<Result<Vec<PowerModel>>>()?,
                None => vec![scenario.power_model],
            };
            let plan = SweepPlan {
                variable: s.variable.parse()?,
                values: s.values,
                schemes: s.schemes.iter().map(|x| x.parse()).collect::<Result<_>>()?,
                power_models,
                series,
                seed,
            };
            plan.validate()?;
            Some(plan)
        }
    };
    let oracle = OraclePlan {
        instances: file.oracle.instances.unwrap_or(0),
        resolution: file.oracle.resolution_m.unwrap_or(0.02),
    };
    if !(oracle.resolution > 0.0) {
        return Err(config_err("oracle resolution must be positive"));
    }
    if let Some(r) = file.run.semi_range_m {
        if !(r >= 0.0) {
            return Err(config_err("semi_range_m must be non-negative"));
        }
    }
    Ok(RunConfig {
        scenario,
        solver: file.solver,
        scheme,
        seed,
        semi_range: file.run.semi_range_m,
        sweep,
        oracle,
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}
