//! Scene geometry: the transmitting waveguide, the user and the target.
//!
//! The waveguide runs along the x-axis at height `d` above the x-o-y plane
//! and can be rotated about the z-axis by `rotation`. A pinching antenna is
//! described by its coordinate along the waveguide axis; user and target sit
//! in the ground plane and are given in polar form.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::units::{dbm_to_watts, SPEED_OF_LIGHT};

/// Slack used when checking coordinates against the waveguide ends.
const BOX_TOL: f64 = 1e-12;

/// How the radiated power is split across antennas along the waveguide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PowerModel {
    #[default]
    Equal,
    Proportional,
}

impl PowerModel {
    pub fn name(self) -> &'static str {
        match self {
            PowerModel::Equal => "equal",
            PowerModel::Proportional => "proportional",
        }
    }
}

impl std::str::FromStr for PowerModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "equal" => Ok(PowerModel::Equal),
            "proportional" => Ok(PowerModel::Proportional),
            other => domain(format!("unknown power model `{other}`")),
        }
    }
}

/// Ground-plane position relative to the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Polar {
    /// Distance from the origin, m.
    pub r: f64,
    /// Azimuth, rad.
    pub phi: f64,
}

impl Polar {
    pub fn new(r: f64, phi: f64) -> Self {
        Self { r, phi }
    }
}

/// Full physical configuration of one transmission design problem.
///
/// All quantities are SI and linear (watts, metres, radians).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Carrier frequency, Hz.
    pub carrier_hz: f64,
    /// Waveguide length, m.
    pub length: f64,
    /// Waveguide height above the ground plane, m.
    pub height: f64,
    /// Rotation of the waveguide about the z-axis, rad.
    pub rotation: f64,
    pub n_antennas: usize,
    /// Minimum spacing between adjacent antennas, m.
    pub min_spacing: f64,
    /// Effective refractive index of the dielectric waveguide.
    pub eta_eff: f64,
    /// Feed point coordinate along the waveguide axis, m.
    pub feed_x: f64,
    pub user: Polar,
    pub target: Polar,
    /// Transmit power, W.
    pub tx_power: f64,
    /// Noise power at the user, W.
    pub noise_power: f64,
    /// Rate requirement of the user, bits/s/Hz.
    pub rate_qos: f64,
    /// Total radiation coefficient in (0, 1].
    pub alpha_s: f64,
    pub power_model: PowerModel,
}

impl Default for Scenario {
    /// The default evaluation setup: 28 GHz, a 50 m waveguide at 10 m,
    /// 16 antennas, target at (30 m, 60 deg), user at (15√2 m, 225 deg),
    /// 70 dBm transmit power and -105 dBm noise.
    fn default() -> Self {
        let carrier_hz = 28e9;
        let length = 50.0;
        let lambda = SPEED_OF_LIGHT / carrier_hz;
        Self {
            carrier_hz,
            length,
            height: 10.0,
            rotation: 0.0,
            n_antennas: 16,
            min_spacing: lambda / 2.0,
            eta_eff: 1.4,
            feed_x: -length / 2.0,
            user: Polar::new(15.0 * 2f64.sqrt(), 5.0 * PI / 4.0),
            target: Polar::new(30.0, PI / 3.0),
            tx_power: dbm_to_watts(70.0),
            noise_power: dbm_to_watts(-105.0),
            rate_qos: 10.0,
            alpha_s: 1.0,
            power_model: PowerModel::Equal,
        }
    }
}

impl Scenario {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn half_length(&self) -> f64 {
        self.length / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.carrier_hz,
            self.length,
            self.height,
            self.rotation,
            self.min_spacing,
            self.eta_eff,
            self.feed_x,
            self.user.r,
            self.user.phi,
            self.target.r,
            self.target.phi,
            self.tx_power,
            self.noise_power,
            self.rate_qos,
            self.alpha_s,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return domain("scenario contains a non-finite value");
        }
        if self.carrier_hz <= 0.0 {
            return domain("carrier frequency must be positive");
        }
        if self.length <= 0.0 {
            return domain("waveguide length must be positive");
        }
        if self.height < 0.0 {
            return domain("waveguide height must be non-negative");
        }
        if self.n_antennas == 0 {
            return domain("at least one antenna is required");
        }
        if self.min_spacing < 0.0 {
            return domain("minimum spacing must be non-negative");
        }
        if self.eta_eff <= 0.0 {
            return domain("effective refractive index must be positive");
        }
        if self.user.r <= 0.0 || self.target.r <= 0.0 {
            return domain("user and target distances must be positive");
        }
        if self.tx_power <= 0.0 || self.noise_power <= 0.0 {
            return domain("transmit and noise power must be positive");
        }
        if self.rate_qos < 0.0 {
            return domain("rate requirement must be non-negative");
        }
        if !(self.alpha_s > 0.0 && self.alpha_s <= 1.0) {
            return domain("radiation coefficient must lie in (0, 1]");
        }
        if (self.n_antennas - 1) as f64 * self.min_spacing > self.length + BOX_TOL {
            return Err(Error::Infeasible(format!(
                "{} antennas at spacing {} m do not fit on a {} m waveguide",
                self.n_antennas, self.min_spacing, self.length
            )));
        }
        Ok(())
    }
}

/// Cartesian point, m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

fn check_on_waveguide(scn: &Scenario, x: f64) -> Result<()> {
    if !x.is_finite() || x.abs() > scn.half_length() + BOX_TOL {
        return domain(format!(
            "coordinate {x} lies outside the waveguide [-{h}, {h}]",
            h = scn.half_length()
        ));
    }
    Ok(())
}

/// Position of an antenna at axial coordinate `x` on the (rotated) waveguide.
pub fn antenna_point(scn: &Scenario, x: f64) -> Result<Point3> {
    check_on_waveguide(scn, x)?;
    Ok(axis_point(scn, x))
}

/// Point on the waveguide axis without the range check; the ULA baseline
/// uses this for elements mounted at the base station.
pub(crate) fn axis_point(scn: &Scenario, x: f64) -> Point3 {
    let (s, c) = scn.rotation.sin_cos();
    Point3::new(x * c, x * s, scn.height)
}

/// Ground-plane point at polar coordinates `(r, phi)`.
pub fn target_point(r: f64, phi: f64) -> Result<Point3> {
    if !(r > 0.0) || !phi.is_finite() {
        return domain(format!("polar distance must be positive, got {r}"));
    }
    let (s, c) = phi.sin_cos();
    Ok(Point3::new(r * c, r * s, 0.0))
}

/// Distance from the antenna at `x` to the ground point `(r, phi)`.
pub fn nf_distance(scn: &Scenario, x: f64, r: f64, phi: f64) -> Result<f64> {
    check_on_waveguide(scn, x)?;
    if !(r > 0.0) {
        return domain(format!("polar distance must be positive, got {r}"));
    }
    Ok(distance_to(scn, x, Polar::new(r, phi)))
}

/// Unchecked distance used on hot paths; callers guarantee the domain.
#[inline]
pub(crate) fn distance_to(scn: &Scenario, x: f64, p: Polar) -> f64 {
    let d2 = scn.height * scn.height;
    if scn.rotation == 0.0 {
        (p.r * p.r - 2.0 * p.r * p.phi.cos() * x + x * x + d2).sqrt()
    } else {
        // Along-axis offset and perpendicular ground offset in the rotated frame.
        let along = p.r * (p.phi - scn.rotation).cos() - x;
        let across = p.r * (p.phi - scn.rotation).sin();
        (along * along + across * across + d2).sqrt()
    }
}

/// Lower bound on the distance from any point of the waveguide line to the
/// ground point `(r, phi)`; equals `sqrt((r sin phi)^2 + d^2)` when unrotated.
pub fn min_distance(scn: &Scenario, r: f64, phi: f64) -> f64 {
    let across = r * (phi - scn.rotation).sin();
    (across * across + scn.height * scn.height).sqrt()
}

/// Axial coordinate of the point on the waveguide line closest to `p`.
pub fn closest_axial(scn: &Scenario, p: Polar) -> f64 {
    p.r * (p.phi - scn.rotation).cos()
}

/// Ordered antenna coordinates along the waveguide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PinchLayout(Vec<f64>);

impl PinchLayout {
    /// Builds a layout and checks it against the scenario's feasible set.
    pub fn new(scn: &Scenario, xs: Vec<f64>) -> Result<Self> {
        let layout = Self(xs);
        layout.check(scn)?;
        Ok(layout)
    }

    pub fn positions(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn set(&mut self, n: usize, x: f64) {
        self.0[n] = x;
    }

    /// Box bounds exact, spacing to within `1e-12`.
    pub fn check(&self, scn: &Scenario) -> Result<()> {
        if self.0.len() != scn.n_antennas {
            return domain(format!(
                "layout has {} antennas, scenario expects {}",
                self.0.len(),
                scn.n_antennas
            ));
        }
        let h = scn.half_length();
        for (n, &x) in self.0.iter().enumerate() {
            if !x.is_finite() || x < -h || x > h {
                return domain(format!("antenna {n} at {x} lies outside [-{h}, {h}]"));
            }
        }
        for (n, w) in self.0.windows(2).enumerate() {
            if w[1] - w[0] < scn.min_spacing - 1e-12 {
                return domain(format!(
                    "antennas {n} and {} are {} m apart, minimum is {} m",
                    n + 1,
                    w[1] - w[0],
                    scn.min_spacing
                ));
            }
        }
        Ok(())
    }

    pub fn is_feasible(&self, scn: &Scenario) -> bool {
        self.check(scn).is_ok()
    }
}
