//! Physical constants and power-unit conversions.

/// Speed of light used for every wavelength computation, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

/// `P_W = 10^((P_dBm - 30) / 10)`.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}
