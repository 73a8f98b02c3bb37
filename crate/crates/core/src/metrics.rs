//! Communication rate and sensing illumination power in closed form.

use serde::{Deserialize, Serialize};

use crate::channel::{eta_const, pinching_beamformer, ComplexVec};
use crate::error::Result;
use crate::geometry::{PinchLayout, Scenario};

/// Rate slack tolerated when deciding whether the QoS requirement holds.
pub const QOS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Achievable rate, bits/s/Hz.
    pub rate: f64,
    /// Illumination power at the target, W.
    pub illum_power: f64,
    pub qos_ok: bool,
    /// `rate - rate_qos`, bits/s/Hz.
    pub qos_margin: f64,
}

impl MetricReport {
    pub fn from_gains(scn: &Scenario, user_gain: f64, target_gain: f64) -> Self {
        let rate = (1.0 + scn.tx_power * user_gain / scn.noise_power).log2();
        let illum_power = scn.tx_power * target_gain;
        Self {
            rate,
            illum_power,
            qos_ok: rate >= scn.rate_qos - QOS_TOL,
            qos_margin: rate - scn.rate_qos,
        }
    }
}

/// `|eta_bar^H x|^2` for a beamformer `x`.
pub fn array_gain(scn: &Scenario, beam: &ComplexVec) -> f64 {
    eta_const(scn) * beam.sum().norm_sqr()
}

pub fn achievable_rate(scn: &Scenario, layout: &PinchLayout) -> Result<f64> {
    let w = pinching_beamformer(scn, layout, scn.user)?;
    let snr = scn.tx_power * array_gain(scn, &w) / scn.noise_power;
    Ok((1.0 + snr).log2())
}

pub fn illumination_power(scn: &Scenario, layout: &PinchLayout) -> Result<f64> {
    let v = pinching_beamformer(scn, layout, scn.target)?;
    Ok(scn.tx_power * array_gain(scn, &v))
}

/// `(2^R_qos - 1) / P_T`.
pub fn gamma_qos(scn: &Scenario) -> f64 {
    (2f64.powf(scn.rate_qos) - 1.0) / scn.tx_power
}

/// Minimum user array gain `|eta_bar^H w|^2` meeting the rate requirement.
pub fn qos_gain_floor(scn: &Scenario) -> f64 {
    gamma_qos(scn) * scn.noise_power
}

pub fn evaluate(scn: &Scenario, layout: &PinchLayout) -> Result<MetricReport> {
    let w = pinching_beamformer(scn, layout, scn.user)?;
    let v = pinching_beamformer(scn, layout, scn.target)?;
    Ok(MetricReport::from_gains(scn, array_gain(scn, &w), array_gain(scn, &v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::eta_vector;
    use crate::geometry::{nf_distance, PowerModel};
    use crate::units::dbm_to_watts;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn single(x: f64) -> (Scenario, PinchLayout) {
        let scn = Scenario {
            n_antennas: 1,
            ..Scenario::default()
        };
        let layout = PinchLayout::new(&scn, vec![x]).unwrap();
        (scn, layout)
    }

    #[test]
    fn unit_snr_is_one_bit() {
        let scn = Scenario::default();
        let m = MetricReport::from_gains(&scn, scn.noise_power / scn.tx_power, 0.0);
        assert_relative_eq!(m.rate, 1.0, max_relative = 1e-14);
        let off = Scenario {
            tx_power: 0.0,
            ..scn.clone()
        };
        assert_eq!(MetricReport::from_gains(&off, 1.0, 1.0).rate, 0.0);
    }

    #[test]
    fn single_antenna_rate_chain() {
        let (scn, layout) = single(15.0);
        let r = nf_distance(&scn, 15.0, scn.user.r, scn.user.phi).unwrap();
        assert_relative_eq!(r, 35.0, max_relative = 1e-14);
        // SNR = P_T eta / (r^2 sigma^2) with eta = (lambda / 4 pi)^2.
        let eta = (2.998e8 / 28e9 / (4.0 * std::f64::consts::PI)).powi(2);
        let snr = 1e4 * eta / (1225.0 * dbm_to_watts(-105.0));
        assert_relative_eq!(snr, 1.874_094_031_681e8, max_relative = 1e-9);
        let rate = achievable_rate(&scn, &layout).unwrap();
        assert_relative_eq!(rate, (1.0 + snr).log2(), max_relative = 1e-12);
        assert_relative_eq!(rate, 27.481_618_108, max_relative = 1e-9);
    }

    #[test]
    fn single_antenna_illumination() {
        let (scn, layout) = single(15.0);
        let ps = illumination_power(&scn, &layout).unwrap();
        assert_relative_eq!(ps, 1e4 * eta_const(&scn) / 775.0, max_relative = 1e-12);
        assert_relative_eq!(ps, 9.367_544_476_856e-6, max_relative = 1e-9);
        let doubled = Scenario {
            tx_power: 2.0 * scn.tx_power,
            ..scn.clone()
        };
        assert_relative_eq!(
            illumination_power(&doubled, &layout).unwrap(),
            2.0 * ps,
            max_relative = 1e-14
        );
    }

    #[test]
    fn coherent_equidistant_illumination() {
        // Antennas a whole guided wavelength apart, mirrored about the target
        // projection: equal distances and identical phases.
        let scn = Scenario {
            n_antennas: 2,
            power_model: PowerModel::Equal,
            ..Scenario::default()
        };
        let period = scn.wavelength() / scn.eta_eff;
        let layout = PinchLayout::new(&scn, vec![15.0 - period, 15.0 + period]).unwrap();
        let r = nf_distance(&scn, 15.0 + period, scn.target.r, scn.target.phi).unwrap();
        let expected = scn.tx_power * eta_const(&scn) * 2.0 * scn.alpha_s / (r * r);
        assert_relative_eq!(
            illumination_power(&scn, &layout).unwrap(),
            expected,
            max_relative = 1e-9
        );
    }

    #[test]
    fn gamma_examples() {
        let s = |rate_qos, tx_power| Scenario {
            rate_qos,
            tx_power,
            ..Scenario::default()
        };
        assert_eq!(gamma_qos(&s(1.0, 1.0)), 1.0);
        assert_relative_eq!(gamma_qos(&s(10.0, 1e4)), 0.1023, max_relative = 1e-12);
        assert_eq!(gamma_qos(&s(0.0, 1e4)), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn layout_strategy() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(0.01f64..4.0, 1..10).prop_map(|gaps| {
                let mut x = -24.9;
                gaps.into_iter()
                    .map(|g| {
                        x += g;
                        x
                    })
                    .collect()
            })
        }

        proptest! {
            #![proptest_config(crate::test_support::proptest_config(256))]

            #[test]
            fn qos_rate_trace_equivalence(xs in layout_strategy(), rq in 0.0f64..40.0) {
                let scn = Scenario { n_antennas: xs.len(), rate_qos: rq, ..Scenario::default() };
                let layout = PinchLayout::new(&scn, xs).unwrap();
                let rate = achievable_rate(&scn, &layout).unwrap();
                let w = pinching_beamformer(&scn, &layout, scn.user).unwrap();
                let gain = (eta_vector(&scn).adjoint() * &w)[0].norm_sqr();
                let floor = qos_gain_floor(&scn);
                // Skip draws sitting within floating-point noise of the boundary.
                let rel = (gain - floor).abs() / floor.max(1e-300);
                prop_assume!(rel > 1e-9);
                prop_assert_eq!(rate >= rq, gain >= floor);
            }

            #[test]
            fn illumination_phase_invariant(xs in layout_strategy(), phase in 0.0f64..6.3) {
                let scn = Scenario { n_antennas: xs.len(), ..Scenario::default() };
                let layout = PinchLayout::new(&scn, xs).unwrap();
                let v = pinching_beamformer(&scn, &layout, scn.target).unwrap();
                let rotated = v.map(|z| z * Complex64::from_polar(1.0, phase));
                let a = array_gain(&scn, &v);
                let b = array_gain(&scn, &rotated);
                prop_assert!((a - b).abs() <= 1e-12 * a);
            }

            #[test]
            fn rate_increases_with_power(xs in layout_strategy(), p in 1.0f64..1e5) {
                let scn = Scenario { n_antennas: xs.len(), tx_power: p, ..Scenario::default() };
                let layout = PinchLayout::new(&scn, xs).unwrap();
                let more = Scenario { tx_power: 1.5 * p, ..scn.clone() };
                prop_assert!(achievable_rate(&more, &layout).unwrap() > achievable_rate(&scn, &layout).unwrap());
            }
        }
    }
}
