//! Free-space, in-waveguide and pinching beamforming vectors.
//!
//! Phase convention: the free-space channel `h` is stored as the column
//! vector whose Hermitian transpose multiplies the in-waveguide channel, so
//! `h[n] = sqrt(eta) e^{+j 2 pi r_n / lambda} / r_n`. With
//! `g[n] = sqrt(alpha_n) e^{-j theta_n}` this gives
//! `h^H g = sum_n sqrt(eta) sqrt(alpha_n) e^{-j (2 pi r_n / lambda + theta_n)} / r_n`,
//! which is exactly `eta_bar^H w` for the pinching beamformer `w` below.

use nalgebra::DVector;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::geometry::{distance_to, nf_distance, PinchLayout, Polar, PowerModel, Scenario};
use crate::units::SPEED_OF_LIGHT;

pub type ComplexVec = DVector<Complex64>;

/// `eta = c^2 / (16 pi^2 f_c^2)`, m^2.
pub fn eta_const(scn: &Scenario) -> f64 {
    let f = scn.carrier_hz;
    SPEED_OF_LIGHT * SPEED_OF_LIGHT / (16.0 * PI * PI * f * f)
}

/// The constant vector `[sqrt(eta), ..., sqrt(eta)]^T`.
pub fn eta_vector(scn: &Scenario) -> ComplexVec {
    ComplexVec::from_element(scn.n_antennas, Complex64::new(eta_const(scn).sqrt(), 0.0))
}

/// Per-antenna radiated power coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAlloc {
    pub alphas: Vec<f64>,
}

impl PowerAlloc {
    pub fn total(&self) -> f64 {
        self.alphas.iter().sum()
    }

    pub fn sqrt(&self) -> Vec<f64> {
        self.alphas.iter().map(|a| a.sqrt()).collect()
    }
}

pub fn power_alloc(scn: &Scenario) -> PowerAlloc {
    alloc_coefficients(scn.power_model, scn.n_antennas, scn.alpha_s)
}

/// Equal model: `alpha_n = alpha_s / N`. Proportional model:
/// `alpha_n = delta^2 (1 - delta^2)^(n-1)` with `delta^2 = 1 - (1 - alpha_s)^(1/N)`.
pub fn alloc_coefficients(model: PowerModel, n: usize, alpha_s: f64) -> PowerAlloc {
    let alphas = match model {
        PowerModel::Equal => vec![alpha_s / n as f64; n],
        PowerModel::Proportional => {
            let delta2 = 1.0 - (1.0 - alpha_s).powf(1.0 / n as f64);
            let keep = 1.0 - delta2;
            (0..n).map(|k| delta2 * keep.powi(k as i32)).collect()
        }
    };
    PowerAlloc { alphas }
}

/// In-waveguide phase `2 pi eta_eff |feed_x - x| / lambda`, unreduced.
pub fn theta_n(scn: &Scenario, x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > scn.half_length() + 1e-12 {
        return domain(format!("coordinate {x} lies outside the waveguide"));
    }
    Ok(Wavenumbers::of(scn).guide * (scn.feed_x - x).abs())
}

/// Reduces a phase to `[0, 2 pi)`.
pub fn wrap_phase(theta: f64) -> f64 {
    theta.rem_euclid(2.0 * PI)
}

fn distances(scn: &Scenario, layout: &PinchLayout, p: Polar) -> Result<Vec<f64>> {
    layout
        .positions()
        .iter()
        .enumerate()
        .map(|(index, &x)| {
            let r = nf_distance(scn, x, p.r, p.phi)?;
            if r == 0.0 {
                Err(Error::Singularity { index })
            } else {
                Ok(r)
            }
        })
        .collect()
}

/// Free-space channel from the antennas to the ground point `p`.
pub fn free_space_channel(scn: &Scenario, layout: &PinchLayout, p: Polar) -> Result<ComplexVec> {
    let wn = Wavenumbers::of(scn);
    let amp = eta_const(scn).sqrt();
    let r = distances(scn, layout, p)?;
    Ok(ComplexVec::from_iterator(
        r.len(),
        r.iter().map(|&r| Complex64::from_polar(amp / r, wn.free * r)),
    ))
}

/// In-waveguide channel `g[n] = sqrt(alpha_n) e^{-j theta_n}`.
pub fn inwaveguide_channel(scn: &Scenario, layout: &PinchLayout) -> Result<ComplexVec> {
    let wn = Wavenumbers::of(scn);
    let alloc = power_alloc(scn);
    if layout.len() != alloc.alphas.len() {
        return domain("layout length does not match antenna count");
    }
    Ok(ComplexVec::from_iterator(
        layout.len(),
        layout
            .positions()
            .iter()
            .zip(&alloc.alphas)
            .map(|(&x, &a)| Complex64::from_polar(a.sqrt(), -wn.guide * (x - scn.feed_x).abs())),
    ))
}

/// Pinching beamformer toward `p`: entry `n` is
/// `sqrt(alpha_n) e^{-j (2 pi r_n / lambda + theta_n)} / r_n`.
pub fn pinching_beamformer(scn: &Scenario, layout: &PinchLayout, p: Polar) -> Result<ComplexVec> {
    let alloc = power_alloc(scn);
    if layout.len() != alloc.alphas.len() {
        return domain("layout length does not match antenna count");
    }
    distances(scn, layout, p)?;
    let beam = BeamModel::new(scn);
    Ok(beam.vector(layout.positions(), p))
}

/// Wavenumbers in free space and inside the waveguide, rad/m.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Wavenumbers {
    pub free: f64,
    pub guide: f64,
}

impl Wavenumbers {
    pub fn of(scn: &Scenario) -> Self {
        let k = 2.0 * PI / scn.wavelength();
        Self {
            free: k,
            guide: k * scn.eta_eff,
        }
    }
}

/// Precomputed per-scenario constants for evaluating beamformer entries
/// without re-validating the scenario.
#[derive(Debug, Clone)]
pub(crate) struct BeamModel<'a> {
    pub scn: &'a Scenario,
    pub wn: Wavenumbers,
    pub sqrt_alpha: Vec<f64>,
}

impl<'a> BeamModel<'a> {
    pub fn new(scn: &'a Scenario) -> Self {
        Self {
            scn,
            wn: Wavenumbers::of(scn),
            sqrt_alpha: power_alloc(scn).sqrt(),
        }
    }

    #[inline]
    pub fn entry(&self, n: usize, x: f64, p: Polar) -> Complex64 {
        let r = distance_to(self.scn, x, p);
        // Both phases reach ~1e4 rad, where rounding their sum would cost
        // ~1e-12 relative accuracy; the phasors are formed separately.
        let free = Complex64::from_polar(self.sqrt_alpha[n] / r, -self.wn.free * r);
        free * Complex64::cis(-self.wn.guide * (x - self.scn.feed_x).abs())
    }

    pub fn vector(&self, xs: &[f64], p: Polar) -> ComplexVec {
        ComplexVec::from_iterator(xs.len(), xs.iter().enumerate().map(|(n, &x)| self.entry(n, x, p)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::min_distance;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn single(x: f64) -> (Scenario, PinchLayout) {
        let scn = Scenario {
            n_antennas: 1,
            ..Scenario::default()
        };
        let layout = PinchLayout::new(&scn, vec![x]).unwrap();
        (scn, layout)
    }

    #[test]
    fn eta_at_28ghz() {
        // (c / f / 4 pi)^2 evaluated by hand with c = 2.998e8.
        let lambda = 2.998e8 / 28e9;
        let expected = (lambda / (4.0 * PI)).powi(2);
        let eta = eta_const(&Scenario::default());
        assert_relative_eq!(eta, expected, max_relative = 1e-14);
        assert_relative_eq!(eta, 7.259_846_969_563_67e-7, max_relative = 1e-12);
    }

    #[test]
    fn eta_normalisation_and_scaling() {
        let scn = Scenario {
            carrier_hz: SPEED_OF_LIGHT / (4.0 * PI),
            ..Scenario::default()
        };
        assert_relative_eq!(eta_const(&scn), 1.0, max_relative = 1e-14);
        let base = Scenario::default();
        let doubled = Scenario {
            carrier_hz: 2.0 * base.carrier_hz,
            ..base.clone()
        };
        assert_relative_eq!(eta_const(&doubled), eta_const(&base) / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn equal_split() {
        let a = alloc_coefficients(PowerModel::Equal, 16, 1.0);
        assert!(a.alphas.iter().all(|&x| x == 0.0625));
    }

    #[test]
    fn proportional_two_antennas() {
        let a = alloc_coefficients(PowerModel::Proportional, 2, 0.75);
        assert_abs_diff_eq!(a.alphas[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a.alphas[1], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn proportional_full_radiation_puts_everything_on_first() {
        let a = alloc_coefficients(PowerModel::Proportional, 5, 1.0);
        assert_eq!(a.alphas[0], 1.0);
        assert!(a.alphas[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn theta_examples() {
        let scn = Scenario::default();
        let lambda = scn.wavelength();
        let th = theta_n(&scn, scn.feed_x + lambda).unwrap();
        assert_relative_eq!(th, 2.8 * PI, max_relative = 1e-12);
        assert_relative_eq!(wrap_phase(th), 0.8 * PI, max_relative = 1e-9);
        assert_eq!(theta_n(&scn, scn.feed_x).unwrap(), 0.0);
        let glass_free = Scenario {
            eta_eff: 1.0,
            ..scn.clone()
        };
        assert_relative_eq!(
            theta_n(&glass_free, scn.feed_x + lambda / 2.0).unwrap(),
            PI,
            max_relative = 1e-12
        );
        assert!(theta_n(&scn, 30.0).is_err());
    }

    #[test]
    fn free_space_magnitude_single_antenna() {
        let (scn, layout) = single(15.0);
        let h = free_space_channel(&scn, &layout, scn.target).unwrap();
        let expected = eta_const(&scn).sqrt() / 775f64.sqrt();
        assert_relative_eq!(h[0].norm(), expected, max_relative = 1e-12);
        assert_relative_eq!(h[0].norm(), 3.060_644_454_5e-5, max_relative = 1e-9);
    }

    #[test]
    fn free_space_symmetry_and_decay() {
        let scn = Scenario {
            n_antennas: 2,
            ..Scenario::default()
        };
        // Both antennas equidistant from a target on the y-axis.
        let layout = PinchLayout::new(&scn, vec![-4.0, 4.0]).unwrap();
        let h = free_space_channel(&scn, &layout, Polar::new(12.0, PI / 2.0)).unwrap();
        assert_relative_eq!(h[0].norm(), h[1].norm(), max_relative = 1e-14);
        let far = free_space_channel(&scn, &layout, Polar::new(1e9, PI / 2.0)).unwrap();
        assert!(far[0].norm() < 1e-12);
    }

    #[test]
    fn coincident_antenna_is_singular() {
        let scn = Scenario {
            n_antennas: 1,
            height: 0.0,
            ..Scenario::default()
        };
        let layout = PinchLayout::new(&scn, vec![5.0]).unwrap();
        assert!(matches!(
            free_space_channel(&scn, &layout, Polar::new(5.0, 0.0)),
            Err(Error::Singularity { index: 0 })
        ));
        assert!(matches!(
            pinching_beamformer(&scn, &layout, Polar::new(5.0, 0.0)),
            Err(Error::Singularity { index: 0 })
        ));
    }

    #[test]
    fn in_waveguide_examples() {
        let (scn, _) = single(0.0);
        let at_feed = PinchLayout::new(&scn, vec![scn.feed_x]).unwrap();
        let g = inwaveguide_channel(&scn, &at_feed).unwrap();
        assert_abs_diff_eq!(g[0].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[0].im, 0.0, epsilon = 1e-15);

        let four = Scenario {
            n_antennas: 4,
            ..Scenario::default()
        };
        let layout = PinchLayout::new(&four, vec![-3.0, -1.0, 2.0, 7.0]).unwrap();
        let g = inwaveguide_channel(&four, &layout).unwrap();
        assert!(g.iter().all(|z| (z.norm() - 0.5).abs() < 1e-15));

        let half = scn.feed_x + scn.wavelength() / (2.0 * scn.eta_eff);
        let layout = PinchLayout::new(&scn, vec![half]).unwrap();
        let g = inwaveguide_channel(&scn, &layout).unwrap();
        assert_relative_eq!(g[0].arg().abs(), PI, max_relative = 1e-9);
    }

    #[test]
    fn beamformer_single_antenna_gain() {
        let (scn, layout) = single(15.0);
        let w = pinching_beamformer(&scn, &layout, scn.target).unwrap();
        let gain = (eta_vector(&scn).adjoint() * &w)[0].norm_sqr();
        assert_relative_eq!(gain, eta_const(&scn) / 775.0, max_relative = 1e-12);
    }

    #[test]
    fn beamformer_coherent_pair() {
        // Two antennas mirrored about the target projection at a spacing that
        // makes their in-waveguide phases differ by a whole number of cycles.
        let scn = Scenario {
            n_antennas: 2,
            ..Scenario::default()
        };
        let period = scn.wavelength() / scn.eta_eff;
        let centre = scn.target.r * scn.target.phi.cos();
        let layout = PinchLayout::new(&scn, vec![centre - period, centre + period]).unwrap();
        let w = pinching_beamformer(&scn, &layout, scn.target).unwrap();
        let gain = (eta_vector(&scn).adjoint() * &w)[0].norm();
        let r = nf_distance(&scn, centre + period, scn.target.r, scn.target.phi).unwrap();
        let coherent = 2.0 * eta_const(&scn).sqrt() * 0.5f64.sqrt() / r;
        assert_relative_eq!(gain, coherent, max_relative = 1e-9);
    }

    #[test]
    fn beamformer_magnitudes_bounded() {
        let scn = Scenario::default();
        let xs: Vec<f64> = (0..16).map(|n| -24.0 + 3.1 * n as f64).collect();
        let layout = PinchLayout::new(&scn, xs.clone()).unwrap();
        let alloc = power_alloc(&scn);
        let v = pinching_beamformer(&scn, &layout, scn.target).unwrap();
        let rmin = min_distance(&scn, scn.target.r, scn.target.phi);
        for (n, z) in v.iter().enumerate() {
            let r = nf_distance(&scn, xs[n], scn.target.r, scn.target.phi).unwrap();
            assert_relative_eq!(z.norm(), alloc.alphas[n].sqrt() / r, max_relative = 1e-14);
            assert!(z.norm() <= alloc.alphas[n].sqrt() / rmin * (1.0 + 1e-14));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn layout_strategy() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(0.02f64..3.0, 1..12).prop_map(|gaps| {
                let mut xs = Vec::with_capacity(gaps.len());
                let mut x = -24.9;
                for g in gaps {
                    x += g;
                    xs.push(x);
                }
                xs
            })
        }

        proptest! {
            #![proptest_config(crate::test_support::proptest_config(256))]

            #[test]
            fn alloc_sums_to_alpha_s(
                n in 1usize..=64,
                a in prop::sample::select(vec![0.1, 0.5, 0.9, 1.0]),
                prop in any::<bool>()
            ) {
                let model = if prop { PowerModel::Proportional } else { PowerModel::Equal };
                let alloc = alloc_coefficients(model, n, a);
                prop_assert_eq!(alloc.alphas.len(), n);
                prop_assert!(alloc.alphas.iter().all(|&x| x >= 0.0));
                prop_assert!((alloc.total() - a).abs() <= 1e-12);
            }

            #[test]
            fn factorisation_identity(xs in layout_strategy(), prop in any::<bool>()) {
                let scn = Scenario {
                    n_antennas: xs.len(),
                    power_model: if prop { PowerModel::Proportional } else { PowerModel::Equal },
                    alpha_s: 0.9,
                    ..Scenario::default()
                };
                let layout = PinchLayout::new(&scn, xs).unwrap();
                let g = inwaveguide_channel(&scn, &layout).unwrap();
                let eta = eta_vector(&scn);
                for p in [scn.user, scn.target] {
                    let h = free_space_channel(&scn, &layout, p).unwrap();
                    let w = pinching_beamformer(&scn, &layout, p).unwrap();
                    let direct = (h.adjoint() * &g)[0];
                    let factored = (eta.adjoint() * &w)[0];
                    // Relative to the term magnitudes: the sum itself may cancel.
                    let scale: f64 = h.iter().zip(g.iter()).map(|(a, b)| (a * b).norm()).sum();
                    prop_assert!((direct - factored).norm() <= 1e-12 * scale);
                }
            }

            #[test]
            fn feed_shift_by_guided_wavelength(xs in layout_strategy(), k in 1i32..4) {
                let scn = Scenario { n_antennas: xs.len(), ..Scenario::default() };
                let shifted = Scenario {
                    feed_x: scn.feed_x - k as f64 * scn.wavelength() / scn.eta_eff,
                    ..scn.clone()
                };
                let layout = PinchLayout::new(&scn, xs).unwrap();
                let eta = eta_vector(&scn);
                let a = pinching_beamformer(&scn, &layout, scn.target).unwrap();
                let b = pinching_beamformer(&shifted, &layout, scn.target).unwrap();
                // One global phase relates the two vectors.
                let rot = b[0] / a[0];
                for n in 0..a.len() {
                    prop_assert!((a[n] * rot - b[n]).norm() <= 1e-9 * a[n].norm());
                }
                let ga = (eta.adjoint() * &a)[0].norm();
                let gb = (eta.adjoint() * &b)[0].norm();
                prop_assert!((ga - gb).abs() <= 1e-9 * ga);
            }
        }
    }
}
