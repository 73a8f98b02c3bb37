//! Comparison schemes: a phased array at the base station, pinching
//! antennas frozen at the uniform layout, and pinching antennas allowed
//! small moves around that layout.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::channel::{eta_const, Wavenumbers};
use crate::error::{Error, Result};
use crate::geometry::{distance_to, PinchLayout, Polar, Scenario};
use crate::metrics::{evaluate, qos_gain_floor, MetricReport};
use crate::optimizer::{init_layout, penalty_ao_from, PenaltyConfig, SearchSettings, SolveReport, RATE_SLACK};

/// Uniform linear array driven by one RF chain through analog phase shifters.
#[derive(Debug, Clone, PartialEq)]
pub struct UlaConfig {
    /// Array centre along the waveguide axis, m.
    pub center_x: f64,
    /// Element spacing, m.
    pub spacing: f64,
    /// Starting phases; co-phased toward the target when absent.
    pub phases: Option<Vec<f64>>,
    /// The phase grid has `2^q_bits` points.
    pub q_bits: u32,
    pub max_passes: usize,
    pub max_rounds: usize,
}

impl UlaConfig {
    /// Half-wavelength array whose first element sits at the feed point.
    pub fn for_scenario(scn: &Scenario) -> Self {
        let spacing = scn.wavelength() / 2.0;
        let half_span = (scn.n_antennas as f64 - 1.0) * spacing / 2.0;
        let h = scn.half_length();
        let center_x = (scn.feed_x + half_span).clamp(-h + half_span, h - half_span);
        Self {
            center_x,
            spacing,
            phases: None,
            q_bits: 12,
            max_passes: 100,
            max_rounds: 12,
        }
    }

    pub fn positions(&self, n: usize) -> Vec<f64> {
        let start = self.center_x - (n as f64 - 1.0) * self.spacing / 2.0;
        (0..n).map(|k| start + k as f64 * self.spacing).collect()
    }
}

/// Element responses `sqrt(alpha_n) e^{-j k r_n} / r_n` without phase shifters.
fn ula_response(scn: &Scenario, xs: &[f64], p: Polar) -> Vec<Complex64> {
    let k = Wavenumbers::of(scn).free;
    let amp = (scn.alpha_s / scn.n_antennas as f64).sqrt();
    xs.iter()
        .map(|&x| {
            let r = distance_to(scn, x, p);
            Complex64::from_polar(amp / r, -k * r)
        })
        .collect()
}

fn steered_gain(scn: &Scenario, resp: &[Complex64], phases: &[f64]) -> f64 {
    let s: Complex64 = resp
        .iter()
        .zip(phases)
        .map(|(a, &p)| a * Complex64::from_polar(1.0, p))
        .sum();
    eta_const(scn) * s.norm_sqr()
}

/// User and target gains of a phased array.
pub fn ula_metrics(scn: &Scenario, layout: &PinchLayout, phases: &[f64]) -> Result<MetricReport> {
    if phases.len() != layout.len() || layout.len() != scn.n_antennas {
        return Err(Error::Domain("phase count does not match the array".into()));
    }
    let xs = layout.positions();
    let user = steered_gain(scn, &ula_response(scn, xs, scn.user), phases);
    let target = steered_gain(scn, &ula_response(scn, xs, scn.target), phases);
    Ok(MetricReport::from_gains(scn, user, target))
}

/// Coordinate descent over the analog phases, maximising the normalised
/// illumination power minus `mu` times the squared relative rate-gain
/// shortfall. `mu` grows tenfold per round until the requirement holds.
pub fn ula_optimize(scn: &Scenario, cfg: &UlaConfig) -> Result<SolveReport> {
    scn.validate()?;
    let n = scn.n_antennas;
    if !(cfg.spacing > 0.0) || cfg.q_bits < 2 {
        return Err(Error::Domain("array spacing must be positive".into()));
    }
    let layout = PinchLayout::new(scn, cfg.positions(n))?;
    let xs = layout.positions();
    let t_resp = ula_response(scn, xs, scn.target);
    let u_resp = ula_response(scn, xs, scn.user);
    let eta = eta_const(scn);
    let t_max = eta * t_resp.iter().map(|a| a.norm()).sum::<f64>().powi(2);
    let floor = qos_gain_floor(scn);

    let mut phases = match &cfg.phases {
        Some(p) if p.len() == n => p.clone(),
        Some(_) => return Err(Error::Domain("phase count does not match the array".into())),
        None => t_resp.iter().map(|a| -a.arg()).collect(),
    };
    let grid: Vec<Complex64> = (0..1usize << cfg.q_bits)
        .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / (1usize << cfg.q_bits) as f64))
        .collect();

    let score = |t: Complex64, u: Complex64, mu: f64| -> f64 {
        let short = if floor > 0.0 {
            ((floor - eta * u.norm_sqr()).max(0.0) / floor).powi(2)
        } else {
            0.0
        };
        eta * t.norm_sqr() / t_max - mu * short
    };

    let mut mu = 1.0;
    let mut passes = 0;
    let mut rounds = 0;
    for round in 1..=cfg.max_rounds {
        rounds = round;
        for _ in 0..cfg.max_passes {
            passes += 1;
            let mut improved = false;
            for m in 0..n {
                let rot = Complex64::from_polar(1.0, phases[m]);
                let t_all: Complex64 = t_resp
                    .iter()
                    .zip(&phases)
                    .map(|(a, &p)| a * Complex64::from_polar(1.0, p))
                    .sum();
                let u_all: Complex64 = u_resp
                    .iter()
                    .zip(&phases)
                    .map(|(a, &p)| a * Complex64::from_polar(1.0, p))
                    .sum();
                let t_rest = t_all - t_resp[m] * rot;
                let u_rest = u_all - u_resp[m] * rot;
                let current = score(t_all, u_all, mu);
                let mut best = (current, None);
                for (k, g) in grid.iter().enumerate() {
                    let s = score(t_rest + t_resp[m] * g, u_rest + u_resp[m] * g, mu);
                    if s > best.0 + 1e-15 * best.0.abs().max(1e-300) {
                        best = (s, Some(k));
                    }
                }
                if let Some(k) = best.1 {
                    phases[m] = 2.0 * PI * k as f64 / grid.len() as f64;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        if steered_gain(scn, &u_resp, &phases) >= floor {
            break;
        }
        mu *= 10.0;
    }

    let metrics = ula_metrics(scn, &layout, &phases)?;
    let feasible = metrics.rate >= scn.rate_qos - RATE_SLACK;
    Ok(SolveReport {
        scheme: "ula".into(),
        layout,
        phases: Some(phases.iter().map(|p| p.rem_euclid(2.0 * PI)).collect()),
        metrics,
        residual: 0.0,
        outer_iters: rounds,
        inner_iters: passes,
        trace: Vec::new(),
        feasible,
        note: (!feasible).then(|| "rate requirement not met by phase steering".to_string()),
    })
}

/// Pinching antennas left at the uniform layout.
pub fn fixed_pinching(scn: &Scenario) -> Result<SolveReport> {
    let layout = init_layout(scn)?;
    let metrics = evaluate(scn, &layout)?;
    Ok(SolveReport {
        scheme: "fixed".into(),
        layout,
        phases: None,
        feasible: metrics.qos_ok,
        metrics,
        residual: 0.0,
        outer_iters: 0,
        inner_iters: 0,
        trace: Vec::new(),
        note: None,
    })
}

/// Pinching antennas moved within `[nominal_n - range, nominal_n + range]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiContConfig {
    pub nominal: Vec<f64>,
    /// Half-width of each adjustment box, m.
    pub range: f64,
}

impl SemiContConfig {
    /// Uniform layout with a ten-wavelength adjustment range.
    pub fn for_scenario(scn: &Scenario) -> Result<Self> {
        Ok(Self {
            nominal: init_layout(scn)?.positions().to_vec(),
            range: 10.0 * scn.wavelength(),
        })
    }
}

pub fn semi_continuous(scn: &Scenario, cfg: &SemiContConfig, penalty: &PenaltyConfig) -> Result<SolveReport> {
    if !(cfg.range >= 0.0) {
        return Err(Error::Domain("adjustment range must be non-negative".into()));
    }
    let start = PinchLayout::new(scn, cfg.nominal.clone())?;
    let mut search = SearchSettings::from(penalty);
    search.boxes = Some(cfg.nominal.iter().map(|&x| (x - cfg.range, x + cfg.range)).collect());
    penalty_ao_from(scn, penalty, start, search, "semi")
}
