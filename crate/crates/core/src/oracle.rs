//! Brute-force references for small instances.
//!
//! Both searches evaluate their objectives from first principles (Cartesian
//! distances, explicit complex sums) rather than through the optimiser's
//! helpers, so they can be used to cross-check it.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::conic::{LiftedProblem, Side};
use crate::error::{Error, Result};
use crate::geometry::{antenna_point, target_point, PinchLayout, Scenario};
use crate::units::SPEED_OF_LIGHT;

/// Largest number of grid points an oracle will visit.
pub const GRID_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGrid {
    /// Grid step: metres for positions, relative units for magnitudes and phases.
    pub resolution: f64,
    /// Discard points that miss the rate requirement.
    pub qos_filter: bool,
}

impl OracleGrid {
    pub fn positions() -> Self {
        Self {
            resolution: 0.02,
            qos_filter: true,
        }
    }

    /// The anchor term is non-smooth with weights up to ~10, so the zoom runs
    /// well past the 1e-3 objective tolerance it is compared at.
    pub fn subproblem() -> Self {
        Self {
            resolution: 1e-6,
            qos_filter: true,
        }
    }
}

/// Received array gain `|sum_n sqrt(alpha_n) e^{-j(k r_n + k_g |x_n - x_0|)} / r_n|^2`
/// times `(lambda / 4 pi)^2`, evaluated from Cartesian coordinates.
fn received_gain(scn: &Scenario, alphas: &[f64], xs: &[f64], r: f64, phi: f64) -> Result<f64> {
    let lambda = SPEED_OF_LIGHT / scn.carrier_hz;
    let rx = target_point(r, phi)?;
    let feed = antenna_point(scn, scn.feed_x)?;
    let mut sum = Complex64::new(0.0, 0.0);
    for (a, &x) in alphas.iter().zip(xs) {
        let ant = antenna_point(scn, x)?;
        let dist = ant.distance(&rx);
        let guided = ant.distance(&feed);
        let phase = 2.0 * PI * (dist + scn.eta_eff * guided) / lambda;
        sum += Complex64::from_polar(a.sqrt() / dist, -phase);
    }
    Ok((lambda / (4.0 * PI)).powi(2) * sum.norm_sqr())
}

fn allocation(scn: &Scenario) -> Vec<f64> {
    let n = scn.n_antennas;
    match scn.power_model {
        crate::geometry::PowerModel::Equal => vec![scn.alpha_s / n as f64; n],
        crate::geometry::PowerModel::Proportional => {
            let d2 = 1.0 - (1.0 - scn.alpha_s).powf(1.0 / n as f64);
            (0..n).map(|k| d2 * (1.0 - d2).powi(k as i32)).collect()
        }
    }
}

/// Exhaustive search over layouts on the grid `-L/2 + k * resolution`,
/// maximising the illumination power. Ties keep the first layout in
/// lexicographic grid order.
pub fn brute_force_positions(scn: &Scenario, grid: OracleGrid) -> Result<(PinchLayout, f64)> {
    scn.validate()?;
    if !(grid.resolution > 0.0) {
        return Err(Error::Domain("grid resolution must be positive".into()));
    }
    let n = scn.n_antennas;
    let per_axis = (scn.length / grid.resolution).floor() + 1.0;
    let points = per_axis.powi(n as i32);
    if n > 3 || points > GRID_LIMIT {
        return Err(Error::GridTooLarge {
            points,
            limit: GRID_LIMIT,
        });
    }
    let h = scn.half_length();
    let axis: Vec<f64> = (0..per_axis as usize)
        .map(|k| (-h + k as f64 * grid.resolution).min(h))
        .collect();
    let alphas = allocation(scn);
    let floor = 2f64.powf(scn.rate_qos) - 1.0;

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut idx = vec![0usize; n];
    let mut xs = vec![0.0; n];
    // Odometer over strictly increasing index tuples.
    fn advance(idx: &mut [usize], len: usize) -> bool {
        let n = idx.len();
        for j in (0..n).rev() {
            if idx[j] + (n - j) < len {
                idx[j] += 1;
                for k in j + 1..n {
                    idx[k] = idx[k - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (j, v) in idx.iter_mut().enumerate() {
        *v = j;
    }
    if n > axis.len() {
        return Err(Error::Infeasible("grid has fewer points than antennas".into()));
    }
    loop {
        for j in 0..n {
            xs[j] = axis[idx[j]];
        }
        let spaced = xs.windows(2).all(|w| w[1] - w[0] >= scn.min_spacing - 1e-12);
        if spaced {
            let ok = !grid.qos_filter || {
                let g = received_gain(scn, &alphas, &xs, scn.user.r, scn.user.phi)?;
                scn.tx_power * g / scn.noise_power >= floor
            };
            if ok {
                let ps = scn.tx_power * received_gain(scn, &alphas, &xs, scn.target.r, scn.target.phi)?;
                if best.as_ref().is_none_or(|b| ps > b.1) {
                    best = Some((xs.clone(), ps));
                }
            }
        }
        if !advance(&mut idx, axis.len()) {
            break;
        }
    }
    match best {
        Some((xs, ps)) => Ok((PinchLayout::new(scn, xs)?, ps)),
        None => Err(Error::Infeasible("no grid layout meets the constraints".into())),
    }
}

/// Normalised lifted objective at the rank-one point `v v^H`, written out
/// entry by entry for two antennas.
fn rank1_value(prob: &LiftedProblem, v: [Complex64; 2], enforce_floor: bool) -> Option<f64> {
    let y = [
        [v[0] * v[0].conj(), v[0] * v[1].conj()],
        [v[1] * v[0].conj(), v[1] * v[1].conj()],
    ];
    let total: f64 = y.iter().flatten().map(|z| z.re).sum();
    if enforce_floor && prob.side == Side::Communication && total < prob.gain_floor {
        return None;
    }
    let s: f64 = prob.diag_bound.iter().sum();
    let max_gain = prob.diag_bound.iter().map(|b| b.sqrt()).sum::<f64>().powi(2);
    let mut dist2 = 0.0;
    for (i, row) in y.iter().enumerate() {
        for (j, yij) in row.iter().enumerate() {
            dist2 += (yij - prob.anchor[(i, j)]).norm_sqr();
        }
    }
    let u = [prob.dc_vec[0], prob.dc_vec[1]];
    let proj = (u[0].conj() * v[0] + u[1].conj() * v[1]).norm_sqr();
    let trace = y[0][0].re + y[1][1].re;
    let gap = (trace - proj).max(0.0);
    let reward = match prob.side {
        Side::Sensing => total / max_gain,
        Side::Communication => 0.0,
    };
    Some(reward - dist2.sqrt() / (2.0 * prob.rho * s) - gap / (2.0 * prob.rho_dc * s))
}

/// Best lifted objective over rank-one points `v v^H` with
/// `|v_n|^2 <= b_n`, searched on a zooming grid over the two magnitudes and
/// the relative phase until the step falls below `grid.resolution`.
pub fn brute_force_rank1_subproblem(prob: &LiftedProblem, grid: OracleGrid) -> Result<f64> {
    if prob.diag_bound.len() != 2 {
        return Err(Error::Domain("rank-one oracle supports two antennas only".into()));
    }
    if !(grid.resolution > 0.0) {
        return Err(Error::Domain("grid resolution must be positive".into()));
    }
    let sb = [prob.diag_bound[0].sqrt(), prob.diag_bound[1].sqrt()];
    let eval = |t1: f64, t2: f64, psi: f64| -> Option<f64> {
        let v = [Complex64::new(t1 * sb[0], 0.0), Complex64::from_polar(t2 * sb[1], psi)];
        rank1_value(prob, v, grid.qos_filter)
    };

    let (mut c1, mut c2, mut cp) = (0.5, 0.5, PI);
    let (mut h1, mut h2, mut hp) = (0.5, 0.5, PI);
    let mut steps = (50usize, 50usize, 100usize);
    let mut best = f64::NEG_INFINITY;
    loop {
        let mut found = None;
        for i in 0..=steps.0 {
            let t1 = (c1 - h1 + 2.0 * h1 * i as f64 / steps.0 as f64).clamp(0.0, 1.0);
            for j in 0..=steps.1 {
                let t2 = (c2 - h2 + 2.0 * h2 * j as f64 / steps.1 as f64).clamp(0.0, 1.0);
                for k in 0..steps.2 {
                    let psi = cp - hp + 2.0 * hp * k as f64 / steps.2 as f64;
                    if let Some(f) = eval(t1, t2, psi) {
                        if f > best {
                            best = f;
                            found = Some((t1, t2, psi));
                        }
                    }
                }
            }
        }
        if let Some((t1, t2, psi)) = found {
            c1 = t1;
            c2 = t2;
            cp = psi;
        }
        let step = (2.0 * h1 / steps.0 as f64).max(2.0 * hp / steps.2 as f64 / (2.0 * PI));
        if step <= grid.resolution {
            break;
        }
        h1 = 4.0 * h1 / steps.0 as f64;
        h2 = 4.0 * h2 / steps.1 as f64;
        hp = 4.0 * hp / steps.2 as f64;
        steps = (20, 20, 20);
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::Infeasible("no rank-one point meets the gain floor".into()));
    }
    Ok(best)
}
