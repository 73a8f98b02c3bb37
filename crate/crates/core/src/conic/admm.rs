//! Consensus ADMM for
//!
//! ```text
//! minimize   a ||Y - Y0||_F - <G, Y>
//! subject to Y >= 0,  diag(Y) <= b,  Re sum_ij Y_ij >= t
//! ```
//!
//! over Hermitian `Y`. Three blocks share one consensus variable: the PSD
//! cone, the polyhedral set (diagonal box plus the all-ones half-space), and
//! the non-smooth anchor term with its linear reward. Every block has a
//! closed-form proximal operator.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{psd_project_unchecked, HermitianMat};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AdmmSettings {
    /// Absolute tolerance on primal and dual residuals (problem data is
    /// normalised so that feasible points have trace at most one).
    pub tol: f64,
    pub max_iters: usize,
    pub rho: f64,
    /// Over-relaxation factor in (0, 2).
    pub relax: f64,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iters: 20_000,
            rho: 1.0,
            relax: 1.6,
        }
    }
}

/// Normalised problem data.
#[derive(Debug, Clone)]
pub struct ScaledProblem {
    pub anchor: HermitianMat,
    pub anchor_weight: f64,
    pub reward: HermitianMat,
    pub diag_bound: Vec<f64>,
    /// Lower bound on `Re sum_ij Y_ij`; `None` when absent.
    pub gain_floor: Option<f64>,
}

impl ScaledProblem {
    pub fn dim(&self) -> usize {
        self.anchor.nrows()
    }

    fn prox_anchor(&self, v: &HermitianMat, rho: f64) -> HermitianMat {
        let shifted = v + &self.reward * re(1.0 / rho) - &self.anchor;
        let norm = shifted.norm();
        let keep = if norm > 0.0 {
            (1.0 - self.anchor_weight / (rho * norm)).max(0.0)
        } else {
            0.0
        };
        &self.anchor + shifted * re(keep)
    }

    /// Euclidean projection onto the diagonal box intersected with the
    /// half-space. Adding `mu` to every entry and clamping the diagonal
    /// gives the projection for the optimal multiplier `mu >= 0`, which is
    /// found by bisection on the monotone constraint value.
    fn project_poly(&self, y: &HermitianMat) -> HermitianMat {
        let n = self.dim();
        let diag: Vec<f64> = (0..n).map(|i| y[(i, i)].re).collect();
        let clamp = |mu: f64| -> f64 { diag.iter().zip(&self.diag_bound).map(|(d, b)| (d + mu).min(*b)).sum() };
        let off_sum: f64 = y.iter().map(|z| z.re).sum::<f64>() - diag.iter().sum::<f64>();
        let pairs = (n * n - n) as f64;
        let value = |mu: f64| off_sum + pairs * mu + clamp(mu);

        let mu = match self.gain_floor {
            Some(t) if value(0.0) < t => {
                let mut hi = 1e-12_f64.max(t - value(0.0));
                let mut guard = 0;
                while value(hi) < t && guard < 200 {
                    hi *= 2.0;
                    guard += 1;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if value(mid) < t {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-17 * hi.max(1e-300) {
                        break;
                    }
                }
                hi
            }
            _ => 0.0,
        };

        let mut x = y.clone();
        for j in 0..n {
            for i in 0..n {
                if i == j {
                    x[(i, i)] = Complex64::new((diag[i] + mu).min(self.diag_bound[i]), 0.0);
                } else {
                    x[(i, j)] += mu;
                }
            }
        }
        x
    }

    /// Maps a PSD matrix into the constraint set while keeping it PSD:
    /// symmetric diagonal scaling for the box, then mixing toward the
    /// gain-maximising rank-one point for the half-space.
    pub fn restore(&self, y: &HermitianMat) -> HermitianMat {
        let n = self.dim();
        let scale: Vec<f64> = (0..n)
            .map(|i| {
                let d = y[(i, i)].re;
                if d > self.diag_bound[i] && d > 0.0 {
                    (self.diag_bound[i] / d).sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let mut x = DMatrix::from_fn(n, n, |i, j| y[(i, j)] * scale[i] * scale[j]);
        for i in 0..n {
            x[(i, i)].im = 0.0;
        }
        if let Some(t) = self.gain_floor {
            let have = x.iter().map(|z| z.re).sum::<f64>();
            if have < t {
                let peak: Vec<f64> = self.diag_bound.iter().map(|b| b.sqrt()).collect();
                let best: f64 = peak.iter().sum::<f64>().powi(2);
                if best > have {
                    let theta = ((t - have) / (best - have)).min(1.0);
                    let top = DMatrix::from_fn(n, n, |i, j| Complex64::new(peak[i] * peak[j], 0.0));
                    x = x * re(1.0 - theta) + top * re(theta);
                }
            }
        }
        x
    }
}

fn re(a: f64) -> Complex64 {
    Complex64::new(a, 0.0)
}

/// Real inner product `Re tr(A^H B)`.
pub fn inner(a: &HermitianMat, b: &HermitianMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

#[derive(Debug, Clone)]
pub struct WarmStart {
    pub z: HermitianMat,
    pub duals: [HermitianMat; 3],
    pub rho: f64,
}

#[derive(Debug, Clone)]
pub struct AdmmOutput {
    pub y: HermitianMat,
    pub iterations: usize,
    pub residual: f64,
    pub warm: WarmStart,
}

pub fn solve(prob: &ScaledProblem, settings: &AdmmSettings, warm: Option<&WarmStart>) -> Result<AdmmOutput> {
    let n = prob.dim();
    let zero = HermitianMat::zeros(n, n);
    let (mut z, mut u, mut rho) = match warm {
        Some(w) if w.z.nrows() == n => (w.z.clone(), w.duals.clone(), w.rho),
        _ => (
            prob.anchor.clone(),
            [zero.clone(), zero.clone(), zero.clone()],
            settings.rho,
        ),
    };
    let relax = settings.relax;
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;

    for it in 1..=settings.max_iters {
        let x0 = psd_project_unchecked(&(&z - &u[0]));
        let x1 = prob.project_poly(&(&z - &u[1]));
        let x2 = prob.prox_anchor(&(&z - &u[2]), rho);
        let xs = [x0, x1, x2];

        let relaxed: Vec<HermitianMat> = xs.iter().map(|x| x * re(relax) + &z * re(1.0 - relax)).collect();
        let z_new = (&relaxed[0] + &u[0] + &relaxed[1] + &u[1] + &relaxed[2] + &u[2]) * re(1.0 / 3.0);
        for k in 0..3 {
            u[k] += &relaxed[k] - &z_new;
        }

        let primal = xs.iter().map(|x| (x - &z_new).norm_squared()).sum::<f64>().sqrt();
        let dual = rho * 3f64.sqrt() * (&z_new - &z).norm();
        z = z_new;
        residual = primal.max(dual);

        if it % 50 == 0 {
            trace.push(residual);
        }
        if primal <= settings.tol && dual <= settings.tol {
            let y = prob.restore(&xs[0]);
            return Ok(AdmmOutput {
                y,
                iterations: it,
                residual,
                warm: WarmStart { z, duals: u, rho },
            });
        }

        // Residual balancing; the scaled duals follow the penalty change.
        if it % 25 == 0 {
            let factor = if primal > 10.0 * dual {
                2.0
            } else if dual > 10.0 * primal {
                0.5
            } else {
                1.0
            };
            if factor != 1.0 {
                rho *= factor;
                for d in u.iter_mut() {
                    *d *= re(1.0 / factor);
                }
            }
        }
    }
    Err(Error::NotConverged {
        iterations: settings.max_iters,
        residual,
        trace,
    })
}
