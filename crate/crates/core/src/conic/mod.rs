//! Lifted beamformer subproblems and rank-one forcing.
//!
//! With the antenna positions fixed, the lifted problem separates into one
//! matrix problem for the user beamformer `W~` and one for the target
//! beamformer `V~`. Each is solved on a normalised copy of the data: the
//! matrix is divided by its largest attainable trace `s = sum_n b_n` and
//! the illumination reward by its largest attainable value, so penalty
//! scales are dimensionless and comparable across scenarios.
//!
//! The rank-one constraint is handled by the difference-of-convex penalty
//! `Re tr(X (I - u u^H)) <= varpi`, with `u` the dominant eigenvector of the
//! previous iterate and `varpi` priced into the objective.

mod admm;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub use admm::{inner, AdmmSettings};
use admm::{ScaledProblem, WarmStart};

use crate::channel::{eta_const, power_alloc, ComplexVec};
use crate::error::{domain, Error, Result};
use crate::geometry::{min_distance, Scenario};
use crate::metrics::qos_gain_floor;

pub type HermitianMat = DMatrix<Complex64>;

/// Relative tolerance for the Hermitian check in [`psd_project`].
const HERMITIAN_TOL: f64 = 1e-12;

pub fn lift(v: &ComplexVec) -> HermitianMat {
    v * v.adjoint()
}

pub fn is_hermitian(m: &HermitianMat, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let n = m.nrows();
    (0..n).all(|i| (i..n).all(|j| (m[(i, j)] - m[(j, i)].conj()).norm() <= tol * scale))
}

fn hermitian_part(m: &HermitianMat) -> HermitianMat {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues clamped).
pub fn psd_project(m: &HermitianMat) -> Result<HermitianMat> {
    if !is_hermitian(m, HERMITIAN_TOL) {
        return domain("psd projection needs a Hermitian matrix");
    }
    Ok(psd_project_unchecked(m))
}

pub(crate) fn psd_project_unchecked(m: &HermitianMat) -> HermitianMat {
    let eig = hermitian_part(m).symmetric_eigen();
    let n = m.nrows();
    let mut out = HermitianMat::zeros(n, n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > 0.0 {
            let q = eig.eigenvectors.column(k);
            out += (q * q.adjoint()) * Complex64::new(lam, 0.0);
        }
    }
    out
}

/// Largest eigenvalue and its unit eigenvector.
///
/// The vector is fixed by a deterministic convention: when the top
/// eigenvalue is repeated, the first standard basis vector with a nonzero
/// projection onto the top eigenspace is projected and normalised; the
/// first entry whose magnitude exceeds `1e-9` is then made real positive.
pub fn dominant_eigpair(m: &HermitianMat) -> Result<(f64, ComplexVec)> {
    if !is_hermitian(m, 1e-9) {
        return domain("dominant eigenvector needs a Hermitian matrix");
    }
    let n = m.nrows();
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if n == 0 || scale == 0.0 {
        return domain("dominant eigenvector of a zero matrix is undefined");
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tie = 1e-10 * scale * n as f64;
    let cluster: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] >= top - tie).collect();

    let mut vec = if cluster.len() == 1 {
        eig.eigenvectors.column(cluster[0]).into_owned()
    } else {
        let mut chosen = None;
        for e in 0..n {
            let mut p = ComplexVec::zeros(n);
            for &k in &cluster {
                let q = eig.eigenvectors.column(k);
                p += q * q[e].conj();
            }
            if p.norm() > 1e-6 {
                chosen = Some(p.normalize());
                break;
            }
        }
        chosen.expect("top eigenspace is nonempty")
    };

    if let Some(k) = vec.iter().position(|z| z.norm() > 1e-9) {
        let lead = vec[k];
        vec *= lead.conj() / lead.norm();
        vec[k].im = 0.0;
    }
    Ok((top, vec))
}

pub fn dominant_eigvec(m: &HermitianMat) -> Result<ComplexVec> {
    dominant_eigpair(m).map(|(_, v)| v)
}

/// Rank-one gap `Re tr(X (I - u u^H)) = tr X - u^H X u`.
pub fn dc_gap(m: &HermitianMat, u: &ComplexVec) -> f64 {
    let tr: f64 = (0..m.nrows()).map(|i| m[(i, i)].re).sum();
    let quad = (u.adjoint() * m * u)[0].re;
    (tr - quad).max(0.0)
}

/// State of the rank-one forcing loop.
#[derive(Debug, Clone)]
pub struct DcState {
    /// Dominant eigenvector used in the user-side constraint.
    pub w_max: ComplexVec,
    /// Dominant eigenvector used in the target-side constraint.
    pub v_max: ComplexVec,
    /// Rank-one slacks of the last solve, normalised by the matrix trace.
    pub varpi_w: f64,
    pub varpi_v: f64,
    /// Scale factors of the slack penalties; the weight is `1 / (2 rho)`.
    pub rho_w: f64,
    pub rho_v: f64,
    /// Decay applied to both scale factors each iteration, in (0, 1).
    pub decay: f64,
    /// Stop once `varpi_w + varpi_v` falls to this level.
    pub eps: f64,
    pub max_iters: usize,
}

impl DcState {
    /// Eigenvectors taken from the lifted beamformers of the current layout.
    pub fn new(w_of_x: &HermitianMat, v_of_x: &HermitianMat) -> Result<Self> {
        Ok(Self {
            w_max: dominant_eigvec(w_of_x)?,
            v_max: dominant_eigvec(v_of_x)?,
            varpi_w: 0.0,
            varpi_v: 0.0,
            rho_w: 1.0,
            rho_v: 1.0,
            decay: 0.5,
            eps: 1e-3,
            max_iters: 200,
        })
    }

    pub fn with_tolerance(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    fn reset_scales(&mut self) {
        self.rho_w = 1.0;
        self.rho_v = 1.0;
    }
}

/// Which beamformer a lifted subproblem optimises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// User side: minimum-gain constraint, no reward.
    Communication,
    /// Target side: illumination reward, no gain constraint.
    Sensing,
}

/// Physical data of one lifted subproblem.
#[derive(Debug, Clone)]
pub struct LiftedProblem {
    pub side: Side,
    /// Diagonal bounds `alpha_n / r_min^2`.
    pub diag_bound: Vec<f64>,
    /// Required `Re sum_ij X_ij` (user gain floor divided by `eta`).
    pub gain_floor: f64,
    /// `W(x)` or `V(x)`.
    pub anchor: HermitianMat,
    /// Outer penalty scale; the anchor term is weighted by `1 / (2 rho)`.
    pub rho: f64,
    /// Slack penalty scale; the slack is weighted by `1 / (2 rho_dc)`.
    pub rho_dc: f64,
    pub dc_vec: ComplexVec,
}

impl LiftedProblem {
    pub fn new(scn: &Scenario, side: Side, anchor: HermitianMat, rho: f64, rho_dc: f64, dc_vec: ComplexVec) -> Self {
        let diag_bound = diag_bounds(scn, side);
        let gain_floor = match side {
            Side::Communication => qos_gain_floor(scn) / eta_const(scn),
            Side::Sensing => 0.0,
        };
        Self {
            side,
            diag_bound,
            gain_floor,
            anchor,
            rho,
            rho_dc,
            dc_vec,
        }
    }

    /// Largest attainable trace, used to normalise matrices.
    pub fn trace_scale(&self) -> f64 {
        self.diag_bound.iter().sum()
    }

    /// Largest attainable `Re sum_ij X_ij`, attained by `p p^T` with `p = sqrt(b)`.
    pub fn max_gain(&self) -> f64 {
        self.diag_bound.iter().map(|b| b.sqrt()).sum::<f64>().powi(2)
    }

    pub fn is_feasible(&self) -> bool {
        self.max_gain() >= self.gain_floor
    }

    /// Normalised objective of `x` (to be maximised). Constraint
    /// satisfaction is not checked here.
    pub fn objective(&self, x: &HermitianMat) -> f64 {
        let s = self.trace_scale();
        let reward = match self.side {
            Side::Sensing => x.iter().map(|z| z.re).sum::<f64>() / self.max_gain(),
            Side::Communication => 0.0,
        };
        reward - (x - &self.anchor).norm() / (2.0 * self.rho * s) - dc_gap(x, &self.dc_vec) / (2.0 * self.rho_dc * s)
    }

    fn scaled(&self) -> ScaledProblem {
        let n = self.anchor.nrows();
        let s = self.trace_scale();
        let slack_weight = 1.0 / (2.0 * self.rho_dc);
        let mut reward = lift(&self.dc_vec) - HermitianMat::identity(n, n);
        reward *= Complex64::new(slack_weight, 0.0);
        if self.side == Side::Sensing {
            let c = s / self.max_gain();
            reward.iter_mut().for_each(|z| z.re += c);
        }
        ScaledProblem {
            anchor: &self.anchor / Complex64::new(s, 0.0),
            anchor_weight: 1.0 / (2.0 * self.rho),
            reward,
            diag_bound: self.diag_bound.iter().map(|b| b / s).collect(),
            gain_floor: (self.side == Side::Communication && self.gain_floor > 0.0).then_some(self.gain_floor / s),
        }
    }
}

fn diag_bounds(scn: &Scenario, side: Side) -> Vec<f64> {
    let p = match side {
        Side::Communication => scn.user,
        Side::Sensing => scn.target,
    };
    let r_min = min_distance(scn, p.r, p.phi);
    power_alloc(scn).alphas.iter().map(|a| a / (r_min * r_min)).collect()
}

/// Optimal lifted matrix of one subproblem.
#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub matrix: HermitianMat,
    /// Rank-one slack `tr X - u^H X u`, normalised by `tr X`.
    pub varpi: f64,
    /// Normalised objective value.
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Owns the solver settings and warm starts for one optimisation run.
#[derive(Debug, Clone, Default)]
pub struct ConicSolver {
    pub settings: AdmmSettings,
    warm_w: Option<WarmStart>,
    warm_v: Option<WarmStart>,
}

impl ConicSolver {
    pub fn new(settings: AdmmSettings) -> Self {
        Self {
            settings,
            warm_w: None,
            warm_v: None,
        }
    }

    pub fn solve(&mut self, prob: &LiftedProblem) -> Result<SubproblemSolution> {
        if !prob.is_feasible() {
            return Err(Error::Infeasible(format!(
                "user gain floor {:.4e} exceeds the largest attainable {:.4e}",
                prob.gain_floor,
                prob.max_gain()
            )));
        }
        let s = prob.trace_scale();

        // A feasible rank-one anchor aligned with the slack vector has zero
        // cost on the user side, which is the minimum.
        if prob.side == Side::Communication {
            let gain: f64 = prob.anchor.iter().map(|z| z.re).sum();
            let within = (0..prob.anchor.nrows()).all(|i| prob.anchor[(i, i)].re <= prob.diag_bound[i] * (1.0 + 1e-12));
            let tr = trace(&prob.anchor);
            if gain >= prob.gain_floor && within && dc_gap(&prob.anchor, &prob.dc_vec) <= 1e-12 * tr {
                return Ok(SubproblemSolution {
                    matrix: prob.anchor.clone(),
                    varpi: 0.0,
                    objective: prob.objective(&prob.anchor),
                    kkt_residual: 0.0,
                    iterations: 0,
                });
            }
        }

        let scaled = prob.scaled();
        let warm = match prob.side {
            Side::Communication => &mut self.warm_w,
            Side::Sensing => &mut self.warm_v,
        };
        let out = admm::solve(&scaled, &self.settings, warm.as_ref())?;
        *warm = Some(out.warm);
        let matrix = out.y * Complex64::new(s, 0.0);
        let tr = trace(&matrix);
        let varpi = if tr > 0.0 {
            dc_gap(&matrix, &prob.dc_vec) / tr
        } else {
            0.0
        };
        Ok(SubproblemSolution {
            objective: prob.objective(&matrix),
            matrix,
            varpi,
            kkt_residual: out.residual,
            iterations: out.iterations,
        })
    }

    /// Rank-one forcing: alternate the two subproblems, refresh the dominant
    /// eigenvectors and shrink the slack scales until the summed slack is
    /// below `dc.eps`.
    pub fn rank_one_loop(
        &mut self,
        scn: &Scenario,
        w_of_x: &HermitianMat,
        v_of_x: &HermitianMat,
        rho: f64,
        dc: &mut DcState,
    ) -> Result<RankOneSolution> {
        dc.reset_scales();
        let mut trace = Vec::new();
        for it in 1..=dc.max_iters {
            let wp = LiftedProblem::new(
                scn,
                Side::Communication,
                w_of_x.clone(),
                rho,
                dc.rho_w,
                dc.w_max.clone(),
            );
            let vp = LiftedProblem::new(scn, Side::Sensing, v_of_x.clone(), rho, dc.rho_v, dc.v_max.clone());
            let ws = self.solve(&wp)?;
            let vs = self.solve(&vp)?;
            dc.varpi_w = ws.varpi;
            dc.varpi_v = vs.varpi;
            trace.push(RankOneStep {
                objective: vs.objective + ws.objective,
                varpi_w: ws.varpi,
                varpi_v: vs.varpi,
                kkt_residual: ws.kkt_residual.max(vs.kkt_residual),
            });
            log::trace!(
                "rank-one it {it}: objective {:.6e} varpi ({:.3e}, {:.3e}) kkt {:.2e}",
                vs.objective + ws.objective,
                ws.varpi,
                vs.varpi,
                ws.kkt_residual.max(vs.kkt_residual)
            );

            let (lw, uw) = leading(&ws.matrix, &dc.w_max)?;
            let (lv, uv) = leading(&vs.matrix, &dc.v_max)?;
            dc.w_max = uw.clone();
            dc.v_max = uv.clone();
            dc.rho_w *= dc.decay;
            dc.rho_v *= dc.decay;

            if dc.varpi_w + dc.varpi_v <= dc.eps {
                return Ok(RankOneSolution {
                    w: uw * Complex64::new(lw.max(0.0).sqrt(), 0.0),
                    v: uv * Complex64::new(lv.max(0.0).sqrt(), 0.0),
                    w_mat: ws.matrix,
                    v_mat: vs.matrix,
                    iterations: it,
                    trace,
                });
            }
        }
        Err(Error::RankOneNotConverged {
            iterations: dc.max_iters,
            varpi_w: dc.varpi_w,
            varpi_v: dc.varpi_v,
        })
    }
}

fn trace(m: &HermitianMat) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

/// Dominant eigenpair, falling back to the previous vector for a zero matrix.
fn leading(m: &HermitianMat, previous: &ComplexVec) -> Result<(f64, ComplexVec)> {
    if m.iter().all(|z| z.norm() == 0.0) {
        return Ok((0.0, previous.clone()));
    }
    dominant_eigpair(m)
}

#[derive(Debug, Clone, Copy)]
pub struct RankOneStep {
    pub objective: f64,
    pub varpi_w: f64,
    pub varpi_v: f64,
    pub kkt_residual: f64,
}

/// Output of the rank-one loop.
#[derive(Debug, Clone)]
pub struct RankOneSolution {
    /// `sqrt(lambda_max)` times the dominant eigenvector of `W~`.
    pub w: ComplexVec,
    pub v: ComplexVec,
    pub w_mat: HermitianMat,
    pub v_mat: HermitianMat,
    pub iterations: usize,
    pub trace: Vec<RankOneStep>,
}

/// Target-side subproblem with a fresh solver.
pub fn solve_v_subproblem(scn: &Scenario, v_of_x: &HermitianMat, dc: &DcState, rho: f64) -> Result<SubproblemSolution> {
    let prob = LiftedProblem::new(scn, Side::Sensing, v_of_x.clone(), rho, dc.rho_v, dc.v_max.clone());
    ConicSolver::default().solve(&prob)
}

/// User-side subproblem with a fresh solver.
pub fn solve_w_subproblem(scn: &Scenario, w_of_x: &HermitianMat, dc: &DcState, rho: f64) -> Result<SubproblemSolution> {
    let prob = LiftedProblem::new(
        scn,
        Side::Communication,
        w_of_x.clone(),
        rho,
        dc.rho_w,
        dc.w_max.clone(),
    );
    ConicSolver::default().solve(&prob)
}

/// Rank-one loop with a fresh solver.
pub fn rank_one_loop(
    scn: &Scenario,
    w_of_x: &HermitianMat,
    v_of_x: &HermitianMat,
    rho: f64,
    dc: &mut DcState,
) -> Result<RankOneSolution> {
    ConicSolver::default().rank_one_loop(scn, w_of_x, v_of_x, rho, dc)
}
