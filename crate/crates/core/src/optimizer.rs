//! Penalty-based alternating optimisation of the antenna positions.
//!
//! The outer loop shrinks the penalty scale `rho`; the inner loop alternates
//! the lifted beamformer solves with one ascending element-wise sweep over
//! the antenna positions. All penalty quantities are normalised by the
//! largest attainable matrix trace so that tolerances are dimensionless.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{pinching_beamformer, BeamModel, ComplexVec};
use crate::conic::{lift, AdmmSettings, ConicSolver, DcState, HermitianMat, LiftedProblem, Side};
use crate::error::{Error, Result};
use crate::geometry::{PinchLayout, Polar, Scenario};
use crate::metrics::{evaluate, qos_gain_floor, MetricReport};

/// Rate shortfall tolerated in a successful report, bits/s/Hz.
pub const RATE_SLACK: f64 = 1e-3;

/// Grid points are never coarser than this fraction of a wavelength.
const GRID_FRACTION: f64 = 8.0;
const MAX_GRID: usize = 1 << 20;
/// Cap on the local minima refined per element search.
const MAX_BRACKETS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyConfig {
    pub rho_init: f64,
    /// Outer decay of `rho`, in (0, 1).
    pub c_bar_2: f64,
    /// Decay of the rank-one slack scales, in (0, 1).
    pub c_bar_1: f64,
    /// Rank-one slack threshold.
    pub eps_1: f64,
    /// Inner objective convergence.
    pub eps_2: f64,
    /// Outer residual threshold.
    pub eps_3: f64,
    /// The position grid has at least `2^q_bits` points.
    pub q_bits: u32,
    pub refine_iters: usize,
    pub max_outer: usize,
    pub max_inner: usize,
    pub max_rank_one: usize,
    /// Keep the target-side dominant eigenvector between rank-one runs.
    pub warm_dc: bool,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            rho_init: 100.0,
            c_bar_2: 0.7,
            c_bar_1: 0.5,
            eps_1: 1e-3,
            eps_2: 1e-3,
            eps_3: 1e-3,
            q_bits: 12,
            refine_iters: 40,
            max_outer: 30,
            max_inner: 50,
            max_rank_one: 200,
            warm_dc: true,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rho_init > 0.0
            && self.c_bar_2 > 0.0
            && self.c_bar_2 < 1.0
            && self.c_bar_1 > 0.0
            && self.c_bar_1 < 1.0
            && self.eps_1 > 0.0
            && self.eps_2 > 0.0
            && self.eps_3 > 0.0
            && self.q_bits >= 4
            && self.q_bits <= 20
            && self.max_outer > 0
            && self.max_inner > 0
            && self.max_rank_one > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid penalty configuration {self:?}")))
        }
    }
}

/// One inner iteration of the run log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub outer: usize,
    pub inner: usize,
    pub rho: f64,
    pub objective: f64,
    pub chi2: f64,
    pub rank_one_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub scheme: String,
    pub layout: PinchLayout,
    /// Analog phases, only for the phased-array baseline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<f64>>,
    pub metrics: MetricReport,
    /// Final normalised `||W~ - W(x)||_F + ||V~ - V(x)||_F`.
    pub residual: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub trace: Vec<TraceRecord>,
    pub feasible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SolveReport {
    pub fn illum_power(&self) -> f64 {
        self.metrics.illum_power
    }
}

/// Uniform layout `-L/2 + (n - 1/2) L / N`.
pub fn init_layout(scn: &Scenario) -> Result<PinchLayout> {
    scn.validate()?;
    let n = scn.n_antennas;
    let step = scn.length / n as f64;
    let xs = (0..n).map(|k| -scn.half_length() + (k as f64 + 0.5) * step).collect();
    PinchLayout::new(scn, xs)
}

/// Search settings shared by the element-wise updates.
#[derive(Debug, Clone)]
pub struct SearchSettings {
    pub q_bits: u32,
    pub refine_iters: usize,
    /// Per-antenna boxes intersected with the neighbour constraints.
    pub boxes: Option<Vec<(f64, f64)>>,
}

impl From<&PenaltyConfig> for SearchSettings {
    fn from(cfg: &PenaltyConfig) -> Self {
        Self {
            q_bits: cfg.q_bits,
            refine_iters: cfg.refine_iters,
            boxes: None,
        }
    }
}

/// Element-wise objective for antenna `n`.
///
/// The target term is `|v~_n - v_n(x)|`. The user term follows from
/// minimising over `W~` in closed form: when the layout with the candidate
/// coordinate meets the rate requirement, `W~ = W(x)` costs nothing;
/// otherwise the current `w~` is used and the whole distance
/// `sum_m |w~_m - w_m(x)|` is charged, so a sweep never increases the
/// position objective.
struct ElementCost<'a> {
    model: BeamModel<'a>,
    n: usize,
    x: f64,
    w_tilde: Complex64,
    v_tilde: Complex64,
    user_rest: Complex64,
    w_rest_dist: f64,
    floor: f64,
    eta: f64,
}

impl<'a> ElementCost<'a> {
    fn new(scn: &'a Scenario, layout: &PinchLayout, n: usize, w_tilde: &ComplexVec, v_tilde: &ComplexVec) -> Self {
        let model = BeamModel::new(scn);
        let xs = layout.positions();
        let mut user_rest = Complex64::new(0.0, 0.0);
        let mut w_rest_dist = 0.0;
        for (m, &x) in xs.iter().enumerate() {
            if m != n {
                let wm = model.entry(m, x, scn.user);
                user_rest += wm;
                w_rest_dist += (w_tilde[m] - wm).norm();
            }
        }
        Self {
            n,
            x: xs[n],
            w_tilde: w_tilde[n],
            v_tilde: v_tilde[n],
            user_rest,
            w_rest_dist,
            floor: qos_gain_floor(scn),
            eta: crate::channel::eta_const(scn),
            model,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let scn = self.model.scn;
        let vn = self.model.entry(self.n, x, scn.target);
        let wn = self.model.entry(self.n, x, scn.user);
        let v_term = (self.v_tilde - vn).norm();
        let gain = self.eta * (self.user_rest + wn).norm_sqr();
        if gain >= self.floor {
            v_term
        } else {
            v_term + self.w_rest_dist + (self.w_tilde - wn).norm()
        }
    }
}

/// Admissible interval of antenna `n` given its neighbours.
fn element_interval(
    scn: &Scenario,
    layout: &PinchLayout,
    n: usize,
    boxes: Option<&[(f64, f64)]>,
) -> Result<(f64, f64)> {
    let xs = layout.positions();
    let h = scn.half_length();
    let mut lo = if n > 0 { xs[n - 1] + scn.min_spacing } else { -h };
    let mut hi = if n + 1 < xs.len() {
        xs[n + 1] - scn.min_spacing
    } else {
        h
    };
    lo = lo.max(-h);
    hi = hi.min(h);
    if let Some(b) = boxes {
        lo = lo.max(b[n].0);
        hi = hi.min(b[n].1);
    }
    if lo > hi {
        // Round-off from the neighbour sums.
        if lo - hi <= 1e-12 {
            return Ok((hi, hi));
        }
        return Err(Error::Infeasible(format!(
            "antenna {n} has an empty interval [{lo}, {hi}]"
        )));
    }
    Ok((lo, hi))
}

/// Minimises the element-wise objective for antenna `n` over its interval
/// with an exhaustive grid followed by golden-section refinement of the
/// promising grid minima.
pub fn element_search(
    scn: &Scenario,
    layout: &PinchLayout,
    n: usize,
    w_tilde: &ComplexVec,
    v_tilde: &ComplexVec,
    settings: &SearchSettings,
) -> Result<f64> {
    if w_tilde.len() != layout.len() || v_tilde.len() != layout.len() || n >= layout.len() {
        return Err(Error::Domain("element search dimensions disagree".into()));
    }
    let (lo, hi) = element_interval(scn, layout, n, settings.boxes.as_deref())?;
    if hi - lo <= 0.0 {
        return Ok(lo);
    }
    let cost = ElementCost::new(scn, layout, n, w_tilde, v_tilde);

    let fine = ((hi - lo) / (scn.wavelength() / GRID_FRACTION)).ceil() as usize;
    let points = (1usize << settings.q_bits).max(fine).min(MAX_GRID);
    let step = (hi - lo) / (points - 1) as f64;
    let grid_x = |k: usize| if k + 1 == points { hi } else { lo + k as f64 * step };
    let values: Vec<f64> = (0..points).map(|k| cost.eval(grid_x(k))).collect();

    let mut best_x = lo;
    let mut best_f = f64::INFINITY;
    for (k, &f) in values.iter().enumerate() {
        if f < best_f {
            best_f = f;
            best_x = grid_x(k);
        }
    }
    // Keep the incumbent when it is at least as good.
    if cost.x >= lo && cost.x <= hi {
        let f = cost.eval(cost.x);
        if f <= best_f {
            best_f = f;
            best_x = cost.x;
        }
    }

    // Each discrete local minimum brackets a local minimum of the phase
    // term. Entry magnitudes vary by at most `sqrt(alpha_n) / r_min^2` per
    // metre, which bounds the target term from below across a bracket; when
    // even the largest user gain in the bracket misses the rate floor, the
    // user term is bounded the same way. Brackets are refined in order of
    // that bound until none can win.
    let slope_of = |p: Polar| {
        let r_min = crate::geometry::min_distance(scn, p.r, p.phi);
        cost.model.sqrt_alpha[n] / (r_min * r_min) * step
    };
    let (slope_v, slope_w) = (slope_of(scn.target), slope_of(scn.user));
    let v_mag = cost.v_tilde.norm();
    let w_mag = cost.w_tilde.norm();
    let rest = cost.user_rest.norm();
    let lower_bound = |x: f64| {
        let v_mag_x = cost.model.entry(n, x, scn.target).norm();
        let mut bound = ((v_mag - v_mag_x).abs() - slope_v).max(0.0);
        let w_mag_x = cost.model.entry(n, x, scn.user).norm();
        if cost.eta * (rest + w_mag_x + slope_w).powi(2) < cost.floor {
            bound += cost.w_rest_dist + ((w_mag - w_mag_x).abs() - slope_w).max(0.0);
        }
        bound
    };
    let mut brackets: Vec<(f64, usize)> = (0..points)
        .filter(|&k| (k == 0 || values[k] <= values[k - 1]) && (k + 1 == points || values[k] <= values[k + 1]))
        .map(|k| (lower_bound(grid_x(k)), k))
        .collect();
    brackets.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for &(bound, k) in brackets.iter().take(MAX_BRACKETS) {
        if bound >= best_f {
            break;
        }
        let mut a = grid_x(k.saturating_sub(1));
        let mut b = grid_x((k + 1).min(points - 1));
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = cost.eval(c);
        let mut fd = cost.eval(d);
        for _ in 0..settings.refine_iters {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = cost.eval(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = cost.eval(d);
            }
        }
        for (x, f) in [(c, fc), (d, fd)] {
            if f < best_f {
                best_f = f;
                best_x = x;
            }
        }
    }
    Ok(best_x)
}

/// Position objective: `sum_n |v~_n - v_n(x)|`, plus `sum_n |w~_n - w_n(x)|`
/// when the layout misses the rate requirement.
pub fn position_objective(scn: &Scenario, layout: &PinchLayout, w_tilde: &ComplexVec, v_tilde: &ComplexVec) -> f64 {
    let model = BeamModel::new(scn);
    let xs = layout.positions();
    let v = model.vector(xs, scn.target);
    let w = model.vector(xs, scn.user);
    let v_term: f64 = v.iter().zip(v_tilde.iter()).map(|(a, b)| (a - b).norm()).sum();
    let gain = crate::channel::eta_const(scn) * w.sum().norm_sqr();
    if gain >= qos_gain_floor(scn) {
        v_term
    } else {
        v_term + w.iter().zip(w_tilde.iter()).map(|(a, b)| (a - b).norm()).sum::<f64>()
    }
}

/// One ascending pass of [`element_search`].
pub fn position_sweep(
    scn: &Scenario,
    layout: &PinchLayout,
    w_tilde: &ComplexVec,
    v_tilde: &ComplexVec,
    settings: &SearchSettings,
) -> Result<PinchLayout> {
    let mut out = layout.clone();
    for n in 0..layout.len() {
        let x = element_search(scn, &out, n, w_tilde, v_tilde, settings)?;
        out.set(n, x);
    }
    Ok(out)
}

/// Rotates `x` by a global phase so that it is as close as possible to `anchor`.
fn align_phase(x: &ComplexVec, anchor: &ComplexVec) -> ComplexVec {
    let c = anchor.dotc(x);
    if c.norm() == 0.0 {
        return x.clone();
    }
    x * (c.conj() / c.norm())
}

/// Lifted matrices and scale factors of one layout.
struct LayoutState {
    w: ComplexVec,
    v: ComplexVec,
    w_mat: HermitianMat,
    v_mat: HermitianMat,
    qos_ok: bool,
}

impl LayoutState {
    fn new(scn: &Scenario, layout: &PinchLayout) -> Result<Self> {
        let w = pinching_beamformer(scn, layout, scn.user)?;
        let v = pinching_beamformer(scn, layout, scn.target)?;
        let gain = crate::channel::eta_const(scn) * w.sum().norm_sqr();
        Ok(Self {
            w_mat: lift(&w),
            v_mat: lift(&v),
            qos_ok: gain >= qos_gain_floor(scn),
            w,
            v,
        })
    }
}

/// Normalisation constants of the two lifted problems.
#[derive(Debug, Clone, Copy)]
struct Scales {
    trace_w: f64,
    trace_v: f64,
    gain_v: f64,
}

impl Scales {
    fn of(scn: &Scenario, anchor: &HermitianMat) -> Self {
        let wp = LiftedProblem::new(scn, Side::Communication, anchor.clone(), 1.0, 1.0, unit(anchor.nrows()));
        let vp = LiftedProblem::new(scn, Side::Sensing, anchor.clone(), 1.0, 1.0, unit(anchor.nrows()));
        Self {
            trace_w: wp.trace_scale(),
            trace_v: vp.trace_scale(),
            gain_v: vp.max_gain(),
        }
    }

    fn chi2(&self, w_t: &HermitianMat, v_t: &HermitianMat, st: &LayoutState) -> f64 {
        (w_t - &st.w_mat).norm() / self.trace_w + (v_t - &st.v_mat).norm() / self.trace_v
    }

    fn objective(&self, v_t: &HermitianMat, chi2: f64, rho: f64) -> f64 {
        v_t.iter().map(|z| z.re).sum::<f64>() / self.gain_v - chi2 / (2.0 * rho)
    }
}

fn unit(n: usize) -> ComplexVec {
    let mut e = ComplexVec::zeros(n);
    e[0] = Complex64::new(1.0, 0.0);
    e
}

/// Fails fast when no admissible beamformer can meet the rate requirement.
pub fn check_qos_attainable(scn: &Scenario) -> Result<()> {
    let n = scn.n_antennas;
    let prob = LiftedProblem::new(scn, Side::Communication, HermitianMat::zeros(n, n), 1.0, 1.0, unit(n));
    if prob.is_feasible() {
        Ok(())
    } else {
        Err(Error::Infeasible(format!(
            "rate requirement {} bits/s/Hz is unattainable: largest user gain {:.4e} is below {:.4e}",
            scn.rate_qos,
            prob.max_gain() * crate::channel::eta_const(scn),
            qos_gain_floor(scn)
        )))
    }
}

/// Penalty-based alternating optimisation from the uniform layout.
pub fn penalty_ao(scn: &Scenario, cfg: &PenaltyConfig) -> Result<SolveReport> {
    let start = init_layout(scn)?;
    penalty_ao_from(scn, cfg, start, SearchSettings::from(cfg), "pass")
}

/// Penalty-based alternating optimisation from a given layout and search
/// settings. The semi-continuous baseline reuses this with per-antenna boxes.
pub fn penalty_ao_from(
    scn: &Scenario,
    cfg: &PenaltyConfig,
    start: PinchLayout,
    search: SearchSettings,
    scheme: &str,
) -> Result<SolveReport> {
    scn.validate()?;
    cfg.validate()?;
    start.check(scn)?;
    check_qos_attainable(scn)?;

    let mut solver = ConicSolver::new(AdmmSettings::default());
    let mut layout = start;
    let mut state = LayoutState::new(scn, &layout)?;
    let scales = Scales::of(scn, &state.v_mat);
    let mut rho = cfg.rho_init;
    let mut trace = Vec::new();
    let mut inner_total = 0;
    let mut v_max: Option<ComplexVec> = None;
    let mut chi2 = f64::INFINITY;
    let mut converged = false;
    let mut note = None;
    let mut outer_done = 0;
    let mut stall = 0;
    // The residual can only drop once the penalty weight crosses a
    // threshold; a stall is declared after the weight grew a hundredfold
    // without progress.
    let stall_window = (100f64.ln() / (1.0 / cfg.c_bar_2).ln()).ceil() as usize;
    let mut last_outer: Option<(f64, f64)> = None;

    'outer: for outer in 1..=cfg.max_outer {
        outer_done = outer;
        let mut prev_obj: Option<f64> = None;
        let mut objective = f64::NAN;
        for inner in 1..=cfg.max_inner {
            inner_total += 1;
            let mut dc = DcState::new(&state.w_mat, &state.v_mat)?.with_tolerance(cfg.eps_1);
            dc.decay = cfg.c_bar_1;
            dc.max_iters = cfg.max_rank_one;
            if cfg.warm_dc {
                if let Some(v) = &v_max {
                    dc.v_max = v.clone();
                }
            }
            let r1 = match solver.rank_one_loop(scn, &state.w_mat, &state.v_mat, rho, &mut dc) {
                Ok(r) => r,
                Err(e @ (Error::RankOneNotConverged { .. } | Error::NotConverged { .. })) => {
                    note = Some(e.to_string());
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            v_max = Some(dc.v_max.clone());
            let w_t = align_phase(&r1.w, &state.w);
            let v_t = align_phase(&r1.v, &state.v);
            let v_mat_t = lift(&v_t);

            layout = position_sweep(scn, &layout, &w_t, &v_t, &search)?;
            state = LayoutState::new(scn, &layout)?;
            // With the rate requirement met, W~ = W(x) is the best user-side choice.
            let w_mat_t = if state.qos_ok { state.w_mat.clone() } else { lift(&w_t) };
            chi2 = scales.chi2(&w_mat_t, &v_mat_t, &state);
            objective = scales.objective(&v_mat_t, chi2, rho);
            trace.push(TraceRecord {
                outer,
                inner,
                rho,
                objective,
                chi2,
                rank_one_iters: r1.iterations,
            });
            log::debug!("outer {outer} inner {inner} rho {rho:.4e} objective {objective:.9e} chi2 {chi2:.4e}");
            if let Some(p) = prev_obj {
                if (objective - p).abs() <= cfg.eps_2 {
                    break;
                }
            }
            prev_obj = Some(objective);
        }

        if chi2 <= cfg.eps_3 {
            converged = true;
            break;
        }
        if let Some((obj0, chi0)) = last_outer {
            if (objective - obj0).abs() <= cfg.eps_2 && chi2 >= chi0 * (1.0 - 1e-6) {
                stall += 1;
            } else {
                stall = 0;
            }
            if stall >= stall_window {
                note = Some(format!("stalled with residual {chi2:.3e}"));
                break;
            }
        }
        last_outer = Some((objective, chi2));
        rho *= cfg.c_bar_2;
    }

    let metrics = evaluate(scn, &layout)?;
    let qos = metrics.rate >= scn.rate_qos - RATE_SLACK;
    if converged && !qos {
        note = Some(format!("rate {:.6} misses the requirement", metrics.rate));
    } else if !converged && note.is_none() {
        note = Some(format!("iteration cap reached with residual {chi2:.3e}"));
    }
    Ok(SolveReport {
        scheme: scheme.to_string(),
        feasible: converged && qos && layout.is_feasible(scn),
        layout,
        phases: None,
        metrics,
        residual: chi2,
        outer_iters: outer_done,
        inner_iters: inner_total,
        trace,
        note,
    })
}

/// Metrics of a report's layout recomputed from scratch.
pub fn revalidate_layout(scn: &Scenario, layout: &PinchLayout) -> Result<MetricReport> {
    layout.check(scn)?;
    evaluate(scn, layout)
}
