//! Parameter sweeps with CSV output, and optimiser-versus-oracle comparisons.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use super::config::{OraclePlan, Scheme, SweepPlan, SweepVariable};
use super::solve_scheme;
use crate::baselines::ula_metrics;
use crate::error::{Error, Result};
use crate::geometry::{PinchLayout, Polar, PowerModel, Scenario};
use crate::metrics::MetricReport;
use crate::optimizer::{penalty_ao, revalidate_layout, PenaltyConfig};
use crate::oracle::{brute_force_positions, OracleGrid};
use crate::units::watts_to_dbm;

pub const CSV_HEADER: &str = "variable,value,series_variable,series_value,power_model,scheme,P_s_W,P_s_dBm,rate,feasible,outer_iters,wall_ms,layout,phases";

/// One sweep cell. `layout` and `phases` are `;`-separated lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variable: String,
    pub value: f64,
    pub series_variable: String,
    pub series_value: Option<f64>,
    pub power_model: String,
    pub scheme: String,
    #[serde(rename = "P_s_W")]
    pub ps_w: f64,
    #[serde(rename = "P_s_dBm")]
    pub ps_dbm: f64,
    pub rate: f64,
    pub feasible: bool,
    pub outer_iters: usize,
    pub wall_ms: u64,
    pub layout: String,
    pub phases: String,
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn split(s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::Domain(format!("bad number `{t}` in list: {e}")))
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    value: f64,
    series: Option<f64>,
    model: PowerModel,
    scheme: Scheme,
}

fn cell_scenario(
    base: &Scenario,
    sweep_var: SweepVariable,
    cell: &Cell,
    series_var: Option<SweepVariable>,
) -> Result<Scenario> {
    let mut scn = sweep_var.apply(base, cell.value)?;
    if let (Some(var), Some(v)) = (series_var, cell.series) {
        scn = var.apply(&scn, v)?;
    }
    scn.power_model = cell.model;
    Ok(scn)
}

/// Runs every cell of the sweep, `workers` at a time. Rows come out in
/// grid order (series value, then value, then power model, then scheme)
/// regardless of completion order. `wall_ms` is recorded only with
/// `timing`, so that repeated runs produce identical files.
pub fn run_sweep(
    base: &Scenario,
    plan: &SweepPlan,
    solver: &PenaltyConfig,
    semi_range: Option<f64>,
    workers: usize,
    timing: bool,
) -> Result<Vec<SweepRow>> {
    plan.validate()?;
    let series_var = plan.series.as_ref().map(|(v, _)| *v);
    let series_vals: Vec<Option<f64>> = match &plan.series {
        Some((_, vals)) => vals.iter().map(|&v| Some(v)).collect(),
        None => vec![None],
    };
    let mut cells = Vec::new();
    for &series in &series_vals {
        for &value in &plan.values {
            for &model in &plan.power_models {
                for &scheme in &plan.schemes {
                    cells.push(Cell {
                        value,
                        series,
                        model,
                        scheme,
                    });
                }
            }
        }
    }

    let run_cell = |cell: &Cell| -> SweepRow {
        let start = Instant::now();
        let outcome = cell_scenario(base, plan.variable, cell, series_var)
            .and_then(|scn| solve_scheme(&scn, cell.scheme, solver, semi_range));
        let wall_ms = if timing { start.elapsed().as_millis() as u64 } else { 0 };
        let mut row = SweepRow {
            variable: plan.variable.name().to_string(),
            value: cell.value,
            series_variable: series_var.map(|v| v.name().to_string()).unwrap_or_default(),
            series_value: cell.series,
            power_model: cell.model.name().to_string(),
            scheme: cell.scheme.name().to_string(),
            ps_w: f64::NAN,
            ps_dbm: f64::NAN,
            rate: f64::NAN,
            feasible: false,
            outer_iters: 0,
            wall_ms,
            layout: String::new(),
            phases: String::new(),
        };
        match outcome {
            Ok(rep) => {
                row.ps_w = rep.metrics.illum_power;
                row.ps_dbm = watts_to_dbm(rep.metrics.illum_power);
                row.rate = rep.metrics.rate;
                row.feasible = rep.feasible;
                row.outer_iters = rep.outer_iters;
                row.layout = join(rep.layout.positions());
                row.phases = rep.phases.as_deref().map(join).unwrap_or_default();
            }
            Err(e) => log::warn!(
                "{}={} {} {}: {e}",
                plan.variable.name(),
                cell.value,
                cell.model.name(),
                cell.scheme.name()
            ),
        }
        row
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| cells.par_iter().map(run_cell).collect()))
}

pub fn write_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    write_rows(rows, path)
}

pub fn write_oracle_csv(rows: &[OracleRow], path: &Path) -> Result<()> {
    write_rows(rows, path)
}

fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config {
        line: e.position().map(|p| p.line() as usize),
        message: e.to_string(),
    }
}

/// Recomputes a row's metrics from its stored layout (and phases).
pub fn revalidate_row(base: &Scenario, row: &SweepRow) -> Result<MetricReport> {
    let var: SweepVariable = row.variable.parse()?;
    let mut scn = var.apply(base, row.value)?;
    if let Some(v) = row.series_value {
        scn = row.series_variable.parse::<SweepVariable>()?.apply(&scn, v)?;
    }
    scn.power_model = row.power_model.parse()?;
    let layout = PinchLayout::new(&scn, split(&row.layout)?)?;
    let phases = split(&row.phases)?;
    if phases.is_empty() {
        revalidate_layout(&scn, &layout)
    } else {
        ula_metrics(&scn, &layout, &phases)
    }
}

/// Optimiser against brute force on one placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub instance: usize,
    pub user_r_m: f64,
    pub user_phi_deg: f64,
    pub target_r_m: f64,
    pub target_phi_deg: f64,
    pub pass_ps_w: f64,
    pub oracle_ps_w: f64,
    pub ratio: f64,
    pub pass_rate: f64,
    pub pass_feasible: bool,
    pub pass_layout: String,
    pub oracle_layout: String,
}

/// Runs the optimiser and the position oracle either on the configured
/// scenario (`plan.instances == 0`) or on seeded random placements of the
/// user and target with distances in `[2, 20]` m.
pub fn oracle_compare(base: &Scenario, solver: &PenaltyConfig, plan: &OraclePlan, seed: u64) -> Result<Vec<OracleRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scenarios: Vec<Scenario> = if plan.instances == 0 {
        vec![base.clone()]
    } else {
        (0..plan.instances)
            .map(|_| {
                let mut s = base.clone();
                s.user = Polar::new(rng.random_range(2.0..20.0), rng.random_range(0.0..2.0 * PI));
                s.target = Polar::new(rng.random_range(2.0..20.0), rng.random_range(0.0..2.0 * PI));
                s
            })
            .collect()
    };
    let grid = OracleGrid {
        resolution: plan.resolution,
        qos_filter: true,
    };
    scenarios
        .iter()
        .enumerate()
        .map(|(i, scn)| {
            let (o_layout, o_ps) = brute_force_positions(scn, grid)?;
            let (p_ps, p_rate, p_ok, p_layout) = match penalty_ao(scn, solver) {
                Ok(r) => (
                    r.metrics.illum_power,
                    r.metrics.rate,
                    r.feasible,
                    join(r.layout.positions()),
                ),
                Err(e) => {
                    log::warn!("instance {i}: {e}");
                    (f64::NAN, f64::NAN, false, String::new())
                }
            };
            Ok(OracleRow {
                instance: i,
                user_r_m: scn.user.r,
                user_phi_deg: scn.user.phi.to_degrees(),
                target_r_m: scn.target.r,
                target_phi_deg: scn.target.phi.to_degrees(),
                pass_ps_w: p_ps,
                oracle_ps_w: o_ps,
                ratio: p_ps / o_ps,
                pass_rate: p_rate,
                pass_feasible: p_ok,
                pass_layout: p_layout,
                oracle_layout: join(o_layout.positions()),
            })
        })
        .collect()
}
