//! Command plumbing: configuration, single runs, sweeps and oracle checks.

mod config;
mod sweep;

pub use config::{load_config, parse_config, OraclePlan, RunConfig, Scheme, SweepPlan, SweepVariable};
pub use sweep::{
    oracle_compare, read_csv, revalidate_row, run_sweep, write_csv, write_oracle_csv, OracleRow, SweepRow, CSV_HEADER,
};

use std::fmt::Write as _;
use std::path::Path;

use crate::baselines::{fixed_pinching, semi_continuous, ula_optimize, SemiContConfig, UlaConfig};
use crate::error::Result;
use crate::geometry::Scenario;
use crate::optimizer::{penalty_ao, PenaltyConfig, SolveReport};
use crate::units::watts_to_dbm;

/// Runs one scheme on one scenario.
pub fn solve_scheme(
    scn: &Scenario,
    scheme: Scheme,
    solver: &PenaltyConfig,
    semi_range: Option<f64>,
) -> Result<SolveReport> {
    match scheme {
        Scheme::Pass => penalty_ao(scn, solver),
        Scheme::Fixed => fixed_pinching(scn),
        Scheme::Ula => ula_optimize(scn, &UlaConfig::for_scenario(scn)),
        Scheme::Semi => {
            let mut cfg = SemiContConfig::for_scenario(scn)?;
            if let Some(r) = semi_range {
                cfg.range = r;
            }
            semi_continuous(scn, &cfg, solver)
        }
    }
}

/// Runs the configured scheme and, when `out_dir` is given, writes
/// `report.json` and `trace.txt` there.
pub fn run_scenario(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<SolveReport> {
    let report = solve_scheme(&cfg.scenario, cfg.scheme, &cfg.solver, cfg.semi_range)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(&report).expect("reports serialise");
        std::fs::write(dir.join("report.json"), json + "\n")?;
        std::fs::write(dir.join("trace.txt"), trace_text(&report))?;
    }
    Ok(report)
}

/// One record per inner iteration: outer index, inner index, penalty
/// scale, objective and residual.
pub fn trace_text(report: &SolveReport) -> String {
    let mut out = String::from("outer inner rho objective chi2 rank_one_iters\n");
    for t in &report.trace {
        let _ = writeln!(
            out,
            "{} {} {:.6e} {:.12e} {:.6e} {}",
            t.outer, t.inner, t.rho, t.objective, t.chi2, t.rank_one_iters
        );
    }
    out
}

pub fn summary_line(report: &SolveReport) -> String {
    let ps = report.metrics.illum_power;
    format!(
        "scheme={} P_s={:.6e} W ({:.4} dBm) rate={:.4} bit/s/Hz feasible={} outer={} inner={}",
        report.scheme,
        ps,
        watts_to_dbm(ps),
        report.metrics.rate,
        report.feasible,
        report.outer_iters,
        report.inner_iters
    )
}
