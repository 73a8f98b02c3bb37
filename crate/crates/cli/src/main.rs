use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pass_isac::harness::{
    load_config, oracle_compare, run_scenario, run_sweep, summary_line, write_csv, write_oracle_csv, RunConfig, Scheme,
};
use pass_isac::oracle::{brute_force_positions, OracleGrid};
use pass_isac::Error;

/// Pinching-antenna ISAC simulator.
#[derive(Debug, Parser)]
#[command(name = "pass-isac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scheme to run: pass, ula, fixed or semi.
    #[arg(long, global = true)]
    scheme: Option<Scheme>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,

    /// Seed for randomised placements; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimise one scenario and write report.json and trace.txt.
    Solve {
        config: PathBuf,
        /// Also run the brute-force position oracle (three antennas at most).
        #[arg(long)]
        oracle: bool,
    },
    /// Run the sweep described in the config and write sweep.csv.
    Sweep {
        config: PathBuf,
        /// Record wall-clock time per cell (makes the CSV non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Compare the optimiser with brute force and write oracle.csv.
    Oracle { config: PathBuf },
}

fn load(cli: &Cli, path: &Path) -> Result<RunConfig, Error> {
    let mut cfg = load_config(path)?;
    if let Some(s) = cli.scheme {
        cfg.scheme = s;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        if let Some(sweep) = cfg.sweep.as_mut() {
            sweep.seed = seed;
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Solve { config, oracle } => {
            let cfg = load(cli, config)?;
            let report = run_scenario(&cfg, Some(&cli.out))?;
            println!("{}", summary_line(&report));
            if *oracle {
                let (layout, ps) = brute_force_positions(&cfg.scenario, OracleGrid::positions())?;
                println!(
                    "oracle P_s={ps:.6e} W layout={:?} ratio={:.6}",
                    layout.positions(),
                    report.metrics.illum_power / ps
                );
            }
            if !report.feasible {
                eprintln!("warning: {}", report.note.as_deref().unwrap_or("solution not feasible"));
            }
        }
        Command::Sweep { config, timing } => {
            let cfg = load(cli, config)?;
            let mut plan = cfg.sweep.clone().ok_or_else(|| Error::Config {
                line: None,
                message: "missing [sweep] table".into(),
            })?;
            if let Some(s) = cli.scheme {
                plan.schemes = vec![s];
            }
            let rows = run_sweep(&cfg.scenario, &plan, &cfg.solver, cfg.semi_range, cli.workers, *timing)?;
            let path = cli.out.join("sweep.csv");
            write_csv(&rows, &path)?;
            for r in &rows {
                let series = r
                    .series_value
                    .map(|v| format!(" {}={v}", r.series_variable))
                    .unwrap_or_default();
                println!(
                    "{}={}{series} {} {} P_s={:.6e} W feasible={}",
                    r.variable, r.value, r.power_model, r.scheme, r.ps_w, r.feasible
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Oracle { config } => {
            let cfg = load(cli, config)?;
            let rows = oracle_compare(&cfg.scenario, &cfg.solver, &cfg.oracle, cfg.seed)?;
            let path = cli.out.join("oracle.csv");
            write_oracle_csv(&rows, &path)?;
            let good = rows.iter().filter(|r| r.ratio >= 0.95 && r.pass_feasible).count();
            for r in &rows {
                println!(
                    "instance {} optimiser {:.6e} W oracle {:.6e} W ratio {:.4} feasible {}",
                    r.instance, r.pass_ps_w, r.oracle_ps_w, r.ratio, r.pass_feasible
                );
            }
            println!(
                "{good}/{} instances within 5% of the oracle; wrote {}",
                rows.len(),
                path.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } | Error::Io(_) => ExitCode::from(2),
                Error::Infeasible(_) => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
