use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mue::cli::{
    cmd_solve, cmd_sweep, cmd_validate, exit_code, parse_formats, parse_levels, threads_from_env, ErrorReport,
    RunConfig, EXIT_CONVERGENCE, EXIT_OK,
};
use mue::equilibrium::{Method, SolverOptions};
use mue::Error;

#[derive(Parser)]
#[command(name = "mue", version, about = "Mixed GV/EV multi-user equilibrium assignment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check inputs and print a summary.
    Validate(Inputs),
    /// Solve one penetration level.
    Solve {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        solver: Solver,
        #[arg(long, default_value_t = 0.0)]
        penetration: f64,
    },
    /// Solve a range of penetration levels and analyse the curve.
    Sweep {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        solver: Solver,
        /// `start:end:step` or a comma list.
        #[arg(long, default_value = "0:1:0.05")]
        levels: String,
    },
}

#[derive(Args)]
struct Inputs {
    /// Nodes CSV.
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    links: PathBuf,
    #[arg(long)]
    zones: PathBuf,
    #[arg(long)]
    od: PathBuf,
    #[arg(long)]
    cost_config: PathBuf,
    #[arg(long)]
    capacity_constraints: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value = "csv,json")]
    format: String,
}

#[derive(Args)]
struct Solver {
    #[arg(long, default_value = "bfw")]
    method: String,
    #[arg(long, default_value_t = 1e-4)]
    rel_gap: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn config(inputs: Inputs, solver: Option<Solver>) -> Result<RunConfig, Error> {
    let mut options = SolverOptions {
        threads: threads_from_env(),
        ..Default::default()
    };
    if let Some(s) = solver {
        options.method = s.method.parse::<Method>()?;
        options.rel_gap_tol = s.rel_gap;
        options.max_iters = s.max_iters;
        options.seed = s.seed;
    }
    Ok(RunConfig {
        nodes: inputs.network,
        links: inputs.links,
        zones: inputs.zones,
        od: inputs.od,
        cost_config: inputs.cost_config,
        capacity_constraints: inputs.capacity_constraints,
        solver: options,
        penetration: 0.0,
        levels: Vec::new(),
        out: inputs.out,
        formats: parse_formats(&inputs.format)?,
    })
}

fn run(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Validate(inputs) => {
            let report = cmd_validate(&config(inputs, None)?)?;
            println!("{report}");
            Ok(EXIT_OK)
        }
        Command::Solve {
            inputs,
            solver,
            penetration,
        } => {
            let mut cfg = config(inputs, Some(solver))?;
            cfg.penetration = penetration;
            let outcome = cmd_solve(&cfg)?;
            let s = &outcome.solution;
            println!(
                "R_e={} iterations={} relative_gap={:.3e} T_mue={:.4} min converged={}",
                s.penetration, s.iterations, s.relative_gap, outcome.metrics.avg_travel_time_mue, s.converged
            );
            Ok(if s.converged { EXIT_OK } else { EXIT_CONVERGENCE })
        }
        Command::Sweep { inputs, solver, levels } => {
            let mut cfg = config(inputs, Some(solver))?;
            cfg.levels = parse_levels(&levels)?;
            let sweep = cmd_sweep(&cfg)?;
            for r in sweep.rows() {
                let ps = r.ps.map_or_else(|| "undefined".to_string(), |v| format!("{v:.2}"));
                println!("R_e={:.3} T_mue={:.4} PS={ps}", r.penetration, r.t_mue);
            }
            if let Some(c) = &sweep.city_type {
                println!("city type {:?}: {}", c.city_type, c.rationale);
            }
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            let report = ErrorReport::new(&e);
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| e.to_string()));
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
