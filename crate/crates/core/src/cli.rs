//! Command-line front end. Exit codes: 0 success, 1 usage or validation
//! error, 2 solver failure.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{check_prop1, horizon_budget, horizon_budget_general, mean};
use crate::controllers::{ControllerConfig, ControllerKind};
use crate::harness::{run_closed_loop, run_fixed, write_record, write_solves, write_summary, RunError, RunRecord};
use crate::scenario::Scenario;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;

/// Environment variable holding the solver thread count (0 = deterministic,
/// single-threaded).
pub const THREADS_ENV: &str = "CAPDROP_THREADS";

#[derive(Debug, Parser)]
#[command(name = "capdrop", version, about = "Freeway ramp metering with capacity drop")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the plant with every ramp held at a fixed metering rate.
    Simulate {
        scenario: PathBuf,
        /// Metering rate in [0, 1] applied to every ramp.
        #[arg(long, default_value_t = 1.0)]
        u: f64,
        /// Directory for trajectory.csv and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one controller in closed loop.
    Control {
        scenario: PathBuf,
        #[arg(long)]
        controller: ControllerKind,
        #[command(flatten)]
        solver: SolverArgs,
        /// Directory for trajectory.csv, solves.csv and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sufficient rollout horizon for a two-cell scenario.
    Horizon {
        scenario: PathBuf,
        /// Use the demand-function forms.
        #[arg(long)]
        general: bool,
        /// Cell-1 density at the start of decongestion (default: scenario x0).
        #[arg(long)]
        x1: Option<f64>,
    },
    /// Throughput-gap conditions for a two-cell scenario.
    Analyze {
        scenario: PathBuf,
        /// Average upstream inflow (default: mean of the scenario's series).
        #[arg(long)]
        lambda0: Option<f64>,
    },
    /// Run several controllers and rank them by cumulative exits.
    Compare {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "none,rampc,hc,ehmpc")]
        controllers: Vec<ControllerKind>,
        #[command(flatten)]
        solver: SolverArgs,
        /// Directory for compare.csv and one trajectory per controller.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Rollout horizon (default depends on the controller).
    #[arg(long)]
    horizon: Option<usize>,
    /// Planned actions applied before re-solving.
    #[arg(long)]
    memory: Option<usize>,
    #[arg(long)]
    delta_c: Option<f64>,
    /// Branch-and-bound node limit per solve.
    #[arg(long)]
    node_limit: Option<usize>,
    /// Wall-clock limit per solve, in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn invalid(message: impl fmt::Display) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: message.to_string(),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        let code = match e {
            RunError::Control { .. } => EXIT_SOLVER,
            RunError::Config(_) | RunError::Model { .. } => EXIT_INVALID,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn threads_from_env() -> Result<usize, Failure> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::invalid(format!("{THREADS_ENV}={v} is not a thread count"))),
        Err(_) => Ok(0),
    }
}

fn config(kind: ControllerKind, args: &SolverArgs, threads: usize) -> Result<ControllerConfig, Failure> {
    let mut cfg = ControllerConfig::new(kind);
    if let Some(h) = args.horizon {
        cfg.horizon = h;
    }
    if let Some(m) = args.memory {
        cfg.memory = m;
    }
    if args.horizon.is_some() && args.memory.is_none() {
        cfg.memory = cfg.memory.min(cfg.horizon);
    }
    if let Some(d) = args.delta_c {
        cfg.delta_c = d;
    }
    if let Some(n) = args.node_limit {
        cfg.node_limit = n;
    }
    if let Some(t) = args.time_limit {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Failure::invalid(format!("--time-limit must be positive, got {t}")));
        }
        cfg.time_limit = Some(Duration::from_secs_f64(t));
    }
    cfg.threads = threads;
    Ok(cfg)
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    Scenario::load(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn write_outputs(record: &RunRecord, dir: &Path, with_solves: bool) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::invalid(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    write_record(record, dir.join("trajectory.csv")).map_err(io)?;
    if with_solves {
        write_solves(record, dir.join("solves.csv")).map_err(io)?;
    }
    write_summary(record, dir.join("summary.json")).map_err(io)
}

fn print_run(record: &RunRecord) {
    let s = record.summary();
    println!("scenario          {}", s.scenario);
    println!("controller        {}", s.controller);
    println!("steps             {}", s.steps);
    println!("cumulative exits  {:.4}", s.cumulative_exits);
    println!("last-20 exit rate {:.4}", record.tail_exit_rate(20));
    println!("vehicles left     {:.4}", s.final_vehicles);
    if s.solves > 0 {
        println!("solves            {}", s.solves);
        println!("solve time        {:.3} s total, {:.3} s max", s.total_solve_time, s.max_solve_time);
        println!("limited solves    {}", s.limited_solves);
        println!("fallback solves   {}", s.fallback_solves);
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { scenario, u, out } => {
            let scn = load(&scenario)?;
            let record = run_fixed(&scn, u)?;
            print_run(&record);
            if let Some(dir) = out {
                write_outputs(&record, &dir, false)?;
            }
        }
        Command::Control {
            scenario,
            controller,
            solver,
            out,
        } => {
            let scn = load(&scenario)?;
            let cfg = config(controller, &solver, threads_from_env()?)?;
            let record = run_closed_loop(&scn, &cfg)?;
            print_run(&record);
            if let Some(dir) = out {
                write_outputs(&record, &dir, true)?;
            }
        }
        Command::Horizon {
            scenario,
            general,
            x1,
        } => {
            let scn = load(&scenario)?;
            let lambda0 = scn.lambda0.window(0, scn.k.max(1));
            let budget = if general {
                horizon_budget_general(&scn.network, &lambda0)
            } else {
                let x1 = x1.unwrap_or_else(|| scn.x0.first().copied().unwrap_or(0.0));
                horizon_budget(&scn.network, x1, &lambda0)
            }
            .map_err(Failure::invalid)?;
            println!("T_D={}", budget.t_d);
            println!("T_R={}", budget.t_r);
            println!("T_S={}", budget.t_s);
            println!("total={}", budget.total);
            println!("E_decon_avg={:.4}", budget.e_decon_avg);
            println!("E_recov_avg={:.4}", budget.e_recov_avg);
        }
        Command::Analyze { scenario, lambda0 } => {
            let scn = load(&scenario)?;
            let lambda0 = lambda0.unwrap_or_else(|| mean(&scn.lambda0.window(0, scn.k.max(1))));
            let a = check_prop1(&scn.network, lambda0).map_err(Failure::invalid)?;
            println!("lambda0           {lambda0:.4}");
            println!("x_c               {:.4}", a.x_c);
            println!("x1 target         {:.4}", a.x1_target);
            println!("fill condition    {}", a.fill_ok);
            println!("drain condition   {}", a.drain_ok);
            println!("gap condition     {}", a.gap_ok);
            println!("E_convex          {:.4}", a.e_convex);
            println!("E_hyst            {:.4}", a.e_hyst);
            println!("delta_E           {:.4}", a.delta_e);
        }
        Command::Compare {
            scenario,
            controllers,
            solver,
            out,
        } => {
            let scn = load(&scenario)?;
            let threads = threads_from_env()?;
            let mut records = Vec::new();
            for kind in controllers {
                let cfg = config(kind, &solver, threads)?;
                log::info!("running {kind}");
                records.push(run_closed_loop(&scn, &cfg)?);
            }
            records.sort_by(|a, b| b.cumulative_exits().total_cmp(&a.cumulative_exits()));
            println!(
                "{:<4} {:<8} {:>16} {:>12} {:>12} {:>10}",
                "rank", "control", "cumulative_exits", "last20_rate", "solve_time", "max_solve"
            );
            for (i, r) in records.iter().enumerate() {
                let s = r.summary();
                println!(
                    "{:<4} {:<8} {:>16.4} {:>12.4} {:>12.3} {:>10.3}",
                    i + 1,
                    s.controller.name(),
                    s.cumulative_exits,
                    r.tail_exit_rate(20),
                    s.total_solve_time,
                    s.max_solve_time
                );
            }
            if let Some(dir) = out {
                let io = |e: std::io::Error| Failure::invalid(format!("{}: {e}", dir.display()));
                std::fs::create_dir_all(&dir).map_err(io)?;
                let mut table = String::from("rank,controller,cumulative_exits,total_solve_time,max_solve_time\n");
                for (i, r) in records.iter().enumerate() {
                    let s = r.summary();
                    table.push_str(&format!(
                        "{},{},{},{},{}\n",
                        i + 1,
                        s.controller.name(),
                        crate::harness::format_sig(s.cumulative_exits),
                        crate::harness::format_sig(s.total_solve_time),
                        crate::harness::format_sig(s.max_solve_time)
                    ));
                    write_outputs(r, &dir.join(s.controller.name()), true)?;
                }
                std::fs::write(dir.join("compare.csv"), table).map_err(io)?;
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
