//! `dtsched` — plan, execute, benchmark, and compare energy-aware batch
//! production schedules from the command line.
//!
//! All inputs and reports are JSON; `--format csv` switches timeline output
//! to CSV and leaves everything else untouched. Every command is
//! deterministic: identical inputs produce byte-identical outputs.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 infeasible
//! plan, 3 rescheduling failure.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use dtsched_core::decision::{
    benchmark_schedule, open_loop_optimal, DecisionError, LookaheadConfig, TieBreak,
};
use dtsched_core::planning::DisturbanceSet;
use dtsched_core::pta::{MachineSpec, OrderSpec, PtaModel, ScheduleString};
use dtsched_core::runlog::{RunLog, RunOutcome};
use dtsched_core::simulate::{
    compare, run_fixed, run_llp, timeline, timeline_csv, ComparisonReport, SimError,
};
use dtsched_core::store::Store;
use dtsched_core::tariff::PriceSchedule;

const EXIT_CONFIG: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_RESCHEDULING: u8 = 3;

#[derive(Parser)]
#[command(
    name = "dtsched",
    version,
    about = "Energy-aware batch production scheduling under time-of-use electricity tariffs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// JSON report
    Json,
    /// Hourly timeline as CSV (commands without a timeline keep JSON)
    Csv,
}

#[derive(Args)]
struct FixtureArgs {
    /// Machine description (JSON)
    #[arg(long, value_name = "FILE")]
    machine: PathBuf,
    /// Customer order with milestones (JSON)
    #[arg(long, value_name = "FILE")]
    order: PathBuf,
    /// Electricity price schedule (JSON)
    #[arg(long, value_name = "FILE")]
    prices: PathBuf,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the report to this file instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the whole order open loop and report the cheapest schedule
    Plan {
        #[command(flatten)]
        fixtures: FixtureArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Drive the order with the receding-horizon controller
    Run {
        #[command(flatten)]
        fixtures: FixtureArgs,
        /// Disturbance file applied as its instants pass (JSON)
        #[arg(long, value_name = "FILE")]
        disturbances: Option<PathBuf>,
        /// Lookahead depth in events (must be at least 1)
        #[arg(long, default_value_t = 2)]
        window: usize,
        /// Append the run log to this history directory
        #[arg(long, value_name = "DIR")]
        data_dir: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Execute the maximum-utilization reference schedule
    Benchmark {
        #[command(flatten)]
        fixtures: FixtureArgs,
        /// Append the run log to this history directory
        #[arg(long, value_name = "DIR")]
        data_dir: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Compare two stored runs, or a stored run against the benchmark
    Compare {
        /// History directory holding the stored runs
        #[arg(long, value_name = "DIR")]
        data_dir: PathBuf,
        /// Store id of the primary run
        run_a: u64,
        /// Store id of the run to compare against
        run_b: Option<u64>,
        /// `benchmark` rebuilds the reference run from run A's own fixtures
        #[arg(long, value_name = "WHAT", conflicts_with = "run_b")]
        against: Option<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

/// A failed command: what to tell the operator and which exit code to use.
struct Failure {
    code: u8,
    message: String,
}

type CliResult = Result<(), Failure>;

impl Failure {
    fn config(message: impl Display) -> Self {
        Self { code: EXIT_CONFIG, message: message.to_string() }
    }
}

fn decision_failure(e: DecisionError) -> Failure {
    let code = match e {
        DecisionError::Infeasible { .. } | DecisionError::InfeasibleDeadline { .. } => {
            EXIT_INFEASIBLE
        }
        DecisionError::ReschedulingFailure { .. } => EXIT_RESCHEDULING,
        _ => EXIT_CONFIG,
    };
    Failure { code, message: e.to_string() }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Decision(d) => decision_failure(d),
            other => Failure::config(other),
        }
    }
}

impl From<dtsched_core::store::StoreError> for Failure {
    fn from(e: dtsched_core::store::StoreError) -> Self {
        Failure::config(e)
    }
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| {
        Failure::config(format!("cannot read {} file {}: {}", what, path.display(), e))
    })?;
    serde_json::from_str(&text).map_err(|e| {
        Failure::config(format!("invalid {} file {}: {}", what, path.display(), e))
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string(value)
        .map_err(|e| Failure::config(format!("cannot serialize report: {}", e)))?;
    s.push('\n');
    Ok(s)
}

fn emit(out: &Option<PathBuf>, content: &str) -> CliResult {
    match out {
        Some(path) => fs::write(path, content).map_err(|e| {
            Failure::config(format!("cannot write {}: {}", path.display(), e))
        }),
        None => {
            print!("{}", content);
            Ok(())
        }
    }
}

type Fixtures = (MachineSpec<f64>, OrderSpec<f64>, PriceSchedule<f64>);

fn load_fixtures(fx: &FixtureArgs) -> Result<Fixtures, Failure> {
    Ok((
        read_json(&fx.machine, "machine")?,
        read_json(&fx.order, "order")?,
        read_json(&fx.prices, "prices")?,
    ))
}

fn persist(data_dir: &Option<PathBuf>, log: &RunLog<f64>) -> CliResult {
    if let Some(dir) = data_dir {
        let mut store = Store::open(dir)?;
        let id = store.append_run(log)?;
        eprintln!("stored run {} in {}", id, dir.display());
    }
    Ok(())
}

/// The run log itself, or its hourly timeline when CSV was requested.
fn render_run(log: &RunLog<f64>, format: Format) -> Result<String, Failure> {
    match format {
        Format::Json => to_json(log),
        Format::Csv => Ok(timeline_csv(&timeline(log)?)),
    }
}

#[derive(Serialize)]
struct PlanReport<'a> {
    schedule: &'a ScheduleString,
    cost: f64,
    start_h: f64,
    end_h: f64,
}

fn cmd_plan(fixtures: &FixtureArgs, output: &OutputArgs) -> CliResult {
    let (machine, order, prices) = load_fixtures(fixtures)?;
    let model = PtaModel::new(machine, order).map_err(Failure::config)?;
    let start_h = model.start_time_h();
    let (schedule, cost) = open_loop_optimal(&model, &prices, start_h, TieBreak::LargestFirstEvent)
        .map_err(decision_failure)?;
    let makespan: f64 = schedule
        .iter()
        .map(|e| model.event_duration(e).expect("schedule came from the model"))
        .sum();
    let report =
        PlanReport { schedule: &schedule, cost, start_h, end_h: start_h + makespan };
    emit(&output.out, &to_json(&report)?)
}

fn cmd_run(
    fixtures: &FixtureArgs,
    disturbances: &Option<PathBuf>,
    window: usize,
    data_dir: &Option<PathBuf>,
    output: &OutputArgs,
) -> CliResult {
    let (machine, order, prices) = load_fixtures(fixtures)?;
    let disturbances = match disturbances {
        Some(path) => read_json::<DisturbanceSet<f64>>(path, "disturbances")?.disturbances,
        None => Vec::new(),
    };
    let cfg = LookaheadConfig { window, ..LookaheadConfig::default() };
    let log = run_llp(machine, order, prices, &cfg, disturbances)?;
    persist(data_dir, &log)?;
    emit(&output.out, &render_run(&log, output.format)?)?;
    match &log.outcome {
        RunOutcome::ReschedulingFailure { at_h, state } => Err(Failure {
            code: EXIT_RESCHEDULING,
            message: format!(
                "rescheduling failure at {}h in state q{}; the run log records the partial run",
                at_h, state
            ),
        }),
        _ => Ok(()),
    }
}

fn cmd_benchmark(
    fixtures: &FixtureArgs,
    data_dir: &Option<PathBuf>,
    output: &OutputArgs,
) -> CliResult {
    let (machine, order, prices) = load_fixtures(fixtures)?;
    let model = PtaModel::new(machine.clone(), order.clone()).map_err(Failure::config)?;
    let schedule = benchmark_schedule(&model).map_err(decision_failure)?;
    let log = run_fixed(machine, order, prices, &schedule)?;
    persist(data_dir, &log)?;
    emit(&output.out, &render_run(&log, output.format)?)
}

/// Both timelines in one table, tagged by run.
fn comparison_csv(report: &ComparisonReport<f64>) -> String {
    let mut out = String::from("run,hour,power_mw,price_per_mwh,cumulative_cost\n");
    for (tag, points) in [("a", &report.timeline_a), ("b", &report.timeline_b)] {
        for p in points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                tag, p.hour, p.power_mw, p.price_per_mwh, p.cumulative_cost
            ));
        }
    }
    out
}

fn cmd_compare(
    data_dir: &Path,
    run_a: u64,
    run_b: Option<u64>,
    against: &Option<String>,
    output: &OutputArgs,
) -> CliResult {
    let store = Store::open(data_dir)?;
    let log_a: RunLog<f64> = store.load_run(run_a)?;
    let log_b: RunLog<f64> = match (run_b, against.as_deref()) {
        (Some(id), None) => store.load_run(id)?,
        (None, Some("benchmark")) => {
            let meta = &log_a.meta;
            let model = PtaModel::new(meta.machine.clone(), meta.order.clone())
                .map_err(Failure::config)?;
            let schedule = benchmark_schedule(&model).map_err(decision_failure)?;
            run_fixed(meta.machine.clone(), meta.order.clone(), meta.prices.clone(), &schedule)?
        }
        (None, Some(other)) => {
            return Err(Failure::config(format!(
                "unknown comparison target `{}`; only `benchmark` is supported",
                other
            )));
        }
        (None, None) => {
            return Err(Failure::config(
                "nothing to compare against: give a second run id or --against benchmark",
            ));
        }
        (Some(_), Some(_)) => unreachable!("clap rejects run_b together with --against"),
    };
    let report = compare(log_a, log_b)?;
    let rendered = match output.format {
        Format::Json => to_json(&report)?,
        Format::Csv => comparison_csv(&report),
    };
    emit(&output.out, &rendered)
}

fn dispatch(cli: Cli) -> CliResult {
    match &cli.command {
        Command::Plan { fixtures, output } => cmd_plan(fixtures, output),
        Command::Run { fixtures, disturbances, window, data_dir, output } => {
            cmd_run(fixtures, disturbances, *window, data_dir, output)
        }
        Command::Benchmark { fixtures, data_dir, output } => {
            cmd_benchmark(fixtures, data_dir, output)
        }
        Command::Compare { data_dir, run_a, run_b, against, output } => {
            cmd_compare(data_dir, *run_a, *run_b, against, output)
        }
    }
}

fn main() -> ExitCode {
    // Parse by hand so argument mistakes exit with the config-error code
    // instead of clap's default 2, which is reserved for infeasible plans.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
