//! The `hqcp` command line: plan, validate, bench and check. Flag names
//! are documented in `docs/cli.md`.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::bench::{run_campaign, write_csv, BenchRow, BenchScale, BenchSpec, ZenoScenario};
use crate::dsl::{parse_domain_in, parse_plan_json, parse_problem_in, serialize_plan, PlanFormat};
use crate::error::Error;
use crate::model::{success_probability, Problem};
use crate::oracle::{check_admissibility, oracle_plan, OracleConfig, DEFAULT_BUDGET};
use crate::planner::{plan, PlanOutcome, PlannerConfig};
use crate::simulate::{check_executability, simulate};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    PlanningFailure = 1,
    InputError = 2,
    InternalError = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Parser, Debug)]
#[command(name = "hqcp", version, about = "Cost-optimal contingent HTN planning")]
pub struct Cli {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Find a minimum-cost plan.
    Plan(PlanArgs),
    /// Check a JSON plan in every world and simulate it.
    Validate(ValidateArgs),
    /// Time the planner on generated benchmark domains.
    Bench(BenchArgs),
    /// Compare the planner with exhaustive enumeration.
    Check(CheckArgs),
}

#[derive(Args, Debug)]
pub struct SearchFlags {
    /// Allow NULL branches for outcomes where the tasks cannot be finished.
    #[arg(long)]
    pub allow_null_branches: bool,
    /// Maximum search depth (0 lifts the limit).
    #[arg(long, value_name = "N")]
    pub max_depth: Option<usize>,
    /// Log every decision (needs HQCP_LOG=debug or unset).
    #[arg(long)]
    pub trace: bool,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    pub domain: PathBuf,
    pub problem: PathBuf,
    /// Print the JSON plan document instead of the tree.
    #[arg(long)]
    pub json: bool,
    /// Print search statistics to stderr.
    #[arg(long)]
    pub stats: bool,
    #[command(flatten)]
    pub search: SearchFlags,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    pub domain: PathBuf,
    pub problem: PathBuf,
    pub plan: PathBuf,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// `medicate` or `zenotravel`.
    #[arg(long)]
    pub domain: String,
    /// Medicate sizes: `3`, `1..6` or `1,2,5`.
    #[arg(long)]
    pub n: Option<String>,
    /// ZenoTravel scenarios, comma separated.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Directory for the CSV file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Specs run in parallel.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub search: SearchFlags,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    pub domain: PathBuf,
    pub problem: PathBuf,
    /// Oracle node budget.
    #[arg(long)]
    pub budget: Option<u64>,
    #[command(flatten)]
    pub search: SearchFlags,
}

/// Settings file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub planner: PlannerSection,
    pub validate: ValidateSection,
    pub bench: BenchSection,
    pub check: CheckSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSection {
    pub allow_null_branches: Option<bool>,
    pub max_depth: Option<usize>,
    pub trace: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    pub samples: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub reps: Option<usize>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    pub budget: Option<u64>,
}

/// A failed command: exit status plus the message for stderr.
struct Failure(ExitStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_input_error() || matches!(e, Error::BudgetExceeded(_)) {
            ExitStatus::InputError
        } else {
            ExitStatus::InternalError
        };
        Failure(status, e.to_string())
    }
}

fn input(message: impl Into<String>) -> Failure {
    Failure(ExitStatus::InputError, message.into())
}

type Outcome = std::result::Result<(ExitStatus, String), Failure>;

/// Parses `args` (program name first) and runs the command. Plans and
/// reports go to `out`, diagnostics to `err`; nothing reaches `out`
/// unless the command got far enough to produce its whole output.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let status = if e.use_stderr() {
                ExitStatus::InputError
            } else {
                ExitStatus::Success
            };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return status;
        }
    };
    let result = load_config(cli.config.as_deref()).and_then(|config| {
        init_logging(&cli.command, &config);
        match &cli.command {
            Command::Plan(a) => cmd_plan(a, &config, err),
            Command::Validate(a) => cmd_validate(a, &config),
            Command::Bench(a) => cmd_bench(a, &config),
            Command::Check(a) => cmd_check(a, &config),
        }
    });
    match result {
        Ok((status, text)) => {
            if out.write_all(text.as_bytes()).is_err() {
                return ExitStatus::InternalError;
            }
            status
        }
        Err(Failure(status, message)) => {
            let _ = writeln!(err, "error: {message}");
            status
        }
    }
}

/// Logging goes to stderr, filtered by `HQCP_LOG`; `--trace` lowers the
/// default level to debug.
fn init_logging(command: &Command, config: &Config) {
    let flags = match command {
        Command::Plan(a) => Some(&a.search),
        Command::Bench(a) => Some(&a.search),
        Command::Check(a) => Some(&a.search),
        Command::Validate(_) => None,
    };
    let trace = flags.is_some_and(|f| f.trace) || config.planner.trace.unwrap_or(false);
    let level = if trace { "debug" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("HQCP_LOG", level))
        .try_init();
}

fn load_config(path: Option<&Path>) -> std::result::Result<Config, Failure> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = read(path)?;
    toml::from_str(&text).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_problem(domain: &Path, problem: &Path) -> std::result::Result<Problem, Failure> {
    let domain_name = domain.display().to_string();
    let problem_name = problem.display().to_string();
    let domain = parse_domain_in(&read(domain)?, Some(&domain_name))?;
    Ok(parse_problem_in(
        &read(problem)?,
        Arc::new(domain),
        Some(&problem_name),
    )?)
}

fn planner_config(flags: &SearchFlags, config: &Config) -> PlannerConfig {
    let section = &config.planner;
    let defaults = PlannerConfig::default();
    let max_depth = match flags.max_depth.or(section.max_depth) {
        Some(0) => None,
        Some(n) => Some(n),
        None => defaults.max_depth,
    };
    let trace = flags.trace || section.trace.unwrap_or(false);
    PlannerConfig {
        max_depth,
        allow_null_branches: flags.allow_null_branches
            || section.allow_null_branches.unwrap_or(false),
        trace,
        ..defaults
    }
}

fn cmd_plan(args: &PlanArgs, config: &Config, err: &mut dyn Write) -> Outcome {
    let problem = load_problem(&args.domain, &args.problem)?;
    let planner = planner_config(&args.search, config);
    let result = plan(&problem, &planner)?;
    if args.stats {
        let s = &result.stats;
        let _ = write!(
            err,
            "nodes {} backtracks {} updates {} recomputations {} max-depth {}",
            s.nodes, s.backtracks, s.updates, s.recomputations, s.max_depth
        );
        if let Some(p) = result.plan() {
            let _ = write!(
                err,
                " cost {} success-probability {}",
                result.cost().unwrap_or_default(),
                success_probability(p)
            );
        }
        let _ = writeln!(err);
    }
    match &result.outcome {
        PlanOutcome::Plan { plan, .. } => {
            let format = if args.json {
                PlanFormat::Json
            } else {
                PlanFormat::Tree
            };
            Ok((ExitStatus::Success, serialize_plan(plan, format)))
        }
        PlanOutcome::Failure { reason } => {
            let _ = writeln!(err, "{reason}");
            Ok((ExitStatus::PlanningFailure, "failure\n".into()))
        }
    }
}

fn cmd_validate(args: &ValidateArgs, config: &Config) -> Outcome {
    let problem = load_problem(&args.domain, &args.problem)?;
    let plan = parse_plan_json(&read(&args.plan)?)?;
    let samples = args.samples.or(config.validate.samples).unwrap_or(100_000);
    let seed = args.seed.or(config.validate.seed).unwrap_or(0);
    let not_valid = |e: Error| match e {
        Error::NotExecutable { .. }
        | Error::BranchMissing { .. }
        | Error::NoMatchingBelief(_)
        | Error::AmbiguousBelief(_) => Failure(ExitStatus::PlanningFailure, e.to_string()),
        e => e.into(),
    };
    check_executability(&plan, &problem).map_err(not_valid)?;
    let report = simulate(&plan, &problem, samples, seed).map_err(not_valid)?;
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure(ExitStatus::InternalError, e.to_string()))?;
    text.push('\n');
    Ok((ExitStatus::Success, text))
}

/// `3`, `1..6`, `1..=6` or `1,2,5`.
pub fn parse_sizes(text: &str) -> Result<Vec<usize>, String> {
    let number = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| format!("`{s}` is not a size"))
    };
    let mut sizes = BTreeSet::new();
    for part in text.split(',') {
        if let Some((lo, hi)) = part.split_once("..") {
            let hi = hi.strip_prefix('=').unwrap_or(hi);
            let (lo, hi) = (number(lo)?, number(hi)?);
            if lo > hi {
                return Err(format!("empty range `{part}`"));
            }
            sizes.extend(lo..=hi);
        } else {
            sizes.insert(number(part)?);
        }
    }
    if sizes.contains(&0) {
        return Err("sizes start at 1".into());
    }
    Ok(sizes.into_iter().collect())
}

fn cmd_bench(args: &BenchArgs, config: &Config) -> Outcome {
    let scales: Vec<BenchScale> = match args.domain.as_str() {
        "medicate" => parse_sizes(args.n.as_deref().unwrap_or("1..10"))
            .map_err(|e| input(format!("--n: {e}")))?
            .into_iter()
            .map(BenchScale::Medicate)
            .collect(),
        "zenotravel" => args
            .scenario
            .as_deref()
            .unwrap_or("late,tight")
            .split(',')
            .map(|s| s.trim().parse::<ZenoScenario>().map(BenchScale::ZenoTravel))
            .collect::<Result<_, _>>()
            .map_err(|e| input(format!("--scenario: {e}")))?,
        other => {
            return Err(input(format!(
                "--domain: unknown benchmark domain `{other}`"
            )))
        }
    };
    let reps = args.reps.or(config.bench.reps).unwrap_or(5);
    if reps == 0 {
        return Err(input("--reps: at least one repetition"));
    }
    let planner = planner_config(&args.search, config);
    let specs: Vec<BenchSpec> = scales
        .into_iter()
        .map(|scale| {
            let mut spec = BenchSpec::new(scale);
            spec.repetitions = reps;
            spec.seed = args.seed.unwrap_or(0);
            spec.planner.max_depth = planner.max_depth;
            spec.planner.trace = planner.trace;
            spec.planner.allow_null_branches |= planner.allow_null_branches;
            spec
        })
        .collect();
    let jobs = args.jobs.or(config.bench.jobs).unwrap_or(1);
    let rows = run_campaign(&specs, jobs)?;
    let out_dir = args.out.clone().or_else(|| config.bench.out.clone());
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(&dir).map_err(|e| input(format!("{}: {e}", dir.display())))?;
        let path = dir.join(format!("{}.csv", args.domain));
        let file =
            std::fs::File::create(&path).map_err(|e| input(format!("{}: {e}", path.display())))?;
        write_csv(&rows, file)?;
    }
    Ok((ExitStatus::Success, summary(&rows)))
}

fn summary(rows: &[BenchRow]) -> String {
    let mut text = format!(
        "{:<12} {:<8} {:>12} {:>10} {:>12} {:>10}\n",
        "domain", "scale", "avg_ms", "nodes", "backtracks", "cost"
    );
    for r in rows.iter().filter(|r| r.rep == "avg") {
        text.push_str(&format!(
            "{:<12} {:<8} {:>12.3} {:>10} {:>12} {:>10}\n",
            r.domain, r.scale, r.wall_ms, r.nodes, r.backtracks, r.cost
        ));
    }
    text
}

fn cmd_check(args: &CheckArgs, config: &Config) -> Outcome {
    let problem = load_problem(&args.domain, &args.problem)?;
    let planner = planner_config(&args.search, config);
    let budget = args
        .budget
        .or(config.check.budget)
        .unwrap_or(DEFAULT_BUDGET);
    let oracle = oracle_plan(
        &problem,
        &OracleConfig {
            budget,
            allow_null_branches: planner.allow_null_branches,
        },
    )?;
    let planned = plan(&problem, &planner)?;
    let admissibility = check_admissibility(&problem, &planner, budget)?;
    let hqcp = planned.cost().unwrap_or(crate::model::Cost::INFINITE);
    let equal = hqcp == oracle.best_cost;
    let mut text = format!(
        "HQCP cost {hqcp}\noracle cost {} ({} plans, {} nodes)\n{}\n",
        oracle.best_cost,
        oracle.plans_enumerated,
        oracle.nodes,
        if equal { "HQCP=oracle" } else { "HQCP!=oracle" }
    );
    text.push_str(&format!(
        "admissibility: {} contexts, {} violations\n",
        admissibility.probes,
        admissibility.violations.len()
    ));
    for v in &admissibility.violations {
        text.push_str(&format!(
            "  {}: estimate {} > optimum {}\n",
            v.task, v.estimate, v.optimum
        ));
    }
    let status = if equal && admissibility.is_admissible() {
        ExitStatus::Success
    } else {
        ExitStatus::PlanningFailure
    };
    Ok((status, text))
}
