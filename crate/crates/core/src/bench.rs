//! Benchmark domains and timing campaigns: the medicate family, the
//! ZenoTravel transport scenarios, and small random instances for
//! differential testing against the oracle.

use std::fmt::Write as _;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsl::{parse_domain, parse_problem};
use crate::error::{Error, Result};
use crate::model::Problem;
use crate::planner::{plan, PlannerConfig};

/// Domain and problem text for the medicate family: one patient who has
/// one of `n` infections or is healthy, with equal probability. A
/// diagnosis reveals which, and the matching remedy cures it.
pub fn gen_medicate(n: usize) -> Result<(String, String)> {
    if n == 0 {
        return Err(Error::Invalid("medicate size: n must be at least 1".into()));
    }
    let domain = "(defdomain medicate (
  (:sensing !diagnose (?p) ((patient ?p)) (:observe (condition ?p)))
  (:operator !medicate (?p ?d) ((infected ?p ?d) (remedy ?d)) (:add (healthy ?p)) (:delete (infected ?p ?d)))
  (:operator !discharge (?p) ((healthy ?p)))
  (:method treat-by-diagnosis (treat-patient ?p) ((patient ?p)) (:subtasks (!diagnose ?p) (cure ?p)))
  (:method cure-infection (cure ?p) ((infected ?p ?d)) (:subtasks (!medicate ?p ?d)))
  (:method already-healthy (cure ?p) ((healthy ?p)) (:subtasks (!discharge ?p)))))
"
    .to_string();

    let p = 1.0 / (n as f64 + 1.0);
    let mut problem = format!("(defproblem medicate-{n} medicate\n  (:state (patient patient)");
    for d in 1..=n {
        let _ = write!(problem, " (remedy d{d})");
    }
    problem.push_str(")\n  (:belief");
    for d in 1..=n {
        let _ = write!(
            problem,
            "\n    (((condition patient d{d}) (infected patient d{d})) {p})"
        );
    }
    let _ = write!(
        problem,
        "\n    (((condition patient healthy) (healthy patient)) {p}))"
    );
    problem.push_str("\n  (:tasks (treat-patient patient))\n  (:default-cost 1))\n");
    Ok((domain, problem))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZenoScenario {
    /// Generous deadline: flying every leg is in time.
    Late,
    /// Tight deadline: two fly legs in a row are too slow.
    Tight,
}

impl std::str::FromStr for ZenoScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "late" => Ok(ZenoScenario::Late),
            "tight" => Ok(ZenoScenario::Tight),
            _ => Err(Error::Invalid(format!(
                "scenario `{s}`: expected late or tight"
            ))),
        }
    }
}

impl std::fmt::Display for ZenoScenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ZenoScenario::Late => "late",
            ZenoScenario::Tight => "tight",
        })
    }
}

const ZENO_DOMAIN: &str = "(defdomain zenotravel (
  (:sensing !observe-supplier (?x) ((at-plane ?x)) (:observe (supplier ?x)))
  (:operator !board-passenger (?g ?x) ((at ?g ?x) (at-plane ?x)) (:add (in-plane ?g)) (:delete (at ?g ?x)))
  (:operator !debark-passenger (?g ?x) ((in-plane ?g) (at-plane ?x)) (:add (at ?g ?x)) (:delete (in-plane ?g)))
  (:operator !fly (?from ?to) ((at-plane ?from) (fly-fuel ?from ?to) (last-mode ?m))
    (:add (at-plane ?to) (last-mode fly)) (:delete (at-plane ?from) (last-mode ?m)))
  (:operator !zoom (?from ?to) ((at-plane ?from) (zoom-fuel ?from ?to) (fueled) (last-mode ?m))
    (:add (at-plane ?to) (last-mode zoom)) (:delete (at-plane ?from) (last-mode ?m) (fueled)))
  (:operator !refuel-at (?x) ((at-plane ?x) (supplier ?x unoccupied)) (:add (fueled)))
  (:method transport (transport ?g1 ?g2 ?a ?b ?c) ()
    (:subtasks (!observe-supplier ?a) (!board-passenger ?g1 ?a) (leg ?a ?b) (!debark-passenger ?g1 ?b)
               (!board-passenger ?g2 ?b) (leg ?b ?c) (!debark-passenger ?g2 ?c)))
  (:method leg-fly (leg ?from ?to) ((last-mode ?m) (in-time ?m fly)) (:subtasks (!fly ?from ?to)))
  (:method leg-zoom (leg ?from ?to) ((last-mode ?m) (in-time ?m zoom) (supplier-known ?from))
    (:subtasks (!refuel-at ?from) (!zoom ?from ?to)))
  (:method leg-zoom-observe (leg ?from ?to) ((last-mode ?m) (in-time ?m zoom) (not (supplier-known ?from)))
    (:subtasks (!observe-supplier ?from) (!refuel-at ?from) (!zoom ?from ?to)))))
";

/// Domain and problem text for the A to B to C transport. Deadlines become
/// static `(in-time previous-mode next-mode)` facts; the tight scenario
/// drops the one that allows a second fly leg.
pub fn gen_zenotravel(scenario: ZenoScenario) -> (String, String) {
    let modes = ["none", "fly", "zoom"];
    let mut in_time = String::new();
    for prev in modes {
        for next in ["fly", "zoom"] {
            if scenario == ZenoScenario::Tight && prev == "fly" && next == "fly" {
                continue;
            }
            let _ = write!(in_time, " (in-time {prev} {next})");
        }
    }
    let problem = format!(
        "(defproblem zenotravel-{scenario} zenotravel
  (:state (at-plane a) (last-mode none) (at p1 a) (at p2 b)
          (fly-fuel a b) (fly-fuel b c) (zoom-fuel a b) (zoom-fuel b c)
         {in_time})
  (:belief (((supplier a unoccupied) (supplier-known a)) 0.9) (((supplier a occupied) (supplier-known a)) 0.1))
  (:belief (((supplier b unoccupied) (supplier-known b)) 0.9) (((supplier b occupied) (supplier-known b)) 0.1))
  (:tasks (transport p1 p2 a b c))
  (:cost ((fly-fuel a b) 100) ((fly-fuel b c) 120) ((zoom-fuel a b) 250) ((zoom-fuel b c) 300)
         ((supplier a unoccupied) 100) ((supplier a occupied) 400)
         ((supplier b unoccupied) 100) ((supplier b occupied) 400)))
"
    );
    (ZENO_DOMAIN.to_string(), problem)
}

/// Parses generated domain and problem text.
pub fn load(domain: &str, problem: &str) -> Result<Problem> {
    parse_problem(problem, Arc::new(parse_domain(domain)?))
}

/// Limits of [`random_instance`].
pub const RANDOM_MAX_DEPTH: usize = 4;
pub const RANDOM_MAX_METHODS: usize = 3;
pub const RANDOM_MAX_CONSTANTS: usize = 6;

struct Gen {
    rng: ChaCha8Rng,
    constants: Vec<String>,
}

impl Gen {
    fn pick<'a>(&mut self, items: &'a [String]) -> &'a str {
        &items[self.rng.random_range(0..items.len())]
    }

    fn constant(&mut self) -> String {
        let i = self.rng.random_range(0..self.constants.len());
        self.constants[i].clone()
    }

    /// A `(p t)` or `(q t t)` literal over the given terms.
    fn literal(&mut self, terms: &[String]) -> String {
        if self.rng.random_bool(0.6) {
            let p = self.rng.random_range(0..3);
            format!("(p{p} {})", self.pick(terms))
        } else {
            format!("(q {} {})", self.pick(terms), self.pick(terms))
        }
    }
}

/// A small random instance as domain and problem text. Compound tasks
/// form levels so the hierarchy is acyclic and at most
/// [`RANDOM_MAX_DEPTH`] deep. Costs are small integers so ties are common.
/// About half the instances sense a belief in the top-level methods.
pub fn random_instance(seed: u64) -> (String, String) {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        constants: Vec::new(),
    };
    let n_constants = g.rng.random_range(2..=RANDOM_MAX_CONSTANTS);
    g.constants = (0..n_constants).map(|i| format!("c{i}")).collect();
    let sensing = g.rng.random_bool(0.5);

    let mut domain = String::from("(defdomain random (\n");
    // Primitive operators, each with one parameter.
    let n_ops = g.rng.random_range(2..=4);
    let ops: Vec<String> = (0..n_ops).map(|i| format!("!o{i}")).collect();
    for op in &ops {
        let mut terms = vec!["?x".to_string()];
        terms.push(g.constant());
        let mut pre = Vec::new();
        for _ in 0..g.rng.random_range(0..=1) {
            pre.push(g.literal(&terms));
        }
        if g.rng.random_bool(0.2) {
            pre.push(format!("(not {})", g.literal(&terms)));
        }
        let add = g.literal(&terms);
        let mut clauses = format!("(:add {add})");
        if g.rng.random_bool(0.5) {
            let del = g.literal(&terms);
            if del != add {
                let _ = write!(clauses, " (:delete {del})");
            }
        }
        if g.rng.random_bool(0.2) {
            let _ = write!(clauses, " (:prob 0.{})", g.rng.random_range(5..=9));
        }
        let _ = writeln!(
            domain,
            "  (:operator {op} (?x) ({}) {clauses})",
            pre.join(" ")
        );
    }
    if sensing {
        domain.push_str("  (:sensing !sense (?x) () (:observe (obs ?x)))\n");
    }

    // Compound tasks by level; level 0 is the root.
    let levels = g.rng.random_range(1..RANDOM_MAX_DEPTH);
    let tasks: Vec<Vec<String>> = (0..levels)
        .map(|l| {
            let width = if l == 0 { 1 } else { g.rng.random_range(1..=2) };
            (0..width).map(|i| format!("t{l}-{i}")).collect()
        })
        .collect();
    let sensed = g.constant();
    for (level, names) in tasks.iter().enumerate() {
        for name in names {
            for m in 0..g.rng.random_range(1..=RANDOM_MAX_METHODS) {
                let mut terms = vec!["?x".to_string(), g.constant()];
                let mut pre = Vec::new();
                for _ in 0..g.rng.random_range(0..=2) {
                    pre.push(g.literal(&terms));
                }
                if g.rng.random_bool(0.3) {
                    pre.push("(p0 ?y)".to_string());
                    terms.push("?y".into());
                }
                if sensing && level == 0 && g.rng.random_bool(0.3) {
                    pre.push(format!("(flag {sensed})"));
                }
                let mut subtasks = Vec::new();
                if sensing && level == 0 && g.rng.random_bool(0.7) {
                    subtasks.push(format!("(!sense {sensed})"));
                }
                for _ in 0..g.rng.random_range(1..=3) {
                    let lower: Vec<&String> = tasks[level + 1..].iter().flatten().collect();
                    let arg = g.pick(&terms).to_string();
                    if !lower.is_empty() && g.rng.random_bool(0.5) {
                        let t = lower[g.rng.random_range(0..lower.len())];
                        subtasks.push(format!("({t} {arg})"));
                    } else {
                        let op = g.pick(&ops).to_string();
                        subtasks.push(format!("({op} {arg})"));
                    }
                }
                let _ = writeln!(
                    domain,
                    "  (:method {name}-m{m} ({name} ?x) ({}) (:subtasks {}))",
                    pre.join(" "),
                    subtasks.join(" ")
                );
            }
        }
    }
    domain.push_str("))\n");

    let mut state = std::collections::BTreeSet::new();
    for _ in 0..g.rng.random_range(4..=14) {
        let terms = g.constants.clone();
        state.insert(g.literal(&terms));
    }
    let mut problem = format!(
        "(defproblem random-{seed} random\n  (:state {})\n",
        state.into_iter().collect::<Vec<_>>().join(" ")
    );
    if sensing {
        let p = g.rng.random_range(1..=9);
        let _ = writeln!(
            problem,
            "  (:belief (((obs {sensed} yes) (flag {sensed})) 0.{p}) ((obs {sensed} no) 0.{}))",
            10 - p
        );
    }
    let root_arg = g.constant();
    let _ = writeln!(problem, "  (:tasks (t0-0 {root_arg}))");
    let mut costs = Vec::new();
    for _ in 0..g.rng.random_range(0..=6) {
        let terms = g.constants.clone();
        let lit = g.literal(&terms);
        if !costs.iter().any(|(l, _)| l == &lit) {
            costs.push((lit, g.rng.random_range(0..=3)));
        }
    }
    if !costs.is_empty() {
        let entries: Vec<String> = costs.iter().map(|(l, c)| format!("({l} {c})")).collect();
        let _ = writeln!(problem, "  (:cost {})", entries.join(" "));
    }
    let _ = writeln!(problem, "  (:default-cost {}))", g.rng.random_range(0..=1));
    (domain, problem)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "domain", content = "scale", rename_all = "lowercase")]
pub enum BenchScale {
    Medicate(usize),
    ZenoTravel(ZenoScenario),
}

impl BenchScale {
    pub fn domain_name(&self) -> &'static str {
        match self {
            BenchScale::Medicate(_) => "medicate",
            BenchScale::ZenoTravel(_) => "zenotravel",
        }
    }

    pub fn label(&self) -> String {
        match self {
            BenchScale::Medicate(n) => n.to_string(),
            BenchScale::ZenoTravel(s) => s.to_string(),
        }
    }

    pub fn generate(&self) -> Result<(String, String)> {
        match *self {
            BenchScale::Medicate(n) => gen_medicate(n),
            BenchScale::ZenoTravel(s) => Ok(gen_zenotravel(s)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub scale: BenchScale,
    pub repetitions: usize,
    /// Recorded with the campaign; the generated domains are deterministic.
    pub seed: u64,
    pub planner: PlannerConfig,
}

impl BenchSpec {
    /// Five repetitions, with NULL branches allowed for ZenoTravel since
    /// its tight scenario has no plan that succeeds in every world.
    pub fn new(scale: BenchScale) -> Self {
        BenchSpec {
            scale,
            repetitions: 5,
            seed: 0,
            planner: PlannerConfig {
                allow_null_branches: matches!(scale, BenchScale::ZenoTravel(_)),
                ..PlannerConfig::default()
            },
        }
    }
}

pub const CSV_HEADER: [&str; 7] = [
    "domain",
    "scale",
    "rep",
    "wall_ms",
    "nodes",
    "backtracks",
    "cost",
];

/// One CSV row. `rep` is the repetition number or `avg`; `cost` is the
/// worst-case plan cost, `failure`, or an error message.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub domain: String,
    pub scale: String,
    pub rep: String,
    pub wall_ms: f64,
    pub nodes: f64,
    pub backtracks: f64,
    pub cost: String,
}

/// Runs one spec: a row per repetition followed by the average row.
/// Failures are recorded in the row and do not stop the campaign.
pub fn run_bench(spec: &BenchSpec) -> Result<Vec<BenchRow>> {
    if spec.repetitions == 0 {
        return Err(Error::Invalid(
            "benchmark: repetitions must be at least 1".into(),
        ));
    }
    let domain = spec.scale.domain_name().to_string();
    let scale = spec.scale.label();
    let row = |rep: String, wall_ms: f64, nodes: f64, backtracks: f64, cost: String| BenchRow {
        domain: domain.clone(),
        scale: scale.clone(),
        rep,
        wall_ms,
        nodes,
        backtracks,
        cost,
    };
    let (domain_text, problem_text) = spec.scale.generate()?;
    let problem = load(&domain_text, &problem_text)?;
    let mut rows = Vec::with_capacity(spec.repetitions + 1);
    for rep in 1..=spec.repetitions {
        let start = Instant::now();
        let result = plan(&problem, &spec.planner);
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        rows.push(match result {
            Ok(r) => {
                let cost = r
                    .cost()
                    .map_or_else(|| "failure".to_string(), |c| c.to_string());
                row(
                    rep.to_string(),
                    wall_ms,
                    r.stats.nodes as f64,
                    r.stats.backtracks as f64,
                    cost,
                )
            }
            Err(e) => row(rep.to_string(), wall_ms, 0.0, 0.0, format!("error: {e}")),
        });
    }
    let k = spec.repetitions as f64;
    let mean = |f: fn(&BenchRow) -> f64| rows.iter().map(f).sum::<f64>() / k;
    let cost = if rows.iter().all(|r| r.cost == rows[0].cost) {
        rows[0].cost.clone()
    } else {
        "mixed".to_string()
    };
    let avg = row(
        "avg".into(),
        mean(|r| r.wall_ms),
        mean(|r| r.nodes),
        mean(|r| r.backtracks),
        cost,
    );
    rows.push(avg);
    Ok(rows)
}

/// Runs every spec, up to `jobs` at a time, keeping the spec order in the
/// output. A spec that cannot even be set up yields a single error row.
pub fn run_campaign(specs: &[BenchSpec], jobs: usize) -> Result<Vec<BenchRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("benchmark thread pool: {e}")))?;
    let per_spec: Vec<Vec<BenchRow>> = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                run_bench(spec).unwrap_or_else(|e| {
                    vec![BenchRow {
                        domain: spec.scale.domain_name().into(),
                        scale: spec.scale.label(),
                        rep: "avg".into(),
                        wall_ms: 0.0,
                        nodes: 0.0,
                        backtracks: 0.0,
                        cost: format!("error: {e}"),
                    }]
                })
            })
            .collect()
    });
    Ok(per_spec.into_iter().flatten().collect())
}

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Invalid(format!("writing CSV: {e}"));
    writer.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        writer
            .write_record([
                r.domain.clone(),
                r.scale.clone(),
                r.rep.clone(),
                format!("{:.3}", r.wall_ms),
                r.nodes.to_string(),
                r.backtracks.to_string(),
                r.cost.clone(),
            ])
            .map_err(io)?;
    }
    writer
        .flush()
        .map_err(|e| Error::Invalid(format!("writing CSV: {e}")))?;
    Ok(())
}
