//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use hqcp::bench::{
    gen_medicate, gen_zenotravel, load, random_instance, run_bench, BenchScale, BenchSpec,
    ZenoScenario,
};
use hqcp::dsl::{
    parse_domain, parse_plan_json, parse_problem, render_tree, serialize_plan, PlanFormat,
};
use hqcp::model::{
    belief_cost, Alternative, BeliefState, ConditionalPlan, Cost, CostTable, Instantiation, Literal,
};
use hqcp::oracle::{check_admissibility, oracle_plan, OracleConfig};
use hqcp::planner::{plan, PlannerConfig, SearchContext};
use hqcp::simulate::simulate;
use hqcp::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORACLE_BUDGET: u64 = 200_000;
const MIN_SOLVABLE: usize = 50;
const MIN_INSTANCES: usize = 200;
const MAX_SEEDS: u64 = 5_000;

type Verdict = std::result::Result<String, String>;

fn check(ok: bool, message: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn strong() -> PlannerConfig {
    PlannerConfig::default()
}

fn with_null() -> PlannerConfig {
    PlannerConfig {
        allow_null_branches: true,
        ..PlannerConfig::default()
    }
}

struct Instance {
    label: String,
    problem: hqcp::model::Problem,
}

/// Random instances kept by criterion 1, i.e. those the oracle finished
/// within its budget.
struct Corpus {
    instances: Vec<Instance>,
    solvable: usize,
    over_budget: usize,
}

fn random_corpus() -> Result<Corpus> {
    let mut corpus = Corpus {
        instances: Vec::new(),
        solvable: 0,
        over_budget: 0,
    };
    let config = OracleConfig {
        budget: ORACLE_BUDGET,
        allow_null_branches: false,
    };
    for seed in 0..MAX_SEEDS {
        if corpus.solvable >= MIN_SOLVABLE && corpus.instances.len() >= MIN_INSTANCES {
            break;
        }
        let (d, p) = random_instance(seed);
        let problem = load(&d, &p)?;
        match oracle_plan(&problem, &config) {
            Ok(r) => {
                if r.best_cost.is_finite() {
                    corpus.solvable += 1;
                }
                corpus.instances.push(Instance {
                    label: format!("random seed {seed}"),
                    problem,
                });
            }
            Err(Error::BudgetExceeded(_)) => corpus.over_budget += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(corpus)
}

fn named(label: &str, (d, p): (String, String)) -> Result<Instance> {
    Ok(Instance {
        label: label.to_string(),
        problem: load(&d, &p)?,
    })
}

fn planned(
    instance: &Instance,
    config: &PlannerConfig,
) -> std::result::Result<ConditionalPlan, String> {
    let result = plan(&instance.problem, config).map_err(|e| format!("{}: {e}", instance.label))?;
    result
        .plan()
        .cloned()
        .ok_or_else(|| format!("{}: no plan", instance.label))
}

fn optimality(corpus: &Corpus) -> Verdict {
    let config = OracleConfig {
        budget: ORACLE_BUDGET,
        allow_null_branches: false,
    };
    let started = Instant::now();
    for inst in &corpus.instances {
        let ours = plan(&inst.problem, &strong()).map_err(|e| format!("{}: {e}", inst.label))?;
        let oracle =
            oracle_plan(&inst.problem, &config).map_err(|e| format!("{}: {e}", inst.label))?;
        let ours = ours.cost().unwrap_or(Cost::INFINITE);
        check(ours == oracle.best_cost, || {
            format!(
                "{}: planner {ours}, oracle {}",
                inst.label, oracle.best_cost
            )
        })?;
    }
    check(corpus.solvable >= MIN_SOLVABLE, || {
        format!("only {} solvable instances within budget", corpus.solvable)
    })?;
    Ok(format!(
        "{} instances ({} solvable, {} over budget skipped) agree with the oracle in {:.1?}",
        corpus.instances.len(),
        corpus.solvable,
        corpus.over_budget,
        started.elapsed()
    ))
}

fn admissibility(corpus: &Corpus) -> Verdict {
    let mut checked: Vec<(Instance, PlannerConfig)> = Vec::new();
    for n in 1..=4 {
        checked.push((
            named(
                &format!("medicate n={n}"),
                gen_medicate(n).map_err(|e| e.to_string())?,
            )
            .map_err(|e| e.to_string())?,
            strong(),
        ));
    }
    checked.push((
        named("zenotravel late", gen_zenotravel(ZenoScenario::Late)).map_err(|e| e.to_string())?,
        strong(),
    ));
    checked.push((
        named("zenotravel tight", gen_zenotravel(ZenoScenario::Tight))
            .map_err(|e| e.to_string())?,
        with_null(),
    ));

    let mut probes = 0;
    let mut run = |inst: &Instance, config: &PlannerConfig| -> std::result::Result<(), String> {
        let report = check_admissibility(&inst.problem, config, ORACLE_BUDGET)
            .map_err(|e| format!("{}: {e}", inst.label))?;
        probes += report.probes;
        check(report.is_admissible(), || {
            let v = &report.violations[0];
            format!(
                "{}: Δ({}) = {} exceeds the optimum {}",
                inst.label, v.task, v.estimate, v.optimum
            )
        })
    };
    for inst in &corpus.instances {
        run(inst, &strong())?;
    }
    for (inst, config) in &checked {
        run(inst, config)?;
    }
    Ok(format!(
        "no violations over {} instances, {probes} probes",
        corpus.instances.len() + checked.len()
    ))
}

fn medicate_scaling() -> Verdict {
    // Warm caches and the thread pool before timing.
    run_bench(&BenchSpec::new(BenchScale::Medicate(10))).map_err(|e| e.to_string())?;
    let mut averages = Vec::new();
    for n in 1..=10 {
        let rows =
            run_bench(&BenchSpec::new(BenchScale::Medicate(n))).map_err(|e| e.to_string())?;
        let avg = rows
            .iter()
            .find(|r| r.rep == "avg")
            .ok_or("missing avg row")?;
        check(rows.len() == 6, || {
            format!("n={n}: {} rows, expected 5 reps plus avg", rows.len())
        })?;
        averages.push(avg.wall_ms);

        let inst = named(
            &format!("medicate n={n}"),
            gen_medicate(n).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let p = planned(&inst, &strong())?;
        let nodes = p.branch_nodes();
        check(nodes.len() == 1, || {
            format!("n={n}: {} branch nodes", nodes.len())
        })?;
        let branches = &nodes[0].branches;
        check(branches.len() == n + 1, || {
            format!("n={n}: {} branches", branches.len())
        })?;
        for b in branches {
            let condition = b
                .observation
                .iter()
                .find(|l| l.predicate == "condition")
                .ok_or_else(|| format!("n={n}: branch without a condition"))?;
            let sub = b
                .plan
                .as_ref()
                .ok_or_else(|| format!("n={n}: NULL branch"))?;
            let names: Vec<String> = sub
                .actions()
                .iter()
                .map(|a| format!("{} {}", a.name, a.args.join(" ")))
                .collect();
            let cure = match condition.args[1].as_str() {
                "healthy" => "!discharge patient".to_string(),
                d => format!("!medicate patient {d}"),
            };
            check(names.contains(&cure), || {
                format!("n={n}: branch {condition} runs {names:?}")
            })?;
        }
        let sim = simulate(&p, &inst.problem, 10_000, n as u64).map_err(|e| e.to_string())?;
        check(sim.success_rate == 1.0, || {
            format!("n={n}: success rate {}", sim.success_rate)
        })?;
    }
    let n10 = averages[9];
    check(n10 < 5_000.0, || format!("n=10 took {n10:.3} ms"))?;
    let inversions = averages.windows(2).filter(|w| w[1] < w[0]).count();
    check(inversions <= 1, || {
        format!("{inversions} inversions in {averages:.3?} ms")
    })?;
    Ok(format!(
        "n=10 in {n10:.3} ms, {inversions} inversion(s), every plan has n+1 curing branches and success rate 1"
    ))
}

fn zenotravel() -> Verdict {
    let late =
        named("zenotravel late", gen_zenotravel(ZenoScenario::Late)).map_err(|e| e.to_string())?;
    let p = planned(&late, &strong())?;
    let actions: BTreeSet<String> = p.actions().iter().map(|a| a.name.clone()).collect();
    check(
        actions.contains("!fly") && !actions.contains("!zoom"),
        || format!("late plan uses {actions:?}"),
    )?;
    let late_cost = hqcp::model::plan_cost(&p).worst;

    let tight = named("zenotravel tight", gen_zenotravel(ZenoScenario::Tight))
        .map_err(|e| e.to_string())?;
    let strong_result = plan(&tight.problem, &strong()).map_err(|e| e.to_string())?;
    check(!strong_result.is_plan(), || {
        "tight scenario has a strong plan".to_string()
    })?;
    let p = planned(&tight, &with_null())?;
    let actions: BTreeSet<String> = p.actions().iter().map(|a| a.name.clone()).collect();
    check(
        actions.contains("!zoom") && actions.contains("!refuel-at"),
        || format!("tight plan uses {actions:?}"),
    )?;
    let observed: BTreeSet<String> = p
        .branch_nodes()
        .iter()
        .map(|b| b.sensor.args.join(" "))
        .collect();
    check(observed.len() == 2, || {
        format!("tight plan observes suppliers at {observed:?}")
    })?;
    let tree = render_tree(&p);
    check(tree.lines().any(|l| l.trim() == "NULL"), || {
        format!("no NULL branch in\n{tree}")
    })?;
    Ok(format!(
        "late fly-only at {late_cost}, tight zoom plan at {} observing {observed:?} with a NULL branch",
        hqcp::model::plan_cost(&p).worst
    ))
}

fn belief_expected_cost() -> Verdict {
    let lit = |status: &str| Literal::new("supplier", ["b", status]);
    let belief = BeliefState::new(vec![
        Alternative {
            fragment: [lit("occupied")].into_iter().collect(),
            probability: 0.1,
        },
        Alternative {
            fragment: [lit("unoccupied")].into_iter().collect(),
            probability: 0.9,
        },
    ])
    .map_err(|e| e.to_string())?;
    let mut table = CostTable::new(Cost::ZERO);
    table.set(lit("occupied"), Cost::from_int(400));
    table.set(lit("unoccupied"), Cost::from_int(100));
    let value = belief_cost(&belief, &table);
    check((value - 130.0).abs() <= 1e-9, || {
        format!("belief cost {value}")
    })?;
    Ok(format!("belief cost {value}"))
}

fn branch_sums(p: &ConditionalPlan) -> std::result::Result<usize, String> {
    let mut count = 0;
    for node in p.branch_nodes() {
        let sum: f64 = node.branches.iter().map(|b| b.probability).sum();
        check((sum - 1.0).abs() <= 1e-9, || {
            format!("branches of {} sum to {sum}", node.sensor.name)
        })?;
        count += 1;
    }
    Ok(count)
}

fn probability_semantics(corpus: &Corpus) -> Verdict {
    let mut nodes = 0;
    let mut plans: Vec<(Instance, ConditionalPlan)> = Vec::new();
    for n in [1, 3, 6] {
        let inst = named(
            &format!("medicate n={n}"),
            gen_medicate(n).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let p = planned(&inst, &strong())?;
        plans.push((inst, p));
    }
    let zeno = named("zenotravel tight", gen_zenotravel(ZenoScenario::Tight))
        .map_err(|e| e.to_string())?;
    let p = planned(&zeno, &with_null())?;
    plans.push((zeno, p));
    for inst in &corpus.instances {
        if let Some(p) = plan(&inst.problem, &strong())
            .map_err(|e| e.to_string())?
            .plan()
        {
            nodes += branch_sums(p)?;
        }
    }

    let domain = "(defdomain unreliable (
  (:operator !step-one () ((ready)) (:add (half)) :prob 0.9)
  (:operator !step-two () ((half)) (:add (done)) :prob 0.8)
  (:method run (go) () (:subtasks (!step-one) (!step-two)))))";
    let problem = "(defproblem unreliable unreliable (:state (ready)) (:tasks (go)))";
    let linear = Instance {
        label: "unreliable".into(),
        problem: parse_problem(
            problem,
            std::sync::Arc::new(parse_domain(domain).map_err(|e| e.to_string())?),
        )
        .map_err(|e| e.to_string())?,
    };
    let p = planned(&linear, &strong())?;
    plans.push((linear, p));

    let samples = 100_000;
    let mut worst_gap: f64 = 0.0;
    for (inst, p) in &plans {
        nodes += branch_sums(p)?;
        let a =
            simulate(p, &inst.problem, samples, 42).map_err(|e| format!("{}: {e}", inst.label))?;
        let b =
            simulate(p, &inst.problem, samples, 42).map_err(|e| format!("{}: {e}", inst.label))?;
        check(a == b, || {
            format!("{}: simulation is not reproducible", inst.label)
        })?;
        let gap = (a.success_rate - a.expected_success_rate).abs();
        worst_gap = worst_gap.max(gap);
        check(gap <= 1e-2, || {
            format!(
                "{}: simulated {} vs analytic {}",
                inst.label, a.success_rate, a.expected_success_rate
            )
        })?;
    }
    let (linear, p) = plans.last().ok_or("no plans")?;
    let report = simulate(p, &linear.problem, samples, 7).map_err(|e| e.to_string())?;
    check((report.expected_success_rate - 0.72).abs() <= 1e-9, || {
        format!("analytic success {}", report.expected_success_rate)
    })?;
    check((report.success_rate - 0.72).abs() <= 1e-2, || {
        format!("simulated success {}", report.success_rate)
    })?;
    Ok(format!(
        "{nodes} branch nodes sum to 1, 0.9 x 0.8 simulates to {:.4}, worst gap {worst_gap:.4}, reruns identical",
        report.success_rate
    ))
}

/// Random instantiate / branch walks; undoing every step must restore the
/// starting context exactly.
fn backtrack_walks() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut steps_total = 0;
    for walk in 0..100u64 {
        let (d, p) = match walk % 5 {
            0 => gen_medicate(1 + (walk as usize % 4)).map_err(|e| e.to_string())?,
            1 => gen_zenotravel(ZenoScenario::Tight),
            _ => random_instance(walk),
        };
        let problem = load(&d, &p).map_err(|e| e.to_string())?;
        let mut ctx = SearchContext::new(&problem).map_err(|e| e.to_string())?;
        let start = ctx.canonical();
        let mut trail = Vec::new();
        let mut visited = vec![start.clone()];
        for _ in 0..rng.random_range(1..40) {
            let candidates = ctx.candidates(&problem).map_err(|e| e.to_string())?;
            if candidates.is_empty() {
                break;
            }
            trail.push(ctx.snapshot());
            let choice = candidates[rng.random_range(0..candidates.len())].clone();
            ctx.instantiate(&problem, &choice, Vec::new())
                .map_err(|e| e.to_string())?;
            if let Instantiation::Sensing(s) = &choice {
                if let Ok(belief) = ctx.observe(&problem, &s.observation) {
                    let k = rng.random_range(0..problem.beliefs[belief].alternatives().len());
                    ctx.enter_branch(&problem, belief, k);
                }
            }
            visited.push(ctx.canonical());
            steps_total += 1;
        }
        while let Some(snapshot) = trail.pop() {
            ctx.backtrack(snapshot);
            let expected = &visited[trail.len()];
            check(&ctx.canonical() == expected, || {
                format!(
                    "walk {walk}: context differs after undoing step {}",
                    trail.len() + 1
                )
            })?;
        }
        check(ctx.canonical() == start, || {
            format!("walk {walk}: start not restored")
        })?;
    }
    Ok(format!("100 walks, {steps_total} steps undone"))
}

fn round_trip(corpus: &Corpus) -> Verdict {
    let mut plans = Vec::new();
    for n in 1..=10 {
        let inst = named(
            &format!("medicate n={n}"),
            gen_medicate(n).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        plans.push(planned(&inst, &strong())?);
    }
    let late =
        named("zenotravel late", gen_zenotravel(ZenoScenario::Late)).map_err(|e| e.to_string())?;
    plans.push(planned(&late, &strong())?);
    let tight = named("zenotravel tight", gen_zenotravel(ZenoScenario::Tight))
        .map_err(|e| e.to_string())?;
    plans.push(planned(&tight, &with_null())?);
    for inst in &corpus.instances {
        if let Some(p) = plan(&inst.problem, &strong())
            .map_err(|e| e.to_string())?
            .plan()
        {
            plans.push(p.clone());
        }
    }
    for (i, p) in plans.iter().enumerate() {
        let text = serialize_plan(p, PlanFormat::Json);
        let back = parse_plan_json(&text).map_err(|e| format!("plan {i}: {e}"))?;
        check(&back == p, || {
            format!("plan {i} changed in the JSON round trip")
        })?;
    }

    let (medicate_domain, medicate_problem) = gen_medicate(2).map_err(|e| e.to_string())?;
    let malformed_domains = [
        "(defdomain d (",
        "(defdomain d ((:operator !a (?x) ((p ?x)) (:add (q ?z)))))",
        "(defdomain d ((:method m (t) () (:subtasks (u)))))",
        "(defdomain d ((:operator a () ())))",
        "(defdomain d ((:operator !a () () :prob 2)))",
        ")",
        "(defdomain d ((:operator !a () () (:add (p \"x)))))",
    ];
    let mut diagnosed = 0;
    for text in malformed_domains {
        match catch_unwind(|| parse_domain(text)) {
            Err(_) => return Err(format!("parser panicked on {text:?}")),
            Ok(Ok(_)) => return Err(format!("accepted malformed domain {text:?}")),
            Ok(Err(e)) => {
                check(e.is_input_error() && has_position(&e.to_string()), || {
                    format!("diagnostic without a position for {text:?}: {e}")
                })?;
                diagnosed += 1;
            }
        }
    }
    let domain = std::sync::Arc::new(parse_domain(&medicate_domain).map_err(|e| e.to_string())?);
    let malformed_problems = [
        medicate_problem.replace(
            "(:tasks (treat-patient patient))",
            "(:tasks (heal patient))",
        ),
        medicate_problem.replace(" 0.3333333333333333", " 0.5"),
        medicate_problem.replace("(:default-cost 1))", "(:default-cost -1))"),
        medicate_problem[..medicate_problem.len() / 2].to_string(),
    ];
    for text in &malformed_problems {
        match catch_unwind(AssertUnwindSafe(|| parse_problem(text, domain.clone()))) {
            Err(_) => return Err(format!("parser panicked on {text:?}")),
            Ok(Ok(_)) => return Err(format!("accepted malformed problem {text:?}")),
            Ok(Err(e)) => {
                check(e.is_input_error() && has_position(&e.to_string()), || {
                    format!("diagnostic without a position: {e}")
                })?;
                diagnosed += 1;
            }
        }
    }
    let good = serialize_plan(&plans[0], PlanFormat::Json);
    let malformed_plans = [
        "{".to_string(),
        good.replace("\"hqcp-plan\"", "\"other\""),
        good[..good.len() / 2].to_string(),
        good.replace("\"type\": \"branch\"", "\"type\": \"loop\""),
    ];
    for text in &malformed_plans {
        match catch_unwind(|| parse_plan_json(text)) {
            Err(_) => return Err("plan reader panicked".into()),
            Ok(Ok(_)) => return Err(format!("accepted malformed plan {text:?}")),
            Ok(Err(e)) => {
                check(e.is_input_error(), || format!("not an input error: {e}"))?;
                diagnosed += 1;
            }
        }
    }
    Ok(format!(
        "{} plans round-trip, {diagnosed} malformed inputs rejected with diagnostics",
        plans.len()
    ))
}

/// `line:col` somewhere in the message.
fn has_position(message: &str) -> bool {
    message.split(|c: char| c.is_whitespace()).any(|word| {
        let mut parts = word.trim_end_matches(':').split(':');
        matches!(
            (parts.next(), parts.next()),
            (Some(a), Some(b)) if !a.is_empty() && !b.is_empty()
                && a.chars().all(|c| c.is_ascii_digit())
                && b.chars().all(|c| c.is_ascii_digit())
        )
    })
}

fn run(number: usize, title: &str, body: impl FnOnce() -> Verdict) -> bool {
    let started = Instant::now();
    let verdict = catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|panic| {
        let message = panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {message}"))
    });
    let elapsed = started.elapsed();
    match &verdict {
        Ok(detail) => println!("criterion {number} ({title}): PASS [{elapsed:.1?}] {detail}"),
        Err(detail) => println!("criterion {number} ({title}): FAIL [{elapsed:.1?}] {detail}"),
    }
    verdict.is_ok()
}

fn main() {
    let corpus = match random_corpus() {
        Ok(c) => c,
        Err(e) => {
            println!("could not build the random corpus: {e}");
            std::process::exit(1);
        }
    };
    let results = [
        run(1, "optimality against the oracle", || optimality(&corpus)),
        run(2, "heuristic admissibility", || admissibility(&corpus)),
        run(3, "medicate scaling", medicate_scaling),
        run(4, "zenotravel scenarios", zenotravel),
        run(5, "belief expected cost", belief_expected_cost),
        run(6, "probability semantics", || {
            probability_semantics(&corpus)
        }),
        run(7, "backtracking restores the context", backtrack_walks),
        run(8, "plan round trip and diagnostics", || round_trip(&corpus)),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
