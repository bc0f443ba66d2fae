//! Monte Carlo execution of plans against sampled worlds, and the
//! exhaustive check that a plan executes in every world its beliefs allow.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::belief::PROBABILITY_TOLERANCE;
use crate::model::plan::path_label;
use crate::model::{
    apply_effects, candidates, matching_belief, success_probability, ActionStep, Alternative,
    Branch, ConditionalPlan, Instantiation, Literal, MethodStep, PlanStep, Problem, State,
    TaskHead,
};

/// Samples drawn from one random stream. Fixing it makes results
/// independent of the number of worker threads.
pub const SHARD_SIZE: u64 = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub samples: u64,
    /// Samples that accomplished every task.
    pub successes: u64,
    pub success_rate: f64,
    /// The success probability computed from the plan itself.
    pub expected_success_rate: f64,
    /// Mean cost actually incurred per sample.
    pub mean_cost: f64,
    /// Samples stopped by an action that did not succeed.
    pub failures: u64,
    /// Samples that ended in a NULL branch.
    pub null_hits: u64,
    /// Samples per leaf, keyed by branch path (`root`, `0`, `1/0`, ...).
    pub leaf_counts: BTreeMap<String, u64>,
    /// Samples that entered each branch.
    pub branch_hits: BTreeMap<String, u64>,
}

#[derive(Default)]
struct Tally {
    successes: u64,
    failures: u64,
    null_hits: u64,
    cost_units: u128,
    leaf_counts: BTreeMap<String, u64>,
    branch_hits: BTreeMap<String, u64>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.successes += other.successes;
        self.failures += other.failures;
        self.null_hits += other.null_hits;
        self.cost_units += other.cost_units;
        for (k, v) in other.leaf_counts {
            *self.leaf_counts.entry(k).or_default() += v;
        }
        for (k, v) in other.branch_hits {
            *self.branch_hits.entry(k).or_default() += v;
        }
        self
    }
}

enum End {
    Success,
    Failed,
    Null,
}

fn draw(alternatives: &[Alternative], rng: &mut ChaCha8Rng) -> usize {
    let x: f64 = rng.random();
    let mut acc = 0.0;
    for (i, alt) in alternatives.iter().enumerate() {
        acc += alt.probability;
        if x < acc {
            return i;
        }
    }
    alternatives.len() - 1
}

fn fragment_text(fragment: &[Literal]) -> String {
    let parts: Vec<String> = fragment.iter().map(Literal::to_string).collect();
    format!("({})", parts.join(" "))
}

fn check_pre(step: &ActionStep, state: &State) -> Result<()> {
    match step.pre.iter().find(|l| !state.holds(l)) {
        None => Ok(()),
        Some(l) => Err(Error::NotExecutable {
            step: step.head().to_string(),
            reason: format!("precondition {l} does not hold"),
        }),
    }
}

fn apply_step(step: &ActionStep, state: &mut State) {
    for atom in &step.del {
        state.remove(atom);
    }
    *state = state.extended(&step.add);
}

struct Sampler<'a> {
    problem: &'a Problem,
    world: Vec<usize>,
    path: Vec<usize>,
    cost_units: u128,
}

impl Sampler<'_> {
    fn run(
        &mut self,
        plan: &ConditionalPlan,
        tally: &mut Tally,
        rng: &mut ChaCha8Rng,
    ) -> Result<End> {
        let mut state = self.problem.state.clone();
        let mut pending: Vec<usize> = (0..self.problem.beliefs.len()).collect();
        let mut current = plan;
        'plan: loop {
            for step in &current.steps {
                match step {
                    PlanStep::Method(m) => self.cost_units += m.cost.units() as u128,
                    PlanStep::Action(a) => {
                        check_pre(a, &state)?;
                        self.cost_units += a.cost.units() as u128;
                        if rng.random::<f64>() >= a.prob {
                            return Ok(End::Failed);
                        }
                        apply_step(a, &mut state);
                    }
                    PlanStep::Branch(node) => {
                        check_pre(&node.sensor, &state)?;
                        self.cost_units += node.sensor.cost.units() as u128;
                        if rng.random::<f64>() >= node.sensor.prob {
                            return Ok(End::Failed);
                        }
                        let observation = node.sensor.observation.as_ref().ok_or_else(|| {
                            Error::PlanFormat(format!(
                                "sensor {} has no observation",
                                node.sensor.head()
                            ))
                        })?;
                        let belief = matching_belief(&self.problem.beliefs, &pending, observation)?;
                        let alt = &self.problem.beliefs[belief].alternatives()[self.world[belief]];
                        let fragment: Vec<Literal> = alt.fragment.iter().cloned().collect();
                        let index = node
                            .branches
                            .iter()
                            .position(|b| b.observation == fragment)
                            .ok_or_else(|| Error::BranchMissing {
                                observation: fragment_text(&fragment),
                            })?;
                        self.path.push(index);
                        *tally.branch_hits.entry(path_label(&self.path)).or_default() += 1;
                        state = state.extended(&fragment);
                        pending.retain(|&b| b != belief);
                        match &node.branches[index].plan {
                            None => return Ok(End::Null),
                            Some(sub) => {
                                current = sub;
                                continue 'plan;
                            }
                        }
                    }
                }
            }
            return Ok(End::Success);
        }
    }
}

fn run_shard(
    plan: &ConditionalPlan,
    problem: &Problem,
    seed: u64,
    shard: u64,
    count: u64,
) -> Result<Tally> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    let mut tally = Tally::default();
    for _ in 0..count {
        let world = problem
            .beliefs
            .iter()
            .map(|b| draw(b.alternatives(), &mut rng))
            .collect();
        let mut sampler = Sampler {
            problem,
            world,
            path: Vec::new(),
            cost_units: 0,
        };
        match sampler.run(plan, &mut tally, &mut rng)? {
            End::Success => tally.successes += 1,
            End::Failed => tally.failures += 1,
            End::Null => tally.null_hits += 1,
        }
        tally.cost_units += sampler.cost_units;
        *tally
            .leaf_counts
            .entry(path_label(&sampler.path))
            .or_default() += 1;
    }
    Ok(tally)
}

/// Executes `plan` in `samples` sampled worlds. Each belief resolves to
/// one alternative per sample and each action succeeds with its
/// probability. The same seed gives the same report on any thread count.
pub fn simulate(
    plan: &ConditionalPlan,
    problem: &Problem,
    samples: u64,
    seed: u64,
) -> Result<SimulationReport> {
    plan.validate_structure()?;
    let shards = samples.div_ceil(SHARD_SIZE);
    let tallies: Vec<Result<Tally>> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let count = SHARD_SIZE.min(samples - shard * SHARD_SIZE);
            run_shard(plan, problem, seed, shard, count)
        })
        .collect();
    let mut total = Tally::default();
    for tally in tallies {
        total = total.merge(tally?);
    }
    let per_sample = |x: f64| {
        if samples == 0 {
            0.0
        } else {
            x / samples as f64
        }
    };
    Ok(SimulationReport {
        seed,
        samples,
        successes: total.successes,
        success_rate: per_sample(total.successes as f64),
        expected_success_rate: success_probability(plan),
        mean_cost: per_sample(total.cost_units as f64 / 1e6),
        failures: total.failures,
        null_hits: total.null_hits,
        leaf_counts: total.leaf_counts,
        branch_hits: total.branch_hits,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutabilityReport {
    /// Leaves reached over all worlds.
    pub worlds: usize,
    pub null_branches: usize,
}

/// Replays the plan against the domain in every world the beliefs allow:
/// each step must decompose the current task with its preconditions
/// holding, every alternative of an observed belief needs a branch, and
/// each non-NULL leaf must leave no task behind.
pub fn check_executability(
    plan: &ConditionalPlan,
    problem: &Problem,
) -> Result<ExecutabilityReport> {
    plan.validate_structure()?;
    let mut report = ExecutabilityReport::default();
    let checker = Checker { problem };
    checker.walk(
        plan,
        problem.state.clone(),
        (0..problem.beliefs.len()).collect(),
        problem.tasks.iter().cloned().collect(),
        &mut report,
    )?;
    Ok(report)
}

struct Checker<'a> {
    problem: &'a Problem,
}

impl Checker<'_> {
    fn front(
        &self,
        step: String,
        agenda: &mut VecDeque<TaskHead>,
        expected: &TaskHead,
    ) -> Result<()> {
        match agenda.pop_front() {
            Some(task) if &task == expected => Ok(()),
            Some(task) => Err(Error::NotExecutable {
                step,
                reason: format!("the current task is {task}"),
            }),
            None => Err(Error::NotExecutable {
                step,
                reason: "no task is left to accomplish".into(),
            }),
        }
    }

    fn grounded(&self, head: &TaskHead, state: &State) -> Result<Vec<Instantiation>> {
        candidates(&self.problem.domain, head, state, &self.problem.costs)
    }

    fn mismatch(step: String) -> Error {
        Error::NotExecutable {
            step,
            reason: "preconditions do not hold or the step does not match the domain".into(),
        }
    }

    fn walk(
        &self,
        plan: &ConditionalPlan,
        mut state: State,
        pending: Vec<usize>,
        mut agenda: VecDeque<TaskHead>,
        report: &mut ExecutabilityReport,
    ) -> Result<()> {
        for step in &plan.steps {
            match step {
                PlanStep::Action(a) => {
                    let head = a.head();
                    self.front(head.to_string(), &mut agenda, &head)?;
                    let ground = self
                        .grounded(&head, &state)?
                        .into_iter()
                        .find_map(|i| match i {
                            Instantiation::Action(g) if ActionStep::from(&g) == *a => Some(g),
                            _ => None,
                        })
                        .ok_or_else(|| Self::mismatch(head.to_string()))?;
                    state = apply_effects(&ground, &state);
                }
                PlanStep::Method(m) => {
                    let label = format!("{} for {}", m.name, m.task);
                    self.front(label.clone(), &mut agenda, &m.task)?;
                    let ground = self
                        .grounded(&m.task, &state)?
                        .into_iter()
                        .find_map(|i| match i {
                            Instantiation::Method(g) if MethodStep::from(&g) == *m => Some(g),
                            _ => None,
                        })
                        .ok_or_else(|| Self::mismatch(label))?;
                    for sub in ground.subtasks.iter().rev() {
                        agenda.push_front(sub.clone());
                    }
                }
                PlanStep::Branch(node) => {
                    let head = node.sensor.head();
                    self.front(head.to_string(), &mut agenda, &head)?;
                    let ground = self
                        .grounded(&head, &state)?
                        .into_iter()
                        .find_map(|i| match i {
                            Instantiation::Sensing(g) if ActionStep::from(&g) == node.sensor => {
                                Some(g)
                            }
                            _ => None,
                        })
                        .ok_or_else(|| Self::mismatch(head.to_string()))?;
                    let belief =
                        matching_belief(&self.problem.beliefs, &pending, &ground.observation)?;
                    let alternatives = self.problem.beliefs[belief].alternatives();
                    let mut matched: Vec<(&Branch, Vec<Literal>)> = Vec::new();
                    for alt in alternatives {
                        let fragment: Vec<Literal> = alt.fragment.iter().cloned().collect();
                        let branch = node
                            .branches
                            .iter()
                            .find(|b| b.observation == fragment)
                            .ok_or_else(|| Error::BranchMissing {
                                observation: fragment_text(&fragment),
                            })?;
                        matched.push((branch, fragment));
                    }
                    if node.branches.len() != alternatives.len() {
                        return Err(Error::NotExecutable {
                            step: head.to_string(),
                            reason: format!(
                                "{} branches for a belief with {} alternatives",
                                node.branches.len(),
                                alternatives.len()
                            ),
                        });
                    }
                    let remaining: Vec<usize> =
                        pending.iter().copied().filter(|&b| b != belief).collect();
                    for (alt, (branch, fragment)) in alternatives.iter().zip(matched) {
                        if (branch.probability - alt.probability).abs() > PROBABILITY_TOLERANCE {
                            return Err(Error::NotExecutable {
                                step: head.to_string(),
                                reason: format!(
                                    "branch {} has probability {}, the belief says {}",
                                    fragment_text(&fragment),
                                    branch.probability,
                                    alt.probability
                                ),
                            });
                        }
                        match &branch.plan {
                            None => {
                                report.worlds += 1;
                                report.null_branches += 1;
                            }
                            Some(sub) => self.walk(
                                sub,
                                state.extended(&fragment),
                                remaining.clone(),
                                agenda.clone(),
                                report,
                            )?,
                        }
                    }
                    return Ok(());
                }
            }
        }
        if let Some(task) = agenda.front() {
            return Err(Error::NotExecutable {
                step: task.to_string(),
                reason: "task left unaccomplished at the end of a plan path".into(),
            });
        }
        report.worlds += 1;
        Ok(())
    }
}
