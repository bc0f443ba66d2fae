//! Exhaustive enumeration of every decomposition, used as ground truth
//! for the planner's costs and for the admissibility of Δ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    apply_effects, candidates, matching_belief, Branch, BranchNode, ConditionalPlan, Cost,
    Instantiation, PlanStep, Problem, State, TaskHead,
};
use crate::planner::{plan_with_probes, DecisionContext, PlannerConfig};

pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    /// Nodes the enumeration may visit before giving up.
    pub budget: u64,
    pub allow_null_branches: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            budget: DEFAULT_BUDGET,
            allow_null_branches: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Worst-case cost of the cheapest plan; infinite when there is none.
    pub best_cost: Cost,
    pub best_plan: Option<ConditionalPlan>,
    /// Complete plans seen, saturating.
    pub plans_enumerated: u64,
    pub nodes: u64,
}

struct Value {
    best: Option<(Cost, Vec<PlanStep>)>,
    count: u64,
}

impl Value {
    fn none() -> Self {
        Value {
            best: None,
            count: 0,
        }
    }

    fn offer(&mut self, cost: Cost, steps: impl FnOnce() -> Vec<PlanStep>) {
        if self.best.as_ref().is_none_or(|(c, _)| cost < *c) {
            self.best = Some((cost, steps()));
        }
    }
}

struct Enumerator<'a> {
    problem: &'a Problem,
    config: OracleConfig,
    nodes: u64,
}

impl Enumerator<'_> {
    fn onward(&mut self, state: &State, pending: &[usize], agenda: &[TaskHead]) -> Result<Value> {
        self.nodes += 1;
        if self.nodes > self.config.budget {
            return Err(Error::BudgetExceeded(self.config.budget));
        }
        let Some((head, rest)) = agenda.split_first() else {
            return Ok(Value {
                best: Some((Cost::ZERO, Vec::new())),
                count: 1,
            });
        };
        let mut value = Value::none();
        for inst in candidates(&self.problem.domain, head, state, &self.problem.costs)? {
            match &inst {
                Instantiation::Action(a) => {
                    let sub = stacker::maybe_grow(64 * 1024, 1024 * 1024, || {
                        self.onward(&apply_effects(a, state), pending, rest)
                    })?;
                    value.count = value.count.saturating_add(sub.count);
                    if let Some((cost, steps)) = sub.best {
                        value.offer(a.cost + cost, || prepend(PlanStep::Action(a.into()), steps));
                    }
                }
                Instantiation::Method(m) => {
                    let mut next = m.subtasks.clone();
                    next.extend_from_slice(rest);
                    let sub = stacker::maybe_grow(64 * 1024, 1024 * 1024, || {
                        self.onward(state, pending, &next)
                    })?;
                    value.count = value.count.saturating_add(sub.count);
                    if let Some((cost, steps)) = sub.best {
                        value.offer(m.cost + cost, || prepend(PlanStep::Method(m.into()), steps));
                    }
                }
                Instantiation::Sensing(s) => {
                    let belief = matching_belief(&self.problem.beliefs, pending, &s.observation)?;
                    let remaining: Vec<usize> =
                        pending.iter().copied().filter(|&b| b != belief).collect();
                    let mut branches = Vec::new();
                    let mut worst = Cost::ZERO;
                    let mut count = 1u64;
                    let mut solved = 0;
                    let mut complete = true;
                    for alt in self.problem.beliefs[belief].alternatives() {
                        let world = state.extended(alt.fragment.iter());
                        let sub = stacker::maybe_grow(64 * 1024, 1024 * 1024, || {
                            self.onward(&world, &remaining, rest)
                        })?;
                        let plan = match sub.best {
                            Some((cost, steps)) => {
                                worst = worst.max(cost);
                                solved += 1;
                                count = count.saturating_mul(sub.count);
                                Some(ConditionalPlan::new(steps))
                            }
                            None if self.config.allow_null_branches => None,
                            None => {
                                complete = false;
                                None
                            }
                        };
                        branches.push(Branch {
                            observation: alt.fragment.iter().cloned().collect(),
                            probability: alt.probability,
                            plan,
                        });
                    }
                    if complete && solved > 0 {
                        value.count = value.count.saturating_add(count);
                        value.offer(s.cost + worst, || {
                            vec![PlanStep::Branch(BranchNode {
                                sensor: s.into(),
                                branches,
                            })]
                        });
                    }
                }
            }
        }
        Ok(value)
    }
}

fn prepend(step: PlanStep, mut steps: Vec<PlanStep>) -> Vec<PlanStep> {
    steps.insert(0, step);
    steps
}

/// The cheapest plan by exhaustive enumeration.
pub fn oracle_plan(problem: &Problem, config: &OracleConfig) -> Result<OracleResult> {
    let pending: Vec<usize> = (0..problem.beliefs.len()).collect();
    let mut enumerator = Enumerator {
        problem,
        config: *config,
        nodes: 0,
    };
    let value = enumerator.onward(&problem.state, &pending, &problem.tasks)?;
    let (best_cost, best_plan) = match value.best {
        Some((cost, steps)) => (cost, Some(ConditionalPlan::new(steps))),
        None => (Cost::INFINITE, None),
    };
    Ok(OracleResult {
        best_cost,
        best_plan,
        plans_enumerated: value.count,
        nodes: enumerator.nodes,
    })
}

/// Cheapest worst-case cost of finishing `context`'s agenda from its state;
/// infinite when it cannot be finished.
pub fn onward_cost(
    problem: &Problem,
    context: &DecisionContext,
    config: &OracleConfig,
) -> Result<Cost> {
    let mut enumerator = Enumerator {
        problem,
        config: *config,
        nodes: 0,
    };
    let value = enumerator.onward(&context.state, &context.pending, &context.agenda)?;
    Ok(value.best.map_or(Cost::INFINITE, |(cost, _)| cost))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityViolation {
    pub task: TaskHead,
    pub estimate: Cost,
    pub optimum: Cost,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// Distinct decision contexts checked.
    pub probes: usize,
    pub violations: Vec<AdmissibilityViolation>,
}

impl AdmissibilityReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Runs the planner and compares every Δ it assigned to a compound task
/// with the optimal cost of finishing from that task's decision context.
pub fn check_admissibility(
    problem: &Problem,
    config: &PlannerConfig,
    budget: u64,
) -> Result<AdmissibilityReport> {
    let (_, probes) = plan_with_probes(problem, config)?;
    let oracle = OracleConfig {
        budget,
        allow_null_branches: config.allow_null_branches,
    };
    let mut report = AdmissibilityReport {
        probes: probes.len(),
        violations: Vec::new(),
    };
    for probe in probes {
        let optimum = onward_cost(problem, &probe.context, &oracle)?;
        if probe.estimate > optimum {
            report.violations.push(AdmissibilityViolation {
                task: probe.task,
                estimate: probe.estimate,
                optimum,
            });
        }
    }
    Ok(report)
}
