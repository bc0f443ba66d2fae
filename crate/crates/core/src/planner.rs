//! Cost-optimal search for contingent plans: depth-first decomposition of
//! the task network with cost updates along the father chain, and a
//! recursive best-first bound that backtracks to the cheapest open
//! alternative once the current line of decisions stops minimizing.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristic::{update_costs, CostUpdateResult};
use crate::model::{
    apply_effects, candidates, matching_belief, plan_cost, plan_probability, Branch, BranchNode,
    ConditionalPlan, Cost, Instantiation, Kind, Literal, OpenAlternative, PlanCost, PlanStep,
    Problem, State, TaskHead, TaskId, TaskNetwork, TaskStatus,
};

const RED_ZONE: usize = 128 * 1024;
const STACK_CHUNK: usize = 4 * 1024 * 1024;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Maximum number of decisions along one line of search; `None` lifts
    /// the limit.
    pub max_depth: Option<usize>,
    /// Let a sensing outcome with no way to finish the tasks end in a NULL
    /// branch instead of failing the whole plan.
    pub allow_null_branches: bool,
    /// Reserved. Ties are broken by name and bindings, so the search is
    /// deterministic without a seed.
    pub tie_break_seed: Option<u64>,
    /// Log every decision and backtrack at debug level.
    pub trace: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            max_depth: Some(10_000),
            allow_null_branches: false,
            tie_break_seed: None,
            trace: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    /// Instantiations made.
    pub nodes: u64,
    pub backtracks: u64,
    /// Calls to the cost update.
    pub updates: u64,
    /// Ancestor costs recomputed by those updates.
    pub recomputations: u64,
    /// Deepest decision reached.
    pub max_depth: usize,
}

/// Everything the search restores on backtracking: state, pending
/// beliefs, task network, the linear plan prefix since the last branch
/// point, and the cost so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchContext {
    pub state: State,
    /// Indices of the beliefs not yet observed.
    pub pending: Vec<usize>,
    pub network: TaskNetwork,
    pub plan: Vec<PlanStep>,
    pub g: Cost,
    pub depth: usize,
    #[serde(skip)]
    pub stats: SearchStats,
}

/// A saved search context. Restoring it keeps the statistics.
#[derive(Clone, Debug)]
pub struct Snapshot(SearchContext);

impl SearchContext {
    pub fn new(problem: &Problem) -> Result<Self> {
        Ok(SearchContext {
            state: problem.state.clone(),
            pending: (0..problem.beliefs.len()).collect(),
            network: TaskNetwork::new(&problem.domain, &problem.tasks)?,
            plan: Vec::new(),
            g: Cost::ZERO,
            depth: 0,
            stats: SearchStats::default(),
        })
    }

    pub fn current_task(&self) -> Option<TaskId> {
        self.network.front()
    }

    /// Applicable instantiations of the current task, cheapest first.
    pub fn candidates(&self, problem: &Problem) -> Result<Vec<Instantiation>> {
        match self.current_task() {
            None => Ok(Vec::new()),
            Some(t) => candidates(
                &problem.domain,
                &self.network.task(t).head,
                &self.state,
                &problem.costs,
            ),
        }
    }

    /// Commits the current task to `choice`, keeping `alternatives` open,
    /// and updates the costs along the father chain.
    pub fn instantiate(
        &mut self,
        problem: &Problem,
        choice: &Instantiation,
        alternatives: Vec<OpenAlternative>,
    ) -> Result<CostUpdateResult> {
        let t = self
            .current_task()
            .ok_or_else(|| Error::Invalid("instantiation: the agenda is empty".into()))?;
        let kind = self.network.task(t).kind;
        let fits = matches!(
            (kind, choice),
            (Kind::Actuation, Instantiation::Action(_))
                | (Kind::Sensing, Instantiation::Sensing(_))
                | (Kind::Compound, Instantiation::Method(_))
        );
        if !fits {
            return Err(Error::Invalid(format!(
                "instantiation: {} does not accomplish {}",
                choice.name(),
                self.network.task(t).head
            )));
        }
        self.network.pop_front();
        let task = self.network.task_mut(t);
        task.status = TaskStatus::Instantiated;
        task.chosen = Some(choice.clone());
        task.alternatives = alternatives;
        task.baseline = self.g;
        self.g = self.g + choice.cost();
        match choice {
            Instantiation::Action(a) => {
                self.state = apply_effects(a, &self.state);
                self.plan.push(PlanStep::Action(a.into()));
            }
            Instantiation::Method(m) => {
                self.network
                    .splice_children(&problem.domain, t, &m.subtasks)?;
                self.plan.push(PlanStep::Method(m.into()));
            }
            Instantiation::Sensing(_) => {}
        }
        self.depth += 1;
        self.stats.nodes += 1;
        self.stats.max_depth = self.stats.max_depth.max(self.depth);
        Ok(self.update(t))
    }

    /// Marks the current task as having no applicable instantiation.
    pub fn mark_dead(&mut self) -> Option<CostUpdateResult> {
        let t = self.current_task()?;
        self.network.task_mut(t).status = TaskStatus::Dead;
        Some(self.update(t))
    }

    fn update(&mut self, t: TaskId) -> CostUpdateResult {
        let result = update_costs(&mut self.network, t);
        self.stats.updates += 1;
        self.stats.recomputations += result.recomputations as u64;
        result
    }

    /// The pending belief the ground observation addresses.
    pub fn observe(&self, problem: &Problem, observation: &Literal) -> Result<usize> {
        matching_belief(&problem.beliefs, &self.pending, observation)
    }

    /// Moves into the world where `belief` resolved to its alternative
    /// `alternative`. The plan prefix starts over for the branch.
    pub fn enter_branch(&mut self, problem: &Problem, belief: usize, alternative: usize) {
        let alt = &problem.beliefs[belief].alternatives()[alternative];
        self.state = self.state.extended(alt.fragment.iter());
        self.pending.retain(|&b| b != belief);
        self.plan.clear();
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot(self.clone())
    }

    pub fn backtrack(&mut self, snapshot: Snapshot) {
        let stats = std::mem::take(&mut self.stats);
        *self = snapshot.0;
        self.stats = stats;
        self.stats.backtracks += 1;
    }

    /// Canonical JSON of everything a backtrack restores.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self)
            .unwrap_or_else(|e| panic!("search context is always serializable: {e}"))
    }

    fn decision_context(&self) -> DecisionContext {
        DecisionContext {
            state: self.state.clone(),
            pending: self.pending.clone(),
            agenda: self.network.agenda_heads(),
        }
    }
}

/// What remains to be done at a decision: the state, the unobserved
/// beliefs and the agenda, current task first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecisionContext {
    pub state: State,
    pub pending: Vec<usize>,
    pub agenda: Vec<TaskHead>,
}

/// A compound task's Δ observed during search, to be compared with the
/// optimal cost of finishing everything from its decision context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityProbe {
    pub task: TaskHead,
    pub context: DecisionContext,
    pub estimate: Cost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum PlanOutcome {
    Plan {
        plan: ConditionalPlan,
        cost: PlanCost,
        probabilities: Vec<(Vec<usize>, f64)>,
    },
    Failure {
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub outcome: PlanOutcome,
    pub stats: SearchStats,
}

impl PlanResult {
    pub fn plan(&self) -> Option<&ConditionalPlan> {
        match &self.outcome {
            PlanOutcome::Plan { plan, .. } => Some(plan),
            PlanOutcome::Failure { .. } => None,
        }
    }

    /// Worst-case cost of the plan found.
    pub fn cost(&self) -> Option<Cost> {
        match &self.outcome {
            PlanOutcome::Plan { cost, .. } => Some(cost.worst),
            PlanOutcome::Failure { .. } => None,
        }
    }

    pub fn is_plan(&self) -> bool {
        self.plan().is_some()
    }
}

pub fn plan(problem: &Problem, config: &PlannerConfig) -> Result<PlanResult> {
    Search::new(problem, config, false)
        .run()
        .map(|(result, _)| result)
}

/// Plans as [`plan`] does and also returns the Δ probes of every compound
/// decision, one per distinct decision context.
pub fn plan_with_probes(
    problem: &Problem,
    config: &PlannerConfig,
) -> Result<(PlanResult, Vec<AdmissibilityProbe>)> {
    Search::new(problem, config, true).run()
}

enum Outcome {
    Solved {
        steps: Vec<PlanStep>,
        cost: Cost,
    },
    /// No plan within the bound; carries a lower bound on the cost of any
    /// plan through this node.
    Failed(Cost),
}

struct Candidate {
    f: Cost,
    rank: usize,
    inst: Instantiation,
}

type FeasibilityKey = (State, Vec<usize>, Vec<TaskHead>);

struct Search<'a> {
    problem: &'a Problem,
    config: &'a PlannerConfig,
    probing: bool,
    contexts: Vec<(TaskHead, DecisionContext)>,
    interned: HashMap<(TaskHead, DecisionContext), usize>,
    estimates: HashMap<usize, Cost>,
    feasible: HashMap<FeasibilityKey, bool>,
}

impl<'a> Search<'a> {
    fn new(problem: &'a Problem, config: &'a PlannerConfig, probing: bool) -> Self {
        Search {
            problem,
            config,
            probing,
            contexts: Vec::new(),
            interned: HashMap::new(),
            estimates: HashMap::new(),
            feasible: HashMap::new(),
        }
    }

    fn run(mut self) -> Result<(PlanResult, Vec<AdmissibilityProbe>)> {
        let mut ctx = SearchContext::new(self.problem)?;
        let outcome = match self.search(&mut ctx, Cost::INFINITE)? {
            Outcome::Solved { steps, cost } => {
                let plan = ConditionalPlan::new(steps);
                let planned = plan_cost(&plan);
                debug_assert_eq!(planned.worst, cost);
                PlanOutcome::Plan {
                    probabilities: plan_probability(&plan),
                    cost: planned,
                    plan,
                }
            }
            Outcome::Failed(_) => PlanOutcome::Failure {
                reason: if self.config.allow_null_branches {
                    "no decomposition of the initial tasks succeeds in any world".into()
                } else {
                    "no decomposition of the initial tasks succeeds in every world".into()
                },
            },
        };
        let mut probes: Vec<AdmissibilityProbe> = self
            .estimates
            .into_iter()
            .map(|(i, estimate)| {
                let (task, context) = self.contexts[i].clone();
                AdmissibilityProbe {
                    task,
                    context,
                    estimate,
                }
            })
            .collect();
        probes.sort_by(|a, b| a.task.cmp(&b.task).then(a.estimate.cmp(&b.estimate)));
        Ok((
            PlanResult {
                outcome,
                stats: ctx.stats,
            },
            probes,
        ))
    }

    fn trace(&self, ctx: &SearchContext, message: impl FnOnce() -> String) {
        if self.config.trace {
            log::debug!("[depth {} g {}] {}", ctx.depth, ctx.g, message());
        }
    }

    fn search(&mut self, ctx: &mut SearchContext, bound: Cost) -> Result<Outcome> {
        stacker::maybe_grow(RED_ZONE, STACK_CHUNK, || self.search_node(ctx, bound))
    }

    fn search_node(&mut self, ctx: &mut SearchContext, bound: Cost) -> Result<Outcome> {
        let Some(t) = ctx.current_task() else {
            return Ok(Outcome::Solved {
                steps: ctx.plan.clone(),
                cost: ctx.g,
            });
        };
        if let Some(limit) = self.config.max_depth {
            if ctx.depth >= limit {
                return Err(Error::DepthExceeded(limit));
            }
        }
        let found = ctx.candidates(self.problem)?;
        if found.is_empty() {
            self.trace(ctx, || format!("dead end at {}", ctx.network.task(t).head));
            let snapshot = ctx.snapshot();
            ctx.mark_dead();
            ctx.backtrack(snapshot);
            return Ok(Outcome::Failed(Cost::INFINITE));
        }
        let mut open: Vec<Candidate> = found
            .into_iter()
            .enumerate()
            .map(|(rank, inst)| Candidate {
                f: ctx.g + inst.cost(),
                rank,
                inst,
            })
            .collect();

        loop {
            open.sort_by_key(|c| (c.f, c.rank));
            let best = &open[0];
            if best.f.is_infinite() {
                return Ok(Outcome::Failed(Cost::INFINITE));
            }
            let best_f = best.f;
            let child_bound = bound.min(open.get(1).map_or(Cost::INFINITE, |c| c.f));
            let alternatives = open[1..]
                .iter()
                .map(|c| OpenAlternative {
                    instantiation: c.inst.clone(),
                    estimate: c.f,
                })
                .collect();
            let snapshot = ctx.snapshot();
            let context = (self.probing && ctx.network.task(t).kind == Kind::Compound)
                .then(|| self.intern(ctx.network.task(t).head.clone(), ctx.decision_context()));
            let choice = open[0].inst.clone();
            let update = ctx.instantiate(self.problem, &choice, alternatives)?;
            ctx.network.task_mut(t).context = context;

            if !update.is_consistent() || best_f > bound {
                self.trace(ctx, || {
                    format!("{} exceeds bound {bound}; backtracking", choice.name())
                });
                ctx.backtrack(snapshot);
                return Ok(Outcome::Failed(best_f));
            }
            self.trace(ctx, || {
                format!("{} for {}", choice.name(), ctx.network.task(t).head)
            });
            self.record_probes(ctx, t);

            let outcome = match &choice {
                Instantiation::Sensing(sensing) => {
                    self.branch(ctx, sensing.into(), &sensing.observation, child_bound)?
                }
                _ => self.search(ctx, child_bound)?,
            };
            match outcome {
                Outcome::Solved { .. } => return Ok(outcome),
                Outcome::Failed(f) => {
                    ctx.backtrack(snapshot);
                    open[0].f = f.max(best_f);
                }
            }
        }
    }

    fn intern(&mut self, task: TaskHead, context: DecisionContext) -> usize {
        let next = self.contexts.len();
        let key = (task, context);
        if let Some(&i) = self.interned.get(&key) {
            return i;
        }
        self.contexts.push(key.clone());
        self.interned.insert(key, next);
        next
    }

    fn record_probes(&mut self, ctx: &SearchContext, t: TaskId) {
        if !self.probing {
            return;
        }
        let mut chain = vec![t];
        chain.extend(ctx.network.ancestors(t));
        for id in chain {
            let task = ctx.network.task(id);
            if let Some(i) = task.context {
                let estimate = self.estimates.entry(i).or_insert(Cost::ZERO);
                *estimate = (*estimate).max(task.cost);
            }
        }
    }

    /// The AND node under a sensing action whose cost is already in
    /// `ctx.g`: one subsearch per alternative of the observed belief.
    fn branch(
        &mut self,
        ctx: &mut SearchContext,
        sensor: crate::model::ActionStep,
        observation: &Literal,
        bound: Cost,
    ) -> Result<Outcome> {
        let belief = ctx.observe(self.problem, observation)?;
        let null_ok = self.config.allow_null_branches;
        let mut branches = Vec::new();
        let mut worst = ctx.g;
        let mut solved_any = false;
        for (k, alt) in self.problem.beliefs[belief]
            .alternatives()
            .iter()
            .enumerate()
        {
            let mut world = ctx.clone();
            world.enter_branch(self.problem, belief, k);
            let start = world.snapshot();
            let outcome = self.search(&mut world, bound)?;
            ctx.stats = std::mem::take(&mut world.stats);
            let plan = match outcome {
                Outcome::Solved { steps, cost } => {
                    worst = worst.max(cost);
                    solved_any = true;
                    Some(ConditionalPlan::new(steps))
                }
                Outcome::Failed(f)
                    if null_ok && (f.is_infinite() || !self.feasible(&start.0)?) =>
                {
                    None
                }
                Outcome::Failed(f) => return Ok(Outcome::Failed(f)),
            };
            branches.push(Branch {
                observation: alt.fragment.iter().cloned().collect(),
                probability: alt.probability,
                plan,
            });
        }
        if !solved_any {
            return Ok(Outcome::Failed(Cost::INFINITE));
        }
        let mut steps = std::mem::take(&mut ctx.plan);
        steps.push(PlanStep::Branch(BranchNode { sensor, branches }));
        Ok(Outcome::Solved { steps, cost: worst })
    }

    /// Whether any decomposition of the remaining agenda exists from
    /// `ctx`, regardless of cost.
    fn feasible(&mut self, ctx: &SearchContext) -> Result<bool> {
        self.feasible_from(
            ctx.state.clone(),
            ctx.pending.clone(),
            ctx.network.agenda_heads(),
        )
    }

    fn feasible_from(
        &mut self,
        state: State,
        pending: Vec<usize>,
        agenda: Vec<TaskHead>,
    ) -> Result<bool> {
        let Some(head) = agenda.first().cloned() else {
            return Ok(true);
        };
        let key = (state, pending, agenda);
        if let Some(&known) = self.feasible.get(&key) {
            return Ok(known);
        }
        let (state, pending, agenda) = &key;
        let answer = stacker::maybe_grow(RED_ZONE, STACK_CHUNK, || -> Result<bool> {
            let rest = &agenda[1..];
            for inst in candidates(&self.problem.domain, &head, state, &self.problem.costs)? {
                let ok = match &inst {
                    Instantiation::Action(a) => {
                        self.feasible_from(apply_effects(a, state), pending.clone(), rest.to_vec())?
                    }
                    Instantiation::Method(m) => {
                        let mut next = m.subtasks.clone();
                        next.extend_from_slice(rest);
                        self.feasible_from(state.clone(), pending.clone(), next)?
                    }
                    Instantiation::Sensing(s) => {
                        let belief =
                            matching_belief(&self.problem.beliefs, pending, &s.observation)?;
                        let remaining: Vec<usize> =
                            pending.iter().copied().filter(|&b| b != belief).collect();
                        let mut results = Vec::new();
                        for alt in self.problem.beliefs[belief].alternatives() {
                            let world = state.extended(alt.fragment.iter());
                            results.push(self.feasible_from(
                                world,
                                remaining.clone(),
                                rest.to_vec(),
                            )?);
                        }
                        if self.config.allow_null_branches {
                            results.iter().any(|&r| r)
                        } else {
                            results.iter().all(|&r| r)
                        }
                    }
                };
                if ok {
                    return Ok(true);
                }
            }
            Ok(false)
        })?;
        self.feasible.insert(key, answer);
        Ok(answer)
    }
}
