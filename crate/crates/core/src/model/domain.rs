use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::belief::BeliefState;
use super::cost::Cost;
use super::literal::{Literal, State, TaskHead};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActuationOperator {
    pub name: String,
    pub params: Vec<String>,
    pub pre: Vec<Literal>,
    pub add: Vec<Literal>,
    pub del: Vec<Literal>,
    pub prob: f64,
}

/// Observes a belief state; never changes the world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensingOperator {
    pub name: String,
    pub params: Vec<String>,
    pub pre: Vec<Literal>,
    pub observe: Literal,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Operator {
    Actuation(ActuationOperator),
    Sensing(SensingOperator),
}

impl Operator {
    pub fn name(&self) -> &str {
        match self {
            Operator::Actuation(op) => &op.name,
            Operator::Sensing(op) => &op.name,
        }
    }

    pub fn params(&self) -> &[String] {
        match self {
            Operator::Actuation(op) => &op.params,
            Operator::Sensing(op) => &op.params,
        }
    }

    pub fn pre(&self) -> &[Literal] {
        match self {
            Operator::Actuation(op) => &op.pre,
            Operator::Sensing(op) => &op.pre,
        }
    }

    pub fn prob(&self) -> f64 {
        match self {
            Operator::Actuation(op) => op.prob,
            Operator::Sensing(op) => op.prob,
        }
    }

    pub fn is_sensing(&self) -> bool {
        matches!(self, Operator::Sensing(_))
    }
}

/// Decomposes the compound task `task` into `subtasks` when `pre` holds.
/// `name` is a unique label; several methods may share one task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Method {
    pub name: String,
    pub task: TaskHead,
    pub pre: Vec<Literal>,
    pub subtasks: Vec<TaskHead>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    Compound,
    Actuation,
    Sensing,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub name: String,
    pub operators: Vec<Operator>,
    pub methods: Vec<Method>,
}

impl Domain {
    pub fn operator(&self, name: &str) -> Option<&Operator> {
        self.operators.iter().find(|op| op.name() == name)
    }

    pub fn methods_for<'a>(&'a self, task: &'a str) -> impl Iterator<Item = &'a Method> + 'a {
        self.methods.iter().filter(move |m| m.task.name == task)
    }

    /// Kind and arity of a task name, if the domain knows it.
    pub fn task_signature(&self, name: &str) -> Option<(TaskKind, usize)> {
        if let Some(op) = self.operator(name) {
            let kind = if op.is_sensing() {
                TaskKind::Sensing
            } else {
                TaskKind::Actuation
            };
            return Some((kind, op.params().len()));
        }
        self.methods_for(name)
            .next()
            .map(|m| (TaskKind::Compound, m.task.args.len()))
    }

    pub fn kind_of(&self, head: &TaskHead) -> Option<TaskKind> {
        self.task_signature(&head.name).map(|(kind, _)| kind)
    }
}

/// Δ: cost of each ground literal; unlisted literals cost `default`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CostTable {
    entries: BTreeMap<Literal, Cost>,
    default: Cost,
}

impl CostTable {
    pub fn new(default: Cost) -> Self {
        CostTable {
            entries: BTreeMap::new(),
            default,
        }
    }

    pub fn set(&mut self, literal: Literal, cost: Cost) {
        self.entries.insert(literal, cost);
    }

    pub fn default_cost(&self) -> Cost {
        self.default
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Literal, &Cost)> {
        self.entries.iter()
    }

    pub fn cost_of(&self, literal: &Literal) -> Cost {
        self.entries.get(literal).copied().unwrap_or(self.default)
    }

    /// Σ Δ(l) over the distinct literals yielded.
    pub fn sum<'a, I: IntoIterator<Item = &'a Literal>>(&self, literals: I) -> Cost {
        let distinct: BTreeSet<&Literal> = literals.into_iter().collect();
        distinct.into_iter().map(|l| self.cost_of(l)).sum()
    }

    /// Every entry, and the default, multiplied by `k`.
    pub fn scaled(&self, k: u64) -> CostTable {
        CostTable {
            entries: self
                .entries
                .iter()
                .map(|(l, c)| (l.clone(), c.scale(k)))
                .collect(),
            default: self.default.scale(k),
        }
    }
}

/// The planning problem (s₀, bs, ω₀, D, Δ).
#[derive(Clone, Debug)]
pub struct Problem {
    pub name: String,
    pub state: State,
    pub beliefs: Vec<BeliefState>,
    pub tasks: Vec<TaskHead>,
    pub domain: Arc<Domain>,
    pub costs: CostTable,
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        domain: Arc<Domain>,
        state: State,
        beliefs: Vec<BeliefState>,
        tasks: Vec<TaskHead>,
        costs: CostTable,
    ) -> Result<Self> {
        for task in &tasks {
            if !task.is_ground() {
                return Err(Error::Invalid(format!(
                    "initial task {task}: must be ground"
                )));
            }
            match domain.task_signature(&task.name) {
                None => {
                    return Err(Error::Invalid(format!(
                        "initial task {task}: unknown task name"
                    )))
                }
                Some((_, arity)) if arity != task.args.len() => {
                    return Err(Error::Invalid(format!(
                        "initial task {task}: expected {arity} arguments"
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(Problem {
            name: name.into(),
            state,
            beliefs,
            tasks,
            domain,
            costs,
        })
    }

    pub fn with_costs(&self, costs: CostTable) -> Problem {
        Problem {
            costs,
            ..self.clone()
        }
    }
}

/// Δ(a) = Σ Δ(l) for l ∈ pre(a), with pre treated as a set.
pub fn action_cost(pre: &[Literal], delta: &CostTable) -> Cost {
    delta.sum(pre)
}

/// Δ(m) = Σ Δ(l) for l ∈ pre(m), with pre treated as a set.
pub fn method_cost(pre: &[Literal], delta: &CostTable) -> Cost {
    delta.sum(pre)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn supplier_b_unoccupied() -> Literal {
        Literal::new("supplier", ["b", "unoccupied"])
    }

    #[test]
    fn refuel_at_b_costs_100() {
        let mut delta = CostTable::default();
        delta.set(supplier_b_unoccupied(), Cost::from_int(100));
        assert_eq!(
            action_cost(&[supplier_b_unoccupied()], &delta),
            Cost::from_int(100)
        );
    }

    #[test]
    fn empty_and_additive_costs() {
        let mut delta = CostTable::default();
        let (l1, l2) = (Literal::new("l", ["1"]), Literal::new("l", ["2"]));
        delta.set(l1.clone(), Cost::from_int(3));
        delta.set(l2.clone(), Cost::from_int(4));
        assert_eq!(action_cost(&[], &delta), Cost::ZERO);
        assert_eq!(method_cost(&[], &delta), Cost::ZERO);
        assert_eq!(action_cost(&[l1.clone(), l2], &delta), Cost::from_int(7));
        assert_eq!(method_cost(&[l1.clone(), l1], &delta), Cost::from_int(3));
    }

    #[test]
    fn singleton_method_cost() {
        let usable = Literal::new("usable", ["a"]);
        let mut delta = CostTable::default();
        delta.set(usable.clone(), Cost::from_int(5));
        assert_eq!(method_cost(&[usable], &delta), Cost::from_int(5));
    }

    #[test]
    fn unlisted_literals_use_default() {
        let delta = CostTable::new(Cost::from_int(2));
        assert_eq!(
            action_cost(&[Literal::new("p", ["x"])], &delta),
            Cost::from_int(2)
        );
        assert_eq!(CostTable::default().default_cost(), Cost::ZERO);
    }

    #[test]
    fn scaling_is_exact() {
        let mut delta = CostTable::new(Cost::from_int(1));
        delta.set(Literal::new("p", ["x"]), "2.5".parse().unwrap());
        let scaled = delta.scaled(4);
        assert_eq!(
            scaled.cost_of(&Literal::new("p", ["x"])),
            Cost::from_int(10)
        );
        assert_eq!(scaled.default_cost(), Cost::from_int(4));
    }
}
