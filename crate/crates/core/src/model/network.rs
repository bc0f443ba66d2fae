use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::cost::Cost;
use super::domain::{Domain, TaskKind};
use super::ground::Instantiation;
use super::literal::TaskHead;
use crate::error::{Error, Result};

pub type TaskId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Pending,
    Instantiated,
    /// No instantiation applies; Δ is infinite.
    Dead,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Compound,
    Actuation,
    Sensing,
}

impl From<TaskKind> for Kind {
    fn from(kind: TaskKind) -> Self {
        match kind {
            TaskKind::Compound => Kind::Compound,
            TaskKind::Actuation => Kind::Actuation,
            TaskKind::Sensing => Kind::Sensing,
        }
    }
}

/// An instantiation that was not chosen, with the lowest total plan cost
/// known to be reachable through it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenAlternative {
    pub instantiation: Instantiation,
    pub estimate: Cost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub kind: Kind,
    pub head: TaskHead,
    /// Δ(t).
    pub cost: Cost,
    pub status: TaskStatus,
    pub chosen: Option<Instantiation>,
    pub alternatives: Vec<OpenAlternative>,
    /// Plan cost already incurred when the task was instantiated; turns the
    /// alternatives' totals into costs local to this task.
    pub baseline: Cost,
    pub children: Vec<TaskId>,
    pub parent: Option<TaskId>,
    /// Index of the recorded decision context, when the search keeps them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<usize>,
}

impl Task {
    pub fn new(kind: Kind, head: TaskHead, parent: Option<TaskId>) -> Self {
        Task {
            kind,
            head,
            cost: Cost::ZERO,
            status: TaskStatus::Pending,
            chosen: None,
            alternatives: Vec::new(),
            baseline: Cost::ZERO,
            children: Vec::new(),
            parent,
            context: None,
        }
    }

    /// Cheapest open alternative, relative to the task's baseline.
    pub fn best_alternative(&self) -> Cost {
        self.alternatives
            .iter()
            .map(|alt| alt.estimate.saturating_sub(self.baseline))
            .min()
            .unwrap_or(Cost::INFINITE)
    }
}

/// The task hierarchy plus the ordered agenda of tasks still to be
/// instantiated; the front of the agenda is the current task.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskNetwork {
    tasks: Vec<Task>,
    roots: Vec<TaskId>,
    agenda: VecDeque<TaskId>,
}

impl TaskNetwork {
    pub fn new(domain: &Domain, heads: &[TaskHead]) -> Result<Self> {
        let mut network = TaskNetwork::default();
        for head in heads {
            let id = network.add(domain, head.clone(), None)?;
            network.roots.push(id);
            network.agenda.push_back(id);
        }
        Ok(network)
    }

    fn add(&mut self, domain: &Domain, head: TaskHead, parent: Option<TaskId>) -> Result<TaskId> {
        let kind = domain
            .kind_of(&head)
            .ok_or_else(|| Error::Invalid(format!("task {head}: unknown task name")))?;
        self.tasks.push(Task::new(kind.into(), head, parent));
        Ok(self.tasks.len() - 1)
    }

    pub fn task(&self, id: TaskId) -> &Task {
        &self.tasks[id]
    }

    pub fn task_mut(&mut self, id: TaskId) -> &mut Task {
        &mut self.tasks[id]
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn roots(&self) -> &[TaskId] {
        &self.roots
    }

    pub fn front(&self) -> Option<TaskId> {
        self.agenda.front().copied()
    }

    pub fn agenda(&self) -> impl Iterator<Item = TaskId> + '_ {
        self.agenda.iter().copied()
    }

    /// Heads of the remaining agenda, front first.
    pub fn agenda_heads(&self) -> Vec<TaskHead> {
        self.agenda
            .iter()
            .map(|&id| self.tasks[id].head.clone())
            .collect()
    }

    /// Pops the current task from the agenda.
    pub fn pop_front(&mut self) -> Option<TaskId> {
        self.agenda.pop_front()
    }

    /// Adds `heads` as children of `parent` and puts them at the front of the
    /// agenda in order.
    pub fn splice_children(
        &mut self,
        domain: &Domain,
        parent: TaskId,
        heads: &[TaskHead],
    ) -> Result<()> {
        let mut ids = Vec::with_capacity(heads.len());
        for head in heads {
            ids.push(self.add(domain, head.clone(), Some(parent))?);
        }
        for &id in ids.iter().rev() {
            self.agenda.push_front(id);
        }
        self.tasks[parent].children = ids;
        Ok(())
    }

    /// Ancestors of `id`, nearest first.
    pub fn ancestors(&self, id: TaskId) -> Vec<TaskId> {
        let mut out = Vec::new();
        let mut cursor = self.tasks[id].parent;
        while let Some(p) = cursor {
            out.push(p);
            cursor = self.tasks[p].parent;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::domain::{ActuationOperator, Method, Operator};

    fn domain() -> Domain {
        Domain {
            name: "d".into(),
            operators: vec![Operator::Actuation(ActuationOperator {
                name: "!p".into(),
                params: vec![],
                pre: vec![],
                add: vec![],
                del: vec![],
                prob: 1.0,
            })],
            methods: vec![Method {
                name: "m".into(),
                task: TaskHead::new("c", Vec::<String>::new()),
                pre: vec![],
                subtasks: vec![TaskHead::new("!p", Vec::<String>::new())],
            }],
        }
    }

    #[test]
    fn splice_puts_children_first_in_order() {
        let d = domain();
        let c = TaskHead::new("c", Vec::<String>::new());
        let p = TaskHead::new("!p", Vec::<String>::new());
        let mut net = TaskNetwork::new(&d, &[c.clone(), p.clone()]).unwrap();
        let root = net.pop_front().unwrap();
        net.splice_children(&d, root, &[p.clone(), c.clone()])
            .unwrap();
        let heads: Vec<_> = net.agenda_heads().iter().map(|h| h.name.clone()).collect();
        assert_eq!(heads, ["!p", "c", "!p"]);
        assert_eq!(net.ancestors(2), [0]);
        assert_eq!(net.task(0).kind, Kind::Compound);
        assert_eq!(net.task(1).kind, Kind::Actuation);
    }

    #[test]
    fn unknown_heads_rejected() {
        assert!(
            TaskNetwork::new(&domain(), &[TaskHead::new("nope", Vec::<String>::new())]).is_err()
        );
    }
}
