//! The task cost Δ(t), the consistency test, and the bottom-up update
//! along the father chain.

use serde::{Deserialize, Serialize};

use crate::model::{Cost, TaskId, TaskNetwork, TaskStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "status")]
pub enum ConsistencyStatus {
    Consistent,
    /// The first task on the chain, lowest first, that stopped minimizing.
    Inconsistent {
        at: TaskId,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostUpdateResult {
    pub status: ConsistencyStatus,
    /// Ancestors whose Δ was recomputed.
    pub recomputations: usize,
}

impl CostUpdateResult {
    pub fn is_consistent(&self) -> bool {
        self.status == ConsistencyStatus::Consistent
    }
}

/// Cost of `t` under its chosen instantiation: the local cost plus Δ of
/// every child, where children not yet instantiated contribute 0.
pub fn chosen_cost(network: &TaskNetwork, t: TaskId) -> Cost {
    let task = network.task(t);
    match (&task.status, &task.chosen) {
        (TaskStatus::Dead, _) => Cost::INFINITE,
        (_, None) => Cost::ZERO,
        (_, Some(inst)) => inst.cost() + task.children.iter().map(|&c| network.task(c).cost).sum(),
    }
}

/// Δ(t): 0 while uninstantiated, infinite when nothing applies, otherwise
/// the minimum over the chosen instantiation and every open alternative.
pub fn heuristic_cost(network: &TaskNetwork, t: TaskId) -> Cost {
    let task = network.task(t);
    match task.status {
        TaskStatus::Pending => Cost::ZERO,
        TaskStatus::Dead => Cost::INFINITE,
        TaskStatus::Instantiated => chosen_cost(network, t).min(task.best_alternative()),
    }
}

/// The chosen instantiation still costs no more than any open alternative;
/// ties keep the incumbent.
pub fn is_consistent(network: &TaskNetwork, t: TaskId) -> bool {
    let task = network.task(t);
    match task.status {
        TaskStatus::Pending => true,
        TaskStatus::Dead => false,
        TaskStatus::Instantiated => chosen_cost(network, t) <= task.best_alternative(),
    }
}

/// Refreshes Δ of the just-instantiated task `t` and of each ancestor in
/// turn, stopping at the first task that is no longer consistent.
pub fn update_costs(network: &mut TaskNetwork, t: TaskId) -> CostUpdateResult {
    let cost = heuristic_cost(network, t);
    network.task_mut(t).cost = cost;
    let mut current = t;
    let mut recomputations = 0;
    loop {
        if !is_consistent(network, current) {
            return CostUpdateResult {
                status: ConsistencyStatus::Inconsistent { at: current },
                recomputations,
            };
        }
        let Some(parent) = network.task(current).parent else {
            return CostUpdateResult {
                status: ConsistencyStatus::Consistent,
                recomputations,
            };
        };
        let cost = heuristic_cost(network, parent);
        network.task_mut(parent).cost = cost;
        recomputations += 1;
        current = parent;
    }
}
