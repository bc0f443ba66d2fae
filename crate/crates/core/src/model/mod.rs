//! States, belief states, operators, methods, task networks and plans,
//! with the cost and probability calculus over them.

pub mod belief;
pub mod cost;
pub mod domain;
pub mod ground;
pub mod literal;
pub mod network;
pub mod plan;

pub use belief::{belief_cost, matching_belief, Alternative, BeliefState};
pub use cost::Cost;
pub use domain::{
    action_cost, method_cost, ActuationOperator, CostTable, Domain, Method, Operator, Problem,
    SensingOperator, TaskKind,
};
pub use ground::{
    applicable, apply_effects, candidates, GroundAction, GroundMethod, GroundSensing, Instantiation,
};
pub use literal::{Literal, State, Substitution, TaskHead};
pub use network::{Kind, OpenAlternative, Task, TaskId, TaskNetwork, TaskStatus};
pub use plan::{
    plan_cost, plan_probability, success_probability, ActionStep, Branch, BranchNode,
    ConditionalPlan, MethodStep, PlanCost, PlanPath, PlanStep,
};
