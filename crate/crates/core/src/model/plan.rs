use serde::{Deserialize, Serialize};

use super::cost::Cost;
use super::ground::{GroundAction, GroundMethod, GroundSensing};
use super::literal::{Literal, TaskHead};
use crate::error::{Error, Result};

/// An executed ground operator instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionStep {
    pub name: String,
    pub args: Vec<String>,
    pub cost: Cost,
    pub prob: f64,
    pub pre: Vec<Literal>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub add: Vec<Literal>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub del: Vec<Literal>,
    /// Set on sensing actions only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<Literal>,
}

impl ActionStep {
    pub fn head(&self) -> TaskHead {
        TaskHead::new(self.name.clone(), self.args.iter().cloned())
    }
}

impl From<&GroundAction> for ActionStep {
    fn from(a: &GroundAction) -> Self {
        ActionStep {
            name: a.name.clone(),
            args: a.args.clone(),
            cost: a.cost,
            prob: a.prob,
            pre: a.pre.clone(),
            add: a.add.clone(),
            del: a.del.clone(),
            observation: None,
        }
    }
}

impl From<&GroundSensing> for ActionStep {
    fn from(s: &GroundSensing) -> Self {
        ActionStep {
            name: s.name.clone(),
            args: s.args.clone(),
            cost: s.cost,
            prob: s.prob,
            pre: s.pre.clone(),
            add: Vec::new(),
            del: Vec::new(),
            observation: Some(s.observation.clone()),
        }
    }
}

/// A method application. It executes nothing but its cost counts towards
/// the plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodStep {
    pub name: String,
    pub task: TaskHead,
    pub cost: Cost,
    pub pre: Vec<Literal>,
}

impl From<&GroundMethod> for MethodStep {
    fn from(m: &GroundMethod) -> Self {
        MethodStep {
            name: m.name.clone(),
            task: m.task.clone(),
            cost: m.cost,
            pre: m.pre.clone(),
        }
    }
}

/// One outcome of a sensing action. `plan: None` is a NULL branch: the
/// remaining tasks cannot be accomplished in that world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub observation: Vec<Literal>,
    pub probability: f64,
    pub plan: Option<ConditionalPlan>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchNode {
    pub sensor: ActionStep,
    pub branches: Vec<Branch>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PlanStep {
    Action(ActionStep),
    Method(MethodStep),
    Branch(BranchNode),
}

impl PlanStep {
    pub fn cost(&self) -> Cost {
        match self {
            PlanStep::Action(a) => a.cost,
            PlanStep::Method(m) => m.cost,
            PlanStep::Branch(b) => b.sensor.cost,
        }
    }
}

/// A plan tree; a branch node, when present, is the last step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionalPlan {
    pub steps: Vec<PlanStep>,
}

impl ConditionalPlan {
    pub fn new(steps: Vec<PlanStep>) -> Self {
        ConditionalPlan { steps }
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Actions in execution order along every path, sensors included.
    pub fn actions(&self) -> Vec<&ActionStep> {
        let mut out = Vec::new();
        self.collect_actions(&mut out);
        out
    }

    fn collect_actions<'a>(&'a self, out: &mut Vec<&'a ActionStep>) {
        for step in &self.steps {
            match step {
                PlanStep::Action(a) => out.push(a),
                PlanStep::Method(_) => {}
                PlanStep::Branch(node) => {
                    out.push(&node.sensor);
                    for branch in &node.branches {
                        if let Some(plan) = &branch.plan {
                            plan.collect_actions(out);
                        }
                    }
                }
            }
        }
    }

    pub fn branch_nodes(&self) -> Vec<&BranchNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(plan) = stack.pop() {
            for step in &plan.steps {
                if let PlanStep::Branch(node) = step {
                    out.push(node);
                    stack.extend(node.branches.iter().filter_map(|b| b.plan.as_ref()));
                }
            }
        }
        out
    }

    /// Every root-to-leaf path with its cost and probability.
    pub fn paths(&self) -> Vec<PlanPath> {
        let mut out = Vec::new();
        self.walk_paths(Vec::new(), Cost::ZERO, 1.0, &mut out);
        out
    }

    fn walk_paths(
        &self,
        path: Vec<usize>,
        mut cost: Cost,
        mut probability: f64,
        out: &mut Vec<PlanPath>,
    ) {
        for step in &self.steps {
            match step {
                PlanStep::Action(a) => {
                    cost = cost + a.cost;
                    probability *= a.prob;
                }
                PlanStep::Method(m) => cost = cost + m.cost,
                PlanStep::Branch(node) => {
                    let cost = cost + node.sensor.cost;
                    let probability = probability * node.sensor.prob;
                    for (i, branch) in node.branches.iter().enumerate() {
                        let mut sub = path.clone();
                        sub.push(i);
                        let p = probability * branch.probability;
                        match &branch.plan {
                            Some(plan) => plan.walk_paths(sub, cost, p, out),
                            None => out.push(PlanPath {
                                path: sub,
                                cost,
                                probability: p,
                                achieved: false,
                            }),
                        }
                    }
                    return;
                }
            }
        }
        out.push(PlanPath {
            path,
            cost,
            probability,
            achieved: true,
        });
    }

    /// Checks the structural invariants every plan must satisfy.
    pub fn validate_structure(&self) -> Result<()> {
        for (i, step) in self.steps.iter().enumerate() {
            if let PlanStep::Branch(node) = step {
                if i + 1 != self.steps.len() {
                    return Err(Error::PlanFormat(
                        "branch node must be the last step of its plan".into(),
                    ));
                }
                if node.sensor.observation.is_none() {
                    return Err(Error::PlanFormat(format!(
                        "sensor {} has no observation",
                        node.sensor.head()
                    )));
                }
                if node.branches.is_empty() {
                    return Err(Error::PlanFormat("branch node without branches".into()));
                }
                let total: f64 = node.branches.iter().map(|b| b.probability).sum();
                if (total - 1.0).abs() > super::belief::PROBABILITY_TOLERANCE {
                    return Err(Error::PlanFormat(format!(
                        "branch probabilities sum to {total}"
                    )));
                }
                for branch in &node.branches {
                    if let Some(plan) = &branch.plan {
                        plan.validate_structure()?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// One root-to-leaf path: branch indices taken, accumulated cost and
/// probability, and whether it ends in a NULL branch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanPath {
    pub path: Vec<usize>,
    pub cost: Cost,
    pub probability: f64,
    pub achieved: bool,
}

impl PlanPath {
    /// `0/1`-style label; the single path of a linear plan is `root`.
    pub fn label(&self) -> String {
        path_label(&self.path)
    }
}

pub fn path_label(path: &[usize]) -> String {
    if path.is_empty() {
        "root".to_string()
    } else {
        path.iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join("/")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanCost {
    /// Worst case over all paths.
    pub worst: Cost,
    pub paths: Vec<(Vec<usize>, Cost)>,
}

pub fn plan_cost(plan: &ConditionalPlan) -> PlanCost {
    let paths: Vec<_> = plan.paths().into_iter().map(|p| (p.path, p.cost)).collect();
    PlanCost {
        worst: paths.iter().map(|(_, c)| *c).max().unwrap_or(Cost::ZERO),
        paths,
    }
}

/// Path probabilities: product of action probabilities and branch
/// probabilities taken.
pub fn plan_probability(plan: &ConditionalPlan) -> Vec<(Vec<usize>, f64)> {
    plan.paths()
        .into_iter()
        .map(|p| (p.path, p.probability))
        .collect()
}

/// Probability that executing the plan accomplishes every task.
pub fn success_probability(plan: &ConditionalPlan) -> f64 {
    plan.paths()
        .iter()
        .filter(|p| p.achieved)
        .map(|p| p.probability)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(name: &str, cost: u64, prob: f64) -> PlanStep {
        PlanStep::Action(ActionStep {
            name: name.into(),
            args: vec![],
            cost: Cost::from_int(cost),
            prob,
            pre: vec![],
            add: vec![],
            del: vec![],
            observation: None,
        })
    }

    fn sensor() -> ActionStep {
        ActionStep {
            name: "!sense".into(),
            args: vec![],
            cost: Cost::ZERO,
            prob: 1.0,
            pre: vec![],
            add: vec![],
            del: vec![],
            observation: Some(Literal::new("usable", ["a"])),
        }
    }

    fn branching(costs: [u64; 2], probs: [f64; 2]) -> ConditionalPlan {
        let branch = |c, p, tag: &str| Branch {
            observation: vec![Literal::new("usable", ["a", tag])],
            probability: p,
            plan: Some(ConditionalPlan::new(vec![act("!go", c, 1.0)])),
        };
        ConditionalPlan::new(vec![PlanStep::Branch(BranchNode {
            sensor: sensor(),
            branches: vec![
                branch(costs[0], probs[0], "yes"),
                branch(costs[1], probs[1], "no"),
            ],
        })])
    }

    #[test]
    fn linear_costs() {
        let plan = ConditionalPlan::new(vec![act("!a", 3, 1.0), act("!b", 4, 1.0)]);
        assert_eq!(plan_cost(&plan).worst, Cost::from_int(7));
        assert_eq!(plan_cost(&ConditionalPlan::default()).worst, Cost::ZERO);
    }

    #[test]
    fn branching_cost_is_worst_path() {
        // The two paths cost 7 and 9; the worst of them is 9.
        let cost = plan_cost(&branching([7, 9], [0.5, 0.5]));
        assert_eq!(cost.worst, Cost::from_int(9));
        let breakdown: Vec<_> = cost.paths.iter().map(|(_, c)| *c).collect();
        assert_eq!(breakdown, [Cost::from_int(7), Cost::from_int(9)]);
    }

    #[test]
    fn linear_probabilities_multiply() {
        let certain = ConditionalPlan::new(vec![act("!a", 0, 1.0), act("!b", 0, 1.0)]);
        assert_eq!(plan_probability(&certain), [(vec![], 1.0)]);
        let noisy = ConditionalPlan::new(vec![act("!a", 0, 0.9), act("!b", 0, 0.8)]);
        let p = plan_probability(&noisy)[0].1;
        assert!((p - 0.9 * 0.8).abs() < 1e-12);
        assert!((p - 0.72).abs() < 1e-12);
    }

    #[test]
    fn branch_probabilities_pass_through() {
        let probs = plan_probability(&branching([1, 1], [0.1, 0.9]));
        assert_eq!(probs, [(vec![0], 0.1), (vec![1], 0.9)]);
    }

    #[test]
    fn null_branch_keeps_prefix_cost() {
        let mut plan = branching([4, 6], [0.1, 0.9]);
        if let PlanStep::Branch(node) = &mut plan.steps[0] {
            node.branches[1].plan = None;
        }
        let paths = plan.paths();
        assert!(!paths[1].achieved);
        assert_eq!(paths[1].cost, Cost::ZERO);
        assert!((success_probability(&plan) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn structure_check_rejects_bad_probabilities() {
        assert!(branching([1, 1], [0.5, 0.5]).validate_structure().is_ok());
        assert!(branching([1, 1], [0.5, 0.6]).validate_structure().is_err());
    }
}
