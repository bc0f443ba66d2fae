use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::plan::path_label;
use crate::model::{Branch, ConditionalPlan, Cost, Literal, PlanStep};

pub const PLAN_FORMAT: &str = "hqcp-plan";
pub const PLAN_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanFormat {
    Tree,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub path: String,
    pub cost: Cost,
    pub probability: f64,
    pub achieved: bool,
}

/// The JSON plan document. Field names are frozen in `docs/plan-format.md`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub format: String,
    pub version: u32,
    pub worst_case_cost: Cost,
    pub paths: Vec<PathSummary>,
    pub plan: ConditionalPlan,
}

impl PlanDocument {
    pub fn new(plan: &ConditionalPlan) -> Self {
        let paths: Vec<PathSummary> = plan
            .paths()
            .into_iter()
            .map(|p| PathSummary {
                path: path_label(&p.path),
                cost: p.cost,
                probability: p.probability,
                achieved: p.achieved,
            })
            .collect();
        PlanDocument {
            format: PLAN_FORMAT.to_string(),
            version: PLAN_FORMAT_VERSION,
            worst_case_cost: paths.iter().map(|p| p.cost).max().unwrap_or(Cost::ZERO),
            paths,
            plan: plan.clone(),
        }
    }
}

pub fn serialize_plan(plan: &ConditionalPlan, format: PlanFormat) -> String {
    match format {
        PlanFormat::Tree => render_tree(plan),
        PlanFormat::Json => {
            let mut text = serde_json::to_string_pretty(&PlanDocument::new(plan))
                .unwrap_or_else(|e| panic!("plan document is always serializable: {e}"));
            text.push('\n');
            text
        }
    }
}

pub fn parse_plan_json(text: &str) -> Result<ConditionalPlan> {
    let doc: PlanDocument =
        serde_json::from_str(text).map_err(|e| Error::PlanFormat(e.to_string()))?;
    if doc.format != PLAN_FORMAT {
        return Err(Error::PlanFormat(format!(
            "format is `{}`, expected `{PLAN_FORMAT}`",
            doc.format
        )));
    }
    if doc.version != PLAN_FORMAT_VERSION {
        return Err(Error::PlanFormat(format!(
            "unsupported version {}",
            doc.version
        )));
    }
    doc.plan.validate_structure()?;
    Ok(doc.plan)
}

/// Table-style rendering: one `(!name args)` line per action, an
/// `(!Observe ...)` header per branch with its subplan indented beneath, and
/// `NULL` for an empty or unachievable subplan. Method steps are omitted.
pub fn render_tree(plan: &ConditionalPlan) -> String {
    let mut out = String::new();
    write_tree(Some(plan), 0, &mut out);
    out
}

fn write_line(depth: usize, text: &str, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
    out.push_str(text);
    out.push('\n');
}

fn write_tree(plan: Option<&ConditionalPlan>, depth: usize, out: &mut String) {
    let visible = plan.is_some_and(|p| p.steps.iter().any(|s| !matches!(s, PlanStep::Method(_))));
    let Some(plan) = plan.filter(|_| visible) else {
        write_line(depth, "NULL", out);
        return;
    };
    for step in &plan.steps {
        match step {
            PlanStep::Action(a) => write_line(depth, &a.head().to_string(), out),
            PlanStep::Method(_) => {}
            PlanStep::Branch(node) => {
                for branch in &node.branches {
                    write_line(
                        depth,
                        &observe_header(node.sensor.observation.as_ref(), branch),
                        out,
                    );
                    write_tree(branch.plan.as_ref(), depth + 1, out);
                }
            }
        }
    }
}

fn observe_header(template: Option<&Literal>, branch: &Branch) -> String {
    let observed: Vec<&Literal> = branch
        .observation
        .iter()
        .filter(|l| {
            template.is_none_or(|t| {
                l.predicate == t.predicate
                    && l.args.len() >= t.args.len()
                    && l.args[..t.args.len()] == t.args[..]
            })
        })
        .collect();
    match observed.as_slice() {
        [single] => {
            let mut text = String::from("(!Observe ");
            text.push_str(&single.predicate);
            for arg in &single.args {
                text.push(' ');
                text.push_str(arg);
            }
            text.push(')');
            text
        }
        many => {
            let parts: Vec<String> = many.iter().map(|l| l.to_string()).collect();
            format!("(!Observe {})", parts.join(" "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ActionStep, BranchNode, MethodStep, TaskHead};

    fn action(name: &str, args: &[&str]) -> PlanStep {
        PlanStep::Action(ActionStep {
            name: name.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
            cost: Cost::from_int(1),
            prob: 1.0,
            pre: vec![],
            add: vec![],
            del: vec![],
            observation: None,
        })
    }

    fn usable_plan() -> ConditionalPlan {
        let sensor = ActionStep {
            name: "!look".into(),
            args: vec!["a".into()],
            cost: Cost::ZERO,
            prob: 1.0,
            pre: vec![],
            add: vec![],
            del: vec![],
            observation: Some(Literal::new("usable", Vec::<String>::new())),
        };
        ConditionalPlan::new(vec![
            PlanStep::Method(MethodStep {
                name: "m".into(),
                task: TaskHead::new("t", Vec::<String>::new()),
                cost: Cost::ZERO,
                pre: vec![],
            }),
            PlanStep::Branch(BranchNode {
                sensor,
                branches: vec![
                    Branch {
                        observation: vec![Literal::new("usable", ["a"])],
                        probability: 0.9,
                        plan: Some(ConditionalPlan::new(vec![action("!fly", &["a", "b"])])),
                    },
                    Branch {
                        observation: vec![Literal::new("unusable", ["a"])],
                        probability: 0.1,
                        plan: None,
                    },
                ],
            }),
        ])
    }

    #[test]
    fn empty_plan_renders_null() {
        assert_eq!(render_tree(&ConditionalPlan::default()), "NULL\n");
    }

    #[test]
    fn observe_sections() {
        let mut plan = usable_plan();
        if let PlanStep::Branch(node) = &mut plan.steps[1] {
            node.sensor.observation = None;
        }
        let text = render_tree(&plan);
        assert_eq!(
            text,
            "(!Observe usable a)\n  (!fly a b)\n(!Observe unusable a)\n  NULL\n"
        );
        assert_eq!(text.matches("(!Observe").count(), 2);
    }

    #[test]
    fn json_round_trip() {
        let plan = usable_plan();
        let text = serialize_plan(&plan, PlanFormat::Json);
        assert_eq!(parse_plan_json(&text).unwrap(), plan);
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["format"], "hqcp-plan");
        assert_eq!(doc["worst_case_cost"], 1.0);
        assert_eq!(doc["paths"][1]["path"], "1");
    }

    #[test]
    fn rejects_foreign_documents() {
        assert!(parse_plan_json("{}").is_err());
        assert!(parse_plan_json("not json").is_err());
        let text = serialize_plan(&usable_plan(), PlanFormat::Json).replace("hqcp-plan", "other");
        assert!(matches!(parse_plan_json(&text), Err(Error::PlanFormat(_))));
    }
}
