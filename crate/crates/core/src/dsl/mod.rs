//! The S-expression domain and problem language, and plan serialization.
//! The grammar is described in `docs/dsl.md`.

mod domain;
mod plan;
mod problem;
pub mod sexpr;

pub use domain::{parse_domain, parse_domain_in};
pub use plan::{
    parse_plan_json, render_tree, serialize_plan, PathSummary, PlanDocument, PlanFormat,
};
pub use problem::{parse_problem, parse_problem_in};
pub use sexpr::{parse_sexprs, SExpr, SourceSpan};
