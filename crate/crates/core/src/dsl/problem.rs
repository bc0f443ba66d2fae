use std::collections::BTreeSet;
use std::sync::Arc;

use super::domain::{
    end_span, parse_head, parse_literal, parse_name, parse_probability, single_form,
};
use super::sexpr::{parse_sexprs, SExpr};
use crate::error::{Error, Result};
use crate::model::literal::is_variable;
use crate::model::{
    Alternative, BeliefState, Cost, CostTable, Domain, Literal, Operator, Problem, State, TaskHead,
};

fn ground_literal(expr: &SExpr) -> Result<Literal> {
    let lit = parse_literal(expr)?;
    if let Some(var) = lit.variables().next() {
        return Err(expr.error(format!("variable `{var}` in a ground literal")));
    }
    Ok(lit)
}

fn parse_cost(expr: &SExpr) -> Result<Cost> {
    let text = expr
        .as_number()
        .ok_or_else(|| expr.parse_error("expected a cost"))?;
    text.parse::<Cost>().map_err(|e| {
        expr.error(format!(
            "{e}: costs are non-negative decimals with at most 6 fractional digits"
        ))
    })
}

/// `(fragment probability)` where the fragment is one literal or a list
/// of literals.
fn parse_alternative(expr: &SExpr) -> Result<Alternative> {
    let items = expr
        .as_list()
        .filter(|items| items.len() == 2)
        .ok_or_else(|| expr.parse_error("expected `(fragment probability)`"))?;
    let frag = &items[0];
    let first_is_list = frag
        .as_list()
        .and_then(|l| l.first())
        .is_some_and(|e| e.as_list().is_some());
    let exprs: Vec<&SExpr> = if first_is_list {
        frag.as_list().unwrap_or_default().iter().collect()
    } else {
        vec![frag]
    };
    let mut fragment = BTreeSet::new();
    for expr in exprs {
        let lit = ground_literal(expr)?;
        if !lit.positive {
            return Err(expr.error("belief fragments hold positive atoms only"));
        }
        fragment.insert(lit);
    }
    Ok(Alternative {
        fragment,
        probability: parse_probability(&items[1])?,
    })
}

/// Parses `(defproblem name domain (:state ...) (:belief ...) (:tasks ...)
/// (:cost ...) (:default-cost v))` against an already parsed domain.
pub fn parse_problem(text: &str, domain: Arc<Domain>) -> Result<Problem> {
    parse_problem_in(text, domain, None)
}

pub fn parse_problem_in(text: &str, domain: Arc<Domain>, file: Option<&str>) -> Result<Problem> {
    let forms = parse_sexprs(text, file)?;
    let body = single_form(&forms, "defproblem", end_span(text, file))?;
    let top = &forms[0];
    if body.len() < 2 {
        return Err(top.parse_error("expected (defproblem name domain clauses...)"));
    }
    let name = parse_name(&body[0], "problem")?;
    let domain_name = parse_name(&body[1], "domain")?;
    if domain_name != domain.name {
        return Err(body[1].error(format!(
            "problem is for domain `{domain_name}`, not `{}`",
            domain.name
        )));
    }

    let mut state = State::new();
    let mut beliefs: Vec<(BeliefState, &SExpr)> = Vec::new();
    let mut tasks: Vec<(TaskHead, &SExpr)> = Vec::new();
    let mut entries: Vec<(Literal, Cost, &SExpr)> = Vec::new();
    let mut default = None;
    let mut seen = BTreeSet::new();

    for clause in &body[2..] {
        let items = clause
            .as_list()
            .ok_or_else(|| clause.parse_error("expected a problem clause"))?;
        let keyword = items.first().and_then(SExpr::as_symbol).unwrap_or("");
        let args = items.get(1..).unwrap_or(&[]);
        if keyword != ":belief" && !seen.insert(keyword.to_string()) {
            return Err(clause.error(format!("duplicate `{keyword}` clause")));
        }
        match keyword {
            ":state" => {
                for expr in args {
                    let lit = ground_literal(expr)?;
                    if !lit.positive {
                        return Err(expr.error("the initial state holds positive atoms only"));
                    }
                    state.insert(lit).map_err(|e| expr.error(e.to_string()))?;
                }
            }
            ":belief" => {
                let alternatives = args
                    .iter()
                    .map(parse_alternative)
                    .collect::<Result<Vec<_>>>()?;
                let belief =
                    BeliefState::new(alternatives).map_err(|e| clause.error(e.to_string()))?;
                beliefs.push((belief, clause));
            }
            ":tasks" => {
                for expr in args {
                    tasks.push((parse_head(expr)?, expr));
                }
            }
            ":cost" => {
                for entry in args {
                    let pair = entry
                        .as_list()
                        .filter(|p| p.len() == 2)
                        .ok_or_else(|| entry.parse_error("expected `(literal cost)`"))?;
                    entries.push((ground_literal(&pair[0])?, parse_cost(&pair[1])?, entry));
                }
            }
            ":default-cost" => {
                if args.len() != 1 {
                    return Err(clause.parse_error("`(:default-cost v)` takes one value"));
                }
                default = Some(parse_cost(&args[0])?);
            }
            _ => return Err(clause.parse_error(format!("unknown problem clause `{keyword}`"))),
        }
    }

    for (head, at) in &tasks {
        if let Some(var) = head.args.iter().find(|a| is_variable(a)) {
            return Err(at.error(format!("variable `{var}` in an initial task")));
        }
        match domain.task_signature(&head.name) {
            None => {
                return Err(Error::UnknownTask {
                    span: at.span.clone(),
                    name: head.name.clone(),
                })
            }
            Some((_, arity)) if arity != head.args.len() => {
                return Err(at.error(format!("task `{}` expects {arity} arguments", head.name)))
            }
            Some(_) => {}
        }
    }

    for (belief, at) in &beliefs {
        for alt in belief.alternatives() {
            if let Some(lit) = alt.fragment.iter().find(|l| state.contains(l)) {
                return Err(at.error(format!("{lit} is already in the initial state")));
            }
        }
    }
    check_belief_separation(&domain, &beliefs)?;

    let mut costs = CostTable::new(default.unwrap_or(Cost::ZERO));
    let mut costed = BTreeSet::new();
    for (lit, cost, at) in entries {
        if !costed.insert(lit.clone()) {
            return Err(at.error(format!("duplicate cost entry for {lit}")));
        }
        costs.set(lit, cost);
    }

    Problem::new(
        name,
        domain,
        state,
        beliefs.into_iter().map(|(b, _)| b).collect(),
        tasks.into_iter().map(|(h, _)| h).collect(),
        costs,
    )
    .map_err(|e| top.error(e.to_string()))
}

fn template_matches(template: &Literal, ground: &Literal) -> bool {
    if template.predicate != ground.predicate || template.args.len() != ground.args.len() {
        return false;
    }
    let mut sigma = crate::model::Substitution::new();
    template.args.iter().zip(&ground.args).all(|(t, g)| {
        if is_variable(t) {
            sigma.bind(t, g)
        } else {
            t == g
        }
    })
}

/// Rejects pairs of beliefs that one grounding of some sensing template
/// would observe together.
fn check_belief_separation(domain: &Domain, beliefs: &[(BeliefState, &SExpr)]) -> Result<()> {
    let signatures: Vec<BTreeSet<Literal>> = beliefs.iter().map(|(b, _)| b.signatures()).collect();
    for op in &domain.operators {
        let Operator::Sensing(sensing) = op else {
            continue;
        };
        for i in 0..beliefs.len() {
            for j in i + 1..beliefs.len() {
                let shared = signatures[i].intersection(&signatures[j]);
                if let Some(obs) = shared
                    .into_iter()
                    .find(|g| template_matches(&sensing.observe, g))
                {
                    return Err(beliefs[j].1.error(format!(
                        "`{}` cannot tell this belief from an earlier one: both match observation {obs}",
                        sensing.name
                    )));
                }
            }
        }
    }
    Ok(())
}
