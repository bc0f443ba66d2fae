use std::collections::{BTreeMap, BTreeSet};

use super::sexpr::{parse_sexprs, SExpr, SourceSpan};
use crate::error::{Error, Result};
use crate::model::literal::is_variable;
use crate::model::{
    ActuationOperator, Domain, Literal, Method, Operator, SensingOperator, TaskHead,
};

pub(crate) fn single_form<'a>(
    forms: &'a [SExpr],
    keyword: &str,
    end: SourceSpan,
) -> Result<&'a [SExpr]> {
    let Some(first) = forms.first() else {
        return Err(Error::Parse {
            span: end,
            message: format!("empty input, expected ({keyword} ...)"),
        });
    };
    if let Some(extra) = forms.get(1) {
        return Err(extra.parse_error("unexpected form after the first definition"));
    }
    match first.as_list() {
        Some(items) if first.is_form(keyword) => Ok(&items[1..]),
        _ => Err(first.parse_error(format!("expected ({keyword} ...)"))),
    }
}

/// Position just past the end of `text`, for errors about missing input.
pub(crate) fn end_span(text: &str, file: Option<&str>) -> SourceSpan {
    let line = text.matches('\n').count() + 1;
    let column = text.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    SourceSpan {
        file: file.map(Into::into),
        line,
        column,
        offset: text.len(),
    }
}

pub(crate) fn parse_name(expr: &SExpr, what: &str) -> Result<String> {
    expr.as_symbol()
        .map(str::to_string)
        .ok_or_else(|| expr.parse_error(format!("expected {what} name")))
}

pub(crate) fn parse_term(expr: &SExpr) -> Result<String> {
    expr.as_term()
        .map(str::to_string)
        .ok_or_else(|| expr.parse_error("expected a symbol, variable or number"))
}

/// `(p a ?x)` or `(not (p a ?x))`.
pub(crate) fn parse_literal(expr: &SExpr) -> Result<Literal> {
    let items = expr
        .as_list()
        .ok_or_else(|| expr.parse_error("expected a literal `(predicate args...)`"))?;
    let Some(head) = items.first() else {
        return Err(expr.parse_error("empty literal"));
    };
    if head.as_symbol() == Some("not") {
        if items.len() != 2 {
            return Err(expr.parse_error("`not` takes exactly one literal"));
        }
        let inner = parse_literal(&items[1])?;
        if !inner.positive {
            return Err(items[1].parse_error("double negation"));
        }
        return Ok(inner.negated());
    }
    let predicate = parse_name(head, "predicate")?;
    if is_variable(&predicate) {
        return Err(head.parse_error("predicate cannot be a variable"));
    }
    let args = items[1..]
        .iter()
        .map(parse_term)
        .collect::<Result<Vec<_>>>()?;
    Ok(Literal::new(predicate, args))
}

pub(crate) fn parse_literals(expr: &SExpr) -> Result<Vec<Literal>> {
    let items = expr
        .as_list()
        .ok_or_else(|| expr.parse_error("expected a list of literals"))?;
    items.iter().map(parse_literal).collect()
}

pub(crate) fn parse_head(expr: &SExpr) -> Result<TaskHead> {
    let items = expr
        .as_list()
        .ok_or_else(|| expr.parse_error("expected a task `(name args...)`"))?;
    let Some(head) = items.first() else {
        return Err(expr.parse_error("empty task"));
    };
    let name = parse_name(head, "task")?;
    let args = items[1..]
        .iter()
        .map(parse_term)
        .collect::<Result<Vec<_>>>()?;
    Ok(TaskHead::new(name, args))
}

pub(crate) fn parse_probability(expr: &SExpr) -> Result<f64> {
    let text = expr
        .as_number()
        .ok_or_else(|| expr.parse_error("expected a probability"))?;
    let p: f64 = text
        .parse()
        .map_err(|_| expr.parse_error(format!("bad number `{text}`")))?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(expr.error(format!("probability {text} outside (0, 1]")));
    }
    Ok(p)
}

fn parse_params(expr: &SExpr) -> Result<Vec<String>> {
    let items = expr
        .as_list()
        .ok_or_else(|| expr.parse_error("expected a parameter list"))?;
    let mut params = Vec::new();
    for item in items {
        let name = parse_term(item)?;
        if !is_variable(&name) {
            return Err(item.error(format!("parameter `{name}` must be a variable")));
        }
        if params.contains(&name) {
            return Err(item.error(format!("duplicate parameter `{name}`")));
        }
        params.push(name);
    }
    Ok(params)
}

/// Variables bound by parameters and positive preconditions.
fn bound_variables<'a>(params: &'a [String], pre: &'a [Literal]) -> BTreeSet<&'a str> {
    params
        .iter()
        .map(String::as_str)
        .chain(
            pre.iter()
                .filter(|l| l.positive)
                .flat_map(Literal::variables),
        )
        .collect()
}

fn check_bound<'a, I: IntoIterator<Item = &'a str>>(
    vars: I,
    bound: &BTreeSet<&str>,
    at: &SExpr,
) -> Result<()> {
    for var in vars {
        if !bound.contains(var) {
            return Err(at.error(format!("unbound variable `{var}`")));
        }
    }
    Ok(())
}

#[derive(Default)]
struct Clauses {
    add: Option<Vec<Literal>>,
    del: Option<Vec<Literal>>,
    observe: Option<(Literal, SExpr)>,
    subtasks: Option<Vec<(TaskHead, SExpr)>>,
    prob: Option<f64>,
}

fn parse_clauses(items: &[SExpr]) -> Result<Clauses> {
    let mut out = Clauses::default();
    let mut i = 0;
    while i < items.len() {
        let item = &items[i];
        if item.as_symbol() == Some(":prob") {
            let value = items
                .get(i + 1)
                .ok_or_else(|| item.parse_error("`:prob` needs a value"))?;
            if out.prob.replace(parse_probability(value)?).is_some() {
                return Err(item.error("duplicate `:prob`"));
            }
            i += 2;
            continue;
        }
        let list = item
            .as_list()
            .ok_or_else(|| item.parse_error(format!("unexpected `{item}`")))?;
        let keyword = list.first().and_then(SExpr::as_symbol).unwrap_or("");
        let body = list.get(1..).unwrap_or(&[]);
        let duplicate = || item.error(format!("duplicate `{keyword}` clause"));
        match keyword {
            ":add" => {
                let lits = body.iter().map(parse_literal).collect::<Result<Vec<_>>>()?;
                if out.add.replace(lits).is_some() {
                    return Err(duplicate());
                }
            }
            ":delete" => {
                let lits = body.iter().map(parse_literal).collect::<Result<Vec<_>>>()?;
                if out.del.replace(lits).is_some() {
                    return Err(duplicate());
                }
            }
            ":observe" => {
                if body.len() != 1 {
                    return Err(item.parse_error("`:observe` takes exactly one template"));
                }
                if out
                    .observe
                    .replace((parse_literal(&body[0])?, body[0].clone()))
                    .is_some()
                {
                    return Err(duplicate());
                }
            }
            ":subtasks" => {
                let heads = body
                    .iter()
                    .map(|e| parse_head(e).map(|h| (h, e.clone())))
                    .collect::<Result<Vec<_>>>()?;
                if out.subtasks.replace(heads).is_some() {
                    return Err(duplicate());
                }
            }
            ":prob" => {
                if body.len() != 1 {
                    return Err(item.parse_error("`(:prob p)` takes one value"));
                }
                if out.prob.replace(parse_probability(&body[0])?).is_some() {
                    return Err(item.error("duplicate `:prob`"));
                }
            }
            _ => return Err(item.parse_error(format!("unknown clause `{item}`"))),
        }
        i += 1;
    }
    Ok(out)
}

fn parse_operator(form: &SExpr, items: &[SExpr], declared_sensing: bool) -> Result<Operator> {
    if items.len() < 4 {
        return Err(form.parse_error("expected (:operator !name (params) (pre) clauses...)"));
    }
    let name = parse_name(&items[1], "operator")?;
    if !name.starts_with('!') {
        return Err(items[1].error(format!("operator name `{name}` must start with `!`")));
    }
    let params = parse_params(&items[2])?;
    let pre = parse_literals(&items[3])?;
    let clauses = parse_clauses(&items[4..])?;
    let bound = bound_variables(&params, &pre);
    check_bound(
        pre.iter()
            .filter(|l| !l.positive)
            .flat_map(Literal::variables),
        &bound,
        &items[3],
    )?;
    let prob = clauses.prob.unwrap_or(1.0);

    if let Some((observe, at)) = clauses.observe {
        if clauses.add.is_some() || clauses.del.is_some() || clauses.subtasks.is_some() {
            return Err(form.error("a sensing operator has no effects or subtasks"));
        }
        if !observe.positive {
            return Err(at.error("observation template must be positive"));
        }
        check_bound(observe.variables(), &bound, &at)?;
        return Ok(Operator::Sensing(SensingOperator {
            name,
            params,
            pre,
            observe,
            prob,
        }));
    }
    if declared_sensing {
        return Err(form.error("sensing operator needs an `(:observe ...)` clause"));
    }
    if clauses.subtasks.is_some() {
        return Err(form.error("operators have no subtasks"));
    }
    let add = clauses.add.unwrap_or_default();
    let del = clauses.del.unwrap_or_default();
    for lit in add.iter().chain(&del) {
        if !lit.positive {
            return Err(form.error(format!("effect {lit} must be positive")));
        }
        check_bound(lit.variables(), &bound, form)?;
    }
    if let Some(both) = add.iter().find(|l| del.contains(l)) {
        return Err(form.error(format!("{both} is both added and deleted")));
    }
    Ok(Operator::Actuation(ActuationOperator {
        name,
        params,
        pre,
        add,
        del,
        prob,
    }))
}

fn parse_method(form: &SExpr, items: &[SExpr]) -> Result<(Method, Vec<SExpr>)> {
    if items.len() < 4 {
        return Err(form.parse_error("expected (:method label (task args) (pre) (:subtasks ...))"));
    }
    let name = parse_name(&items[1], "method")?;
    let task = parse_head(&items[2])?;
    if task.is_primitive() {
        return Err(items[2].error(format!("method task `{}` cannot be primitive", task.name)));
    }
    let pre = parse_literals(&items[3])?;
    let clauses = parse_clauses(&items[4..])?;
    if clauses.add.is_some()
        || clauses.del.is_some()
        || clauses.observe.is_some()
        || clauses.prob.is_some()
    {
        return Err(form.error("methods take only a `(:subtasks ...)` clause"));
    }
    let subtasks = clauses.subtasks.unwrap_or_default();
    if subtasks.is_empty() {
        return Err(form.error(format!("method `{name}` has no subtasks")));
    }
    let task_vars: Vec<String> = task
        .args
        .iter()
        .filter(|a| is_variable(a))
        .cloned()
        .collect();
    let bound = bound_variables(&task_vars, &pre);
    check_bound(
        pre.iter()
            .filter(|l| !l.positive)
            .flat_map(Literal::variables),
        &bound,
        &items[3],
    )?;
    for (head, at) in &subtasks {
        check_bound(
            head.args
                .iter()
                .map(String::as_str)
                .filter(|a| is_variable(a)),
            &bound,
            at,
        )?;
    }
    let spans = subtasks.iter().map(|(_, at)| at.clone()).collect();
    Ok((
        Method {
            name,
            task,
            pre,
            subtasks: subtasks.into_iter().map(|(h, _)| h).collect(),
        },
        spans,
    ))
}

/// Parses `(defdomain name (item...))`.
pub fn parse_domain(text: &str) -> Result<Domain> {
    parse_domain_in(text, None)
}

/// Like [`parse_domain`], naming `file` in diagnostics.
pub fn parse_domain_in(text: &str, file: Option<&str>) -> Result<Domain> {
    let forms = parse_sexprs(text, file)?;
    let body = single_form(&forms, "defdomain", end_span(text, file))?;
    let Some(name_expr) = body.first() else {
        return Err(forms[0].parse_error("missing domain name"));
    };
    let name = parse_name(name_expr, "domain")?;
    let rest = &body[1..];
    let items: &[SExpr] = match rest {
        [single]
            if single
                .as_list()
                .is_some_and(|l| l.iter().all(|e| e.as_list().is_some())) =>
        {
            single.as_list().unwrap_or_default()
        }
        _ => rest,
    };

    let mut domain = Domain {
        name,
        operators: Vec::new(),
        methods: Vec::new(),
    };
    let mut seen: BTreeMap<String, SourceSpan> = BTreeMap::new();
    let mut subtask_spans = Vec::new();
    let mut task_arity: BTreeMap<String, usize> = BTreeMap::new();
    for item in items {
        let list = item
            .as_list()
            .ok_or_else(|| item.parse_error("expected a domain item"))?;
        let keyword = list.first().and_then(SExpr::as_symbol).unwrap_or("");
        let label_expr = list.get(1).unwrap_or(item);
        match keyword {
            ":operator" | ":sensing" => {
                let op = parse_operator(item, list, keyword == ":sensing")?;
                if let Some(prev) = seen.insert(op.name().to_string(), item.span.clone()) {
                    return Err(label_expr.error(format!(
                        "duplicate name `{}` (first defined at {prev})",
                        op.name()
                    )));
                }
                domain.operators.push(op);
            }
            ":method" => {
                let (method, spans) = parse_method(item, list)?;
                if let Some(prev) = seen.insert(method.name.clone(), item.span.clone()) {
                    return Err(label_expr.error(format!(
                        "duplicate name `{}` (first defined at {prev})",
                        method.name
                    )));
                }
                let arity = *task_arity
                    .entry(method.task.name.clone())
                    .or_insert(method.task.args.len());
                if arity != method.task.args.len() {
                    return Err(list[2].error(format!(
                        "task `{}` used with {} and {} arguments",
                        method.task.name,
                        arity,
                        method.task.args.len()
                    )));
                }
                subtask_spans.push(spans);
                domain.methods.push(method);
            }
            _ => return Err(item.parse_error(format!("unknown domain item `{keyword}`"))),
        }
    }

    for (method, spans) in domain.methods.iter().zip(&subtask_spans) {
        for (head, at) in method.subtasks.iter().zip(spans) {
            match domain.task_signature(&head.name) {
                None => {
                    return Err(Error::UnknownTask {
                        span: at.span.clone(),
                        name: head.name.clone(),
                    })
                }
                Some((_, arity)) if arity != head.args.len() => {
                    return Err(at.error(format!("task `{}` expects {arity} arguments", head.name)));
                }
                Some(_) => {}
            }
        }
    }
    Ok(domain)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = "
        (defdomain tiny (
          (:operator !go (?from ?to) ((at ?from) (not (blocked ?to)))
             (:add (at ?to)) (:delete (at ?from)) :prob 0.9)
          (:sensing !look (?x) ((at ?x)) (:observe (door ?x)))
          (:method travel (move ?to) ((at ?from)) (:subtasks (!go ?from ?to)))))";

    #[test]
    fn parses_operators_and_methods() {
        let d = parse_domain(TINY).unwrap();
        assert_eq!(d.name, "tiny");
        assert_eq!(d.operators.len(), 2);
        assert!(d.operators[1].is_sensing());
        assert_eq!(d.operators[0].prob(), 0.9);
        assert_eq!(d.operators[1].prob(), 1.0);
        assert_eq!(d.methods[0].subtasks[0].to_string(), "(!go ?from ?to)");
    }

    #[test]
    fn empty_input_is_a_parse_error() {
        assert!(matches!(parse_domain(""), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_domain("  ; only a comment\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn probability_out_of_range() {
        let text = "(defdomain d ((:operator !a () () :prob 1.3)))";
        let err = parse_domain(text).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }), "{err}");
    }

    #[test]
    fn unbound_effect_variable() {
        let text = "(defdomain d ((:operator !a (?x) () (:add (p ?y)))))";
        let err = parse_domain(text).unwrap_err();
        assert!(err.to_string().contains("unbound variable `?y`"), "{err}");
    }

    #[test]
    fn duplicate_names() {
        let text = "(defdomain d ((:operator !a () ()) (:operator !a () ())))";
        assert!(parse_domain(text)
            .unwrap_err()
            .to_string()
            .contains("duplicate name"));
    }

    #[test]
    fn unknown_subtask() {
        let text = "(defdomain d ((:method m (t) () (:subtasks (!nope)))))";
        assert!(matches!(parse_domain(text), Err(Error::UnknownTask { .. })));
    }

    #[test]
    fn identical_add_and_delete_rejected() {
        let text = "(defdomain d ((:operator !a (?x) () (:add (p ?x)) (:delete (p ?x)))))";
        assert!(parse_domain(text).is_err());
    }

    #[test]
    fn method_without_subtasks_rejected() {
        let text = "(defdomain d ((:method m (t) () (:subtasks))))";
        assert!(parse_domain(text).is_err());
    }
}
