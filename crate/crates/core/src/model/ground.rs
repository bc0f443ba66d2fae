use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::cost::Cost;
use super::domain::{action_cost, method_cost, CostTable, Domain, Method, Operator};
use super::literal::{is_variable, Literal, State, Substitution, TaskHead};
use crate::error::Result;

/// True iff every positive literal of σ(pre) is in `s` and no negative one is.
pub fn applicable(pre: &[Literal], sigma: &Substitution, state: &State) -> Result<bool> {
    for literal in pre {
        if !state.holds(&sigma.ground(literal)?) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn unify_args(pattern: &[String], ground: &[String], sigma: &mut Substitution) -> bool {
    if pattern.len() != ground.len() {
        return false;
    }
    for (p, g) in pattern.iter().zip(ground) {
        if is_variable(p) {
            if !sigma.bind(p, g) {
                return false;
            }
        } else if p != g {
            return false;
        }
    }
    true
}

/// Every extension of `sigma` under which `state ⊨ pre`, in canonical order.
///
/// Positive literals are matched against the state depth-first; negative
/// literals are then checked closed-world and must be fully bound by then.
pub fn groundings(
    pre: &[Literal],
    sigma: &Substitution,
    state: &State,
) -> Result<Vec<Substitution>> {
    let distinct: BTreeSet<&Literal> = pre.iter().collect();
    let positives: Vec<&Literal> = distinct.iter().copied().filter(|l| l.positive).collect();
    let negatives: Vec<&Literal> = distinct.iter().copied().filter(|l| !l.positive).collect();

    let mut partial = Vec::new();
    match_positive(&positives, sigma.clone(), state, &mut partial);

    let mut out = BTreeSet::new();
    for sigma in partial {
        let mut ok = true;
        for literal in &negatives {
            if state.contains(&sigma.ground(literal)?) {
                ok = false;
                break;
            }
        }
        if ok {
            out.insert(sigma);
        }
    }
    Ok(out.into_iter().collect())
}

fn match_positive(
    literals: &[&Literal],
    sigma: Substitution,
    state: &State,
    out: &mut Vec<Substitution>,
) {
    let Some((first, rest)) = literals.split_first() else {
        out.push(sigma);
        return;
    };
    let pattern = sigma.apply(first);
    if pattern.is_ground() {
        if state.contains(&pattern) {
            match_positive(rest, sigma, state, out);
        }
        return;
    }
    for atom in state.with_predicate(&pattern.predicate) {
        let mut extended = sigma.clone();
        if unify_args(&pattern.args, &atom.args, &mut extended) {
            match_positive(rest, extended, state, out);
        }
    }
}

/// Values bound to variables outside `fixed`, in variable order; separates
/// groundings that share a head.
fn extra_bindings(sigma: &Substitution, pre: &[Literal], fixed: &[String]) -> Vec<String> {
    let vars: BTreeSet<&str> = pre
        .iter()
        .flat_map(Literal::variables)
        .filter(|v| !fixed.iter().any(|f| f == v))
        .collect();
    vars.into_iter()
        .filter_map(|v| sigma.get(v).map(str::to_string))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    pub key: Vec<String>,
    pub pre: Vec<Literal>,
    pub add: Vec<Literal>,
    pub del: Vec<Literal>,
    pub prob: f64,
    pub cost: Cost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundSensing {
    pub name: String,
    pub args: Vec<String>,
    pub key: Vec<String>,
    pub pre: Vec<Literal>,
    pub observation: Literal,
    pub prob: f64,
    pub cost: Cost,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundMethod {
    pub name: String,
    pub task: TaskHead,
    pub key: Vec<String>,
    pub pre: Vec<Literal>,
    pub subtasks: Vec<TaskHead>,
    pub cost: Cost,
}

/// One way to accomplish a task at the current state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Instantiation {
    Action(GroundAction),
    Sensing(GroundSensing),
    Method(GroundMethod),
}

impl Instantiation {
    pub fn cost(&self) -> Cost {
        match self {
            Instantiation::Action(a) => a.cost,
            Instantiation::Sensing(s) => s.cost,
            Instantiation::Method(m) => m.cost,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Instantiation::Action(a) => &a.name,
            Instantiation::Sensing(s) => &s.name,
            Instantiation::Method(m) => &m.name,
        }
    }

    pub fn key(&self) -> &[String] {
        match self {
            Instantiation::Action(a) => &a.key,
            Instantiation::Sensing(s) => &s.key,
            Instantiation::Method(m) => &m.key,
        }
    }

    /// Tie-break order after cost: (name, args and extra bindings).
    pub fn order_key(&self) -> (&str, &[String]) {
        (self.name(), self.key())
    }
}

/// All applicable ground instantiations of `head` at `state`, cheapest
/// first, ties broken lexicographically.
pub fn candidates(
    domain: &Domain,
    head: &TaskHead,
    state: &State,
    delta: &CostTable,
) -> Result<Vec<Instantiation>> {
    let mut out = Vec::new();
    if let Some(op) = domain.operator(&head.name) {
        let mut sigma0 = Substitution::new();
        if !unify_args(op.params(), &head.args, &mut sigma0) {
            return Ok(out);
        }
        for sigma in groundings(op.pre(), &sigma0, state)? {
            out.push(ground_operator(op, head, &sigma, delta)?);
        }
    } else {
        for method in domain.methods_for(&head.name) {
            let mut sigma0 = Substitution::new();
            if !unify_args(&method.task.args, &head.args, &mut sigma0) {
                continue;
            }
            for sigma in groundings(&method.pre, &sigma0, state)? {
                out.push(Instantiation::Method(ground_method(
                    method, head, &sigma, delta,
                )?));
            }
        }
    }
    out.sort_by(|a, b| {
        a.cost()
            .cmp(&b.cost())
            .then_with(|| a.order_key().cmp(&b.order_key()))
    });
    Ok(out)
}

fn ground_set(literals: &[Literal], sigma: &Substitution) -> Result<Vec<Literal>> {
    let set: BTreeSet<Literal> = literals
        .iter()
        .map(|l| sigma.ground(l))
        .collect::<Result<_>>()?;
    Ok(set.into_iter().collect())
}

fn ground_operator(
    op: &Operator,
    head: &TaskHead,
    sigma: &Substitution,
    delta: &CostTable,
) -> Result<Instantiation> {
    let pre = ground_set(op.pre(), sigma)?;
    let key = {
        let mut key = head.args.clone();
        key.extend(extra_bindings(sigma, op.pre(), op.params()));
        key
    };
    let cost = action_cost(&pre, delta);
    Ok(match op {
        Operator::Actuation(a) => {
            let add = ground_set(&a.add, sigma)?;
            // Where a ground add and delete coincide the atom ends up true,
            // as (s − del) ∪ add prescribes; dropping it from del keeps the
            // two sets disjoint.
            let del = ground_set(&a.del, sigma)?
                .into_iter()
                .filter(|l| !add.contains(l))
                .collect();
            Instantiation::Action(GroundAction {
                name: a.name.clone(),
                args: head.args.clone(),
                key,
                pre,
                add,
                del,
                prob: a.prob,
                cost,
            })
        }
        Operator::Sensing(s) => Instantiation::Sensing(GroundSensing {
            name: s.name.clone(),
            args: head.args.clone(),
            key,
            pre,
            observation: sigma.ground(&s.observe)?,
            prob: s.prob,
            cost,
        }),
    })
}

fn ground_method(
    method: &Method,
    head: &TaskHead,
    sigma: &Substitution,
    delta: &CostTable,
) -> Result<GroundMethod> {
    let pre = ground_set(&method.pre, sigma)?;
    let mut subtasks = Vec::with_capacity(method.subtasks.len());
    for sub in &method.subtasks {
        let ground = sigma.apply_head(sub);
        if let Some(var) = ground.args.iter().find(|a| is_variable(a)) {
            return Err(crate::error::Error::UnboundVariable(var.clone()));
        }
        subtasks.push(ground);
    }
    let mut key = head.args.clone();
    key.extend(extra_bindings(sigma, &method.pre, &method.task.args));
    Ok(GroundMethod {
        name: method.name.clone(),
        task: head.clone(),
        key,
        cost: method_cost(&pre, delta),
        pre,
        subtasks,
    })
}

/// (s \ del(a)) ∪ add(a); the input state is left untouched.
pub fn apply_effects(action: &GroundAction, state: &State) -> State {
    let mut next = state.clone();
    for atom in &action.del {
        next.remove(atom);
    }
    next.extended(&action.add)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::domain::ActuationOperator;

    fn state(atoms: &[Literal]) -> State {
        State::from_atoms(atoms.iter().cloned()).unwrap()
    }

    fn action(add: &[Literal], del: &[Literal]) -> GroundAction {
        GroundAction {
            name: "!a".into(),
            args: vec![],
            key: vec![],
            pre: vec![],
            add: add.to_vec(),
            del: del.to_vec(),
            prob: 1.0,
            cost: Cost::ZERO,
        }
    }

    #[test]
    fn applicable_examples() {
        let s = state(&[Literal::new("usable", ["a"])]);
        let pre = [Literal::new("usable", ["?x"])];
        let to_a: Substitution = [("?x", "a")].into_iter().collect();
        let to_b: Substitution = [("?x", "b")].into_iter().collect();
        assert!(applicable(&pre, &to_a, &s).unwrap());
        assert!(!applicable(&pre, &to_b, &s).unwrap());

        let supplier = Literal::new("supplier", ["b", "unoccupied"]);
        let s = state(std::slice::from_ref(&supplier));
        assert!(applicable(&[supplier], &Substitution::new(), &s).unwrap());
    }

    #[test]
    fn applicable_requires_full_binding() {
        let err = applicable(
            &[Literal::new("usable", ["?x"])],
            &Substitution::new(),
            &State::new(),
        )
        .unwrap_err();
        assert!(matches!(err, crate::error::Error::UnboundVariable(_)));
    }

    #[test]
    fn apply_effects_examples() {
        let at_a = Literal::new("at", ["a"]);
        let at_b = Literal::new("at", ["b"]);
        let s = state(std::slice::from_ref(&at_a));
        let next = apply_effects(&action(std::slice::from_ref(&at_b), std::slice::from_ref(&at_a)), &s);
        assert_eq!(next, state(&[at_b]));
        assert_eq!(s, state(&[at_a]));

        let p = state(&[Literal::new("p", Vec::<String>::new())]);
        assert_eq!(apply_effects(&action(&[], &[]), &p), p);

        let infected = Literal::new("infected", ["d1"]);
        let healthy = Literal::new("healthy", Vec::<String>::new());
        let cured = apply_effects(
            &action(std::slice::from_ref(&healthy), std::slice::from_ref(&infected)),
            &state(&[infected]),
        );
        assert_eq!(cured, state(&[healthy]));
    }

    #[test]
    fn groundings_bind_extra_variables_and_check_negatives() {
        let s = state(&[
            Literal::new("edge", ["a", "b"]),
            Literal::new("edge", ["a", "c"]),
            Literal::new("blocked", ["c"]),
        ]);
        let pre = [
            Literal::new("edge", ["?x", "?y"]),
            Literal::new("blocked", ["?y"]).negated(),
        ];
        let sigma: Substitution = [("?x", "a")].into_iter().collect();
        let found = groundings(&pre, &sigma, &s).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].get("?y"), Some("b"));
    }

    #[test]
    fn candidates_sorted_by_cost_then_name() {
        let op = |name: &str, pre: Vec<Literal>| {
            Operator::Actuation(ActuationOperator {
                name: name.into(),
                params: vec![],
                pre,
                add: vec![],
                del: vec![],
                prob: 1.0,
            })
        };
        let domain = Domain {
            name: "d".into(),
            operators: vec![op("!go", vec![Literal::new("p", ["?x"])])],
            methods: vec![],
        };
        let s = state(&[
            Literal::new("p", ["1"]),
            Literal::new("p", ["2"]),
            Literal::new("p", ["3"]),
        ]);
        let mut delta = CostTable::default();
        delta.set(Literal::new("p", ["1"]), Cost::from_int(7));
        delta.set(Literal::new("p", ["2"]), Cost::from_int(2));
        let found = candidates(
            &domain,
            &TaskHead::new("!go", Vec::<String>::new()),
            &s,
            &delta,
        )
        .unwrap();
        let keys: Vec<_> = found.iter().map(|c| (c.cost(), c.key().to_vec())).collect();
        assert_eq!(
            keys,
            [
                (Cost::ZERO, vec!["3".to_string()]),
                (Cost::from_int(2), vec!["2".to_string()]),
                (Cost::from_int(7), vec!["1".to_string()]),
            ]
        );
    }

    #[test]
    fn coinciding_effects_leave_atom_true() {
        let domain = Domain {
            name: "d".into(),
            operators: vec![Operator::Actuation(ActuationOperator {
                name: "!set".into(),
                params: vec!["?m".into()],
                pre: vec![Literal::new("mode", ["?old"])],
                add: vec![Literal::new("mode", ["?m"])],
                del: vec![Literal::new("mode", ["?old"])],
                prob: 1.0,
            })],
            methods: vec![],
        };
        let s = state(&[Literal::new("mode", ["fly"])]);
        let found = candidates(
            &domain,
            &TaskHead::new("!set", ["fly"]),
            &s,
            &CostTable::default(),
        )
        .unwrap();
        let Instantiation::Action(a) = &found[0] else {
            panic!()
        };
        assert!(a.del.is_empty());
        assert_eq!(apply_effects(a, &s), s);
    }
}
