use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variables are symbols with a leading `?`.
pub fn is_variable(symbol: &str) -> bool {
    symbol.starts_with('?')
}

fn is_true(b: &bool) -> bool {
    *b
}

fn default_true() -> bool {
    true
}

/// A possibly negated atom `(predicate arg...)`.
///
/// Ordering is (predicate, args, polarity), which fixes the canonical
/// serialization order of every literal set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub predicate: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub positive: bool,
}

impl Literal {
    pub fn new<P, I, S>(predicate: P, args: I) -> Self
    where
        P: Into<String>,
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Literal {
            predicate: predicate.into(),
            args: args.into_iter().map(Into::into).collect(),
            positive: true,
        }
    }

    pub fn negated(mut self) -> Self {
        self.positive = !self.positive;
        self
    }

    /// The positive literal over the same atom.
    pub fn atom(&self) -> Literal {
        Literal {
            predicate: self.predicate.clone(),
            args: self.args.clone(),
            positive: true,
        }
    }

    pub fn is_ground(&self) -> bool {
        !self.args.iter().any(|a| is_variable(a))
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args
            .iter()
            .map(String::as_str)
            .filter(|a| is_variable(a))
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            f.write_str("(not ")?;
        }
        write!(f, "({}", self.predicate)?;
        for arg in &self.args {
            write!(f, " {arg}")?;
        }
        f.write_str(")")?;
        if !self.positive {
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// A task or action head `(name arg...)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskHead {
    pub name: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl TaskHead {
    pub fn new<N, I, S>(name: N, args: I) -> Self
    where
        N: Into<String>,
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        TaskHead {
            name: name.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    pub fn is_ground(&self) -> bool {
        !self.args.iter().any(|a| is_variable(a))
    }

    pub fn is_primitive(&self) -> bool {
        self.name.starts_with('!')
    }
}

impl fmt::Display for TaskHead {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for arg in &self.args {
            write!(f, " {arg}")?;
        }
        f.write_str(")")
    }
}

/// Variable bindings produced while grounding an operator or method.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Substitution {
    bindings: BTreeMap<String, String>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, var: &str) -> Option<&str> {
        self.bindings.get(var).map(String::as_str)
    }

    /// Binds `var` to `value`; false if it is already bound elsewhere.
    pub fn bind(&mut self, var: &str, value: &str) -> bool {
        match self.bindings.get(var) {
            Some(existing) => existing == value,
            None => {
                self.bindings.insert(var.to_string(), value.to_string());
                true
            }
        }
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    /// Replaces bound variables; unbound variables and constants pass through.
    pub fn apply_term(&self, term: &str) -> String {
        if is_variable(term) {
            self.bindings
                .get(term)
                .cloned()
                .unwrap_or_else(|| term.to_string())
        } else {
            term.to_string()
        }
    }

    pub fn apply(&self, literal: &Literal) -> Literal {
        Literal {
            predicate: literal.predicate.clone(),
            args: literal.args.iter().map(|a| self.apply_term(a)).collect(),
            positive: literal.positive,
        }
    }

    pub fn apply_head(&self, head: &TaskHead) -> TaskHead {
        TaskHead {
            name: head.name.clone(),
            args: head.args.iter().map(|a| self.apply_term(a)).collect(),
        }
    }

    /// Like [`Substitution::apply`] but fails on any variable left free.
    pub fn ground(&self, literal: &Literal) -> Result<Literal> {
        let grounded = self.apply(literal);
        let free = grounded.variables().next().map(str::to_string);
        match free {
            Some(var) => Err(Error::UnboundVariable(var)),
            None => Ok(grounded),
        }
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for Substitution {
    fn from_iter<T: IntoIterator<Item = (K, V)>>(iter: T) -> Self {
        Substitution {
            bindings: iter
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }
}

/// A deterministic world state: the set of true ground atoms. Anything
/// absent is false.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct State {
    atoms: BTreeSet<Literal>,
}

impl State {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_atoms<I: IntoIterator<Item = Literal>>(atoms: I) -> Result<Self> {
        let mut state = State::new();
        for atom in atoms {
            state.insert(atom)?;
        }
        Ok(state)
    }

    pub fn insert(&mut self, atom: Literal) -> Result<bool> {
        if !atom.positive || !atom.is_ground() {
            return Err(Error::Invalid(format!(
                "state atom {atom}: must be positive and ground"
            )));
        }
        Ok(self.atoms.insert(atom))
    }

    pub fn remove(&mut self, atom: &Literal) -> bool {
        self.atoms.remove(&atom.atom())
    }

    pub fn contains(&self, atom: &Literal) -> bool {
        if atom.positive {
            self.atoms.contains(atom)
        } else {
            self.atoms.contains(&atom.atom())
        }
    }

    /// Closed-world truth of a ground literal.
    pub fn holds(&self, literal: &Literal) -> bool {
        let present = self.contains(literal);
        if literal.positive {
            present
        } else {
            !present
        }
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Literal> {
        self.atoms.iter()
    }

    /// Atoms of the given predicate, in canonical order.
    pub fn with_predicate<'a>(
        &'a self,
        predicate: &'a str,
    ) -> impl Iterator<Item = &'a Literal> + 'a {
        let start = Literal {
            predicate: predicate.to_string(),
            args: Vec::new(),
            positive: false,
        };
        self.atoms
            .range(start..)
            .take_while(move |a| a.predicate == predicate)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `self ∪ fragment`, used when an observation reveals a belief alternative.
    pub fn extended<'a, I: IntoIterator<Item = &'a Literal>>(&self, fragment: I) -> State {
        let mut next = self.clone();
        for atom in fragment {
            next.atoms.insert(atom.atom());
        }
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_is_predicate_then_args() {
        let mut set = BTreeSet::new();
        set.insert(Literal::new("b", ["x"]));
        set.insert(Literal::new("a", ["z"]));
        set.insert(Literal::new("a", ["y", "z"]));
        set.insert(Literal::new("a", ["y"]));
        let rendered: Vec<_> = set.iter().map(ToString::to_string).collect();
        assert_eq!(rendered, ["(a y)", "(a y z)", "(a z)", "(b x)"]);
    }

    #[test]
    fn negative_literal_holds_when_atom_absent() {
        let state = State::from_atoms([Literal::new("usable", ["a"])]).unwrap();
        assert!(state.holds(&Literal::new("usable", ["a"])));
        assert!(!state.holds(&Literal::new("usable", ["a"]).negated()));
        assert!(state.holds(&Literal::new("usable", ["b"]).negated()));
    }

    #[test]
    fn state_rejects_non_ground_or_negative_atoms() {
        assert!(State::from_atoms([Literal::new("p", ["?x"])]).is_err());
        assert!(State::from_atoms([Literal::new("p", ["a"]).negated()]).is_err());
    }

    #[test]
    fn substitution_is_idempotent_on_ground_terms() {
        let sigma: Substitution = [("?x", "a")].into_iter().collect();
        let lit = Literal::new("p", ["?x", "b"]);
        let once = sigma.apply(&lit);
        assert_eq!(sigma.apply(&once), once);
        assert_eq!(once.to_string(), "(p a b)");
    }

    #[test]
    fn ground_reports_free_variable() {
        let sigma = Substitution::new();
        let err = sigma.ground(&Literal::new("p", ["?y"])).unwrap_err();
        assert_eq!(err, Error::UnboundVariable("?y".into()));
    }

    #[test]
    fn predicate_range_scan() {
        let state = State::from_atoms([
            Literal::new("a", ["1"]),
            Literal::new("b", ["1"]),
            Literal::new("b", ["2"]),
            Literal::new("c", ["1"]),
        ])
        .unwrap();
        assert_eq!(state.with_predicate("b").count(), 2);
        assert_eq!(state.with_predicate("z").count(), 0);
    }
}
