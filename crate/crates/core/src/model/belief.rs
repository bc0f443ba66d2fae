use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::domain::CostTable;
use super::literal::Literal;
use crate::error::{Error, Result};

pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// One possible nondeterministic fragment of the world and its probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub fragment: BTreeSet<Literal>,
    pub probability: f64,
}

/// A probability distribution over mutually exclusive state fragments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    alternatives: Vec<Alternative>,
}

impl BeliefState {
    pub fn new(alternatives: Vec<Alternative>) -> Result<Self> {
        if alternatives.is_empty() {
            return Err(Error::Invalid("belief state: no alternatives".into()));
        }
        for alt in &alternatives {
            if !(alt.probability > 0.0 && alt.probability <= 1.0) {
                return Err(Error::Invalid(format!(
                    "belief state: probability {} outside (0, 1]",
                    alt.probability
                )));
            }
            if alt.fragment.is_empty() {
                return Err(Error::Invalid("belief state: empty fragment".into()));
            }
            if let Some(bad) = alt.fragment.iter().find(|l| !l.positive || !l.is_ground()) {
                return Err(Error::Invalid(format!(
                    "belief state: fragment literal {bad} must be positive and ground"
                )));
            }
        }
        for (i, a) in alternatives.iter().enumerate() {
            if alternatives[..i].iter().any(|b| b.fragment == a.fragment) {
                return Err(Error::Invalid("belief state: duplicate fragment".into()));
            }
        }
        let sum: f64 = alternatives.iter().map(|a| a.probability).sum();
        if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::InvalidDistribution { sum });
        }
        Ok(BeliefState { alternatives })
    }

    pub fn alternatives(&self) -> &[Alternative] {
        &self.alternatives
    }

    /// Does the ground observation `(p c1..ck)` address this belief? Every
    /// alternative must contain a `p` literal whose arguments start with
    /// `c1..ck`.
    pub fn matches(&self, observation: &Literal) -> bool {
        self.alternatives.iter().all(|alt| {
            alt.fragment.iter().any(|l| {
                l.predicate == observation.predicate
                    && l.args.len() >= observation.args.len()
                    && l.args[..observation.args.len()] == observation.args[..]
            })
        })
    }

    /// The longest observation template every alternative shares, used to
    /// reject beliefs that no observation could tell apart.
    pub fn signatures(&self) -> BTreeSet<Literal> {
        let mut common: Option<BTreeSet<Literal>> = None;
        for alt in &self.alternatives {
            let mut prefixes = BTreeSet::new();
            for lit in &alt.fragment {
                for k in 0..=lit.args.len() {
                    prefixes.insert(Literal::new(
                        lit.predicate.clone(),
                        lit.args[..k].iter().cloned(),
                    ));
                }
            }
            common = Some(match common {
                None => prefixes,
                Some(c) => c.intersection(&prefixes).cloned().collect(),
            });
        }
        common.unwrap_or_default()
    }
}

/// Expected cost of a belief state: Σᵢ pᵢ · Σ_{l ∈ fragmentᵢ} Δ(l).
pub fn belief_cost(belief: &BeliefState, delta: &CostTable) -> f64 {
    belief
        .alternatives
        .iter()
        .map(|alt| alt.probability * delta.sum(alt.fragment.iter()).to_f64())
        .sum()
}

/// Index of the single belief among `pending` addressed by `observation`.
pub fn matching_belief(
    beliefs: &[BeliefState],
    pending: &[usize],
    observation: &Literal,
) -> Result<usize> {
    let mut found = pending
        .iter()
        .copied()
        .filter(|&b| beliefs[b].matches(observation));
    match (found.next(), found.next()) {
        (None, _) => Err(Error::NoMatchingBelief(observation.to_string())),
        (Some(b), None) => Ok(b),
        (Some(_), Some(_)) => Err(Error::AmbiguousBelief(observation.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Cost;

    fn alt(lits: &[Literal], p: f64) -> Alternative {
        Alternative {
            fragment: lits.iter().cloned().collect(),
            probability: p,
        }
    }

    fn supplier(status: &str) -> Literal {
        Literal::new("supplier", ["b", status])
    }

    #[test]
    fn rejects_bad_sums() {
        let err = BeliefState::new(vec![
            alt(&[supplier("occupied")], 0.5),
            alt(&[supplier("unoccupied")], 0.6),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::InvalidDistribution { .. }));
    }

    #[test]
    fn rejects_duplicate_fragments() {
        let err = BeliefState::new(vec![alt(&[supplier("x")], 0.5), alt(&[supplier("x")], 0.5)])
            .unwrap_err();
        assert!(matches!(err, Error::Invalid(_)));
    }

    #[test]
    fn supplier_example_costs_130() {
        // Solving 0.1·x + 0.9·100 = 130 gives x = 400 for the occupied literal.
        let occupied = (130.0 - 0.9 * 100.0) / 0.1;
        assert!((occupied - 400.0_f64).abs() < 1e-9);

        let belief = BeliefState::new(vec![
            alt(&[supplier("occupied")], 0.1),
            alt(&[supplier("unoccupied")], 0.9),
        ])
        .unwrap();
        let mut delta = CostTable::default();
        delta.set(supplier("unoccupied"), Cost::from_int(100));
        delta.set(supplier("occupied"), Cost::from_f64(occupied).unwrap());
        assert!((belief_cost(&belief, &delta) - 130.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_and_uniform_beliefs() {
        let frag = Literal::new("frag", Vec::<String>::new());
        let mut delta = CostTable::default();
        delta.set(frag.clone(), Cost::from_int(42));
        let single = BeliefState::new(vec![alt(&[frag], 1.0)]).unwrap();
        assert_eq!(belief_cost(&single, &delta), 42.0);

        let (l1, l2) = (Literal::new("a", ["1"]), Literal::new("a", ["2"]));
        delta.set(l1.clone(), Cost::from_int(10));
        delta.set(l2.clone(), Cost::from_int(30));
        let even = BeliefState::new(vec![alt(&[l1], 0.5), alt(&[l2], 0.5)]).unwrap();
        assert_eq!(belief_cost(&even, &delta), 0.5 * 10.0 + 0.5 * 30.0);
    }

    #[test]
    fn observation_matching_uses_argument_prefix() {
        let belief = BeliefState::new(vec![
            alt(&[supplier("occupied")], 0.1),
            alt(&[supplier("unoccupied")], 0.9),
        ])
        .unwrap();
        assert!(belief.matches(&Literal::new("supplier", ["b"])));
        assert!(belief.matches(&Literal::new("supplier", Vec::<String>::new())));
        assert!(!belief.matches(&Literal::new("supplier", ["a"])));
        assert!(!belief.matches(&Literal::new("supplier", ["b", "occupied"])));
        assert!(belief
            .signatures()
            .contains(&Literal::new("supplier", ["b"])));
    }
}
