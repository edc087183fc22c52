//! The constraint-structure contract and its backends.

pub mod enumeration;
pub mod fol;
pub mod lra;

use std::fmt;

use thiserror::Error;

use crate::logic::{Atom, Domain, Instantiation, Literal, LogicError, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TheoryError {
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Logic(#[from] LogicError),
}

/// One element of a leaf stream: the literals that justify the closure and
/// the output constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct Closure<C> {
    pub used: Vec<Literal>,
    pub out: C,
}

pub trait ConstraintStream<C> {
    /// Next closure under `input`, or `None` once exhausted.
    fn pull(&mut self, input: &C) -> Result<Option<Closure<C>>, TheoryError>;
}

/// Decides validity of a disjunction of ground literals.
pub trait GroundValidity {
    fn ground_valid(&self, lits: &[Literal]) -> Result<bool, TheoryError>;
}

/// Default predicate: the set contains some `l` and `¬l`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ComplementaryPair;

impl GroundValidity for ComplementaryPair {
    fn ground_valid(&self, lits: &[Literal]) -> Result<bool, TheoryError> {
        require_ground(lits)?;
        Ok(lits
            .iter()
            .any(|l| l.positive && lits.contains(&l.negate())))
    }
}

pub fn require_ground(lits: &[Literal]) -> Result<(), TheoryError> {
    match lits.iter().find(|l| l.has_meta()) {
        Some(l) => Err(TheoryError::Precondition(format!(
            "literal {} is not ground",
            l
        ))),
        None => Ok(()),
    }
}

/// Satisfiability predicate used by search and the harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PMode {
    #[default]
    Satisfiability,
    AlwaysTrue,
}

/// A constraint structure with the search-facing operations and the
/// test-only hooks `compatible`, `witness` and `shrink`.
///
/// `project(σ, X, d)` takes the domain in which `X` is the newest meta-variable;
/// `lift(σ, X, d)` takes the domain after `X` was added.
pub trait Theory {
    type Constraint: Clone + fmt::Debug + fmt::Display + PartialEq + serde::Serialize;

    fn name(&self) -> &'static str;
    fn top(&self, d: &Domain) -> Self::Constraint;
    fn project(
        &self,
        sigma: &Self::Constraint,
        meta: &str,
        d: &Domain,
    ) -> Result<Self::Constraint, TheoryError>;
    fn lift(
        &self,
        sigma: &Self::Constraint,
        meta: &str,
        d: &Domain,
    ) -> Result<Self::Constraint, TheoryError>;
    /// `Ok(None)` is the explicit unsatisfiable result.
    fn meet(
        &self,
        a: &Self::Constraint,
        b: &Self::Constraint,
        d: &Domain,
    ) -> Result<Option<Self::Constraint>, TheoryError>;
    /// Some instantiation of `d` is compatible with `sigma`.
    fn satisfiable(&self, sigma: &Self::Constraint, d: &Domain) -> Result<bool, TheoryError>;
    fn consistency<'a>(
        &'a self,
        lits: &[Literal],
        d: &Domain,
    ) -> Box<dyn ConstraintStream<Self::Constraint> + 'a>;
    fn compatible(
        &self,
        rho: &Instantiation,
        sigma: &Self::Constraint,
        d: &Domain,
    ) -> Result<bool, TheoryError>;
    fn witness(
        &self,
        sigma: &Self::Constraint,
        rho: &Instantiation,
        d: &Domain,
    ) -> Result<Term, TheoryError>;
    fn ground_validity(&self) -> &dyn GroundValidity;
    /// Constraints with one atom or binding removed; used to shrink counterexamples.
    fn shrink(&self, sigma: &Self::Constraint) -> Vec<Self::Constraint>;

    /// Exhausted leaf streams are conclusive (no enumeration bound was involved).
    fn complete_streams(&self) -> bool {
        true
    }

    fn p(&self, mode: PMode, sigma: &Self::Constraint, d: &Domain) -> Result<bool, TheoryError> {
        match mode {
            PMode::AlwaysTrue => Ok(true),
            PMode::Satisfiability => self.satisfiable(sigma, d),
        }
    }
}

/// Unordered dual pairs `(i, j)`, `i < j`, of uninterpreted literals in list order.
pub(crate) fn dual_pairs(lits: &[Literal]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..lits.len() {
        for j in i + 1..lits.len() {
            if let (Atom::Pred(p, a), Atom::Pred(q, b)) = (&lits[i].atom, &lits[j].atom) {
                if p == q && a.len() == b.len() && lits[i].positive != lits[j].positive {
                    out.push((i, j));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complementary_pair_predicate() {
        let pa = Literal::pred("p", vec![Term::constant("a")]);
        assert!(ComplementaryPair
            .ground_valid(&[pa.clone(), pa.negate()])
            .unwrap());
        assert!(!ComplementaryPair.ground_valid(&[pa.clone()]).unwrap());
        let pb = Literal::pred("p", vec![Term::constant("b")]);
        assert!(!ComplementaryPair.ground_valid(&[pa, pb.negate()]).unwrap());
    }

    #[test]
    fn dual_pairs_follow_context_order() {
        let x = Term::Var(crate::logic::Var::meta(
            "X",
            crate::logic::Sort::Uninterpreted,
        ));
        let lits = vec![
            Literal::pred("p", vec![x]),
            Literal::pred("p", vec![Term::constant("a")]).negate(),
            Literal::pred("q", vec![]),
            Literal::pred("p", vec![Term::constant("b")]).negate(),
        ];
        assert_eq!(dual_pairs(&lits), vec![(0, 1), (0, 3)]);
    }
}
