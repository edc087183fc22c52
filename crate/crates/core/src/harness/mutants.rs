//! Deliberately broken backends; the harness must reject each of them.

use crate::logic::{rat, Domain, Instantiation, LinExpr, Literal, Rel, Sort, Term};
use crate::theory::enumeration::EnumTheory;
use crate::theory::fol::{FolTheory, SubstConstraint};
use crate::theory::lra::{LinAtom, LraTheory, PolyConstraint};
use crate::theory::{Closure, ConstraintStream, GroundValidity, Theory, TheoryError};

type Unary<T> = fn(
    &T,
    &<T as Theory>::Constraint,
    &str,
    &Domain,
) -> Result<<T as Theory>::Constraint, TheoryError>;
type Binary<T> = fn(
    &T,
    &<T as Theory>::Constraint,
    &<T as Theory>::Constraint,
    &Domain,
) -> Result<Option<<T as Theory>::Constraint>, TheoryError>;
type Witness<T> =
    fn(&T, &<T as Theory>::Constraint, &Instantiation, &Domain) -> Result<Term, TheoryError>;

/// A backend with some operations replaced.
pub struct Mutant<T: Theory> {
    pub name: &'static str,
    pub inner: T,
    pub project: Option<Unary<T>>,
    pub lift: Option<Unary<T>>,
    pub meet: Option<Binary<T>>,
    pub witness: Option<Witness<T>>,
    /// Leaf streams ignore their input and behave as if pulled with top.
    pub deaf: bool,
}

impl<T: Theory> Mutant<T> {
    fn plain(name: &'static str, inner: T) -> Mutant<T> {
        Mutant {
            name,
            inner,
            project: None,
            lift: None,
            meet: None,
            witness: None,
            deaf: false,
        }
    }
}

struct Deaf<'a, C> {
    inner: Box<dyn ConstraintStream<C> + 'a>,
    top: C,
}

impl<C> ConstraintStream<C> for Deaf<'_, C> {
    fn pull(&mut self, _input: &C) -> Result<Option<Closure<C>>, TheoryError> {
        self.inner.pull(&self.top)
    }
}

impl<T: Theory> Theory for Mutant<T> {
    type Constraint = T::Constraint;

    fn name(&self) -> &'static str {
        self.name
    }
    fn top(&self, d: &Domain) -> T::Constraint {
        self.inner.top(d)
    }
    fn project(
        &self,
        s: &T::Constraint,
        meta: &str,
        d: &Domain,
    ) -> Result<T::Constraint, TheoryError> {
        match self.project {
            Some(f) => f(&self.inner, s, meta, d),
            None => self.inner.project(s, meta, d),
        }
    }
    fn lift(
        &self,
        s: &T::Constraint,
        meta: &str,
        d: &Domain,
    ) -> Result<T::Constraint, TheoryError> {
        match self.lift {
            Some(f) => f(&self.inner, s, meta, d),
            None => self.inner.lift(s, meta, d),
        }
    }
    fn meet(
        &self,
        a: &T::Constraint,
        b: &T::Constraint,
        d: &Domain,
    ) -> Result<Option<T::Constraint>, TheoryError> {
        match self.meet {
            Some(f) => f(&self.inner, a, b, d),
            None => self.inner.meet(a, b, d),
        }
    }
    fn satisfiable(&self, s: &T::Constraint, d: &Domain) -> Result<bool, TheoryError> {
        self.inner.satisfiable(s, d)
    }
    fn consistency<'a>(
        &'a self,
        lits: &[Literal],
        d: &Domain,
    ) -> Box<dyn ConstraintStream<T::Constraint> + 'a> {
        let inner = self.inner.consistency(lits, d);
        if self.deaf {
            Box::new(Deaf {
                inner,
                top: self.inner.top(d),
            })
        } else {
            inner
        }
    }
    fn compatible(
        &self,
        rho: &Instantiation,
        s: &T::Constraint,
        d: &Domain,
    ) -> Result<bool, TheoryError> {
        self.inner.compatible(rho, s, d)
    }
    fn witness(
        &self,
        s: &T::Constraint,
        rho: &Instantiation,
        d: &Domain,
    ) -> Result<Term, TheoryError> {
        match self.witness {
            Some(f) => f(&self.inner, s, rho, d),
            None => self.inner.witness(s, rho, d),
        }
    }
    fn ground_validity(&self) -> &dyn GroundValidity {
        self.inner.ground_validity()
    }
    fn shrink(&self, s: &T::Constraint) -> Vec<T::Constraint> {
        self.inner.shrink(s)
    }
    fn complete_streams(&self) -> bool {
        self.inner.complete_streams()
    }
}

/// Projection drops some other binding and keeps the projected one.
pub fn fol_wrong_projection(th: FolTheory) -> Mutant<FolTheory> {
    let mut m = Mutant::plain("fol-wrong-projection", th);
    m.project = Some(|_, s, meta, _| {
        let SubstConstraint::Subst(map) = s else {
            return Ok(s.clone());
        };
        let mut map = map.clone();
        if let Some(k) = map.keys().find(|k| &***k != meta).cloned() {
            map.remove(&k);
        }
        Ok(SubstConstraint::Subst(map))
    });
    m
}

pub fn fol_left_meet(th: FolTheory) -> Mutant<FolTheory> {
    let mut m = Mutant::plain("fol-left-meet", th);
    m.meet = Some(|_, a, _, _| Ok(Some(a.clone())));
    m
}

pub fn fol_deaf_stream(th: FolTheory) -> Mutant<FolTheory> {
    let mut m = Mutant::plain("fol-deaf-stream", th);
    m.deaf = true;
    m
}

pub fn lra_true_projection(th: LraTheory) -> Mutant<LraTheory> {
    let mut m = Mutant::plain("lra-true-projection", th);
    m.project = Some(|_, _, _, _| Ok(PolyConstraint::truth()));
    m
}

/// Lift pins the new variable to zero.
pub fn lra_zero_lift(th: LraTheory) -> Mutant<LraTheory> {
    let mut m = Mutant::plain("lra-zero-lift", th);
    m.lift = Some(|th, s, meta, d| {
        let base = th.lift(s, meta, d)?;
        let Some(x) = d.meta(meta) else {
            return Ok(base);
        };
        let pin = PolyConstraint::conj([LinAtom::cmp(
            &LinExpr::var(x.clone()),
            Rel::Eq,
            &LinExpr::zero(),
        )]);
        base.and(&pin, th.caps)
    });
    m
}

/// Witness is one step off: `f(t)` for terms, `t + 1` for numbers.
pub fn enum_wrong_witness(th: EnumTheory) -> Mutant<EnumTheory> {
    let mut m = Mutant::plain("enum-wrong-witness", th);
    m.witness = Some(|th, s, rho, d| {
        let t = th.witness(s, rho, d)?;
        Ok(match t.sort() {
            Sort::Uninterpreted => Term::app("f", vec![t]),
            Sort::Rational => match t.to_lin() {
                Some(l) => l.add(&LinExpr::constant(rat(1))).into_term(),
                None => t,
            },
        })
    });
    m
}
