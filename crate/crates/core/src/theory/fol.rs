//! Syntactic unification with occurs check and eigenvariable dependencies.
//!
//! A binding's range may mention a meta-variable that has since been projected
//! away; such a variable reads as an existentially chosen ground term.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};

use super::{
    dual_pairs, Closure, ComplementaryPair, ConstraintStream, GroundValidity, Theory, TheoryError,
};
use crate::logic::{
    enumerate_ground_terms, Atom, Domain, Instantiation, Literal, Name, Rat, Signature, Sort, Term,
    Var, VarKind,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SubstConstraint {
    Bot,
    Subst(BTreeMap<Name, Term>),
}

impl SubstConstraint {
    pub fn identity() -> SubstConstraint {
        SubstConstraint::Subst(BTreeMap::new())
    }

    pub fn from_pairs(pairs: &[(&str, Term)]) -> SubstConstraint {
        SubstConstraint::Subst(
            pairs
                .iter()
                .map(|(k, t)| (crate::logic::name(k), t.clone()))
                .collect(),
        )
    }

    pub fn bindings(&self) -> Option<&BTreeMap<Name, Term>> {
        match self {
            SubstConstraint::Bot => None,
            SubstConstraint::Subst(m) => Some(m),
        }
    }

    pub fn apply(&self, t: &Term) -> Term {
        match self {
            SubstConstraint::Bot => t.clone(),
            SubstConstraint::Subst(m) => resolve(t, m),
        }
    }

    pub fn apply_literal(&self, l: &Literal) -> Literal {
        match self {
            SubstConstraint::Bot => l.clone(),
            SubstConstraint::Subst(m) => l.map_vars(&mut |v| lookup(v, m).map(|t| resolve(&t, m))),
        }
    }
}

impl fmt::Display for SubstConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubstConstraint::Bot => write!(f, "BOT"),
            SubstConstraint::Subst(m) => {
                let parts: Vec<String> = m.iter().map(|(k, t)| format!("{} -> {}", k, t)).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
        }
    }
}

impl Serialize for SubstConstraint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

fn lookup(v: &Var, s: &BTreeMap<Name, Term>) -> Option<Term> {
    if v.kind == VarKind::Meta {
        s.get(&v.name).cloned()
    } else {
        None
    }
}

fn walk(t: &Term, s: &BTreeMap<Name, Term>) -> Term {
    let mut cur = t.clone();
    while let Term::Var(v) = &cur {
        match lookup(v, s) {
            Some(next) => cur = next,
            None => break,
        }
    }
    cur
}

fn resolve(t: &Term, s: &BTreeMap<Name, Term>) -> Term {
    t.map_vars(&mut |v| lookup(v, s).map(|u| resolve(&u, s)))
}

/// Robinson unification; returns a triangular substitution over every
/// meta-variable involved. Two meta-variables are oriented so that the later
/// declared one (or one outside `rank`) is bound.
fn unify_raw(
    pairs: Vec<(Term, Term)>,
    rank: &dyn Fn(&str) -> usize,
) -> Option<BTreeMap<Name, Term>> {
    let mut s: BTreeMap<Name, Term> = BTreeMap::new();
    let mut work: Vec<(Term, Term)> = pairs.into_iter().rev().collect();
    while let Some((a, b)) = work.pop() {
        let a = walk(&a, &s);
        let b = walk(&b, &s);
        if a == b {
            continue;
        }
        let (var, val) = match (&a, &b) {
            (Term::Var(x), Term::Var(y)) if x.kind == VarKind::Meta && y.kind == VarKind::Meta => {
                if rank(&x.name) >= rank(&y.name) {
                    (x.clone(), b.clone())
                } else {
                    (y.clone(), a.clone())
                }
            }
            (Term::Var(x), _) if x.kind == VarKind::Meta => (x.clone(), b.clone()),
            (_, Term::Var(y)) if y.kind == VarKind::Meta => (y.clone(), a.clone()),
            (Term::App(f, xs), Term::App(g, ys)) if f == g && xs.len() == ys.len() => {
                for (x, y) in xs.iter().zip(ys.iter()).rev() {
                    work.push((x.clone(), y.clone()));
                }
                continue;
            }
            _ => return None,
        };
        if var.sort != val.sort() || resolve(&val, &s).mentions(&var.name) {
            return None;
        }
        s.insert(var.name.clone(), val);
    }
    Some(s)
}

fn domain_rank(d: &Domain) -> impl Fn(&str) -> usize + '_ {
    move |n: &str| d.meta_rank(n).unwrap_or(usize::MAX)
}

/// Idempotent form restricted to `d`'s meta-variables, with the dependency check.
fn finish(s: &BTreeMap<Name, Term>, d: &Domain) -> Option<BTreeMap<Name, Term>> {
    let mut out = BTreeMap::new();
    for k in s.keys() {
        if d.meta(k).is_none() {
            continue;
        }
        let t = resolve(&Term::Var(Var::meta(k, d.meta(k).unwrap().sort)), s);
        for v in t.vars() {
            if v.kind == VarKind::Eigen && !d.is_authorised(k, &v.name) {
                return None;
            }
        }
        out.insert(k.clone(), t);
    }
    Some(out)
}

pub fn mgu(pairs: &[(Term, Term)], d: &Domain) -> SubstConstraint {
    match unify_raw(pairs.to_vec(), &domain_rank(d)).and_then(|s| finish(&s, d)) {
        Some(m) => SubstConstraint::Subst(m),
        None => SubstConstraint::Bot,
    }
}

fn binding_pairs(m: &BTreeMap<Name, Term>, d: &Domain) -> Vec<(Term, Term)> {
    m.iter()
        .map(|(k, t)| {
            let sort = d.meta(k).map(|v| v.sort).unwrap_or_else(|| t.sort());
            (Term::Var(Var::meta(k, sort)), t.clone())
        })
        .collect()
}

pub fn subst_meet(a: &SubstConstraint, b: &SubstConstraint, d: &Domain) -> SubstConstraint {
    match (a, b) {
        (SubstConstraint::Subst(x), SubstConstraint::Subst(y)) => {
            let mut pairs = binding_pairs(x, d);
            pairs.extend(binding_pairs(y, d));
            mgu(&pairs, d)
        }
        _ => SubstConstraint::Bot,
    }
}

#[derive(Clone, Debug)]
pub struct FolTheory {
    pub signature: Signature,
}

impl FolTheory {
    pub fn new(signature: Signature) -> FolTheory {
        FolTheory { signature }
    }

    fn default_term(&self, d: &Domain, meta: &str, sort: Sort) -> Result<Term, TheoryError> {
        if sort == Sort::Rational {
            return Ok(Term::Num(Rat::from_integer(0.into())));
        }
        for depth in 0..3 {
            if let Some(t) = enumerate_ground_terms(&self.signature, d, meta, depth, &[])?
                .into_iter()
                .next()
            {
                return Ok(t);
            }
        }
        Err(TheoryError::Unsupported(format!(
            "no ground term available for {}",
            meta
        )))
    }
}

struct FolStream<'a> {
    theory: &'a FolTheory,
    lits: Vec<Literal>,
    pairs: Vec<(usize, usize)>,
    next: usize,
    d: Domain,
}

impl ConstraintStream<SubstConstraint> for FolStream<'_> {
    fn pull(
        &mut self,
        input: &SubstConstraint,
    ) -> Result<Option<Closure<SubstConstraint>>, TheoryError> {
        while self.next < self.pairs.len() {
            let (i, j) = self.pairs[self.next];
            self.next += 1;
            let (Atom::Pred(_, a), Atom::Pred(_, b)) = (&self.lits[i].atom, &self.lits[j].atom)
            else {
                continue;
            };
            let pairs: Vec<(Term, Term)> = a.iter().cloned().zip(b.iter().cloned()).collect();
            let produced = mgu(&pairs, &self.d);
            if let Some(out) = self.theory.meet(input, &produced, &self.d)? {
                return Ok(Some(Closure {
                    used: vec![self.lits[i].clone(), self.lits[j].clone()],
                    out,
                }));
            }
        }
        Ok(None)
    }
}

impl Theory for FolTheory {
    type Constraint = SubstConstraint;

    fn name(&self) -> &'static str {
        "fol"
    }

    fn top(&self, _d: &Domain) -> SubstConstraint {
        SubstConstraint::identity()
    }

    fn project(
        &self,
        sigma: &SubstConstraint,
        meta: &str,
        d: &Domain,
    ) -> Result<SubstConstraint, TheoryError> {
        if d.last_meta().map(|v| &*v.name) != Some(meta) {
            return Err(TheoryError::Precondition(format!(
                "{} is not the newest meta-variable of {}",
                meta, d
            )));
        }
        Ok(match sigma {
            SubstConstraint::Bot => SubstConstraint::Bot,
            SubstConstraint::Subst(m) => {
                let mut m = m.clone();
                m.remove(meta);
                SubstConstraint::Subst(m)
            }
        })
    }

    /// Bindings may still mention an earlier, projected `meta`; those
    /// occurrences are renamed apart before `meta` becomes a fresh unknown.
    fn lift(
        &self,
        sigma: &SubstConstraint,
        meta: &str,
        d: &Domain,
    ) -> Result<SubstConstraint, TheoryError> {
        let SubstConstraint::Subst(m) = sigma else {
            return Ok(SubstConstraint::Bot);
        };
        if !m.values().any(|t| t.mentions(meta)) && !m.contains_key(meta) {
            return Ok(sigma.clone());
        }
        let used: BTreeSet<Name> = m
            .values()
            .flat_map(|t| t.vars())
            .map(|v| v.name)
            .chain(m.keys().cloned())
            .collect();
        let fresh = (1..)
            .map(|k| crate::logic::name(&format!("{}'{}", meta, k)))
            .find(|n| !used.contains(n) && !d.contains(n))
            .expect("unbounded supply of names");
        let rename = |t: &Term| {
            t.map_vars(&mut |v| {
                (v.kind == VarKind::Meta && &*v.name == meta)
                    .then(|| Term::Var(v.with_kind(VarKind::Meta, fresh.clone())))
            })
        };
        Ok(SubstConstraint::Subst(
            m.iter()
                .map(|(k, t)| {
                    (
                        if &**k == meta {
                            fresh.clone()
                        } else {
                            k.clone()
                        },
                        rename(t),
                    )
                })
                .collect(),
        ))
    }

    fn meet(
        &self,
        a: &SubstConstraint,
        b: &SubstConstraint,
        d: &Domain,
    ) -> Result<Option<SubstConstraint>, TheoryError> {
        Ok(match subst_meet(a, b, d) {
            SubstConstraint::Bot => None,
            s => Some(s),
        })
    }

    fn satisfiable(&self, sigma: &SubstConstraint, _d: &Domain) -> Result<bool, TheoryError> {
        Ok(!matches!(sigma, SubstConstraint::Bot))
    }

    fn consistency<'a>(
        &'a self,
        lits: &[Literal],
        d: &Domain,
    ) -> Box<dyn ConstraintStream<SubstConstraint> + 'a> {
        Box::new(FolStream {
            theory: self,
            lits: lits.to_vec(),
            pairs: dual_pairs(lits),
            next: 0,
            d: d.clone(),
        })
    }

    fn compatible(
        &self,
        rho: &Instantiation,
        sigma: &SubstConstraint,
        _d: &Domain,
    ) -> Result<bool, TheoryError> {
        let SubstConstraint::Subst(m) = sigma else {
            return Ok(false);
        };
        let mut pairs = Vec::new();
        for (k, t) in m {
            let Some(lhs) = rho.get(k) else { continue };
            let rhs = t.map_vars(&mut |v| {
                if v.kind == VarKind::Meta {
                    rho.get(&v.name).cloned()
                } else {
                    None
                }
            });
            pairs.push((lhs.clone(), rhs));
        }
        Ok(unify_raw(pairs, &|_| usize::MAX).is_some())
    }

    fn witness(
        &self,
        sigma: &SubstConstraint,
        rho: &Instantiation,
        d: &Domain,
    ) -> Result<Term, TheoryError> {
        let x = d
            .last_meta()
            .ok_or_else(|| TheoryError::Precondition("witness needs a meta-variable".into()))?
            .clone();
        let SubstConstraint::Subst(m) = sigma else {
            return Err(TheoryError::Precondition("witness of BOT".into()));
        };
        let subst_rho = |t: &Term| {
            t.map_vars(&mut |v| {
                if v.kind == VarKind::Meta && v.name != x.name {
                    rho.get(&v.name).cloned()
                } else {
                    None
                }
            })
        };
        let mut pairs = Vec::new();
        for (k, t) in m {
            if *k == x.name {
                continue;
            }
            let lhs = rho
                .get(k)
                .ok_or_else(|| TheoryError::Precondition(format!("{} is not instantiated", k)))?;
            pairs.push((lhs.clone(), subst_rho(t)));
        }
        let theta = unify_raw(pairs, &|n: &str| if n == &*x.name { 0 } else { usize::MAX })
            .ok_or_else(|| {
                TheoryError::Precondition(format!(
                    "instantiation {} is not compatible with the projection of {}",
                    rho, sigma
                ))
            })?;
        let own = match m.get(&x.name) {
            Some(t) => subst_rho(t),
            None => Term::Var(x.clone()),
        };
        let mut value = resolve(&own, &theta);
        if value.has_meta() {
            let mut defaults = BTreeMap::new();
            for v in value.vars().into_iter().filter(|v| v.kind == VarKind::Meta) {
                defaults.insert(v.name.clone(), self.default_term(d, &x.name, v.sort)?);
            }
            value = value.map_vars(&mut |v| defaults.get(&v.name).cloned());
        }
        for v in value.vars() {
            if v.kind == VarKind::Eigen && !d.is_authorised(&x.name, &v.name) {
                return Err(TheoryError::Precondition(format!(
                    "witness {} escapes the dependencies of {}",
                    value, x.name
                )));
            }
        }
        Ok(value)
    }

    fn ground_validity(&self) -> &dyn GroundValidity {
        &ComplementaryPair
    }

    fn shrink(&self, sigma: &SubstConstraint) -> Vec<SubstConstraint> {
        match sigma {
            SubstConstraint::Bot => Vec::new(),
            SubstConstraint::Subst(m) => m
                .keys()
                .map(|k| {
                    let mut m2 = m.clone();
                    m2.remove(k);
                    SubstConstraint::Subst(m2)
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{name, Instantiation};

    fn u(n: &str) -> Var {
        Var::eigen(n, Sort::Uninterpreted)
    }
    fn meta(n: &str) -> Term {
        Term::Var(Var::meta(n, Sort::Uninterpreted))
    }
    fn a() -> Term {
        Term::constant("a")
    }
    fn b() -> Term {
        Term::constant("b")
    }
    fn f(t: Term) -> Term {
        Term::app("f", vec![t])
    }
    fn dom(metas: &[&str]) -> Domain {
        let mut d = Domain::initial([u("c0")]).unwrap();
        for m in metas {
            d = d.add_meta(Var::meta(m, Sort::Uninterpreted)).unwrap();
        }
        d
    }
    fn theory() -> FolTheory {
        FolTheory::new(Signature::with_funs(&[("a", 0), ("b", 0), ("f", 1)]))
    }
    fn rho(pairs: &[(&str, Term)]) -> Instantiation {
        Instantiation::from_map_unchecked(pairs.iter().map(|(k, t)| (name(k), t.clone())).collect())
    }

    #[test]
    fn mgu_of_nested_terms() {
        let d = dom(&["X", "Y"]);
        let lhs = Term::app("p", vec![meta("X"), f(a())]);
        let rhs = Term::app("p", vec![f(meta("Y")), f(meta("Y"))]);
        let s = mgu(&[(lhs.clone(), rhs.clone())], &d);
        assert_eq!(s, SubstConstraint::from_pairs(&[("X", f(a())), ("Y", a())]));
        assert_eq!(s.apply(&lhs), s.apply(&rhs));
    }

    #[test]
    fn mgu_occurs_check() {
        let d = dom(&["X"]);
        assert_eq!(mgu(&[(meta("X"), f(meta("X")))], &d), SubstConstraint::Bot);
    }

    #[test]
    fn mgu_rejects_unauthorised_eigenvariable() {
        let d = dom(&["X"]).add_eigen(u("y")).unwrap();
        assert_eq!(
            mgu(&[(meta("X"), Term::Var(u("y")))], &d),
            SubstConstraint::Bot
        );
        let d2 = d.add_meta(Var::meta("Y", Sort::Uninterpreted)).unwrap();
        assert_eq!(
            mgu(&[(meta("Y"), Term::Var(u("y")))], &d2),
            SubstConstraint::from_pairs(&[("Y", Term::Var(u("y")))])
        );
        // binding through a later meta-variable is caught after composition
        assert_eq!(
            mgu(
                &[(meta("X"), meta("Y")), (meta("Y"), Term::Var(u("y")))],
                &d2
            ),
            SubstConstraint::Bot
        );
    }

    #[test]
    fn meet_examples() {
        let d = dom(&["X", "Y"]);
        let th = theory();
        let s1 = SubstConstraint::from_pairs(&[("X", f(meta("Y")))]);
        let s2 = SubstConstraint::from_pairs(&[("Y", a())]);
        assert_eq!(
            th.meet(&s1, &s2, &d).unwrap(),
            Some(SubstConstraint::from_pairs(&[("X", f(a())), ("Y", a())]))
        );
        let xa = SubstConstraint::from_pairs(&[("X", a())]);
        let xb = SubstConstraint::from_pairs(&[("X", b())]);
        assert_eq!(th.meet(&xa, &xb, &d).unwrap(), None);
        assert_eq!(
            th.meet(&SubstConstraint::identity(), &xa, &d).unwrap(),
            Some(xa)
        );
    }

    #[test]
    fn consistency_enumerates_dual_pairs() {
        let d = dom(&["X"]);
        let th = theory();
        let px = Literal::pred("p", vec![meta("X")]);
        let npa = Literal::pred("p", vec![a()]).negate();
        let npb = Literal::pred("p", vec![b()]).negate();
        let q = Literal::pred("q", vec![]);
        let mut st = th.consistency(&[px.clone(), npa.clone(), q], &d);
        let c = st.pull(&SubstConstraint::identity()).unwrap().unwrap();
        assert_eq!(c.used, vec![px.clone(), npa.clone()]);
        assert_eq!(c.out, SubstConstraint::from_pairs(&[("X", a())]));
        assert!(st.pull(&SubstConstraint::identity()).unwrap().is_none());

        let mut st = th.consistency(&[px.clone(), npa, npb], &d);
        let top = SubstConstraint::identity();
        assert_eq!(
            st.pull(&top).unwrap().unwrap().out,
            SubstConstraint::from_pairs(&[("X", a())])
        );
        assert_eq!(
            st.pull(&top).unwrap().unwrap().out,
            SubstConstraint::from_pairs(&[("X", b())])
        );
        assert!(st.pull(&top).unwrap().is_none());

        let pa = Literal::pred("p", vec![a()]);
        let mut st = th.consistency(&[pa, Literal::pred("p", vec![b()]).negate()], &d);
        assert!(st.pull(&top).unwrap().is_none());
    }

    #[test]
    fn refining_applies_the_input() {
        let d = dom(&["X"]);
        let th = theory();
        let px = Literal::pred("p", vec![meta("X")]);
        let npa = Literal::pred("p", vec![a()]).negate();
        let input = SubstConstraint::from_pairs(&[("X", b())]);
        let mut st = th.consistency(&[px, npa], &d);
        assert!(st.pull(&input).unwrap().is_none());
    }

    #[test]
    fn projection_erases_the_entry() {
        let d = dom(&["Y", "X"]);
        let th = theory();
        let s = SubstConstraint::from_pairs(&[("X", a()), ("Y", b())]);
        assert_eq!(
            th.project(&s, "X", &d).unwrap(),
            SubstConstraint::from_pairs(&[("Y", b())])
        );
        assert!(th.project(&s, "Y", &d).is_err());
    }

    #[test]
    fn compatibility_is_instance_checking() {
        let d = dom(&["X"]);
        let th = theory();
        let xa = SubstConstraint::from_pairs(&[("X", a())]);
        assert!(th.compatible(&rho(&[("X", a())]), &xa, &d).unwrap());
        assert!(!th.compatible(&rho(&[("X", b())]), &xa, &d).unwrap());
        assert!(!th
            .compatible(&rho(&[("X", a())]), &SubstConstraint::Bot, &d)
            .unwrap());
    }

    #[test]
    fn projected_variables_stay_existential() {
        // X declared before Y; X -> f(Y); projecting Y leaves X -> f(Y) with Y free.
        let d = dom(&["X", "Y"]);
        let th = theory();
        let s = SubstConstraint::from_pairs(&[("X", f(meta("Y")))]);
        let down = th.project(&s, "Y", &d).unwrap();
        let d1 = d.without_meta("Y");
        assert!(th.compatible(&rho(&[("X", f(b()))]), &down, &d1).unwrap());
        assert!(!th.compatible(&rho(&[("X", a())]), &down, &d1).unwrap());
        // witness for Y recovers the argument
        assert_eq!(th.witness(&s, &rho(&[("X", f(b()))]), &d).unwrap(), b());
    }

    #[test]
    fn witness_examples() {
        let d = dom(&["X"]);
        let th = theory();
        let s = SubstConstraint::from_pairs(&[("X", f(a()))]);
        assert_eq!(th.witness(&s, &Instantiation::empty(), &d).unwrap(), f(a()));
        assert_eq!(
            th.witness(&SubstConstraint::identity(), &Instantiation::empty(), &d)
                .unwrap(),
            a()
        );
        assert!(th
            .witness(&SubstConstraint::Bot, &Instantiation::empty(), &d)
            .is_err());
    }
}
