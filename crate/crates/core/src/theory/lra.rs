//! Linear rational arithmetic: constraints are quantifier-free formulas in
//! disjunctive normal form, projection is Fourier–Motzkin elimination.
//!
//! Eigenvariables are read universally: `ρ ε σ` holds when `ρ(σ)` is valid
//! for every value of the eigenvariables it still mentions. Projection
//! therefore eliminates the eigenvariables a meta-variable may not depend on
//! universally before eliminating the meta-variable itself.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};

use super::{dual_pairs, Closure, ConstraintStream, GroundValidity, Theory, TheoryError};
use crate::logic::{
    default_rational_samples, fmt_rat, rat, Atom, Domain, Instantiation, LinExpr, Literal, Name,
    Rat, Rel, Sort, Term, Var, VarKind,
};

/// `expr ⋈ 0`, scaled so the leading coefficient has magnitude one
/// (and is positive for equalities).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinAtom {
    pub expr: LinExpr,
    pub rel: Rel,
}

/// Result of normalising an atom: constant atoms are decided on the spot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Norm {
    True,
    False,
    Atom(LinAtom),
}

fn holds(c: &Rat, rel: Rel) -> bool {
    match rel {
        Rel::Le => !c.is_positive(),
        Rel::Lt => c.is_negative(),
        Rel::Eq => c.is_zero(),
    }
}

impl LinAtom {
    pub fn new(expr: LinExpr, rel: Rel) -> Norm {
        let lead = match expr.coeffs.values().next() {
            None => {
                return if holds(&expr.constant, rel) {
                    Norm::True
                } else {
                    Norm::False
                }
            }
            Some(c) => c.clone(),
        };
        let k = if rel == Rel::Eq {
            lead.recip()
        } else {
            lead.abs().recip()
        };
        Norm::Atom(LinAtom {
            expr: expr.scale(&k),
            rel,
        })
    }

    /// `lhs ⋈ rhs`.
    pub fn cmp(lhs: &LinExpr, rel: Rel, rhs: &LinExpr) -> Norm {
        LinAtom::new(lhs.sub(rhs), rel)
    }

    /// The atoms whose disjunction is the negation of this one.
    fn negation(&self) -> Vec<Norm> {
        let neg = self.expr.scale(&-Rat::one());
        match self.rel {
            Rel::Le => vec![LinAtom::new(neg, Rel::Lt)],
            Rel::Lt => vec![LinAtom::new(neg, Rel::Le)],
            Rel::Eq => vec![
                LinAtom::new(self.expr.clone(), Rel::Lt),
                LinAtom::new(neg, Rel::Lt),
            ],
        }
    }

    fn eval(&self, val: &dyn Fn(&Var) -> Option<Rat>) -> Option<bool> {
        Some(holds(&self.expr.eval(val)?, self.rel))
    }
}

impl fmt::Display for LinAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut lhs = self.expr.clone();
        let c = std::mem::replace(&mut lhs.constant, Rat::zero());
        write!(f, "{} {} {}", lhs, self.rel.symbol(), fmt_rat(&-c))
    }
}

pub type System = BTreeSet<LinAtom>;

/// Adds a normalised atom; false when the system became contradictory.
fn push(sys: &mut System, n: Norm) -> bool {
    match n {
        Norm::True => true,
        Norm::False => false,
        Norm::Atom(a) => {
            sys.insert(a);
            true
        }
    }
}

/// Resource caps for DNF growth.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Caps {
    pub disjuncts: usize,
    pub atoms: usize,
}

impl Default for Caps {
    fn default() -> Caps {
        Caps {
            disjuncts: 512,
            atoms: 256,
        }
    }
}

impl Caps {
    fn check_atoms(&self, sys: &System) -> Result<(), TheoryError> {
        if sys.len() > self.atoms {
            Err(TheoryError::Resource(format!(
                "system exceeds {} atoms",
                self.atoms
            )))
        } else {
            Ok(())
        }
    }

    fn check_disjuncts(&self, n: usize) -> Result<(), TheoryError> {
        if n > self.disjuncts {
            Err(TheoryError::Resource(format!(
                "formula exceeds {} disjuncts",
                self.disjuncts
            )))
        } else {
            Ok(())
        }
    }
}

fn subst_lin(e: &LinExpr, v: &Var, repl: &LinExpr) -> LinExpr {
    let c = e.coeff(v);
    if c.is_zero() {
        return e.clone();
    }
    let mut out = e.clone();
    out.coeffs.remove(v);
    out.add(&repl.scale(&c))
}

fn system_vars(sys: &System) -> BTreeSet<Var> {
    sys.iter().flat_map(|a| a.expr.vars().cloned()).collect()
}

/// `∃v. sys` as a single system, `None` when it is unsatisfiable.
pub fn fm_exists(sys: &System, v: &Var, caps: Caps) -> Result<Option<System>, TheoryError> {
    let (with, rest): (Vec<&LinAtom>, Vec<&LinAtom>) =
        sys.iter().partition(|a| !a.expr.coeff(v).is_zero());
    if with.is_empty() {
        return Ok(Some(sys.clone()));
    }
    let mut out: System = rest.into_iter().cloned().collect();
    if let Some(eq) = with.iter().find(|a| a.rel == Rel::Eq) {
        let c = eq.expr.coeff(v);
        let mut r = eq.expr.clone();
        r.coeffs.remove(v);
        let repl = r.scale(&-c.recip());
        for a in &with {
            if !push(&mut out, LinAtom::new(subst_lin(&a.expr, v, &repl), a.rel)) {
                return Ok(None);
            }
        }
        caps.check_atoms(&out)?;
        return Ok(Some(out));
    }
    let mut lowers = Vec::new();
    let mut uppers = Vec::new();
    for a in with {
        let c = a.expr.coeff(v);
        let scaled = a.expr.scale(&c.abs().recip());
        if c.is_positive() {
            uppers.push((scaled, a.rel));
        } else {
            lowers.push((scaled, a.rel));
        }
    }
    for (l, lr) in &lowers {
        for (u, ur) in &uppers {
            let rel = if *lr == Rel::Lt || *ur == Rel::Lt {
                Rel::Lt
            } else {
                Rel::Le
            };
            if !push(&mut out, LinAtom::new(l.add(u), rel)) {
                return Ok(None);
            }
        }
        caps.check_atoms(&out)?;
    }
    Ok(Some(out))
}

/// Elimination order heuristic: equalities first, then fewest produced pairs.
fn cheapest_var(sys: &System) -> Option<Var> {
    let mut best: Option<(i64, Var)> = None;
    for v in system_vars(sys) {
        let (mut lo, mut hi, mut eq) = (0i64, 0i64, false);
        for a in sys {
            let c = a.expr.coeff(&v);
            if c.is_zero() {
                continue;
            }
            if a.rel == Rel::Eq {
                eq = true;
            } else if c.is_positive() {
                hi += 1;
            } else {
                lo += 1;
            }
        }
        let cost = if eq { -1 } else { lo * hi - lo - hi };
        if best.as_ref().map_or(true, |(b, _)| cost < *b) {
            best = Some((cost, v));
        }
    }
    best.map(|(_, v)| v)
}

/// Endpoint `(value, closed)`; `None` is unbounded.
type Bound = Option<(Rat, bool)>;

/// The set a system cuts out of the line of its only variable `v`, or `None` when empty.
fn interval(sys: &System, v: &Var) -> Option<(Bound, Bound)> {
    let (mut lo, mut hi): (Bound, Bound) = (None, None);
    for a in sys {
        let k = a.expr.coeff(v);
        let p = -a.expr.constant.clone() / k.clone();
        let closed = a.rel != Rel::Lt;
        let (raise, lower) = match a.rel {
            Rel::Eq => (true, true),
            _ => (k.is_negative(), k.is_positive()),
        };
        if raise
            && lo
                .as_ref()
                .is_none_or(|(l, lc)| p > *l || (p == *l && *lc && !closed))
        {
            lo = Some((p.clone(), closed));
        }
        if lower
            && hi
                .as_ref()
                .is_none_or(|(h, hc)| p < *h || (p == *h && *hc && !closed))
        {
            hi = Some((p, closed));
        }
    }
    match (&lo, &hi) {
        (Some((l, lc)), Some((h, hc))) if l > h || (l == h && !(*lc && *hc)) => None,
        _ => Some((lo, hi)),
    }
}

fn upper_exceeds(a: &Bound, b: &Bound) -> bool {
    match (a, b) {
        (None, Some(_)) => true,
        (Some((x, xc)), Some((y, yc))) => x > y || (x == y && *xc && !*yc),
        _ => false,
    }
}

/// The union of the intervals is the whole line.
fn covers_line(ivs: &[(Bound, Bound)]) -> bool {
    let mut reach: Option<Bound> = None;
    for (lo, hi) in ivs {
        if lo.is_none() && reach.as_ref().is_none_or(|r| upper_exceeds(hi, r)) {
            reach = Some(hi.clone());
        }
    }
    loop {
        let Some(cur) = reach else { return false };
        let Some((cv, cc)) = &cur else { return true };
        let mut next = cur.clone();
        for (lo, hi) in ivs {
            let Some((lv, lc)) = lo else { continue };
            if (lv < cv || (lv == cv && (*lc || *cc))) && upper_exceeds(hi, &next) {
                next = hi.clone();
            }
        }
        if next == cur {
            return false;
        }
        reach = Some(next);
    }
}

pub fn system_sat(sys: &System, caps: Caps) -> Result<bool, TheoryError> {
    let vars = system_vars(sys);
    if vars.len() == 1 {
        return Ok(interval(sys, vars.first().unwrap()).is_some());
    }
    let mut cur = sys.clone();
    while let Some(v) = cheapest_var(&cur) {
        match fm_exists(&cur, &v, caps)? {
            None => return Ok(false),
            Some(next) => cur = next,
        }
    }
    Ok(true)
}

/// Disjunction of systems. No systems is FALSE; a system without atoms is TRUE.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PolyConstraint {
    systems: BTreeSet<System>,
}

impl PolyConstraint {
    pub fn truth() -> PolyConstraint {
        PolyConstraint {
            systems: std::iter::once(System::new()).collect(),
        }
    }

    pub fn falsity() -> PolyConstraint {
        PolyConstraint {
            systems: BTreeSet::new(),
        }
    }

    pub fn from_systems(systems: impl IntoIterator<Item = System>) -> PolyConstraint {
        let systems: BTreeSet<System> = systems.into_iter().collect();
        if systems.iter().any(|s| s.is_empty()) {
            return PolyConstraint::truth();
        }
        PolyConstraint { systems }
    }

    /// One system holding the given atoms; constant atoms are evaluated.
    pub fn conj(atoms: impl IntoIterator<Item = Norm>) -> PolyConstraint {
        let mut sys = System::new();
        for n in atoms {
            if !push(&mut sys, n) {
                return PolyConstraint::falsity();
            }
        }
        PolyConstraint::from_systems([sys])
    }

    pub fn systems(&self) -> &BTreeSet<System> {
        &self.systems
    }

    pub fn is_true(&self) -> bool {
        self.systems.iter().any(|s| s.is_empty())
    }

    pub fn is_false(&self) -> bool {
        self.systems.is_empty()
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.systems.iter().flat_map(system_vars).collect()
    }

    pub fn or(&self, other: &PolyConstraint) -> PolyConstraint {
        PolyConstraint::from_systems(self.systems.iter().chain(&other.systems).cloned())
    }

    /// Conjunction distributed over disjuncts; unsatisfiable products are dropped.
    pub fn and(&self, other: &PolyConstraint, caps: Caps) -> Result<PolyConstraint, TheoryError> {
        let mut out = BTreeSet::new();
        for a in &self.systems {
            for b in &other.systems {
                let s: System = a.union(b).cloned().collect();
                caps.check_atoms(&s)?;
                if system_sat(&s, caps)? {
                    out.insert(s);
                    caps.check_disjuncts(out.len())?;
                }
            }
        }
        Ok(PolyConstraint::from_systems(out))
    }

    pub fn negate(&self, caps: Caps) -> Result<PolyConstraint, TheoryError> {
        let mut acc: BTreeSet<System> = std::iter::once(System::new()).collect();
        for sys in &self.systems {
            let options: Vec<Norm> = sys.iter().flat_map(|a| a.negation()).collect();
            let mut next = BTreeSet::new();
            for partial in &acc {
                for o in &options {
                    let mut s = partial.clone();
                    if push(&mut s, o.clone()) && system_sat(&s, caps)? {
                        next.insert(s);
                        caps.check_disjuncts(next.len())?;
                    }
                }
            }
            acc = next;
            if acc.is_empty() {
                break;
            }
        }
        Ok(PolyConstraint::from_systems(acc))
    }

    pub fn exists(&self, v: &Var, caps: Caps) -> Result<PolyConstraint, TheoryError> {
        let mut out = BTreeSet::new();
        for s in &self.systems {
            if let Some(r) = fm_exists(s, v, caps)? {
                out.insert(r);
            }
        }
        Ok(PolyConstraint::from_systems(out))
    }

    pub fn forall(&self, v: &Var, caps: Caps) -> Result<PolyConstraint, TheoryError> {
        if !self.vars().contains(v) {
            return Ok(self.clone());
        }
        self.negate(caps)?.exists(v, caps)?.negate(caps)
    }

    /// Some assignment to all variables satisfies some disjunct.
    pub fn sat(&self, caps: Caps) -> Result<bool, TheoryError> {
        for s in &self.systems {
            if system_sat(s, caps)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// True under every assignment.
    pub fn valid(&self, caps: Caps) -> Result<bool, TheoryError> {
        if self.is_true() {
            return Ok(true);
        }
        let vars = self.vars();
        if vars.len() == 1 {
            let v = vars.first().unwrap();
            let ivs: Vec<_> = self.systems.iter().filter_map(|s| interval(s, v)).collect();
            return Ok(covers_line(&ivs));
        }
        Ok(!self.negate(caps)?.sat(caps)?)
    }

    pub fn substitute(&self, f: &dyn Fn(&Var) -> Option<LinExpr>) -> PolyConstraint {
        let mut out = BTreeSet::new();
        'sys: for s in &self.systems {
            let mut ns = System::new();
            for a in s {
                let mut e = LinExpr::constant(a.expr.constant.clone());
                for (v, c) in &a.expr.coeffs {
                    match f(v) {
                        Some(r) => {
                            for (w, k) in &r.coeffs {
                                e.add_term(w.clone(), c * k);
                            }
                            if !r.constant.is_zero() {
                                e.constant += c * &r.constant;
                            }
                        }
                        None => e.add_term(v.clone(), c.clone()),
                    }
                }
                if !push(&mut ns, LinAtom::new(e, a.rel)) {
                    continue 'sys;
                }
            }
            out.insert(ns);
        }
        PolyConstraint::from_systems(out)
    }

    /// Evaluates a variable-free constraint.
    pub fn eval(&self, val: &dyn Fn(&Var) -> Option<Rat>) -> Option<bool> {
        for s in &self.systems {
            let mut all = true;
            for a in s {
                if !a.eval(val)? {
                    all = false;
                    break;
                }
            }
            if all {
                return Some(true);
            }
        }
        Some(false)
    }
}

impl fmt::Display for PolyConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_true() {
            return write!(f, "TRUE");
        }
        if self.is_false() {
            return write!(f, "FALSE");
        }
        let parts: Vec<String> = self
            .systems
            .iter()
            .map(|s| {
                s.iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>()
                    .join(" & ")
            })
            .collect();
        if parts.len() == 1 {
            write!(f, "{}", parts[0])
        } else {
            write!(f, "({})", parts.join(") | ("))
        }
    }
}

impl Serialize for PolyConstraint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Projection of a single meta-variable: `∃X. σ`.
pub fn fm_eliminate(
    sigma: &PolyConstraint,
    x: &Var,
    caps: Caps,
) -> Result<PolyConstraint, TheoryError> {
    sigma.exists(x, caps)
}

/// Satisfiability with every variable read existentially.
pub fn lra_sat(sigma: &PolyConstraint, caps: Caps) -> Result<bool, TheoryError> {
    sigma.sat(caps)
}

/// Both formulas have the same models.
pub fn equivalent(a: &PolyConstraint, b: &PolyConstraint, caps: Caps) -> Result<bool, TheoryError> {
    Ok(!a.and(&b.negate(caps)?, caps)?.sat(caps)? && !b.and(&a.negate(caps)?, caps)?.sat(caps)?)
}

/// The constraint asserting that `l` holds; `None` for uninterpreted literals.
pub fn literal_poly(l: &Literal) -> Option<PolyConstraint> {
    let Atom::Cmp(lhs, rel, rhs) = &l.atom else {
        return None;
    };
    let a = LinAtom::cmp(lhs, *rel, rhs);
    Some(if l.positive {
        PolyConstraint::conj([a])
    } else {
        let systems = match a {
            Norm::True => Vec::new(),
            Norm::False => vec![System::new()],
            Norm::Atom(a) => a
                .negation()
                .into_iter()
                .filter_map(|n| {
                    let mut s = System::new();
                    push(&mut s, n).then_some(s)
                })
                .collect(),
        };
        PolyConstraint::from_systems(systems)
    })
}

fn term_lin(t: &Term) -> Option<LinExpr> {
    t.to_lin()
}

#[derive(Clone, Debug)]
pub struct LraTheory {
    pub caps: Caps,
    /// Values for eigenvariables when a witness or a ground check needs numbers.
    pub valuation: BTreeMap<Name, Rat>,
    /// Value of eigenvariables missing from `valuation`; `None` makes them unsupported.
    pub eigen_default: Option<Rat>,
    pub samples: Vec<Rat>,
    /// Also offer the disjunction of all closers of a leaf.
    pub closer_disjunction: bool,
}

impl Default for LraTheory {
    fn default() -> LraTheory {
        LraTheory {
            caps: Caps::default(),
            valuation: BTreeMap::new(),
            eigen_default: Some(rat(0)),
            samples: default_rational_samples(),
            closer_disjunction: true,
        }
    }
}

impl LraTheory {
    fn eigen_value(&self, v: &Var) -> Result<Rat, TheoryError> {
        self.valuation
            .get(&v.name)
            .cloned()
            .or_else(|| self.eigen_default.clone())
            .ok_or_else(|| {
                TheoryError::Unsupported(format!("no value for eigenvariable {}", v.name))
            })
    }

    /// Replaces meta-variables by their images under `rho`; every meta must be covered
    /// except `keep`.
    fn instantiate(
        &self,
        sigma: &PolyConstraint,
        rho: &Instantiation,
        keep: Option<&str>,
    ) -> Result<PolyConstraint, TheoryError> {
        let mut repl: BTreeMap<Var, LinExpr> = BTreeMap::new();
        for v in sigma.vars() {
            if v.kind != VarKind::Meta || Some(&*v.name) == keep {
                continue;
            }
            let t = rho.get(&v.name).ok_or_else(|| {
                TheoryError::Precondition(format!("instantiation does not cover {}", v.name))
            })?;
            let lin = term_lin(t).ok_or_else(|| {
                TheoryError::Precondition(format!("{} is mapped to a non-arithmetic term", v.name))
            })?;
            repl.insert(v, lin);
        }
        Ok(sigma.substitute(&|v| repl.get(v).cloned()))
    }

    /// Compatibility when `rho` maps every meta-variable to a number: ground
    /// atoms are decided directly and the first satisfied system answers.
    /// `None` when some value is symbolic.
    fn compatible_numeric(
        &self,
        rho: &Instantiation,
        sigma: &PolyConstraint,
    ) -> Result<Option<bool>, TheoryError> {
        let mut vals: BTreeMap<&str, Rat> = BTreeMap::new();
        for (k, t) in rho.iter() {
            match t {
                Term::Num(r) => {
                    vals.insert(k, r.clone());
                }
                _ => return Ok(None),
            }
        }
        let mut residual = Vec::new();
        'sys: for sys in sigma.systems() {
            let mut rest = System::new();
            for a in sys {
                let mut e = LinExpr::constant(a.expr.constant.clone());
                for (v, c) in &a.expr.coeffs {
                    match vals.get(&*v.name) {
                        Some(r) if v.kind == VarKind::Meta => e.constant += c * r,
                        None if v.kind == VarKind::Meta => {
                            return Err(TheoryError::Precondition(format!(
                                "instantiation does not cover {}",
                                v.name
                            )))
                        }
                        _ => e.add_term(v.clone(), c.clone()),
                    }
                }
                if e.coeffs.is_empty() {
                    if !holds(&e.constant, a.rel) {
                        continue 'sys;
                    }
                } else if !push(&mut rest, LinAtom::new(e, a.rel)) {
                    continue 'sys;
                }
            }
            if rest.is_empty() {
                return Ok(Some(true));
            }
            residual.push(rest);
        }
        if residual.is_empty() {
            return Ok(Some(false));
        }
        PolyConstraint::from_systems(residual)
            .valid(self.caps)
            .map(Some)
    }

    /// Candidate closers of a leaf, in stream order.
    fn closers(&self, lits: &[Literal]) -> Vec<(Vec<Literal>, PolyConstraint)> {
        let mut out = Vec::new();
        'pairs: for (i, j) in dual_pairs(lits) {
            let (Atom::Pred(_, a), Atom::Pred(_, b)) = (&lits[i].atom, &lits[j].atom) else {
                continue;
            };
            let mut atoms = Vec::new();
            for (t, u) in a.iter().zip(b) {
                if t.sort() == Sort::Rational {
                    match (term_lin(t), term_lin(u)) {
                        (Some(t), Some(u)) => atoms.push(LinAtom::cmp(&t, Rel::Eq, &u)),
                        _ => continue 'pairs,
                    }
                } else if t != u {
                    continue 'pairs;
                }
            }
            out.push((
                vec![lits[i].clone(), lits[j].clone()],
                PolyConstraint::conj(atoms),
            ));
        }
        for l in lits {
            if let Some(p) = literal_poly(l) {
                out.push((vec![l.clone()], p));
            }
        }
        if self.closer_disjunction && out.len() >= 2 {
            let mut used: Vec<Literal> = Vec::new();
            let mut any = PolyConstraint::falsity();
            for (u, p) in &out {
                for l in u {
                    if !used.contains(l) {
                        used.push(l.clone());
                    }
                }
                any = any.or(p);
            }
            used.sort_by_key(|l| lits.iter().position(|m| m == l));
            out.push((used, any));
        }
        out
    }

    /// Bounds `X ⋈ e` of each system as `(e, rel, is_upper)`; equalities come first.
    fn bounds(sys: &System, x: &Var) -> Vec<(LinExpr, Rel, bool)> {
        let mut out = Vec::new();
        for a in sys {
            let c = a.expr.coeff(x);
            if c.is_zero() {
                continue;
            }
            let mut rest = a.expr.clone();
            rest.coeffs.remove(x);
            out.push((rest.scale(&-c.recip()), a.rel, c.is_positive()));
        }
        out.sort_by_key(|(_, r, _)| *r != Rel::Eq);
        out
    }

    fn symbolic_candidates(sigma: &PolyConstraint, x: &Var) -> Vec<LinExpr> {
        let mut out: Vec<LinExpr> = Vec::new();
        let one = LinExpr::constant(rat(1));
        for s in sigma.systems() {
            let bounds = LraTheory::bounds(s, x);
            for (e, rel, _) in &bounds {
                if *rel == Rel::Eq {
                    out.push(e.clone());
                }
            }
            let lows: Vec<&LinExpr> = bounds
                .iter()
                .filter(|b| b.1 != Rel::Eq && !b.2)
                .map(|b| &b.0)
                .collect();
            let highs: Vec<&LinExpr> = bounds
                .iter()
                .filter(|b| b.1 != Rel::Eq && b.2)
                .map(|b| &b.0)
                .collect();
            for l in &lows {
                for h in &highs {
                    out.push(l.add(h).scale(&crate::logic::ratio(1, 2)));
                }
            }
            for l in &lows {
                out.push(l.add(&one));
                out.push((*l).clone());
            }
            for h in &highs {
                out.push(h.sub(&one));
                out.push((*h).clone());
            }
        }
        out.push(LinExpr::zero());
        let mut seen = BTreeSet::new();
        out.retain(|e| seen.insert(e.clone()));
        out
    }

    /// Interval of the only remaining variable in a satisfiable system.
    fn pick_value(sys: &System, x: &Var) -> Option<Rat> {
        let mut lo: Option<Rat> = None;
        let mut hi: Option<Rat> = None;
        for a in sys {
            let c = a.expr.coeff(x);
            if c.is_zero() {
                continue;
            }
            let bound = -&a.expr.constant / &c;
            match a.rel {
                Rel::Eq => return Some(bound),
                _ if c.is_positive() => hi = Some(hi.map_or(bound.clone(), |h| h.min(bound))),
                _ => lo = Some(lo.map_or(bound.clone(), |l| l.max(bound))),
            }
        }
        Some(match (lo, hi) {
            (Some(l), Some(h)) if l == h => l,
            (Some(l), Some(h)) => (l + h) / rat(2),
            (Some(l), None) => l + rat(1),
            (None, Some(h)) => h - rat(1),
            (None, None) => rat(0),
        })
    }
}

struct LraStream<'a> {
    theory: &'a LraTheory,
    d: Domain,
    candidates: Vec<(Vec<Literal>, PolyConstraint)>,
    next: usize,
    input: Option<PolyConstraint>,
}

impl ConstraintStream<PolyConstraint> for LraStream<'_> {
    fn pull(
        &mut self,
        input: &PolyConstraint,
    ) -> Result<Option<Closure<PolyConstraint>>, TheoryError> {
        if self.input.as_ref() != Some(input) {
            self.input = Some(input.clone());
            self.next = 0;
        }
        while self.next < self.candidates.len() {
            let (used, c) = &self.candidates[self.next];
            self.next += 1;
            if let Some(out) = self.theory.meet(input, c, &self.d)? {
                return Ok(Some(Closure {
                    used: used.clone(),
                    out,
                }));
            }
        }
        Ok(None)
    }
}

impl GroundValidity for LraTheory {
    fn ground_valid(&self, lits: &[Literal]) -> Result<bool, TheoryError> {
        super::require_ground(lits)?;
        let mut vals: BTreeMap<Var, Rat> = BTreeMap::new();
        for l in lits {
            for v in l.vars() {
                if v.sort == Sort::Rational {
                    let r = self.eigen_value(&v)?;
                    vals.insert(v, r);
                }
            }
        }
        let eval = |e: &LinExpr| e.eval(&|v| vals.get(v).cloned());
        for l in lits {
            if let Atom::Cmp(lhs, rel, rhs) = &l.atom {
                if let (Some(a), Some(b)) = (eval(lhs), eval(rhs)) {
                    if holds(&(a - b), *rel) == l.positive {
                        return Ok(true);
                    }
                }
            }
        }
        for (i, j) in dual_pairs(lits) {
            let (Atom::Pred(_, a), Atom::Pred(_, b)) = (&lits[i].atom, &lits[j].atom) else {
                continue;
            };
            let same = a
                .iter()
                .zip(b)
                .all(|(t, u)| match (term_lin(t), term_lin(u)) {
                    (Some(t), Some(u)) => eval(&t).is_some() && eval(&t) == eval(&u),
                    _ => t == u,
                });
            if same {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

impl Theory for LraTheory {
    type Constraint = PolyConstraint;

    fn name(&self) -> &'static str {
        "lra"
    }

    fn top(&self, _d: &Domain) -> PolyConstraint {
        PolyConstraint::truth()
    }

    fn project(
        &self,
        sigma: &PolyConstraint,
        meta: &str,
        d: &Domain,
    ) -> Result<PolyConstraint, TheoryError> {
        let x = d
            .last_meta()
            .filter(|v| &*v.name == meta)
            .ok_or_else(|| {
                TheoryError::Precondition(format!(
                    "{} is not the newest meta-variable of {}",
                    meta, d
                ))
            })?
            .clone();
        let mut cur = sigma.clone();
        for v in sigma.vars() {
            if v.kind == VarKind::Eigen && !d.is_authorised(meta, &v.name) {
                cur = cur.forall(&v, self.caps)?;
            }
        }
        cur.exists(&x, self.caps)
    }

    fn lift(
        &self,
        sigma: &PolyConstraint,
        _meta: &str,
        _d: &Domain,
    ) -> Result<PolyConstraint, TheoryError> {
        Ok(sigma.clone())
    }

    fn meet(
        &self,
        a: &PolyConstraint,
        b: &PolyConstraint,
        d: &Domain,
    ) -> Result<Option<PolyConstraint>, TheoryError> {
        let m = a.and(b, self.caps)?;
        if m.is_false() || !self.satisfiable(&m, d)? {
            return Ok(None);
        }
        Ok(Some(m))
    }

    fn satisfiable(&self, sigma: &PolyConstraint, d: &Domain) -> Result<bool, TheoryError> {
        if sigma.is_true() {
            return Ok(true);
        }
        if sigma.is_false() {
            return Ok(false);
        }
        let mut cur = sigma.clone();
        let mut dom = d.clone();
        while let Some(x) = dom.last_meta().cloned() {
            cur = self.project(&cur, &x.name, &dom)?;
            dom = dom.without_meta(&x.name);
        }
        cur.valid(self.caps)
    }

    fn consistency<'a>(
        &'a self,
        lits: &[Literal],
        d: &Domain,
    ) -> Box<dyn ConstraintStream<PolyConstraint> + 'a> {
        Box::new(LraStream {
            theory: self,
            d: d.clone(),
            candidates: self.closers(lits),
            next: 0,
            input: None,
        })
    }

    fn compatible(
        &self,
        rho: &Instantiation,
        sigma: &PolyConstraint,
        _d: &Domain,
    ) -> Result<bool, TheoryError> {
        if let Some(b) = self.compatible_numeric(rho, sigma)? {
            return Ok(b);
        }
        let inst = self.instantiate(sigma, rho, None)?;
        if let Some(b) = inst.eval(&|_| None) {
            return Ok(b);
        }
        inst.valid(self.caps)
    }

    fn witness(
        &self,
        sigma: &PolyConstraint,
        rho: &Instantiation,
        d: &Domain,
    ) -> Result<Term, TheoryError> {
        let x = d
            .last_meta()
            .ok_or_else(|| TheoryError::Precondition("witness needs a meta-variable".into()))?
            .clone();
        let mut cur = self.instantiate(sigma, rho, Some(&x.name))?;
        for v in cur.vars() {
            if v.kind == VarKind::Eigen && !d.is_authorised(&x.name, &v.name) {
                cur = cur.forall(&v, self.caps)?;
            }
        }
        if cur.vars().iter().all(|v| *v == x) {
            for s in cur.systems() {
                if system_sat(s, self.caps)? {
                    if let Some(r) = LraTheory::pick_value(s, &x) {
                        return Ok(Term::Num(r));
                    }
                }
            }
            return Err(TheoryError::Precondition(format!(
                "no value of {} satisfies {}",
                x.name, sigma
            )));
        }
        // bounds mention authorised eigenvariables: try linear candidates
        for t in LraTheory::symbolic_candidates(&cur, &x) {
            let inst = cur.substitute(&|v| (*v == x).then(|| t.clone()));
            if inst.valid(self.caps)? {
                return Ok(t.into_term());
            }
        }
        Err(TheoryError::Unsupported(format!(
            "no linear witness for {} in {}",
            x.name, sigma
        )))
    }

    fn ground_validity(&self) -> &dyn GroundValidity {
        self
    }

    fn shrink(&self, sigma: &PolyConstraint) -> Vec<PolyConstraint> {
        let mut out = Vec::new();
        let systems: Vec<&System> = sigma.systems().iter().collect();
        if systems.len() > 1 {
            for i in 0..systems.len() {
                out.push(PolyConstraint::from_systems(
                    systems
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, s)| (*s).clone()),
                ));
            }
        }
        for (i, s) in systems.iter().enumerate() {
            for a in s.iter() {
                let mut smaller = (*s).clone();
                smaller.remove(a);
                let mut all: Vec<System> = systems.iter().map(|s| (*s).clone()).collect();
                all[i] = smaller;
                out.push(PolyConstraint::from_systems(all));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::ratio;

    fn m(n: &str) -> Var {
        Var::meta(n, Sort::Rational)
    }
    fn e(n: &str) -> Var {
        Var::eigen(n, Sort::Rational)
    }
    fn lv(v: &Var) -> LinExpr {
        LinExpr::var(v.clone())
    }
    fn k(n: i64) -> LinExpr {
        LinExpr::constant(rat(n))
    }
    fn lin(terms: &[(i64, &Var)], c: i64) -> LinExpr {
        let mut e = k(c);
        for (a, v) in terms {
            e.add_term((*v).clone(), rat(*a));
        }
        e
    }
    /// Decides a one-variable question by testing every endpoint, every
    /// midpoint between endpoints and a point beyond each end.
    fn critical_points(c: &PolyConstraint, v: &Var) -> Vec<Rat> {
        let mut pts: Vec<Rat> = c
            .systems()
            .iter()
            .flatten()
            .map(|a| -a.expr.constant.clone() / a.expr.coeff(v))
            .collect();
        pts.sort();
        pts.dedup();
        let mut out = pts.clone();
        for w in pts.windows(2) {
            out.push((w[0].clone() + w[1].clone()) / rat(2));
        }
        let (lo, hi) = (
            pts.first().cloned().unwrap_or(rat(0)),
            pts.last().cloned().unwrap_or(rat(0)),
        );
        out.push(lo - rat(1));
        out.push(hi + rat(1));
        out
    }

    #[test]
    fn univariate_validity_and_satisfiability_match_point_tests() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let x = e("c");
        for _ in 0..2000 {
            let systems: Vec<System> = (0..rng.random_range(1..5))
                .map(|_| {
                    let mut s = System::new();
                    for _ in 0..rng.random_range(1..3) {
                        let rel = [Rel::Le, Rel::Lt, Rel::Eq][rng.random_range(0..3)];
                        let a = [-2, -1, 1, 3][rng.random_range(0..4)];
                        if let Norm::Atom(at) =
                            LinAtom::new(lin(&[(a, &x)], rng.random_range(-4..5)), rel)
                        {
                            s.insert(at);
                        }
                    }
                    s
                })
                .filter(|s| !s.is_empty())
                .collect();
            let c = PolyConstraint::from_systems(systems);
            let pts = critical_points(&c, &x);
            let holds = |p: &Rat| c.eval(&|_| Some(p.clone())).unwrap();
            assert_eq!(
                c.valid(caps()).unwrap(),
                pts.iter().all(holds),
                "validity of {}",
                c
            );
            assert_eq!(
                c.sat(caps()).unwrap(),
                pts.iter().any(holds),
                "satisfiability of {}",
                c
            );
        }
    }

    fn caps() -> Caps {
        Caps::default()
    }
    fn dom(metas: &[&str]) -> Domain {
        let mut d = Domain::default();
        for x in metas {
            d = d.add_meta(m(x)).unwrap();
        }
        d
    }
    // 3X <= 2Y <= 3X + 1
    fn sigma2() -> PolyConstraint {
        let (x, y) = (m("X"), m("Y"));
        PolyConstraint::conj([
            LinAtom::cmp(&lin(&[(3, &x)], 0), Rel::Le, &lin(&[(2, &y)], 0)),
            LinAtom::cmp(&lin(&[(2, &y)], 0), Rel::Le, &lin(&[(3, &x)], 1)),
        ])
    }

    #[test]
    fn constant_atoms_are_decided() {
        assert_eq!(LinAtom::new(k(-1), Rel::Lt), Norm::True);
        assert_eq!(LinAtom::new(k(0), Rel::Lt), Norm::False);
        assert_eq!(LinAtom::new(k(0), Rel::Eq), Norm::True);
    }

    #[test]
    fn transitivity_elimination() {
        let (x, y, z) = (m("X"), e("y"), e("z"));
        let s = PolyConstraint::conj([
            LinAtom::cmp(&lv(&z), Rel::Le, &lv(&x)),
            LinAtom::cmp(&lv(&x), Rel::Le, &lv(&y)),
        ]);
        let r = fm_eliminate(&s, &x, caps()).unwrap();
        let expect = PolyConstraint::conj([LinAtom::cmp(&lv(&z), Rel::Le, &lv(&y))]);
        assert_eq!(r, expect);
    }

    #[test]
    fn empty_interval_is_false() {
        let x = m("X");
        let s = PolyConstraint::conj([
            LinAtom::cmp(&lv(&x), Rel::Le, &k(0)),
            LinAtom::cmp(&k(1), Rel::Le, &lv(&x)),
        ]);
        assert!(fm_eliminate(&s, &x, caps()).unwrap().is_false());
        assert!(!lra_sat(&s, caps()).unwrap());
        assert!(lra_sat(&PolyConstraint::truth(), caps()).unwrap());
    }

    #[test]
    fn strictness_propagates() {
        let x = m("X");
        let s = PolyConstraint::conj([
            LinAtom::cmp(&lv(&x), Rel::Lt, &k(0)),
            LinAtom::cmp(&k(0), Rel::Le, &lv(&x)),
        ]);
        assert!(!lra_sat(&s, caps()).unwrap());
    }

    #[test]
    fn projection_of_the_band_is_true() {
        let d = dom(&["Y", "X"]);
        let r = LraTheory::default().project(&sigma2(), "X", &d).unwrap();
        assert!(r.is_true());
    }

    #[test]
    fn band_witness_is_midpoint() {
        let d = dom(&["Y", "X"]);
        let rho = Instantiation::from_map_unchecked(
            [(crate::logic::name("Y"), Term::Num(rat(23)))].into(),
        );
        let w = LraTheory::default().witness(&sigma2(), &rho, &d).unwrap();
        assert_eq!(w, Term::Num(ratio(91, 6)));
    }

    #[test]
    fn point_and_unconstrained_witnesses() {
        let d = dom(&["X"]);
        let th = LraTheory::default();
        let x = m("X");
        let s = PolyConstraint::conj([LinAtom::cmp(&lv(&x), Rel::Eq, &k(7))]);
        assert_eq!(
            th.witness(&s, &Instantiation::empty(), &d).unwrap(),
            Term::Num(rat(7))
        );
        assert_eq!(
            th.witness(&PolyConstraint::truth(), &Instantiation::empty(), &d)
                .unwrap(),
            Term::Num(rat(0))
        );
    }

    #[test]
    fn integer_point_is_compatible() {
        let d = dom(&["X", "Y"]);
        let rho = Instantiation::from_map_unchecked(
            [
                (crate::logic::name("X"), Term::Num(rat(15))),
                (crate::logic::name("Y"), Term::Num(rat(23))),
            ]
            .into(),
        );
        assert!(LraTheory::default()
            .compatible(&rho, &sigma2(), &d)
            .unwrap());
        let rho = Instantiation::from_map_unchecked(
            [
                (crate::logic::name("X"), Term::Num(rat(0))),
                (crate::logic::name("Y"), Term::Num(rat(23))),
            ]
            .into(),
        );
        assert!(!LraTheory::default()
            .compatible(&rho, &sigma2(), &d)
            .unwrap());
    }

    #[test]
    fn meet_is_conjunction() {
        let (x, y) = (m("X"), e("y"));
        let d = Domain::default()
            .add_eigen(y.clone())
            .unwrap()
            .add_meta(x.clone())
            .unwrap();
        let th = LraTheory::default();
        let a = PolyConstraint::conj([LinAtom::cmp(&lv(&y), Rel::Le, &lv(&x))]);
        let b = PolyConstraint::conj([LinAtom::cmp(&lv(&x), Rel::Le, &lv(&y))]);
        let r = th.meet(&a, &b, &d).unwrap().unwrap();
        assert_eq!(r.systems().iter().next().unwrap().len(), 2);
        let c = PolyConstraint::conj([LinAtom::cmp(&lv(&x), Rel::Lt, &lv(&y))]);
        assert!(th.meet(&a, &c, &d).unwrap().is_none());
    }

    #[test]
    fn eigenvariables_are_universal() {
        // X = y with y declared after X has no compatible instantiation
        let (x, y) = (m("X"), e("y"));
        let d = dom(&["X"]).add_eigen(y.clone()).unwrap();
        let th = LraTheory::default();
        let s = PolyConstraint::conj([LinAtom::cmp(&lv(&x), Rel::Eq, &lv(&y))]);
        assert!(!th.satisfiable(&s, &d).unwrap());
        // but it is fine when y comes first
        let d = Domain::default()
            .add_eigen(y.clone())
            .unwrap()
            .add_meta(x)
            .unwrap();
        assert!(th.satisfiable(&s, &d).unwrap());
        let only_y = PolyConstraint::conj([LinAtom::cmp(&lv(&y), Rel::Le, &k(0))]);
        assert!(!th.satisfiable(&only_y, &d).unwrap());
    }

    #[test]
    fn negation_round_trip() {
        let s = sigma2().or(&PolyConstraint::conj([LinAtom::cmp(
            &lv(&m("X")),
            Rel::Eq,
            &k(4),
        )]));
        let n = s.negate(caps()).unwrap();
        assert!(!s.and(&n, caps()).unwrap().sat(caps()).unwrap());
        assert!(equivalent(&n.negate(caps()).unwrap(), &s, caps()).unwrap());
    }

    #[test]
    fn dual_pair_closer_is_equality_system() {
        let th = LraTheory::default();
        let (x, y, x1, y1) = (m("X"), m("Y"), m("X'"), m("Y'"));
        let d = dom(&["X", "Y", "X'", "Y'"]);
        let p =
            |a: &Var, b: &Var| Literal::pred("p", vec![Term::Var(a.clone()), Term::Var(b.clone())]);
        let lits = vec![p(&x, &y), p(&x1, &y1).negate()];
        let mut st = th.consistency(&lits, &d);
        let c = st.pull(&PolyConstraint::truth()).unwrap().unwrap();
        let expect = PolyConstraint::conj([
            LinAtom::cmp(&lv(&x), Rel::Eq, &lv(&x1)),
            LinAtom::cmp(&lv(&y), Rel::Eq, &lv(&y1)),
        ]);
        assert_eq!(c.out, expect);
        assert_eq!(c.used.len(), 2);
        assert!(st.pull(&PolyConstraint::truth()).unwrap().is_none());
        let mut st = th.consistency(&[p(&x, &y)], &d);
        assert!(st.pull(&PolyConstraint::truth()).unwrap().is_none());
    }

    #[test]
    fn witness_may_be_linear_in_eigenvariables() {
        let (x, y) = (m("X"), e("y"));
        let d = Domain::default()
            .add_eigen(y.clone())
            .unwrap()
            .add_meta(x.clone())
            .unwrap();
        let th = LraTheory::default();
        let s = PolyConstraint::conj([LinAtom::cmp(&lv(&x), Rel::Eq, &lin(&[(1, &y)], 1))]);
        let w = th.witness(&s, &Instantiation::empty(), &d).unwrap();
        assert_eq!(w, Term::Lin(lin(&[(1, &y)], 1)));
        let band = PolyConstraint::conj([
            LinAtom::cmp(&lv(&y), Rel::Lt, &lv(&x)),
            LinAtom::cmp(&lv(&x), Rel::Lt, &lin(&[(1, &y)], 2)),
        ]);
        let w = th.witness(&band, &Instantiation::empty(), &d).unwrap();
        assert_eq!(w, Term::Lin(lin(&[(1, &y)], 1)));
    }

    #[test]
    fn ground_validity_evaluates() {
        let th = LraTheory::default();
        let l = |a: i64, b: i64| Literal::pos(Atom::Cmp(k(a), Rel::Le, k(b)));
        assert!(th.ground_valid(&[l(45, 46), l(46, 46)]).unwrap());
        assert!(!th.ground_valid(&[l(47, 46)]).unwrap());
        let y = e("y");
        let ly = Literal::pos(Atom::Cmp(lv(&y), Rel::Lt, k(1)));
        assert!(th.ground_valid(&[ly]).unwrap());
        let pa = Literal::pred("p", vec![Term::Num(rat(1))]);
        let pb = Literal::pred("p", vec![Term::Lin(lin(&[], 1))]).negate();
        assert!(th.ground_valid(&[pa, pb]).unwrap());
    }
}
