use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

pub type Name = Arc<str>;
pub type Rat = num_rational::BigRational;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `p`, `-p`, `p/q` or `-p/q`.
pub fn parse_rat(s: &str) -> Option<Rat> {
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a, Some(b)),
        None => (s, None),
    };
    let digits = num.strip_prefix('-').unwrap_or(num);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let n: BigInt = num.parse().ok()?;
    match den {
        None => Some(Rat::from_integer(n)),
        Some(d) => {
            if d.is_empty() || !d.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            let d: BigInt = d.parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Rat::new(n, d))
        }
    }
}

pub fn fmt_rat(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sort {
    Uninterpreted,
    Rational,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Uninterpreted => write!(f, "u"),
            Sort::Rational => write!(f, "rat"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Bound,
    Eigen,
    Meta,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub kind: VarKind,
    pub name: Name,
    pub sort: Sort,
}

impl Var {
    pub fn new(kind: VarKind, name: &str, sort: Sort) -> Var {
        Var {
            kind,
            name: Arc::from(name),
            sort,
        }
    }
    pub fn eigen(name: &str, sort: Sort) -> Var {
        Var::new(VarKind::Eigen, name, sort)
    }
    pub fn meta(name: &str, sort: Sort) -> Var {
        Var::new(VarKind::Meta, name, sort)
    }
    pub fn bound(name: &str, sort: Sort) -> Var {
        Var::new(VarKind::Bound, name, sort)
    }
    pub fn with_kind(&self, kind: VarKind, name: Name) -> Var {
        Var {
            kind,
            name,
            sort: self.sort,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Linear combination `Σ cᵢ·vᵢ + c` over rational-sorted variables.
/// Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinExpr {
    pub coeffs: BTreeMap<Var, Rat>,
    pub constant: Rat,
}

impl LinExpr {
    pub fn zero() -> LinExpr {
        LinExpr {
            coeffs: BTreeMap::new(),
            constant: Rat::zero(),
        }
    }

    pub fn constant(c: Rat) -> LinExpr {
        LinExpr {
            coeffs: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn var(v: Var) -> LinExpr {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(v, Rat::one());
        LinExpr {
            coeffs,
            constant: Rat::zero(),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, v: &Var) -> Rat {
        self.coeffs.get(v).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn add_term(&mut self, v: Var, c: Rat) {
        if c.is_zero() {
            return;
        }
        let entry = self.coeffs.entry(v.clone()).or_insert_with(Rat::zero);
        *entry += c;
        if entry.is_zero() {
            self.coeffs.remove(&v);
        }
    }

    pub fn add(&self, other: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        for (v, c) in &other.coeffs {
            out.add_term(v.clone(), c.clone());
        }
        out.constant += &other.constant;
        out
    }

    pub fn scale(&self, k: &Rat) -> LinExpr {
        if k.is_zero() {
            return LinExpr::zero();
        }
        LinExpr {
            coeffs: self
                .coeffs
                .iter()
                .map(|(v, c)| (v.clone(), c * k))
                .collect(),
            constant: &self.constant * k,
        }
    }

    pub fn sub(&self, other: &LinExpr) -> LinExpr {
        self.add(&other.scale(&-Rat::one()))
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.coeffs.keys()
    }

    /// Replaces variables; replacements must be rational-sorted.
    pub fn map_vars(&self, f: &mut dyn FnMut(&Var) -> Option<Term>) -> LinExpr {
        let mut out = LinExpr::constant(self.constant.clone());
        for (v, c) in &self.coeffs {
            match f(v) {
                Some(t) => {
                    let lin = t
                        .to_lin()
                        .expect("rational variable replaced by a non-arithmetic term");
                    out = out.add(&lin.scale(c));
                }
                None => out.add_term(v.clone(), c.clone()),
            }
        }
        out
    }

    pub fn eval(&self, val: &dyn Fn(&Var) -> Option<Rat>) -> Option<Rat> {
        let mut acc = self.constant.clone();
        for (v, c) in &self.coeffs {
            acc += c * val(v)?;
        }
        Some(acc)
    }

    /// Canonical term: a bare number, a bare variable, or a proper combination.
    pub fn into_term(self) -> Term {
        if self.coeffs.is_empty() {
            return Term::Num(self.constant);
        }
        if self.coeffs.len() == 1 && self.constant.is_zero() {
            let (v, c) = self.coeffs.iter().next().unwrap();
            if c.is_one() {
                return Term::Var(v.clone());
            }
        }
        Term::Lin(self)
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.coeffs {
            let (neg, mag) = (c.is_negative(), c.abs());
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            if mag.is_one() {
                write!(f, "{}", v)?;
            } else {
                write!(f, "{}*{}", fmt_rat(&mag), v)?;
            }
            first = false;
        }
        if first {
            write!(f, "{}", fmt_rat(&self.constant))?;
        } else if !self.constant.is_zero() {
            let neg = self.constant.is_negative();
            write!(
                f,
                " {} {}",
                if neg { "-" } else { "+" },
                fmt_rat(&self.constant.abs())
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Var),
    Num(Rat),
    App(Name, Vec<Term>),
    Lin(LinExpr),
}

impl Term {
    pub fn app(f: &str, args: Vec<Term>) -> Term {
        Term::App(Arc::from(f), args)
    }

    pub fn constant(c: &str) -> Term {
        Term::App(Arc::from(c), Vec::new())
    }

    pub fn sort(&self) -> Sort {
        match self {
            Term::Var(v) => v.sort,
            Term::Num(_) | Term::Lin(_) => Sort::Rational,
            Term::App(..) => Sort::Uninterpreted,
        }
    }

    pub fn to_lin(&self) -> Option<LinExpr> {
        match self {
            Term::Var(v) if v.sort == Sort::Rational => Some(LinExpr::var(v.clone())),
            Term::Num(r) => Some(LinExpr::constant(r.clone())),
            Term::Lin(l) => Some(l.clone()),
            _ => None,
        }
    }

    pub fn map_vars(&self, f: &mut dyn FnMut(&Var) -> Option<Term>) -> Term {
        match self {
            Term::Var(v) => f(v).unwrap_or_else(|| self.clone()),
            Term::Num(_) => self.clone(),
            Term::App(g, args) => {
                Term::App(g.clone(), args.iter().map(|a| a.map_vars(f)).collect())
            }
            Term::Lin(l) => l.map_vars(f).into_term(),
        }
    }

    pub fn visit_vars(&self, f: &mut dyn FnMut(&Var)) {
        match self {
            Term::Var(v) => f(v),
            Term::Num(_) => {}
            Term::App(_, args) => args.iter().for_each(|a| a.visit_vars(f)),
            Term::Lin(l) => l.vars().for_each(|v| f(v)),
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.visit_vars(&mut |v| {
            out.insert(v.clone());
        });
        out
    }

    pub fn has_meta(&self) -> bool {
        let mut found = false;
        self.visit_vars(&mut |v| found |= v.kind == VarKind::Meta);
        found
    }

    pub fn mentions(&self, name: &str) -> bool {
        let mut found = false;
        self.visit_vars(&mut |v| found |= &*v.name == name);
        found
    }

    /// FunApp nesting depth; variables and numbers are depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Term::App(_, args) if !args.is_empty() => {
                1 + args.iter().map(Term::depth).max().unwrap_or(0)
            }
            _ => 0,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{}", v),
            Term::Num(r) => write!(f, "{}", fmt_rat(r)),
            Term::App(g, args) if args.is_empty() => write!(f, "{}", g),
            Term::App(g, args) => {
                write!(f, "{}(", g)?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", a)?;
                }
                write!(f, ")")
            }
            Term::Lin(l) => write!(f, "({})", l),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_parse_and_print() {
        assert_eq!(parse_rat("3/6"), Some(ratio(1, 2)));
        assert_eq!(parse_rat("-46/3"), Some(ratio(-46, 3)));
        assert_eq!(parse_rat("7"), Some(rat(7)));
        assert_eq!(parse_rat("1/0"), None);
        assert_eq!(parse_rat("x"), None);
        assert_eq!(parse_rat("-"), None);
        assert_eq!(fmt_rat(&ratio(91, 6)), "91/6");
        assert_eq!(fmt_rat(&rat(-2)), "-2");
    }

    #[test]
    fn linear_terms_canonicalise() {
        let x = Var::meta("X", Sort::Rational);
        let e = LinExpr::var(x.clone())
            .scale(&rat(3))
            .sub(&LinExpr::var(x.clone()).scale(&rat(2)));
        assert_eq!(e.into_term(), Term::Var(x.clone()));
        let z = LinExpr::var(x.clone()).sub(&LinExpr::var(x));
        assert_eq!(z.into_term(), Term::Num(rat(0)));
    }

    #[test]
    fn substitution_into_linear_terms_evaluates() {
        let x = Var::meta("X", Sort::Rational);
        let y = Var::meta("Y", Sort::Rational);
        let e = LinExpr::var(x.clone())
            .scale(&rat(3))
            .sub(&LinExpr::var(y.clone()).scale(&rat(2)));
        let t = Term::Lin(e).map_vars(&mut |v| match &*v.name {
            "X" => Some(Term::Num(rat(15))),
            "Y" => Some(Term::Num(rat(23))),
            _ => None,
        });
        assert_eq!(t, Term::Num(rat(-1)));
    }

    #[test]
    fn depth_counts_applications() {
        let t = Term::app("f", vec![Term::app("f", vec![Term::constant("a")])]);
        assert_eq!(t.depth(), 2);
        assert_eq!(Term::constant("a").depth(), 0);
    }
}
