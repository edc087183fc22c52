use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::term::{LinExpr, Name, Sort, Term, Var, VarKind};
use super::LogicError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Rel {
    Le,
    Lt,
    Eq,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Eq => "=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Pred(Name, Vec<Term>),
    Cmp(LinExpr, Rel, LinExpr),
}

impl Atom {
    pub fn map_vars(&self, f: &mut dyn FnMut(&Var) -> Option<Term>) -> Atom {
        match self {
            Atom::Pred(p, args) => {
                Atom::Pred(p.clone(), args.iter().map(|a| a.map_vars(f)).collect())
            }
            Atom::Cmp(l, r, h) => Atom::Cmp(l.map_vars(f), *r, h.map_vars(f)),
        }
    }

    pub fn visit_vars(&self, f: &mut dyn FnMut(&Var)) {
        match self {
            Atom::Pred(_, args) => args.iter().for_each(|a| a.visit_vars(f)),
            Atom::Cmp(l, _, h) => {
                l.vars().for_each(|v| f(v));
                h.vars().for_each(|v| f(v));
            }
        }
    }

    pub fn is_arith(&self) -> bool {
        matches!(self, Atom::Cmp(..))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub positive: bool,
    pub atom: Atom,
}

impl Literal {
    pub fn pos(atom: Atom) -> Literal {
        Literal {
            positive: true,
            atom,
        }
    }

    pub fn neg_of(atom: Atom) -> Literal {
        Literal {
            positive: false,
            atom,
        }
    }

    pub fn pred(p: &str, args: Vec<Term>) -> Literal {
        Literal::pos(Atom::Pred(super::term::name(p), args))
    }

    pub fn negate(&self) -> Literal {
        Literal {
            positive: !self.positive,
            atom: self.atom.clone(),
        }
    }

    pub fn map_vars(&self, f: &mut dyn FnMut(&Var) -> Option<Term>) -> Literal {
        Literal {
            positive: self.positive,
            atom: self.atom.map_vars(f),
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.atom.visit_vars(&mut |v| {
            out.insert(v.clone());
        });
        out
    }

    pub fn has_meta(&self) -> bool {
        self.vars().iter().any(|v| v.kind == VarKind::Meta)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            write!(f, "~")?;
        }
        match &self.atom {
            Atom::Pred(p, args) if args.is_empty() => write!(f, "{}", p),
            Atom::Pred(p, args) => {
                write!(f, "{}(", p)?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", a)?;
                }
                write!(f, ")")
            }
            Atom::Cmp(l, r, h) if self.positive => write!(f, "{} {} {}", l, r.symbol(), h),
            Atom::Cmp(l, r, h) => write!(f, "({} {} {})", l, r.symbol(), h),
        }
    }
}

/// Negation-normal-form formula.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Lit(Literal),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Forall(Var, Box<Formula>),
    Exists(Var, Box<Formula>),
}

impl Formula {
    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn lit(l: Literal) -> Formula {
        Formula::Lit(l)
    }

    pub fn map_free(&self, f: &mut dyn FnMut(&Var) -> Option<Term>) -> Formula {
        match self {
            Formula::Lit(l) => Formula::Lit(l.map_vars(f)),
            Formula::And(a, b) => Formula::and(a.map_free(f), b.map_free(f)),
            Formula::Or(a, b) => Formula::or(a.map_free(f), b.map_free(f)),
            Formula::Forall(x, a) | Formula::Exists(x, a) => {
                let x2 = x.clone();
                let body = a.map_free(&mut |v| if *v == x2 { None } else { f(v) });
                if matches!(self, Formula::Forall(..)) {
                    Formula::Forall(x.clone(), Box::new(body))
                } else {
                    Formula::Exists(x.clone(), Box::new(body))
                }
            }
        }
    }

    pub fn visit_free(&self, bound: &mut Vec<Var>, f: &mut dyn FnMut(&Var)) {
        match self {
            Formula::Lit(l) => l.atom.visit_vars(&mut |v| {
                if !bound.contains(v) {
                    f(v)
                }
            }),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.visit_free(bound, f);
                b.visit_free(bound, f);
            }
            Formula::Forall(x, a) | Formula::Exists(x, a) => {
                bound.push(x.clone());
                a.visit_free(bound, f);
                bound.pop();
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.visit_free(&mut Vec::new(), &mut |v| {
            out.insert(v.clone());
        });
        out
    }

    pub fn size(&self) -> usize {
        match self {
            Formula::Lit(_) => 1,
            Formula::And(a, b) | Formula::Or(a, b) => 1 + a.size() + b.size(),
            Formula::Forall(_, a) | Formula::Exists(_, a) => 1 + a.size(),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Lit(l) => write!(f, "{}", l),
            Formula::And(a, b) => write!(f, "({} & {})", a, b),
            Formula::Or(a, b) => write!(f, "({} | {})", a, b),
            Formula::Forall(x, a) => write!(f, "(forall {}. {})", x, a),
            Formula::Exists(x, a) => write!(f, "(exists {}. {})", x, a),
        }
    }
}

/// `A[x := t]` for the bound variable named `bound`.
pub fn substitute(
    formula: &Formula,
    bound: &str,
    replacement: &Term,
) -> Result<Formula, LogicError> {
    let mut mismatch = None;
    formula.visit_free(&mut Vec::new(), &mut |v| {
        if v.kind == VarKind::Bound && &*v.name == bound && v.sort != replacement.sort() {
            mismatch = Some(v.sort);
        }
    });
    if let Some(expected) = mismatch {
        return Err(LogicError::SortMismatch {
            what: bound.to_string(),
            expected,
            found: replacement.sort(),
        });
    }
    Ok(formula.map_free(&mut |v| {
        if v.kind == VarKind::Bound && &*v.name == bound {
            Some(replacement.clone())
        } else {
            None
        }
    }))
}

/// The literal members of a context, without duplicates, in first-occurrence order.
pub fn literals_of(ctx: &[Formula]) -> Vec<Literal> {
    let mut out: Vec<Literal> = Vec::new();
    for f in ctx {
        if let Formula::Lit(l) = f {
            if !out.contains(l) {
                out.push(l.clone());
            }
        }
    }
    out
}

pub fn check_sort(t: &Term, expected: Sort, what: &str) -> Result<(), LogicError> {
    if t.sort() == expected {
        Ok(())
    } else {
        Err(LogicError::SortMismatch {
            what: what.to_string(),
            expected,
            found: t.sort(),
        })
    }
}
