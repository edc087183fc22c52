use std::collections::BTreeMap;

use thiserror::Error;

use super::sexp::{read_all, Pos, Sexp};
use crate::logic::{name, parse_rat, Atom, LinExpr, Name, Rat, Rel, Signature, Sort, Term, Var};

/// Goal formula before normalisation: negation and implication anywhere.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Surface {
    Atom(Atom),
    Not(Box<Surface>),
    And(Vec<Surface>),
    Or(Vec<Surface>),
    Implies(Box<Surface>, Box<Surface>),
    Forall(Var, Box<Surface>),
    Exists(Var, Box<Surface>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProblemFile {
    pub signature: Signature,
    pub goal: Surface,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("{pos}: undeclared symbol {name}")]
    Undeclared { pos: Pos, name: String },
    #[error("{pos}: {name} expects {expected} argument(s), got {found}")]
    Arity {
        pos: Pos,
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("{pos}: sort error: {msg}")]
    Sort { pos: Pos, msg: String },
}

fn syntax(pos: Pos, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        pos,
        msg: msg.into(),
    }
}

const RESERVED: &[&str] = &[
    "and",
    "or",
    "not",
    "implies",
    "forall",
    "exists",
    "+",
    "-",
    "*",
    "<=",
    "<",
    "=",
    ">=",
    ">",
    "goal",
    "declare-pred",
    "declare-fun",
    "declare-const",
    "u",
    "rat",
];

fn check_ident(s: &str, pos: Pos) -> Result<(), ParseError> {
    let ok = !s.is_empty()
        && !RESERVED.contains(&s)
        && parse_rat(s).is_none()
        && s.chars().all(|c| c.is_alphanumeric() || "_'.-".contains(c))
        && !s.starts_with(|c: char| c.is_ascii_digit() || c == '-');
    if ok {
        Ok(())
    } else {
        Err(syntax(pos, format!("invalid identifier {:?}", s)))
    }
}

fn parse_sort(s: &Sexp) -> Result<Sort, ParseError> {
    match s.atom() {
        Some("u") => Ok(Sort::Uninterpreted),
        Some("rat") => Ok(Sort::Rational),
        _ => Err(syntax(s.pos(), "expected sort u or rat")),
    }
}

/// Sort variables: one per binder, constant and predicate position.
#[derive(Default)]
struct Sorts {
    parent: Vec<usize>,
    fixed: Vec<Option<Sort>>,
}

impl Sorts {
    fn fresh(&mut self, s: Option<Sort>) -> usize {
        self.parent.push(self.parent.len());
        self.fixed.push(s);
        self.parent.len() - 1
    }

    fn root(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn fix(&mut self, i: usize, s: Sort, pos: Pos, what: &str) -> Result<(), ParseError> {
        let r = self.root(i);
        match self.fixed[r] {
            Some(t) if t != s => Err(ParseError::Sort {
                pos,
                msg: format!("{} used as {} and as {}", what, t, s),
            }),
            _ => {
                self.fixed[r] = Some(s);
                Ok(())
            }
        }
    }

    fn union(&mut self, a: usize, b: usize, pos: Pos, what: &str) -> Result<(), ParseError> {
        let (ra, rb) = (self.root(a), self.root(b));
        if ra == rb {
            return Ok(());
        }
        if let (Some(x), Some(y)) = (self.fixed[ra], self.fixed[rb]) {
            if x != y {
                return Err(ParseError::Sort {
                    pos,
                    msg: format!("{} used as {} and as {}", what, x, y),
                });
            }
        }
        let s = self.fixed[ra].or(self.fixed[rb]);
        self.parent[rb] = ra;
        self.fixed[ra] = s;
        Ok(())
    }

    fn get(&mut self, i: usize) -> Sort {
        let r = self.root(i);
        self.fixed[r].unwrap_or(Sort::Uninterpreted)
    }
}

#[derive(Clone, Debug)]
enum UTerm {
    Bound(usize, Name),
    Const(usize, Name),
    Num(Rat),
    App(Name, Vec<UTerm>),
    /// Σ cᵢ·tᵢ + c
    Arith(Vec<(Rat, UTerm)>, Rat),
}

#[derive(Clone, Debug)]
enum UForm {
    Pred(Name, Vec<UTerm>),
    Cmp(UTerm, Rel, UTerm),
    Not(Box<UForm>),
    And(Vec<UForm>),
    Or(Vec<UForm>),
    Implies(Box<UForm>, Box<UForm>),
    Quant(bool, usize, Name, Box<UForm>),
}

struct Parser {
    preds: BTreeMap<Name, (usize, Vec<usize>)>,
    funs: BTreeMap<Name, usize>,
    consts: Vec<(Name, usize)>,
    sorts: Sorts,
}

impl Parser {
    fn declared(&self, n: &str) -> bool {
        self.preds.contains_key(n)
            || self.funs.contains_key(n)
            || self.consts.iter().any(|(c, _)| &**c == n)
    }

    fn declare(&mut self, items: &[Sexp], pos: Pos) -> Result<(), ParseError> {
        let head = items[0].atom().unwrap_or_default();
        let sym = items
            .get(1)
            .ok_or_else(|| syntax(pos, format!("{} needs a symbol", head)))?;
        let n = sym
            .atom()
            .ok_or_else(|| syntax(sym.pos(), "expected a symbol"))?;
        check_ident(n, sym.pos())?;
        if self.declared(n) {
            return Err(syntax(sym.pos(), format!("{} is declared twice", n)));
        }
        let arity = |i: usize| -> Result<usize, ParseError> {
            let a = items
                .get(i)
                .ok_or_else(|| syntax(pos, format!("{} needs an arity", head)))?;
            a.atom()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| syntax(a.pos(), "expected an arity"))
        };
        match head {
            "declare-pred" => {
                let k = arity(2)?;
                if items.len() != 3 {
                    return Err(syntax(pos, "expected (declare-pred name arity)"));
                }
                let slots = (0..k).map(|_| self.sorts.fresh(None)).collect();
                self.preds.insert(name(n), (k, slots));
            }
            "declare-fun" => {
                let k = arity(2)?;
                if items.len() != 3 {
                    return Err(syntax(pos, "expected (declare-fun name arity)"));
                }
                self.funs.insert(name(n), k);
            }
            _ => {
                let sort = match items.len() {
                    2 => None,
                    3 => Some(parse_sort(&items[2])?),
                    _ => return Err(syntax(pos, "expected (declare-const name [sort])")),
                };
                let slot = self.sorts.fresh(sort);
                self.consts.push((name(n), slot));
            }
        }
        Ok(())
    }

    /// Binder names are kept unless they clash with a declared symbol or an
    /// enclosing binder.
    fn fresh_binder(&self, base: &str, scope: &[(Name, Name, usize)]) -> String {
        let clash =
            |s: &str| self.declared(s) || scope.iter().any(|(o, r, _)| &**o == s || &**r == s);
        if !clash(base) {
            return base.to_string();
        }
        (1..)
            .map(|k| format!("{}_{}", base, k))
            .find(|c| !clash(c))
            .unwrap()
    }

    fn sort_of(&mut self, t: &UTerm) -> Option<Sort> {
        match t {
            UTerm::Bound(s, _) | UTerm::Const(s, _) => {
                let r = self.sorts.root(*s);
                self.sorts.fixed[r]
            }
            UTerm::Num(_) | UTerm::Arith(..) => Some(Sort::Rational),
            UTerm::App(..) => Some(Sort::Uninterpreted),
        }
    }

    fn expect(&mut self, t: &UTerm, s: Sort, pos: Pos) -> Result<(), ParseError> {
        match t {
            UTerm::Bound(i, n) | UTerm::Const(i, n) => self.sorts.fix(*i, s, pos, n),
            _ => match self.sort_of(t) {
                Some(found) if found != s => Err(ParseError::Sort {
                    pos,
                    msg: format!("expected a term of sort {}, found {}", s, found),
                }),
                _ => Ok(()),
            },
        }
    }

    fn link(&mut self, t: &UTerm, slot: usize, pos: Pos, what: &str) -> Result<(), ParseError> {
        match t {
            UTerm::Bound(i, _) | UTerm::Const(i, _) => self.sorts.union(*i, slot, pos, what),
            _ => {
                let s = self.sort_of(t).expect("compound terms have a sort");
                self.sorts.fix(slot, s, pos, what)
            }
        }
    }

    fn term(&mut self, s: &Sexp, scope: &[(Name, Name, usize)]) -> Result<UTerm, ParseError> {
        match s {
            Sexp::Atom(a, pos) => {
                if let Some(r) = parse_rat(a) {
                    return Ok(UTerm::Num(r));
                }
                if let Some((_, renamed, slot)) =
                    scope.iter().rev().find(|(orig, _, _)| &**orig == a)
                {
                    return Ok(UTerm::Bound(*slot, renamed.clone()));
                }
                if let Some((c, slot)) = self.consts.iter().find(|(c, _)| &**c == a) {
                    return Ok(UTerm::Const(*slot, c.clone()));
                }
                match self.funs.get(a.as_str()) {
                    Some(0) => Ok(UTerm::App(name(a), Vec::new())),
                    Some(&k) => Err(ParseError::Arity {
                        pos: *pos,
                        name: a.clone(),
                        expected: k,
                        found: 0,
                    }),
                    None => Err(ParseError::Undeclared {
                        pos: *pos,
                        name: a.clone(),
                    }),
                }
            }
            Sexp::List(items, pos) => {
                let head = items
                    .first()
                    .and_then(Sexp::atom)
                    .ok_or_else(|| syntax(*pos, "expected a term"))?;
                let args = &items[1..];
                match head {
                    "+" | "-" => {
                        if args.is_empty() {
                            return Err(syntax(*pos, format!("{} needs arguments", head)));
                        }
                        let mut parts = Vec::new();
                        for (i, a) in args.iter().enumerate() {
                            let t = self.term(a, scope)?;
                            self.expect(&t, Sort::Rational, a.pos())?;
                            let neg = head == "-" && (i > 0 || args.len() == 1);
                            parts.push((Rat::from_integer((if neg { -1 } else { 1 }).into()), t));
                        }
                        Ok(UTerm::Arith(parts, Rat::from_integer(0.into())))
                    }
                    "*" => {
                        if args.len() != 2 {
                            return Err(syntax(*pos, "* takes a rational coefficient and a term"));
                        }
                        let (c, t) = match (
                            args[0].atom().and_then(parse_rat),
                            args[1].atom().and_then(parse_rat),
                        ) {
                            (Some(c), _) => (c, &args[1]),
                            (None, Some(c)) => (c, &args[0]),
                            _ => return Err(syntax(*pos, "nonlinear product")),
                        };
                        let t2 = self.term(t, scope)?;
                        self.expect(&t2, Sort::Rational, t.pos())?;
                        Ok(UTerm::Arith(vec![(c, t2)], Rat::from_integer(0.into())))
                    }
                    f => {
                        let k = *self.funs.get(f).ok_or_else(|| ParseError::Undeclared {
                            pos: *pos,
                            name: f.to_string(),
                        })?;
                        if k != args.len() {
                            return Err(ParseError::Arity {
                                pos: *pos,
                                name: f.to_string(),
                                expected: k,
                                found: args.len(),
                            });
                        }
                        let mut ts = Vec::new();
                        for a in args {
                            let t = self.term(a, scope)?;
                            self.expect(&t, Sort::Uninterpreted, a.pos())?;
                            ts.push(t);
                        }
                        Ok(UTerm::App(name(f), ts))
                    }
                }
            }
        }
    }

    fn pred(
        &mut self,
        p: &str,
        args: &[Sexp],
        pos: Pos,
        scope: &[(Name, Name, usize)],
    ) -> Result<UForm, ParseError> {
        let (k, slots) = self
            .preds
            .get(p)
            .cloned()
            .ok_or_else(|| ParseError::Undeclared {
                pos,
                name: p.to_string(),
            })?;
        if k != args.len() {
            return Err(ParseError::Arity {
                pos,
                name: p.to_string(),
                expected: k,
                found: args.len(),
            });
        }
        let mut ts = Vec::new();
        for (i, a) in args.iter().enumerate() {
            let t = self.term(a, scope)?;
            self.link(
                &t,
                slots[i],
                a.pos(),
                &format!("argument {} of {}", i + 1, p),
            )?;
            ts.push(t);
        }
        Ok(UForm::Pred(name(p), ts))
    }

    fn formula(
        &mut self,
        s: &Sexp,
        scope: &mut Vec<(Name, Name, usize)>,
    ) -> Result<UForm, ParseError> {
        let (items, pos) = match s {
            Sexp::Atom(a, pos) => return self.pred(a, &[], *pos, scope),
            Sexp::List(items, pos) => (items, *pos),
        };
        let head = items
            .first()
            .and_then(Sexp::atom)
            .ok_or_else(|| syntax(pos, "expected a formula"))?;
        let args = &items[1..];
        let arity = |n: usize| -> Result<(), ParseError> {
            if args.len() == n {
                Ok(())
            } else {
                Err(ParseError::Arity {
                    pos,
                    name: head.to_string(),
                    expected: n,
                    found: args.len(),
                })
            }
        };
        match head {
            "not" => {
                arity(1)?;
                Ok(UForm::Not(Box::new(self.formula(&args[0], scope)?)))
            }
            "implies" => {
                arity(2)?;
                let a = self.formula(&args[0], scope)?;
                let b = self.formula(&args[1], scope)?;
                Ok(UForm::Implies(Box::new(a), Box::new(b)))
            }
            "and" | "or" => {
                if args.is_empty() {
                    return Err(syntax(pos, format!("{} needs at least one argument", head)));
                }
                let fs = args
                    .iter()
                    .map(|a| self.formula(a, scope))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(if head == "and" {
                    UForm::And(fs)
                } else {
                    UForm::Or(fs)
                })
            }
            "forall" | "exists" => {
                arity(2)?;
                let (bname, bsort, bpos) = match &args[0] {
                    Sexp::Atom(a, p) => (a.clone(), None, *p),
                    Sexp::List(b, p) if b.len() == 2 => {
                        let a = b[0]
                            .atom()
                            .ok_or_else(|| syntax(*p, "expected a variable"))?;
                        (a.to_string(), Some(parse_sort(&b[1])?), *p)
                    }
                    other => return Err(syntax(other.pos(), "expected x or (x sort)")),
                };
                check_ident(&bname, bpos)?;
                let renamed = self.fresh_binder(&bname, scope);
                let slot = self.sorts.fresh(bsort);
                scope.push((name(&bname), name(&renamed), slot));
                let body = self.formula(&args[1], scope);
                scope.pop();
                Ok(UForm::Quant(
                    head == "forall",
                    slot,
                    name(&renamed),
                    Box::new(body?),
                ))
            }
            "<=" | "<" | "=" | ">=" | ">" => {
                if args.len() < 2 {
                    return Err(syntax(
                        pos,
                        format!("{} needs at least two arguments", head),
                    ));
                }
                let mut ts = Vec::new();
                for a in args {
                    let t = self.term(a, scope)?;
                    self.expect(&t, Sort::Rational, a.pos())?;
                    ts.push(t);
                }
                let mut atoms: Vec<UForm> = ts
                    .windows(2)
                    .map(|w| {
                        let (l, r) = (w[0].clone(), w[1].clone());
                        match head {
                            "<=" => UForm::Cmp(l, Rel::Le, r),
                            "<" => UForm::Cmp(l, Rel::Lt, r),
                            "=" => UForm::Cmp(l, Rel::Eq, r),
                            ">=" => UForm::Cmp(r, Rel::Le, l),
                            _ => UForm::Cmp(r, Rel::Lt, l),
                        }
                    })
                    .collect();
                Ok(if atoms.len() == 1 {
                    atoms.pop().unwrap()
                } else {
                    UForm::And(atoms)
                })
            }
            p => self.pred(p, args, pos, scope),
        }
    }

    fn build_term(&mut self, t: &UTerm) -> Term {
        match t {
            UTerm::Bound(slot, n) => Term::Var(Var::bound(n, self.sorts.get(*slot))),
            UTerm::Const(slot, n) => Term::Var(Var::eigen(n, self.sorts.get(*slot))),
            UTerm::Num(r) => Term::Num(r.clone()),
            UTerm::App(f, args) => {
                Term::App(f.clone(), args.iter().map(|a| self.build_term(a)).collect())
            }
            UTerm::Arith(..) => self.build_lin(t).into_term(),
        }
    }

    fn build_lin(&mut self, t: &UTerm) -> LinExpr {
        match t {
            UTerm::Arith(parts, c) => {
                let mut e = LinExpr::constant(c.clone());
                for (k, u) in parts {
                    e = e.add(&self.build_lin(u).scale(k));
                }
                e
            }
            _ => self.build_term(t).to_lin().expect("rational term"),
        }
    }

    fn build(&mut self, f: &UForm) -> Surface {
        match f {
            UForm::Pred(p, args) => Surface::Atom(Atom::Pred(
                p.clone(),
                args.iter().map(|a| self.build_term(a)).collect(),
            )),
            UForm::Cmp(l, r, h) => {
                Surface::Atom(Atom::Cmp(self.build_lin(l), *r, self.build_lin(h)))
            }
            UForm::Not(a) => Surface::Not(Box::new(self.build(a))),
            UForm::And(fs) => Surface::And(fs.iter().map(|g| self.build(g)).collect()),
            UForm::Or(fs) => Surface::Or(fs.iter().map(|g| self.build(g)).collect()),
            UForm::Implies(a, b) => {
                Surface::Implies(Box::new(self.build(a)), Box::new(self.build(b)))
            }
            UForm::Quant(all, slot, n, body) => {
                let v = Var::bound(n, self.sorts.get(*slot));
                let b = Box::new(self.build(body));
                if *all {
                    Surface::Forall(v, b)
                } else {
                    Surface::Exists(v, b)
                }
            }
        }
    }
}

pub fn parse(text: &str) -> Result<ProblemFile, ParseError> {
    let forms = read_all(text).map_err(|(pos, msg)| syntax(pos, msg))?;
    let mut p = Parser {
        preds: BTreeMap::new(),
        funs: BTreeMap::new(),
        consts: Vec::new(),
        sorts: Sorts::default(),
    };
    let mut goal = None;
    for f in &forms {
        let Sexp::List(items, pos) = f else {
            return Err(syntax(f.pos(), "expected a declaration or (goal ...)"));
        };
        match items.first().and_then(Sexp::atom) {
            Some("declare-pred" | "declare-fun" | "declare-const") => {
                if goal.is_some() {
                    return Err(syntax(*pos, "declarations must precede the goal"));
                }
                p.declare(items, *pos)?;
            }
            Some("goal") => {
                if goal.is_some() {
                    return Err(syntax(*pos, "only one goal is allowed"));
                }
                if items.len() != 2 {
                    return Err(syntax(*pos, "expected (goal formula)"));
                }
                goal = Some(p.formula(&items[1], &mut Vec::new())?);
            }
            _ => return Err(syntax(*pos, "expected a declaration or (goal ...)")),
        }
    }
    let goal = goal.ok_or_else(|| syntax(Pos { line: 1, col: 1 }, "missing (goal ...)"))?;
    let surface = p.build(&goal);
    let mut sig = Signature::default();
    for (n, (_, slots)) in p.preds.clone() {
        let sorts = slots.iter().map(|s| p.sorts.get(*s)).collect();
        sig.preds.insert(n, sorts);
    }
    sig.funs = p.funs.clone();
    for (n, slot) in p.consts.clone() {
        sig.constants.push(Var::eigen(&n, p.sorts.get(slot)));
    }
    Ok(ProblemFile {
        signature: sig,
        goal: surface,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_excluded_middle() {
        let pf = parse("(declare-pred p 1) (goal (exists x (or (p x) (not (p x)))))").unwrap();
        let Surface::Exists(x, _) = &pf.goal else {
            panic!()
        };
        assert_eq!(x.sort, Sort::Uninterpreted);
        assert_eq!(pf.signature.preds[&name("p")], vec![Sort::Uninterpreted]);
    }

    #[test]
    fn arity_errors_are_positioned() {
        let e = parse("(declare-pred p 2)\n(goal (p x y z))").unwrap_err();
        assert!(
            matches!(
                e,
                ParseError::Arity {
                    expected: 2,
                    found: 3,
                    pos: Pos { line: 2, .. },
                    ..
                }
            ),
            "{e}"
        );
    }

    #[test]
    fn undeclared_symbols_are_reported() {
        assert!(matches!(
            parse("(goal (q a))"),
            Err(ParseError::Undeclared { .. })
        ));
        assert!(matches!(
            parse("(declare-pred q 1) (goal (q a))"),
            Err(ParseError::Undeclared { .. })
        ));
    }

    #[test]
    fn arithmetic_use_makes_variables_rational() {
        let pf = parse(
            "(declare-pred p 2) (goal (exists x (exists y (and (p x y) (<= (* 3 x) (* 2 y))))))",
        )
        .unwrap();
        assert_eq!(
            pf.signature.preds[&name("p")],
            vec![Sort::Rational, Sort::Rational]
        );
    }

    #[test]
    fn sort_conflicts_are_rejected() {
        let e =
            parse("(declare-pred p 1) (declare-fun f 1) (goal (exists x (and (p (f x)) (p 1))))")
                .unwrap_err();
        assert!(matches!(e, ParseError::Sort { .. }), "{e}");
    }

    #[test]
    fn chained_comparisons_split() {
        let pf = parse("(goal (forall x (<= 0 x 1)))").unwrap();
        let Surface::Forall(_, body) = &pf.goal else {
            panic!()
        };
        assert!(matches!(&**body, Surface::And(v) if v.len() == 2));
    }

    #[test]
    fn clashing_binders_are_renamed() {
        let pf = parse("(declare-const a) (declare-pred p 1) (goal (exists a (p a)))").unwrap();
        let Surface::Exists(v, _) = &pf.goal else {
            panic!()
        };
        assert_eq!(&*v.name, "a_1");
    }
}
