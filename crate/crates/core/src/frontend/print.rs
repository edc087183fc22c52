use std::fmt;

use num_traits::{One, Zero};

use super::parse::{ProblemFile, Surface};
use crate::logic::{fmt_rat, Atom, LinExpr, Term};

pub fn print_lin(e: &LinExpr) -> String {
    let mut parts: Vec<String> = e
        .coeffs
        .iter()
        .map(|(v, c)| {
            if c.is_one() {
                v.name.to_string()
            } else {
                format!("(* {} {})", fmt_rat(c), v.name)
            }
        })
        .collect();
    if !e.constant.is_zero() || parts.is_empty() {
        parts.push(fmt_rat(&e.constant));
    }
    if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        format!("(+ {})", parts.join(" "))
    }
}

pub fn print_term(t: &Term) -> String {
    match t {
        Term::Var(v) => v.name.to_string(),
        Term::Num(r) => fmt_rat(r),
        Term::App(f, args) if args.is_empty() => f.to_string(),
        Term::App(f, args) => {
            let a: Vec<String> = args.iter().map(print_term).collect();
            format!("({} {})", f, a.join(" "))
        }
        Term::Lin(e) => print_lin(e),
    }
}

pub fn print_atom(a: &Atom) -> String {
    match a {
        Atom::Pred(p, args) if args.is_empty() => p.to_string(),
        Atom::Pred(p, args) => {
            let a: Vec<String> = args.iter().map(print_term).collect();
            format!("({} {})", p, a.join(" "))
        }
        Atom::Cmp(l, r, h) => format!("({} {} {})", r.symbol(), print_lin(l), print_lin(h)),
    }
}

pub fn print_surface(f: &Surface) -> String {
    let many = |op: &str, fs: &[Surface]| {
        let a: Vec<String> = fs.iter().map(print_surface).collect();
        format!("({} {})", op, a.join(" "))
    };
    match f {
        Surface::Atom(a) => print_atom(a),
        Surface::Not(a) => format!("(not {})", print_surface(a)),
        Surface::And(fs) => many("and", fs),
        Surface::Or(fs) => many("or", fs),
        Surface::Implies(a, b) => format!("(implies {} {})", print_surface(a), print_surface(b)),
        Surface::Forall(x, b) => format!("(forall ({} {}) {})", x.name, x.sort, print_surface(b)),
        Surface::Exists(x, b) => format!("(exists ({} {}) {})", x.name, x.sort, print_surface(b)),
    }
}

pub fn print_problem(p: &ProblemFile) -> String {
    let mut out = String::new();
    for (n, sorts) in &p.signature.preds {
        out.push_str(&format!("(declare-pred {} {})\n", n, sorts.len()));
    }
    for (n, k) in &p.signature.funs {
        out.push_str(&format!("(declare-fun {} {})\n", n, k));
    }
    for c in &p.signature.constants {
        out.push_str(&format!("(declare-const {} {})\n", c.name, c.sort));
    }
    out.push_str(&format!("(goal {})\n", print_surface(&p.goal)));
    out
}

impl fmt::Display for Surface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_surface(self))
    }
}
