use super::parse::Surface;
use crate::logic::{Atom, Formula, Literal, Rel};

fn fold(fs: Vec<Formula>, join: fn(Formula, Formula) -> Formula) -> Formula {
    fs.into_iter()
        .rev()
        .reduce(|acc, f| join(f, acc))
        .expect("connectives have at least one argument")
}

fn negated_atom(a: &Atom) -> Formula {
    match a {
        Atom::Pred(..) => Formula::Lit(Literal::neg_of(a.clone())),
        Atom::Cmp(l, Rel::Le, r) => {
            Formula::Lit(Literal::pos(Atom::Cmp(r.clone(), Rel::Lt, l.clone())))
        }
        Atom::Cmp(l, Rel::Lt, r) => {
            Formula::Lit(Literal::pos(Atom::Cmp(r.clone(), Rel::Le, l.clone())))
        }
        Atom::Cmp(l, Rel::Eq, r) => Formula::or(
            Formula::Lit(Literal::pos(Atom::Cmp(l.clone(), Rel::Lt, r.clone()))),
            Formula::Lit(Literal::pos(Atom::Cmp(r.clone(), Rel::Lt, l.clone()))),
        ),
    }
}

/// Negation normal form. Arithmetic atoms never appear negated in the result;
/// n-ary connectives nest to the right.
pub fn to_nnf(f: &Surface) -> Formula {
    nnf(f, true)
}

fn nnf(f: &Surface, positive: bool) -> Formula {
    match (f, positive) {
        (Surface::Atom(a), true) => Formula::Lit(Literal::pos(a.clone())),
        (Surface::Atom(a), false) => negated_atom(a),
        (Surface::Not(a), p) => nnf(a, !p),
        (Surface::And(fs), true) | (Surface::Or(fs), false) => {
            fold(fs.iter().map(|g| nnf(g, positive)).collect(), Formula::and)
        }
        (Surface::Or(fs), true) | (Surface::And(fs), false) => {
            fold(fs.iter().map(|g| nnf(g, positive)).collect(), Formula::or)
        }
        (Surface::Implies(a, b), true) => Formula::or(nnf(a, false), nnf(b, true)),
        (Surface::Implies(a, b), false) => Formula::and(nnf(a, true), nnf(b, false)),
        (Surface::Forall(x, b), true) | (Surface::Exists(x, b), false) => {
            Formula::Forall(x.clone(), Box::new(nnf(b, positive)))
        }
        (Surface::Exists(x, b), true) | (Surface::Forall(x, b), false) => {
            Formula::Exists(x.clone(), Box::new(nnf(b, positive)))
        }
    }
}
