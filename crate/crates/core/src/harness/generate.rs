use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::universe::{OracleUniverse, UniverseKind};
use crate::logic::{ratio, Atom, Domain, LinExpr, Literal, Rat, Rel, Term, Var};
use crate::theory::{Theory, TheoryError};

/// Random literal sets and constraints drawn from real leaf closures.
pub struct Gen<'a, T: Theory> {
    pub theory: &'a T,
    pub universe: &'a OracleUniverse,
    pub rng: ChaCha8Rng,
}

impl<'a, T: Theory> Gen<'a, T> {
    fn pick<X: Clone>(&mut self, xs: &[X]) -> X {
        xs[self.rng.random_range(0..xs.len())].clone()
    }

    fn fo_term(&mut self, d: &Domain, depth: usize) -> Term {
        let mut atoms: Vec<Term> = d
            .metas()
            .into_iter()
            .chain(d.eigens())
            .map(|v| Term::Var(v.clone()))
            .collect();
        atoms.push(Term::constant("a"));
        atoms.push(Term::constant("b"));
        if depth > 0 && self.rng.random_bool(0.3) {
            return Term::app("f", vec![self.fo_term(d, depth - 1)]);
        }
        self.pick(&atoms)
    }

    fn rat_const(&mut self) -> Rat {
        self.pick(&[
            ratio(-1, 1),
            ratio(0, 1),
            ratio(1, 2),
            ratio(1, 1),
            ratio(2, 1),
            ratio(15, 1),
        ])
    }

    fn rat_term(&mut self, d: &Domain) -> Term {
        let metas: Vec<Var> = d.metas().into_iter().cloned().collect();
        if !metas.is_empty() && self.rng.random_bool(0.6) {
            Term::Var(self.pick(&metas))
        } else {
            Term::Num(self.rat_const())
        }
    }

    fn lin(&mut self, d: &Domain) -> LinExpr {
        let metas: Vec<Var> = d.metas().into_iter().cloned().collect();
        let mut e = LinExpr::zero();
        for _ in 0..self.rng.random_range(1..3) {
            if metas.is_empty() {
                break;
            }
            let v = self.pick(&metas);
            let c = self.pick(&[ratio(-2, 1), ratio(-1, 1), ratio(1, 1), ratio(2, 1)]);
            e.add_term(v, c);
        }
        if self.rng.random_bool(0.7) {
            e.constant = self.rat_const();
        }
        e
    }

    /// A small literal set with at least one dual pair most of the time.
    pub fn literals(&mut self, d: &Domain) -> Vec<Literal> {
        let mut out = Vec::new();
        match self.universe.kind {
            UniverseKind::FirstOrder => {
                for _ in 0..self.rng.random_range(1..3) {
                    let (p, n) = if self.rng.random_bool(0.6) {
                        ("p", 1)
                    } else {
                        ("q", 2)
                    };
                    let mut args = || (0..n).map(|_| self.fo_term(d, 1)).collect::<Vec<_>>();
                    let pos = Literal::pred(p, args());
                    let neg = Literal::pred(p, args()).negate();
                    out.push(pos);
                    out.push(neg);
                }
                if self.rng.random_bool(0.3) {
                    out.push(Literal::pred("p", vec![self.fo_term(d, 1)]));
                }
            }
            UniverseKind::Rational => {
                if self.rng.random_bool(0.5) {
                    out.push(Literal::pred("p", vec![self.rat_term(d)]));
                    out.push(Literal::pred("p", vec![self.rat_term(d)]).negate());
                }
                for _ in 0..self.rng.random_range(1..3) {
                    let rel = self.pick(&[Rel::Le, Rel::Lt, Rel::Eq]);
                    let (l, r) = (self.lin(d), self.lin(d));
                    out.push(Literal::pos(Atom::Cmp(l, rel, r)));
                }
            }
        }
        // shuffle so that streams see pairs in varied orders
        for i in (1..out.len()).rev() {
            let j = self.rng.random_range(0..=i);
            out.swap(i, j);
        }
        out
    }

    /// One of the first few closures of a random leaf, pulled from `top`.
    fn closure(&mut self, d: &Domain) -> Result<Option<T::Constraint>, TheoryError> {
        let lits = self.literals(d);
        let top = self.theory.top(d);
        let mut stream = self.theory.consistency(&lits, d);
        let skip = self.rng.random_range(0..3);
        let mut last = None;
        for _ in 0..=skip {
            match stream.pull(&top)? {
                Some(c) => last = Some(c.out),
                None => break,
            }
        }
        Ok(last)
    }

    /// A constraint of domain `d`: a closure, possibly combined by meets,
    /// lifts and projections with other generated constraints.
    pub fn constraint(&mut self, d: &Domain) -> Result<Option<T::Constraint>, TheoryError> {
        self.constraint_with(d, 2)
    }

    fn constraint_with(
        &mut self,
        d: &Domain,
        fuel: usize,
    ) -> Result<Option<T::Constraint>, TheoryError> {
        if d.metas().is_empty() {
            return Ok(Some(self.theory.top(d)));
        }
        let choice = if fuel == 0 {
            0
        } else {
            self.rng.random_range(0..6)
        };
        match choice {
            0..=2 => self.closure(d),
            3 => {
                let Some(a) = self.constraint_with(d, fuel - 1)? else {
                    return Ok(None);
                };
                let Some(b) = self.constraint_with(d, fuel - 1)? else {
                    return Ok(None);
                };
                self.theory.meet(&a, &b, d)
            }
            4 => {
                // lift from the domain without the newest meta
                let x = d.last_meta().expect("domain has metas").clone();
                let below = d.without_meta(&x.name);
                let Some(s) = self.constraint_with(&below, fuel - 1)? else {
                    return Ok(None);
                };
                self.theory.lift(&s, &x.name, d).map(Some)
            }
            _ => {
                // project from the next level up, when there is one
                let above = self
                    .universe
                    .levels
                    .iter()
                    .find(|l| l.base.metas() == d.metas())
                    .map(|l| l.domain.clone());
                match above {
                    Some(up) => {
                        let x = up.last_meta().expect("level meta").name.clone();
                        let Some(s) = self.constraint_with(&up, fuel - 1)? else {
                            return Ok(None);
                        };
                        self.theory.project(&s, &x, &up).map(Some)
                    }
                    None => self.closure(d),
                }
            }
        }
    }

    /// Retries until a constraint comes out; `None` after a few empty draws.
    pub fn some_constraint(&mut self, d: &Domain) -> Result<Option<T::Constraint>, TheoryError> {
        for _ in 0..8 {
            if let Some(c) = self.constraint(d)? {
                return Ok(Some(c));
            }
        }
        Ok(None)
    }
}
