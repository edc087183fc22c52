use std::collections::{BTreeMap, BTreeSet};

use crate::logic::{
    default_rational_samples, enumerate_ground_terms, name, Domain, Instantiation, LogicError, Rat,
    Signature, Sort, Term, Var,
};
use crate::theory::{Theory, TheoryError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UniverseKind {
    /// Uninterpreted sort only: constants, a unary function, one eigenvariable between metas.
    FirstOrder,
    /// Rational metas over a fixed sample set.
    Rational,
}

/// One level of the universe: a domain whose newest meta is `meta`, and the
/// domain `base` it extends.
#[derive(Clone, Debug)]
pub struct Level {
    pub domain: Domain,
    pub base: Domain,
    pub meta: Var,
    /// Candidate terms for `meta`.
    pub terms: Vec<Term>,
    /// Bounded `Inst` of `domain`, and of `base`.
    pub insts: Vec<Instantiation>,
    pub base_insts: Vec<Instantiation>,
}

#[derive(Clone, Debug)]
pub struct OracleUniverse {
    pub kind: UniverseKind,
    pub signature: Signature,
    pub depth: usize,
    pub samples: Vec<Rat>,
    pub levels: Vec<Level>,
}

fn product(d: &Domain, per_meta: &[(Var, Vec<Term>)]) -> Result<Vec<Instantiation>, LogicError> {
    if per_meta.iter().any(|(_, ts)| ts.is_empty()) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; per_meta.len()];
    loop {
        let map: BTreeMap<_, _> = per_meta
            .iter()
            .zip(&idx)
            .map(|((v, ts), &i)| (v.name.clone(), ts[i].clone()))
            .collect();
        out.push(Instantiation::new(map, d)?);
        // mixed-radix odometer
        let mut pos = per_meta.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < per_meta[pos].1.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

impl OracleUniverse {
    /// Levels for each meta in `steps`; eigenvariables in `steps` are declared in place.
    pub fn build(
        kind: UniverseKind,
        signature: Signature,
        depth: usize,
        samples: Vec<Rat>,
        steps: &[Var],
    ) -> OracleUniverse {
        let mut d = signature.initial_domain();
        let mut levels = Vec::new();
        let mut per_meta: Vec<(Var, Vec<Term>)> = Vec::new();
        for v in steps {
            if v.kind == crate::logic::VarKind::Eigen {
                d = d.add_eigen(v.clone()).expect("fresh eigenvariable");
                continue;
            }
            let base = d.clone();
            let base_insts = product(&base, &per_meta).expect("valid instantiations");
            d = d.add_meta(v.clone()).expect("fresh meta-variable");
            let terms = enumerate_ground_terms(&signature, &d, &v.name, depth, &samples)
                .expect("declared meta");
            per_meta.push((v.clone(), terms.clone()));
            let insts = product(&d, &per_meta).expect("valid instantiations");
            levels.push(Level {
                domain: d.clone(),
                base,
                meta: v.clone(),
                terms,
                insts,
                base_insts,
            });
        }
        OracleUniverse {
            kind,
            signature,
            depth,
            samples,
            levels,
        }
    }

    /// Constants a, b and a unary f; X, then an eigenvariable y, then Y and Z.
    pub fn first_order(depth: usize) -> OracleUniverse {
        let sig = Signature::with_funs(&[("a", 0), ("b", 0), ("f", 1)]);
        let u = Sort::Uninterpreted;
        let steps = [
            Var::meta("X", u),
            Var::eigen("y", u),
            Var::meta("Y", u),
            Var::meta("Z", u),
        ];
        OracleUniverse::build(UniverseKind::FirstOrder, sig, depth, Vec::new(), &steps)
    }

    /// Rational metas X, Y, Z over the sample set, after the default eigenvariable.
    pub fn rational(samples: Vec<Rat>) -> OracleUniverse {
        let r = Sort::Rational;
        let steps = [Var::meta("X", r), Var::meta("Y", r), Var::meta("Z", r)];
        let mut sig = Signature::default();
        sig.preds.insert(name("p"), vec![r]);
        OracleUniverse::build(UniverseKind::Rational, sig, 0, samples, &steps)
    }

    pub fn default_for(kind: UniverseKind) -> OracleUniverse {
        match kind {
            UniverseKind::FirstOrder => OracleUniverse::first_order(2),
            UniverseKind::Rational => OracleUniverse::rational(default_rational_samples()),
        }
    }

    /// Instantiations of `d` for any domain appearing in the universe.
    pub fn insts_of(&self, d: &Domain) -> &[Instantiation] {
        for l in &self.levels {
            if l.domain.metas() == d.metas() {
                return &l.insts;
            }
            if l.base.metas() == d.metas() {
                return &l.base_insts;
            }
        }
        panic!("domain {} is not part of the universe", d)
    }
}

/// Indices of the instantiations of `d` (in universe order) compatible with `sigma`.
pub fn oracle_compatibles<T: Theory>(
    theory: &T,
    sigma: &T::Constraint,
    u: &OracleUniverse,
    d: &Domain,
) -> Result<BTreeSet<usize>, TheoryError> {
    let mut out = BTreeSet::new();
    for (i, rho) in u.insts_of(d).iter().enumerate() {
        if theory.compatible(rho, sigma, d)? {
            out.insert(i);
        }
    }
    Ok(out)
}

/// Same as `oracle_compatibles` for an optional constraint (`None` is unsatisfiable).
pub fn oracle_set<T: Theory>(
    theory: &T,
    sigma: Option<&T::Constraint>,
    u: &OracleUniverse,
    d: &Domain,
) -> Result<BTreeSet<usize>, TheoryError> {
    match sigma {
        Some(s) => oracle_compatibles(theory, s, u, d),
        None => Ok(BTreeSet::new()),
    }
}
