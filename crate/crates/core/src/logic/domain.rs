use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};

use super::formula::{Formula, Literal};
use super::term::{name, rat, ratio, Name, Rat, Sort, Term, Var, VarKind};
use super::LogicError;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Decl {
    Eigen(Var),
    /// The meta-variable and the number of eigenvariables declared before it.
    Meta(Var, usize),
}

/// The `(Φ;Δ)` record. Authorised sets are implied by declaration order:
/// a meta-variable may mention exactly the eigenvariables declared before it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Domain {
    decls: Vec<Decl>,
}

impl Domain {
    pub fn initial(eigens: impl IntoIterator<Item = Var>) -> Result<Domain, LogicError> {
        let mut d = Domain::default();
        for v in eigens {
            d = d.add_eigen(v)?;
        }
        Ok(d)
    }

    fn decl_name(decl: &Decl) -> &Name {
        match decl {
            Decl::Eigen(v) | Decl::Meta(v, _) => &v.name,
        }
    }

    pub fn contains(&self, n: &str) -> bool {
        self.decls.iter().any(|d| &**Domain::decl_name(d) == n)
    }

    fn eigen_count(&self) -> usize {
        self.decls
            .iter()
            .filter(|d| matches!(d, Decl::Eigen(_)))
            .count()
    }

    pub fn add_eigen(&self, v: Var) -> Result<Domain, LogicError> {
        if self.contains(&v.name) {
            return Err(LogicError::NameClash(v.name.to_string()));
        }
        let mut d = self.clone();
        d.decls.push(Decl::Eigen(Var {
            kind: VarKind::Eigen,
            ..v
        }));
        Ok(d)
    }

    pub fn add_meta(&self, v: Var) -> Result<Domain, LogicError> {
        if self.contains(&v.name) {
            return Err(LogicError::NameClash(v.name.to_string()));
        }
        let mut d = self.clone();
        let n = self.eigen_count();
        d.decls.push(Decl::Meta(
            Var {
                kind: VarKind::Meta,
                ..v
            },
            n,
        ));
        Ok(d)
    }

    pub fn eigens(&self) -> Vec<&Var> {
        self.decls
            .iter()
            .filter_map(|d| match d {
                Decl::Eigen(v) => Some(v),
                _ => None,
            })
            .collect()
    }

    pub fn metas(&self) -> Vec<&Var> {
        self.decls
            .iter()
            .filter_map(|d| match d {
                Decl::Meta(v, _) => Some(v),
                _ => None,
            })
            .collect()
    }

    pub fn meta(&self, n: &str) -> Option<&Var> {
        self.decls.iter().find_map(|d| match d {
            Decl::Meta(v, _) if &*v.name == n => Some(v),
            _ => None,
        })
    }

    pub fn eigen(&self, n: &str) -> Option<&Var> {
        self.decls.iter().find_map(|d| match d {
            Decl::Eigen(v) if &*v.name == n => Some(v),
            _ => None,
        })
    }

    pub fn last_meta(&self) -> Option<&Var> {
        self.metas().last().copied()
    }

    /// Declaration index of a meta-variable among metas; `None` if undeclared.
    pub fn meta_rank(&self, n: &str) -> Option<usize> {
        self.metas().iter().position(|v| &*v.name == n)
    }

    pub fn authorised(&self, meta: &str) -> Option<Vec<&Var>> {
        let count = self.decls.iter().find_map(|d| match d {
            Decl::Meta(v, k) if &*v.name == meta => Some(*k),
            _ => None,
        })?;
        Some(self.eigens().into_iter().take(count).collect())
    }

    pub fn is_authorised(&self, meta: &str, eigen: &str) -> bool {
        self.authorised(meta)
            .map(|a| a.iter().any(|v| &*v.name == eigen))
            .unwrap_or(false)
    }

    /// Drops a meta-variable declaration (eigenvariables are kept).
    pub fn without_meta(&self, meta: &str) -> Domain {
        Domain {
            decls: self
                .decls
                .iter()
                .filter(|d| !matches!(d, Decl::Meta(v, _) if &*v.name == meta))
                .cloned()
                .collect(),
        }
    }

    /// Keeps every eigenvariable but only the metas declared up to and including `meta`.
    pub fn truncate_after(&self, meta: &str) -> Domain {
        let mut keep = true;
        let mut decls = Vec::new();
        for d in &self.decls {
            match d {
                Decl::Meta(v, _) => {
                    if keep {
                        decls.push(d.clone());
                    }
                    if &*v.name == meta {
                        keep = false;
                    }
                }
                Decl::Eigen(_) => decls.push(d.clone()),
            }
        }
        Domain { decls }
    }

    /// Every eigen/meta variable mentioned by `f` is declared here.
    pub fn declares_all(&self, vars: &BTreeSet<Var>) -> Result<(), LogicError> {
        for v in vars {
            let ok = match v.kind {
                VarKind::Eigen => self.eigen(&v.name).is_some(),
                VarKind::Meta => self.meta(&v.name).is_some(),
                VarKind::Bound => false,
            };
            if !ok {
                return Err(LogicError::Undeclared(v.name.to_string()));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let eig: Vec<String> = self.eigens().iter().map(|v| v.name.to_string()).collect();
        write!(f, "({};", eig.join(","))?;
        let metas: Vec<String> = self
            .metas()
            .iter()
            .map(|m| {
                let auth: Vec<String> = self
                    .authorised(&m.name)
                    .unwrap_or_default()
                    .iter()
                    .map(|v| v.name.to_string())
                    .collect();
                format!("{}->{{{}}}", m.name, auth.join(","))
            })
            .collect();
        write!(f, " {})", metas.join(", "))
    }
}

impl Serialize for Domain {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        struct Metas<'a>(&'a Domain);
        impl Serialize for Metas<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                let metas = self.0.metas();
                let mut m = s.serialize_map(Some(metas.len()))?;
                for v in metas {
                    let auth: Vec<&str> = self
                        .0
                        .authorised(&v.name)
                        .unwrap_or_default()
                        .iter()
                        .map(|e| &*e.name)
                        .collect();
                    m.serialize_entry(&*v.name, &auth)?;
                }
                m.end()
            }
        }
        let mut st = s.serialize_struct("Domain", 2)?;
        let eig: Vec<&str> = self.eigens().iter().map(|v| &*v.name).collect();
        st.serialize_field("eigen", &eig)?;
        st.serialize_field("meta", &Metas(self))?;
        st.end()
    }
}

/// Ground, dependency-respecting assignment of terms to meta-variables.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Instantiation {
    map: BTreeMap<Name, Term>,
}

impl Instantiation {
    pub fn empty() -> Instantiation {
        Instantiation::default()
    }

    /// Builds and validates against `d`: complete, ground, dependency-respecting.
    pub fn new(map: BTreeMap<Name, Term>, d: &Domain) -> Result<Instantiation, LogicError> {
        let rho = Instantiation { map };
        rho.validate(d)?;
        Ok(rho)
    }

    /// No validation; callers guarantee the invariants.
    pub fn from_map_unchecked(map: BTreeMap<Name, Term>) -> Instantiation {
        Instantiation { map }
    }

    pub fn validate(&self, d: &Domain) -> Result<(), LogicError> {
        let metas = d.metas();
        if metas.len() != self.map.len() {
            return Err(LogicError::DomainMismatch(format!(
                "instantiation maps {} meta-variables, domain declares {}",
                self.map.len(),
                metas.len()
            )));
        }
        for m in metas {
            let t = self
                .map
                .get(&m.name)
                .ok_or_else(|| LogicError::DomainMismatch(format!("{} is not mapped", m.name)))?;
            if t.sort() != m.sort {
                return Err(LogicError::SortMismatch {
                    what: m.name.to_string(),
                    expected: m.sort,
                    found: t.sort(),
                });
            }
            for v in t.vars() {
                match v.kind {
                    VarKind::Eigen if d.is_authorised(&m.name, &v.name) => {}
                    VarKind::Eigen => {
                        return Err(LogicError::Dependency {
                            meta: m.name.to_string(),
                            eigen: v.name.to_string(),
                        })
                    }
                    _ => return Err(LogicError::NotGround(t.to_string())),
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, meta: &str) -> Option<&Term> {
        self.map.get(meta)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &Term)> {
        self.map.iter()
    }

    pub fn extended(&self, meta: &Name, t: Term) -> Instantiation {
        let mut map = self.map.clone();
        map.insert(meta.clone(), t);
        Instantiation { map }
    }

    pub fn restricted(&self, d: &Domain) -> Instantiation {
        let metas: BTreeSet<&str> = d.metas().iter().map(|v| &*v.name).collect();
        Instantiation {
            map: self
                .map
                .iter()
                .filter(|(k, _)| metas.contains(&***k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    fn lookup(&self, v: &Var, missing: &mut Option<String>) -> Option<Term> {
        if v.kind != VarKind::Meta {
            return None;
        }
        match self.map.get(&v.name) {
            Some(t) => Some(t.clone()),
            None => {
                missing.get_or_insert_with(|| v.name.to_string());
                None
            }
        }
    }

    pub fn apply_term(&self, t: &Term) -> Result<Term, LogicError> {
        let mut missing = None;
        let out = t.map_vars(&mut |v| self.lookup(v, &mut missing));
        match missing {
            Some(m) => Err(LogicError::DomainMismatch(format!("{} is not mapped", m))),
            None => Ok(out),
        }
    }

    pub fn apply_literal(&self, l: &Literal) -> Result<Literal, LogicError> {
        let mut missing = None;
        let out = l.map_vars(&mut |v| self.lookup(v, &mut missing));
        match missing {
            Some(m) => Err(LogicError::DomainMismatch(format!("{} is not mapped", m))),
            None => Ok(out),
        }
    }

    pub fn apply_formula(&self, f: &Formula) -> Result<Formula, LogicError> {
        let mut missing = None;
        let out = f.map_free(&mut |v| self.lookup(v, &mut missing));
        match missing {
            Some(m) => Err(LogicError::DomainMismatch(format!("{} is not mapped", m))),
            None => Ok(out),
        }
    }

    pub fn apply_context(&self, ctx: &[Formula]) -> Result<Vec<Formula>, LogicError> {
        ctx.iter().map(|f| self.apply_formula(f)).collect()
    }
}

impl fmt::Display for Instantiation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .map
            .iter()
            .map(|(k, v)| format!("{} -> {}", k, v))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

impl Serialize for Instantiation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.map.len()))?;
        for (k, v) in &self.map {
            m.serialize_entry(&**k, &v.to_string())?;
        }
        m.end()
    }
}

/// Declared symbols of a problem. Constants become the initial eigenvariables.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Signature {
    pub preds: BTreeMap<Name, Vec<Sort>>,
    pub funs: BTreeMap<Name, usize>,
    pub constants: Vec<Var>,
}

impl Signature {
    pub fn with_funs(funs: &[(&str, usize)]) -> Signature {
        Signature {
            funs: funs.iter().map(|(f, n)| (name(f), *n)).collect(),
            ..Signature::default()
        }
    }

    /// Starting domain: the declared constants, or a single `c0` when there are none.
    pub fn initial_domain(&self) -> Domain {
        let mut eigens: Vec<Var> = self.constants.clone();
        if !eigens.iter().any(|v| v.sort == Sort::Uninterpreted)
            && !self.funs.values().any(|&n| n == 0)
        {
            let mut fresh = String::from("c0");
            while eigens.iter().any(|v| *v.name == *fresh) || self.funs.contains_key(fresh.as_str())
            {
                fresh.push('\'');
            }
            eigens.push(Var::eigen(&fresh, Sort::Uninterpreted));
        }
        Domain::initial(eigens).expect("constants have distinct names")
    }
}

pub fn default_rational_samples() -> Vec<Rat> {
    vec![
        rat(-2),
        rat(-1),
        ratio(-1, 2),
        rat(0),
        ratio(1, 2),
        rat(1),
        rat(2),
        rat(15),
        rat(23),
        ratio(46, 3),
    ]
}

/// Ground terms of `meta`'s sort grouped by exact FunApp depth `0..=depth`.
pub fn ground_terms_by_depth(
    sig: &Signature,
    d: &Domain,
    meta: &str,
    depth: usize,
    samples: &[Rat],
) -> Result<Vec<Vec<Term>>, LogicError> {
    let m = d
        .meta(meta)
        .ok_or_else(|| LogicError::Undeclared(meta.to_string()))?;
    let auth = d.authorised(meta).unwrap_or_default();
    if m.sort == Sort::Rational {
        let mut level: Vec<Term> = samples.iter().map(|r| Term::Num(r.clone())).collect();
        level.extend(
            auth.iter()
                .filter(|v| v.sort == Sort::Rational)
                .map(|v| Term::Var((*v).clone())),
        );
        let mut out = vec![level];
        out.extend((0..depth).map(|_| Vec::new()));
        return Ok(out);
    }
    let mut level0: Vec<Term> = sig
        .funs
        .iter()
        .filter(|(_, &n)| n == 0)
        .map(|(f, _)| Term::App(f.clone(), Vec::new()))
        .collect();
    level0.extend(
        auth.iter()
            .filter(|v| v.sort == Sort::Uninterpreted)
            .map(|v| Term::Var((*v).clone())),
    );
    let mut levels = vec![level0];
    let mut all: Vec<Term> = levels[0].clone();
    for k in 1..=depth {
        let prev_start = all.len() - levels[k - 1].len();
        let mut level = Vec::new();
        for (f, &n) in sig.funs.iter().filter(|(_, &n)| n > 0) {
            if all.is_empty() {
                break;
            }
            // tuples of indices into `all`, kept when some argument has depth k-1
            let mut idx = vec![0usize; n];
            loop {
                if idx.iter().any(|&i| i >= prev_start) {
                    level.push(Term::App(
                        f.clone(),
                        idx.iter().map(|&i| all[i].clone()).collect(),
                    ));
                }
                if !advance(&mut idx, all.len()) {
                    break;
                }
            }
        }
        all.extend(level.iter().cloned());
        levels.push(level);
    }
    Ok(levels)
}

/// Odometer step over `idx` with every digit in `0..base`; false once wrapped.
pub(crate) fn advance(idx: &mut [usize], base: usize) -> bool {
    for pos in (0..idx.len()).rev() {
        idx[pos] += 1;
        if idx[pos] < base {
            return true;
        }
        idx[pos] = 0;
    }
    false
}

pub fn enumerate_ground_terms(
    sig: &Signature,
    d: &Domain,
    meta: &str,
    depth: usize,
    samples: &[Rat],
) -> Result<Vec<Term>, LogicError> {
    Ok(ground_terms_by_depth(sig, d, meta, depth, samples)?
        .into_iter()
        .flatten()
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(n: &str) -> Var {
        Var::eigen(n, Sort::Uninterpreted)
    }

    #[test]
    fn eigen_insertion_does_not_widen_existing_metas() {
        let d = Domain::initial([u("c0")]).unwrap();
        let d = d.add_meta(Var::meta("X", Sort::Uninterpreted)).unwrap();
        let d = d.add_eigen(u("y")).unwrap();
        let d = d.add_meta(Var::meta("Y", Sort::Uninterpreted)).unwrap();
        let names = |v: Vec<&Var>| v.iter().map(|v| v.name.to_string()).collect::<Vec<_>>();
        assert_eq!(names(d.authorised("X").unwrap()), vec!["c0"]);
        assert_eq!(names(d.authorised("Y").unwrap()), vec!["c0", "y"]);
        assert_eq!(d.to_string(), "(c0,y; X->{c0}, Y->{c0,y})");
    }

    #[test]
    fn clashing_names_are_rejected() {
        let d = Domain::initial([u("c0")]).unwrap();
        assert!(matches!(
            d.add_eigen(u("c0")),
            Err(LogicError::NameClash(_))
        ));
        assert!(matches!(
            d.add_meta(Var::meta("c0", Sort::Uninterpreted)),
            Err(LogicError::NameClash(_))
        ));
        let d = d.add_meta(Var::meta("X", Sort::Uninterpreted)).unwrap();
        assert!(d.add_meta(Var::meta("X", Sort::Uninterpreted)).is_err());
    }

    #[test]
    fn instantiation_applies_and_validates() {
        let d = Domain::initial([u("c0")]).unwrap();
        let d = d.add_meta(Var::meta("X", Sort::Uninterpreted)).unwrap();
        let d = d.add_eigen(u("y")).unwrap();
        let mut map = BTreeMap::new();
        map.insert(name("X"), Term::constant("a"));
        let rho = Instantiation::new(map.clone(), &d).unwrap();
        let l = Literal::pred(
            "p",
            vec![
                Term::Var(Var::meta("X", Sort::Uninterpreted)),
                Term::Var(u("y")),
            ],
        );
        assert_eq!(rho.apply_literal(&l).unwrap().to_string(), "p(a,y)");
        map.insert(name("X"), Term::Var(u("y")));
        assert!(matches!(
            Instantiation::new(map, &d),
            Err(LogicError::Dependency { .. })
        ));
        assert!(Instantiation::empty().apply_literal(&l).is_err());
    }

    #[test]
    fn ground_terms_follow_depth_then_signature_order() {
        let sig = Signature::with_funs(&[("a", 0), ("f", 1)]);
        let d = Domain::default()
            .add_meta(Var::meta("X", Sort::Uninterpreted))
            .unwrap();
        let ts = enumerate_ground_terms(&sig, &d, "X", 1, &[]).unwrap();
        let shown: Vec<String> = ts.iter().map(|t| t.to_string()).collect();
        assert_eq!(shown, vec!["a", "f(a)"]);
        let ts0 = enumerate_ground_terms(&sig, &d, "X", 0, &[]).unwrap();
        assert_eq!(ts0.len(), 1);
    }

    #[test]
    fn binary_symbols_produce_exact_depth_levels() {
        let sig = Signature::with_funs(&[("a", 0), ("g", 2)]);
        let d = Domain::default()
            .add_meta(Var::meta("X", Sort::Uninterpreted))
            .unwrap();
        let levels = ground_terms_by_depth(&sig, &d, "X", 2, &[]).unwrap();
        assert_eq!(levels[0].len(), 1);
        assert_eq!(levels[1].len(), 1);
        // g(a,g(a,a)), g(g(a,a),a), g(g(a,a),g(a,a))
        assert_eq!(levels[2].len(), 3);
        assert!(levels[2].iter().all(|t| t.depth() == 2));
    }

    #[test]
    fn initial_domain_adds_default_constant_only_when_needed() {
        let mut sig = Signature::default();
        assert_eq!(sig.initial_domain().to_string(), "(c0; )");
        sig.constants.push(u("a"));
        assert_eq!(sig.initial_domain().to_string(), "(a; )");
    }
}
