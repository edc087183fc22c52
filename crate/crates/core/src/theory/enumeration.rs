//! Ground-enumeration backend: constraints assign ground terms to some
//! meta-variables; leaves enumerate groundings fairly and keep the valid ones.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use super::{Closure, ComplementaryPair, ConstraintStream, GroundValidity, Theory, TheoryError};
use crate::logic::{
    advance, default_rational_samples, enumerate_ground_terms, ground_terms_by_depth, Domain,
    Instantiation, Literal, Name, Rat, Signature, Term, Var, VarKind,
};

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct GroundConstraint(pub BTreeMap<Name, Term>);

impl GroundConstraint {
    pub fn from_pairs(pairs: &[(&str, Term)]) -> GroundConstraint {
        GroundConstraint(
            pairs
                .iter()
                .map(|(k, t)| (crate::logic::name(k), t.clone()))
                .collect(),
        )
    }

    fn apply_literal(&self, l: &Literal) -> Literal {
        l.map_vars(&mut |v| {
            if v.kind == VarKind::Meta {
                self.0.get(&v.name).cloned()
            } else {
                None
            }
        })
    }
}

impl fmt::Display for GroundConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(k, t)| format!("{} -> {}", k, t))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

impl Serialize for GroundConstraint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

pub fn ground_meet(a: &GroundConstraint, b: &GroundConstraint) -> Option<GroundConstraint> {
    let mut out = a.0.clone();
    for (k, t) in &b.0 {
        match out.get(k) {
            Some(u) if u != t => return None,
            Some(_) => {}
            None => {
                out.insert(k.clone(), t.clone());
            }
        }
    }
    Some(GroundConstraint(out))
}

#[derive(Clone)]
pub struct EnumTheory {
    pub signature: Signature,
    pub ceiling: usize,
    pub samples: Vec<Rat>,
    /// Try ground terms that already occur in the leaf before the fair order.
    pub present_first: bool,
    pub gvp: Arc<dyn GroundValidity + Send + Sync>,
}

impl fmt::Debug for EnumTheory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EnumTheory")
            .field("ceiling", &self.ceiling)
            .field("present_first", &self.present_first)
            .finish()
    }
}

impl EnumTheory {
    pub fn new(signature: Signature, ceiling: usize) -> EnumTheory {
        EnumTheory {
            signature,
            ceiling,
            samples: default_rational_samples(),
            present_first: false,
            gvp: Arc::new(ComplementaryPair),
        }
    }
}

/// Fair enumeration of tuples: by total depth, then lexicographically.
struct Tuples {
    groups: Vec<Vec<Vec<Term>>>,
    prefix: Vec<Vec<Term>>,
    in_prefix: bool,
    seen: BTreeSet<Vec<Term>>,
    shapes: Vec<Vec<usize>>,
    shape: usize,
    idx: Vec<usize>,
    started: bool,
}

impl Tuples {
    fn new(groups: Vec<Vec<Vec<Term>>>, ceiling: usize, prefix: Vec<Vec<Term>>) -> Tuples {
        let k = groups.len();
        let mut shapes = Vec::new();
        let mut v = vec![0usize; k];
        loop {
            if v.iter()
                .enumerate()
                .all(|(m, &dd)| !groups[m][dd].is_empty())
            {
                shapes.push(v.clone());
            }
            if !advance(&mut v, ceiling + 1) {
                break;
            }
        }
        shapes.sort_by_key(|s| (s.iter().sum::<usize>(), s.clone()));
        let in_prefix = !prefix.is_empty();
        Tuples {
            groups,
            prefix,
            in_prefix,
            seen: BTreeSet::new(),
            shapes,
            shape: 0,
            idx: vec![0; k],
            started: false,
        }
    }

    fn next_raw(&mut self) -> Option<Vec<Term>> {
        if self.in_prefix {
            if !self.started {
                self.started = true;
                if self.prefix.iter().any(|l| l.is_empty()) {
                    self.in_prefix = false;
                    self.started = false;
                    return self.next_raw();
                }
            } else {
                let bases: Vec<usize> = self.prefix.iter().map(Vec::len).collect();
                if !advance_mixed(&mut self.idx, &bases) {
                    self.in_prefix = false;
                    self.started = false;
                    self.idx.iter_mut().for_each(|i| *i = 0);
                    return self.next_raw();
                }
            }
            let t: Vec<Term> = self
                .idx
                .iter()
                .enumerate()
                .map(|(m, &i)| self.prefix[m][i].clone())
                .collect();
            self.seen.insert(t.clone());
            return Some(t);
        }
        loop {
            if self.shape >= self.shapes.len() {
                return None;
            }
            let shape = &self.shapes[self.shape];
            if !self.started {
                self.started = true;
            } else {
                let bases: Vec<usize> = shape
                    .iter()
                    .enumerate()
                    .map(|(m, &dd)| self.groups[m][dd].len())
                    .collect();
                if !advance_mixed(&mut self.idx, &bases) {
                    self.shape += 1;
                    self.started = false;
                    self.idx.iter_mut().for_each(|i| *i = 0);
                    continue;
                }
            }
            let shape = &self.shapes[self.shape];
            let t: Vec<Term> = shape
                .iter()
                .enumerate()
                .map(|(m, &dd)| self.groups[m][dd][self.idx[m]].clone())
                .collect();
            return Some(t);
        }
    }

    fn next(&mut self) -> Option<Vec<Term>> {
        loop {
            let t = self.next_raw()?;
            if self.in_prefix || !self.seen.contains(&t) {
                return Some(t);
            }
        }
    }
}

fn advance_mixed(idx: &mut [usize], bases: &[usize]) -> bool {
    for pos in (0..idx.len()).rev() {
        idx[pos] += 1;
        if idx[pos] < bases[pos] {
            return true;
        }
        idx[pos] = 0;
    }
    false
}

struct EnumStream<'a> {
    theory: &'a EnumTheory,
    lits: Vec<Literal>,
    d: Domain,
    state: Option<(GroundConstraint, Vec<Var>, Tuples)>,
}

impl EnumStream<'_> {
    fn start(&self, input: &GroundConstraint) -> Result<(Vec<Var>, Tuples), TheoryError> {
        let applied: Vec<Literal> = self.lits.iter().map(|l| input.apply_literal(l)).collect();
        let mut present: BTreeSet<Var> = BTreeSet::new();
        for l in &applied {
            present.extend(l.vars().into_iter().filter(|v| v.kind == VarKind::Meta));
        }
        let metas: Vec<Var> = self
            .d
            .metas()
            .into_iter()
            .filter(|m| present.contains(*m))
            .cloned()
            .collect();
        if metas.len() != present.len() {
            return Err(TheoryError::Precondition(
                "leaf mentions undeclared meta-variables".into(),
            ));
        }
        let mut groups = Vec::new();
        let mut prefix = Vec::new();
        let mut subterms = BTreeSet::new();
        if self.theory.present_first {
            for l in &applied {
                collect_ground_subterms(l, &mut subterms);
            }
        }
        for m in &metas {
            let g = ground_terms_by_depth(
                &self.theory.signature,
                &self.d,
                &m.name,
                self.theory.ceiling,
                &self.theory.samples,
            )?;
            if self.theory.present_first {
                let all: BTreeSet<&Term> = g.iter().flatten().collect();
                prefix.push(
                    g.iter()
                        .flatten()
                        .filter(|t| subterms.contains(*t) && all.contains(t))
                        .cloned()
                        .collect(),
                );
            }
            groups.push(g);
        }
        Ok((metas, Tuples::new(groups, self.theory.ceiling, prefix)))
    }
}

fn collect_ground_subterms(l: &Literal, out: &mut BTreeSet<Term>) {
    fn walk(t: &Term, out: &mut BTreeSet<Term>) {
        if !t.has_meta() {
            out.insert(t.clone());
        }
        if let Term::App(_, args) = t {
            args.iter().for_each(|a| walk(a, out));
        }
    }
    if let crate::logic::Atom::Pred(_, args) = &l.atom {
        args.iter().for_each(|a| walk(a, out));
    }
}

impl ConstraintStream<GroundConstraint> for EnumStream<'_> {
    fn pull(
        &mut self,
        input: &GroundConstraint,
    ) -> Result<Option<Closure<GroundConstraint>>, TheoryError> {
        if self.state.as_ref().map(|s| &s.0) != Some(input) {
            let (metas, tuples) = self.start(input)?;
            self.state = Some((input.clone(), metas, tuples));
        }
        let lits = self.lits.clone();
        let gvp = self.theory.gvp.clone();
        let (input, metas, tuples) = self.state.as_mut().unwrap();
        while let Some(tuple) = tuples.next() {
            let mut ext = input.0.clone();
            for (m, t) in metas.iter().zip(tuple) {
                ext.insert(m.name.clone(), t);
            }
            let out = GroundConstraint(ext);
            let ground: Vec<Literal> = lits.iter().map(|l| out.apply_literal(l)).collect();
            if !gvp.ground_valid(&ground)? {
                continue;
            }
            let mut used = lits.clone();
            'pairs: for i in 0..ground.len() {
                for j in i + 1..ground.len() {
                    if gvp.ground_valid(&[ground[i].clone(), ground[j].clone()])? {
                        used = vec![lits[i].clone(), lits[j].clone()];
                        break 'pairs;
                    }
                }
            }
            return Ok(Some(Closure { used, out }));
        }
        Ok(None)
    }
}

impl Theory for EnumTheory {
    type Constraint = GroundConstraint;

    fn name(&self) -> &'static str {
        "enum"
    }

    fn top(&self, _d: &Domain) -> GroundConstraint {
        GroundConstraint::default()
    }

    fn project(
        &self,
        sigma: &GroundConstraint,
        meta: &str,
        d: &Domain,
    ) -> Result<GroundConstraint, TheoryError> {
        if d.last_meta().map(|v| &*v.name) != Some(meta) {
            return Err(TheoryError::Precondition(format!(
                "{} is not the newest meta-variable of {}",
                meta, d
            )));
        }
        let mut m = sigma.0.clone();
        m.remove(meta);
        Ok(GroundConstraint(m))
    }

    fn lift(
        &self,
        sigma: &GroundConstraint,
        _meta: &str,
        _d: &Domain,
    ) -> Result<GroundConstraint, TheoryError> {
        Ok(sigma.clone())
    }

    fn meet(
        &self,
        a: &GroundConstraint,
        b: &GroundConstraint,
        _d: &Domain,
    ) -> Result<Option<GroundConstraint>, TheoryError> {
        Ok(ground_meet(a, b))
    }

    fn satisfiable(&self, _sigma: &GroundConstraint, _d: &Domain) -> Result<bool, TheoryError> {
        Ok(true)
    }

    fn consistency<'a>(
        &'a self,
        lits: &[Literal],
        d: &Domain,
    ) -> Box<dyn ConstraintStream<GroundConstraint> + 'a> {
        Box::new(EnumStream {
            theory: self,
            lits: lits.to_vec(),
            d: d.clone(),
            state: None,
        })
    }

    fn compatible(
        &self,
        rho: &Instantiation,
        sigma: &GroundConstraint,
        _d: &Domain,
    ) -> Result<bool, TheoryError> {
        Ok(sigma
            .0
            .iter()
            .all(|(k, t)| rho.get(k).map_or(true, |u| u == t)))
    }

    fn witness(
        &self,
        sigma: &GroundConstraint,
        _rho: &Instantiation,
        d: &Domain,
    ) -> Result<Term, TheoryError> {
        let x = d
            .last_meta()
            .ok_or_else(|| TheoryError::Precondition("witness needs a meta-variable".into()))?;
        if let Some(t) = sigma.0.get(&x.name) {
            return Ok(t.clone());
        }
        for depth in 0..=self.ceiling.max(1) {
            let ts = enumerate_ground_terms(&self.signature, d, &x.name, depth, &self.samples)?;
            if let Some(t) = ts.into_iter().next() {
                return Ok(t);
            }
        }
        Err(TheoryError::Unsupported(format!(
            "no ground term available for {}",
            x.name
        )))
    }

    fn ground_validity(&self) -> &dyn GroundValidity {
        &*self.gvp
    }

    fn complete_streams(&self) -> bool {
        false
    }

    fn shrink(&self, sigma: &GroundConstraint) -> Vec<GroundConstraint> {
        sigma
            .0
            .keys()
            .map(|k| {
                let mut m = sigma.0.clone();
                m.remove(k);
                GroundConstraint(m)
            })
            .collect()
    }
}
