//! Bounded conformance checks of constraint backends against the axioms
//! relating compatibility, projection, meet, lift, witnesses and streams.

pub mod fm;
mod generate;
mod mutants;
mod universe;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::frontend::TheoryChoice;
use crate::logic::{Domain, Instantiation, Literal};
use crate::theory::enumeration::EnumTheory;
use crate::theory::fol::FolTheory;
use crate::theory::lra::LraTheory;
use crate::theory::{PMode, Theory, TheoryError};

pub use generate::Gen;
pub use mutants::{
    enum_wrong_witness, fol_deaf_stream, fol_left_meet, fol_wrong_projection, lra_true_projection,
    lra_zero_lift, Mutant,
};
pub use universe::{oracle_compatibles, oracle_set, Level, OracleUniverse, UniverseKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axiom {
    AxProj,
    AxWit,
    AxMeet,
    AxLift,
    AxPg,
    P1,
    P2,
    D1,
    D2,
    A1,
    A2,
}

impl Axiom {
    pub const ALL: [Axiom; 11] = [
        Axiom::AxProj,
        Axiom::AxWit,
        Axiom::AxMeet,
        Axiom::AxLift,
        Axiom::AxPg,
        Axiom::P1,
        Axiom::P2,
        Axiom::D1,
        Axiom::D2,
        Axiom::A1,
        Axiom::A2,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Axiom::AxProj => "AX_proj",
            Axiom::AxWit => "AX_wit",
            Axiom::AxMeet => "AX_meet",
            Axiom::AxLift => "AX_lift",
            Axiom::AxPg => "AX_pg",
            Axiom::P1 => "P1",
            Axiom::P2 => "P2",
            Axiom::D1 => "D1",
            Axiom::D2 => "D2",
            Axiom::A1 => "A1",
            Axiom::A2 => "A2",
        }
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for Axiom {
    type Err = String;
    fn from_str(s: &str) -> Result<Axiom, String> {
        Axiom::ALL
            .into_iter()
            .find(|a| a.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown axiom {:?}", s))
    }
}

impl Serialize for Axiom {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

#[derive(Clone, Debug)]
pub struct HarnessConfig {
    pub cases: usize,
    pub seed: u64,
    /// Pull budget for every leaf stream the harness consumes.
    pub pulls: usize,
    pub jobs: usize,
    pub axioms: Vec<Axiom>,
    /// Stop an axiom at its first failure (used for mutants).
    pub stop_at_first: bool,
}

impl Default for HarnessConfig {
    fn default() -> HarnessConfig {
        HarnessConfig {
            cases: 200,
            seed: 0x5eed,
            pulls: 64,
            jobs: 1,
            axioms: Axiom::ALL.to_vec(),
            stop_at_first: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub case: usize,
    pub domain: String,
    pub constraints: Vec<String>,
    pub literals: Vec<String>,
    pub detail: String,
    pub shrink_steps: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomReport {
    pub axiom: Axiom,
    pub cases: usize,
    /// Cases where the quantified statement had something to check.
    pub checked: usize,
    pub failures: Vec<Failure>,
    /// Bounded-quantifier caveats by kind.
    pub caveats: BTreeMap<&'static str, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Sampled inputs of one case.
#[derive(Clone, Debug)]
pub struct Case<C> {
    pub level: usize,
    pub sigmas: Vec<C>,
    pub lits: Vec<Literal>,
}

#[derive(Debug, Default)]
struct Verdict {
    failure: Option<String>,
    caveats: Vec<&'static str>,
    vacuous: bool,
}

impl Verdict {
    fn fail(msg: String) -> Verdict {
        Verdict {
            failure: Some(msg),
            ..Verdict::default()
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub struct Checker<'a, T: Theory> {
    pub theory: &'a T,
    pub universe: &'a OracleUniverse,
    pub cfg: &'a HarnessConfig,
    /// Oracle sets keyed by the printed domain and constraint.
    memo: Mutex<HashMap<(String, String), Set>>,
}

type Set = BTreeSet<usize>;

impl<'a, T: Theory> Checker<'a, T> {
    pub fn new(
        theory: &'a T,
        universe: &'a OracleUniverse,
        cfg: &'a HarnessConfig,
    ) -> Checker<'a, T> {
        Checker {
            theory,
            universe,
            cfg,
            memo: Mutex::new(HashMap::new()),
        }
    }

    fn set(&self, s: Option<&T::Constraint>, d: &Domain) -> Result<Set, TheoryError> {
        let Some(c) = s else {
            return oracle_set(self.theory, None, self.universe, d);
        };
        let key = (d.to_string(), c.to_string());
        if let Some(hit) = self.memo.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let out = oracle_set(self.theory, Some(c), self.universe, d)?;
        self.memo.lock().unwrap().insert(key, out.clone());
        Ok(out)
    }

    fn rng(&self, ax: Axiom, case: usize) -> ChaCha8Rng {
        let k = Axiom::ALL.iter().position(|a| *a == ax).unwrap() as u64;
        ChaCha8Rng::seed_from_u64(splitmix(self.cfg.seed ^ splitmix(k << 32 | case as u64)))
    }

    fn sample(&self, ax: Axiom, case: usize) -> Result<Option<Case<T::Constraint>>, TheoryError> {
        let mut g = Gen {
            theory: self.theory,
            universe: self.universe,
            rng: self.rng(ax, case),
        };
        let level = rand::Rng::random_range(&mut g.rng, 0..self.universe.levels.len());
        let l = &self.universe.levels[level];
        let (big, small) = (&l.domain, &l.base);
        macro_rules! gen {
            ($d:expr) => {
                match g.some_constraint($d)? {
                    Some(c) => c,
                    None => return Ok(None),
                }
            };
        }
        let (sigmas, lits) = match ax {
            Axiom::AxProj | Axiom::AxWit | Axiom::P1 => (vec![gen!(big)], Vec::new()),
            Axiom::AxMeet => (vec![gen!(big), gen!(big)], Vec::new()),
            Axiom::AxLift | Axiom::D2 => (vec![gen!(small), gen!(big)], Vec::new()),
            Axiom::AxPg => (Vec::new(), g.literals(big)),
            Axiom::P2 => {
                let upper = gen!(big);
                let lower = if rand::Rng::random_bool(&mut g.rng, 0.6) {
                    let other = gen!(big);
                    match self.theory.meet(&upper, &other, big)? {
                        Some(m) => m,
                        None => other,
                    }
                } else {
                    gen!(big)
                };
                (vec![lower, upper], Vec::new())
            }
            Axiom::D1 => {
                let (a, b) = (gen!(big), gen!(big));
                let below = match self.theory.meet(&a, &b, big)? {
                    Some(m) if rand::Rng::random_bool(&mut g.rng, 0.5) => {
                        let extra = gen!(big);
                        self.theory.meet(&m, &extra, big)?.unwrap_or(m)
                    }
                    _ => gen!(big),
                };
                (vec![a, b, below], Vec::new())
            }
            Axiom::A1 | Axiom::A2 => (vec![gen!(big)], g.literals(big)),
        };
        Ok(Some(Case {
            level,
            sigmas,
            lits,
        }))
    }

    fn modes() -> [PMode; 2] {
        [PMode::Satisfiability, PMode::AlwaysTrue]
    }

    /// Pulls up to the budget; the flag tells whether the stream ended.
    fn drain(
        &self,
        lits: &[Literal],
        input: &T::Constraint,
        d: &Domain,
    ) -> Result<(Vec<T::Constraint>, bool), TheoryError> {
        let mut stream = self.theory.consistency(lits, d);
        let mut out = Vec::new();
        for _ in 0..self.cfg.pulls {
            match stream.pull(input)? {
                Some(c) => out.push(c.out),
                None => return Ok((out, true)),
            }
        }
        Ok((out, false))
    }

    fn check(&self, ax: Axiom, case: &Case<T::Constraint>) -> Result<Verdict, TheoryError> {
        let th = self.theory;
        let l = &self.universe.levels[case.level];
        let (big, small, x) = (&l.domain, &l.base, &l.meta.name);
        let mut v = Verdict::default();
        match ax {
            Axiom::AxProj => {
                let s = &case.sigmas[0];
                let p = th.project(s, x, big)?;
                for rho in &l.insts {
                    if th.compatible(rho, s, big)? {
                        let r = rho.restricted(small);
                        if !th.compatible(&r, &p, small)? {
                            return Ok(Verdict::fail(format!(
                                "{} is compatible with σ but {} is not compatible with {}",
                                rho, r, p
                            )));
                        }
                    }
                }
            }
            Axiom::AxWit => {
                let s = &case.sigmas[0];
                let p = th.project(s, x, big)?;
                let mut any = false;
                for rho in &l.base_insts {
                    if !th.compatible(rho, &p, small)? {
                        continue;
                    }
                    any = true;
                    let t = match th.witness(s, rho, big) {
                        Ok(t) => t,
                        Err(TheoryError::Unsupported(_)) => {
                            v.caveats.push("witness-unsupported");
                            continue;
                        }
                        Err(e) => return Err(e),
                    };
                    let ext = rho.extended(x, t.clone());
                    if !th.compatible(&ext, s, big)? {
                        return Ok(Verdict::fail(format!(
                            "{} is compatible with {} but the witness {} is not compatible with σ",
                            rho, p, t
                        )));
                    }
                }
                v.vacuous = !any;
            }
            Axiom::AxMeet => {
                let (a, b) = (&case.sigmas[0], &case.sigmas[1]);
                let m = th.meet(a, b, big)?;
                let both: Set = self
                    .set(Some(a), big)?
                    .intersection(&self.set(Some(b), big)?)
                    .copied()
                    .collect();
                let met = self.set(m.as_ref(), big)?;
                if let Some(i) = both.symmetric_difference(&met).next() {
                    let shown = m.as_ref().map_or("BOT".to_string(), |m| m.to_string());
                    return Ok(Verdict::fail(format!(
                        "{}: compatible with both = {}, with the meet {} = {}",
                        l.insts[*i],
                        both.contains(i),
                        shown,
                        met.contains(i)
                    )));
                }
            }
            Axiom::AxLift => {
                let (s, s2) = (&case.sigmas[0], &case.sigmas[1]);
                let lifted = th.lift(s, x, big)?;
                let p2 = th.project(s2, x, big)?;
                for rho in &l.base_insts {
                    let want = th.compatible(rho, s, small)?;
                    let mut terms = l.terms.clone();
                    if th.compatible(rho, &p2, small)? {
                        match th.witness(s2, rho, big) {
                            Ok(t) => terms.push(t),
                            Err(TheoryError::Unsupported(_)) => {
                                v.caveats.push("witness-unsupported")
                            }
                            Err(e) => return Err(e),
                        }
                    }
                    for t in terms {
                        let ext = rho.extended(x, t.clone());
                        if th.compatible(&ext, &lifted, big)? != want {
                            return Ok(Verdict::fail(format!(
                                "{} with {} -> {}: compatible with the lift = {}, {} compatible with σ = {}",
                                rho,
                                x,
                                t,
                                !want,
                                rho,
                                want
                            )));
                        }
                    }
                }
            }
            Axiom::AxPg => {
                let top = th.top(big);
                let (produced, ended) = self.drain(&case.lits, &top, big)?;
                if !ended {
                    v.caveats.push("bounded-union");
                }
                for rho in &l.insts {
                    let ground = case
                        .lits
                        .iter()
                        .map(|lit| rho.apply_literal(lit))
                        .collect::<Result<Vec<_>, _>>()?;
                    let valid = th.ground_validity().ground_valid(&ground)?;
                    let mut covered = false;
                    for s in &produced {
                        if th.compatible(rho, s, big)? {
                            covered = true;
                            break;
                        }
                    }
                    if covered && !valid {
                        return Ok(Verdict::fail(format!(
                            "{} is compatible with a produced constraint but the leaf is not valid",
                            rho
                        )));
                    }
                    if valid && !covered {
                        if ended {
                            return Ok(Verdict::fail(format!(
                                "{} makes the leaf valid but no produced constraint covers it",
                                rho
                            )));
                        }
                        v.caveats.push("uncovered-at-bound");
                    }
                }
            }
            Axiom::P1 => {
                let s = &case.sigmas[0];
                let p = th.project(s, x, big)?;
                for mode in Self::modes() {
                    let (a, b) = (th.p(mode, s, big)?, th.p(mode, &p, small)?);
                    if a != b {
                        return Ok(Verdict::fail(format!(
                            "{:?}: P(σ) = {} but P of the projection {} = {}",
                            mode, a, p, b
                        )));
                    }
                }
            }
            Axiom::P2 => {
                let (lo, hi) = (&case.sigmas[0], &case.sigmas[1]);
                let (sl, sh) = (self.set(Some(lo), big)?, self.set(Some(hi), big)?);
                if !sl.is_subset(&sh) {
                    v.vacuous = true;
                    return Ok(v);
                }
                for mode in Self::modes() {
                    if th.p(mode, lo, big)? && !th.p(mode, hi, big)? {
                        if sl.is_empty() {
                            v.caveats.push("vacuous-at-bound");
                            v.vacuous = true;
                        } else {
                            return Ok(Verdict::fail(format!(
                                "{:?}: P holds below but not above",
                                mode
                            )));
                        }
                    }
                }
            }
            Axiom::D1 => {
                let (a, b, t) = (&case.sigmas[0], &case.sigmas[1], &case.sigmas[2]);
                let m = th.meet(a, b, big)?;
                let (sa, sb, sm, st) = (
                    self.set(Some(a), big)?,
                    self.set(Some(b), big)?,
                    self.set(m.as_ref(), big)?,
                    self.set(Some(t), big)?,
                );
                if !sm.is_subset(&sa) || !sm.is_subset(&sb) {
                    return Ok(Verdict::fail("the meet is not below both operands".into()));
                }
                if st.is_subset(&sa) && st.is_subset(&sb) && !st.is_subset(&sm) {
                    return Ok(Verdict::fail(format!(
                        "{} is a lower bound of both operands but not below their meet",
                        t
                    )));
                }
            }
            Axiom::D2 => {
                let (s, s2) = (&case.sigmas[0], &case.sigmas[1]);
                let lifted = th.lift(s, x, big)?;
                let lhs = match th.meet(&lifted, s2, big)? {
                    Some(m) => Some(th.project(&m, x, big)?),
                    None => None,
                };
                let p2 = th.project(s2, x, big)?;
                let rhs = th.meet(s, &p2, small)?;
                if self.set(lhs.as_ref(), small)? != self.set(rhs.as_ref(), small)? {
                    let show = |c: &Option<T::Constraint>| {
                        c.as_ref().map_or("BOT".to_string(), |c| c.to_string())
                    };
                    return Ok(Verdict::fail(format!(
                        "projection of the meet {} differs from {}",
                        show(&lhs),
                        show(&rhs)
                    )));
                }
            }
            Axiom::A1 | Axiom::A2 => {
                let input = &case.sigmas[0];
                let top = th.top(big);
                let (refined, r_end) = self.drain(&case.lits, input, big)?;
                let (produced, p_end) = self.drain(&case.lits, &top, big)?;
                let mut produced_meets = Vec::new();
                for s in &produced {
                    if let Some(m) = th.meet(input, s, big)? {
                        if th.p(PMode::Satisfiability, &m, big)? {
                            produced_meets.push(self.set(Some(&m), big)?);
                        }
                    }
                }
                let refined_sets = refined
                    .iter()
                    .map(|s| self.set(Some(s), big))
                    .collect::<Result<Vec<_>, _>>()?;
                if ax == Axiom::A1 {
                    v.vacuous = refined.is_empty();
                    for (s, set) in refined.iter().zip(&refined_sets) {
                        if !produced_meets.contains(set) {
                            if !p_end {
                                v.caveats.push("unmatched-at-bound");
                                continue;
                            }
                            return Ok(Verdict::fail(format!("refined output {} is not the input met with any produced constraint", s)));
                        }
                    }
                } else {
                    v.vacuous = produced_meets.is_empty();
                    for set in &produced_meets {
                        if !refined_sets.contains(set) {
                            if !r_end {
                                v.caveats.push("unmatched-at-bound");
                                continue;
                            }
                            return Ok(Verdict::fail("a satisfiable meet with a produced constraint is missing from the refining stream".into()));
                        }
                    }
                }
            }
        }
        Ok(v)
    }

    fn verdict(&self, ax: Axiom, case: &Case<T::Constraint>) -> Verdict {
        match self.check(ax, case) {
            Ok(v) => v,
            Err(TheoryError::Unsupported(_)) => Verdict {
                caveats: vec!["unsupported"],
                vacuous: true,
                ..Verdict::default()
            },
            Err(TheoryError::Resource(_)) => Verdict {
                caveats: vec!["resource"],
                vacuous: true,
                ..Verdict::default()
            },
            Err(e) => Verdict::fail(format!("theory error: {}", e)),
        }
    }

    /// Drops atoms, bindings and literals one at a time while the failure persists.
    fn shrink(&self, ax: Axiom, mut case: Case<T::Constraint>) -> (Case<T::Constraint>, usize) {
        let mut steps = 0;
        'outer: while steps < 200 {
            for i in 0..case.sigmas.len() {
                for smaller in self.theory.shrink(&case.sigmas[i]) {
                    let mut c = case.clone();
                    c.sigmas[i] = smaller;
                    if self.verdict(ax, &c).failure.is_some() {
                        case = c;
                        steps += 1;
                        continue 'outer;
                    }
                }
            }
            for j in 0..case.lits.len() {
                let mut c = case.clone();
                c.lits.remove(j);
                if self.verdict(ax, &c).failure.is_some() {
                    case = c;
                    steps += 1;
                    continue 'outer;
                }
            }
            break;
        }
        (case, steps)
    }

    /// Checks one explicitly given instance; `Err` carries the failure.
    pub fn check_instance(&self, ax: Axiom, case: &Case<T::Constraint>) -> Result<(), String> {
        match self.verdict(ax, case).failure {
            None => Ok(()),
            Some(f) => Err(f),
        }
    }

    pub fn check_axiom(&self, ax: Axiom) -> AxiomReport {
        let mut report = AxiomReport {
            axiom: ax,
            cases: self.cfg.cases,
            checked: 0,
            failures: Vec::new(),
            caveats: BTreeMap::new(),
            skipped: None,
        };
        let mut unsupported = 0;
        for i in 0..self.cfg.cases {
            self.memo.lock().unwrap().clear();
            let case = match self.sample(ax, i) {
                Ok(Some(c)) => c,
                Ok(None) => {
                    *report.caveats.entry("no-sample").or_default() += 1;
                    continue;
                }
                Err(TheoryError::Unsupported(_) | TheoryError::Resource(_)) => {
                    unsupported += 1;
                    *report.caveats.entry("unsupported").or_default() += 1;
                    continue;
                }
                Err(e) => {
                    report.failures.push(Failure {
                        case: i,
                        domain: String::new(),
                        constraints: Vec::new(),
                        literals: Vec::new(),
                        detail: format!("theory error while sampling: {}", e),
                        shrink_steps: 0,
                    });
                    if self.cfg.stop_at_first {
                        break;
                    }
                    continue;
                }
            };
            let v = self.verdict(ax, &case);
            for c in &v.caveats {
                *report.caveats.entry(c).or_default() += 1;
            }
            if v.caveats.contains(&"unsupported") {
                unsupported += 1;
            }
            if !v.vacuous {
                report.checked += 1;
            }
            if v.failure.is_some() {
                let (small, steps) = self.shrink(ax, case);
                let detail = self.verdict(ax, &small).failure.unwrap_or_default();
                report.failures.push(Failure {
                    case: i,
                    domain: self.universe.levels[small.level].domain.to_string(),
                    constraints: small.sigmas.iter().map(|s| s.to_string()).collect(),
                    literals: small.lits.iter().map(|l| l.to_string()).collect(),
                    detail,
                    shrink_steps: steps,
                });
                if self.cfg.stop_at_first {
                    break;
                }
            }
        }
        if report.checked == 0 && unsupported > 0 {
            report.skipped = Some("every case needed an unsupported operation".into());
        }
        report
    }

    pub fn run(&self) -> Vec<AxiomReport>
    where
        T: Sync,
    {
        let axioms = &self.cfg.axioms;
        let jobs = self.cfg.jobs.max(1).min(axioms.len().max(1));
        if jobs == 1 {
            return axioms.iter().map(|a| self.check_axiom(*a)).collect();
        }
        let mut slots: Vec<Option<AxiomReport>> = vec![None; axioms.len()];
        std::thread::scope(|s| {
            let chunks: Vec<Vec<(usize, Axiom)>> = (0..jobs)
                .map(|j| {
                    axioms
                        .iter()
                        .copied()
                        .enumerate()
                        .filter(|(i, _)| i % jobs == j)
                        .collect()
                })
                .collect();
            let handles: Vec<_> = chunks
                .into_iter()
                .map(|chunk| {
                    s.spawn(move || {
                        chunk
                            .into_iter()
                            .map(|(i, a)| (i, self.check_axiom(a)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("harness worker") {
                    slots[i] = Some(r);
                }
            }
        });
        slots
            .into_iter()
            .map(|r| r.expect("every axiom ran"))
            .collect()
    }
}

/// Runs one axiom; the report lists shrunk counterexamples.
pub fn check_axiom<T: Theory>(
    ax: Axiom,
    theory: &T,
    u: &OracleUniverse,
    cfg: &HarnessConfig,
) -> AxiomReport {
    Checker::new(theory, u, cfg).check_axiom(ax)
}

/// A1 and A2: refining streams against producing streams.
pub fn check_relating<T: Theory>(
    theory: &T,
    u: &OracleUniverse,
    cfg: &HarnessConfig,
) -> Vec<AxiomReport> {
    let c = Checker::new(theory, u, cfg);
    vec![c.check_axiom(Axiom::A1), c.check_axiom(Axiom::A2)]
}

#[derive(Clone, Debug, Serialize)]
pub struct MutantReport {
    pub name: &'static str,
    pub caught_by: Option<Axiom>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConformanceReport {
    pub theory: TheoryChoice,
    pub universe: String,
    pub cases: usize,
    pub seed: u64,
    pub axioms: Vec<AxiomReport>,
    pub mutants: Vec<MutantReport>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.axioms.iter().all(AxiomReport::passed)
            && self.mutants.iter().all(|m| m.caught_by.is_some())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("conformance {:?}: {}\n", self.theory, self.universe);
        for a in &self.axioms {
            let status = if a.skipped.is_some() {
                "SKIP"
            } else if a.passed() {
                "PASS"
            } else {
                "FAIL"
            };
            let caveats: Vec<String> = a
                .caveats
                .iter()
                .map(|(k, n)| format!("{}={}", k, n))
                .collect();
            out.push_str(&format!(
                "  {:8} {}  {}/{} checked",
                a.axiom.id(),
                status,
                a.checked,
                a.cases
            ));
            if !caveats.is_empty() {
                out.push_str(&format!("  [{}]", caveats.join(", ")));
            }
            out.push('\n');
            for f in &a.failures {
                out.push_str(&format!(
                    "    case {} in {}: {}\n",
                    f.case, f.domain, f.detail
                ));
                for c in &f.constraints {
                    out.push_str(&format!("      constraint {}\n", c));
                }
                if !f.literals.is_empty() {
                    out.push_str(&format!("      literals {}\n", f.literals.join(", ")));
                }
            }
        }
        for m in &self.mutants {
            match m.caught_by {
                Some(a) => out.push_str(&format!("  mutant {} caught by {}\n", m.name, a)),
                None => out.push_str(&format!("  mutant {} NOT caught\n", m.name)),
            }
        }
        out.push_str(if self.passed() {
            "result: PASS\n"
        } else {
            "result: FAIL\n"
        });
        out
    }
}

fn describe(u: &OracleUniverse) -> String {
    let last = u.levels.last().expect("universe has levels");
    let kind = match u.kind {
        UniverseKind::FirstOrder => format!("first-order, term depth {}", u.depth),
        UniverseKind::Rational => format!("rational, {} samples", u.samples.len()),
    };
    format!(
        "{} over {} with {} instantiations",
        kind,
        last.domain,
        last.insts.len()
    )
}

/// First axiom (in order) that the mutant violates.
pub fn catch_mutant<T: Theory>(
    m: &Mutant<T>,
    u: &OracleUniverse,
    cfg: &HarnessConfig,
) -> MutantReport {
    let cfg = HarnessConfig {
        stop_at_first: true,
        ..cfg.clone()
    };
    let c = Checker::new(m, u, &cfg);
    for ax in &cfg.axioms {
        let r = c.check_axiom(*ax);
        if let Some(f) = r.failures.into_iter().next() {
            return MutantReport {
                name: m.name,
                caught_by: Some(*ax),
                failure: Some(f),
            };
        }
    }
    MutantReport {
        name: m.name,
        caught_by: None,
        failure: None,
    }
}

/// The full suite for one backend at the default universe, plus its bundled mutants.
pub fn conformance(choice: TheoryChoice, cfg: &HarnessConfig) -> ConformanceReport {
    // a mutant can only be judged against the full axiom set
    let full = Axiom::ALL.iter().all(|a| cfg.axioms.contains(a));
    let (universe, axioms, mutants) = match choice {
        TheoryChoice::Fol => {
            let u = OracleUniverse::default_for(UniverseKind::FirstOrder);
            let th = FolTheory::new(u.signature.clone());
            let axioms = Checker::new(&th, &u, cfg).run();
            let mutants = if !full {
                vec![]
            } else {
                vec![
                    catch_mutant(&fol_wrong_projection(th.clone()), &u, cfg),
                    catch_mutant(&fol_left_meet(th.clone()), &u, cfg),
                    catch_mutant(&fol_deaf_stream(th.clone()), &u, cfg),
                ]
            };
            (u, axioms, mutants)
        }
        TheoryChoice::Enum => {
            let u = OracleUniverse::default_for(UniverseKind::FirstOrder);
            let th = EnumTheory::new(u.signature.clone(), u.depth);
            let axioms = Checker::new(&th, &u, cfg).run();
            let mutants = if !full {
                vec![]
            } else {
                vec![catch_mutant(&enum_wrong_witness(th.clone()), &u, cfg)]
            };
            (u, axioms, mutants)
        }
        TheoryChoice::Lra => {
            let u = OracleUniverse::default_for(UniverseKind::Rational);
            let th = LraTheory::default();
            let axioms = Checker::new(&th, &u, cfg).run();
            let mutants = if !full {
                vec![]
            } else {
                vec![
                    catch_mutant(&lra_true_projection(th.clone()), &u, cfg),
                    catch_mutant(&lra_zero_lift(th.clone()), &u, cfg),
                ]
            };
            (u, axioms, mutants)
        }
    };
    ConformanceReport {
        theory: choice,
        universe: describe(&universe),
        cases: cfg.cases,
        seed: cfg.seed,
        axioms,
        mutants,
    }
}

/// Instantiation shown as `{X -> t, ...}`; re-exported for reports built elsewhere.
pub fn show_instantiation(rho: &Instantiation) -> String {
    rho.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{rat, ratio, Atom, LinExpr, Rel, Signature, Sort, Term, Var};
    use crate::theory::fol::SubstConstraint;
    use crate::theory::lra::{equivalent, LinAtom, PolyConstraint};

    fn quick() -> HarnessConfig {
        HarnessConfig {
            cases: 40,
            ..HarnessConfig::default()
        }
    }

    #[test]
    fn oracle_sets_of_small_constraints() {
        let sig = Signature::with_funs(&[("a", 0), ("b", 0)]);
        let u = OracleUniverse::build(
            UniverseKind::FirstOrder,
            sig.clone(),
            0,
            Vec::new(),
            &[Var::meta("X", Sort::Uninterpreted)],
        );
        let th = FolTheory::new(sig);
        let d = &u.levels[0].domain;
        assert_eq!(oracle_compatibles(&th, &th.top(d), &u, d).unwrap().len(), 2);
        let bound = SubstConstraint::from_pairs(&[("X", Term::constant("a"))]);
        let set = oracle_compatibles(&th, &bound, &u, d).unwrap();
        assert_eq!(set.len(), 1);
        let i = *set.iter().next().unwrap();
        assert_eq!(u.levels[0].insts[i].get("X"), Some(&Term::constant("a")));

        let samples = vec![rat(-1), rat(0), ratio(1, 2), rat(1), rat(2)];
        let u = OracleUniverse::rational(samples);
        let lra = LraTheory::default();
        let d = &u.levels[0].domain;
        let x = LinExpr::var(u.levels[0].meta.clone());
        let unit = PolyConstraint::conj([
            LinAtom::cmp(&LinExpr::zero(), Rel::Le, &x),
            LinAtom::cmp(&x, Rel::Le, &LinExpr::constant(rat(1))),
        ]);
        let got: Vec<Term> = oracle_compatibles(&lra, &unit, &u, d)
            .unwrap()
            .into_iter()
            .map(|i| u.levels[0].insts[i].get("X").unwrap().clone())
            .collect();
        assert_eq!(
            got,
            vec![Term::Num(rat(0)), Term::Num(ratio(1, 2)), Term::Num(rat(1))]
        );
    }

    #[test]
    fn fol_meet_passes() {
        let u = OracleUniverse::default_for(UniverseKind::FirstOrder);
        let th = FolTheory::new(u.signature.clone());
        assert!(check_axiom(Axiom::AxMeet, &th, &u, &quick()).passed());
    }

    #[test]
    fn enumeration_streams_cover_the_ground_valid_instantiations() {
        let u = OracleUniverse::default_for(UniverseKind::FirstOrder);
        let th = EnumTheory::new(u.signature.clone(), u.depth);
        let r = check_axiom(Axiom::AxPg, &th, &u, &quick());
        assert!(r.passed(), "{:?}", r.failures);
    }

    #[test]
    fn wrong_projection_is_caught_with_a_counterexample() {
        let u = OracleUniverse::default_for(UniverseKind::FirstOrder);
        let m = fol_wrong_projection(FolTheory::new(u.signature.clone()));
        let cfg = HarnessConfig {
            axioms: vec![Axiom::AxProj, Axiom::AxWit, Axiom::P1, Axiom::D2],
            ..quick()
        };
        let r = catch_mutant(&m, &u, &cfg);
        let f = r.failure.expect("mutant survives");
        assert!(!f.constraints.is_empty());
    }

    #[test]
    fn relating_on_one_dual_pair() {
        let u = OracleUniverse::default_for(UniverseKind::FirstOrder);
        let th = FolTheory::new(u.signature.clone());
        let cfg = quick();
        let c = Checker::new(&th, &u, &cfg);
        let x = Term::Var(u.levels[0].meta.clone());
        let lits = vec![
            Literal::pred("p", vec![x]),
            Literal::pred("p", vec![Term::constant("a")]).negate(),
        ];
        for input in [
            SubstConstraint::identity(),
            SubstConstraint::from_pairs(&[("X", Term::constant("b"))]),
        ] {
            let case = Case {
                level: 0,
                sigmas: vec![input],
                lits: lits.clone(),
            };
            c.check_instance(Axiom::A1, &case).unwrap();
            c.check_instance(Axiom::A2, &case).unwrap();
        }
    }

    #[test]
    fn both_predicate_modes_satisfy_monotonicity_and_projection() {
        let u = OracleUniverse::default_for(UniverseKind::Rational);
        let th = LraTheory::default();
        let cfg = HarnessConfig {
            axioms: vec![Axiom::P1, Axiom::P2],
            ..quick()
        };
        assert!(Checker::new(&th, &u, &cfg)
            .run()
            .iter()
            .all(AxiomReport::passed));
    }

    /// The four leaves of the two-lines problem, refined left to right.
    #[test]
    fn two_lines_leaves_relate_and_chain() {
        let r = Sort::Rational;
        let (x, x2, y, y2) = (
            Var::meta("X", r),
            Var::meta("X2", r),
            Var::meta("Y", r),
            Var::meta("Y2", r),
        );
        let samples = vec![rat(0), rat(1), rat(15), rat(23), ratio(46, 3)];
        let u = OracleUniverse::build(
            UniverseKind::Rational,
            Signature::default(),
            0,
            samples,
            &[x.clone(), x2.clone(), y.clone(), y2.clone()],
        );
        let th = LraTheory::default();
        let cfg = quick();
        let c = Checker::new(&th, &u, &cfg);
        let d = &u.levels[3].domain;
        let v = |v: &Var| LinExpr::var(v.clone());
        let lin = |a: i64, p: &Var, b: i64, q: &Var, k: i64| {
            let mut e = LinExpr::constant(rat(k));
            e.add_term(p.clone(), rat(a));
            e.add_term(q.clone(), rat(b));
            e
        };
        let cmp = |l: LinExpr, rel: Rel, h: LinExpr| Literal::pos(Atom::Cmp(l, rel, h));
        let p = Literal::pred("p", vec![Term::Var(x.clone()), Term::Var(y.clone())]);
        let np = Literal::pred("p", vec![Term::Var(x2.clone()), Term::Var(y2.clone())]).negate();
        let l = vec![
            cmp(lin(3, &x, 0, &y, 0), Rel::Le, lin(2, &y, 0, &x, 0)),
            cmp(lin(2, &y, 0, &x, 0), Rel::Le, lin(3, &x, 0, &y, 1)),
        ];
        let l2 = vec![
            cmp(LinExpr::constant(rat(99)), Rel::Le, lin(3, &y2, 2, &x2, 0)),
            cmp(lin(3, &y2, 2, &x2, 0), Rel::Le, LinExpr::constant(rat(101))),
        ];
        let s1 = PolyConstraint::conj([
            LinAtom::cmp(&v(&x), Rel::Eq, &v(&x2)),
            LinAtom::cmp(&v(&y), Rel::Eq, &v(&y2)),
        ]);
        let s2 = PolyConstraint::conj([
            LinAtom::cmp(&lin(3, &x, 0, &y, 0), Rel::Le, &lin(2, &y, 0, &x, 0)),
            LinAtom::cmp(&lin(2, &y, 0, &x, 0), Rel::Le, &lin(3, &x, 0, &y, 1)),
        ]);
        let s3 = PolyConstraint::conj([
            LinAtom::cmp(
                &LinExpr::constant(rat(99)),
                Rel::Le,
                &lin(3, &y2, 2, &x2, 0),
            ),
            LinAtom::cmp(
                &lin(3, &y2, 2, &x2, 0),
                Rel::Le,
                &LinExpr::constant(rat(101)),
            ),
        ]);
        let caps = th.caps;
        let atom = |lit: &Literal| crate::theory::lra::literal_poly(lit).unwrap();
        // each chained comparison is two literals, hence two leaves
        let leaves: Vec<(Vec<Literal>, PolyConstraint)> = vec![
            (vec![p.clone(), np.clone()], s1.clone()),
            (vec![l[0].clone(), np.clone()], atom(&l[0])),
            (vec![l[1].clone(), np.clone()], atom(&l[1])),
            (vec![p.clone(), l2[0].clone()], atom(&l2[0])),
            (vec![p.clone(), l2[1].clone()], atom(&l2[1])),
            (vec![l[0].clone(), l2[0].clone()], atom(&l[0])),
            (vec![l[1].clone(), l2[1].clone()], atom(&l[1])),
        ];
        let s2p = s1.and(&s2, caps).unwrap();
        let s3p = s2p.and(&s3, caps).unwrap();
        let boundaries = [(0, s1.clone()), (2, s2p), (4, s3p.clone()), (6, s3p)];
        let mut input = th.top(d);
        for (i, (lits, closer)) in leaves.iter().enumerate() {
            let case = Case {
                level: 3,
                sigmas: vec![input.clone()],
                lits: lits.clone(),
            };
            c.check_instance(Axiom::A1, &case)
                .unwrap_or_else(|e| panic!("leaf {}: {}", i, e));
            c.check_instance(Axiom::A2, &case)
                .unwrap_or_else(|e| panic!("leaf {}: {}", i, e));
            let want = input.and(closer, caps).unwrap();
            let mut stream = th.consistency(lits, d);
            let mut out = None;
            while let Some(cl) = stream.pull(&input).unwrap() {
                if equivalent(&cl.out, &want, caps).unwrap() {
                    out = Some(cl.out);
                    break;
                }
            }
            input = out.unwrap_or_else(|| panic!("leaf {} never yields {}", i, want));
            if let Some((_, chain)) = boundaries.iter().find(|(k, _)| *k == i) {
                assert!(
                    equivalent(&input, chain, caps).unwrap(),
                    "after leaf {}: {} vs {}",
                    i,
                    input,
                    chain
                );
            }
        }
    }
}
