use std::ops::ControlFlow;

use log::{debug, trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    BranchOrder, Calculus, ExhaustReport, ExistsPolicy, ProofNode, Rule, SearchConfig,
    SearchOutcome, SearchStats, Verdict,
};
use crate::logic::{literals_of, substitute, Domain, Formula, Instantiation, Term, Var};
use crate::theory::{Theory, TheoryError};

enum Halt {
    Proved,
    NodeBudget,
    Error(TheoryError),
}

type Flow = ControlFlow<Halt>;

#[derive(Clone, Debug)]
struct Entry {
    formula: Formula,
    expansions: usize,
}

#[derive(Clone, Debug)]
struct Goal {
    ctx: Vec<Entry>,
    domain: Domain,
    path: u64,
}

impl Goal {
    fn formulas(&self) -> Vec<Formula> {
        self.ctx.iter().map(|e| e.formula.clone()).collect()
    }

    fn push(&mut self, f: Formula) {
        self.ctx.push(Entry {
            formula: f,
            expansions: 0,
        });
    }
}

fn mix(path: u64, step: u64) -> u64 {
    let mut z = path
        ^ step
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

type Cont<'k, 'a, T> = dyn FnMut(
        &mut Engine<'a, T>,
        ProofNode<<T as Theory>::Constraint>,
        <T as Theory>::Constraint,
    ) -> Flow
    + 'k;

struct Engine<'a, T: Theory> {
    th: &'a T,
    cfg: &'a SearchConfig,
    stats: SearchStats,
    fresh: usize,
    cap: usize,
    pull_budget_hit: bool,
    exists_cap_hit: bool,
    stream_bounded: bool,
    result: Option<(ProofNode<T::Constraint>, T::Constraint)>,
}

macro_rules! theory {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => return ControlFlow::Break(Halt::Error(err.into())),
        }
    };
}

impl<'a, T: Theory> Engine<'a, T> {
    fn sdi(&self) -> bool {
        self.cfg.calculus == Calculus::Sdi
    }

    fn node_input(&self, input: &T::Constraint) -> Option<T::Constraint> {
        self.sdi().then(|| input.clone())
    }

    fn fresh_var(&mut self, bound: &Var, meta: bool) -> Var {
        self.fresh += 1;
        if meta {
            Var::meta(&format!("?{}{}", bound.name, self.fresh), bound.sort)
        } else {
            Var::eigen(&format!("{}!{}", bound.name, self.fresh), bound.sort)
        }
    }

    /// Node expansions and DI meets share one budget.
    fn budget(&self) -> Flow {
        if self.stats.nodes + self.stats.meets > self.cfg.nodes {
            return ControlFlow::Break(Halt::NodeBudget);
        }
        ControlFlow::Continue(())
    }

    fn solve(&mut self, goal: Goal, input: T::Constraint, k: &mut Cont<'_, 'a, T>) -> Flow {
        self.stats.nodes += 1;
        self.budget()?;
        let find = |pred: &dyn Fn(&Entry) -> bool| goal.ctx.iter().position(pred);
        if let Some(i) = find(&|e| matches!(e.formula, Formula::Or(..))) {
            return self.apply_or(goal, i, input, k);
        }
        if let Some(i) = find(&|e| matches!(e.formula, Formula::Forall(..))) {
            return self.apply_forall(goal, i, input, k);
        }
        if self.cfg.exists_policy == ExistsPolicy::Eager {
            if let Some(i) =
                find(&|e| matches!(e.formula, Formula::Exists(..)) && e.expansions == 0)
            {
                return self.apply_exists(goal, i, input, k);
            }
        }
        if let Some(i) = goal
            .ctx
            .iter()
            .rposition(|e| matches!(e.formula, Formula::And(..)))
        {
            return self.apply_and(goal, i, input, k);
        }
        self.leaf(&goal, &input, k)?;
        let mut best: Option<usize> = None;
        let mut capped = false;
        for (i, e) in goal.ctx.iter().enumerate() {
            if !matches!(e.formula, Formula::Exists(..)) {
                continue;
            }
            if e.expansions >= self.cap {
                capped = true;
            } else if best.map_or(true, |b| e.expansions < goal.ctx[b].expansions) {
                best = Some(i);
            }
        }
        match best {
            Some(i) => self.apply_exists(goal, i, input, k),
            None => {
                self.exists_cap_hit |= capped;
                ControlFlow::Continue(())
            }
        }
    }

    fn leaf(&mut self, goal: &Goal, input: &T::Constraint, k: &mut Cont<'_, 'a, T>) -> Flow {
        let context = goal.formulas();
        let lits = literals_of(&context);
        let d = &goal.domain;
        let pull_input = if self.sdi() {
            input.clone()
        } else {
            self.th.top(d)
        };
        let mut stream = self.th.consistency(&lits, d);
        for idx in 0..self.cfg.pulls {
            self.stats.pulls += 1;
            let Some(closure) = theory!(stream.pull(&pull_input)) else {
                self.stream_bounded |= !self.th.complete_streams();
                return ControlFlow::Continue(());
            };
            if !theory!(self.th.p(self.cfg.p_mode, &closure.out, d)) {
                continue;
            }
            trace!("leaf {} closes with {}", d, closure.out);
            let node = ProofNode {
                rule: Rule::Leaf {
                    used: closure.used,
                    stream_index: idx,
                },
                domain: d.clone(),
                context: context.clone(),
                principal: None,
                input: self.node_input(input),
                output: closure.out.clone(),
                children: Vec::new(),
            };
            k(self, node, closure.out)?;
            self.stats.backtracks += 1;
        }
        self.pull_budget_hit = true;
        ControlFlow::Continue(())
    }

    fn apply_or(
        &mut self,
        goal: Goal,
        i: usize,
        input: T::Constraint,
        k: &mut Cont<'_, 'a, T>,
    ) -> Flow {
        let principal = goal.ctx[i].formula.clone();
        let Formula::Or(a, b) = &principal else {
            unreachable!()
        };
        let mut child = goal.clone();
        child.ctx.remove(i);
        child.push((**a).clone());
        child.push((**b).clone());
        let (d, context, node_input) = (
            goal.domain.clone(),
            goal.formulas(),
            self.node_input(&input),
        );
        self.solve(child, input, &mut |eng, t, c| {
            let node = ProofNode {
                rule: Rule::Or,
                domain: d.clone(),
                context: context.clone(),
                principal: Some(principal.clone()),
                input: node_input.clone(),
                output: c.clone(),
                children: vec![t],
            };
            k(eng, node, c)
        })
    }

    fn apply_forall(
        &mut self,
        goal: Goal,
        i: usize,
        input: T::Constraint,
        k: &mut Cont<'_, 'a, T>,
    ) -> Flow {
        let principal = goal.ctx[i].formula.clone();
        let Formula::Forall(x, body) = &principal else {
            unreachable!()
        };
        let eigen = self.fresh_var(x, false);
        let mut child = goal.clone();
        child.ctx.remove(i);
        child.domain = theory!(goal
            .domain
            .add_eigen(eigen.clone())
            .map_err(TheoryError::from));
        child.push(theory!(substitute(
            body,
            &x.name,
            &Term::Var(eigen.clone())
        )
        .map_err(TheoryError::from)));
        let (d, context, node_input) = (
            goal.domain.clone(),
            goal.formulas(),
            self.node_input(&input),
        );
        self.solve(child, input, &mut |eng, t, c| {
            let node = ProofNode {
                rule: Rule::Forall {
                    eigen: eigen.name.clone(),
                },
                domain: d.clone(),
                context: context.clone(),
                principal: Some(principal.clone()),
                input: node_input.clone(),
                output: c.clone(),
                children: vec![t],
            };
            k(eng, node, c)
        })
    }

    fn apply_exists(
        &mut self,
        goal: Goal,
        i: usize,
        input: T::Constraint,
        k: &mut Cont<'_, 'a, T>,
    ) -> Flow {
        let principal = goal.ctx[i].formula.clone();
        let Formula::Exists(x, body) = &principal else {
            unreachable!()
        };
        let meta = self.fresh_var(x, true);
        let mut child = goal.clone();
        child.ctx[i].expansions += 1;
        child.domain = theory!(goal
            .domain
            .add_meta(meta.clone())
            .map_err(TheoryError::from));
        child.push(theory!(
            substitute(body, &x.name, &Term::Var(meta.clone())).map_err(TheoryError::from)
        ));
        child.path = mix(goal.path, self.fresh as u64);
        let child_domain = child.domain.clone();
        let child_input = theory!(self.th.lift(&input, &meta.name, &child_domain));
        let (d, context, node_input) = (
            goal.domain.clone(),
            goal.formulas(),
            self.node_input(&input),
        );
        debug!(
            "expanding {} as {} (expansion {})",
            principal,
            meta.name,
            goal.ctx[i].expansions + 1
        );
        self.solve(child, child_input, &mut |eng, t, c| {
            let projected = theory!(eng.th.project(&c, &meta.name, &child_domain));
            if !theory!(eng.th.p(eng.cfg.p_mode, &projected, &d)) {
                return ControlFlow::Continue(());
            }
            let node = ProofNode {
                rule: Rule::Exists {
                    meta: meta.name.clone(),
                },
                domain: d.clone(),
                context: context.clone(),
                principal: Some(principal.clone()),
                input: node_input.clone(),
                output: projected.clone(),
                children: vec![t],
            };
            k(eng, node, projected)
        })
    }

    fn first_child(&self, path: u64) -> usize {
        match self.cfg.order {
            BranchOrder::Left => 0,
            BranchOrder::Right => 1,
            BranchOrder::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, path));
                usize::from(rng.random::<bool>())
            }
        }
    }

    fn apply_and(
        &mut self,
        goal: Goal,
        i: usize,
        input: T::Constraint,
        k: &mut Cont<'_, 'a, T>,
    ) -> Flow {
        let principal = goal.ctx[i].formula.clone();
        let Formula::And(a, b) = &principal else {
            unreachable!()
        };
        let mut base = goal.clone();
        base.ctx.remove(i);
        let mut left = base.clone();
        left.push((**a).clone());
        left.path = mix(goal.path, 1);
        let mut right = base;
        right.push((**b).clone());
        right.path = mix(goal.path, 2);
        let (d, context, node_input) = (
            goal.domain.clone(),
            goal.formulas(),
            self.node_input(&input),
        );
        let make = |first: usize,
                    children: Vec<ProofNode<T::Constraint>>,
                    output: T::Constraint| ProofNode {
            rule: Rule::And { first },
            domain: d.clone(),
            context: context.clone(),
            principal: Some(principal.clone()),
            input: node_input.clone(),
            output,
            children,
        };
        if !self.sdi() {
            // right-hand solutions are independent of the left ones: keep them once complete
            let mut memo: Option<Vec<(ProofNode<T::Constraint>, T::Constraint)>> = None;
            // the continuation only depends on the constraint: repeats cannot succeed where the first failed
            let mut seen_left: Vec<T::Constraint> = Vec::new();
            let mut seen_meet: Vec<T::Constraint> = Vec::new();
            let top = self.th.top(&d);
            return self.solve(left, top.clone(), &mut |eng, tl, cl| {
                if seen_left.contains(&cl) {
                    return ControlFlow::Continue(());
                }
                seen_left.push(cl.clone());
                let mut join =
                    |eng: &mut Engine<'a, T>, tr: ProofNode<T::Constraint>, cr: T::Constraint| {
                        eng.stats.meets += 1;
                        eng.budget()?;
                        let Some(m) = theory!(eng.th.meet(&cl, &cr, &d)) else {
                            eng.stats.backtracks += 1;
                            return ControlFlow::Continue(());
                        };
                        if seen_meet.contains(&m) {
                            return ControlFlow::Continue(());
                        }
                        seen_meet.push(m.clone());
                        if !theory!(eng.th.p(eng.cfg.p_mode, &m, &d)) {
                            eng.stats.backtracks += 1;
                            return ControlFlow::Continue(());
                        }
                        k(eng, make(0, vec![tl.clone(), tr], m.clone()), m)
                    };
                if let Some(sols) = &memo {
                    for (tr, cr) in sols.clone() {
                        join(eng, tr, cr)?;
                    }
                    return ControlFlow::Continue(());
                }
                let mut acc: Vec<(ProofNode<T::Constraint>, T::Constraint)> = Vec::new();
                let flow = eng.solve(right.clone(), top.clone(), &mut |eng, tr, cr| {
                    if acc.iter().any(|(_, c)| *c == cr) {
                        return ControlFlow::Continue(());
                    }
                    acc.push((tr.clone(), cr.clone()));
                    join(eng, tr, cr)
                });
                if flow.is_continue() {
                    memo = Some(acc);
                }
                flow
            });
        }
        let first = self.first_child(goal.path);
        let (g0, g1) = if first == 0 {
            (left, right)
        } else {
            (right, left)
        };
        let mut seen_first: Vec<T::Constraint> = Vec::new();
        self.solve(g0, input, &mut |eng, t0, c0| {
            if seen_first.contains(&c0) {
                return ControlFlow::Continue(());
            }
            seen_first.push(c0.clone());
            let mut seen_second: Vec<T::Constraint> = Vec::new();
            eng.solve(g1.clone(), c0, &mut |eng, t1, c1| {
                if seen_second.contains(&c1) {
                    return ControlFlow::Continue(());
                }
                seen_second.push(c1.clone());
                let children = if first == 0 {
                    vec![t0.clone(), t1]
                } else {
                    vec![t1, t0.clone()]
                };
                k(eng, make(first, children, c1.clone()), c1)
            })
        })
    }
}

fn exists_caps(max: usize) -> Vec<usize> {
    let mut caps = Vec::new();
    let mut c = 1;
    while c < max {
        caps.push(c);
        c *= 2;
    }
    caps.push(max);
    caps
}

fn run<T: Theory>(
    th: &T,
    gamma: &[Formula],
    d: &Domain,
    sigma0: T::Constraint,
    cfg: &SearchConfig,
) -> SearchOutcome<T::Constraint> {
    let mut eng = Engine {
        th,
        cfg,
        stats: SearchStats::default(),
        fresh: 0,
        cap: 1,
        pull_budget_hit: false,
        exists_cap_hit: false,
        stream_bounded: false,
        result: None,
    };
    let root = Goal {
        ctx: gamma
            .iter()
            .map(|f| Entry {
                formula: f.clone(),
                expansions: 0,
            })
            .collect(),
        domain: d.clone(),
        path: 0,
    };
    for cap in exists_caps(cfg.max_exists) {
        eng.cap = cap;
        eng.stats.rounds += 1;
        eng.stats.exists_cap = cap;
        eng.pull_budget_hit = false;
        eng.exists_cap_hit = false;
        eng.stream_bounded = false;
        debug!("search round with existential cap {}", cap);
        let flow = eng.solve(root.clone(), sigma0.clone(), &mut |eng, t, c| {
            let accepted = if d.metas().is_empty() {
                theory!(eng.th.compatible(&Instantiation::empty(), &c, d))
            } else {
                theory!(eng.th.p(eng.cfg.p_mode, &c, d))
            };
            if !accepted {
                eng.stats.backtracks += 1;
                return ControlFlow::Continue(());
            }
            eng.result = Some((t, c));
            ControlFlow::Break(Halt::Proved)
        });
        match flow {
            ControlFlow::Break(Halt::Proved) => {
                let (tree, constraint) = eng.result.take().expect("proof recorded");
                return SearchOutcome::Proved {
                    tree,
                    constraint,
                    stats: eng.stats,
                };
            }
            ControlFlow::Break(Halt::NodeBudget) => {
                return SearchOutcome::Exhausted(ExhaustReport {
                    stats: eng.stats,
                    node_budget_hit: true,
                    pull_budget_hit: eng.pull_budget_hit,
                    exists_cap_hit: eng.exists_cap_hit,
                    stream_bounded: eng.stream_bounded,
                    verdict: Verdict::Unknown,
                });
            }
            ControlFlow::Break(Halt::Error(error)) => {
                return SearchOutcome::ResourceError {
                    error,
                    stats: eng.stats,
                }
            }
            ControlFlow::Continue(()) if eng.exists_cap_hit && cap < cfg.max_exists => continue,
            ControlFlow::Continue(()) => break,
        }
    }
    let cut = eng.pull_budget_hit || eng.exists_cap_hit || eng.stream_bounded;
    SearchOutcome::Exhausted(ExhaustReport {
        stats: eng.stats.clone(),
        node_budget_hit: false,
        pull_budget_hit: eng.pull_budget_hit,
        exists_cap_hit: eng.exists_cap_hit,
        stream_bounded: eng.stream_bounded,
        verdict: if cut {
            Verdict::Unknown
        } else {
            Verdict::Unprovable
        },
    })
}

const SEARCH_STACK: usize = 512 << 20;

/// Runs the configured calculus from `top(d)` (SDI) or with no input (DI).
pub fn prove<T>(
    gamma: &[Formula],
    d: &Domain,
    theory: &T,
    cfg: &SearchConfig,
) -> SearchOutcome<T::Constraint>
where
    T: Theory + Sync,
    T::Constraint: Send,
{
    let sigma0 = theory.top(d);
    prove_from(sigma0, gamma, d, theory, cfg)
}

fn prove_from<T>(
    sigma0: T::Constraint,
    gamma: &[Formula],
    d: &Domain,
    theory: &T,
    cfg: &SearchConfig,
) -> SearchOutcome<T::Constraint>
where
    T: Theory + Sync,
    T::Constraint: Send,
{
    // continuation-passing search nests one frame per node of the current partial proof
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .name("search".into())
            .stack_size(SEARCH_STACK)
            .spawn_scoped(s, || run(theory, gamma, d, sigma0, cfg))
            .expect("spawn search thread")
            .join()
            .unwrap_or_else(|p| std::panic::resume_unwind(p))
    })
}

pub fn prove_di<T>(
    gamma: &[Formula],
    d: &Domain,
    theory: &T,
    cfg: &SearchConfig,
) -> SearchOutcome<T::Constraint>
where
    T: Theory + Sync,
    T::Constraint: Send,
{
    let cfg = SearchConfig {
        calculus: Calculus::Di,
        ..cfg.clone()
    };
    prove_from(theory.top(d), gamma, d, theory, &cfg)
}

pub fn prove_sdi<T>(
    sigma0: T::Constraint,
    gamma: &[Formula],
    d: &Domain,
    theory: &T,
    cfg: &SearchConfig,
) -> SearchOutcome<T::Constraint>
where
    T: Theory + Sync,
    T::Constraint: Send,
{
    let cfg = SearchConfig {
        calculus: Calculus::Sdi,
        ..cfg.clone()
    };
    prove_from(sigma0, gamma, d, theory, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{Literal, Signature, Sort};
    use crate::theory::fol::FolTheory;

    fn p(t: Term) -> Formula {
        Formula::lit(Literal::pred("p", vec![t]))
    }
    fn np(t: Term) -> Formula {
        Formula::lit(Literal::pred("p", vec![t]).negate())
    }
    fn bx() -> Var {
        Var::bound("x", Sort::Uninterpreted)
    }

    fn setup() -> (FolTheory, Domain) {
        let sig = Signature::default();
        let d = sig.initial_domain();
        (FolTheory::new(sig), d)
    }

    #[test]
    fn excluded_middle_under_exists() {
        let (th, d) = setup();
        let x = Term::Var(bx());
        let goal = Formula::Exists(bx(), Box::new(Formula::or(p(x.clone()), np(x))));
        for calculus in [Calculus::Di, Calculus::Sdi] {
            let cfg = SearchConfig {
                calculus,
                ..SearchConfig::default()
            };
            let out = prove(&[goal.clone()], &d, &th, &cfg);
            assert!(out.is_proved(), "{:?}", calculus);
        }
    }

    #[test]
    fn drinker_needs_two_expansions() {
        let (th, d) = setup();
        let y = Var::bound("y", Sort::Uninterpreted);
        let goal = Formula::Exists(
            bx(),
            Box::new(Formula::or(
                np(Term::Var(bx())),
                Formula::Forall(y.clone(), Box::new(p(Term::Var(y)))),
            )),
        );
        let out = prove(&[goal], &d, &th, &SearchConfig::default());
        let SearchOutcome::Proved { tree, .. } = out else {
            panic!("not proved: {:?}", out)
        };
        let metas = tree
            .preorder()
            .iter()
            .filter(|n| matches!(n.rule, Rule::Exists { .. }))
            .count();
        assert_eq!(metas, 2);
    }

    #[test]
    fn lone_atom_is_unprovable() {
        let (th, d) = setup();
        let out = prove(
            &[p(Term::Var(Var::eigen("c0", Sort::Uninterpreted)))],
            &d,
            &th,
            &SearchConfig::default(),
        );
        let SearchOutcome::Exhausted(r) = out else {
            panic!()
        };
        assert_eq!(r.verdict, Verdict::Unprovable);
    }

    #[test]
    fn exists_caps_double() {
        assert_eq!(exists_caps(4), vec![1, 2, 4]);
        assert_eq!(exists_caps(5), vec![1, 2, 4, 5]);
        assert_eq!(exists_caps(1), vec![1]);
    }
}
