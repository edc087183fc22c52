use thiserror::Error;

use super::{ProofNode, Rule};
use crate::logic::{literals_of, substitute, Domain, Formula, Instantiation, Literal, Term, Var};
use crate::theory::{GroundValidity, Theory, TheoryError};

/// Closes a leaf when its instantiated literals are ground-valid.
pub fn check_lk1_leaf(lits: &[Literal], gvp: &dyn GroundValidity) -> Result<bool, TheoryError> {
    gvp.ground_valid(lits)
}

fn sorted(mut v: Vec<Formula>) -> Vec<Formula> {
    v.sort();
    v
}

fn without(ctx: &[Formula], principal: &Formula) -> Option<Vec<Formula>> {
    let i = ctx.iter().position(|f| f == principal)?;
    let mut out = ctx.to_vec();
    out.remove(i);
    Some(out)
}

fn same_multiset(a: &[Formula], b: Vec<Formula>) -> bool {
    sorted(a.to_vec()) == sorted(b)
}

/// Independent audit of a DI tree (no inputs) or an SDI tree (inputs everywhere).
pub fn check_proof<T: Theory>(tree: &ProofNode<T::Constraint>, theory: &T) -> Result<(), String> {
    check_node(tree, theory, tree.input.is_some(), "root")
}

fn check_node<T: Theory>(
    n: &ProofNode<T::Constraint>,
    th: &T,
    sdi: bool,
    at: &str,
) -> Result<(), String> {
    let fail = |msg: String| Err(format!("{}: {}", at, msg));
    let terr = |e: TheoryError| format!("{}: {}", at, e);
    if n.input.is_some() != sdi {
        return fail("input constraints must be present exactly in SDI trees".into());
    }
    let d = &n.domain;
    let one_child = |rule: &str| -> Result<&ProofNode<T::Constraint>, String> {
        match n.children.as_slice() {
            [c] => Ok(c),
            _ => Err(format!("{}: {} node needs one premise", at, rule)),
        }
    };
    match &n.rule {
        Rule::Leaf { used, stream_index } => {
            if !n.children.is_empty() {
                return fail("leaf with premises".into());
            }
            let lits = literals_of(&n.context);
            if let Some(l) = used.iter().find(|l| !lits.contains(l)) {
                return fail(format!("used literal {} is not in the context", l));
            }
            let input = match &n.input {
                Some(i) => i.clone(),
                None => th.top(d),
            };
            let mut stream = th.consistency(&lits, d);
            let mut last = None;
            for _ in 0..=*stream_index {
                last = stream.pull(&input).map_err(terr)?;
                if last.is_none() {
                    break;
                }
            }
            match last {
                Some(c) if c.used == *used && c.out == n.output => {}
                Some(c) => {
                    return fail(format!(
                        "stream element {} is {} via {} literals, not {}",
                        stream_index,
                        c.out,
                        c.used.len(),
                        n.output
                    ))
                }
                None => return fail(format!("stream ends before element {}", stream_index)),
            }
        }
        Rule::Or => {
            let c = one_child("or")?;
            let Some(p @ Formula::Or(a, b)) = &n.principal else {
                return fail("or without a disjunction".into());
            };
            let Some(mut rest) = without(&n.context, p) else {
                return fail("principal not in context".into());
            };
            rest.push((**a).clone());
            rest.push((**b).clone());
            if c.domain != *d || !same_multiset(&c.context, rest) {
                return fail("premise context does not match the or rule".into());
            }
            if c.output != n.output || (sdi && c.input != n.input) {
                return fail("or must pass constraints through".into());
            }
            check_node(c, th, sdi, &format!("{}.0", at))?;
        }
        Rule::Forall { eigen } => {
            let c = one_child("forall")?;
            let Some(p @ Formula::Forall(x, body)) = &n.principal else {
                return fail("forall without a universal".into());
            };
            let Some(mut rest) = without(&n.context, p) else {
                return fail("principal not in context".into());
            };
            if d.contains(eigen) {
                return fail(format!("eigenvariable {} is not fresh", eigen));
            }
            let v = Var::eigen(eigen, x.sort);
            let expected_domain = d.add_eigen(v.clone()).map_err(|e| e.to_string())?;
            rest.push(substitute(body, &x.name, &Term::Var(v)).map_err(|e| e.to_string())?);
            if c.domain != expected_domain || !same_multiset(&c.context, rest) {
                return fail("premise does not match the forall rule".into());
            }
            if c.output != n.output || (sdi && c.input != n.input) {
                return fail("forall must pass constraints through".into());
            }
            check_node(c, th, sdi, &format!("{}.0", at))?;
        }
        Rule::Exists { meta } => {
            let c = one_child("exists")?;
            let Some(p @ Formula::Exists(x, body)) = &n.principal else {
                return fail("exists without an existential".into());
            };
            if !n.context.contains(p) {
                return fail("principal not in context".into());
            }
            if d.contains(meta) {
                return fail(format!("meta-variable {} is not fresh", meta));
            }
            let v = Var::meta(meta, x.sort);
            let expected_domain = d.add_meta(v.clone()).map_err(|e| e.to_string())?;
            let mut ctx = n.context.clone();
            ctx.push(substitute(body, &x.name, &Term::Var(v)).map_err(|e| e.to_string())?);
            if c.domain != expected_domain || !same_multiset(&c.context, ctx) {
                return fail("premise does not match the exists rule".into());
            }
            let projected = th.project(&c.output, meta, &c.domain).map_err(terr)?;
            if projected != n.output {
                return fail(format!(
                    "output {} is not the projection {}",
                    n.output, projected
                ));
            }
            if let Some(i) = &n.input {
                let lifted = th.lift(i, meta, &c.domain).map_err(terr)?;
                if c.input.as_ref() != Some(&lifted) {
                    return fail("premise input is not the lifted input".into());
                }
            }
            check_node(c, th, sdi, &format!("{}.0", at))?;
        }
        Rule::And { first } => {
            let [l, r] = n.children.as_slice() else {
                return fail("and node needs two premises".into());
            };
            let Some(p @ Formula::And(a, b)) = &n.principal else {
                return fail("and without a conjunction".into());
            };
            let Some(rest) = without(&n.context, p) else {
                return fail("principal not in context".into());
            };
            let mut lc = rest.clone();
            lc.push((**a).clone());
            let mut rc = rest;
            rc.push((**b).clone());
            if l.domain != *d
                || r.domain != *d
                || !same_multiset(&l.context, lc)
                || !same_multiset(&r.context, rc)
            {
                return fail("premises do not match the and rule".into());
            }
            if *first > 1 {
                return fail("branch index out of range".into());
            }
            if sdi {
                let (f, s) = if *first == 0 { (l, r) } else { (r, l) };
                if f.input != n.input || s.input.as_ref() != Some(&f.output) || s.output != n.output
                {
                    return fail("constraints are not threaded through the premises".into());
                }
            } else {
                match th.meet(&l.output, &r.output, d).map_err(terr)? {
                    Some(m) if m == n.output => {}
                    _ => return fail("output is not the meet of the premises".into()),
                }
            }
            check_node(l, th, sdi, &format!("{}.0", at))?;
            check_node(r, th, sdi, &format!("{}.1", at))?;
        }
    }
    Ok(())
}

/// Iterated projection down to the initial domain, then witnesses upwards.
pub fn fold<T: Theory>(
    sigma: &T::Constraint,
    d: &Domain,
    theory: &T,
) -> Result<Instantiation, TheoryError> {
    if !theory.satisfiable(sigma, d)? {
        return Err(TheoryError::Precondition(format!(
            "fold of unsatisfiable constraint {}",
            sigma
        )));
    }
    let mut levels = Vec::new();
    let (mut cur, mut dom) = (sigma.clone(), d.clone());
    while let Some(x) = dom.last_meta().cloned() {
        let next = theory.project(&cur, &x.name, &dom)?;
        levels.push((cur, dom.clone(), x.clone()));
        cur = next;
        dom = dom.without_meta(&x.name);
    }
    let mut rho = Instantiation::empty();
    for (s, dd, x) in levels.into_iter().rev() {
        let t = theory.witness(&s, &rho, &dd)?;
        rho = rho.extended(&x.name, t);
    }
    Ok(rho)
}

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("instantiation is not compatible with the final constraint")]
    Precondition,
    #[error("{at}: instantiation is not compatible with the node output")]
    Incompatible { at: String },
    #[error("{at}: leaf {lits:?} is not ground-valid")]
    LeafInvalid { at: String, lits: Vec<String> },
    #[error(transparent)]
    Theory(#[from] TheoryError),
}

/// Soundness by instantiation: every leaf of the tree, instantiated by `rho`
/// extended through witnesses at each existential step, is ground-valid.
pub fn reconstruct_ground<T: Theory>(
    tree: &ProofNode<T::Constraint>,
    rho: &Instantiation,
    theory: &T,
) -> Result<(), ReconstructError> {
    if !theory.compatible(rho, &tree.output, &tree.domain)? {
        return Err(ReconstructError::Precondition);
    }
    reconstruct(tree, rho, theory, "root")
}

fn reconstruct<T: Theory>(
    n: &ProofNode<T::Constraint>,
    rho: &Instantiation,
    th: &T,
    at: &str,
) -> Result<(), ReconstructError> {
    if !th.compatible(rho, &n.output, &n.domain)? {
        return Err(ReconstructError::Incompatible { at: at.to_string() });
    }
    match &n.rule {
        Rule::Leaf { used, .. } => {
            let ground = used
                .iter()
                .map(|l| rho.apply_literal(l))
                .collect::<Result<Vec<_>, _>>()
                .map_err(TheoryError::from)?;
            if !check_lk1_leaf(&ground, th.ground_validity())? {
                return Err(ReconstructError::LeafInvalid {
                    at: at.to_string(),
                    lits: ground.iter().map(|l| l.to_string()).collect(),
                });
            }
        }
        Rule::Exists { meta } => {
            let c = &n.children[0];
            let t = th.witness(&c.output, rho, &c.domain)?;
            reconstruct(c, &rho.extended(meta, t), th, &format!("{}.0", at))?;
        }
        _ => {
            for (i, c) in n.children.iter().enumerate() {
                reconstruct(c, rho, th, &format!("{}.{}", at, i))?;
            }
        }
    }
    Ok(())
}
