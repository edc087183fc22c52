use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use seqmod::corpus::{self, CORPUS};
use seqmod::frontend::{run, RunFlags, TheoryChoice};
use seqmod::harness::fm::{round_trip_suite, sat_suite};
use seqmod::kernel::{
    check_proof, prove, BranchOrder, Calculus, ProofNode, Rule, SearchConfig, SearchOutcome,
};
use seqmod::logic::{literals_of, rat, Atom, Instantiation, LinExpr, Literal, Rel, Term};
use seqmod::theory::lra::{equivalent, lra_sat, LinAtom, LraTheory, PolyConstraint};
use seqmod::theory::Theory;

const TWO_LINES: &str = "two_lines";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_seqmod"))
}

fn corpus_path(name: &str) -> String {
    let p = corpus::get(name).unwrap();
    format!(
        "{}/../core/corpus/{}.seq",
        env!("CARGO_MANIFEST_DIR"),
        p.name
    )
}

type Verdict = Result<String, String>;

fn two_lines(
    cfg: SearchConfig,
) -> (
    LraTheory,
    ProofNode<PolyConstraint>,
    PolyConstraint,
    Duration,
) {
    let problem = corpus::get(TWO_LINES).unwrap().problem();
    let th = LraTheory::default();
    let t = Instant::now();
    let out = prove(
        &problem.goal_context(),
        &problem.initial_domain(),
        &th,
        &cfg,
    );
    let took = t.elapsed();
    match out {
        SearchOutcome::Proved {
            tree, constraint, ..
        } => (th, tree, constraint, took),
        other => panic!("two-lines problem not proved: {}", other.tag()),
    }
}

/// X, Y, X', Y' as read off the leaf closed by the dual `p` pair.
fn metas(tree: &ProofNode<PolyConstraint>) -> [Term; 4] {
    for n in tree.preorder() {
        if let Rule::Leaf { used, .. } = &n.rule {
            let pos = used.iter().find(|l| l.positive && !l.atom.is_arith());
            let neg = used.iter().find(|l| !l.positive && !l.atom.is_arith());
            if let (
                Some(Literal {
                    atom: Atom::Pred(_, a),
                    ..
                }),
                Some(Literal {
                    atom: Atom::Pred(_, b),
                    ..
                }),
            ) = (pos, neg)
            {
                return [a[0].clone(), a[1].clone(), b[0].clone(), b[1].clone()];
            }
        }
    }
    panic!("no leaf closed by the predicate pair")
}

fn lin(t: &Term) -> LinExpr {
    t.to_lin().unwrap()
}

fn sum(parts: &[(i64, &Term)], k: i64) -> LinExpr {
    let mut e = LinExpr::constant(rat(k));
    for (c, t) in parts {
        e = e.add(&lin(t).scale(&rat(*c)));
    }
    e
}

/// σ₁ (X = X', Y = Y'), σ₂ (3X ≤ 2Y ≤ 3X + 1), σ₃ (99 ≤ 3Y' + 2X' ≤ 101).
fn chain_parts(m: &[Term; 4]) -> [PolyConstraint; 3] {
    let [x, y, x2, y2] = m;
    [
        PolyConstraint::conj([
            LinAtom::cmp(&lin(x), Rel::Eq, &lin(x2)),
            LinAtom::cmp(&lin(y), Rel::Eq, &lin(y2)),
        ]),
        PolyConstraint::conj([
            LinAtom::cmp(&sum(&[(3, x)], 0), Rel::Le, &sum(&[(2, y)], 0)),
            LinAtom::cmp(&sum(&[(2, y)], 0), Rel::Le, &sum(&[(3, x)], 1)),
        ]),
        PolyConstraint::conj([
            LinAtom::cmp(
                &LinExpr::constant(rat(99)),
                Rel::Le,
                &sum(&[(3, y2), (2, x2)], 0),
            ),
            LinAtom::cmp(
                &sum(&[(3, y2), (2, x2)], 0),
                Rel::Le,
                &LinExpr::constant(rat(101)),
            ),
        ]),
    ]
}

fn criterion_1() -> Verdict {
    let t = Instant::now();
    let out = bin()
        .args([
            "prove",
            &corpus_path(TWO_LINES),
            "--theory",
            "lra",
            "--calculus",
            "di",
            "--output",
            "json",
        ])
        .output()
        .unwrap();
    let cli_time = t.elapsed();
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    if out.status.code() != Some(0) || json["outcome"] != "proved" || json["constraint"] != "TRUE" {
        return Err(format!(
            "cli: exit {:?}, outcome {}, constraint {}",
            out.status.code(),
            json["outcome"],
            json["constraint"]
        ));
    }
    let cfg = SearchConfig {
        calculus: Calculus::Di,
        ..SearchConfig::default()
    };
    let (th, tree, root, took) = two_lines(cfg);
    if !root.is_true() {
        return Err(format!("root constraint {}", root));
    }
    let mut n = &tree;
    while matches!(n.rule, Rule::Or | Rule::Exists { .. }) {
        n = &n.children[0];
    }
    let pre = &n.output;
    if !lra_sat(pre, th.caps).map_err(|e| e.to_string())? {
        return Err(format!(
            "pre-projection constraint {} is unsatisfiable",
            pre
        ));
    }
    let [x, y, x2, y2] = metas(&tree);
    let point = |t: &Term, v: i64| match t {
        Term::Var(v0) => (v0.name.clone(), Term::Num(rat(v))),
        _ => panic!("meta expected"),
    };
    let rho = Instantiation::from_map_unchecked(
        [point(&x, 15), point(&y, 23), point(&x2, 15), point(&y2, 23)]
            .into_iter()
            .collect(),
    );
    if !th
        .compatible(&rho, pre, &n.domain)
        .map_err(|e| e.to_string())?
    {
        return Err(format!("{} is not compatible with {}", rho, pre));
    }
    if cli_time >= Duration::from_secs(1) || took >= Duration::from_secs(1) {
        return Err(format!("too slow: cli {:?}, search {:?}", cli_time, took));
    }
    Ok(format!(
        "root TRUE, {} compatible with the pre-projection constraint, search {:?}, cli {:?}",
        rho, took, cli_time
    ))
}

fn criterion_2() -> Verdict {
    let cfg = SearchConfig {
        calculus: Calculus::Sdi,
        order: BranchOrder::Left,
        ..SearchConfig::default()
    };
    let (th, tree, _, _) = two_lines(cfg);
    check_proof(&tree, &th)?;
    let m = metas(&tree);
    let [s1, s2, s3] = chain_parts(&m);
    let caps = th.caps;
    let s2p = s1.and(&s2, caps).map_err(|e| e.to_string())?;
    let s3p = s2p.and(&s3, caps).map_err(|e| e.to_string())?;
    // leaf groups: does the leaf hold p(X,Y) or l(X,Y); ¬p(X',Y') or l'(X',Y')
    let group = |n: &ProofNode<PolyConstraint>| {
        let lits = literals_of(&n.context);
        let has = |pos: bool| lits.iter().any(|l| l.positive == pos && !l.atom.is_arith());
        (if has(true) { 0 } else { 1 }) + (if has(false) { 0 } else { 2 })
    };
    let leaves = tree.leaves_in_search_order();
    let mut last: BTreeMap<usize, &PolyConstraint> = BTreeMap::new();
    for l in &leaves {
        last.insert(group(l), &l.output);
    }
    let expected = [
        (0, "σ1'", &s1),
        (1, "σ2'", &s2p),
        (2, "σ3'", &s3p),
        (3, "σ'", &s3p),
    ];
    let mut seen = Vec::new();
    for (g, label, want) in expected {
        let got = last.get(&g).ok_or(format!("no leaf in group {}", label))?;
        if !equivalent(got, want, caps).map_err(|e| e.to_string())? {
            return Err(format!(
                "{}: leaf output {} is not equivalent to {}",
                label, got, want
            ));
        }
        seen.push(label);
    }
    Ok(format!(
        "{} leaves, chain {} reproduced, proof checked",
        leaves.len(),
        seen.join(", ")
    ))
}

fn criterion_3() -> Verdict {
    let required = [
        "AX_proj", "AX_wit", "AX_meet", "AX_lift", "P1", "P2", "A1", "A2", "D1", "D2",
    ];
    let mut notes = Vec::new();
    let mut mutants = 0;
    let mut caught = 0;
    for theory in ["fol", "enum", "lra"] {
        let t = Instant::now();
        let out = bin()
            .args(["conformance", theory, "--output", "json"])
            .output()
            .unwrap();
        let took = t.elapsed();
        let json: serde_json::Value =
            serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
        for a in json["axioms"].as_array().unwrap() {
            let id = a["axiom"].as_str().unwrap();
            let failed = !a["failures"].as_array().unwrap().is_empty();
            if failed || (required.contains(&id) && a.get("skipped").is_some()) {
                return Err(format!("{}: {} did not pass", theory, id));
            }
        }
        for m in json["mutants"].as_array().unwrap() {
            mutants += 1;
            caught += m["caught_by"].is_string() as usize;
        }
        if took >= Duration::from_secs(60) {
            return Err(format!("{} took {:?}", theory, took));
        }
        notes.push(format!("{} {:.1}s", theory, took.as_secs_f64()));
    }
    if mutants != 6 || caught != 6 {
        return Err(format!("{} of {} mutants caught", caught, mutants));
    }
    Ok(format!(
        "all axioms pass ({}), 6/6 mutants caught",
        notes.join(", ")
    ))
}

fn configs() -> Vec<(String, SearchConfig)> {
    let base = SearchConfig::default();
    let mut out = vec![
        (
            "di".to_string(),
            SearchConfig {
                calculus: Calculus::Di,
                ..base.clone()
            },
        ),
        (
            "sdi-left".to_string(),
            SearchConfig {
                order: BranchOrder::Left,
                ..base.clone()
            },
        ),
        (
            "sdi-right".to_string(),
            SearchConfig {
                order: BranchOrder::Right,
                ..base.clone()
            },
        ),
    ];
    for seed in [1, 7, 42] {
        out.push((
            format!("sdi-random-{}", seed),
            SearchConfig {
                order: BranchOrder::Random(seed),
                ..base.clone()
            },
        ));
    }
    out
}

/// Outcome per configuration and problem, with `--check` on.
fn corpus_runs() -> Result<BTreeMap<String, BTreeMap<&'static str, &'static str>>, String> {
    let mut out = BTreeMap::new();
    for (label, cfg) in configs() {
        let mut row = BTreeMap::new();
        for p in CORPUS {
            let r = run(
                &p.problem(),
                &RunFlags {
                    theory: p.theory(),
                    cfg: cfg.clone(),
                    check: true,
                    ..RunFlags::default()
                },
            )?;
            if r.check.as_ref().is_some_and(|c| c.failed()) {
                return Err(format!("{} under {}: {:?}", p.name, label, r.check));
            }
            row.insert(p.name, r.outcome);
        }
        out.insert(label, row);
    }
    Ok(out)
}

fn criterion_4(
    runs: &Result<BTreeMap<String, BTreeMap<&'static str, &'static str>>, String>,
) -> Verdict {
    let runs = runs.as_ref().map_err(|e| e.clone())?;
    let proved: usize = runs
        .values()
        .map(|r| r.values().filter(|o| **o == "proved").count())
        .sum();
    Ok(format!(
        "{} checked proofs over {} configurations, zero failures",
        proved,
        runs.len()
    ))
}

fn proved(r: &BTreeMap<&'static str, &'static str>) -> BTreeSet<&'static str> {
    r.iter()
        .filter(|(_, o)| **o == "proved")
        .map(|(n, _)| *n)
        .collect()
}

fn criterion_5(
    runs: &Result<BTreeMap<String, BTreeMap<&'static str, &'static str>>, String>,
) -> Verdict {
    let runs = runs.as_ref().map_err(|e| e.clone())?;
    let reference = proved(&runs["di"]);
    let mut budget = BTreeSet::new();
    for (label, r) in runs {
        for (name, o) in r {
            if *o == "unknown" || *o == "resource-error" {
                budget.insert(format!("{}@{}", name, label));
            }
        }
        let mine = proved(r);
        let diff: Vec<_> = mine
            .symmetric_difference(&reference)
            .filter(|n| !budget.iter().any(|b| b.starts_with(&format!("{}@", n))))
            .collect();
        if !diff.is_empty() {
            return Err(format!("{} disagrees with di on {:?}", label, diff));
        }
    }
    Ok(format!(
        "{} problems proved identically in {} configurations; runs ending unknown: {:?}",
        reference.len(),
        runs.len(),
        budget
    ))
}

fn criterion_6() -> Verdict {
    let mut n = 0;
    for p in CORPUS.iter().filter(|p| p.theory() == TheoryChoice::Fol) {
        let fol = run(
            &p.problem(),
            &RunFlags {
                theory: TheoryChoice::Fol,
                ..RunFlags::default()
            },
        )?;
        let cfg = SearchConfig {
            depth: 3,
            ..SearchConfig::default()
        };
        let en = run(
            &p.problem(),
            &RunFlags {
                theory: TheoryChoice::Enum,
                cfg,
                ..RunFlags::default()
            },
        )?;
        if (fol.outcome == "proved") != (en.outcome == "proved") {
            return Err(format!(
                "{}: fol {} vs enum {}",
                p.name, fol.outcome, en.outcome
            ));
        }
        n += 1;
    }
    Ok(format!(
        "fol and enum (depth 3) agree on all {} first-order problems",
        n
    ))
}

fn criterion_7() -> Verdict {
    let trip = round_trip_suite(1000, 11);
    let sat = sat_suite(500, 12);
    if !trip.passed() || !sat.passed() {
        let first = trip
            .failures
            .iter()
            .chain(&sat.failures)
            .next()
            .cloned()
            .unwrap_or_default();
        return Err(format!(
            "{} round-trip and {} sat failures; first: {}",
            trip.failures.len(),
            sat.failures.len(),
            first
        ));
    }
    Ok(format!(
        "1000 round trips ({} satisfiable), 500/500 sat agreements ({} satisfiable)",
        trip.satisfiable, sat.satisfiable
    ))
}

#[test]
fn acceptance() {
    let runs = corpus_runs();
    let results: Vec<(usize, Verdict)> = vec![
        (1, criterion_1()),
        (2, criterion_2()),
        (3, criterion_3()),
        (4, criterion_4(&runs)),
        (5, criterion_5(&runs)),
        (6, criterion_6()),
        (7, criterion_7()),
    ];
    let mut out = std::io::stdout().lock();
    for (k, r) in &results {
        match r {
            Ok(msg) => writeln!(out, "criterion {}: PASS  {}", k, msg).unwrap(),
            Err(msg) => writeln!(out, "criterion {}: FAIL  {}", k, msg).unwrap(),
        }
    }
    drop(out);
    let failed: Vec<usize> = results
        .iter()
        .filter(|(_, r)| r.is_err())
        .map(|(k, _)| *k)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {:?}", failed);
}
