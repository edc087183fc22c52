use std::time::Instant;

use seqmod::corpus::CORPUS;
use seqmod::frontend::{run, CheckStatus, RunFlags, TheoryChoice};
use seqmod::kernel::{BranchOrder, Calculus, SearchConfig};

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
                calculus: Calculus::Sdi,
                order: BranchOrder::Left,
                ..base.clone()
            },
        ),
        (
            "sdi-right".to_string(),
            SearchConfig {
                calculus: Calculus::Sdi,
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

#[test]
fn corpus_outcomes_match_expectations_in_every_configuration() {
    for p in CORPUS {
        for (label, cfg) in configs() {
            let t = Instant::now();
            let flags = RunFlags {
                theory: p.theory(),
                cfg,
                check: true,
                ..RunFlags::default()
            };
            let r = run(&p.problem(), &flags).unwrap();
            eprintln!(
                "{:28} {:18} {:14} {:?} {:?}",
                p.name,
                label,
                r.outcome,
                t.elapsed(),
                r.check
            );
            assert_eq!(
                r.outcome == "proved",
                p.expect_theorem(),
                "{} under {}",
                p.name,
                label
            );
            if let Some(c) = &r.check {
                assert_eq!(c.proof_check, CheckStatus::Ok, "{} under {}", p.name, label);
                assert!(!c.failed(), "{} under {}: {:?}", p.name, label, c);
            }
        }
    }
}

#[test]
fn fol_and_enumeration_prove_the_same_problems() {
    for p in CORPUS.iter().filter(|p| p.theory() == TheoryChoice::Fol) {
        let fol = run(
            &p.problem(),
            &RunFlags {
                theory: TheoryChoice::Fol,
                ..RunFlags::default()
            },
        )
        .unwrap();
        let cfg = SearchConfig {
            depth: 3,
            ..SearchConfig::default()
        };
        let en = run(
            &p.problem(),
            &RunFlags {
                theory: TheoryChoice::Enum,
                cfg,
                check: true,
                ..RunFlags::default()
            },
        )
        .unwrap();
        eprintln!(
            "{:28} fol={} enum={} {:?}",
            p.name, fol.outcome, en.outcome, en.check
        );
        assert_eq!(
            fol.outcome == "proved",
            en.outcome == "proved",
            "{}",
            p.name
        );
        assert!(!en.check.as_ref().is_some_and(|c| c.failed()), "{}", p.name);
    }
}
