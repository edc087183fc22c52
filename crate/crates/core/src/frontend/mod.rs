//! Problem files: reading, printing, normalisation and a one-call driver.

mod nnf;
mod parse;
mod print;
mod sexp;

use std::time::Instant;

use serde::Serialize;

use crate::kernel::{
    check_proof, fold, prove, reconstruct_ground, ExhaustReport, SearchConfig, SearchOutcome,
    SearchStats,
};
use crate::logic::{Domain, Formula};
use crate::theory::enumeration::EnumTheory;
use crate::theory::fol::FolTheory;
use crate::theory::lra::LraTheory;
use crate::theory::{Theory, TheoryError};

pub use nnf::to_nnf;
pub use parse::{parse, ParseError, ProblemFile, Surface};
pub use print::{print_atom, print_lin, print_problem, print_surface, print_term};
pub use sexp::{read_all, Pos, Sexp};

impl ProblemFile {
    pub fn goal_context(&self) -> Vec<Formula> {
        vec![to_nnf(&self.goal)]
    }

    pub fn initial_domain(&self) -> Domain {
        self.signature.initial_domain()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TheoryChoice {
    Fol,
    Enum,
    Lra,
}

impl std::str::FromStr for TheoryChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<TheoryChoice, String> {
        match s {
            "fol" => Ok(TheoryChoice::Fol),
            "enum" => Ok(TheoryChoice::Enum),
            "lra" => Ok(TheoryChoice::Lra),
            _ => Err(format!(
                "unknown theory {:?} (expected fol, enum or lra)",
                s
            )),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunFlags {
    pub theory: TheoryChoice,
    pub cfg: SearchConfig,
    /// Audit the proof, fold the final constraint and reconstruct a ground proof.
    pub check: bool,
    pub timing: bool,
    pub present_first: bool,
}

impl Default for RunFlags {
    fn default() -> RunFlags {
        RunFlags {
            theory: TheoryChoice::Fol,
            cfg: SearchConfig::default(),
            check: false,
            timing: false,
            present_first: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "detail", rename_all = "lowercase")]
pub enum CheckStatus {
    Ok,
    Failed(String),
    Skipped(String),
}

impl CheckStatus {
    fn from_result(r: Result<(), String>) -> CheckStatus {
        match r {
            Ok(()) => CheckStatus::Ok,
            Err(e) => CheckStatus::Failed(e),
        }
    }

    fn from_theory(e: TheoryError) -> CheckStatus {
        match e {
            TheoryError::Unsupported(m) => CheckStatus::Skipped(m),
            e => CheckStatus::Failed(e.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub proof_check: CheckStatus,
    pub fold: CheckStatus,
    pub reconstruction: CheckStatus,
}

impl CheckReport {
    pub fn failed(&self) -> bool {
        [&self.proof_check, &self.fold, &self.reconstruction]
            .iter()
            .any(|c| matches!(c, CheckStatus::Failed(_)))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub outcome: &'static str,
    pub theory: TheoryChoice,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proof: Option<serde_json::Value>,
    pub stats: SearchStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exhausted: Option<ExhaustReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckReport>,
    pub config: SearchConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u128>,
    /// Indented rendering of the proof tree.
    #[serde(skip)]
    pub proof_text: Option<String>,
}

impl RunReport {
    /// 0 proved, 1 exhausted, 3 resource error or failed check.
    pub fn exit_code(&self) -> i32 {
        if self.check.as_ref().is_some_and(CheckReport::failed) {
            return 3;
        }
        match self.outcome {
            "proved" => 0,
            "resource-error" => 3,
            _ => 1,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("outcome: {}\n", self.outcome);
        if let Some(c) = &self.constraint {
            out.push_str(&format!("constraint: {}\n", c));
        }
        if let Some(e) = &self.error {
            out.push_str(&format!("error: {}\n", e));
        }
        if let Some(x) = &self.exhausted {
            let mut cuts = Vec::new();
            for (hit, n) in [
                (x.node_budget_hit, "node budget"),
                (x.pull_budget_hit, "pull budget"),
                (x.exists_cap_hit, "exists cap"),
                (x.stream_bounded, "stream bound"),
            ] {
                if hit {
                    cuts.push(n);
                }
            }
            if !cuts.is_empty() {
                out.push_str(&format!("cut short by: {}\n", cuts.join(", ")));
            }
        }
        let s = &self.stats;
        out.push_str(&format!(
            "nodes: {}  meets: {}  pulls: {}  backtracks: {}  rounds: {}  exists cap: {}\n",
            s.nodes, s.meets, s.pulls, s.backtracks, s.rounds, s.exists_cap
        ));
        if let Some(c) = &self.check {
            let show = |c: &CheckStatus| match c {
                CheckStatus::Ok => "ok".to_string(),
                CheckStatus::Failed(m) => format!("FAILED ({})", m),
                CheckStatus::Skipped(m) => format!("skipped ({})", m),
            };
            out.push_str(&format!("proof check: {}\n", show(&c.proof_check)));
            out.push_str(&format!("fold: {}\n", show(&c.fold)));
            out.push_str(&format!("reconstruction: {}\n", show(&c.reconstruction)));
        }
        if let Some(ms) = self.wall_ms {
            out.push_str(&format!("wall: {} ms\n", ms));
        }
        if let Some(p) = &self.proof_text {
            out.push_str("proof:\n");
            out.push_str(p);
        }
        out
    }
}

fn audit<T: Theory>(
    tree: &crate::kernel::ProofNode<T::Constraint>,
    sigma: &T::Constraint,
    th: &T,
) -> CheckReport {
    let proof_check = CheckStatus::from_result(check_proof(tree, th));
    let (fold_status, rho) = match fold(sigma, &tree.domain, th) {
        Ok(rho) => (CheckStatus::Ok, Some(rho)),
        Err(e) => (CheckStatus::from_theory(e), None),
    };
    let reconstruction = match rho {
        None => CheckStatus::Skipped("no instantiation".into()),
        Some(rho) => match reconstruct_ground(tree, &rho, th) {
            Ok(()) => CheckStatus::Ok,
            Err(crate::kernel::ReconstructError::Theory(e)) => CheckStatus::from_theory(e),
            Err(e) => CheckStatus::Failed(e.to_string()),
        },
    };
    CheckReport {
        proof_check,
        fold: fold_status,
        reconstruction,
    }
}

fn run_with<T>(th: &T, problem: &ProblemFile, flags: &RunFlags) -> RunReport
where
    T: Theory + Sync,
    T::Constraint: Send,
{
    let start = Instant::now();
    let outcome = prove(
        &problem.goal_context(),
        &problem.initial_domain(),
        th,
        &flags.cfg,
    );
    let wall = start.elapsed().as_millis();
    let mut report = RunReport {
        outcome: outcome.tag(),
        theory: flags.theory,
        constraint: None,
        proof: None,
        stats: outcome.stats().clone(),
        exhausted: None,
        error: None,
        check: None,
        config: flags.cfg.clone(),
        wall_ms: flags.timing.then_some(wall),
        proof_text: None,
    };
    match outcome {
        SearchOutcome::Proved {
            tree, constraint, ..
        } => {
            report.constraint = Some(constraint.to_string());
            report.proof = Some(serde_json::to_value(&tree).expect("proof trees serialise"));
            report.proof_text = Some(tree.to_string());
            if flags.check {
                report.check = Some(audit(&tree, &constraint, th));
            }
        }
        SearchOutcome::Exhausted(x) => report.exhausted = Some(x),
        SearchOutcome::ResourceError { error, .. } => report.error = Some(error.to_string()),
    }
    report
}

/// Proves the goal of `problem` with the chosen backend.
pub fn run(problem: &ProblemFile, flags: &RunFlags) -> Result<RunReport, String> {
    flags.cfg.validate()?;
    log::info!("proving with {:?} / {:?}", flags.theory, flags.cfg.calculus);
    Ok(match flags.theory {
        TheoryChoice::Fol => run_with(&FolTheory::new(problem.signature.clone()), problem, flags),
        TheoryChoice::Enum => {
            let mut th = EnumTheory::new(problem.signature.clone(), flags.cfg.depth);
            th.present_first = flags.present_first;
            run_with(&th, problem, flags)
        }
        TheoryChoice::Lra => run_with(&LraTheory::default(), problem, flags),
    })
}
