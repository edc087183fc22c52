//! DI and SDI proof search, proof checking, folding and ground reconstruction.

mod check;
mod search;

use std::fmt;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::logic::{Domain, Formula, Literal, Name};
use crate::theory::{PMode, TheoryError};

pub use check::{check_lk1_leaf, check_proof, fold, reconstruct_ground, ReconstructError};
pub use search::{prove, prove_di, prove_sdi};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Calculus {
    Di,
    Sdi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "seed")]
pub enum BranchOrder {
    Left,
    Right,
    Random(u64),
}

/// When existential formulas get their first expansion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExistsPolicy {
    /// Right after the invertible rules, before conjunctions are split.
    #[default]
    Eager,
    /// Only once a branch is quiescent and its leaf closures failed.
    Delayed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SearchConfig {
    pub calculus: Calculus,
    pub order: BranchOrder,
    pub max_exists: usize,
    pub pulls: usize,
    pub nodes: usize,
    pub depth: usize,
    pub p_mode: PMode,
    pub exists_policy: ExistsPolicy,
}

impl Default for SearchConfig {
    fn default() -> SearchConfig {
        SearchConfig {
            calculus: Calculus::Sdi,
            order: BranchOrder::Left,
            max_exists: 4,
            pulls: 64,
            nodes: 200_000,
            depth: 2,
            p_mode: PMode::Satisfiability,
            exists_policy: ExistsPolicy::Eager,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (n, v) in [
            ("max-exists", self.max_exists),
            ("pulls", self.pulls),
            ("nodes", self.nodes),
        ] {
            if v == 0 {
                return Err(format!("{} must be positive", n));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Rule {
    Leaf {
        used: Vec<Literal>,
        stream_index: usize,
    },
    /// `first` is the index (0 = left conjunct) of the child explored first.
    And {
        first: usize,
    },
    Or,
    Exists {
        meta: Name,
    },
    Forall {
        eigen: Name,
    },
}

impl Rule {
    pub fn tag(&self) -> &'static str {
        match self {
            Rule::Leaf { .. } => "leaf",
            Rule::And { .. } => "and",
            Rule::Or => "or",
            Rule::Exists { .. } => "exists",
            Rule::Forall { .. } => "forall",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProofNode<C> {
    pub rule: Rule,
    pub domain: Domain,
    pub context: Vec<Formula>,
    pub principal: Option<Formula>,
    /// Input constraint (SDI only).
    pub input: Option<C>,
    pub output: C,
    pub children: Vec<ProofNode<C>>,
}

impl<C> ProofNode<C> {
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(ProofNode::size).sum::<usize>()
    }

    /// Nodes in depth-first, left-to-right order.
    pub fn preorder(&self) -> Vec<&ProofNode<C>> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.preorder());
        }
        out
    }

    /// Leaves in the order SDI visits them (the first-explored child first).
    pub fn leaves_in_search_order(&self) -> Vec<&ProofNode<C>> {
        match &self.rule {
            Rule::Leaf { .. } => vec![self],
            Rule::And { first } if self.children.len() == 2 => {
                let mut out = self.children[*first].leaves_in_search_order();
                out.extend(self.children[1 - first].leaves_in_search_order());
                out
            }
            _ => self
                .children
                .iter()
                .flat_map(|c| c.leaves_in_search_order())
                .collect(),
        }
    }
}

impl<C: Serialize> Serialize for ProofNode<C> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(None)?;
        m.serialize_entry("rule", self.rule.tag())?;
        match &self.rule {
            Rule::Leaf { stream_index, .. } => m.serialize_entry("stream_index", stream_index)?,
            Rule::And { first } => m.serialize_entry("first", first)?,
            Rule::Exists { meta } => m.serialize_entry("meta", &**meta)?,
            Rule::Forall { eigen } => m.serialize_entry("eigen", &**eigen)?,
            Rule::Or => {}
        }
        m.serialize_entry("domain", &self.domain)?;
        let ctx: Vec<String> = self.context.iter().map(|f| f.to_string()).collect();
        m.serialize_entry("context", &ctx)?;
        if let Some(p) = &self.principal {
            m.serialize_entry("principal", &p.to_string())?;
        }
        if let Some(i) = &self.input {
            m.serialize_entry("input", i)?;
        }
        m.serialize_entry("output", &self.output)?;
        let used: Vec<String> = match &self.rule {
            Rule::Leaf { used, .. } => used.iter().map(|l| l.to_string()).collect(),
            _ => Vec::new(),
        };
        m.serialize_entry("used", &used)?;
        m.serialize_entry("children", &self.children)?;
        m.end()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SearchStats {
    pub nodes: usize,
    /// Meets of premise outputs (DI only); they count against the node budget.
    pub meets: usize,
    pub pulls: usize,
    pub backtracks: usize,
    pub rounds: usize,
    pub exists_cap: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// Every alternative was explored and none closed.
    Unprovable,
    /// Some budget, cap or enumeration bound cut the search short.
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExhaustReport {
    pub stats: SearchStats,
    pub node_budget_hit: bool,
    pub pull_budget_hit: bool,
    pub exists_cap_hit: bool,
    pub stream_bounded: bool,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SearchOutcome<C> {
    Proved {
        tree: ProofNode<C>,
        constraint: C,
        stats: SearchStats,
    },
    Exhausted(ExhaustReport),
    ResourceError {
        error: TheoryError,
        stats: SearchStats,
    },
}

impl<C> SearchOutcome<C> {
    pub fn is_proved(&self) -> bool {
        matches!(self, SearchOutcome::Proved { .. })
    }

    pub fn stats(&self) -> &SearchStats {
        match self {
            SearchOutcome::Proved { stats, .. } | SearchOutcome::ResourceError { stats, .. } => {
                stats
            }
            SearchOutcome::Exhausted(r) => &r.stats,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            SearchOutcome::Proved { .. } => "proved",
            SearchOutcome::Exhausted(r) if r.verdict == Verdict::Unprovable => "unprovable",
            SearchOutcome::Exhausted(_) => "unknown",
            SearchOutcome::ResourceError { .. } => "resource-error",
        }
    }
}

impl<C: fmt::Display> fmt::Display for ProofNode<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go<C: fmt::Display>(
            n: &ProofNode<C>,
            depth: usize,
            f: &mut fmt::Formatter<'_>,
        ) -> fmt::Result {
            let pad = "  ".repeat(depth);
            let ctx: Vec<String> = n.context.iter().map(|x| x.to_string()).collect();
            let label = match &n.rule {
                Rule::Leaf { used, stream_index } => {
                    let u: Vec<String> = used.iter().map(|l| l.to_string()).collect();
                    format!("leaf#{} [{}]", stream_index, u.join(", "))
                }
                Rule::And { first } => format!("and (first {})", first),
                Rule::Or => "or".to_string(),
                Rule::Exists { meta } => format!("exists {}", meta),
                Rule::Forall { eigen } => format!("forall {}", eigen),
            };
            match &n.input {
                Some(i) => writeln!(
                    f,
                    "{}{}  {} -> |-{} {} -> {}",
                    pad,
                    label,
                    i,
                    n.domain,
                    ctx.join(", "),
                    n.output
                )?,
                None => writeln!(
                    f,
                    "{}{}  |-{} {} -> {}",
                    pad,
                    label,
                    n.domain,
                    ctx.join(", "),
                    n.output
                )?,
            }
            for c in &n.children {
                go(c, depth + 1, f)?;
            }
            Ok(())
        }
        go(self, 0, f)
    }
}
