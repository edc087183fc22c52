//! Terms, literals, NNF formulas, domains and instantiations.

mod domain;
mod formula;
mod term;

pub(crate) use domain::advance;
pub use domain::{
    default_rational_samples, enumerate_ground_terms, ground_terms_by_depth, Domain, Instantiation,
    Signature,
};
pub use formula::{check_sort, literals_of, substitute, Atom, Formula, Literal, Rel};
pub use term::{
    fmt_rat, name, parse_rat, rat, ratio, LinExpr, Name, Rat, Sort, Term, Var, VarKind,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("sort mismatch for {what}: expected {expected}, found {found}")]
    SortMismatch {
        what: String,
        expected: Sort,
        found: Sort,
    },
    #[error("name already declared: {0}")]
    NameClash(String),
    #[error("undeclared name: {0}")]
    Undeclared(String),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("{meta} may not depend on eigenvariable {eigen}")]
    Dependency { meta: String, eigen: String },
    #[error("term is not ground: {0}")]
    NotGround(String),
}
