//! Proof search modulo theories: ground, constraint-producing and
//! constraint-refining sequent calculi over pluggable constraint backends.

pub mod corpus;
pub mod frontend;
pub mod harness;
pub mod kernel;
pub mod logic;
pub mod theory;
