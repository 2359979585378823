//! Probabilistic soft logic over hinge-loss Markov random fields.
//!
//! The crate is `no_std` (it needs `alloc`) and covers the whole inference
//! path: Łukasiewicz semantics ([`logic`]), the `.psl` rule language
//! ([`lang`]), evidence-driven grounding into hinge-loss potentials
//! ([`ground`]), MAP inference ([`solver`]), the user-profiling model
//! family ([`models`]) and the relational baselines and metrics used to
//! evaluate it ([`eval`]).
//!
//! File formats, synthetic data and the command line live in the
//! `psl-harness` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod eval;
pub mod ground;
pub mod lang;
pub mod logic;
pub mod models;
pub mod solver;

pub use ground::{
    count_potentials, ground, ground_with, EvidenceDb, GroundConfig, GroundError, GroundProgram,
    HardConstraint, HingeLossPotential, Provenance, RuleCounts,
};
pub use lang::{parse_model, render_model, render_rule, ModelFile, ParseError, ParseErrorKind};
pub use logic::{
    distance_to_satisfaction, literal_value, luk_and, luk_not, luk_or, Closure, Exponent,
    GroundAtom, GroundLiteral, GroundRule, Interpretation, Literal, LogicError, PredicateDecl,
    Rule, Term, Weight,
};
pub use solver::{objective, solve_map, Method, SolveError, SolveResult, SolverConfig};
