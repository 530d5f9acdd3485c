//! Query evaluation over partially ordered relations (po-relations), and
//! decision procedures for the possibility (POSS) and certainty (CERT) of
//! answers.
//!
//! A po-relation is a bag relation whose tuple occurrences carry a strict
//! partial order; it stands for the set of list relations reachable through
//! its linear extensions. Positive relational algebra (selection,
//! projection, union, direct and lexicographic product, concatenation,
//! constants) is evaluated po-relation to po-relation, optionally topped by
//! monoid accumulation, group-by accumulation, or duplicate elimination.
//!
//! POSS asks whether a candidate answer is reached in some world, CERT
//! whether it is reached in every world. Both are intractable in general,
//! so [`decision`] dispatches between polynomial algorithms for tractable
//! fragments (bounded poset width, bounded ia-width, cancellative or finite
//! accumulation monoids, duplicate-free results) and budgeted exact search
//! everywhere else.
//!
//! The `porel` binary exposes the engine over a JSON database format and a
//! small textual query language; see the crate README.

mod bits;

pub mod accum;
pub mod algebra;
pub mod decision;
pub mod dedup;
pub mod io;
pub mod model;
pub mod order;
pub mod testkit;

pub use algebra::{eval, EvalError, EvalResult, Predicate, Query};
pub use decision::{cert, poss, Answer, Candidate, DecisionConfig, Strategy};
pub use model::{
    Bag, Budget, BudgetExceeded, DomainValue, Id, ListRelation, PoDatabase, PoRelation,
    RelationBuilder, TupleValue,
};
