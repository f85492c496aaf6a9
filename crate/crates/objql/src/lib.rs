//! An in-memory object-relational query engine for integrity-constraint
//! checking over semi-structured record collections.
//!
//! The crate is organized as:
//!
//! - [`value`]: the object-relational data model — values, deep equality,
//!   total ordering, and a canonical byte encoding used for hashing.
//! - [`engine`]: the optimized executor for the eight table operators
//!   (join, project, filter, order_by, group_by, flatten, unique, reduce)
//!   and for multi-statement programs.
//! - [`reference`]: a deliberately literal interpreter of the operator
//!   semantics, used as an oracle for differential testing.
//! - [`qlang`]: the text query language — lexer, parser, expression
//!   evaluator, and compiler down to engine programs.
//! - [`ingest`]: JSONL and CSV dataset loading, and JSONL saving.
//! - [`constraints`]: a corpus of integrity constraints over synthetic
//!   datasets with labeled injected faults.
//! - [`fuzz`]: random program generation for engine/reference
//!   differential fuzzing.
//! - [`cli`]: the `objql` command-line interface.

pub mod cli;
pub mod constraints;
pub mod engine;
pub mod fuzz;
pub mod ingest;
pub mod qlang;
pub mod reference;
pub mod value;
