//! Integrity constraints over synthetic datasets with injected,
//! labeled faults.
//!
//! Each constraint exists in two equivalent forms: a host-API query
//! plan built with [`crate::engine::QueryPlan`] (in [`queries`]) and a
//! query-language script (in [`corpus`]). Datasets come from seeded
//! generators that also emit the ground-truth fault set, so runs can
//! be scored with exact precision and recall (in [`suite`]).

pub mod corpus;
pub mod gen;
pub mod geometry;
pub mod prep;
pub mod queries;
pub mod suite;

pub use corpus::{build_corpus, export_corpus, truth_keys, CorpusEntry};
pub use queries::{iqr_bounds, EmptySeries};
pub use suite::{precision_recall, run_entry, run_host_suite, run_suite, ConstraintReport};
