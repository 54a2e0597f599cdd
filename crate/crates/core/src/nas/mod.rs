//! Layer-based architecture search space.
//!
//! A candidate is a fixed-length sequence of operation tokens drawn from a
//! vocabulary, written canonically as the tokens joined by `|`. Nothing like a
//! graph of the whole space is ever materialized: each food source carries its
//! own encoding, and a [`VisitedCache`] remembers what was already scored.

mod cache;
mod space;

pub use cache::{memoized_lookup, memoized_store, CachedEvaluation, VisitedCache};
pub use space::{
    decode, encode, ArchitectureEncoding, ArchitectureSpace, OpKind, OperationRecord,
    OperationSpec, SEPARATOR,
};
