//! Semi-automated translation of natural-language requirements into IRM-SA
//! invariant models.
//!
//! The pipeline runs in stages: documents are segmented and parsed
//! ([`text`]), components and attributes are mined from grammatical roles
//! ([`extract`]), requirement items are typed ([`classify`]), knowledge flow
//! is inferred ([`flow`]), invariants are composed into a decomposition
//! graph ([`model`]) and finally checked ([`validate`]). Every uncertain
//! choice becomes a decision request answered through an append-only
//! [`flow::DecisionJournal`].

pub mod classify;
pub mod extract;
pub mod flow;
pub mod lexicon;
pub mod model;
pub mod pipeline;
pub mod text;
pub mod validate;
