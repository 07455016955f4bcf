//! Workbench for the output-length timing side channel of LLM serving.
//!
//! Traces of request/response observations are synthesized or loaded, run
//! through a serving-time simulator, and attacked by inferring the response
//! language or class from the output token count alone. Padding and related
//! defenses are scored with their overheads.

// NaN must fail range checks, so they are written as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod class;
pub mod defense;
pub mod experiment;
pub mod lang;
pub mod metrics;
pub mod planted;
pub mod seed;
pub mod servesim;
pub mod stats;
pub mod timing;
pub mod tokenizer;
pub mod trace;

pub use metrics::{AsrReport, LabelPrecision};
pub use trace::{load_trace, derive_features, DerivedFeatures, Mode, ObservationRecord, Timestamp, Trace};
