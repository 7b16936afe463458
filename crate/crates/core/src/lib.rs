//! Meta-evaluation harness for factual-consistency metrics of summarization.
//!
//! The pipeline runs in stages, each reading and writing plain files:
//! corpus statistics, diagnostic dataset generation with injected factual
//! errors, metric scoring, meta-evaluation statistics and report rendering.

pub mod corpus;
pub mod metastats;
pub mod metrics;
pub mod perturb;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod taggers;
pub mod text;
