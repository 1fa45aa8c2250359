//! Shuffle-model differentially private histograms.
//!
//! A library and CLI for simulating, parameterizing, auditing, and attacking
//! a multi-message shuffle protocol for frequency estimation. Each user
//! one-hot encodes their value, applies per-bit randomized response, and
//! submits the result alongside `k` randomized all-zero strings; a trusted
//! shuffler permutes all messages and an untrusted analyzer de-biases the
//! per-bin sums. The crates here cover:
//!
//! - [`protocol`]: the randomizer/shuffler/analyzer pipeline, dense and
//!   sparse, with deterministic per-message random streams;
//! - [`params`]: solving the privacy quadratic for the flip probability and
//!   evaluating every closed-form error, robustness, and amplification bound;
//! - [`audit`]: exact (enumeration-based) privacy audits of the reduced
//!   two-bit mechanism, including tight hockey-stick divergences;
//! - [`compact`]: index-list messages and the count-min domain-hashing
//!   transformation;
//! - [`adversary`]: manipulation attacks against this protocol and against a
//!   Hadamard-response baseline;
//! - [`topk`]: top-t selection and its approximation metrics;
//! - [`harness`]: corpus ingestion, multi-trial experiment orchestration, and
//!   CSV/JSON result emission.

pub mod adversary;
pub mod audit;
pub mod bits;
pub mod compact;
pub mod error;
pub mod harness;
pub mod params;
pub mod protocol;
pub mod stats;
pub mod topk;

mod rng;

pub use error::{Error, Result};
pub use protocol::{Dataset, Estimate, ProtocolParams};

pub use rng::{stream, trial_seed, StreamDomain};
