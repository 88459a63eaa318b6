//! Simulation core for the isolate-then-identify (I@I) adaptive group-testing
//! scheme over noisy binary-input channels.
//!
//! The crate is `no_std` and only needs `alloc`. It is split along the two
//! halves of the scheme:
//!
//! * [`isolation`] partitions the population into teams, classifies each team
//!   as empty, exact (one sick member) or two-plus from noisy pooled tests, and
//!   re-divides two-plus teams until none remain.
//! * [`identification`] hands every member of an exact team a random codeword
//!   and maximum-likelihood decodes the sick member from the column tests.
//!
//! [`scheme`] glues the two together, records everything the decoder is allowed
//! to see in a [`transcript::Transcript`], and can replay a transcript without
//! any access to the ground truth ([`scheme::decode_only`]).
//!
//! [`channels`] holds the noise models and the information quantities (capacity
//! in bits, separation exponent in nats) that size the scheme. [`oracles`] holds
//! deliberately naive reference implementations used to cross-check the main
//! code paths.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` deliberately treats NaN as out of range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod channels;
mod error;
pub mod identification;
pub mod isolation;
pub mod oracles;
pub mod population;
mod quadrature;
pub mod scheme;
pub mod seeding;
pub mod transcript;

pub use channels::{ChannelKind, ChannelModel, Hypothesis, Observation};
pub use error::Error;
pub use identification::{BlockLengthPolicy, Codebook};
pub use isolation::{IsolationConfig, IsolationOutcome, IsolationSettings, TeamSchedule};
pub use population::{GroundTruth, Team, TeamLabel, TeamPartition, TestRow};
pub use scheme::{decode_only, run_scheme, SchemeConfig, SchemeResult};
pub use transcript::Transcript;

pub type Result<T, E = Error> = core::result::Result<T, E>;
