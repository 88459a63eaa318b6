//! Everything the decoder is allowed to see: test designs and their noisy
//! observations, round by round, plus the public parameters of the run.
//!
//! Nothing here refers to the ground truth or to noiseless outcomes.

use alloc::format;
use alloc::vec::Vec;

use crate::channels::{ChannelModel, Observation};
use crate::population::TestRow;
use crate::scheme::SchemeConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Phase {
    Isolation,
    Identification,
    Verification,
    Reidentification,
}

/// Tests aimed at one group of people: a team during isolation or
/// identification, a single candidate during verification.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestGroup {
    pub members: Vec<u32>,
    /// Empty when the run did not record rows; otherwise aligned with
    /// `observations`.
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Vec::is_empty")
    )]
    pub rows: Vec<TestRow>,
    pub observations: Vec<Observation>,
}

impl TestGroup {
    pub fn test_count(&self) -> usize {
        self.observations.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoundLog {
    pub index: usize,
    pub phase: Phase,
    /// Group count the design asked for; differs from `groups.len()` only when
    /// a partition was clamped to singleton teams.
    pub requested_groups: usize,
    pub groups: Vec<TestGroup>,
}

impl RoundLog {
    pub fn test_count(&self) -> usize {
        self.groups.iter().map(TestGroup::test_count).sum()
    }

    pub fn was_clamped(&self) -> bool {
        self.requested_groups != self.groups.len()
    }
}

/// Rounds accumulated while a run is in progress.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TestLog {
    pub record_rows: bool,
    pub rounds: Vec<RoundLog>,
}

impl TestLog {
    pub fn new(record_rows: bool) -> Self {
        Self {
            record_rows,
            rounds: Vec::new(),
        }
    }

    pub fn total_tests(&self) -> usize {
        self.rounds.iter().map(RoundLog::test_count).sum()
    }
}

/// Public parameters of a run. The seeds are derived values that let the
/// decoder rebuild codebooks and the failure fallback; the truth cannot be
/// recovered from them.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TranscriptHeader {
    pub n: usize,
    pub k: usize,
    pub channel: ChannelModel,
    pub config: SchemeConfig,
    pub codebook_seed: u64,
    pub fallback_seed: u64,
    pub rows_recorded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub header: TranscriptHeader,
    pub rounds: Vec<RoundLog>,
}

impl Transcript {
    pub fn total_tests(&self) -> usize {
        self.rounds.iter().map(RoundLog::test_count).sum()
    }

    /// Structural checks: rounds numbered in order, rows aligned with
    /// observations, observations inside the channel's output domain.
    pub fn validate(&self) -> Result<()> {
        if self.rounds.is_empty() {
            return Err(Error::MalformedTranscript("no rounds".into()));
        }
        for (i, round) in self.rounds.iter().enumerate() {
            if round.index != i {
                return Err(Error::MalformedTranscript(format!(
                    "round {i} carries index {}",
                    round.index
                )));
            }
            for group in &round.groups {
                if self.header.rows_recorded && group.rows.len() != group.observations.len() {
                    return Err(Error::MalformedTranscript(format!(
                        "round {i}: {} rows but {} observations",
                        group.rows.len(),
                        group.observations.len()
                    )));
                }
                if let Some(bad) = group
                    .observations
                    .iter()
                    .find(|o| !self.header.channel.contains(**o))
                {
                    return Err(Error::MalformedTranscript(format!(
                        "round {i}: observation {bad:?} outside the channel's output domain"
                    )));
                }
                if group.members.iter().any(|&m| m as usize >= self.header.n) {
                    return Err(Error::MalformedTranscript(format!(
                        "round {i}: member index out of range"
                    )));
                }
            }
        }
        Ok(())
    }
}
