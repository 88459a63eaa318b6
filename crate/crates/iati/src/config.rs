//! Experiment configuration as read from JSON.

use std::path::{Path, PathBuf};

use iati_core::isolation::IsolationSettings;
use iati_core::scheme::VerificationSettings;
use iati_core::{BlockLengthPolicy, ChannelModel, SchemeConfig, TeamSchedule};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

fn default_f() -> f64 {
    0.5
}

fn default_trials() -> u64 {
    1
}

/// Where a run writes its results. Unset paths are skipped.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub csv: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    /// Directory that receives one `trial_<i>.jsonl` transcript per trial.
    pub transcripts: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub channel: ChannelModel,
    /// Inclusion rate of isolation rows.
    #[serde(default = "default_f")]
    pub f: f64,
    #[serde(default)]
    pub block_length: BlockLengthPolicy,
    /// Per-team misclassification target; `k^-3` when unset.
    #[serde(default)]
    pub delta_team: Option<f64>,
    #[serde(default)]
    pub tests_per_team: Option<u64>,
    #[serde(default)]
    pub max_rounds: Option<usize>,
    #[serde(default)]
    pub test_budget: Option<u64>,
    #[serde(default)]
    pub schedule: TeamSchedule,
    #[serde(default)]
    pub verify: bool,
    /// Tests per verified candidate; sized from `delta_team` when unset.
    #[serde(default)]
    pub verify_tests: Option<u64>,
    #[serde(default)]
    pub record_rows: bool,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputPaths,
}

impl ExperimentConfig {
    pub fn new(n: usize, k: usize, channel: ChannelModel) -> Self {
        Self {
            n,
            k,
            channel,
            f: default_f(),
            block_length: BlockLengthPolicy::default(),
            delta_team: None,
            tests_per_team: None,
            max_rounds: None,
            test_budget: None,
            schedule: TeamSchedule::Constant,
            verify: false,
            verify_tests: None,
            record_rows: false,
            trials: 1,
            seed: 0,
            output: OutputPaths::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        let config: Self = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn scheme(&self) -> SchemeConfig {
        SchemeConfig {
            isolation: IsolationSettings {
                inclusion_fraction: self.f,
                tests_per_team: self.tests_per_team,
                misclass_target: self.delta_team,
                max_rounds: self.max_rounds,
                test_budget: self.test_budget,
                schedule: self.schedule.clone(),
            },
            block_length: self.block_length,
            verification: self.verify.then_some(VerificationSettings {
                tests: self.verify_tests,
                misclass_target: self.delta_team,
            }),
            record_rows: self.record_rows,
        }
    }

    /// Re-checks every precondition of the scheme against this problem.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        self.scheme().resolve(self.n, self.k, &self.channel)?;
        Ok(())
    }
}

/// `constant`, `linear`, `doubling` or `custom:2,3,4`.
pub fn parse_schedule(text: &str) -> Result<TeamSchedule, HarnessError> {
    let schedule = match text.trim() {
        "constant" => TeamSchedule::Constant,
        "linear" => TeamSchedule::Linear,
        "doubling" => TeamSchedule::Doubling,
        other => {
            let list = other
                .strip_prefix("custom:")
                .ok_or_else(|| HarnessError::Config(format!("unknown schedule {other:?}")))?;
            let multipliers = list
                .split(',')
                .map(|m| m.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| HarnessError::Config(format!("bad schedule {other:?}: {e}")))?;
            TeamSchedule::Custom(multipliers)
        }
    };
    schedule.validate()?;
    Ok(schedule)
}
