//! The isolating half of the scheme.
//!
//! Round 0 splits the population into `k` teams. Every team gets `s` pooled
//! tests, each row including every member independently with probability `f`,
//! and a maximum-likelihood classifier labels it empty, exact or two-plus.
//! Empty teams are dropped, exact teams are kept for identification, and the
//! members of all two-plus teams are merged and re-divided into `k_q` teams,
//! where `k_q` is the number of sick people not yet accounted for by an exact
//! label. The loop stops when no two-plus team is left, or declares failure
//! once the round cap or the test budget would be exceeded.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::channels::{ChannelKind, ChannelModel, Hypothesis, Mixture, Observation};
use crate::population::{random_partition, GroundTruth, Team, TeamLabel, TestRow};
use crate::transcript::{Phase, RoundLog, TestGroup, TestLog};
use crate::{Error, Result};

/// Upper limit on the tests spent classifying a single team.
pub const MAX_TESTS_PER_TEAM: u64 = 10_000_000;

/// Multiplier applied on top of `ceil(ln(4/delta) / D(Z))` for channels sized
/// through the Chernoff-Stein exponent.
pub const CHERNOFF_SAFETY: u64 = 4;

/// How many teams each round re-divides its pool into, as a multiple of `k_q`.
/// Round 0 always uses `k` teams.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TeamSchedule {
    /// `k_q` teams every round.
    #[default]
    Constant,
    /// `2 k_1, 3 k_2, 4 k_3, ...`
    Linear,
    /// `2 k_1, 4 k_2, 8 k_3, ...`
    Doubling,
    /// Multipliers for rounds 1, 2, ...; the last entry repeats.
    Custom(Vec<usize>),
}

impl TeamSchedule {
    pub fn multiplier(&self, round: usize) -> usize {
        if round == 0 {
            return 1;
        }
        match self {
            TeamSchedule::Constant => 1,
            TeamSchedule::Linear => round.saturating_add(1),
            TeamSchedule::Doubling => {
                if round >= usize::BITS as usize {
                    usize::MAX
                } else {
                    1usize << round
                }
            }
            TeamSchedule::Custom(m) => *m.get(round - 1).or(m.last()).unwrap_or(&1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let TeamSchedule::Custom(m) = self {
            if m.is_empty() || m.contains(&0) {
                return Err(Error::param(
                    "schedule",
                    "multipliers must be a nonempty list of positive integers",
                ));
            }
        }
        Ok(())
    }
}

/// Team count for round `round` given the running sick estimate `k_q`.
pub fn team_schedule(k_q: usize, round: usize, schedule: &TeamSchedule) -> usize {
    schedule.multiplier(round).saturating_mul(k_q)
}

/// Where team labels come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelSource {
    /// Maximum-likelihood classification of the noisy observations.
    #[default]
    Observed,
    /// Correct-classification oracle: labels read off the ground truth. The
    /// tests are still designed, run and logged; only the decision differs.
    /// Simulation-side instrumentation; a decoder cannot replay it.
    GroundTruth,
}

/// User-facing isolation knobs; `None` means "derive the default".
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct IsolationSettings {
    pub inclusion_fraction: f64,
    pub tests_per_team: Option<u64>,
    pub misclass_target: Option<f64>,
    pub max_rounds: Option<usize>,
    pub test_budget: Option<u64>,
    pub schedule: TeamSchedule,
}

impl Default for IsolationSettings {
    fn default() -> Self {
        Self {
            inclusion_fraction: 0.5,
            tests_per_team: None,
            misclass_target: None,
            max_rounds: None,
            test_budget: None,
            schedule: TeamSchedule::Constant,
        }
    }
}

/// Fully resolved isolation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolationConfig {
    pub inclusion_fraction: f64,
    pub tests_per_team: u64,
    /// Per-team misclassification target `delta_team`.
    pub misclass_target: f64,
    pub max_rounds: usize,
    pub test_budget: u64,
    pub schedule: TeamSchedule,
    pub labels: LabelSource,
}

impl IsolationConfig {
    /// Fills in every default for a run with `k` sick people over `channel`:
    /// `delta_team = k^-3`, `s` from [`required_tests_per_team`], the round cap
    /// from [`default_max_rounds`] and a budget of `4 k s` tests.
    pub fn resolve(settings: &IsolationSettings, channel: &ChannelModel, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        let f = settings.inclusion_fraction;
        let delta = settings
            .misclass_target
            .unwrap_or_else(|| libm::pow(k as f64, -3.0));
        let s = match settings.tests_per_team {
            Some(s) => s,
            None => required_tests_per_team(channel, k, f, delta)?,
        };
        let config = Self {
            inclusion_fraction: f,
            tests_per_team: s,
            misclass_target: delta,
            max_rounds: settings.max_rounds.unwrap_or_else(|| default_max_rounds(k)),
            test_budget: settings
                .test_budget
                .unwrap_or_else(|| 4u64.saturating_mul(k as u64).saturating_mul(s)),
            schedule: settings.schedule.clone(),
            labels: LabelSource::Observed,
        };
        config.validate(k)?;
        Ok(config)
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        let f = self.inclusion_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::param(
                "inclusion_fraction",
                format!("{f} not in (0, 1)"),
            ));
        }
        if self.tests_per_team == 0 || self.tests_per_team > MAX_TESTS_PER_TEAM {
            return Err(Error::param(
                "tests_per_team",
                format!("{} not in [1, {MAX_TESTS_PER_TEAM}]", self.tests_per_team),
            ));
        }
        if !(self.misclass_target > 0.0 && self.misclass_target <= 1.0) {
            return Err(Error::param("misclass_target", "must lie in (0, 1]"));
        }
        if self.max_rounds == 0 {
            return Err(Error::param("max_rounds", "must be at least 1"));
        }
        if self.test_budget < (k as u64).saturating_mul(self.tests_per_team) {
            return Err(Error::param(
                "test_budget",
                "must cover at least k * s tests",
            ));
        }
        self.schedule.validate()
    }
}

/// `ceil(3 ln k / ln(3/2)) + 2`: with each sick person leaving two-plus status
/// with probability at least 1/3 per round, every one of them is out by then
/// except with probability about `k^-2`.
pub fn default_max_rounds(k: usize) -> usize {
    let k = k.max(1) as f64;
    libm::ceil(3.0 * libm::log(k) / libm::log(1.5)) as usize + 2
}

/// Tests per team so that each classification errs with probability at most
/// `delta`.
///
/// For a BSC the positive rates of the three hypotheses are `p`,
/// `p + f(1-2p)` and `p + (2f - f^2)(1-2p)`; the closest pair is `f(1-f)(1-2p)`
/// apart and Hoeffding on the half gap `g` gives `s = ln(4/delta) / (2 g^2)`,
/// which is `32 ln(4/delta) / (1-2p)^2` at `f = 1/2`. Other channels use the
/// separation exponent: `s = 4 ceil(ln(4/delta) / D(Z))`.
pub fn required_tests_per_team(
    channel: &ChannelModel,
    k: usize,
    f: f64,
    delta: f64,
) -> Result<u64> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::param(
            "inclusion_fraction",
            format!("{f} not in (0, 1)"),
        ));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::param(
            "misclass_target",
            format!("{delta} not in (0, 1]"),
        ));
    }
    let log_term = -libm::log(delta) + libm::log(4.0);
    let s = match channel.kind() {
        ChannelKind::Bsc { crossover: p } => {
            if *p >= 0.5 {
                return Err(Error::Unseparable);
            }
            let half_gap = f * (1.0 - f) * (1.0 - 2.0 * p) / 2.0;
            libm::ceil(log_term / (2.0 * half_gap * half_gap))
        }
        _ => {
            let d = channel.separation_exponent(f)?;
            libm::ceil(log_term / d) * CHERNOFF_SAFETY as f64
        }
    };
    if !(s <= MAX_TESTS_PER_TEAM as f64) {
        return Err(Error::TooManyTests {
            required: s,
            cap: MAX_TESTS_PER_TEAM,
        });
    }
    Ok((s as u64).max(1))
}

/// Draws which team members a row includes, as a bitmask over team positions.
/// `f = 1/2` takes 64 members per random word; other rates draw per member.
pub(crate) fn sample_inclusion<R: Rng + ?Sized>(
    team_size: usize,
    f: f64,
    rng: &mut R,
    words: &mut Vec<u64>,
) {
    words.clear();
    let n_words = team_size.div_ceil(64);
    if f == 0.5 {
        words.extend((0..n_words).map(|_| rng.next_u64()));
        let tail = team_size % 64;
        if tail != 0 {
            if let Some(last) = words.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
    } else {
        words.resize(n_words, 0);
        for i in 0..team_size {
            if rng.random_bool(f) {
                words[i / 64] |= 1 << (i % 64);
            }
        }
    }
}

#[inline]
pub(crate) fn bit(words: &[u64], i: usize) -> bool {
    words[i / 64] >> (i % 64) & 1 == 1
}

pub(crate) fn row_from_bits(members: &[u32], words: &[u64]) -> TestRow {
    TestRow::new(
        members
            .iter()
            .enumerate()
            .filter(|(i, _)| bit(words, *i))
            .map(|(_, &m)| m)
            .collect(),
    )
}

/// `s` independent rows, each including every member with probability `f`.
pub fn design_team_tests<R: Rng + ?Sized>(
    team: &Team,
    s: usize,
    f: f64,
    rng: &mut R,
) -> Result<Vec<TestRow>> {
    if team.members.is_empty() {
        return Err(Error::param("team", "empty team"));
    }
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::param(
            "inclusion_fraction",
            format!("{f} not in [0, 1]"),
        ));
    }
    let mut words = Vec::new();
    Ok((0..s)
        .map(|_| {
            sample_inclusion(team.members.len(), f, rng, &mut words);
            row_from_bits(&team.members, &words)
        })
        .collect())
}

/// Maximum-likelihood three-way team classifier for a fixed channel and
/// inclusion rate. Discrete channels score from symbol counts.
#[derive(Debug, Clone)]
pub struct TeamClassifier {
    channel: ChannelModel,
    mixtures: [Mixture; 3],
    /// `table[h][a] = ln P(a | H_h)` for discrete channels.
    table: Option<[Vec<f64>; 3]>,
}

impl TeamClassifier {
    pub fn new(channel: &ChannelModel, f: f64) -> Self {
        let mixtures = Hypothesis::ALL.map(|h| h.mixture(f));
        let table = channel.alphabet_size().map(|m| {
            mixtures.map(|mix| {
                (0..m as u32)
                    .map(|a| channel.log_likelihood(Observation::Symbol(a), mix))
                    .collect()
            })
        });
        Self {
            channel: channel.clone(),
            mixtures,
            table,
        }
    }

    /// Total log-likelihood of `obs` under Empty, Exact, TwoPlus.
    pub fn log_likelihoods(&self, obs: &[Observation]) -> [f64; 3] {
        match &self.table {
            Some(table) => {
                let mut counts = alloc::vec![0u64; table[0].len()];
                for o in obs {
                    if let Observation::Symbol(a) = o {
                        if let Some(c) = counts.get_mut(*a as usize) {
                            *c += 1;
                        }
                    }
                }
                core::array::from_fn(|h| {
                    counts
                        .iter()
                        .zip(&table[h])
                        .filter(|(&c, _)| c > 0)
                        .map(|(&c, &l)| c as f64 * l)
                        .sum()
                })
            }
            None => core::array::from_fn(|h| {
                obs.iter()
                    .map(|&o| self.channel.log_likelihood(o, self.mixtures[h]))
                    .sum()
            }),
        }
    }

    /// Picks the most likely hypothesis; ties go to the larger sick count.
    pub fn classify(&self, obs: &[Observation]) -> Hypothesis {
        let ll = self.log_likelihoods(obs);
        let mut best = Hypothesis::TwoPlus;
        let mut best_ll = ll[2];
        for h in [Hypothesis::Exact, Hypothesis::Empty] {
            if ll[h as usize] > best_ll {
                best = h;
                best_ll = ll[h as usize];
            }
        }
        best
    }
}

/// One-shot form of [`TeamClassifier::classify`].
pub fn classify_team(observations: &[Observation], channel: &ChannelModel, f: f64) -> Hypothesis {
    TeamClassifier::new(channel, f).classify(observations)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundRecord {
    pub round: usize,
    /// `k_q`: the running estimate of sick people still in the pool.
    pub sick_estimate: usize,
    pub requested_teams: usize,
    pub team_count: usize,
    pub labels: Vec<TeamLabel>,
    pub tests: u64,
}

impl RoundRecord {
    pub fn count(&self, label: TeamLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum IsolationFailure {
    RoundCap,
    TestBudget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationOutcome {
    pub exact_teams: Vec<Team>,
    pub rounds: Vec<RoundRecord>,
    pub tests_used: u64,
    pub tests_per_team: u64,
    pub failure: Option<IsolationFailure>,
    /// `r_j` for each sick person, aligned with `GroundTruth::sick`: the number
    /// of isolation rounds they took part in before leaving two-plus status.
    pub sick_rounds: Vec<u32>,
}

impl IsolationOutcome {
    pub fn rounds_used(&self) -> usize {
        self.rounds.len()
    }

    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    /// `sum_q team_count_q`; times `s` this equals `tests_used`.
    pub fn team_count_sum(&self) -> u64 {
        self.rounds.iter().map(|r| r.team_count as u64).sum()
    }

    pub fn sick_round_sum(&self) -> u64 {
        self.sick_rounds.iter().map(|&r| r as u64).sum()
    }
}

/// Runs the isolation rounds, appending every round's design and noisy
/// observations to `log`. Failure is reported in the outcome, not as an error.
pub fn run_isolation<R: Rng + ?Sized>(
    truth: &GroundTruth,
    channel: &ChannelModel,
    config: &IsolationConfig,
    rng: &mut R,
    log: &mut TestLog,
) -> Result<IsolationOutcome> {
    let k = truth.k();
    config.validate(k)?;
    let s = config.tests_per_team;
    let f = config.inclusion_fraction;
    let classifier = TeamClassifier::new(channel, f);
    let sick_mask = truth.sick_mask();

    let mut pool: Vec<u32> = (0..truth.n() as u32).collect();
    let mut exact_teams = Vec::new();
    let mut exact_issued = 0usize;
    let mut rounds = Vec::new();
    let mut tests_used = 0u64;
    let mut sick_rounds = alloc::vec![0u32; k];
    let mut failure = None;
    let mut words = Vec::new();

    for q in 0.. {
        if q >= config.max_rounds {
            failure = Some(IsolationFailure::RoundCap);
            break;
        }
        let sick_estimate = k.saturating_sub(exact_issued).max(1);
        let requested = team_schedule(sick_estimate, q, &config.schedule);
        let team_count = requested.min(pool.len());
        let round_cost = (team_count as u64).saturating_mul(s);
        if tests_used.saturating_add(round_cost) > config.test_budget {
            failure = Some(IsolationFailure::TestBudget);
            break;
        }

        let partition = random_partition(&pool, requested, q, rng)?;
        let mut groups = Vec::with_capacity(partition.teams.len());
        let mut labels = Vec::with_capacity(partition.teams.len());
        let mut next_pool = Vec::new();

        for mut team in partition.teams {
            let sick_positions: Vec<usize> = team
                .members
                .iter()
                .enumerate()
                .filter(|(_, &m)| sick_mask[m as usize])
                .map(|(i, _)| i)
                .collect();
            for &i in &sick_positions {
                let person = team.members[i];
                let j = truth.sick().binary_search(&person).expect("sick member");
                sick_rounds[j] += 1;
            }

            let mut group = TestGroup {
                members: team.members.clone(),
                rows: Vec::new(),
                observations: Vec::with_capacity(s as usize),
            };
            for _ in 0..s {
                sample_inclusion(team.members.len(), f, rng, &mut words);
                let positive = sick_positions.iter().any(|&i| bit(&words, i));
                group.observations.push(channel.sample(positive, rng));
                if log.record_rows {
                    group.rows.push(row_from_bits(&team.members, &words));
                }
            }

            team.label = match config.labels {
                LabelSource::Observed => classifier.classify(&group.observations).into(),
                LabelSource::GroundTruth => TeamLabel::from_sick_count(sick_positions.len()),
            };
            labels.push(team.label);
            match team.label {
                TeamLabel::Exact => {
                    exact_issued += 1;
                    exact_teams.push(team);
                }
                TeamLabel::TwoPlus => next_pool.extend_from_slice(&team.members),
                TeamLabel::Empty | TeamLabel::Unclassified => {}
            }
            groups.push(group);
        }

        tests_used += round_cost;
        log.rounds.push(RoundLog {
            index: log.rounds.len(),
            phase: Phase::Isolation,
            requested_groups: requested,
            groups,
        });
        rounds.push(RoundRecord {
            round: q,
            sick_estimate,
            requested_teams: requested,
            team_count,
            labels,
            tests: round_cost,
        });

        if next_pool.is_empty() {
            break;
        }
        pool = next_pool;
    }

    Ok(IsolationOutcome {
        exact_teams,
        rounds,
        tests_used,
        tests_per_team: s,
        failure,
        sick_rounds,
    })
}
