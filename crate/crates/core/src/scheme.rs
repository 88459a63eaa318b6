//! The full protocol: isolation rounds, one identification round, optional
//! verification with a single re-identification, and the decoder that replays
//! a transcript without the ground truth.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channels::{ChannelModel, Hypothesis};
use crate::identification::{
    build_codebook, codebook_rng, judge_candidate, required_verification_tests, run_identification,
    verify_candidates, BlockLengthPolicy, CodeDecoder, IdentificationPlan, Verdict,
};
use crate::isolation::{
    run_isolation, IsolationConfig, IsolationFailure, IsolationSettings, TeamClassifier,
};
use crate::population::{draw_ground_truth, GroundTruth, Team};
use crate::seeding::{public_seeds, sub_rng, SIMULATION_STREAM, TRUTH_STREAM};
use crate::transcript::{Phase, RoundLog, TestLog, Transcript, TranscriptHeader};
use crate::{Error, Result};

/// Individual-testing check of identified candidates.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct VerificationSettings {
    /// Tests per candidate; derived from `misclass_target` when absent.
    pub tests: Option<u64>,
    /// Per-candidate error target; defaults to the isolation target.
    pub misclass_target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SchemeConfig {
    pub isolation: IsolationSettings,
    pub block_length: BlockLengthPolicy,
    /// `None` disables verification.
    pub verification: Option<VerificationSettings>,
    /// Keep the pooled rows in the transcript, not just the observations.
    pub record_rows: bool,
}

impl SchemeConfig {
    /// Checks the configuration against a concrete problem and returns the
    /// resolved isolation parameters.
    pub fn resolve(&self, n: usize, k: usize, channel: &ChannelModel) -> Result<IsolationConfig> {
        if k == 0 || k > n {
            return Err(Error::param(
                "k",
                format!("need 1 <= k <= n, got n = {n}, k = {k}"),
            ));
        }
        if n > u32::MAX as usize {
            return Err(Error::param("n", "population too large"));
        }
        if !(channel.capacity()? > 0.0) {
            return Err(Error::ZeroCapacity);
        }
        self.block_length.validate()?;
        let isolation = IsolationConfig::resolve(&self.isolation, channel, k)?;
        self.verification_tests(channel, &isolation)?;
        Ok(isolation)
    }

    fn verification_tests(
        &self,
        channel: &ChannelModel,
        isolation: &IsolationConfig,
    ) -> Result<Option<u64>> {
        match &self.verification {
            None => Ok(None),
            Some(VerificationSettings { tests: Some(0), .. }) => {
                Err(Error::param("verification.tests", "must be at least 1"))
            }
            Some(VerificationSettings { tests: Some(s), .. }) => Ok(Some(*s)),
            Some(VerificationSettings {
                tests: None,
                misclass_target,
            }) => required_verification_tests(
                channel,
                misclass_target.unwrap_or(isolation.misclass_target),
            )
            .map(Some),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    /// Sorted estimate of the sick set.
    pub estimate: Vec<u32>,
    pub tests_isolation: u64,
    /// Identification and re-identification tests.
    pub tests_identification: u64,
    pub tests_verification: u64,
    pub total_tests: u64,
    pub rounds: usize,
    pub isolation_rounds: usize,
    pub failure: Option<IsolationFailure>,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Tests per team during isolation.
    pub tests_per_team: u64,
    pub exact_teams: usize,
    /// `sum_q k_q` over the isolation rounds.
    pub team_count_sum: u64,
}

impl SchemeResult {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn mistakes(&self) -> usize {
        self.false_positives + self.false_negatives
    }
}

/// `(|estimate \ sick|, |sick \ estimate|)`.
pub fn count_mistakes(estimate: &[u32], truth: &GroundTruth) -> (usize, usize) {
    let mut est = estimate.to_vec();
    est.sort_unstable();
    est.dedup();
    let hits = est.iter().filter(|&&p| truth.is_sick(p)).count();
    (est.len() - hits, truth.k() - hits)
}

/// Runs the scheme with sick set, noise and public seeds all derived from
/// `seed`.
pub fn run_scheme(
    n: usize,
    k: usize,
    channel: &ChannelModel,
    config: &SchemeConfig,
    seed: u64,
) -> Result<(SchemeResult, Transcript)> {
    config.resolve(n, k, channel)?;
    let truth = draw_ground_truth(n, k, &mut sub_rng(seed, TRUTH_STREAM))?;
    let (codebook_seed, fallback_seed) = public_seeds(seed);
    let mut rng = sub_rng(seed, SIMULATION_STREAM);
    run_scheme_with_truth(
        &truth,
        channel,
        config,
        codebook_seed,
        fallback_seed,
        &mut rng,
    )
}

/// Runs the scheme against a given sick set. `rng` drives the test designs and
/// the channel noise; the two seeds are the public ones written to the header.
pub fn run_scheme_with_truth<R: Rng + ?Sized>(
    truth: &GroundTruth,
    channel: &ChannelModel,
    config: &SchemeConfig,
    codebook_seed: u64,
    fallback_seed: u64,
    rng: &mut R,
) -> Result<(SchemeResult, Transcript)> {
    let (n, k) = (truth.n(), truth.k());
    let isolation_config = config.resolve(n, k, channel)?;
    let s_verify = config.verification_tests(channel, &isolation_config)?;
    let mut log = TestLog::new(config.record_rows);

    let outcome = run_isolation(truth, channel, &isolation_config, rng, &mut log)?;
    let mut tests_identification = 0u64;
    let mut tests_verification = 0u64;

    let estimate = if outcome.failed() {
        fallback_estimate(n, k, fallback_seed)
    } else {
        let plan = IdentificationPlan::new(config.block_length, n, k, codebook_seed);
        let before = log.total_tests();
        let candidates = run_identification(
            &outcome.exact_teams,
            channel,
            &plan,
            Phase::Identification,
            truth,
            rng,
            &mut log,
        )?;
        tests_identification += (log.total_tests() - before) as u64;

        match s_verify {
            None => candidates,
            Some(s_verify) => {
                let before = log.total_tests();
                let verdicts =
                    verify_candidates(&candidates, channel, s_verify, truth, rng, &mut log)?;
                tests_verification += (log.total_tests() - before) as u64;

                let mut retry = Vec::new();
                let mut kept = Vec::new();
                for ((team, &c), v) in outcome.exact_teams.iter().zip(&candidates).zip(&verdicts) {
                    match v {
                        Verdict::Confirmed => kept.push(c),
                        Verdict::Rejected => {
                            let rest: Vec<u32> =
                                team.members.iter().copied().filter(|&m| m != c).collect();
                            if !rest.is_empty() {
                                retry.push(Team::new(rest)?);
                            }
                        }
                    }
                }
                let before = log.total_tests();
                kept.extend(run_identification(
                    &retry,
                    channel,
                    &plan,
                    Phase::Reidentification,
                    truth,
                    rng,
                    &mut log,
                )?);
                tests_identification += (log.total_tests() - before) as u64;
                kept
            }
        }
    };
    let mut estimate = estimate;
    estimate.sort_unstable();

    let (false_positives, false_negatives) = count_mistakes(&estimate, truth);
    let result = SchemeResult {
        estimate,
        tests_isolation: outcome.tests_used,
        tests_identification,
        tests_verification,
        total_tests: log.total_tests() as u64,
        rounds: log.rounds.len(),
        isolation_rounds: outcome.rounds_used(),
        failure: outcome.failure,
        false_positives,
        false_negatives,
        tests_per_team: outcome.tests_per_team,
        exact_teams: outcome.exact_teams.len(),
        team_count_sum: outcome.team_count_sum(),
    };
    let transcript = Transcript {
        header: TranscriptHeader {
            n,
            k,
            channel: channel.clone(),
            config: config.clone(),
            codebook_seed,
            fallback_seed,
            rows_recorded: config.record_rows,
        },
        rounds: log.rounds,
    };
    Ok((result, transcript))
}

/// `k` distinct people drawn uniformly from the fallback seed, sorted.
fn fallback_estimate(n: usize, k: usize, fallback_seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(fallback_seed);
    let mut picked: Vec<u32> = index::sample(&mut rng, n, k)
        .into_iter()
        .map(|i| i as u32)
        .collect();
    picked.sort_unstable();
    picked
}

/// Recomputes the estimate from the transcript alone.
///
/// Isolation labels are re-derived from the observations; the run failed
/// exactly when its last isolation round still had a two-plus team.
/// Identification codebooks are rebuilt from the header's seed.
pub fn decode_only(transcript: &Transcript) -> Result<Vec<u32>> {
    transcript.validate()?;
    let header = &transcript.header;
    let (n, k, channel) = (header.n, header.k, &header.channel);
    let isolation_config = header.config.resolve(n, k, channel)?;
    let classifier = TeamClassifier::new(channel, isolation_config.inclusion_fraction);

    let mut rounds = transcript.rounds.iter().peekable();
    let mut last_had_two_plus = None;
    while let Some(round) = rounds.next_if(|r| r.phase == Phase::Isolation) {
        last_had_two_plus = Some(
            round
                .groups
                .iter()
                .any(|g| classifier.classify(&g.observations) == Hypothesis::TwoPlus),
        );
    }
    match last_had_two_plus {
        None => return Err(Error::MalformedTranscript("no isolation round".into())),
        Some(true) => return Ok(fallback_estimate(n, k, header.fallback_seed)),
        Some(false) => {}
    }

    let plan = IdentificationPlan::new(header.config.block_length, n, k, header.codebook_seed);
    let decoder = CodeDecoder::new(channel);
    let identification = rounds
        .next()
        .filter(|r| r.phase == Phase::Identification)
        .ok_or_else(|| Error::MalformedTranscript("missing identification round".into()))?;
    let candidates = decode_round(
        identification,
        channel,
        &plan,
        &decoder,
        header.rows_recorded,
    )?;

    let mut estimate = match &header.config.verification {
        None => candidates,
        Some(_) => {
            let verification = rounds
                .next()
                .filter(|r| r.phase == Phase::Verification)
                .ok_or_else(|| Error::MalformedTranscript("missing verification round".into()))?;
            let mut kept = Vec::new();
            for group in &verification.groups {
                let &[c] = group.members.as_slice() else {
                    return Err(Error::MalformedTranscript(
                        "verification group must hold one person".into(),
                    ));
                };
                if judge_candidate(&group.observations, channel) == Verdict::Confirmed {
                    kept.push(c);
                }
            }
            let retry = rounds
                .next()
                .filter(|r| r.phase == Phase::Reidentification)
                .ok_or_else(|| {
                    Error::MalformedTranscript("missing re-identification round".into())
                })?;
            kept.extend(decode_round(
                retry,
                channel,
                &plan,
                &decoder,
                header.rows_recorded,
            )?);
            kept
        }
    };
    if rounds.next().is_some() {
        return Err(Error::MalformedTranscript(
            "unexpected trailing rounds".into(),
        ));
    }
    estimate.sort_unstable();
    Ok(estimate)
}

fn decode_round(
    round: &RoundLog,
    channel: &ChannelModel,
    plan: &IdentificationPlan,
    decoder: &CodeDecoder,
    rows_recorded: bool,
) -> Result<Vec<u32>> {
    let mut found = Vec::with_capacity(round.groups.len());
    for (g, group) in round.groups.iter().enumerate() {
        let t = group.members.len();
        if t == 0 {
            return Err(Error::MalformedTranscript(format!(
                "round {}: empty team",
                round.index
            )));
        }
        let len = plan.block_length_for(t, channel)?;
        if group.observations.len() != len {
            return Err(Error::MalformedTranscript(format!(
                "round {}: team {g} has {} observations, expected {len}",
                round.index,
                group.observations.len()
            )));
        }
        let codebook = build_codebook(
            t,
            len,
            &mut codebook_rng(plan.codebook_seed, round.index, g),
        )?;
        if rows_recorded && (0..len).any(|j| codebook.row(&group.members, j) != group.rows[j]) {
            return Err(Error::MalformedTranscript(format!(
                "round {}: team {g} rows do not match the seeded codebook",
                round.index
            )));
        }
        found.push(group.members[decoder.decode(&codebook, &group.observations)]);
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mistakes_examples() {
        let truth = GroundTruth::new(10, alloc::vec![0]).unwrap();
        assert_eq!(count_mistakes(&[0], &truth), (0, 0));
        assert_eq!(count_mistakes(&[1], &truth), (1, 1));
        let truth = GroundTruth::new(10, alloc::vec![0, 1, 2]).unwrap();
        assert_eq!(count_mistakes(&[2, 3], &truth), (1, 2));
    }

    #[test]
    fn tiny_noiseless_run() {
        let channel = ChannelModel::noiseless();
        for seed in 0..20 {
            let (r, t) = run_scheme(4, 1, &channel, &SchemeConfig::default(), seed).unwrap();
            assert_eq!((r.false_positives, r.false_negatives), (0, 0));
            if seed == 0 {
                // one isolation round and one identification round
                assert_eq!(r.rounds, 2);
            }
            assert_eq!(decode_only(&t).unwrap(), r.estimate);
        }
    }

    #[test]
    fn everyone_sick() {
        let channel = ChannelModel::noiseless();
        for seed in 0..20 {
            let (r, _) = run_scheme(4, 4, &channel, &SchemeConfig::default(), seed).unwrap();
            assert_eq!(r.false_negatives, 0);
            assert_eq!(r.estimate, [0, 1, 2, 3]);
        }
    }

    #[test]
    fn empty_transcript_is_rejected() {
        let (_, mut t) = run_scheme(
            16,
            2,
            &ChannelModel::noiseless(),
            &SchemeConfig::default(),
            1,
        )
        .unwrap();
        t.rounds.clear();
        assert!(matches!(
            decode_only(&t),
            Err(Error::MalformedTranscript(_))
        ));
    }

    #[test]
    fn zero_capacity_is_a_config_error() {
        let c = ChannelModel::bsc(0.5).unwrap();
        assert_eq!(
            run_scheme(16, 2, &c, &SchemeConfig::default(), 1).unwrap_err(),
            Error::ZeroCapacity
        );
    }
}
