//! The identifying half of the scheme.
//!
//! Each member of an exact team gets a codeword of a random binary code; test
//! `i` pools exactly the members whose codeword has a one at position `i`. With
//! a single sick member the noiseless outcomes spell out that member's
//! codeword, so an exhaustive maximum-likelihood search over the team recovers
//! them. Random codebooks with exhaustive decoding stand in for a structured
//! capacity-achieving family: team sizes are small enough that the search is
//! cheap and exact.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channels::{ChannelModel, Mixture, Observation};
use crate::population::{GroundTruth, Team, TestRow};
use crate::transcript::{Phase, RoundLog, TestGroup, TestLog};
use crate::{Error, Result};

/// Default `epsilon` of the ratio policy.
pub const DEFAULT_EPSILON: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "mode", rename_all = "snake_case"))]
pub enum BlockLengthPolicy {
    /// `ceil((1 + epsilon) log2(team size) / C(Z))`.
    Ratio { epsilon: f64 },
    /// `ceil(c log2(n) / C(Z))`, independent of the team.
    FullLog { c: f64 },
}

impl Default for BlockLengthPolicy {
    fn default() -> Self {
        BlockLengthPolicy::Ratio {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl BlockLengthPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BlockLengthPolicy::Ratio { epsilon } if !(epsilon >= 0.0 && epsilon.is_finite()) => {
                Err(Error::param(
                    "epsilon",
                    format!("{epsilon} must be finite and >= 0"),
                ))
            }
            BlockLengthPolicy::FullLog { c } if !(c > 0.0 && c.is_finite()) => {
                Err(Error::param("c", format!("{c} must be finite and > 0")))
            }
            _ => Ok(()),
        }
    }
}

/// Block length for a team of `team_size` in a population of `n`. Always at
/// least 1, so a singleton team still gets a confirmation test.
pub fn block_length(
    policy: BlockLengthPolicy,
    team_size: usize,
    n: usize,
    channel: &ChannelModel,
) -> Result<usize> {
    policy.validate()?;
    if team_size == 0 {
        return Err(Error::param("team_size", "must be at least 1"));
    }
    let capacity = channel.capacity()?;
    if !(capacity > 0.0) {
        return Err(Error::ZeroCapacity);
    }
    let bits = match policy {
        BlockLengthPolicy::Ratio { epsilon } => (1.0 + epsilon) * libm::log2(team_size as f64),
        BlockLengthPolicy::FullLog { c } => c * libm::log2(n.max(1) as f64),
    };
    let len = libm::ceil(bits / capacity);
    if !(len < u32::MAX as f64) {
        return Err(Error::param("block_length", "block length overflows"));
    }
    Ok((len as usize).max(1))
}

/// `t` distinct binary codewords of length `block_length`, packed 64 bits per
/// word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    team_size: usize,
    block_length: usize,
    words_per_codeword: usize,
    words: Vec<u64>,
}

impl Codebook {
    pub fn from_codewords(codewords: &[Vec<bool>]) -> Result<Self> {
        let block_length = codewords.first().map_or(0, Vec::len);
        if codewords.is_empty() || block_length == 0 {
            return Err(Error::param(
                "codebook",
                "need at least one nonempty codeword",
            ));
        }
        if codewords.iter().any(|c| c.len() != block_length) {
            return Err(Error::param("codebook", "codewords differ in length"));
        }
        let wpc = block_length.div_ceil(64);
        let mut words = alloc::vec![0u64; wpc * codewords.len()];
        for (i, c) in codewords.iter().enumerate() {
            for (j, &b) in c.iter().enumerate() {
                if b {
                    words[i * wpc + j / 64] |= 1 << (j % 64);
                }
            }
        }
        Ok(Self {
            team_size: codewords.len(),
            block_length,
            words_per_codeword: wpc,
            words,
        })
    }

    pub fn team_size(&self) -> usize {
        self.team_size
    }

    pub fn block_length(&self) -> usize {
        self.block_length
    }

    pub fn bit(&self, member: usize, position: usize) -> bool {
        self.words[member * self.words_per_codeword + position / 64] >> (position % 64) & 1 == 1
    }

    pub fn codeword(&self, member: usize) -> Vec<bool> {
        (0..self.block_length)
            .map(|j| self.bit(member, j))
            .collect()
    }

    fn packed(&self, member: usize) -> &[u64] {
        &self.words[member * self.words_per_codeword..(member + 1) * self.words_per_codeword]
    }

    /// Row `position` of the test matrix restricted to `members`.
    pub fn row(&self, members: &[u32], position: usize) -> TestRow {
        TestRow::new(
            members
                .iter()
                .enumerate()
                .filter(|(i, _)| self.bit(*i, position))
                .map(|(_, &m)| m)
                .collect(),
        )
    }

    pub fn is_distinct(&self) -> bool {
        let mut seen = BTreeSet::new();
        (0..self.team_size).all(|i| seen.insert(self.packed(i)))
    }
}

/// Random codebook with iid fair bits; a codeword that repeats an earlier one
/// is redrawn.
pub fn build_codebook<R: Rng + ?Sized>(
    team_size: usize,
    block_length: usize,
    rng: &mut R,
) -> Result<Codebook> {
    if team_size == 0 || block_length == 0 {
        return Err(Error::param(
            "codebook",
            "team size and block length must be positive",
        ));
    }
    if block_length < 64 && (1u64 << block_length) < team_size as u64 {
        return Err(Error::BlockTooShort {
            team_size,
            block_length,
        });
    }
    let wpc = block_length.div_ceil(64);
    let tail = block_length % 64;
    let mut words = Vec::with_capacity(wpc * team_size);
    let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();
    let mut candidate = alloc::vec![0u64; wpc];
    for _ in 0..team_size {
        loop {
            for w in candidate.iter_mut() {
                *w = rng.next_u64();
            }
            if tail != 0 {
                candidate[wpc - 1] &= (1u64 << tail) - 1;
            }
            if seen.insert(candidate.clone()) {
                break;
            }
        }
        words.extend_from_slice(&candidate);
    }
    Ok(Codebook {
        team_size,
        block_length,
        words_per_codeword: wpc,
        words,
    })
}

/// Stream used for the codebook of `group` in round `round`. The decoder
/// rebuilds the same codebook from the seed in the transcript header.
pub fn codebook_rng(seed: u64, round: usize, group: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((round as u64) << 32) | group as u64);
    rng
}

/// Maximum-likelihood decoder over a codebook.
///
/// For discrete channels the score of a codeword is a function of how many
/// positions fall in each distinct log-probability class, so two codewords
/// whose likelihoods tie in exact arithmetic also tie in floating point and
/// the lowest index wins.
#[derive(Debug, Clone)]
pub struct CodeDecoder {
    channel: ChannelModel,
    /// `(class of bit 0, class of bit 1)` per output symbol.
    symbol_classes: Vec<(usize, usize)>,
    class_values: Vec<f64>,
}

impl CodeDecoder {
    pub fn new(channel: &ChannelModel) -> Self {
        let mut symbol_classes = Vec::new();
        let mut class_values: Vec<f64> = Vec::new();
        if let Some(m) = channel.alphabet_size() {
            let mut class_of =
                |v: f64| match class_values.iter().position(|c| c.to_bits() == v.to_bits()) {
                    Some(i) => i,
                    None => {
                        class_values.push(v);
                        class_values.len() - 1
                    }
                };
            for a in 0..m as u32 {
                let zero = class_of(channel.log_density(Observation::Symbol(a), false));
                let one = class_of(channel.log_density(Observation::Symbol(a), true));
                symbol_classes.push((zero, one));
            }
        }
        Self {
            channel: channel.clone(),
            symbol_classes,
            class_values,
        }
    }

    /// Log-likelihood of every codeword.
    pub fn scores(&self, codebook: &Codebook, observations: &[Observation]) -> Vec<f64> {
        let len = codebook.block_length().min(observations.len());
        if self.channel.is_discrete() {
            let symbols: Vec<Option<(usize, usize)>> = observations[..len]
                .iter()
                .map(|o| match o {
                    Observation::Symbol(a) => self.symbol_classes.get(*a as usize).copied(),
                    Observation::Real(_) => None,
                })
                .collect();
            let mut counts = alloc::vec![0u32; self.class_values.len()];
            (0..codebook.team_size())
                .map(|i| {
                    counts.iter_mut().for_each(|c| *c = 0);
                    for (j, s) in symbols.iter().enumerate() {
                        match s {
                            Some((zero, one)) => {
                                counts[if codebook.bit(i, j) { *one } else { *zero }] += 1;
                            }
                            None => return f64::NEG_INFINITY,
                        }
                    }
                    counts
                        .iter()
                        .zip(&self.class_values)
                        .filter(|(&c, _)| c > 0)
                        .map(|(&c, &v)| c as f64 * v)
                        .sum()
                })
                .collect()
        } else {
            let per_position: Vec<(f64, f64)> = observations[..len]
                .iter()
                .map(|&o| {
                    (
                        self.channel.log_density(o, false),
                        self.channel.log_density(o, true),
                    )
                })
                .collect();
            (0..codebook.team_size())
                .map(|i| {
                    per_position
                        .iter()
                        .enumerate()
                        .map(|(j, &(l0, l1))| if codebook.bit(i, j) { l1 } else { l0 })
                        .sum()
                })
                .collect()
        }
    }

    /// Index of the most likely codeword; ties go to the lowest index.
    pub fn decode(&self, codebook: &Codebook, observations: &[Observation]) -> usize {
        let scores = self.scores(codebook, observations);
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = i;
            }
        }
        best
    }
}

pub fn decode_team(
    codebook: &Codebook,
    observations: &[Observation],
    channel: &ChannelModel,
) -> usize {
    CodeDecoder::new(channel).decode(codebook, observations)
}

/// Public inputs that fix the identification design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentificationPlan {
    pub policy: BlockLengthPolicy,
    pub n: usize,
    /// Team size the ratio policy is sized for: `ceil(n / k)`, the round-0
    /// team size. Larger teams are sized by their own size.
    pub nominal_team_size: usize,
    pub codebook_seed: u64,
}

impl IdentificationPlan {
    pub fn new(policy: BlockLengthPolicy, n: usize, k: usize, codebook_seed: u64) -> Self {
        Self {
            policy,
            n,
            nominal_team_size: n.div_ceil(k.max(1)),
            codebook_seed,
        }
    }

    pub fn block_length_for(&self, team_size: usize, channel: &ChannelModel) -> Result<usize> {
        let basis = match self.policy {
            BlockLengthPolicy::Ratio { .. } => team_size.max(self.nominal_team_size),
            BlockLengthPolicy::FullLog { .. } => team_size,
        };
        block_length(self.policy, basis, self.n, channel)
    }
}

/// Runs one identification round over `teams` and returns one decoded person
/// per team, in team order. A mislabeled team still decodes to some member.
pub fn run_identification<R: Rng + ?Sized>(
    teams: &[Team],
    channel: &ChannelModel,
    plan: &IdentificationPlan,
    phase: Phase,
    truth: &GroundTruth,
    rng: &mut R,
    log: &mut TestLog,
) -> Result<Vec<u32>> {
    let round = log.rounds.len();
    let decoder = CodeDecoder::new(channel);
    let mut groups = Vec::with_capacity(teams.len());
    let mut found = Vec::with_capacity(teams.len());
    for (g, team) in teams.iter().enumerate() {
        let t = team.members.len();
        let len = plan.block_length_for(t, channel)?;
        let codebook = build_codebook(t, len, &mut codebook_rng(plan.codebook_seed, round, g))?;
        let sick: Vec<usize> = (0..t).filter(|&i| truth.is_sick(team.members[i])).collect();
        let mut group = TestGroup {
            members: team.members.clone(),
            rows: Vec::new(),
            observations: Vec::with_capacity(len),
        };
        for j in 0..len {
            let positive = sick.iter().any(|&i| codebook.bit(i, j));
            group.observations.push(channel.sample(positive, rng));
            if log.record_rows {
                group.rows.push(codebook.row(&team.members, j));
            }
        }
        found.push(team.members[decoder.decode(&codebook, &group.observations)]);
        groups.push(group);
    }
    log.rounds.push(RoundLog {
        index: round,
        phase,
        requested_groups: teams.len(),
        groups,
    });
    Ok(found)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Verdict {
    Confirmed,
    Rejected,
}

/// Individual tests per candidate so that a confirm/reject decision errs with
/// probability at most `delta`: Hoeffding on the half gap `(1 - 2p)/2` for a
/// BSC, `4 ceil(ln(2/delta) / D)` with `D = min(D(mu0||mu1), D(mu1||mu0))`
/// otherwise.
pub fn required_verification_tests(channel: &ChannelModel, delta: f64) -> Result<u64> {
    use crate::channels::ChannelKind;
    use crate::isolation::{CHERNOFF_SAFETY, MAX_TESTS_PER_TEAM};

    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::param(
            "misclass_target",
            format!("{delta} not in (0, 1]"),
        ));
    }
    let log_term = -libm::log(delta) + libm::log(2.0);
    let s = match channel.kind() {
        ChannelKind::Bsc { crossover: p } => {
            if *p >= 0.5 {
                return Err(Error::Unseparable);
            }
            let half_gap = (1.0 - 2.0 * p) / 2.0;
            libm::ceil(log_term / (2.0 * half_gap * half_gap))
        }
        _ => libm::ceil(log_term / channel.verification_exponent()?) * CHERNOFF_SAFETY as f64,
    };
    if !(s <= MAX_TESTS_PER_TEAM as f64) {
        return Err(Error::TooManyTests {
            required: s,
            cap: MAX_TESTS_PER_TEAM,
        });
    }
    Ok((s as u64).max(1))
}

/// ML between `mu0` and `mu1` on a candidate's individual tests; a tie
/// confirms.
pub fn judge_candidate(observations: &[Observation], channel: &ChannelModel) -> Verdict {
    let sick: f64 = observations
        .iter()
        .map(|&o| channel.log_likelihood(o, Mixture::one()))
        .sum();
    let healthy: f64 = observations
        .iter()
        .map(|&o| channel.log_likelihood(o, Mixture::zero()))
        .sum();
    if healthy > sick {
        Verdict::Rejected
    } else {
        Verdict::Confirmed
    }
}

/// Tests every candidate alone `s_verify` times and judges each one.
pub fn verify_candidates<R: Rng + ?Sized>(
    candidates: &[u32],
    channel: &ChannelModel,
    s_verify: u64,
    truth: &GroundTruth,
    rng: &mut R,
    log: &mut TestLog,
) -> Result<Vec<Verdict>> {
    if s_verify == 0 {
        return Err(Error::param("verification_tests", "must be at least 1"));
    }
    let mut groups = Vec::with_capacity(candidates.len());
    let mut verdicts = Vec::with_capacity(candidates.len());
    for &c in candidates {
        let positive = truth.is_sick(c);
        let observations: Vec<Observation> = (0..s_verify)
            .map(|_| channel.sample(positive, rng))
            .collect();
        let rows = if log.record_rows {
            (0..s_verify)
                .map(|_| TestRow::new(alloc::vec![c]))
                .collect()
        } else {
            Vec::new()
        };
        verdicts.push(judge_candidate(&observations, channel));
        groups.push(TestGroup {
            members: alloc::vec![c],
            rows,
            observations,
        });
    }
    log.rounds.push(RoundLog {
        index: log.rounds.len(),
        phase: Phase::Verification,
        requested_groups: candidates.len(),
        groups,
    });
    Ok(verdicts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bsc(p: f64) -> ChannelModel {
        ChannelModel::bsc(p).unwrap()
    }

    #[test]
    fn block_length_examples() {
        let ratio = BlockLengthPolicy::Ratio { epsilon: 0.1 };
        assert_eq!(block_length(ratio, 1024, 1 << 16, &bsc(0.05)).unwrap(), 16);
        let exact = BlockLengthPolicy::Ratio { epsilon: 0.0 };
        assert_eq!(block_length(exact, 2, 8, &bsc(0.0)).unwrap(), 1);
        assert_eq!(block_length(exact, 1, 8, &bsc(0.0)).unwrap(), 1);
        let full = BlockLengthPolicy::FullLog { c: 2.0 };
        assert_eq!(block_length(full, 3, 1 << 10, &bsc(0.05)).unwrap(), 29);
        assert_eq!(
            block_length(ratio, 4, 8, &bsc(0.5)),
            Err(Error::ZeroCapacity)
        );
    }

    #[test]
    fn codebook_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let one = build_codebook(1, 3, &mut rng).unwrap();
        assert_eq!(one.team_size(), 1);
        assert_eq!(one.codeword(0).len(), 3);

        assert_eq!(
            build_codebook(9, 3, &mut rng),
            Err(Error::BlockTooShort {
                team_size: 9,
                block_length: 3
            })
        );
        // exactly 2^l members forces every word to appear once
        let full = build_codebook(8, 3, &mut rng).unwrap();
        assert!(full.is_distinct());

        let mut ones = 0usize;
        for _ in 0..20 {
            let big = build_codebook(256, 32, &mut rng).unwrap();
            assert!(big.is_distinct());
            ones += (0..256)
                .map(|i| big.codeword(i).iter().filter(|&&b| b).count())
                .sum::<usize>();
        }
        assert!((ones as f64 / (20.0 * 256.0 * 32.0) - 0.5).abs() < 0.01);
    }

    #[test]
    fn long_codewords_span_several_words() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cb = build_codebook(5, 130, &mut rng).unwrap();
        assert_eq!(cb.codeword(4).len(), 130);
        let rebuilt =
            Codebook::from_codewords(&(0..5).map(|i| cb.codeword(i)).collect::<Vec<_>>()).unwrap();
        assert_eq!(rebuilt, cb);
    }

    #[test]
    fn decoding_examples() {
        let cb = Codebook::from_codewords(&[alloc::vec![false; 3], alloc::vec![true; 3]]).unwrap();
        let z = |bits: [u32; 3]| bits.map(Observation::Symbol).to_vec();
        assert_eq!(decode_team(&cb, &z([0, 0, 0]), &bsc(0.0)), 0);
        assert_eq!(decode_team(&cb, &z([0, 0, 1]), &bsc(0.1)), 0);
        assert_eq!(decode_team(&cb, &z([1, 0, 1]), &bsc(0.1)), 1);

        let cb = Codebook::from_codewords(&[alloc::vec![false, false], alloc::vec![true, true]])
            .unwrap();
        assert_eq!(decode_team(&cb, &z([0, 1, 0])[..2], &bsc(0.1)), 0);
    }

    #[test]
    fn noiseless_decoding_is_exact_on_small_codebooks() {
        let channel = bsc(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for len in 1..=6usize {
            for t in 1..=8usize.min(1 << len) {
                let cb = build_codebook(t, len, &mut rng).unwrap();
                for sick in 0..t {
                    let z: Vec<Observation> = cb
                        .codeword(sick)
                        .into_iter()
                        .map(|b| Observation::Symbol(b as u32))
                        .collect();
                    assert_eq!(decode_team(&cb, &z, &channel), sick, "t={t} len={len}");
                }
            }
        }
    }

    #[test]
    fn verification_sizing() {
        // ln(2/1e-6) / (2 * 0.4^2) = 45.34
        assert_eq!(required_verification_tests(&bsc(0.1), 1e-6).unwrap(), 46);
        assert_eq!(
            required_verification_tests(&bsc(0.5), 1e-6),
            Err(Error::Unseparable)
        );
        assert!(
            required_verification_tests(&ChannelModel::z_channel(0.1).unwrap(), 1e-6).unwrap() > 0
        );
    }

    #[test]
    fn noiseless_verification() {
        let truth = GroundTruth::new(10, alloc::vec![3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut log = TestLog::new(true);
        let v = verify_candidates(&[3, 4], &bsc(0.0), 5, &truth, &mut rng, &mut log).unwrap();
        assert_eq!(v, [Verdict::Confirmed, Verdict::Rejected]);
        assert_eq!(log.total_tests(), 10);
        assert_eq!(log.rounds[0].groups[1].rows[0].included, [4]);
    }

    #[test]
    fn verification_rejects_healthy_candidates() {
        let truth = GroundTruth::new(10, alloc::vec![3]).unwrap();
        let channel = bsc(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 10_000;
        let mut rejected = 0;
        for _ in 0..trials {
            let mut log = TestLog::new(false);
            if verify_candidates(&[4], &channel, 60, &truth, &mut rng, &mut log).unwrap()[0]
                == Verdict::Rejected
            {
                rejected += 1;
            }
        }
        let bound = 1.0 - 4.0 * libm::exp(-0.64 * 60.0 / 32.0);
        assert!(rejected as f64 / trials as f64 >= bound);
        // with 60 samples at p = 0.1 a healthy candidate is essentially never confirmed
        assert_eq!(rejected, trials);
    }
}
