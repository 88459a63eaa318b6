use iati_core::channels::{ChannelModel, Observation};
use iati_core::identification::{
    build_codebook, decode_team, run_identification, IdentificationPlan,
};
use iati_core::oracles::exhaustive_ml_decode;
use iati_core::population::{GroundTruth, Team};
use iati_core::transcript::{Phase, TestLog};
use iati_core::BlockLengthPolicy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noisy_codeword(channel: &ChannelModel, word: &[bool], rng: &mut ChaCha8Rng) -> Vec<Observation> {
    word.iter().map(|&b| channel.sample(b, rng)).collect()
}

fn agreement(channel: &ChannelModel, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..1000 {
        let t = rng.random_range(1..=32usize);
        let len = rng.random_range(6..=30usize);
        let cb = build_codebook(t, len, &mut rng).unwrap();
        let sick = rng.random_range(0..t);
        let z = noisy_codeword(channel, &cb.codeword(sick), &mut rng);
        assert_eq!(
            decode_team(&cb, &z, channel),
            exhaustive_ml_decode(&cb, &z, channel)
        );
    }
}

#[test]
fn decoder_matches_oracle_bsc() {
    agreement(&ChannelModel::bsc(0.1).unwrap(), 1);
    agreement(&ChannelModel::bsc(0.3).unwrap(), 2);
}

#[test]
fn decoder_matches_oracle_awgn() {
    agreement(&ChannelModel::awgn(1.0).unwrap(), 3);
}

#[test]
fn decoder_matches_oracle_z() {
    agreement(&ChannelModel::z_channel(0.2).unwrap(), 4);
    agreement(&ChannelModel::z_channel(0.0).unwrap(), 5);
}

#[test]
fn decoder_matches_oracle_table() {
    let c = ChannelModel::tabulated(vec![0.7, 0.2, 0.1], vec![0.1, 0.3, 0.6]).unwrap();
    agreement(&c, 6);
}

#[test]
fn sixteen_by_twenty_four_instance_by_instance() {
    let channel = ChannelModel::bsc(0.05).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut errors = 0;
    for _ in 0..10_000 {
        let cb = build_codebook(16, 24, &mut rng).unwrap();
        let sick = rng.random_range(0..16);
        let z = noisy_codeword(&channel, &cb.codeword(sick), &mut rng);
        let main = decode_team(&cb, &z, &channel);
        assert_eq!(main, exhaustive_ml_decode(&cb, &z, &channel));
        errors += (main != sick) as u32;
    }
    assert!(errors < 500, "{errors} errors");
}

#[test]
fn error_shrinks_with_block_length() {
    let channel = ChannelModel::bsc(0.1).unwrap();
    let trials = 10_000;
    let rate = |len: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(len as u64);
        let mut errors = 0u32;
        for _ in 0..trials {
            let cb = build_codebook(64, len, &mut rng).unwrap();
            let sick = rng.random_range(0..64);
            let z = noisy_codeword(&channel, &cb.codeword(sick), &mut rng);
            errors += (decode_team(&cb, &z, &channel) != sick) as u32;
        }
        errors as f64 / trials as f64
    };
    let (e8, e16, e32) = (rate(8), rate(16), rate(32));
    let slack = |a: f64, b: f64| 2.0 * ((a * (1.0 - a) + b * (1.0 - b)) / trials as f64).sqrt();
    assert!(e8 + slack(e8, e16) >= e16, "{e8} {e16}");
    assert!(e16 + slack(e16, e32) >= e32, "{e16} {e32}");
    assert!(e8 > e32);
}

#[test]
fn identification_rows_follow_codewords_and_count_matches() {
    let channel = ChannelModel::bsc(0.05).unwrap();
    let (n, k) = (4096usize, 8usize);
    let truth = GroundTruth::new(n, (0..k as u32).map(|i| i * 512).collect()).unwrap();
    let teams: Vec<Team> = (0..k as u32)
        .map(|i| Team::new((i * 512..(i + 1) * 512).collect()).unwrap())
        .collect();
    let policy = BlockLengthPolicy::Ratio { epsilon: 0.5 };
    let plan = IdentificationPlan::new(policy, n, k, 99);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut log = TestLog::new(true);
    let found = run_identification(
        &teams,
        &channel,
        &plan,
        Phase::Identification,
        &truth,
        &mut rng,
        &mut log,
    )
    .unwrap();
    assert_eq!(found.len(), k);

    let len = plan.block_length_for(512, &channel).unwrap();
    assert_eq!(log.total_tests(), k * len);
    let c = channel.capacity().unwrap();
    let bound = k as f64 * (1.5 * (n as f64 / k as f64).log2() / c).ceil() + k as f64;
    assert!(log.total_tests() as f64 <= bound);

    // each row pools exactly the members whose codeword bit is set
    let round = &log.rounds[0];
    for group in &round.groups {
        assert_eq!(group.rows.len(), len);
        for row in &group.rows {
            assert!(row
                .included
                .iter()
                .all(|m| group.members.binary_search(m).is_ok()));
        }
    }
}

#[test]
fn noiseless_identification_is_exact() {
    let channel = ChannelModel::noiseless();
    let (n, k) = (1024usize, 4usize);
    let truth = GroundTruth::new(n, vec![3, 300, 600, 1000]).unwrap();
    let teams: Vec<Team> = [0u32, 256, 512, 768]
        .iter()
        .map(|&s| Team::new((s..s + 256).collect()).unwrap())
        .collect();
    let plan = IdentificationPlan::new(BlockLengthPolicy::default(), n, k, 5);
    let mut log = TestLog::new(false);
    let found = run_identification(
        &teams,
        &channel,
        &plan,
        Phase::Identification,
        &truth,
        &mut ChaCha8Rng::seed_from_u64(1),
        &mut log,
    )
    .unwrap();
    assert_eq!(found, [3, 300, 600, 1000]);
}
