use iati_core::channels::ChannelModel;
use iati_core::identification::{block_length, build_codebook};
use iati_core::population::{random_partition, GroundTruth};
use iati_core::scheme::count_mistakes;
use iati_core::BlockLengthPolicy;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn partitions_are_balanced_and_cover(pool_size in 1usize..300, teams in 1usize..400, seed: u64) {
        let pool: Vec<u32> = (0..pool_size as u32).map(|i| i * 3).collect();
        let p = random_partition(&pool, teams, 0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(p.covers(&pool));
        prop_assert_eq!(p.teams.len(), teams.min(pool_size));
        let sizes: Vec<usize> = p.teams.iter().map(|t| t.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn block_length_is_positive_and_monotone(t in 1usize..5000, eps in 0.0f64..3.0, p in 0.0f64..0.45) {
        let c = ChannelModel::bsc(p).unwrap();
        let a = block_length(BlockLengthPolicy::Ratio { epsilon: eps }, t, 1 << 20, &c).unwrap();
        let b = block_length(BlockLengthPolicy::Ratio { epsilon: eps + 0.5 }, t, 1 << 20, &c).unwrap();
        prop_assert!(a >= 1);
        prop_assert!(b >= a);
    }

    #[test]
    fn codebooks_are_distinct(t in 1usize..200, extra in 0usize..20, seed: u64) {
        let len = (usize::BITS - (t - 1).leading_zeros()) as usize + extra;
        let cb = build_codebook(t, len.max(1), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(cb.is_distinct());
    }

    #[test]
    fn mistakes_match_symmetric_difference(
        sick in proptest::collection::btree_set(0u32..100, 1..20),
        estimate in proptest::collection::btree_set(0u32..100, 0..30),
    ) {
        let truth = GroundTruth::new(100, sick.iter().copied().collect()).unwrap();
        let est: Vec<u32> = estimate.iter().copied().collect();
        let (fp, fn_) = count_mistakes(&est, &truth);
        prop_assert_eq!(fp + fn_, sick.symmetric_difference(&estimate).count());
    }
}
