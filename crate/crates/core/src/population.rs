//! Hidden ground truth, teams, and OR-semantics of noiseless tests.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::channels::Hypothesis;
use crate::{Error, Result};

/// The sick set. Lives on the simulation side only; the decoder never sees it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    n: usize,
    sick: Vec<u32>,
}

impl GroundTruth {
    /// Builds a truth from an explicit sick list (sorted and checked here).
    pub fn new(n: usize, mut sick: Vec<u32>) -> Result<Self> {
        sick.sort_unstable();
        if sick.is_empty() || sick.len() > n {
            return Err(Error::param(
                "k",
                format!("need 1 <= k <= n, got k = {}", sick.len()),
            ));
        }
        if n > u32::MAX as usize {
            return Err(Error::param("n", "population too large"));
        }
        if sick.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("sick", "duplicate person index"));
        }
        if *sick.last().unwrap() as usize >= n {
            return Err(Error::param("sick", "person index out of range"));
        }
        Ok(Self { n, sick })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.sick.len()
    }

    /// Sorted sick indices.
    pub fn sick(&self) -> &[u32] {
        &self.sick
    }

    pub fn is_sick(&self, person: u32) -> bool {
        self.sick.binary_search(&person).is_ok()
    }

    /// Dense indicator vector of length `n`.
    pub fn sick_mask(&self) -> Vec<bool> {
        let mut mask = alloc::vec![false; self.n];
        for &s in &self.sick {
            mask[s as usize] = true;
        }
        mask
    }

    /// Number of sick members in `members`.
    pub fn count_sick(&self, members: &[u32]) -> usize {
        members.iter().filter(|&&m| self.is_sick(m)).count()
    }
}

/// Draws a uniformly random size-`k` subset of `[0, n)`.
pub fn draw_ground_truth<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<GroundTruth> {
    if k == 0 || k > n {
        return Err(Error::param(
            "k",
            format!("need 1 <= k <= n, got n = {n}, k = {k}"),
        ));
    }
    if n > u32::MAX as usize {
        return Err(Error::param("n", "population too large"));
    }
    let sick = index::sample(rng, n, k)
        .into_iter()
        .map(|i| i as u32)
        .collect();
    GroundTruth::new(n, sick)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TeamLabel {
    Unclassified,
    Empty,
    Exact,
    TwoPlus,
}

impl From<Hypothesis> for TeamLabel {
    fn from(h: Hypothesis) -> Self {
        match h {
            Hypothesis::Empty => TeamLabel::Empty,
            Hypothesis::Exact => TeamLabel::Exact,
            Hypothesis::TwoPlus => TeamLabel::TwoPlus,
        }
    }
}

impl TeamLabel {
    /// Label a team would get from a perfect classifier.
    pub fn from_sick_count(count: usize) -> Self {
        match count {
            0 => TeamLabel::Empty,
            1 => TeamLabel::Exact,
            _ => TeamLabel::TwoPlus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Team {
    /// Sorted, nonempty, duplicate-free.
    pub members: Vec<u32>,
    pub label: TeamLabel,
}

impl Team {
    pub fn new(mut members: Vec<u32>) -> Result<Self> {
        members.sort_unstable();
        if members.is_empty() {
            return Err(Error::param("team", "a team needs at least one member"));
        }
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("team", "duplicate member"));
        }
        Ok(Self {
            members,
            label: TeamLabel::Unclassified,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// One round's grouping of the unresolved pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TeamPartition {
    pub round: usize,
    pub teams: Vec<Team>,
    /// Team count asked for before clamping to the pool size.
    pub requested_teams: usize,
}

impl TeamPartition {
    pub fn was_clamped(&self) -> bool {
        self.requested_teams != self.teams.len()
    }

    /// Teams are pairwise disjoint and their union is exactly `pool`.
    pub fn covers(&self, pool: &[u32]) -> bool {
        let mut all: Vec<u32> = self
            .teams
            .iter()
            .flat_map(|t| t.members.iter().copied())
            .collect();
        let mut expected = pool.to_vec();
        all.sort_unstable();
        expected.sort_unstable();
        all == expected && all.windows(2).all(|w| w[0] != w[1])
    }
}

/// Uniformly random balanced partition of `pool` into `team_count` teams
/// whose sizes differ by at most one. A `team_count` above the pool size is
/// clamped to singleton teams and the clamp is visible through
/// [`TeamPartition::requested_teams`].
pub fn random_partition<R: Rng + ?Sized>(
    pool: &[u32],
    team_count: usize,
    round: usize,
    rng: &mut R,
) -> Result<TeamPartition> {
    if pool.is_empty() {
        return Err(Error::param("pool", "cannot partition an empty pool"));
    }
    if team_count == 0 {
        return Err(Error::param("team_count", "must be at least 1"));
    }
    let count = team_count.min(pool.len());
    let mut shuffled = pool.to_vec();
    shuffled.shuffle(rng);

    let base = shuffled.len() / count;
    let extra = shuffled.len() % count;
    let mut teams = Vec::with_capacity(count);
    let mut rest = shuffled.as_slice();
    for i in 0..count {
        let size = base + usize::from(i < extra);
        let (head, tail) = rest.split_at(size);
        rest = tail;
        let mut members = head.to_vec();
        members.sort_unstable();
        teams.push(Team {
            members,
            label: TeamLabel::Unclassified,
        });
    }
    let partition = TeamPartition {
        round,
        teams,
        requested_teams: team_count,
    };
    debug_assert!(partition.covers(pool));
    Ok(partition)
}

/// A pooled test: the set of people whose samples are mixed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct TestRow {
    pub included: Vec<u32>,
}

impl TestRow {
    pub fn new(included: Vec<u32>) -> Self {
        Self { included }
    }
}

/// `min(Ax, 1)` for one row: positive iff the row touches a sick person.
pub fn noiseless_outcome(row: &TestRow, truth: &GroundTruth) -> bool {
    row.included.iter().any(|&p| truth.is_sick(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_population_is_forced() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = draw_ground_truth(5, 5, &mut rng).unwrap();
        assert_eq!(t.sick(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn zero_or_oversized_k_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(draw_ground_truth(5, 0, &mut rng).is_err());
        assert!(draw_ground_truth(5, 6, &mut rng).is_err());
    }

    #[test]
    fn truth_is_deterministic_given_the_stream() {
        let a = draw_ground_truth(1000, 10, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = draw_ground_truth(1000, 10, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sick_indices_are_uniform() {
        let (n, k, draws) = (10_000usize, 10usize, 10_000usize);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut hits = alloc::vec![0u32; n];
        for _ in 0..draws {
            for &s in draw_ground_truth(n, k, &mut rng).unwrap().sick() {
                hits[s as usize] += 1;
            }
        }
        // each index ~ Binomial(draws, k/n): mean 10, sd ~3.16
        let mean = (draws * k) as f64 / n as f64;
        let sd = libm::sqrt(mean * (1.0 - k as f64 / n as f64));
        let total: u32 = hits.iter().sum();
        assert_eq!(total as usize, draws * k);
        let outside = hits
            .iter()
            .filter(|&&h| libm::fabs(h as f64 - mean) > 3.0 * sd)
            .count();
        // about 0.3% of indices fall outside 3 sd under the binomial law
        assert!(outside < n / 100, "{outside} indices outside 3 sd");
        let chi2: f64 = hits.iter().map(|&h| (h as f64 - mean).powi(2) / mean).sum();
        assert!(
            (chi2 / n as f64 - 1.0).abs() < 0.1,
            "chi2/dof = {}",
            chi2 / n as f64
        );
    }

    #[test]
    fn or_semantics() {
        let truth = GroundTruth::new(10, alloc::vec![2, 7]).unwrap();
        assert!(!noiseless_outcome(&TestRow::default(), &truth));
        assert!(noiseless_outcome(&TestRow::new(alloc::vec![2]), &truth));
        assert!(noiseless_outcome(&TestRow::new(alloc::vec![2, 7]), &truth));
        assert!(!noiseless_outcome(
            &TestRow::new(alloc::vec![0, 1, 3]),
            &truth
        ));
    }

    #[test]
    fn partition_examples() {
        let pool: Vec<u32> = (0..10).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let one = random_partition(&pool, 1, 0, &mut rng).unwrap();
        assert_eq!(one.teams.len(), 1);
        assert_eq!(one.teams[0].members, pool);

        let three = random_partition(&pool, 3, 0, &mut rng).unwrap();
        let mut sizes: Vec<usize> = three.teams.iter().map(Team::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, [3, 3, 4]);
        assert!(three.covers(&pool));

        let clamped = random_partition(&pool, 25, 0, &mut rng).unwrap();
        assert_eq!(clamped.teams.len(), 10);
        assert!(clamped.was_clamped());
        assert!(clamped.teams.iter().all(|t| t.len() == 1));
    }

    #[test]
    fn partition_rejects_bad_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(random_partition(&[], 1, 0, &mut rng).is_err());
        assert!(random_partition(&[1, 2], 0, 0, &mut rng).is_err());
    }

    #[test]
    fn partition_places_people_uniformly() {
        let pool: Vec<u32> = (0..10_000).collect();
        let teams = 100;
        let draws = 1_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // track where persons 0 and 9_999 land; each team should get ~10 of 1000
        let mut first = alloc::vec![0u32; teams];
        let mut last = alloc::vec![0u32; teams];
        for _ in 0..draws {
            let p = random_partition(&pool, teams, 0, &mut rng).unwrap();
            for (i, t) in p.teams.iter().enumerate() {
                if t.members.binary_search(&0).is_ok() {
                    first[i] += 1;
                }
                if t.members.binary_search(&9_999).is_ok() {
                    last[i] += 1;
                }
            }
        }
        let expected = draws as f64 / teams as f64;
        for counts in [&first, &last] {
            let chi2: f64 = counts
                .iter()
                .map(|&c| (c as f64 - expected).powi(2) / expected)
                .sum();
            // 99 dof: mean 99, sd ~14; 170 is far beyond the 1e-6 tail
            assert!(chi2 < 170.0, "chi2 = {chi2}");
        }
    }
}
