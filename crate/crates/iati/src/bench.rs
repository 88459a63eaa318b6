//! Monte Carlo error of the three-way team classifier against the exact
//! binomial value and the Hoeffding bound.

use iati_core::isolation::TeamClassifier;
use iati_core::oracles::exact_classifier_error;
use iati_core::seeding::sub_rng;
use iati_core::{ChannelKind, ChannelModel, Hypothesis};
use rand::Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub hypothesis: Hypothesis,
    pub trials: u64,
    pub errors: u64,
    pub empirical: f64,
    /// Binomial standard error of `empirical`.
    pub std_error: f64,
    /// Exact error by enumeration; BSC only.
    pub exact: Option<f64>,
    /// `4 exp(-(1-2p)^2 s / 32)`; BSC at `f = 1/2` only.
    pub hoeffding: Option<f64>,
}

/// Classifies `trials` synthetic teams per hypothesis. A synthetic team has
/// zero, one or two sick members, so each test is positive with the pooled
/// rate `0`, `f` or `2f - f^2` before channel noise. Hypothesis `h` uses
/// stream `h` of `seed`.
pub fn classifier_bench(
    channel: &ChannelModel,
    s: u64,
    trials: u64,
    f: f64,
    seed: u64,
) -> Vec<BenchRow> {
    let classifier = TeamClassifier::new(channel, f);
    let crossover = match channel.kind() {
        ChannelKind::Bsc { crossover } => Some(*crossover),
        _ => None,
    };
    Hypothesis::ALL
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let mut rng = sub_rng(seed, i as u64);
            let rate = h.positive_rate(f);
            let mut observations = Vec::with_capacity(s as usize);
            let mut errors = 0u64;
            for _ in 0..trials {
                observations.clear();
                for _ in 0..s {
                    let positive = rng.random_bool(rate);
                    observations.push(channel.sample(positive, &mut rng));
                }
                errors += (classifier.classify(&observations) != h) as u64;
            }
            let empirical = errors as f64 / trials as f64;
            BenchRow {
                hypothesis: h,
                trials,
                errors,
                empirical,
                std_error: (empirical * (1.0 - empirical) / trials as f64).sqrt(),
                exact: crossover.map(|p| exact_classifier_error(p, s, h, f)),
                hoeffding: crossover
                    .filter(|_| f == 0.5)
                    .map(|p| 4.0 * (-(1.0 - 2.0 * p).powi(2) * s as f64 / 32.0).exp()),
            }
        })
        .collect()
}
