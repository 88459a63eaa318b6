//! Brute-force references for the tests. Nothing here calls into the channel
//! or decoder code it is meant to check; formulas are restated from scratch.

use alloc::vec::Vec;

use crate::channels::{ChannelKind, ChannelModel, Hypothesis, Observation};
use crate::identification::Codebook;

/// Exhaustive maximum-likelihood search over every codeword, lowest index on
/// ties. BSC scores by Hamming distance, discrete channels by joint
/// (bit, symbol) counts, AWGN by the Gaussian exponent with `0 -> +1` and
/// `1 -> -1`.
pub fn exhaustive_ml_decode(
    codebook: &Codebook,
    observations: &[Observation],
    channel: &ChannelModel,
) -> usize {
    let len = codebook.block_length().min(observations.len());
    let words: Vec<Vec<bool>> = (0..codebook.team_size())
        .map(|i| codebook.codeword(i))
        .collect();
    match channel.kind() {
        ChannelKind::Bsc { crossover } => {
            let received: Vec<Option<bool>> = observations[..len]
                .iter()
                .map(|o| match o {
                    Observation::Symbol(0) => Some(false),
                    Observation::Symbol(1) => Some(true),
                    _ => None,
                })
                .collect();
            if received.iter().any(Option::is_none) || *crossover == 0.5 {
                return 0;
            }
            let distances: Vec<usize> = words
                .iter()
                .map(|w| {
                    received
                        .iter()
                        .zip(w)
                        .filter(|(r, b)| r.unwrap() != **b)
                        .count()
                })
                .collect();
            let best = *distances.iter().min().unwrap();
            if *crossover == 0.0 && best > 0 {
                // every codeword is impossible
                return 0;
            }
            distances.iter().position(|&d| d == best).unwrap()
        }
        ChannelKind::Awgn { sigma } => {
            let reals: Vec<f64> = observations[..len]
                .iter()
                .map(|o| match o {
                    Observation::Real(y) => *y,
                    Observation::Symbol(_) => f64::NAN,
                })
                .collect();
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (i, w) in words.iter().enumerate() {
                let mut score = 0.0;
                for (y, &b) in reals.iter().zip(w) {
                    let x = if b { -1.0 } else { 1.0 };
                    score -= (y - x) * (y - x) / (2.0 * sigma * sigma);
                }
                if i == 0 || score > best_score {
                    best = i;
                    best_score = score;
                }
            }
            best
        }
        ChannelKind::ZChannel { dropout } => {
            let table = [alloc::vec![1.0, 0.0], alloc::vec![*dropout, 1.0 - dropout]];
            joint_count_decode(&words, &observations[..len], &table)
        }
        ChannelKind::Tabulated {
            given_zero,
            given_one,
        } => joint_count_decode(
            &words,
            &observations[..len],
            &[given_zero.clone(), given_one.clone()],
        ),
    }
}

fn joint_count_decode(
    words: &[Vec<bool>],
    observations: &[Observation],
    table: &[Vec<f64>; 2],
) -> usize {
    let m = table[0].len();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, w) in words.iter().enumerate() {
        let mut counts = [alloc::vec![0u64; m], alloc::vec![0u64; m]];
        let mut impossible = false;
        for (o, &b) in observations.iter().zip(w) {
            match o {
                Observation::Symbol(a) if (*a as usize) < m => counts[b as usize][*a as usize] += 1,
                _ => impossible = true,
            }
        }
        let mut score = 0.0;
        for b in 0..2 {
            for a in 0..m {
                let c = counts[b][a];
                if c == 0 {
                    continue;
                }
                if table[b][a] == 0.0 {
                    impossible = true;
                } else {
                    score += c as f64 * libm::log(table[b][a]);
                }
            }
        }
        if impossible {
            score = f64::NEG_INFINITY;
        }
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    best
}

/// Exact misclassification probability of the three-way ML classifier on a
/// BSC(`p`) with `s` tests and inclusion rate `f`, when `truth` holds. The
/// positive count is binomial, so the sum runs over the `s + 1` counts the
/// decision rule gets wrong.
pub fn exact_classifier_error(p: f64, s: u64, truth: Hypothesis, f: f64) -> f64 {
    let pooled = [0.0, f, 2.0 * f - f * f];
    let rates: Vec<f64> = pooled.iter().map(|&pi| p + (1.0 - 2.0 * p) * pi).collect();
    let true_index = match truth {
        Hypothesis::Empty => 0,
        Hypothesis::Exact => 1,
        Hypothesis::TwoPlus => 2,
    };
    let sf = s as f64;
    let mut error = 0.0;
    for x in 0..=s {
        let xf = x as f64;
        let score = |r: f64| xlny(xf, r) + xlny(sf - xf, 1.0 - r);
        // two-plus wins ties, then exact
        let mut decision = 2;
        let mut best = score(rates[2]);
        for j in [1usize, 0] {
            let v = score(rates[j]);
            if v > best {
                decision = j;
                best = v;
            }
        }
        if decision != true_index {
            let log_choose =
                libm::lgamma(sf + 1.0) - libm::lgamma(xf + 1.0) - libm::lgamma(sf - xf + 1.0);
            let r = rates[true_index];
            let lp = log_choose + xlny(xf, r) + xlny(sf - xf, 1.0 - r);
            error += libm::exp(lp);
        }
    }
    error.min(1.0)
}

fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if y == 0.0 {
        f64::NEG_INFINITY
    } else {
        x * libm::log(y)
    }
}

/// Closed-form BSC quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BscQuantities {
    /// Bits per test.
    pub capacity: f64,
    /// `[D(H0||H1), D(H1||H0), D(H1||H2), D(H2||H1)]` in nats.
    pub divergences: [f64; 4],
}

/// Capacity `1 - h2(p)` and the Bernoulli divergences between the positive
/// rates `p`, `p + f(1-2p)` and `p + (2f - f^2)(1-2p)`.
pub fn closed_form_bsc_quantities(p: f64, f: f64) -> BscQuantities {
    let h2 = |x: f64| {
        let a = if x > 0.0 { -x * libm::log2(x) } else { 0.0 };
        let b = if x < 1.0 {
            -(1.0 - x) * libm::log2(1.0 - x)
        } else {
            0.0
        };
        a + b
    };
    let r0 = p;
    let r1 = p + f * (1.0 - 2.0 * p);
    let r2 = p + (2.0 * f - f * f) * (1.0 - 2.0 * p);
    BscQuantities {
        capacity: 1.0 - h2(p),
        divergences: [
            bernoulli_kl(r0, r1),
            bernoulli_kl(r1, r0),
            bernoulli_kl(r1, r2),
            bernoulli_kl(r2, r1),
        ],
    }
}

/// `D(Bern(a) || Bern(b))` in nats.
pub fn bernoulli_kl(a: f64, b: f64) -> f64 {
    let term = |x: f64, y: f64| {
        if x == 0.0 {
            0.0
        } else if y == 0.0 {
            f64::INFINITY
        } else {
            x * libm::log(x / y)
        }
    };
    term(a, b) + term(1.0 - a, 1.0 - b)
}

/// BPSK-input AWGN capacity `1 - E[log2(1 + exp(-2Y/sigma^2))]`, `Y ~ N(1,
/// sigma^2)`, by the composite trapezoid rule on a fixed fine grid over
/// `1 +- 12 sigma`.
pub fn awgn_capacity_reference(sigma: f64) -> f64 {
    const POINTS: usize = 400_000;
    let lo = 1.0 - 12.0 * sigma;
    let hi = 1.0 + 12.0 * sigma;
    let h = (hi - lo) / POINTS as f64;
    let norm = 1.0 / (sigma * libm::sqrt(2.0 * core::f64::consts::PI));
    let g = |y: f64| {
        let density = norm * libm::exp(-(y - 1.0) * (y - 1.0) / (2.0 * sigma * sigma));
        let t = -2.0 * y / (sigma * sigma);
        // log2(1 + e^t), stable for large |t|
        let softplus = if t > 30.0 {
            t + libm::log1p(libm::exp(-t))
        } else {
            libm::log1p(libm::exp(t))
        };
        density * softplus / core::f64::consts::LN_2
    };
    let mut sum = 0.5 * (g(lo) + g(hi));
    for i in 1..POINTS {
        sum += g(lo + i as f64 * h);
    }
    1.0 - sum * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tie_goes_low() {
        let cb = Codebook::from_codewords(&[alloc::vec![false, false], alloc::vec![true, true]])
            .unwrap();
        let z = [Observation::Symbol(0), Observation::Symbol(1)];
        assert_eq!(
            exhaustive_ml_decode(&cb, &z, &ChannelModel::bsc(0.1).unwrap()),
            0
        );
    }

    #[test]
    fn classifier_error_examples() {
        assert_eq!(exact_classifier_error(0.0, 3, Hypothesis::Empty, 0.5), 0.0);
        let e = exact_classifier_error(0.1, 100, Hypothesis::Exact, 0.5);
        assert!(e > 0.0 && e < 1.0);
        for &(p, s) in &[(0.0, 10u64), (0.1, 200), (0.05, 120), (0.2, 50)] {
            let bound = 4.0 * libm::exp(-(1.0 - 2.0 * p) * (1.0 - 2.0 * p) * s as f64 / 32.0);
            for h in Hypothesis::ALL {
                assert!(exact_classifier_error(p, s, h, 0.5) <= bound);
            }
        }
    }

    #[test]
    fn bsc_closed_forms() {
        let q = closed_form_bsc_quantities(0.0, 0.5);
        assert!((q.divergences[0] - core::f64::consts::LN_2).abs() < 1e-12);
        assert!(q.divergences[1].is_infinite());
        assert!((q.divergences[2] - 0.143841036).abs() < 1e-9);
        assert!((q.divergences[3] - 0.130812035).abs() < 1e-9);
        let half = closed_form_bsc_quantities(0.5, 0.5);
        assert!(half.divergences.iter().all(|&d| d.abs() < 1e-15));
        assert!(half.capacity.abs() < 1e-15);
    }

    #[test]
    fn awgn_reference_limits() {
        // nearly noiseless and nearly useless ends
        assert!((awgn_capacity_reference(0.1) - 1.0).abs() < 1e-9);
        assert!(awgn_capacity_reference(10.0) < 0.01);
    }
}
