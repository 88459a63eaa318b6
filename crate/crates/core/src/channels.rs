//! Binary-input noise channels and the information quantities that size the
//! scheme.
//!
//! A channel is a pair of output laws `(mu0, mu1)`: the law of a test's
//! observation when its noiseless outcome is negative or positive. Likelihoods
//! and divergences are in nats; capacity is reported in bits per test.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{quadrature, Error, Result};

const NORMALIZATION_TOL: f64 = 1e-12;
const BLAHUT_GAP_BITS: f64 = 1e-10;
const BLAHUT_MAX_ITER: usize = 1_000_000;
const QUAD_TOL: f64 = 1e-10;
const QUAD_SIGMAS: f64 = 8.0;

/// One noisy test result.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(untagged))]
pub enum Observation {
    /// Index into a discrete output alphabet. Binary channels use `0`/`1`.
    Symbol(u32),
    /// A point on the real line.
    Real(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelKind {
    /// Flips the outcome with probability `crossover`.
    Bsc { crossover: f64 },
    /// BPSK over additive Gaussian noise: 0 maps to +1, 1 maps to -1.
    Awgn { sigma: f64 },
    /// A positive outcome reads negative with probability `dropout`;
    /// negatives are never flipped.
    ZChannel { dropout: f64 },
    /// Arbitrary finite output alphabet.
    Tabulated {
        given_zero: Vec<f64>,
        given_one: Vec<f64>,
    },
}

/// A validated binary-input channel. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    kind: ChannelKind,
}

/// Mixture `(1 - w) mu0 + w mu1` of the two output laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mixture {
    one_weight: f64,
}

impl Mixture {
    pub fn new(one_weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&one_weight) {
            return Err(Error::param(
                "mixture weight",
                format!("{one_weight} not in [0, 1]"),
            ));
        }
        Ok(Mixture { one_weight })
    }

    pub const fn zero() -> Self {
        Mixture { one_weight: 0.0 }
    }

    pub const fn one() -> Self {
        Mixture { one_weight: 1.0 }
    }

    /// `(w0, w1)`.
    pub fn weights(&self) -> (f64, f64) {
        (1.0 - self.one_weight, self.one_weight)
    }
}

/// Team-content hypotheses the isolation classifier chooses between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Hypothesis {
    Empty,
    Exact,
    TwoPlus,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 3] = [Hypothesis::Empty, Hypothesis::Exact, Hypothesis::TwoPlus];

    /// Probability that a test row with iid inclusion rate `f` is noiselessly
    /// positive. `TwoPlus` uses the exactly-two-sick rate `1 - (1 - f)^2`.
    pub fn positive_rate(self, f: f64) -> f64 {
        match self {
            Hypothesis::Empty => 0.0,
            Hypothesis::Exact => f,
            Hypothesis::TwoPlus => 2.0 * f - f * f,
        }
    }

    pub fn mixture(self, f: f64) -> Mixture {
        Mixture {
            one_weight: self.positive_rate(f),
        }
    }
}

impl ChannelModel {
    /// Binary symmetric channel. `crossover` may be `1/2` (a useless channel)
    /// so that zero-capacity behaviour can be exercised.
    pub fn bsc(crossover: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&crossover) {
            return Err(Error::InvalidChannel(format!(
                "bsc crossover {crossover} not in [0, 1/2]"
            )));
        }
        Ok(Self {
            kind: ChannelKind::Bsc { crossover },
        })
    }

    pub fn noiseless() -> Self {
        Self {
            kind: ChannelKind::Bsc { crossover: 0.0 },
        }
    }

    pub fn awgn(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidChannel(format!(
                "awgn sigma {sigma} must be positive"
            )));
        }
        Ok(Self {
            kind: ChannelKind::Awgn { sigma },
        })
    }

    pub fn z_channel(dropout: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&dropout) {
            return Err(Error::InvalidChannel(format!(
                "z-channel dropout {dropout} not in [0, 1]"
            )));
        }
        Ok(Self {
            kind: ChannelKind::ZChannel { dropout },
        })
    }

    pub fn tabulated(given_zero: Vec<f64>, given_one: Vec<f64>) -> Result<Self> {
        if given_zero.is_empty() || given_zero.len() != given_one.len() {
            return Err(Error::InvalidChannel(
                "tabulated rows must be nonempty and of equal length".to_string(),
            ));
        }
        if given_zero.len() > u32::MAX as usize {
            return Err(Error::InvalidChannel("alphabet too large".to_string()));
        }
        for row in [&given_zero, &given_one] {
            if row.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
                return Err(Error::InvalidChannel(
                    "negative or non-finite probability".to_string(),
                ));
            }
            let total: f64 = row.iter().sum();
            if libm::fabs(total - 1.0) > NORMALIZATION_TOL {
                return Err(Error::InvalidChannel(format!("row sums to {total}, not 1")));
            }
        }
        Ok(Self {
            kind: ChannelKind::Tabulated {
                given_zero,
                given_one,
            },
        })
    }

    pub fn kind(&self) -> &ChannelKind {
        &self.kind
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self.kind, ChannelKind::Awgn { .. })
    }

    /// Output alphabet size, `None` for the real line.
    pub fn alphabet_size(&self) -> Option<usize> {
        match &self.kind {
            ChannelKind::Bsc { .. } | ChannelKind::ZChannel { .. } => Some(2),
            ChannelKind::Awgn { .. } => None,
            ChannelKind::Tabulated { given_zero, .. } => Some(given_zero.len()),
        }
    }

    /// The rows `(mu0, mu1)` of a discrete channel.
    pub fn discrete_laws(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match &self.kind {
            ChannelKind::Bsc { crossover: p } => {
                Some((alloc::vec![1.0 - p, *p], alloc::vec![*p, 1.0 - p]))
            }
            ChannelKind::ZChannel { dropout: q } => {
                Some((alloc::vec![1.0, 0.0], alloc::vec![*q, 1.0 - q]))
            }
            ChannelKind::Tabulated {
                given_zero,
                given_one,
            } => Some((given_zero.clone(), given_one.clone())),
            ChannelKind::Awgn { .. } => None,
        }
    }

    /// `mu0 == mu1`.
    pub fn is_degenerate(&self) -> bool {
        match self.discrete_laws() {
            Some((a, b)) => a == b,
            None => false,
        }
    }

    pub fn contains(&self, obs: Observation) -> bool {
        match (obs, self.alphabet_size()) {
            (Observation::Symbol(s), Some(m)) => (s as usize) < m,
            (Observation::Real(x), None) => x.is_finite(),
            _ => false,
        }
    }

    /// Draws the observation for a test whose noiseless outcome is `positive`.
    pub fn sample<R: Rng + ?Sized>(&self, positive: bool, rng: &mut R) -> Observation {
        match &self.kind {
            ChannelKind::Bsc { crossover } => {
                let flip = rng.random_bool(*crossover);
                Observation::Symbol((positive ^ flip) as u32)
            }
            ChannelKind::Awgn { sigma } => {
                let mean = if positive { -1.0 } else { 1.0 };
                let z: f64 = StandardNormal.sample(rng);
                Observation::Real(mean + sigma * z)
            }
            ChannelKind::ZChannel { dropout } => {
                if positive && !rng.random_bool(*dropout) {
                    Observation::Symbol(1)
                } else {
                    Observation::Symbol(0)
                }
            }
            ChannelKind::Tabulated {
                given_zero,
                given_one,
            } => {
                let row = if positive { given_one } else { given_zero };
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut last_positive = 0;
                for (i, &p) in row.iter().enumerate() {
                    if p > 0.0 {
                        last_positive = i;
                    }
                    acc += p;
                    if u < acc {
                        return Observation::Symbol(i as u32);
                    }
                }
                // rounding left u above the accumulated mass
                Observation::Symbol(last_positive as u32)
            }
        }
    }

    /// `ln d mu_bit (obs)`; `-inf` outside the support or the domain.
    pub fn log_density(&self, obs: Observation, bit: bool) -> f64 {
        match (&self.kind, obs) {
            (ChannelKind::Bsc { crossover: p }, Observation::Symbol(y)) if y < 2 => {
                if (y == 1) == bit {
                    libm::log(1.0 - p)
                } else {
                    libm::log(*p)
                }
            }
            (ChannelKind::Awgn { sigma }, Observation::Real(y)) => {
                gaussian_log_density(y, bit, *sigma)
            }
            (ChannelKind::ZChannel { dropout: q }, Observation::Symbol(y)) if y < 2 => {
                match (bit, y) {
                    (false, 0) => 0.0,
                    (false, _) => f64::NEG_INFINITY,
                    (true, 0) => libm::log(*q),
                    (true, _) => libm::log(1.0 - q),
                }
            }
            (
                ChannelKind::Tabulated {
                    given_zero,
                    given_one,
                },
                Observation::Symbol(y),
            ) if (y as usize) < given_zero.len() => {
                let row = if bit { given_one } else { given_zero };
                libm::log(row[y as usize])
            }
            _ => f64::NEG_INFINITY,
        }
    }

    /// `ln(w0 dmu0(obs) + w1 dmu1(obs))`, in nats. Returns `-inf` when the
    /// mixture puts no mass on `obs`.
    pub fn log_likelihood(&self, obs: Observation, mixture: Mixture) -> f64 {
        let (w0, w1) = mixture.weights();
        let a = if w0 > 0.0 {
            libm::log(w0) + self.log_density(obs, false)
        } else {
            f64::NEG_INFINITY
        };
        let b = if w1 > 0.0 {
            libm::log(w1) + self.log_density(obs, true)
        } else {
            f64::NEG_INFINITY
        };
        log_add(a, b)
    }

    /// Capacity in bits per test, maximized over the input law.
    pub fn capacity(&self) -> Result<f64> {
        match &self.kind {
            ChannelKind::Bsc { crossover } => Ok(bsc_capacity(*crossover)),
            ChannelKind::Awgn { sigma } => awgn_capacity(*sigma),
            _ => {
                let (mu0, mu1) = self.discrete_laws().expect("discrete channel");
                discrete_capacity(&mu0, &mu1)
            }
        }
    }

    /// The four divergences `[D(H0||H1), D(H1||H0), D(H1||H2), D(H2||H1)]`
    /// in nats, where `H0 = mu0`, `H1` is the one-sick mixture and `H2` the
    /// two-sick mixture at inclusion rate `f`.
    pub fn hypothesis_divergences(&self, f: f64) -> Result<[f64; 4]> {
        check_fraction(f)?;
        let h0 = Hypothesis::Empty.mixture(f);
        let h1 = Hypothesis::Exact.mixture(f);
        let h2 = Hypothesis::TwoPlus.mixture(f);
        Ok([
            self.mixture_divergence(h0, h1)?,
            self.mixture_divergence(h1, h0)?,
            self.mixture_divergence(h1, h2)?,
            self.mixture_divergence(h2, h1)?,
        ])
    }

    /// Smallest of [`hypothesis_divergences`](Self::hypothesis_divergences):
    /// the exponent that governs how many tests a team classification needs.
    pub fn separation_exponent(&self, f: f64) -> Result<f64> {
        let d = self.hypothesis_divergences(f)?;
        let min = d.iter().copied().fold(f64::INFINITY, f64::min);
        if self.is_degenerate() || !(min > 0.0) {
            return Err(Error::Unseparable);
        }
        Ok(min)
    }

    /// `min(D(mu0||mu1), D(mu1||mu0))`: the exponent for testing one person
    /// alone.
    pub fn verification_exponent(&self) -> Result<f64> {
        let a = self.mixture_divergence(Mixture::zero(), Mixture::one())?;
        let b = self.mixture_divergence(Mixture::one(), Mixture::zero())?;
        let min = a.min(b);
        if self.is_degenerate() || !(min > 0.0) {
            return Err(Error::Unseparable);
        }
        Ok(min)
    }

    /// `D(P || Q)` in nats between two mixtures of this channel's laws.
    pub fn mixture_divergence(&self, p: Mixture, q: Mixture) -> Result<f64> {
        match &self.kind {
            ChannelKind::Awgn { sigma } => {
                let sigma = *sigma;
                let (lo, hi) = awgn_range(sigma);
                quadrature::integrate(
                    |y| {
                        let lp = awgn_mixture_log_density(y, sigma, p);
                        if lp == f64::NEG_INFINITY {
                            return 0.0;
                        }
                        let lq = awgn_mixture_log_density(y, sigma, q);
                        libm::exp(lp) * (lp - lq)
                    },
                    lo,
                    hi,
                    QUAD_TOL,
                )
            }
            _ => {
                let (mu0, mu1) = self.discrete_laws().expect("discrete channel");
                let pp = mix_rows(&mu0, &mu1, p);
                let qq = mix_rows(&mu0, &mu1, q);
                Ok(kl_divergence(&pp, &qq))
            }
        }
    }

    /// The channel's single scalar parameter, if it has one.
    pub fn scalar_parameter(&self) -> Option<f64> {
        match &self.kind {
            ChannelKind::Bsc { crossover } => Some(*crossover),
            ChannelKind::Awgn { sigma } => Some(*sigma),
            ChannelKind::ZChannel { dropout } => Some(*dropout),
            ChannelKind::Tabulated { .. } => None,
        }
    }

    /// Same family with a different scalar parameter.
    pub fn with_scalar_parameter(&self, value: f64) -> Result<Self> {
        match &self.kind {
            ChannelKind::Bsc { .. } => Self::bsc(value),
            ChannelKind::Awgn { .. } => Self::awgn(value),
            ChannelKind::ZChannel { .. } => Self::z_channel(value),
            ChannelKind::Tabulated { .. } => Err(Error::InvalidChannel(
                "tabulated channels have no scalar parameter".to_string(),
            )),
        }
    }
}

fn check_fraction(f: f64) -> Result<()> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(Error::param(
            "inclusion_fraction",
            format!("{f} not in (0, 1)"),
        ))
    }
}

/// `ln(e^a + e^b)` without overflow; `-inf` is the additive identity.
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + libm::log1p(libm::exp(lo - hi))
}

fn gaussian_log_density(y: f64, bit: bool, sigma: f64) -> f64 {
    let mean = if bit { -1.0 } else { 1.0 };
    let d = y - mean;
    -d * d / (2.0 * sigma * sigma) - libm::log(sigma * libm::sqrt(2.0 * PI))
}

fn awgn_mixture_log_density(y: f64, sigma: f64, m: Mixture) -> f64 {
    let (w0, w1) = m.weights();
    let a = if w0 > 0.0 {
        libm::log(w0) + gaussian_log_density(y, false, sigma)
    } else {
        f64::NEG_INFINITY
    };
    let b = if w1 > 0.0 {
        libm::log(w1) + gaussian_log_density(y, true, sigma)
    } else {
        f64::NEG_INFINITY
    };
    log_add(a, b)
}

fn awgn_range(sigma: f64) -> (f64, f64) {
    (-1.0 - QUAD_SIGMAS * sigma, 1.0 + QUAD_SIGMAS * sigma)
}

fn mix_rows(mu0: &[f64], mu1: &[f64], m: Mixture) -> Vec<f64> {
    let (w0, w1) = m.weights();
    mu0.iter().zip(mu1).map(|(a, b)| w0 * a + w1 * b).collect()
}

/// `D(p || q)` in nats with `0 ln(0/q) = 0` and `p ln(p/0) = +inf`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return f64::INFINITY;
        }
        total += pi * libm::log(pi / qi);
    }
    // rounding can leave a tiny negative value for equal laws
    total.max(0.0)
}

fn xlog2x(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * libm::log2(x)
    }
}

/// `1 + p log2 p + (1 - p) log2 (1 - p)`, valid on all of `[0, 1]`.
pub fn bsc_capacity(p: f64) -> f64 {
    1.0 + xlog2x(p) + xlog2x(1.0 - p)
}

/// Capacity in bits of the binary-input channel with rows `mu0`, `mu1`, by
/// Blahut-Arimoto iteration until the upper and lower bounds meet.
pub fn discrete_capacity(mu0: &[f64], mu1: &[f64]) -> Result<f64> {
    if mu0.len() != mu1.len() || mu0.is_empty() {
        return Err(Error::InvalidChannel("rows must match".to_string()));
    }
    let rows = [mu0, mu1];
    let mut input = [0.5f64, 0.5];
    let mut output = alloc::vec![0.0; mu0.len()];
    for _ in 0..BLAHUT_MAX_ITER {
        for (y, o) in output.iter_mut().enumerate() {
            *o = input[0] * mu0[y] + input[1] * mu1[y];
        }
        let mut c = [0.0f64; 2];
        for (x, row) in rows.iter().enumerate() {
            c[x] = libm::exp(kl_divergence(row, &output));
        }
        let weighted = input[0] * c[0] + input[1] * c[1];
        let lower = libm::log(weighted);
        let upper = libm::log(c[0].max(c[1]));
        if !(lower.is_finite() && upper.is_finite()) {
            return Err(Error::Numerics(
                "blahut-arimoto produced a non-finite bound",
            ));
        }
        if (upper - lower) / LN_2 < BLAHUT_GAP_BITS {
            return Ok((lower / LN_2).max(0.0));
        }
        input = [input[0] * c[0] / weighted, input[1] * c[1] / weighted];
    }
    Err(Error::Numerics("blahut-arimoto did not converge"))
}

/// BPSK-input AWGN capacity with the (optimal) uniform input law.
pub fn awgn_capacity(sigma: f64) -> Result<f64> {
    let (lo, hi) = awgn_range(sigma);
    let half = Mixture { one_weight: 0.5 };
    let nats = quadrature::integrate(
        |y| {
            let lm = awgn_mixture_log_density(y, sigma, half);
            let l0 = gaussian_log_density(y, false, sigma);
            let l1 = gaussian_log_density(y, true, sigma);
            0.5 * libm::exp(l0) * (l0 - lm) + 0.5 * libm::exp(l1) * (l1 - lm)
        },
        lo,
        hi,
        QUAD_TOL,
    )?;
    Ok((nats / LN_2).max(0.0))
}

impl fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ChannelKind::Bsc { crossover } => write!(f, "bsc:{crossover}"),
            ChannelKind::Awgn { sigma } => write!(f, "awgn:{sigma}"),
            ChannelKind::ZChannel { dropout } => write!(f, "z:{dropout}"),
            ChannelKind::Tabulated {
                given_zero,
                given_one,
            } => {
                f.write_str("table:")?;
                write_row(f, given_zero)?;
                f.write_str("/")?;
                write_row(f, given_one)
            }
        }
    }
}

fn write_row(f: &mut fmt::Formatter<'_>, row: &[f64]) -> fmt::Result {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{v}")?;
    }
    Ok(())
}

impl FromStr for ChannelModel {
    type Err = Error;

    /// Parses `bsc:<p>`, `awgn:<sigma>`, `z:<q>`, `noiseless`, or
    /// `table:<mu0 row>/<mu1 row>` with comma-separated probabilities.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("noiseless") {
            return Ok(Self::noiseless());
        }
        let (family, arg) = s.split_once(':').ok_or_else(|| {
            Error::InvalidChannel(format!("`{s}`: expected <family>:<parameter>"))
        })?;
        let number = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidChannel(format!("`{t}` is not a number")))
        };
        match family.trim().to_ascii_lowercase().as_str() {
            "bsc" => Self::bsc(number(arg)?),
            "awgn" => Self::awgn(number(arg)?),
            "z" | "zchannel" => Self::z_channel(number(arg)?),
            "table" => {
                let (a, b) = arg.split_once('/').ok_or_else(|| {
                    Error::InvalidChannel("table needs `<row0>/<row1>`".to_string())
                })?;
                let row = |t: &str| t.split(',').map(number).collect::<Result<Vec<f64>>>();
                Self::tabulated(row(a)?, row(b)?)
            }
            other => Err(Error::InvalidChannel(format!(
                "unknown channel family `{other}`"
            ))),
        }
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for ChannelModel {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> core::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for ChannelModel {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> core::result::Result<Self, D::Error> {
        let s = alloc::string::String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
