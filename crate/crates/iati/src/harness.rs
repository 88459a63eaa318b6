//! Seeded Monte Carlo trials, aggregation and sweeps.
//!
//! Trial `i` of an experiment with base seed `b` runs the scheme with seed
//! [`trial_seed`]`(b, i)`, so a trial's result depends only on `(config, b,
//! i)` and never on which worker ran it or in what order.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use iati_core::seeding::trial_seed;
use iati_core::{run_scheme, BlockLengthPolicy, Transcript};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{parse_schedule, ExperimentConfig};
use crate::transcript_io::write_transcript;
use crate::HarnessError;

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "IATI_WORKERS";

/// Column order of the per-trial CSV.
pub const CSV_COLUMNS: [&str; 12] = [
    "trial",
    "n",
    "k",
    "channel",
    "tests_isolation",
    "tests_identification",
    "tests_verify",
    "tests_total",
    "rounds",
    "failed",
    "fp",
    "fn",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: u64,
    pub n: usize,
    pub k: usize,
    pub channel: String,
    pub tests_isolation: u64,
    pub tests_identification: u64,
    pub tests_verify: u64,
    pub tests_total: u64,
    pub rounds: usize,
    pub failed: bool,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl TrialRow {
    fn record(&self) -> [String; 12] {
        [
            self.trial.to_string(),
            self.n.to_string(),
            self.k.to_string(),
            self.channel.clone(),
            self.tests_isolation.to_string(),
            self.tests_identification.to_string(),
            self.tests_verify.to_string(),
            self.tests_total.to_string(),
            self.rounds.to_string(),
            self.failed.to_string(),
            self.fp.to_string(),
            self.fn_.to_string(),
        ]
    }
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std_error: f64,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let values: Vec<f64> = values.into_iter().collect();
        let count = values.len() as f64;
        if values.is_empty() {
            return Stat {
                mean: f64::NAN,
                std_error: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / count;
        let std_error = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0);
            (var / count).sqrt()
        } else {
            0.0
        };
        Stat { mean, std_error }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub n: usize,
    pub k: usize,
    pub channel: String,
    pub capacity_bits: f64,
    pub tests_isolation: Stat,
    pub tests_identification: Stat,
    pub tests_verify: Stat,
    pub tests_total: Stat,
    pub rounds: Stat,
    pub fp: Stat,
    #[serde(rename = "fn")]
    pub fn_: Stat,
    /// `(fp + fn) / k` per trial.
    pub mistakes_per_k: Stat,
    pub failure_rate: Stat,
    /// Mean total tests over `k log2(n/k) / C`; absent when `n = k`.
    pub ratio: Option<f64>,
}

/// Aggregates rows of one experiment; every field is a function of the rows
/// and the capacity alone.
pub fn summarize(rows: &[TrialRow], capacity_bits: f64) -> Summary {
    let first = rows.first();
    let n = first.map_or(0, |r| r.n);
    let k = first.map_or(0, |r| r.k);
    let stat = |f: &dyn Fn(&TrialRow) -> f64| Stat::of(rows.iter().map(f));
    let tests_total = stat(&|r| r.tests_total as f64);
    let log_ratio = if k > 0 {
        (n as f64 / k as f64).log2()
    } else {
        0.0
    };
    let ratio =
        (log_ratio > 0.0).then(|| tests_total.mean / (k as f64 * log_ratio / capacity_bits));
    Summary {
        trials: rows.len(),
        n,
        k,
        channel: first.map_or_else(String::new, |r| r.channel.clone()),
        capacity_bits,
        tests_isolation: stat(&|r| r.tests_isolation as f64),
        tests_identification: stat(&|r| r.tests_identification as f64),
        tests_verify: stat(&|r| r.tests_verify as f64),
        tests_total,
        rounds: stat(&|r| r.rounds as f64),
        fp: stat(&|r| r.fp as f64),
        fn_: stat(&|r| r.fn_ as f64),
        mistakes_per_k: stat(&|r| (r.fp + r.fn_) as f64 / r.k as f64),
        failure_rate: stat(&|r| r.failed as u8 as f64),
        ratio,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub rows: Vec<TrialRow>,
    pub summary: Summary,
}

/// Runs trial `trial` of `config` and returns its row and transcript.
pub fn run_trial(
    config: &ExperimentConfig,
    trial: u64,
) -> Result<(TrialRow, Transcript), HarnessError> {
    let seed = trial_seed(config.seed, trial);
    let (result, transcript) =
        run_scheme(config.n, config.k, &config.channel, &config.scheme(), seed)?;
    let row = TrialRow {
        trial,
        n: config.n,
        k: config.k,
        channel: config.channel.to_string(),
        tests_isolation: result.tests_isolation,
        tests_identification: result.tests_identification,
        tests_verify: result.tests_verification,
        tests_total: result.total_tests,
        rounds: result.rounds,
        failed: result.failed(),
        fp: result.false_positives,
        fn_: result.false_negatives,
    };
    Ok((row, transcript))
}

/// Worker count from `IATI_WORKERS`, else the number of available cores.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<AggregateReport, HarnessError> {
    run_experiment_with_workers(config, worker_count())
}

pub fn run_experiment_with_workers(
    config: &ExperimentConfig,
    workers: usize,
) -> Result<AggregateReport, HarnessError> {
    config.validate()?;
    if let Some(dir) = &config.output.transcripts {
        std::fs::create_dir_all(dir)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    let rows = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|i| {
                let (row, transcript) = run_trial(config, i)?;
                if let Some(dir) = &config.output.transcripts {
                    let file = std::fs::File::create(dir.join(format!("trial_{i}.jsonl")))?;
                    let mut out = std::io::BufWriter::new(file);
                    write_transcript(&mut out, &transcript)?;
                    out.flush()?;
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    })?;
    let summary = summarize(&rows, config.channel.capacity()?);
    Ok(AggregateReport { rows, summary })
}

pub fn write_csv<W: Write>(writer: W, rows: &[TrialRow]) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(CSV_COLUMNS)?;
    for row in rows {
        out.write_record(row.record())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Vec<TrialRow>, HarnessError> {
    let mut input = csv::Reader::from_reader(reader);
    Ok(input.deserialize().collect::<Result<Vec<TrialRow>, _>>()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// The channel's scalar parameter.
    P,
    N,
    K,
    Epsilon,
    F,
    C,
    Schedule,
}

impl FromStr for SweepAxis {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "p" => SweepAxis::P,
            "n" => SweepAxis::N,
            "k" => SweepAxis::K,
            "epsilon" | "eps" | "ε" => SweepAxis::Epsilon,
            "f" => SweepAxis::F,
            "c" => SweepAxis::C,
            "schedule" => SweepAxis::Schedule,
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown sweep axis {other:?} (expected p, n, k, epsilon, f, c or schedule)"
                )))
            }
        })
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::P => "p",
            SweepAxis::N => "n",
            SweepAxis::K => "k",
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::F => "f",
            SweepAxis::C => "c",
            SweepAxis::Schedule => "schedule",
        })
    }
}

fn number<T: FromStr>(axis: SweepAxis, value: &str) -> Result<T, HarnessError>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| HarnessError::Config(format!("bad {axis} value {value:?}: {e}")))
}

/// `template` with `axis` set to `value`.
pub fn apply_axis(
    template: &ExperimentConfig,
    axis: SweepAxis,
    value: &str,
) -> Result<ExperimentConfig, HarnessError> {
    let mut config = template.clone();
    match axis {
        SweepAxis::P => {
            config.channel = template
                .channel
                .with_scalar_parameter(number(axis, value)?)?
        }
        SweepAxis::N => config.n = number(axis, value)?,
        SweepAxis::K => config.k = number(axis, value)?,
        SweepAxis::Epsilon => {
            config.block_length = BlockLengthPolicy::Ratio {
                epsilon: number(axis, value)?,
            }
        }
        SweepAxis::F => config.f = number(axis, value)?,
        SweepAxis::C => {
            config.block_length = BlockLengthPolicy::FullLog {
                c: number(axis, value)?,
            }
        }
        SweepAxis::Schedule => config.schedule = parse_schedule(value)?,
    }
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: String,
    pub report: AggregateReport,
}

/// One experiment per value along `axis`. Every value is validated before any
/// trial runs.
pub fn sweep(
    template: &ExperimentConfig,
    axis: SweepAxis,
    values: &[String],
) -> Result<Vec<SweepPoint>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Config(
            "sweep needs at least one value".into(),
        ));
    }
    let configs = values
        .iter()
        .map(|v| apply_axis(template, axis, v))
        .collect::<Result<Vec<_>, _>>()?;
    let workers = worker_count();
    values
        .iter()
        .zip(&configs)
        .map(|(value, config)| {
            Ok(SweepPoint {
                value: value.trim().to_string(),
                report: run_experiment_with_workers(config, workers)?,
            })
        })
        .collect()
}

/// Combined CSV of a sweep: `axis`, `axis_value`, then the per-trial columns.
pub fn write_sweep_csv<W: Write>(
    writer: W,
    axis: SweepAxis,
    points: &[SweepPoint],
) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec!["axis", "axis_value"];
    header.extend(CSV_COLUMNS);
    out.write_record(&header)?;
    for point in points {
        for row in &point.report.rows {
            let mut record = vec![axis.to_string(), point.value.clone()];
            record.extend(row.record());
            out.write_record(&record)?;
        }
    }
    out.flush()?;
    Ok(())
}
