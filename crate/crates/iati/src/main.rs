use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use iati::bench::classifier_bench;
use iati::harness::{run_experiment, sweep, write_csv, write_sweep_csv, SweepAxis};
use iati::transcript_io::read_transcript;
use iati::ExperimentConfig;
use iati_core::{decode_only, ChannelModel};
use serde_json::json;

/// Isolate-then-identify adaptive group testing over noisy channels.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Capacity (bits) and separation exponent (nats) of a channel.
    Capacity {
        /// `bsc:<p>`, `awgn:<sigma>`, `z:<q>`, `noiseless` or `table:<row0>/<row1>`.
        #[arg(long)]
        channel: ChannelModel,
        #[arg(long, default_value_t = 0.5)]
        f: f64,
    },
    /// Run one experiment.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one experiment per value along an axis.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// p, n, k, epsilon, f, c or schedule.
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated values; schedules separate with `;`.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Team classifier error versus the exact value and the Hoeffding bound.
    ClassifyBench {
        #[arg(long)]
        channel: ChannelModel,
        #[arg(long)]
        s: u64,
        #[arg(long)]
        trials: u64,
        #[arg(long, default_value_t = 0.5)]
        f: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recompute the estimate from a JSONL transcript.
    Decode {
        #[arg(long)]
        transcript: PathBuf,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let stdout = io::stdout();
    match cli.command {
        Command::Capacity { channel, f } => {
            let separation = channel.separation_exponent(f).ok();
            let out = json!({
                "channel": channel.to_string(),
                "capacity_bits": channel.capacity()?,
                "separation_nats": separation,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Simulate { config, seed } => {
            let config = load(&config, seed)?;
            let report = run_experiment(&config)?;
            if let Some(path) = &config.output.csv {
                write_csv(create(path)?, &report.rows)?;
            }
            let summary = serde_json::to_string_pretty(&report.summary)?;
            if let Some(path) = &config.output.summary {
                writeln!(create(path)?, "{summary}")?;
            }
            println!("{summary}");
        }
        Command::Sweep {
            config,
            axis,
            values,
            seed,
        } => {
            let config = load(&config, seed)?;
            let sep = if axis == SweepAxis::Schedule {
                ';'
            } else {
                ','
            };
            let values: Vec<String> = values
                .split(sep)
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(String::from)
                .collect();
            let points = sweep(&config, axis, &values)?;
            let summaries: Vec<_> = points
                .iter()
                .map(|p| json!({"axis": axis.to_string(), "value": p.value, "summary": p.report.summary}))
                .collect();
            let summaries = serde_json::to_string_pretty(&summaries)?;
            match &config.output.csv {
                Some(path) => write_sweep_csv(create(path)?, axis, &points)?,
                None => write_sweep_csv(stdout.lock(), axis, &points)?,
            }
            match &config.output.summary {
                Some(path) => writeln!(create(path)?, "{summaries}")?,
                None if config.output.csv.is_some() => println!("{summaries}"),
                None => {}
            }
        }
        Command::ClassifyBench {
            channel,
            s,
            trials,
            f,
            seed,
        } => {
            anyhow::ensure!(trials > 0, "trials must be at least 1");
            let rows = classifier_bench(&channel, s, trials, f, seed);
            println!("{}", serde_json::to_string_pretty(&rows)?);
        }
        Command::Decode { transcript } => {
            let file = File::open(&transcript)
                .with_context(|| format!("opening {}", transcript.display()))?;
            let t = read_transcript(BufReader::new(file))?;
            let estimate = decode_only(&t)?;
            println!(
                "{}",
                serde_json::to_string(&json!({ "estimate": estimate }))?
            );
        }
    }
    Ok(())
}
