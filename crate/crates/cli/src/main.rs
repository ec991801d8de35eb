//! Experiment driver: run reconstruction scenarios, sweep reconstruction
//! radii, or inspect spherical Bessel nulls.

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use soundfield::harness::{
    radius_sweep, run_experiment, write_report, write_sweep_csv, MethodResult,
};
use soundfield::shd::{detect_bessel_nulls, order_budget};
use soundfield::{acoustics::Medium, ExperimentConfig64};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "soundfield", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method in a scenario config and emit report files.
    Run {
        /// Scenario JSON (SI units, seed mandatory).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for report.json, field CSVs and loss.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pure-network reconstruction error as a function of target radius.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Radii in meters as start:step:end (e.g. 0.02:0.005:0.08).
        #[arg(long)]
        radii: String,
        /// Optional CSV output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the spherical Bessel null report for a frequency/radius pair.
    Nulls {
        /// Frequency in Hz.
        #[arg(long)]
        freq: f64,
        /// Sphere radius in meters.
        #[arg(long)]
        radius: f64,
        /// Speed of sound in m/s.
        #[arg(long, default_value_t = 343.0)]
        speed_of_sound: f64,
        /// Null threshold on |j_u(k r)|.
        #[arg(long, default_value_t = soundfield::shd::NULL_THRESHOLD)]
        threshold: f64,
    },
}

fn load_config(path: &PathBuf) -> anyhow::Result<ExperimentConfig64> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let config: ExperimentConfig64 =
        serde_json::from_str(&text).context("parsing scenario config")?;
    config.validate()?;
    Ok(config)
}

fn parse_radii(spec: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("radii must be start:step:end, got {spec:?}");
    }
    let start: f64 = parts[0].parse()?;
    let step: f64 = parts[1].parse()?;
    let end: f64 = parts[2].parse()?;
    if step <= 0.0 || end < start {
        bail!("radii range {spec:?} is empty");
    }
    let mut radii = Vec::new();
    let mut i = 0usize;
    loop {
        let r = start + step * i as f64;
        if r > end + 1e-12 {
            break;
        }
        radii.push(r);
        i += 1;
    }
    Ok(radii)
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run { config, out } => {
            let config = load_config(&config)?;
            let report = run_experiment(&config)?;
            write_report(&report, &out)?;
            for outcome in &report.methods {
                match &outcome.result {
                    MethodResult::Ok { epsilon_db, .. } => {
                        println!("{:>10}  epsilon = {epsilon_db:8.2} dB", outcome.method.name())
                    }
                    MethodResult::Failed { error } => {
                        println!("{:>10}  failed: {error}", outcome.method.name())
                    }
                }
            }
            println!("report written to {}", out.display());
        }
        Command::Sweep { config, radii, out } => {
            let config = load_config(&config)?;
            let radii = parse_radii(&radii)?;
            let sweep = radius_sweep(&config, &radii)?;
            match out {
                Some(path) => {
                    let file = std::fs::File::create(&path)?;
                    write_sweep_csv(&sweep, file)?;
                    println!("sweep written to {}", path.display());
                }
                None => write_sweep_csv(&sweep, std::io::stdout().lock())?,
            }
        }
        Command::Nulls {
            freq,
            radius,
            speed_of_sound,
            threshold,
        } => {
            let medium = Medium { speed_of_sound };
            let budget = order_budget(freq, radius, &medium);
            let report = detect_bessel_nulls(freq, radius, &medium, budget.0, threshold)?;
            println!(
                "f = {freq} Hz, r = {radius} m, s = {speed_of_sound} m/s, U = {}",
                budget.0
            );
            for entry in &report.entries {
                println!(
                    "  order {:2}  |j_u(kr)| = {:11.4e}  {}",
                    entry.order,
                    entry.bessel_magnitude,
                    if entry.is_null { "NULL" } else { "ok" }
                );
            }
        }
    }
    Ok(())
}
