use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use narx_core::pipeline::{self, ExperimentConfig, RunDir};
use narx_core::{NarxError, Result};

/// Duffing oscillator NARX experiments.
///
/// Stages read and write artifacts in the output directory (`--out`, else
/// `$NARX_LAB_OUT`, else `./narx-out`). Exit codes: 0 ok, 2 configuration,
/// 3 data or stale artifact, 4 divergence.
#[derive(Parser, Debug)]
#[command(name = "narx-lab", version)]
struct Cli {
    /// JSON experiment configuration; omitted fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Start from a named preset (smoke or table) instead of the defaults.
    #[arg(long, global = true, conflicts_with = "config")]
    preset: Option<String>,
    /// Override a configuration value, e.g. `--set noise.fraction=0.5`.
    #[arg(long = "set", value_name = "PATH=VALUE", global = true)]
    overrides: Vec<String>,
    /// Noise trial: 1 output only, 2 input only, 3 both.
    #[arg(long, global = true)]
    trial: Option<u8>,
    /// Noise level as a fraction of signal size.
    #[arg(long, global = true)]
    noise: Option<f64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate forcing and clean displacement.
    Simulate,
    /// Add measurement noise to the clean series.
    Corrupt,
    /// Write the lag/lead dataset with its partition and scaling.
    Embed,
    /// Train one network.
    Train,
    /// Run the single- and multi-task hyperparameter sweeps.
    Sweep,
    /// Score a stored model on validation and test blocks.
    Evaluate {
        #[arg(long, default_value = pipeline::MODEL)]
        model: String,
    },
    /// Collect figure data from one or more sweep runs.
    Report {
        /// Sweep run directories; defaults to the output directory.
        #[arg(long, num_args = 1..)]
        runs: Vec<PathBuf>,
    },
    /// Print the resolved configuration.
    Config,
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let base = match (&cli.config, &cli.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| NarxError::io(path, e))?;
            ExperimentConfig::from_json(&text)?
        }
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => ExperimentConfig::default(),
    };
    let mut overrides = Vec::new();
    if let Some(t) = cli.trial {
        let trial = narx_core::noise::NoiseTrial::from_number(t)?;
        overrides.push(format!("noise.trial={}", serde_json::to_string(&trial)?));
    }
    if let Some(a) = cli.noise {
        overrides.push(format!("noise.fraction={a}"));
    }
    if let Some(j) = cli.jobs {
        overrides.push(format!("jobs={j}"));
    }
    overrides.extend(cli.overrides.iter().cloned());
    base.with_overrides(&overrides)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os("NARX_LAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("narx-out"))
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    if let Command::Config = cli.command {
        println!("{}", cfg.to_json());
        return Ok(());
    }
    let mut dir = RunDir::open(out_dir(cli))?;
    match &cli.command {
        Command::Simulate => pipeline::run_simulate(&cfg, &mut dir)?,
        Command::Corrupt => pipeline::run_corrupt(&cfg, &mut dir)?,
        Command::Embed => pipeline::run_embed(&cfg, &mut dir)?,
        Command::Train => {
            pipeline::run_train(&cfg, &mut dir)?;
        }
        Command::Sweep => {
            let outcome = pipeline::run_sweep(&cfg, &mut dir)?;
            let s = &outcome.summary;
            println!(
                "st: lags={} nodes={} test mpo nmse={:?}",
                s.st.lags, s.st.nodes, s.st.test_mpo_nmse_clean
            );
            println!(
                "mt: lags={} leads={} nodes={} test mpo nmse={:?}",
                s.mt.lags, s.mt.leads, s.mt.nodes, s.mt.test_mpo_nmse_clean
            );
        }
        Command::Evaluate { model } => {
            let doc = pipeline::run_evaluate(&mut dir, model)?;
            let [noisy, clean] = &doc.test;
            println!(
                "test osa nmse={} mpo nmse={:?} (noisy reference); mpo nmse={:?} (clean reference)",
                noisy.osa_nmse, noisy.mpo_nmse, clean.mpo_nmse
            );
        }
        Command::Report { runs } => {
            let runs = if runs.is_empty() {
                vec![dir.path().to_path_buf()]
            } else {
                runs.clone()
            };
            pipeline::run_report(&runs, &mut dir)?;
        }
        Command::Config => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("narx-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
