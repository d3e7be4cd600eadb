use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmloc_cli::config::load_config;
use mmloc_cli::{
    cmd_baseline, cmd_geodesic_demo, cmd_ingest, cmd_run, cmd_sweep, cmd_synth, CliError,
};

/// Indoor localization by spectral manifold matching.
#[derive(Parser)]
#[command(name = "mmloc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file; relative paths inside it resolve against its directory.
    config: PathBuf,
    /// Override a config value, e.g. `--set lambda=0.1` or `--set anchors.count=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for `--set output_dir=DIR`.
    #[arg(long)]
    output_dir: Option<String>,
    /// Shorthand for `--set seed=N`.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn overrides(&self) -> Vec<String> {
        let mut v = self.overrides.clone();
        if let Some(d) = &self.output_dir {
            v.push(format!(
                "output_dir={}",
                serde_json::Value::from(d.as_str())
            ));
        }
        if let Some(s) = self.seed {
            v.push(format!("seed={s}"));
        }
        v
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus.
    Synth(Common),
    /// Convert an RSSI fingerprinting table into a corpus.
    Ingest(Common),
    /// Run the full localization pipeline.
    Run(Common),
    /// Labeled-only nearest-neighbour baseline.
    Baseline(Common),
    /// Select lambda (and optionally d) by matching loss.
    Sweep(Common),
    /// Wall experiment: geodesic versus Euclidean area graph.
    GeodesicDemo(Common),
}

fn execute(cmd: &Command) -> Result<String, CliError> {
    Ok(match cmd {
        Command::Synth(c) => {
            let corpus = cmd_synth(&load_config(&c.config, &c.overrides())?)?;
            format!("wrote {} devices", corpus.len())
        }
        Command::Ingest(c) => {
            let corpus = cmd_ingest(&load_config(&c.config, &c.overrides())?)?;
            format!(
                "wrote {} locations with {} receivers",
                corpus.len(),
                corpus.feature_dim()
            )
        }
        Command::Run(c) => {
            let out = cmd_run(&load_config(&c.config, &c.overrides())?)?;
            match out.metrics.manifold {
                Some(s) => format!("median error {:.4} m over {} devices", s.median, s.count),
                None => "done (no ground truth for metrics)".into(),
            }
        }
        Command::Baseline(c) => {
            let m = cmd_baseline(&load_config(&c.config, &c.overrides())?)?;
            match m.baseline {
                Some(s) => format!(
                    "baseline median error {:.4} m over {} devices",
                    s.median, s.count
                ),
                None => "done (no ground truth for metrics)".into(),
            }
        }
        Command::Sweep(c) => {
            let s = cmd_sweep(&load_config(&c.config, &c.overrides())?)?;
            match (s.selected_d, s.selected_lambda) {
                (Some(d), Some(l)) => format!("selected d = {d}, lambda = {l}"),
                _ => "every grid point failed".into(),
            }
        }
        Command::GeodesicDemo(c) => {
            let o = cmd_geodesic_demo(&load_config(&c.config, &c.overrides())?)?;
            format!(
                "geodesic area graph better in {} of {} seeds",
                o.geodesic_wins,
                o.rows.len()
            )
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("MM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
    match execute(&cli.command) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
