use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use diffamp::scenario::{exit_code, run_scenario, Command, Overrides, ScenarioConfig};
use diffamp::{Error, Result};

/// Stochastic amplifier experiments: spectra, moment generating functions,
/// split-step simulation and large-deviation asymptotics.
#[derive(Parser, Debug)]
#[command(name = "diffamp", version = env!("CARGO_PKG_VERSION"))]
struct Cli {
    /// spectrum | covariance-check | mgf | simulate | sweep | lemma1 | asymptotics | witness
    command: Command,
    /// TOML scenario file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Coupling for simulate, lemma1, asymptotics, witness.
    #[arg(long)]
    lambda: Option<f64>,
    /// `lo:hi:n` grid for mgf and sweep.
    #[arg(long)]
    lambda_grid: Option<String>,
    /// Monte Carlo sample count.
    #[arg(long)]
    samples: Option<usize>,
}

fn load(cli: &Cli) -> Result<(ScenarioConfig, Option<String>)> {
    let Some(path) = &cli.config else {
        return Ok((ScenarioConfig::default(), None));
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        field: "--config".into(),
        reason: format!("{}: {e}", path.display()),
    })?;
    let cfg = ScenarioConfig::from_toml(&text)?;
    Ok((cfg, Some(text)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load(&cli).and_then(|(mut cfg, text)| {
        cfg.apply(
            cli.command,
            &Overrides {
                seed: cli.seed,
                lambda: cli.lambda,
                lambda_grid: cli.lambda_grid.clone(),
                samples: cli.samples,
            },
        );
        run_scenario(cli.command, &cfg, text.as_deref(), &cli.out)
    });
    match &result {
        Ok(outcome) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&outcome.summary).expect("json serializes")
            );
        }
        Err(e) => eprintln!("diffamp {}: {e}", cli.command),
    }
    ExitCode::from(exit_code(&result) as u8)
}
