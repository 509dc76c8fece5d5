use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use gpreg::config::{parse_config, ExperimentConfig};
use gpreg::experiment::{self, Example, ExperimentError};
use gpreg::plants::{lorenz_residual, LorenzCoefficients, LorenzParams};

#[derive(Parser)]
#[command(name = "gpreg", version, about = "GP-based data-driven output regulation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run { config: PathBuf },
    /// Re-run a benchmark (example1, example2 or example3) with its defaults.
    Reproduce {
        example: String,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run a configuration with and without the learned feedforward.
    CompareIm { config: PathBuf },
    /// Check the closed-form Lorenz steady-state maps against the plant.
    OracleCheck {
        #[arg(long, default_value_t = 0.8)]
        sigma: f64,
        #[arg(long, num_args = 2, default_values_t = [0.0, 4.0])]
        w0: Vec<f64>,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

#[derive(Debug)]
struct Failure {
    kind: &'static str,
    message: String,
    key: Option<String>,
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let key = match &e {
            ExperimentError::Config(c) => c.key().map(String::from),
            _ => None,
        };
        Failure {
            kind: e.kind(),
            message: e.to_string(),
            key,
        }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        kind: "IoError",
        message: format!("cannot read {}: {e}", path.display()),
        key: None,
    })?;
    Ok(parse_config(&text).map_err(ExperimentError::from)?)
}

fn run_and_write(cfg: &ExperimentConfig) -> Result<experiment::ExperimentOutcome, Failure> {
    match experiment::run_experiment(cfg) {
        Ok(outcome) => {
            experiment::write_outputs(cfg, &outcome)?;
            Ok(outcome)
        }
        Err(e) => {
            if let (ExperimentError::Simulation { partial: Some(p), .. }, Some(path)) = (&e, &cfg.outputs.trajectory) {
                // Best effort: keep the partial arc for post-mortem.
                let _ = experiment::write_trajectory(p, cfg.oracle_overlay, path);
            }
            Err(e.into())
        }
    }
}

fn execute(cli: Cli) -> Result<serde_json::Value, Failure> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load(&config)?;
            let outcome = run_and_write(&cfg)?;
            let mut out = json!({ "plant": cfg.plant_kind().as_str(), "metrics": outcome.with_im.metrics });
            if let Some(twin) = outcome.without_im {
                out["without_im"] = json!(twin.metrics);
            }
            Ok(out)
        }
        Command::Reproduce { example, out_dir } => {
            let ex = Example::parse(&example)?;
            let (csv, metrics) = experiment::reproduce(ex, &out_dir)?;
            Ok(json!({ "example": ex.name(), "csv": csv, "metrics": metrics }))
        }
        Command::CompareIm { config } => {
            let mut cfg = load(&config)?;
            cfg.compare_without_im = true;
            let outcome = run_and_write(&cfg)?;
            let twin = outcome.without_im.expect("comparison requested");
            let with = outcome.with_im.metrics;
            Ok(json!({
                "plant": cfg.plant_kind().as_str(),
                "with_im": with,
                "without_im": twin.metrics,
                "with_im_better": with.rms_error_last_quarter < twin.metrics.rms_error_last_quarter,
            }))
        }
        Command::OracleCheck { sigma, w0, tolerance } => {
            let params = LorenzParams {
                sigma,
                ..Default::default()
            };
            let plant_err = |e: gpreg::plants::PlantError| Failure {
                kind: "Plant",
                message: e.to_string(),
                key: None,
            };
            let coeffs = LorenzCoefficients::from_params(&params).map_err(plant_err)?;
            let residual = lorenz_residual(&params, &coeffs, &w0, 2.0 * PI / sigma).map_err(plant_err)?;
            if residual > tolerance {
                return Err(Failure {
                    kind: "OracleMismatch",
                    message: format!("regulator residual {residual:e} exceeds {tolerance:e}"),
                    key: None,
                });
            }
            Ok(json!({ "residual": residual, "tolerance": tolerance, "pass": true }))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("json"));
            ExitCode::SUCCESS
        }
        Err(f) => {
            let mut v = json!({ "error": f.kind, "message": f.message });
            if let Some(k) = f.key {
                v["key"] = json!(k);
            }
            eprintln!("{v}");
            ExitCode::FAILURE
        }
    }
}
