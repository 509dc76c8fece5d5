//! Running configured experiments, computing metrics and writing CSVs.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::config::{self, ConfigError, ExperimentConfig, PlantKind};
use crate::plants::PlantError;
use crate::regulator::{simulate, HybridTrajectory, SimulationError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error("simulation failed: {source}")]
    Simulation {
        #[source]
        source: SimulationError,
        /// Trajectory up to the failure, when one exists.
        partial: Option<Box<HybridTrajectory>>,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("unknown example {0:?} (expected example1, example2 or example3)")]
    UnknownExample(String),
}

impl ExperimentError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentError::Config(ConfigError::Parse(_)) => "Parse",
            ExperimentError::Config(ConfigError::MissingKey(_)) => "MissingKey",
            ExperimentError::Config(ConfigError::InvalidValue { .. }) => "InvalidValue",
            ExperimentError::Config(ConfigError::UnknownKey(_)) => "UnknownKey",
            ExperimentError::Plant(_) => "Plant",
            ExperimentError::Simulation {
                source: SimulationError::NonFiniteState { .. },
                ..
            } => "NonFiniteState",
            ExperimentError::Simulation { .. } => "Simulation",
            ExperimentError::Io { .. } => "IoError",
            ExperimentError::UnknownExample(_) => "UnknownExample",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Summary statistics of a run. `wall_time` is informational and left out of
/// the serialized form so metric files stay reproducible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub final_abs_error: f64,
    pub rms_error_last_quarter: f64,
    /// `sup|e|` over each tenth of the run.
    pub sup_error_windows: Vec<f64>,
    pub jump_count: usize,
    /// Mean squared gap between the learned mean and the closed-form
    /// feedforward over samples taken after the first jump.
    pub gp_mse_vs_oracle: Option<f64>,
    #[serde(skip)]
    pub wall_time: f64,
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// RMS of `f(sample)` over samples with `t` in `[lo, hi]`.
pub fn rms_between(traj: &HybridTrajectory, lo: f64, hi: f64, f: impl Fn(&crate::regulator::HybridSample) -> f64) -> f64 {
    rms(traj.samples.iter().filter(|s| s.t >= lo && s.t <= hi).map(f))
}

/// `sup|e|` over samples with `t` in `[lo, hi]`.
pub fn sup_error_between(traj: &HybridTrajectory, lo: f64, hi: f64) -> f64 {
    traj.samples
        .iter()
        .filter(|s| s.t >= lo && s.t <= hi)
        .map(|s| s.e.abs())
        .fold(0.0, f64::max)
}

/// RMS of `e` over the last quarter `[0.75·t_end, t_end]`.
pub fn rms_error_last_quarter(ts: &[f64], es: &[f64]) -> f64 {
    let end = ts.last().copied().unwrap_or(0.0);
    rms(ts.iter().zip(es).filter(|(t, _)| **t >= 0.75 * end).map(|(_, e)| *e))
}

pub fn compute_metrics(traj: &HybridTrajectory, wall_time: f64) -> RunMetrics {
    let ts: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let es: Vec<f64> = traj.samples.iter().map(|s| s.e).collect();
    let end = ts.last().copied().unwrap_or(0.0);
    let mut windows = vec![0.0f64; 10];
    for (t, e) in ts.iter().zip(&es) {
        let idx = if end > 0.0 { ((t / end) * 10.0).floor() as usize } else { 0 };
        let w = &mut windows[idx.min(9)];
        *w = w.max(e.abs());
    }
    let learned: Vec<f64> = traj
        .samples
        .iter()
        .filter(|s| s.j >= 1)
        .filter_map(|s| s.u_star.map(|u| s.gp_mean - u))
        .collect();
    RunMetrics {
        final_abs_error: es.last().map(|e| e.abs()).unwrap_or(0.0),
        rms_error_last_quarter: rms_error_last_quarter(&ts, &es),
        sup_error_windows: windows,
        jump_count: traj.jump_count(),
        gp_mse_vs_oracle: (!learned.is_empty())
            .then(|| learned.iter().map(|d| d * d).sum::<f64>() / learned.len() as f64),
        wall_time,
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub trajectory: HybridTrajectory,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub with_im: RunResult,
    /// Feedback-only twin, when the comparison was requested.
    pub without_im: Option<RunResult>,
}

fn run_single(cfg: &ExperimentConfig, use_im: bool) -> Result<RunResult, ExperimentError> {
    let plant = cfg.plant.build()?;
    let mut reg = cfg.regulator.clone();
    reg.use_internal_model = reg.use_internal_model && use_im;
    let start = Instant::now();
    match simulate(plant.as_ref(), &reg, &cfg.initial, cfg.duration) {
        Ok(trajectory) => {
            let metrics = compute_metrics(&trajectory, start.elapsed().as_secs_f64());
            Ok(RunResult { trajectory, metrics })
        }
        Err(SimulationError::NonFiniteState { t, j, partial }) => Err(ExperimentError::Simulation {
            source: SimulationError::NonFiniteState {
                t,
                j,
                partial: Box::default(),
            },
            partial: Some(partial),
        }),
        Err(source) => Err(ExperimentError::Simulation { source, partial: None }),
    }
}

/// Runs the configured closed loop, and its feedback-only twin in parallel
/// when `compare_without_im` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    config::validate(cfg)?;
    if !cfg.compare_without_im {
        return Ok(ExperimentOutcome {
            with_im: run_single(cfg, true)?,
            without_im: None,
        });
    }
    let (with_im, without_im) = std::thread::scope(|scope| {
        let twin = scope.spawn(|| run_single(cfg, false));
        let main = run_single(cfg, true);
        (main, twin.join().expect("simulation thread panicked"))
    });
    Ok(ExperimentOutcome {
        with_im: with_im?,
        without_im: Some(without_im?),
    })
}

/// Whether the trajectory should carry the `u_star` column.
pub fn has_oracle(traj: &HybridTrajectory) -> bool {
    !traj.samples.is_empty() && traj.samples.iter().all(|s| s.u_star.is_some())
}

pub fn csv_header(traj: &HybridTrajectory, include_u_star: bool) -> Vec<String> {
    let mut h: Vec<String> = vec!["t".into(), "j".into()];
    h.extend(traj.state_names.iter().cloned());
    h.extend(["w1".to_string(), "w2".to_string()]);
    h.extend((1..=traj.n_eta).map(|i| format!("eta_{i}")));
    h.extend(["e", "u", "gp_mean", "gp_var"].map(String::from));
    if include_u_star {
        h.push("u_star".into());
    }
    h
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the trajectory as CSV: one row per sample, reals in scientific
/// notation with 17 significant digits.
pub fn write_trajectory_to<W: Write>(traj: &HybridTrajectory, include_u_star: bool, out: W) -> csv::Result<()> {
    let include_u_star = include_u_star && has_oracle(traj);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(traj, include_u_star))?;
    let mut row: Vec<String> = Vec::new();
    for s in &traj.samples {
        row.clear();
        row.push(num(s.t));
        row.push(s.j.to_string());
        row.extend(s.plant.iter().chain(&s.w).chain(&s.eta).map(|v| num(*v)));
        row.extend([s.e, s.u, s.gp_mean, s.gp_var].map(num));
        if include_u_star {
            row.push(num(s.u_star.unwrap_or(f64::NAN)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory(traj: &HybridTrajectory, include_u_star: bool, path: &Path) -> Result<(), ExperimentError> {
    let file = File::create(path).map_err(io_err(path))?;
    write_trajectory_to(traj, include_u_star, BufWriter::new(file)).map_err(|e| ExperimentError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })
}

/// Header and numeric rows of a trajectory CSV.
pub fn read_trajectory_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), ExperimentError> {
    let to_io = |e: csv::Error| ExperimentError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut r = csv::Reader::from_path(path).map_err(to_io)?;
    let header = r.headers().map_err(to_io)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(to_io)?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ExperimentError::Io {
                path: path.to_path_buf(),
                source: io::Error::new(io::ErrorKind::InvalidData, e),
            })?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn write_metrics(metrics: &RunMetrics, path: &Path) -> Result<(), ExperimentError> {
    let mut text = serde_json::to_string_pretty(metrics).expect("metrics serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

/// Writes whatever outputs the configuration names.
pub fn write_outputs(cfg: &ExperimentConfig, outcome: &ExperimentOutcome) -> Result<(), ExperimentError> {
    if let Some(p) = &cfg.outputs.trajectory {
        write_trajectory(&outcome.with_im.trajectory, cfg.oracle_overlay, p)?;
    }
    if let Some(p) = &cfg.outputs.metrics {
        write_metrics(&outcome.with_im.metrics, p)?;
    }
    if let (Some(p), Some(twin)) = (&cfg.outputs.without_im_trajectory, &outcome.without_im) {
        write_trajectory(&twin.trajectory, cfg.oracle_overlay, p)?;
    }
    Ok(())
}

/// The three benchmark runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example {
    Example1,
    Example2,
    Example3,
}

impl Example {
    pub const ALL: [Example; 3] = [Example::Example1, Example::Example2, Example::Example3];

    pub fn parse(s: &str) -> Result<Self, ExperimentError> {
        match s {
            "example1" => Ok(Self::Example1),
            "example2" => Ok(Self::Example2),
            "example3" => Ok(Self::Example3),
            other => Err(ExperimentError::UnknownExample(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Example1 => "example1",
            Self::Example2 => "example2",
            Self::Example3 => "example3",
        }
    }

    pub fn plant(self) -> PlantKind {
        match self {
            Self::Example1 => PlantKind::Lorenz,
            Self::Example2 => PlantKind::Example2,
            Self::Example3 => PlantKind::Bioreactor,
        }
    }

    pub fn config(self) -> ExperimentConfig {
        ExperimentConfig::defaults(self.plant())
    }
}

/// Runs a benchmark with its default configuration and writes
/// `<name>.csv` and `<name>.metrics.json` into `out_dir`.
pub fn reproduce(example: Example, out_dir: &Path) -> Result<(PathBuf, RunMetrics), ExperimentError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut cfg = example.config();
    let csv = out_dir.join(format!("{}.csv", example.name()));
    cfg.outputs.trajectory = Some(csv.clone());
    cfg.outputs.metrics = Some(out_dir.join(format!("{}.metrics.json", example.name())));
    let outcome = run_experiment(&cfg)?;
    write_outputs(&cfg, &outcome)?;
    Ok((csv, outcome.with_im.metrics))
}
