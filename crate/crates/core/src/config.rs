//! Experiment configuration: a flat TOML document with dotted keys.
//!
//! Only `plant` is required; everything else falls back to the defaults of
//! the named plant. Keys may be written dotted (`regulator.k_p = 500`) or as
//! TOML tables; both flatten to the same names. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;
use toml::Value;

use crate::gp::{Kernel, OptimizerSettings};
use crate::plants::{
    BioreactorParams, BioreactorPlant, Example2Plant, LorenzParams, LorenzPlant, PlantError, PlantModel,
};
use crate::regulator::{default_kernel, EvalMode, InitialConditions, RegulatorConfig, SamplingMode};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("malformed configuration: {0}")]
    Parse(String),
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
}

impl ConfigError {
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Parse(_) => None,
            ConfigError::MissingKey(k) | ConfigError::UnknownKey(k) => Some(k),
            ConfigError::InvalidValue { key, .. } => Some(key),
        }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantKind {
    Lorenz,
    Example2,
    Bioreactor,
}

impl PlantKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lorenz" => Some(Self::Lorenz),
            "example2" => Some(Self::Example2),
            "bioreactor" => Some(Self::Bioreactor),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Lorenz => "lorenz",
            Self::Example2 => "example2",
            Self::Bioreactor => "bioreactor",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlantSpec {
    Lorenz(LorenzParams),
    Example2,
    Bioreactor(BioreactorParams),
}

impl PlantSpec {
    pub fn kind(&self) -> PlantKind {
        match self {
            PlantSpec::Lorenz(_) => PlantKind::Lorenz,
            PlantSpec::Example2 => PlantKind::Example2,
            PlantSpec::Bioreactor(_) => PlantKind::Bioreactor,
        }
    }

    pub fn build(&self) -> std::result::Result<Box<dyn PlantModel>, PlantError> {
        Ok(match self {
            PlantSpec::Lorenz(p) => Box::new(LorenzPlant::new(*p)?),
            PlantSpec::Example2 => Box::new(Example2Plant),
            PlantSpec::Bioreactor(p) => Box::new(BioreactorPlant { params: *p }),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outputs {
    pub trajectory: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    /// Trajectory of the feedback-only twin, written when the comparison runs.
    pub without_im_trajectory: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub plant: PlantSpec,
    pub regulator: RegulatorConfig,
    pub initial: InitialConditions,
    pub duration: f64,
    pub seed: u64,
    pub outputs: Outputs,
    /// Also run with the learned term forced to zero.
    pub compare_without_im: bool,
    /// Add the `u_star` column when the plant has a closed-form feedforward.
    pub oracle_overlay: bool,
}

impl ExperimentConfig {
    /// The configuration of the corresponding benchmark with no outputs.
    pub fn defaults(kind: PlantKind) -> Self {
        let kernel = default_kernel();
        match kind {
            PlantKind::Lorenz => Self {
                plant: PlantSpec::Lorenz(LorenzParams::default()),
                regulator: RegulatorConfig {
                    k_p: 500.0,
                    sat_limit: 100.0,
                    n_eta: 10,
                    kernel,
                    ..Default::default()
                },
                initial: InitialConditions {
                    plant: vec![2.0, -1.8, -1.5],
                    w: vec![0.0, 4.0],
                    eta: vec![0.0; 10],
                },
                duration: 40.0,
                seed: 0,
                outputs: Outputs::default(),
                compare_without_im: false,
                oracle_overlay: true,
            },
            PlantKind::Example2 => Self {
                plant: PlantSpec::Example2,
                regulator: RegulatorConfig {
                    k_p: 300.0,
                    sat_limit: 25.0,
                    n_eta: 6,
                    step: 2.5e-5,
                    log_every: 40,
                    kernel,
                    ..Default::default()
                },
                initial: InitialConditions {
                    plant: vec![1.0, 10.0],
                    w: vec![0.0, 4.0],
                    eta: vec![0.0; 6],
                },
                duration: 40.0,
                seed: 0,
                outputs: Outputs::default(),
                compare_without_im: false,
                oracle_overlay: false,
            },
            PlantKind::Bioreactor => Self {
                plant: PlantSpec::Bioreactor(BioreactorParams::default()),
                regulator: RegulatorConfig {
                    k_p: 30.0,
                    rho: vec![1.0],
                    sat_limit: 45.0,
                    n_eta: 6,
                    input_bounds: Some(BioreactorPlant::INPUT_BOUNDS),
                    kernel,
                    ..Default::default()
                },
                initial: InitialConditions {
                    plant: BioreactorParams::NOMINAL_STATE.to_vec(),
                    w: BioreactorPlant::EXO_INITIAL.to_vec(),
                    eta: vec![0.0; 6],
                },
                duration: 100.0,
                seed: 0,
                outputs: Outputs::default(),
                compare_without_im: false,
                oracle_overlay: false,
            },
        }
    }

    pub fn plant_kind(&self) -> PlantKind {
        self.plant.kind()
    }
}

/// Every accepted key.
pub const KNOWN_KEYS: &[&str] = &[
    "plant",
    "duration",
    "seed",
    "regulator.k_p",
    "regulator.rho",
    "regulator.sat_limit",
    "regulator.jump_period",
    "regulator.window",
    "regulator.n_eta",
    "regulator.step",
    "regulator.eval_mode",
    "regulator.sampling",
    "regulator.dense_per_interval",
    "regulator.normalize_inputs",
    "regulator.use_internal_model",
    "regulator.input_bounds",
    "regulator.log_every",
    "gp.signal_variance",
    "gp.lengthscale",
    "gp.noise_variance",
    "gp.optimize",
    "gp.optimize_budget",
    "gp.optimize_noise",
    "gp.restarts",
    "initial.plant",
    "initial.w",
    "initial.eta",
    "lorenz.a11",
    "lorenz.a12",
    "lorenz.a21",
    "lorenz.a22",
    "lorenz.a3",
    "lorenz.sigma",
    "lorenz.b",
    "bioreactor.yield_nominal",
    "bioreactor.alpha",
    "bioreactor.beta",
    "bioreactor.mu_max",
    "bioreactor.p_max",
    "bioreactor.k_m",
    "bioreactor.k_i",
    "bioreactor.dilution",
    "bioreactor.disturbance_amplitude",
    "bioreactor.disturbance_frequency",
    "bioreactor.setpoint",
    "output.trajectory",
    "output.metrics",
    "output.without_im_trajectory",
    "compare.without_im",
    "compare.oracle_overlay",
];

fn flatten(prefix: &str, table: toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other);
            }
        }
    }
}

struct Keys(BTreeMap<String, Value>);

impl Keys {
    fn take(&mut self, key: &str) -> Option<Value> {
        self.0.remove(key)
    }

    fn f64(&mut self, key: &str, target: &mut f64) -> Result<()> {
        if let Some(v) = self.take(key) {
            *target = match v {
                Value::Float(x) => x,
                Value::Integer(i) => i as f64,
                _ => return Err(invalid(key, "expected a number")),
            };
            if !target.is_finite() {
                return Err(invalid(key, "must be finite"));
            }
        }
        Ok(())
    }

    fn positive(&mut self, key: &str, target: &mut f64) -> Result<()> {
        self.f64(key, target)?;
        if !(*target > 0.0) {
            return Err(invalid(key, format!("must be positive, got {target}")));
        }
        Ok(())
    }

    fn count(&mut self, key: &str, target: &mut usize) -> Result<()> {
        if let Some(v) = self.take(key) {
            match v {
                Value::Integer(i) if i > 0 => *target = i as usize,
                Value::Integer(i) => return Err(invalid(key, format!("must be positive, got {i}"))),
                _ => return Err(invalid(key, "expected an integer")),
            }
        }
        Ok(())
    }

    fn bool(&mut self, key: &str, target: &mut bool) -> Result<()> {
        if let Some(v) = self.take(key) {
            *target = v.as_bool().ok_or_else(|| invalid(key, "expected true or false"))?;
        }
        Ok(())
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(invalid(key, "expected a string")),
        }
    }

    fn vector(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.take(key) else {
            return Ok(None);
        };
        let arr = match v {
            Value::Array(a) => a,
            Value::Float(x) => return Ok(Some(vec![x])),
            Value::Integer(i) => return Ok(Some(vec![i as f64])),
            _ => return Err(invalid(key, "expected a number or an array of numbers")),
        };
        arr.into_iter()
            .map(|x| match x {
                Value::Float(f) if f.is_finite() => Ok(f),
                Value::Integer(i) => Ok(i as f64),
                _ => Err(invalid(key, "expected finite numbers")),
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

/// Parses and validates an experiment configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    let mut flat = BTreeMap::new();
    flatten("", table, &mut flat);
    if let Some(unknown) = flat.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        return Err(ConfigError::UnknownKey(unknown.clone()));
    }
    let mut keys = Keys(flat);

    let plant_name = keys.string("plant")?.ok_or_else(|| ConfigError::MissingKey("plant".into()))?;
    let kind = PlantKind::parse(&plant_name)
        .ok_or_else(|| invalid("plant", format!("expected lorenz, example2 or bioreactor, got {plant_name:?}")))?;
    let mut cfg = ExperimentConfig::defaults(kind);

    keys.positive("duration", &mut cfg.duration)?;
    if let Some(v) = keys.take("seed") {
        cfg.seed = match v {
            Value::Integer(i) if i >= 0 => i as u64,
            _ => return Err(invalid("seed", "expected a nonnegative integer")),
        };
    }

    for key in ["lorenz.a11", "lorenz.a12", "lorenz.a21", "lorenz.a22", "lorenz.a3", "lorenz.sigma", "lorenz.b"] {
        if keys.0.contains_key(key) && kind != PlantKind::Lorenz {
            return Err(invalid(key, "only applies to plant = \"lorenz\""));
        }
    }
    if kind != PlantKind::Bioreactor {
        if let Some(k) = keys.0.keys().find(|k| k.starts_with("bioreactor.")) {
            return Err(invalid(k, "only applies to plant = \"bioreactor\""));
        }
    }
    match &mut cfg.plant {
        PlantSpec::Lorenz(p) => {
            keys.f64("lorenz.a11", &mut p.a11)?;
            keys.f64("lorenz.a12", &mut p.a12)?;
            keys.f64("lorenz.a21", &mut p.a21)?;
            keys.f64("lorenz.a22", &mut p.a22)?;
            keys.f64("lorenz.a3", &mut p.a3)?;
            keys.positive("lorenz.sigma", &mut p.sigma)?;
            keys.positive("lorenz.b", &mut p.b)?;
            if !(p.a11 < 0.0) {
                return Err(invalid("lorenz.a11", "must be negative for a stable zero dynamics"));
            }
            if !(p.a3 < 0.0) {
                return Err(invalid("lorenz.a3", "must be negative for a stable zero dynamics"));
            }
        }
        PlantSpec::Example2 => {}
        PlantSpec::Bioreactor(p) => {
            keys.positive("bioreactor.yield_nominal", &mut p.yield_nominal)?;
            keys.positive("bioreactor.alpha", &mut p.alpha)?;
            keys.positive("bioreactor.beta", &mut p.beta)?;
            keys.positive("bioreactor.mu_max", &mut p.mu_max)?;
            keys.positive("bioreactor.p_max", &mut p.p_max)?;
            keys.positive("bioreactor.k_m", &mut p.k_m)?;
            keys.positive("bioreactor.k_i", &mut p.k_i)?;
            keys.positive("bioreactor.dilution", &mut p.dilution)?;
            keys.f64("bioreactor.disturbance_amplitude", &mut p.disturbance_amplitude)?;
            keys.positive("bioreactor.disturbance_frequency", &mut p.disturbance_frequency)?;
            keys.positive("bioreactor.setpoint", &mut p.setpoint)?;
            if !(p.disturbance_amplitude.abs() < p.yield_nominal) {
                return Err(invalid(
                    "bioreactor.disturbance_amplitude",
                    "must be smaller than the nominal yield so the yield stays positive",
                ));
            }
        }
    }

    let r = &mut cfg.regulator;
    keys.positive("regulator.k_p", &mut r.k_p)?;
    if let Some(rho) = keys.vector("regulator.rho")? {
        r.rho = rho;
    }
    keys.positive("regulator.sat_limit", &mut r.sat_limit)?;
    keys.positive("regulator.jump_period", &mut r.jump_period)?;
    keys.count("regulator.window", &mut r.window)?;
    let n_eta_before = r.n_eta;
    keys.count("regulator.n_eta", &mut r.n_eta)?;
    keys.positive("regulator.step", &mut r.step)?;
    if let Some(mode) = keys.string("regulator.eval_mode")? {
        r.eval_mode = match mode.as_str() {
            "continuous-gp" => EvalMode::ContinuousGp,
            "zero-order-hold" => EvalMode::ZeroOrderHold,
            _ => {
                return Err(invalid(
                    "regulator.eval_mode",
                    "expected \"continuous-gp\" or \"zero-order-hold\"",
                ))
            }
        };
    }
    let mut dense = 10usize;
    keys.count("regulator.dense_per_interval", &mut dense)?;
    if let Some(mode) = keys.string("regulator.sampling")? {
        r.sampling = match mode.as_str() {
            "per-jump" => SamplingMode::PerJump,
            "dense" => SamplingMode::Dense { per_interval: dense },
            _ => return Err(invalid("regulator.sampling", "expected \"per-jump\" or \"dense\"")),
        };
    }
    keys.bool("regulator.normalize_inputs", &mut r.normalize_inputs)?;
    keys.bool("regulator.use_internal_model", &mut r.use_internal_model)?;
    if let Some(b) = keys.vector("regulator.input_bounds")? {
        if b.len() != 2 || !(b[0] < b[1]) {
            return Err(invalid("regulator.input_bounds", "expected [lower, upper] with lower < upper"));
        }
        r.input_bounds = Some((b[0], b[1]));
    }
    keys.count("regulator.log_every", &mut r.log_every)?;

    let mut kernel: Kernel = r.kernel.clone();
    keys.positive("gp.signal_variance", &mut kernel.signal_variance)?;
    if let Some(ls) = keys.vector("gp.lengthscale")? {
        kernel.lengthscales = ls;
    }
    keys.f64("gp.noise_variance", &mut kernel.noise_variance)?;
    if let Err(e) = kernel.validate() {
        return Err(invalid("gp", e.to_string()));
    }
    r.kernel = kernel;
    let mut optimize = false;
    keys.bool("gp.optimize", &mut optimize)?;
    let mut settings = OptimizerSettings {
        seed: cfg.seed,
        ..Default::default()
    };
    keys.count("gp.optimize_budget", &mut settings.budget)?;
    keys.bool("gp.optimize_noise", &mut settings.optimize_noise)?;
    if let Some(v) = keys.take("gp.restarts") {
        settings.restarts = match v {
            Value::Integer(i) if i >= 0 => i as usize,
            _ => return Err(invalid("gp.restarts", "expected a nonnegative integer")),
        };
    }
    r.optimize = optimize.then_some(settings);

    if r.n_eta != n_eta_before {
        cfg.initial.eta = vec![0.0; r.n_eta];
    }
    if let Some(v) = keys.vector("initial.plant")? {
        cfg.initial.plant = v;
    }
    if let Some(v) = keys.vector("initial.w")? {
        cfg.initial.w = v;
    }
    if let Some(v) = keys.vector("initial.eta")? {
        cfg.initial.eta = v;
    }

    cfg.outputs.trajectory = keys.string("output.trajectory")?.map(PathBuf::from);
    cfg.outputs.metrics = keys.string("output.metrics")?.map(PathBuf::from);
    cfg.outputs.without_im_trajectory = keys.string("output.without_im_trajectory")?.map(PathBuf::from);
    keys.bool("compare.without_im", &mut cfg.compare_without_im)?;
    keys.bool("compare.oracle_overlay", &mut cfg.oracle_overlay)?;
    debug_assert!(keys.0.is_empty(), "unconsumed keys {:?}", keys.0.keys());

    validate(&cfg)?;
    Ok(cfg)
}

/// Cross-field checks shared by parsed and programmatic configurations.
pub fn validate(cfg: &ExperimentConfig) -> Result<()> {
    if !(cfg.duration > 0.0 && cfg.duration.is_finite()) {
        return Err(invalid("duration", "must be positive"));
    }
    cfg.regulator.validate().map_err(|e| invalid("regulator", e.to_string()))?;
    let plant = cfg.plant.build().map_err(|e| invalid("plant", e.to_string()))?;
    let dims = [
        ("initial.plant", cfg.initial.plant.len(), plant.state_dim()),
        ("initial.w", cfg.initial.w.len(), plant.exo_dim()),
        ("initial.eta", cfg.initial.eta.len(), cfg.regulator.n_eta),
    ];
    for (key, got, want) in dims {
        if got != want {
            return Err(invalid(key, format!("has length {got}, expected {want}")));
        }
    }
    if plant.nonnegative_states() && cfg.initial.plant.iter().any(|v| *v < 0.0) {
        return Err(invalid("initial.plant", "states must be nonnegative"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_lorenz_gets_defaults() {
        let cfg = parse_config("plant = \"lorenz\"").unwrap();
        assert_eq!(cfg.regulator.k_p, 500.0);
        assert_eq!(cfg.regulator.jump_period, 0.1);
        assert_eq!(cfg.regulator.window, 10);
        assert_eq!(cfg.regulator.sat_limit, 100.0);
        assert_eq!(cfg.duration, 40.0);
        assert_eq!(cfg.initial.plant, vec![2.0, -1.8, -1.5]);
    }

    #[test]
    fn negative_gain_rejected() {
        let err = parse_config("plant = \"lorenz\"\nregulator.k_p = -1").unwrap_err();
        assert!(matches!(err, ConfigError::InvalidValue { ref key, .. } if key == "regulator.k_p"));
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse_config("plant = \"lorenz\"\nkp_gain = 3").unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey("kp_gain".into()));
        let err = parse_config("plant = \"lorenz\"\n[regulator]\nkp = 3").unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey("regulator.kp".into()));
    }

    #[test]
    fn missing_plant() {
        assert_eq!(
            parse_config("duration = 3").unwrap_err(),
            ConfigError::MissingKey("plant".into())
        );
    }

    #[test]
    fn tables_and_dotted_keys_agree() {
        let a = parse_config("plant = \"bioreactor\"\nregulator.k_p = 20\ngp.lengthscale = [2.0]").unwrap();
        let b = parse_config("plant = \"bioreactor\"\n[regulator]\nk_p = 20\n[gp]\nlengthscale = 2.0").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.regulator.input_bounds, Some((0.0, 45.0)));
        assert_eq!(a.regulator.rho, vec![1.0]);
    }

    #[test]
    fn n_eta_resizes_default_initial_eta() {
        let cfg = parse_config("plant = \"lorenz\"\nregulator.n_eta = 4").unwrap();
        assert_eq!(cfg.initial.eta.len(), 4);
        let err = parse_config("plant = \"lorenz\"\ninitial.eta = [0.0]").unwrap_err();
        assert_eq!(err.key(), Some("initial.eta"));
    }

    #[test]
    fn step_must_divide_period() {
        let err = parse_config("plant = \"lorenz\"\nregulator.step = 0.03").unwrap_err();
        assert_eq!(err.key(), Some("regulator"));
    }

    #[test]
    fn plant_specific_keys_checked() {
        let err = parse_config("plant = \"example2\"\nlorenz.a11 = -3").unwrap_err();
        assert_eq!(err.key(), Some("lorenz.a11"));
        let err = parse_config("plant = \"lorenz\"\nlorenz.a3 = 1.0").unwrap_err();
        assert_eq!(err.key(), Some("lorenz.a3"));
        let cfg = parse_config("plant = \"bioreactor\"\nbioreactor.mu_max = 0.5").unwrap();
        match cfg.plant {
            PlantSpec::Bioreactor(p) => assert_eq!(p.mu_max, 0.5),
            _ => unreachable!(),
        }
    }

    #[test]
    fn modes_and_optimizer() {
        let cfg = parse_config(
            "plant = \"lorenz\"\nseed = 7\nregulator.eval_mode = \"zero-order-hold\"\n\
             regulator.sampling = \"dense\"\ngp.optimize = true\ngp.restarts = 2",
        )
        .unwrap();
        assert_eq!(cfg.regulator.eval_mode, EvalMode::ZeroOrderHold);
        assert_eq!(cfg.regulator.sampling, SamplingMode::Dense { per_interval: 10 });
        let opt = cfg.regulator.optimize.unwrap();
        assert_eq!((opt.seed, opt.restarts), (7, 2));
    }

    #[test]
    fn malformed_text() {
        assert!(matches!(parse_config("plant = "), Err(ConfigError::Parse(_))));
    }
}
