//! Hybrid closed loop: RK4 flow of plant, exosystem and internal model,
//! GP retraining at clock-driven jumps, and the saturated high-gain law.

use thiserror::Error;

use crate::gp::{self, Dataset, GpError, GpModel, Kernel, OptimizerSettings, Standardizer};
use crate::internal_model::{InternalModel, ModelError};
use crate::numerics::{NumericsError, Rk4};
use crate::plants::PlantModel;
use crate::window::{WindowBuffer, WindowError};

/// How the learned feedforward enters the control law during flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalMode {
    /// `μ(η(t))` re-evaluated at every integrator stage.
    #[default]
    ContinuousGp,
    /// `û` computed at the last jump and frozen during flow.
    ZeroOrderHold,
}

impl EvalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::ContinuousGp => "continuous-gp",
            EvalMode::ZeroOrderHold => "zero-order-hold",
        }
    }
}

/// Which `(η, u)` pairs enter the training window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    /// One pair per jump, taken at the jump instant.
    #[default]
    PerJump,
    /// `per_interval` evenly spaced pairs per flow interval, the last one at
    /// the jump instant.
    Dense { per_interval: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("invalid regulator configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite state at t = {t}, j = {j}")]
    NonFiniteState {
        t: f64,
        j: usize,
        partial: Box<HybridTrajectory>,
    },
    #[error("flow step requested past the end of the flow interval")]
    ClockOverrun,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Window(#[from] WindowError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorConfig {
    pub k_p: f64,
    /// Coefficients of `ρ(e) = c₀ + c₁e² + c₂e⁴ + …`.
    pub rho: Vec<f64>,
    /// Saturation level `M̄` of the learned feedforward.
    pub sat_limit: f64,
    pub jump_period: f64,
    /// Window capacity `P`.
    pub window: usize,
    pub n_eta: usize,
    /// Initial kernel; a single lengthscale is shared by all η dimensions.
    pub kernel: Kernel,
    pub step: f64,
    pub eval_mode: EvalMode,
    pub sampling: SamplingMode,
    /// Standardize GP inputs with the window's per-dimension mean and
    /// standard deviation at every refit.
    pub normalize_inputs: bool,
    /// When false the learned term is forced to zero (feedback only).
    pub use_internal_model: bool,
    /// Hard bounds on the applied input; the plant's own bounds are used
    /// when this is `None`.
    pub input_bounds: Option<(f64, f64)>,
    /// Maximize the marginal likelihood once, at the first jump with at
    /// least two buffered pairs.
    pub optimize: Option<OptimizerSettings>,
    /// Log every `log_every`-th grid point (jumps and the final point are
    /// always logged when they fall on a logged grid point).
    pub log_every: usize,
}

/// Kernel used by the closed-loop examples: unit signal variance,
/// lengthscale 5 on standardized η and a small nugget.
pub fn default_kernel() -> Kernel {
    Kernel {
        signal_variance: 1.0,
        lengthscales: vec![5.0],
        noise_variance: 1e-6,
    }
}

impl Default for RegulatorConfig {
    fn default() -> Self {
        Self {
            k_p: 500.0,
            rho: vec![1.0, 1.0],
            sat_limit: 100.0,
            jump_period: 0.1,
            window: 10,
            n_eta: 10,
            kernel: default_kernel(),
            step: 1e-3,
            eval_mode: EvalMode::ContinuousGp,
            sampling: SamplingMode::PerJump,
            normalize_inputs: true,
            use_internal_model: true,
            input_bounds: None,
            optimize: None,
            log_every: 1,
        }
    }
}

impl RegulatorConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |m: String| Err(SimulationError::InvalidConfig(m));
        if !(self.k_p > 0.0 && self.k_p.is_finite()) {
            return bad(format!("k_p must be positive, got {}", self.k_p));
        }
        if !(self.sat_limit > 0.0) {
            return bad(format!("sat_limit must be positive, got {}", self.sat_limit));
        }
        if !(self.jump_period > 0.0 && self.jump_period.is_finite()) {
            return bad(format!("jump_period must be positive, got {}", self.jump_period));
        }
        if !(self.step > 0.0 && self.step <= self.jump_period) {
            return bad(format!("step must be in (0, T], got {}", self.step));
        }
        let steps = (self.jump_period / self.step).round();
        if (steps * self.step - self.jump_period).abs() > 1e-9 * self.jump_period {
            return bad(format!(
                "step {} does not divide jump_period {}",
                self.step, self.jump_period
            ));
        }
        if self.rho.is_empty() || !(self.rho[0] > 0.0) || self.rho.iter().any(|c| !(*c >= 0.0)) {
            return bad("rho needs a positive constant term and nonnegative coefficients".into());
        }
        if self.window == 0 {
            return bad("window must be at least 1".into());
        }
        if self.n_eta == 0 {
            return bad("n_eta must be at least 1".into());
        }
        if self.log_every == 0 {
            return bad("log_every must be at least 1".into());
        }
        if let Some((lo, hi)) = self.input_bounds {
            if !(lo < hi) {
                return bad(format!("input bounds [{lo}, {hi}] are empty"));
            }
        }
        if let SamplingMode::Dense { per_interval } = self.sampling {
            if per_interval == 0 || self.steps_per_interval() % per_interval != 0 {
                return bad(format!(
                    "dense sampling count {per_interval} must divide the {} steps per interval",
                    self.steps_per_interval()
                ));
            }
        }
        self.kernel
            .validate()
            .map_err(|e| SimulationError::InvalidConfig(format!("kernel: {e}")))?;
        if !(self.kernel.lengthscales.len() == 1 || self.kernel.lengthscales.len() == self.n_eta) {
            return bad(format!(
                "kernel has {} lengthscales for n_eta = {}",
                self.kernel.lengthscales.len(),
                self.n_eta
            ));
        }
        Ok(())
    }

    /// Integrator steps per flow interval, `T/h`.
    pub fn steps_per_interval(&self) -> usize {
        (self.jump_period / self.step).round() as usize
    }

    /// `ρ(e)`.
    pub fn rho_at(&self, e: f64) -> f64 {
        let e2 = e * e;
        self.rho.iter().rev().fold(0.0, |acc, c| acc * e2 + c)
    }
}

/// GP conditioned on (possibly standardized) window data.
#[derive(Debug, Clone)]
pub struct LearnedMap {
    pub standardizer: Standardizer,
    pub model: GpModel,
}

impl LearnedMap {
    pub fn fit(data: &Dataset, kernel: &Kernel, normalize: bool) -> Result<Self, GpError> {
        let dim = data.dim().ok_or(GpError::EmptyDataset)?;
        let standardizer = if normalize {
            Standardizer::fit(data.inputs())?
        } else {
            Standardizer::identity(dim)
        };
        let model = gp::fit(&standardizer.apply_dataset(data), kernel)?;
        Ok(Self { standardizer, model })
    }

    pub fn mean(&self, eta: &[f64]) -> f64 {
        self.model.mean_unchecked(&self.standardizer.apply(eta))
    }

    fn mean_with(&self, eta: &[f64], scratch: &mut Vec<f64>) -> f64 {
        self.standardizer.apply_into(eta, scratch);
        self.model.mean_unchecked(scratch)
    }

    /// Posterior mean and variance at `eta`.
    pub fn predict(&self, eta: &[f64]) -> gp::Prediction {
        self.model
            .predict(&self.standardizer.apply(eta))
            .expect("η dimension fixed by the window")
    }
}

/// Output of [`control_law`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub u: f64,
    pub mu: f64,
    pub variance: f64,
}

/// `M̄·sat(μ/M̄)`, written so that `|μ| ≤ M̄` returns `μ` bit for bit.
#[inline]
pub fn saturate(mu: f64, limit: f64) -> f64 {
    if mu.abs() <= limit {
        mu
    } else {
        limit.copysign(mu)
    }
}

#[inline]
fn apply_law(e: f64, mu: Option<f64>, cfg: &RegulatorConfig) -> f64 {
    let fb = -cfg.k_p * cfg.rho_at(e) * e;
    let u = match mu {
        Some(m) => fb + saturate(m, cfg.sat_limit),
        None => fb,
    };
    match cfg.input_bounds {
        Some((lo, hi)) => u.clamp(lo, hi),
        None => u,
    }
}

/// `u = −k_p·ρ(e)·e + M̄·sat(μ(η)/M̄)`, clamped to the input bounds. Without a
/// model (or with the internal model disabled) the learned term is absent and
/// `(μ, σ²)` are reported as `(0, σ_f²)`.
pub fn control_law(e: f64, eta: &[f64], gp: Option<&LearnedMap>, cfg: &RegulatorConfig) -> ControlOutput {
    match gp.filter(|_| cfg.use_internal_model) {
        Some(g) => {
            let p = g.predict(eta);
            ControlOutput {
                u: apply_law(e, Some(p.mean), cfg),
                mu: p.mean,
                variance: p.variance,
            }
        }
        None => ControlOutput {
            u: apply_law(e, None, cfg),
            mu: 0.0,
            variance: cfg.kernel.signal_variance,
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConditions {
    pub plant: Vec<f64>,
    pub w: Vec<f64>,
    pub eta: Vec<f64>,
}

/// Complete state of the hybrid closed loop.
#[derive(Debug, Clone)]
pub struct HybridState {
    /// Hybrid clock `τ ∈ [0, T]`.
    pub tau: f64,
    /// Jump counter `j`.
    pub j: usize,
    pub plant: Vec<f64>,
    pub w: Vec<f64>,
    pub eta: Vec<f64>,
    /// Learned feedforward frozen at the last jump.
    pub u_hat: f64,
    pub gp: Option<LearnedMap>,
    pub buffer: WindowBuffer,
    /// Kernel used at the next refit.
    pub kernel: Kernel,
    internal_model: InternalModel,
    step_in_interval: usize,
    global_step: usize,
    optimized: bool,
    pending: Vec<(Vec<f64>, f64)>,
    packed: Vec<f64>,
    rk: Rk4,
    scratch: Vec<f64>,
}

impl HybridState {
    pub fn new(plant: &dyn PlantModel, cfg: &RegulatorConfig, init: &InitialConditions) -> Result<Self, SimulationError> {
        cfg.validate()?;
        let check = |what: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(SimulationError::InvalidConfig(format!(
                    "initial {what} has length {got}, expected {want}"
                )))
            }
        };
        check("plant state", init.plant.len(), plant.state_dim())?;
        check("w", init.w.len(), plant.exo_dim())?;
        check("eta", init.eta.len(), cfg.n_eta)?;
        let dim = init.plant.len() + init.w.len() + init.eta.len();
        Ok(Self {
            tau: 0.0,
            j: 0,
            plant: init.plant.clone(),
            w: init.w.clone(),
            eta: init.eta.clone(),
            u_hat: 0.0,
            gp: None,
            buffer: WindowBuffer::new(cfg.window, cfg.n_eta)?,
            kernel: cfg.kernel.clone(),
            internal_model: InternalModel::build_chain(cfg.n_eta)?,
            step_in_interval: 0,
            global_step: 0,
            optimized: false,
            pending: Vec::new(),
            packed: Vec::with_capacity(dim),
            rk: Rk4::new(dim),
            scratch: Vec::with_capacity(cfg.n_eta),
        })
    }

    /// Ordinary time `t`, a fixed multiple of the integrator step.
    pub fn time(&self, cfg: &RegulatorConfig) -> f64 {
        self.global_step as f64 * cfg.step
    }

    pub fn internal_model(&self) -> &InternalModel {
        &self.internal_model
    }

    pub fn at_jump(&self, cfg: &RegulatorConfig) -> bool {
        self.step_in_interval == cfg.steps_per_interval()
    }

    /// Regulated error at the current state.
    pub fn error(&self, plant: &dyn PlantModel) -> f64 {
        plant.error(&self.plant, &self.w)
    }

    /// Control, learned mean and variance at the current state, as the flow
    /// would apply them.
    pub fn control(&self, plant: &dyn PlantModel, cfg: &RegulatorConfig) -> ControlOutput {
        let e = self.error(plant);
        match (self.gp.as_ref(), cfg.eval_mode) {
            (Some(g), EvalMode::ZeroOrderHold) if cfg.use_internal_model => {
                let var = g.predict(&self.eta).variance;
                ControlOutput {
                    u: apply_law(e, Some(self.u_hat), cfg),
                    mu: self.u_hat,
                    variance: var,
                }
            }
            (g, _) => control_law(e, &self.eta, g, cfg),
        }
    }

    fn is_finite(&self) -> bool {
        self.plant
            .iter()
            .chain(&self.w)
            .chain(&self.eta)
            .all(|v| v.is_finite())
    }
}

/// One RK4 step of the flow map.
pub fn flow_step(s: &mut HybridState, plant: &dyn PlantModel, cfg: &RegulatorConfig) -> Result<(), SimulationError> {
    let steps = cfg.steps_per_interval();
    if s.step_in_interval >= steps {
        return Err(SimulationError::ClockOverrun);
    }
    let nx = s.plant.len();
    let nw = s.w.len();
    let t = s.time(cfg);

    s.packed.clear();
    s.packed.extend_from_slice(&s.plant);
    s.packed.extend_from_slice(&s.w);
    s.packed.extend_from_slice(&s.eta);

    let model = &s.internal_model;
    let learned = s.gp.as_ref().filter(|_| cfg.use_internal_model);
    let u_hat = s.u_hat;
    let scratch = &mut s.scratch;
    let field = |t: f64, x: &[f64], dx: &mut [f64]| {
        let (xp, rest) = x.split_at(nx);
        let (w, eta) = rest.split_at(nw);
        let e = plant.error(xp, w);
        let mu = learned.map(|g| match cfg.eval_mode {
            EvalMode::ContinuousGp => g.mean_with(eta, scratch),
            EvalMode::ZeroOrderHold => u_hat,
        });
        let u = apply_law(e, mu, cfg);
        let (dxp, drest) = dx.split_at_mut(nx);
        let (dw, deta) = drest.split_at_mut(nw);
        plant.rhs(t, xp, w, u, dxp);
        plant.exo_rhs(w, dw);
        model.derivative_into(eta, u, deta);
    };
    let res = s.rk.step(field, t, &mut s.packed, cfg.step);

    s.plant.copy_from_slice(&s.packed[..nx]);
    s.w.copy_from_slice(&s.packed[nx..nx + nw]);
    s.eta.copy_from_slice(&s.packed[nx + nw..]);
    s.step_in_interval += 1;
    s.global_step += 1;
    s.tau = if s.step_in_interval == steps {
        cfg.jump_period
    } else {
        s.step_in_interval as f64 * cfg.step
    };
    match res {
        Err(NumericsError::NonFiniteDerivative { .. }) => return Err(non_finite(s, cfg)),
        Err(e) => return Err(SimulationError::InvalidConfig(e.to_string())),
        Ok(()) if !s.is_finite() => return Err(non_finite(s, cfg)),
        Ok(()) => {}
    }
    if let SamplingMode::Dense { per_interval } = cfg.sampling {
        let stride = steps / per_interval;
        if s.step_in_interval % stride == 0 && s.step_in_interval < steps {
            let u = s.control(plant, cfg).u;
            s.pending.push((s.eta.clone(), u));
        }
    }
    Ok(())
}

fn non_finite(s: &HybridState, cfg: &RegulatorConfig) -> SimulationError {
    SimulationError::NonFiniteState {
        t: s.time(cfg),
        j: s.j,
        partial: Box::default(),
    }
}

/// What happened at a jump.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JumpReport {
    /// The pair recorded at the jump instant (dense mode also records the
    /// pairs gathered during the preceding flow interval).
    pub recorded: Option<(Vec<f64>, f64)>,
    pub refit: bool,
    pub degenerate_gram: bool,
    /// Fit failure message; the previous model is kept.
    pub fit_error: Option<String>,
    pub optimized_kernel: Option<Kernel>,
}

/// Jump map: record data, refit, refresh `û`, reset the clock. Plant state,
/// `w` and `η` are untouched.
pub fn jump(s: &mut HybridState, plant: &dyn PlantModel, cfg: &RegulatorConfig) -> Result<JumpReport, SimulationError> {
    let mut report = JumpReport::default();
    let u = s.control(plant, cfg).u;
    for (eta, u) in s.pending.drain(..) {
        s.buffer.push(&eta, u)?;
    }
    s.buffer.push(&s.eta, u)?;
    report.recorded = Some((s.eta.clone(), u));

    if cfg.use_internal_model && !s.buffer.is_empty() {
        let data = s.buffer.as_dataset();
        if let (Some(settings), false) = (cfg.optimize, s.optimized) {
            if data.len() >= 2 {
                let fitted = if cfg.normalize_inputs {
                    Standardizer::fit(data.inputs()).map(|st| st.apply_dataset(&data))
                } else {
                    Ok(data.clone())
                };
                if let Ok(train) = fitted {
                    if let Ok(opt) = gp::optimize_hyperparameters_with(&train, &s.kernel, &settings) {
                        s.kernel = opt.kernel.clone();
                        report.optimized_kernel = Some(opt.kernel);
                    }
                }
                s.optimized = true;
            }
        }
        match LearnedMap::fit(&data, &s.kernel, cfg.normalize_inputs) {
            Ok(map) => {
                report.refit = true;
                report.degenerate_gram = map.model.diagnostics().degenerate_gram;
                s.u_hat = map.mean(&s.eta);
                s.gp = Some(map);
            }
            Err(e) => report.fit_error = Some(e.to_string()),
        }
    }
    s.tau = 0.0;
    s.step_in_interval = 0;
    s.j += 1;
    Ok(report)
}

/// One logged point of the hybrid arc.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridSample {
    pub t: f64,
    pub j: usize,
    pub plant: Vec<f64>,
    pub w: Vec<f64>,
    pub eta: Vec<f64>,
    pub e: f64,
    pub u: f64,
    pub gp_mean: f64,
    pub gp_var: f64,
    /// Oracle feedforward `u*(w)`, when the plant has one.
    pub u_star: Option<f64>,
}

/// Diagnostic emitted during a run (fit failures, degenerate Gram matrices,
/// negative physical states).
#[derive(Debug, Clone, PartialEq)]
pub struct RunDiagnostic {
    pub t: f64,
    pub j: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HybridTrajectory {
    pub samples: Vec<HybridSample>,
    pub jump_times: Vec<f64>,
    pub diagnostics: Vec<RunDiagnostic>,
    /// Column names of the plant state.
    pub state_names: Vec<String>,
    pub n_eta: usize,
}

impl HybridTrajectory {
    pub fn jump_count(&self) -> usize {
        self.jump_times.len()
    }
}

fn sample(s: &HybridState, plant: &dyn PlantModel, cfg: &RegulatorConfig) -> HybridSample {
    let c = s.control(plant, cfg);
    HybridSample {
        t: s.time(cfg),
        j: s.j,
        plant: s.plant.clone(),
        w: s.w.clone(),
        eta: s.eta.clone(),
        e: s.error(plant),
        u: c.u,
        gp_mean: c.mu,
        gp_var: c.variance,
        u_star: plant.ideal_feedforward(&s.w),
    }
}

/// Runs the closed loop over `[0, duration]` (rounded to the integrator
/// grid). Jumps happen whenever the clock reaches `T`, so a run has
/// `⌊duration/T⌋` jumps; a jump that coincides with the final time is
/// executed.
pub fn simulate(
    plant: &dyn PlantModel,
    cfg: &RegulatorConfig,
    init: &InitialConditions,
    duration: f64,
) -> Result<HybridTrajectory, SimulationError> {
    if !(duration > 0.0) {
        return Err(SimulationError::InvalidConfig(format!(
            "duration must be positive, got {duration}"
        )));
    }
    let mut cfg = cfg.clone();
    if cfg.input_bounds.is_none() {
        cfg.input_bounds = plant.input_bounds();
    }
    let cfg = &cfg;
    let mut s = HybridState::new(plant, cfg, init)?;
    let total = (duration / cfg.step).round() as usize;
    let mut traj = HybridTrajectory {
        state_names: plant.state_names().iter().map(|s| s.to_string()).collect(),
        n_eta: cfg.n_eta,
        ..Default::default()
    };
    let logged = |k: usize| k % cfg.log_every == 0 || k == total;
    let mut negative_reported = false;

    traj.samples.push(sample(&s, plant, cfg));
    for k in 1..=total {
        if let Err(err) = flow_step(&mut s, plant, cfg) {
            return Err(match err {
                SimulationError::NonFiniteState { t, j, .. } => SimulationError::NonFiniteState {
                    t,
                    j,
                    partial: Box::new(traj),
                },
                other => other,
            });
        }
        if plant.nonnegative_states() && !negative_reported && s.plant.iter().any(|v| *v < -1e-9) {
            negative_reported = true;
            traj.diagnostics.push(RunDiagnostic {
                t: s.time(cfg),
                j: s.j,
                message: "physical state became negative".into(),
            });
        }
        if logged(k) {
            traj.samples.push(sample(&s, plant, cfg));
        }
        if s.at_jump(cfg) {
            let t = s.time(cfg);
            let report = jump(&mut s, plant, cfg)?;
            traj.jump_times.push(t);
            if let Some(msg) = report.fit_error {
                traj.diagnostics.push(RunDiagnostic {
                    t,
                    j: s.j,
                    message: format!("GP fit failed, previous model kept: {msg}"),
                });
            } else if report.degenerate_gram {
                traj.diagnostics.push(RunDiagnostic {
                    t,
                    j: s.j,
                    message: "degenerate Gram matrix".into(),
                });
            }
            if let Some(k) = report.optimized_kernel {
                traj.diagnostics.push(RunDiagnostic {
                    t,
                    j: s.j,
                    message: format!(
                        "hyperparameters optimized: signal variance {:e}, lengthscales {:?}, noise {:e}",
                        k.signal_variance, k.lengthscales, k.noise_variance
                    ),
                });
            }
            if logged(k) {
                traj.samples.push(sample(&s, plant, cfg));
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plants::{Example2Plant, LorenzParams, LorenzPlant};

    fn lorenz() -> LorenzPlant {
        LorenzPlant::new(LorenzParams::default()).unwrap()
    }

    fn lorenz_init() -> InitialConditions {
        InitialConditions {
            plant: vec![2.0, -1.8, -1.5],
            w: vec![0.0, 4.0],
            eta: vec![0.0; 10],
        }
    }

    #[test]
    fn control_law_examples() {
        let cfg = RegulatorConfig::default();
        let eta = vec![0.0; 10];
        assert_eq!(control_law(0.0, &eta, None, &cfg).u, 0.0);
        let out = control_law(0.1, &eta, None, &cfg);
        assert!((out.u + 50.5).abs() < 1e-12);
        assert_eq!((out.mu, out.variance), (0.0, 1.0));
        assert_eq!(apply_law(0.0, Some(200.0), &cfg), 100.0);
        assert_eq!(apply_law(0.0, Some(-200.0), &cfg), -100.0);
    }

    #[test]
    fn saturation_is_bitwise_transparent_inside_limit() {
        for mu in [0.0, 1e-300, 3.3, -99.99999, 100.0, -100.0] {
            assert_eq!(saturate(mu, 100.0).to_bits(), mu.to_bits());
        }
    }

    #[test]
    fn rho_polynomial() {
        let cfg = RegulatorConfig {
            rho: vec![1.0, 0.0, 2.0],
            ..Default::default()
        };
        assert_eq!(cfg.rho_at(2.0), 1.0 + 2.0 * 16.0);
    }

    #[test]
    fn config_validation() {
        let bad = RegulatorConfig {
            step: 0.03,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(SimulationError::InvalidConfig(_))));
        let bad = RegulatorConfig {
            sat_limit: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RegulatorConfig {
            rho: vec![0.0, 1.0],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(RegulatorConfig::default().validate().is_ok());
    }

    #[test]
    fn origin_is_equilibrium() {
        let plant = lorenz();
        let cfg = RegulatorConfig::default();
        let init = InitialConditions {
            plant: vec![0.0; 3],
            w: vec![0.0; 2],
            eta: vec![0.0; 10],
        };
        let mut s = HybridState::new(&plant, &cfg, &init).unwrap();
        flow_step(&mut s, &plant, &cfg).unwrap();
        assert!(s.plant.iter().chain(&s.w).chain(&s.eta).all(|v| *v == 0.0));
        assert_eq!(s.tau, cfg.step);
    }

    #[test]
    fn clock_reaches_period_exactly() {
        let plant = lorenz();
        let cfg = RegulatorConfig::default();
        let mut s = HybridState::new(&plant, &cfg, &lorenz_init()).unwrap();
        for _ in 0..cfg.steps_per_interval() {
            flow_step(&mut s, &plant, &cfg).unwrap();
        }
        assert_eq!(s.tau, cfg.jump_period);
        assert!(matches!(flow_step(&mut s, &plant, &cfg), Err(SimulationError::ClockOverrun)));
    }

    #[test]
    fn first_jump_interpolates_single_point() {
        let plant = lorenz();
        let cfg = RegulatorConfig::default();
        let mut s = HybridState::new(&plant, &cfg, &lorenz_init()).unwrap();
        for _ in 0..cfg.steps_per_interval() {
            flow_step(&mut s, &plant, &cfg).unwrap();
        }
        let before = (s.plant.clone(), s.w.clone(), s.eta.clone());
        let report = jump(&mut s, &plant, &cfg).unwrap();
        let (_, u) = report.recorded.unwrap();
        assert!((s.u_hat - u).abs() <= 2e-6 * u.abs().max(1.0));
        assert_eq!(s.tau, 0.0);
        assert_eq!(s.j, 1);
        assert_eq!((s.plant.clone(), s.w.clone(), s.eta.clone()), before);
    }

    #[test]
    fn short_run_has_no_jumps() {
        let traj = simulate(&lorenz(), &RegulatorConfig::default(), &lorenz_init(), 0.05).unwrap();
        assert_eq!(traj.jump_count(), 0);
        assert_eq!(traj.samples.len(), 51);
        assert!(traj.samples.iter().all(|s| s.gp_mean == 0.0));
    }

    #[test]
    fn jump_count_and_logging() {
        let cfg = RegulatorConfig {
            log_every: 10,
            ..Default::default()
        };
        let traj = simulate(&lorenz(), &cfg, &lorenz_init(), 1.0).unwrap();
        assert_eq!(traj.jump_count(), 10);
        // 101 grid points plus one post-jump copy per jump.
        assert_eq!(traj.samples.len(), 111);
    }

    #[test]
    fn zero_order_hold_runs() {
        let cfg = RegulatorConfig {
            eval_mode: EvalMode::ZeroOrderHold,
            ..Default::default()
        };
        let traj = simulate(&lorenz(), &cfg, &lorenz_init(), 1.0).unwrap();
        assert_eq!(traj.jump_count(), 10);
        let last = traj.samples.last().unwrap();
        assert!(last.e.is_finite());
    }

    #[test]
    fn dense_sampling_fills_window_each_interval() {
        let cfg = RegulatorConfig {
            sampling: SamplingMode::Dense { per_interval: 10 },
            ..Default::default()
        };
        let plant = lorenz();
        let mut s = HybridState::new(&plant, &cfg, &lorenz_init()).unwrap();
        let traj = simulate(&plant, &cfg, &lorenz_init(), 0.2).unwrap();
        assert_eq!(traj.jump_count(), 2);
        for _ in 0..cfg.steps_per_interval() {
            flow_step(&mut s, &plant, &cfg).unwrap();
        }
        jump(&mut s, &plant, &cfg).unwrap();
        assert_eq!(s.buffer.total_pushed(), 10);
        assert!(s.buffer.is_full());
    }

    #[test]
    fn divergent_run_keeps_partial_trajectory() {
        let cfg = RegulatorConfig {
            k_p: 300.0,
            n_eta: 6,
            sat_limit: 25.0,
            step: 1e-2,
            ..Default::default()
        };
        let init = InitialConditions {
            plant: vec![1.0, 10.0],
            w: vec![0.0, 4.0],
            eta: vec![0.0; 6],
        };
        match simulate(&Example2Plant, &cfg, &init, 1.0) {
            Err(SimulationError::NonFiniteState { partial, .. }) => {
                assert!(!partial.samples.is_empty());
                assert!(partial.samples.iter().all(|s| s.t.is_finite()));
            }
            other => panic!("expected divergence, got {:?}", other.map(|t| t.samples.len())),
        }
    }
}
