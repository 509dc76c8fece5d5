//! Exact Gaussian process regression with a squared-exponential kernel.
//!
//! The prior mean is zero and targets are used as given. A fitted
//! [`GpModel`] is immutable; refitting produces a new model.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::numerics::{self, cholesky_factor, dot, Cholesky, Matrix, NumericsError};

/// Jitter always added on top of the noise variance when factorizing.
pub const MIN_JITTER: f64 = 1e-10;

/// Ratio `(min diag L / max diag L)²` below which a Gram matrix is flagged degenerate.
const DEGENERATE_RATIO: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),
    #[error("covering radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, GpError>;

/// Squared-exponential covariance `σ_f²·exp(−Σ (xᵢ−x'ᵢ)²/(2ℓᵢ²))`.
///
/// A single lengthscale is broadcast over every input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    pub noise_variance: f64,
}

impl Default for Kernel {
    fn default() -> Self {
        Self {
            signal_variance: 1.0,
            lengthscales: vec![1.0],
            noise_variance: 1e-6,
        }
    }
}

impl Kernel {
    pub fn new(signal_variance: f64, lengthscales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        let k = Self {
            signal_variance,
            lengthscales,
            noise_variance,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn isotropic(signal_variance: f64, lengthscale: f64, noise_variance: f64) -> Result<Self> {
        Self::new(signal_variance, vec![lengthscale], noise_variance)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.signal_variance >= 0.0) || !self.signal_variance.is_finite() {
            return Err(GpError::InvalidKernel(format!(
                "signal variance {} must be finite and nonnegative",
                self.signal_variance
            )));
        }
        if !(self.noise_variance >= 0.0) || !self.noise_variance.is_finite() {
            return Err(GpError::InvalidKernel(format!(
                "noise variance {} must be finite and nonnegative",
                self.noise_variance
            )));
        }
        if self.lengthscales.is_empty() {
            return Err(GpError::InvalidKernel("no lengthscales".into()));
        }
        if let Some(l) = self.lengthscales.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(GpError::InvalidKernel(format!("lengthscale {l} must be positive")));
        }
        Ok(())
    }

    pub fn is_isotropic(&self) -> bool {
        self.lengthscales.len() == 1
    }

    /// Checks that the lengthscales are usable for inputs of dimension `dim`.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.is_isotropic() || self.lengthscales.len() == dim {
            Ok(())
        } else {
            Err(GpError::DimensionMismatch(format!(
                "{} lengthscales for inputs of dimension {dim}",
                self.lengthscales.len()
            )))
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(GpError::DimensionMismatch(format!(
                "kernel inputs of length {} and {}",
                x.len(),
                y.len()
            )));
        }
        self.check_dim(x.len())?;
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let r2 = if let [l] = self.lengthscales[..] {
            x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (l * l)
        } else {
            x.iter()
                .zip(y)
                .zip(&self.lengthscales)
                .map(|((a, b), l)| {
                    let d = (a - b) / l;
                    d * d
                })
                .sum::<f64>()
        };
        self.signal_variance * (-0.5 * r2).exp()
    }

    /// Lipschitz constant of `x ↦ k(x, x')`: `σ_f²·e^{−1/2}/min ℓ`.
    pub fn lipschitz_constant(&self) -> f64 {
        let lmin = self.lengthscales.iter().copied().fold(f64::INFINITY, f64::min);
        self.signal_variance * (-0.5f64).exp() / lmin
    }
}

/// Training inputs and scalar targets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(GpError::DimensionMismatch(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if let Some(first) = inputs.first() {
            let d = first.len();
            if inputs.iter().any(|x| x.len() != d) {
                return Err(GpError::DimensionMismatch("inputs of mixed dimension".into()));
            }
        }
        Ok(Self { inputs, targets })
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if let Some(d) = self.dim() {
            if x.len() != d {
                return Err(GpError::DimensionMismatch(format!(
                    "input of length {} in dataset of dimension {d}",
                    x.len()
                )));
            }
        }
        self.inputs.push(x);
        self.targets.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.inputs.first().map(Vec::len)
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// The first `n` pairs.
    pub fn prefix(&self, n: usize) -> Dataset {
        Dataset {
            inputs: self.inputs[..n].to_vec(),
            targets: self.targets[..n].to_vec(),
        }
    }

    /// Same inputs with every target replaced through `f`.
    pub fn map_targets(&self, f: impl Fn(f64) -> f64) -> Dataset {
        Dataset {
            inputs: self.inputs.clone(),
            targets: self.targets.iter().map(|&y| f(y)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitDiagnostics {
    /// Jitter that made the factorization succeed (on top of the noise variance).
    pub jitter: f64,
    pub escalations: usize,
    /// The regularized Gram matrix is numerically rank deficient.
    pub degenerate_gram: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

/// A Gaussian process conditioned on a dataset.
#[derive(Debug, Clone)]
pub struct GpModel {
    kernel: Kernel,
    data: Dataset,
    chol: Cholesky,
    alpha: Vec<f64>,
    diagnostics: FitDiagnostics,
}

/// Gram matrix `K(X, X)` without any diagonal regularization.
pub fn gram_matrix(kernel: &Kernel, inputs: &[Vec<f64>]) -> Matrix {
    let n = inputs.len();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = kernel.signal_variance;
        for j in 0..i {
            let v = kernel.eval_unchecked(&inputs[i], &inputs[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

pub fn fit(data: &Dataset, kernel: &Kernel) -> Result<GpModel> {
    kernel.validate()?;
    let dim = data.dim().ok_or(GpError::EmptyDataset)?;
    kernel.check_dim(dim)?;
    let mut k = gram_matrix(kernel, data.inputs());
    for i in 0..data.len() {
        k[(i, i)] += kernel.noise_variance;
    }
    let chol = cholesky_factor(&k, MIN_JITTER)?;
    let alpha = chol.solve(data.targets())?;
    let diag: Vec<f64> = (0..chol.dim()).map(|i| chol.factor[(i, i)]).collect();
    let dmin = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let dmax = diag.iter().copied().fold(0.0, f64::max);
    let diagnostics = FitDiagnostics {
        jitter: chol.jitter,
        escalations: chol.escalations,
        degenerate_gram: chol.escalations > 0 || (dmin / dmax).powi(2) < DEGENERATE_RATIO,
    };
    Ok(GpModel {
        kernel: kernel.clone(),
        data: data.clone(),
        chol,
        alpha,
        diagnostics,
    })
}

impl GpModel {
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.data.dim().unwrap_or(0)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    pub fn diagnostics(&self) -> FitDiagnostics {
        self.diagnostics
    }

    /// Total value added to the Gram diagonal: noise variance plus jitter.
    pub fn diagonal_regularization(&self) -> f64 {
        self.kernel.noise_variance + self.diagnostics.jitter
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(GpError::DimensionMismatch(format!(
                "query of length {} for model of dimension {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `k_*(x)`: covariances between `x` and every training input.
    pub fn cross_covariance(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.cross_covariance_unchecked(x))
    }

    fn cross_covariance_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .inputs()
            .iter()
            .map(|xi| self.kernel.eval_unchecked(x, xi))
            .collect()
    }

    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.mean_unchecked(x))
    }

    #[inline]
    pub(crate) fn mean_unchecked(&self, x: &[f64]) -> f64 {
        self.data
            .inputs()
            .iter()
            .zip(&self.alpha)
            .map(|(xi, a)| a * self.kernel.eval_unchecked(x, xi))
            .sum()
    }

    pub fn predict_variance(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict(x)?.variance)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        self.check_input(x)?;
        let ks = self.cross_covariance_unchecked(x);
        let mean = dot(&ks, &self.alpha);
        let v = self.chol.forward(&ks)?;
        let variance = (self.kernel.signal_variance - dot(&v, &v)).max(0.0);
        Ok(Prediction { mean, variance })
    }

    /// `−½ yᵀα − Σ log Lᵢᵢ − (n/2) log 2π`.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len() as f64;
        -0.5 * dot(self.data.targets(), &self.alpha) - 0.5 * self.chol.log_det()
            - 0.5 * n * (2.0 * PI).ln()
    }

    /// Amount by which conditioning on one more input `new_input` lowers the
    /// posterior variance at `x`, from the partitioned inverse of the enlarged
    /// Gram matrix:
    ///
    /// `Γ(x) = (k_n(x)ᵀ Q⁻¹ k_n(x') − k(x, x'))² / (σ_n²(x') + s²)`
    ///
    /// where `Q` is the regularized Gram matrix, `σ_n²(x')` the current
    /// posterior variance at the new input and `s²` the diagonal
    /// regularization. The target of the new point does not enter.
    pub fn variance_reduction(&self, new_input: &[f64], x: &[f64]) -> Result<f64> {
        self.check_input(new_input)?;
        self.check_input(x)?;
        let k_new = self.cross_covariance_unchecked(new_input);
        let k_x = self.cross_covariance_unchecked(x);
        let q_inv_k_new = self.chol.solve(&k_new)?;
        let var_new = self.predict(new_input)?.variance;
        let num = dot(&k_x, &q_inv_k_new) - self.kernel.eval_unchecked(x, new_input);
        Ok(num * num / (var_new + self.diagonal_regularization()))
    }
}

/// Outcome of a hyperparameter search.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimized {
    pub kernel: Kernel,
    pub log_marginal_likelihood: f64,
    pub evaluations: usize,
    /// The evaluation budget ran out before the simplex converged; `kernel`
    /// is the best point seen.
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub budget: usize,
    pub optimize_noise: bool,
    /// Extra random restarts around the initial point (shares the budget).
    pub restarts: usize,
    pub seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            budget: 200,
            optimize_noise: false,
            restarts: 0,
            seed: 0,
        }
    }
}

/// Log-space parameterization `(log σ_f², log ℓ…, [log σ_n²])`.
fn pack(k: &Kernel, optimize_noise: bool) -> Vec<f64> {
    let mut p = vec![k.signal_variance.max(1e-300).ln()];
    p.extend(k.lengthscales.iter().map(|l| l.ln()));
    if optimize_noise {
        p.push(k.noise_variance.max(1e-300).ln());
    }
    p
}

fn unpack(p: &[f64], template: &Kernel, optimize_noise: bool) -> Kernel {
    let nl = template.lengthscales.len();
    Kernel {
        signal_variance: p[0].exp(),
        lengthscales: p[1..1 + nl].iter().map(|v| v.exp()).collect(),
        noise_variance: if optimize_noise {
            p[1 + nl].exp()
        } else {
            template.noise_variance
        },
    }
}

fn lml_at(data: &Dataset, k: &Kernel) -> f64 {
    match fit(data, k) {
        Ok(m) => {
            let v = m.log_marginal_likelihood();
            if v.is_finite() {
                v
            } else {
                f64::NEG_INFINITY
            }
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Maximizes the log marginal likelihood over the kernel hyperparameters by
/// Nelder–Mead in log-space. The result never scores below `init`.
pub fn optimize_hyperparameters(data: &Dataset, init: &Kernel, budget: usize) -> Result<Optimized> {
    optimize_hyperparameters_with(
        data,
        init,
        &OptimizerSettings {
            budget,
            ..Default::default()
        },
    )
}

pub fn optimize_hyperparameters_with(
    data: &Dataset,
    init: &Kernel,
    settings: &OptimizerSettings,
) -> Result<Optimized> {
    init.validate()?;
    if let Some(d) = data.dim() {
        init.check_dim(d)?;
    }
    if settings.budget == 0 {
        return Ok(Optimized {
            kernel: init.clone(),
            log_marginal_likelihood: lml_at(data, init),
            evaluations: 0,
            budget_exhausted: true,
        });
    }
    let init_lml = lml_at(data, init);
    if data.len() < 2 {
        return Ok(Optimized {
            kernel: init.clone(),
            log_marginal_likelihood: init_lml,
            evaluations: 1,
            budget_exhausted: false,
        });
    }

    let objective = |p: &[f64]| -lml_at(data, &unpack(p, init, settings.optimize_noise));
    let x0 = pack(init, settings.optimize_noise);
    let mut evals = 1;
    let mut best_x = x0.clone();
    let mut best_f = -init_lml;
    let mut exhausted = false;

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    for restart in 0..=settings.restarts {
        let start: Vec<f64> = if restart == 0 {
            x0.clone()
        } else {
            x0.iter().map(|v| v + rng.random_range(-2.0..2.0)).collect()
        };
        let remaining = settings.budget.saturating_sub(evals);
        if remaining == 0 {
            exhausted = true;
            break;
        }
        let run = nelder_mead(&objective, &start, 1.0, remaining, 1e-10);
        evals += run.evaluations;
        exhausted = !run.converged;
        if run.f < best_f {
            best_f = run.f;
            best_x = run.x;
        }
    }

    let kernel = if best_f < -init_lml {
        unpack(&best_x, init, settings.optimize_noise)
    } else {
        init.clone()
    };
    Ok(Optimized {
        kernel,
        log_marginal_likelihood: -best_f.min(-init_lml),
        evaluations: evals,
        budget_exhausted: exhausted,
    })
}

struct SimplexResult {
    x: Vec<f64>,
    f: f64,
    evaluations: usize,
    converged: bool,
}

/// Minimizes `f` with the standard reflection/expansion/contraction/shrink
/// moves. Stops on spread of function values below `ftol` or on budget.
fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    step: f64,
    budget: usize,
    ftol: f64,
) -> SimplexResult {
    let n = x0.len();
    let mut evals = 0;
    let eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        if evals >= budget {
            break;
        }
        let mut x = x0.to_vec();
        x[i] += step;
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }
    if simplex.len() < n + 1 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, f) = simplex.swap_remove(0);
        return SimplexResult {
            x,
            f,
            evaluations: evals,
            converged: false,
        };
    }

    let mut converged = false;
    while evals < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (fb, fw) = (simplex[0].1, simplex[n].1);
        if fw.is_finite() && (fw - fb).abs() <= ftol * (1.0 + fb.abs()) {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let towards = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = towards(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            if evals >= budget {
                simplex[n] = (xr, fr);
                break;
            }
            let xe = towards(-2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            if evals >= budget {
                break;
            }
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = towards(-0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = towards(0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    if evals >= budget {
                        break;
                    }
                    let x: Vec<f64> = best.iter().zip(&item.0).map(|(b, v)| b + 0.5 * (v - b)).collect();
                    let fx = eval(&x, &mut evals);
                    *item = (x, fx);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    SimplexResult {
        x,
        f,
        evaluations: evals,
        converged,
    }
}

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(GpError::DimensionMismatch("box bounds of unequal length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(GpError::DimensionMismatch("box lower bound exceeds upper".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Grid covering number `Πᵢ ceil(sideᵢ·√d/(2ρ))`, each factor at least one.
    pub fn covering_number(&self, rho: f64) -> f64 {
        let sqrt_d = (self.dim() as f64).sqrt();
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| ((u - l) * sqrt_d / (2.0 * rho)).ceil().max(1.0))
            .product()
    }
}

/// Probabilistic uniform bound `|f(x) − μ(x)| ≤ √β·σ(x) + γ` on a box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBound {
    pub beta: f64,
    pub gamma: f64,
    pub covering_number: f64,
    /// Lipschitz bound of the posterior mean.
    pub mean_lipschitz: f64,
    /// Lipschitz bound of the posterior variance.
    pub variance_lipschitz: f64,
}

impl ErrorBound {
    pub fn bound_at(&self, model: &GpModel, x: &[f64]) -> Result<f64> {
        Ok(self.beta.sqrt() * model.predict_variance(x)?.sqrt() + self.gamma)
    }
}

pub fn uniform_error_bound(
    model: &GpModel,
    domain: &BoxDomain,
    delta: f64,
    rho: f64,
    target_lipschitz: f64,
) -> Result<ErrorBound> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(GpError::InvalidDelta(delta));
    }
    if !(rho > 0.0) {
        return Err(GpError::InvalidRadius(rho));
    }
    if domain.dim() != model.dim() {
        return Err(GpError::DimensionMismatch(format!(
            "domain of dimension {} for model of dimension {}",
            domain.dim(),
            model.dim()
        )));
    }
    let r = model.len() as f64;
    let lk = model.kernel().lipschitz_constant();
    let mean_lipschitz = lk * r.sqrt() * numerics::norm(model.alpha());

    // ‖(K + σ_n² I)⁻¹‖₂ = 1 / smallest eigenvalue of the SPD Gram matrix.
    let mut gram = gram_matrix(model.kernel(), model.data().inputs());
    for i in 0..model.len() {
        gram[(i, i)] += model.diagonal_regularization();
    }
    let smallest = numerics::singular_values(&gram)?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let inv_norm = 1.0 / smallest;
    let kmax = model.kernel().signal_variance;
    let variance_lipschitz = 2.0 * rho * lk * (1.0 + r * inv_norm * kmax);

    let covering_number = domain.covering_number(rho);
    let beta = 2.0 * (covering_number / delta).ln();
    let gamma = (mean_lipschitz + target_lipschitz) * rho + beta.sqrt() * variance_lipschitz * rho;
    Ok(ErrorBound {
        beta,
        gamma,
        covering_number,
        mean_lipschitz,
        variance_lipschitz,
    })
}

/// Per-dimension affine standardization `(x − mean)/scale` of GP inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Scales below this are replaced by one (constant dimensions).
    pub const MIN_SCALE: f64 = 1e-9;

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Column means and population standard deviations of `inputs`.
    pub fn fit(inputs: &[Vec<f64>]) -> Result<Self> {
        let first = inputs.first().ok_or(GpError::EmptyDataset)?;
        let d = first.len();
        let n = inputs.len() as f64;
        let mut mean = vec![0.0; d];
        for x in inputs {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for x in inputs {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd < Self::MIN_SCALE {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub(crate) fn apply_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            x.iter()
                .zip(&self.mean)
                .zip(&self.scale)
                .map(|((v, m), s)| (v - m) / s),
        );
    }

    pub fn apply_dataset(&self, data: &Dataset) -> Dataset {
        Dataset {
            inputs: data.inputs().iter().map(|x| self.apply(x)).collect(),
            targets: data.targets().to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_point(y: f64, noise: f64) -> GpModel {
        let d = Dataset::new(vec![vec![0.0]], vec![y]).unwrap();
        fit(&d, &Kernel::isotropic(1.0, 1.0, noise).unwrap()).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let k = Kernel::isotropic(1.0, 1.0, 0.0).unwrap();
        assert_eq!(k.eval(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 1.0);
        assert!((k.eval(&[0.0, 0.0], &[1.0, 1.0]).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!((k.eval(&[0.0, 0.0], &[1.0, 1.0]).unwrap() - 0.36788).abs() < 1e-5);
        assert_eq!(k.eval(&[0.0], &[1e3]).unwrap(), 0.0);
        assert!(matches!(k.eval(&[0.0], &[0.0, 1.0]), Err(GpError::DimensionMismatch(_))));
    }

    #[test]
    fn ard_lengthscales_must_match_dimension() {
        let k = Kernel::new(1.0, vec![1.0, 2.0], 0.0).unwrap();
        assert!(k.eval(&[0.0, 0.0], &[1.0, 2.0]).is_ok());
        assert!(k.eval(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]).is_err());
        // (1/1)^2 + (2/2)^2 = 2 → exp(-1)
        assert!((k.eval(&[0.0, 0.0], &[1.0, 2.0]).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn invalid_kernels() {
        assert!(Kernel::isotropic(-1.0, 1.0, 0.0).is_err());
        assert!(Kernel::isotropic(1.0, 0.0, 0.0).is_err());
        assert!(Kernel::isotropic(1.0, 1.0, -1e-3).is_err());
        assert!(Kernel::new(1.0, vec![], 0.0).is_err());
    }

    #[test]
    fn fit_examples() {
        let m = one_point(2.0, 0.0);
        assert!((m.alpha()[0] - 2.0).abs() < 1e-9);

        let d = Dataset::new(vec![vec![0.5], vec![0.5]], vec![1.0, 1.0]).unwrap();
        let m = fit(&d, &Kernel::isotropic(1.0, 1.0, 0.0).unwrap()).unwrap();
        assert!(m.diagnostics().degenerate_gram);

        assert_eq!(
            fit(&Dataset::default(), &Kernel::default()).unwrap_err(),
            GpError::EmptyDataset
        );
    }

    #[test]
    fn predict_examples() {
        let m = one_point(2.0, 0.0);
        assert!((m.predict_mean(&[0.0]).unwrap() - 2.0).abs() < 1e-6);
        assert!((m.predict_mean(&[1.0]).unwrap() - 2.0 * (-0.5f64).exp()).abs() < 1e-9);
        assert!((m.predict_mean(&[1.0]).unwrap() - 1.21306).abs() < 1e-5);
        assert!(m.predict_mean(&[100.0]).unwrap().abs() < 1e-12);

        assert!(m.predict_variance(&[0.0]).unwrap().abs() < 1e-9);
        assert!((m.predict_variance(&[1.0]).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-9);
        assert!((m.predict_variance(&[1.0]).unwrap() - 0.63212).abs() < 1e-5);
        assert!((m.predict_variance(&[100.0]).unwrap() - 1.0).abs() < 1e-12);

        assert!(m.predict_mean(&[0.0, 1.0]).is_err());
        assert!(m.predict_variance(&[]).is_err());
    }

    #[test]
    fn log_marginal_likelihood_examples() {
        let m = one_point(0.0, 0.0);
        assert!((m.log_marginal_likelihood() + 0.5 * (2.0 * PI).ln()).abs() < 1e-8);
        assert!((m.log_marginal_likelihood() + 0.91894).abs() < 1e-5);

        // Zero targets: data-fit term vanishes, only the complexity terms remain.
        let d = Dataset::new(vec![vec![0.0], vec![0.7], vec![2.0]], vec![1.0, -2.0, 0.5]).unwrap();
        let k = Kernel::isotropic(1.0, 1.0, 1e-2).unwrap();
        let zeroed = fit(&d.map_targets(|_| 0.0), &k).unwrap();
        let full = fit(&d, &k).unwrap();
        assert!(zeroed.log_marginal_likelihood() > full.log_marginal_likelihood());
        let complexity = -0.5 * zeroed.cholesky().log_det() - 1.5 * (2.0 * PI).ln();
        assert!((zeroed.log_marginal_likelihood() - complexity).abs() < 1e-12);
    }

    #[test]
    fn larger_noise_wins_on_noisy_data() {
        // Fixed pseudo-random residuals of scale ~3, far above the prior scale of 1.
        let ys = [2.9, -3.4, 1.7, -2.2, 3.8, -0.9, 2.6, -3.1];
        let xs: Vec<Vec<f64>> = (0..ys.len()).map(|i| vec![i as f64 * 5.0]).collect();
        let d = Dataset::new(xs, ys.to_vec()).unwrap();
        let small = fit(&d, &Kernel::isotropic(1.0, 1.0, 0.5).unwrap()).unwrap();
        let large = fit(&d, &Kernel::isotropic(1.0, 1.0, 1.0).unwrap()).unwrap();
        assert!(large.log_marginal_likelihood() > small.log_marginal_likelihood());
    }

    #[test]
    fn optimizer_budget_zero_and_single_point() {
        let d = Dataset::new(vec![vec![0.0], vec![1.0]], vec![0.3, -0.2]).unwrap();
        let init = Kernel::default();
        let r = optimize_hyperparameters(&d, &init, 0).unwrap();
        assert!(r.budget_exhausted);
        assert_eq!(r.kernel, init);

        let one = Dataset::new(vec![vec![0.0]], vec![1.0]).unwrap();
        let r = optimize_hyperparameters(&one, &init, 50).unwrap();
        assert_eq!(r.kernel, init);
    }

    #[test]
    fn optimizer_never_worse_than_init() {
        let xs: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 * 0.3]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (2.0 * x[0]).sin()).collect();
        let d = Dataset::new(xs, ys).unwrap();
        let init = Kernel::isotropic(0.1, 5.0, 1e-4).unwrap();
        let before = fit(&d, &init).unwrap().log_marginal_likelihood();
        let r = optimize_hyperparameters(&d, &init, 200).unwrap();
        let after = fit(&d, &r.kernel).unwrap().log_marginal_likelihood();
        assert!(after >= before);
        assert!(after > before + 1.0);
        assert!(r.evaluations <= 200);
    }

    #[test]
    fn error_bound_examples() {
        let m = one_point(1.0, 0.0);
        let dom = BoxDomain::new(vec![0.0], vec![0.0]).unwrap();
        let b = uniform_error_bound(&m, &dom, 0.5, 1.0, 0.0).unwrap();
        assert_eq!(b.covering_number, 1.0);
        assert!((b.beta - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!((b.beta - 1.38629).abs() < 1e-5);

        let wide = BoxDomain::new(vec![-1.0], vec![1.0]).unwrap();
        let coarse = uniform_error_bound(&m, &wide, 0.1, 0.1, 1.0).unwrap();
        let fine = uniform_error_bound(&m, &wide, 0.1, 1e-6, 1.0).unwrap();
        assert!(fine.beta > coarse.beta);

        assert_eq!(
            uniform_error_bound(&m, &dom, 1.0, 1.0, 0.0).unwrap_err(),
            GpError::InvalidDelta(1.0)
        );
        assert!(uniform_error_bound(&m, &dom, 0.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn error_bound_mean_lipschitz_matches_display() {
        let d = Dataset::new(vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![-0.5, 2.0]], vec![1.0, -1.0, 0.5])
            .unwrap();
        let k = Kernel::isotropic(2.0, 0.8, 1e-3).unwrap();
        let m = fit(&d, &k).unwrap();
        let dom = BoxDomain::new(vec![-1.0, -1.0], vec![2.0, 3.0]).unwrap();
        let b = uniform_error_bound(&m, &dom, 0.05, 0.1, 0.0).unwrap();
        let lk = 2.0 * (-0.5f64).exp() / 0.8;
        let expected = lk * 3f64.sqrt() * numerics::norm(m.alpha());
        assert_eq!(b.mean_lipschitz, expected);
        let x = [0.3, 0.4];
        let at = b.bound_at(&m, &x).unwrap();
        assert!((at - (b.beta.sqrt() * m.predict_variance(&x).unwrap().sqrt() + b.gamma)).abs() < 1e-12);
    }

    #[test]
    fn standardizer_handles_constant_columns() {
        let s = Standardizer::fit(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.scale, vec![1.0, 1.0]);
        assert_eq!(s.apply(&[3.0, 6.0]), vec![1.0, 1.0]);
    }
}
