//! C ABI over the `gpreg` simulator.
//!
//! Objects are opaque handles created by `*_new`/`*_fit`/`*_from_config`
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`GpregStatus`]; on failure a message is available from
//! [`gpreg_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use gpreg::config::{parse_config, ExperimentConfig};
use gpreg::experiment::{self, ExperimentError, ExperimentOutcome};
use gpreg::gp::{self, Dataset, GpModel, Kernel};
use gpreg::plants::{lorenz_residual, LorenzCoefficients, LorenzParams};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpregStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Simulation = 5,
    Io = 6,
    /// The experiment has not been run yet.
    NotRun = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

type Fallible = Result<(), (GpregStatus, String)>;

fn guard(f: impl FnOnce() -> Fallible) -> GpregStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            GpregStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GpregStatus::Panic
        }
    }
}

fn null(what: &str) -> (GpregStatus, String) {
    (GpregStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (GpregStatus, String) {
    (GpregStatus::InvalidArgument, msg.into())
}

fn from_experiment(e: ExperimentError) -> (GpregStatus, String) {
    let status = match e {
        ExperimentError::Config(_) | ExperimentError::UnknownExample(_) => GpregStatus::Config,
        ExperimentError::Plant(_) => GpregStatus::InvalidArgument,
        ExperimentError::Simulation { .. } => GpregStatus::Simulation,
        ExperimentError::Io { .. } => GpregStatus::Io,
    };
    (status, e.to_string())
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (GpregStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

/// Message describing the last failure on this thread, or an empty string.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn gpreg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gpreg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Exact GP posterior with a squared-exponential kernel.
pub struct GpregGp {
    model: GpModel,
}

/// Fits a GP to `n` inputs of dimension `dim` (row-major in `inputs`) and
/// `n` targets. The kernel uses one lengthscale for every dimension.
///
/// # Safety
/// `inputs` must point to `n * dim` doubles, `targets` to `n` doubles and
/// `out` to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn gpreg_gp_fit(
    inputs: *const f64,
    targets: *const f64,
    n: usize,
    dim: usize,
    signal_variance: f64,
    lengthscale: f64,
    noise_variance: f64,
    out: *mut *mut GpregGp,
) -> GpregStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if inputs.is_null() || targets.is_null() {
            return Err(null("inputs or targets"));
        }
        if n == 0 || dim == 0 {
            return Err(invalid("need at least one point of positive dimension"));
        }
        let xs = std::slice::from_raw_parts(inputs, n * dim);
        let ys = std::slice::from_raw_parts(targets, n);
        let data = Dataset::new(xs.chunks(dim).map(<[f64]>::to_vec).collect(), ys.to_vec())
            .map_err(|e| invalid(e.to_string()))?;
        let kernel = Kernel::isotropic(signal_variance, lengthscale, noise_variance).map_err(|e| invalid(e.to_string()))?;
        let model = gp::fit(&data, &kernel).map_err(|e| (GpregStatus::Numerical, e.to_string()))?;
        *out = Box::into_raw(Box::new(GpregGp { model }));
        Ok(())
    })
}

/// Posterior mean and variance at one input of dimension `dim`.
///
/// # Safety
/// `gp` must come from [`gpreg_gp_fit`]; `x` must point to `dim` doubles;
/// the output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn gpreg_gp_predict(
    gp: *const GpregGp,
    x: *const f64,
    dim: usize,
    mean: *mut f64,
    variance: *mut f64,
) -> GpregStatus {
    guard(|| {
        let gp = gp.as_ref().ok_or_else(|| null("gp"))?;
        if x.is_null() || mean.is_null() || variance.is_null() {
            return Err(null("x or an output pointer"));
        }
        let p = gp
            .model
            .predict(std::slice::from_raw_parts(x, dim))
            .map_err(|e| invalid(e.to_string()))?;
        *mean = p.mean;
        *variance = p.variance;
        Ok(())
    })
}

/// Number of training points held by the model (0 for a null handle).
///
/// # Safety
/// `gp` must be null or come from [`gpreg_gp_fit`].
#[no_mangle]
pub unsafe extern "C" fn gpreg_gp_len(gp: *const GpregGp) -> usize {
    gp.as_ref().map_or(0, |g| g.model.len())
}

/// # Safety
/// `gp` must be null or come from [`gpreg_gp_fit`], and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn gpreg_gp_free(gp: *mut GpregGp) {
    if !gp.is_null() {
        drop(Box::from_raw(gp));
    }
}

/// A configured closed-loop experiment and, once run, its results.
pub struct GpregExperiment {
    config: ExperimentConfig,
    outcome: Option<ExperimentOutcome>,
}

/// Headline numbers of a finished run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpregMetrics {
    pub final_abs_error: f64,
    pub rms_error_last_quarter: f64,
    pub jump_count: usize,
    pub sample_count: usize,
    /// Final-quarter RMS error of the feedback-only twin, NaN when the
    /// comparison was not requested.
    pub without_im_rms_error_last_quarter: f64,
}

/// Parses a configuration document (see the README for keys).
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gpreg_experiment_from_config(
    text: *const c_char,
    out: *mut *mut GpregExperiment,
) -> GpregStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = c_str(text, "text")?;
        let config = parse_config(text).map_err(|e| from_experiment(e.into()))?;
        *out = Box::into_raw(Box::new(GpregExperiment { config, outcome: None }));
        Ok(())
    })
}

/// Runs the experiment. Output paths named in the configuration are written.
///
/// # Safety
/// `exp` must come from [`gpreg_experiment_from_config`].
#[no_mangle]
pub unsafe extern "C" fn gpreg_experiment_run(exp: *mut GpregExperiment) -> GpregStatus {
    guard(|| {
        let exp = exp.as_mut().ok_or_else(|| null("experiment"))?;
        let outcome = experiment::run_experiment(&exp.config).map_err(from_experiment)?;
        experiment::write_outputs(&exp.config, &outcome).map_err(from_experiment)?;
        exp.outcome = Some(outcome);
        Ok(())
    })
}

/// # Safety
/// `exp` must come from [`gpreg_experiment_from_config`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gpreg_experiment_metrics(exp: *const GpregExperiment, out: *mut GpregMetrics) -> GpregStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("experiment"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let o = exp
            .outcome
            .as_ref()
            .ok_or((GpregStatus::NotRun, "experiment has not been run".into()))?;
        *out = GpregMetrics {
            final_abs_error: o.with_im.metrics.final_abs_error,
            rms_error_last_quarter: o.with_im.metrics.rms_error_last_quarter,
            jump_count: o.with_im.metrics.jump_count,
            sample_count: o.with_im.trajectory.samples.len(),
            without_im_rms_error_last_quarter: o
                .without_im
                .as_ref()
                .map_or(f64::NAN, |t| t.metrics.rms_error_last_quarter),
        };
        Ok(())
    })
}

/// Writes the trajectory of the last run as CSV.
///
/// # Safety
/// `exp` must come from [`gpreg_experiment_from_config`]; `path` must be a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gpreg_experiment_write_csv(exp: *const GpregExperiment, path: *const c_char) -> GpregStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("experiment"))?;
        let path = c_str(path, "path")?;
        let o = exp
            .outcome
            .as_ref()
            .ok_or((GpregStatus::NotRun, "experiment has not been run".into()))?;
        experiment::write_trajectory(&o.with_im.trajectory, exp.config.oracle_overlay, Path::new(path))
            .map_err(from_experiment)
    })
}

/// # Safety
/// `exp` must be null or come from [`gpreg_experiment_from_config`], and is
/// invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn gpreg_experiment_free(exp: *mut GpregExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Largest mismatch of the closed-form Lorenz steady-state maps over one
/// exosystem period from `w(0) = (w1, w2)`, nominal plant parameters.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gpreg_lorenz_residual(sigma: f64, w1: f64, w2: f64, out: *mut f64) -> GpregStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if !(sigma > 0.0) {
            return Err(invalid("sigma must be positive"));
        }
        let params = LorenzParams {
            sigma,
            ..Default::default()
        };
        let c = LorenzCoefficients::from_params(&params).map_err(|e| invalid(e.to_string()))?;
        *out = lorenz_residual(&params, &c, &[w1, w2], 2.0 * PI / sigma).map_err(|e| invalid(e.to_string()))?;
        Ok(())
    })
}
