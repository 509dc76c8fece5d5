//! Benchmark plants, their exosystems and the Lorenz steady-state oracle.
//!
//! Every plant has the normal form `ż = f_z(z, y, w)`, `ẏ = q(z, y, w) + b·u`
//! with the regulated output last in the state vector (the bioreactor is the
//! exception: its error is `S − S_p`).

use std::fmt;

use thiserror::Error;

use crate::numerics::{NumericsError, Rk4};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular denominator in steady-state coefficients: {0}")]
    SingularDenominator(&'static str),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, PlantError>;

/// Plant plus exosystem, as seen by the regulator.
pub trait PlantModel: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// Column names of the plant state, in state order.
    fn state_names(&self) -> &'static [&'static str];

    fn state_dim(&self) -> usize {
        self.state_names().len()
    }

    fn exo_dim(&self) -> usize {
        2
    }

    /// Plant vector field at time `t`, written into `out`.
    fn rhs(&self, t: f64, x: &[f64], w: &[f64], u: f64, out: &mut [f64]);

    fn exo_rhs(&self, w: &[f64], out: &mut [f64]);

    /// Regulated error `e`.
    fn error(&self, x: &[f64], w: &[f64]) -> f64;

    /// Hard bounds applied to the control input, if any.
    fn input_bounds(&self) -> Option<(f64, f64)> {
        None
    }

    /// Plants whose states are physically nonnegative.
    fn nonnegative_states(&self) -> bool {
        false
    }

    /// Closed-form ideal feedforward `u*(w)`, when known.
    fn ideal_feedforward(&self, _w: &[f64]) -> Option<f64> {
        None
    }
}

fn check_len(what: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(PlantError::DimensionMismatch(format!(
            "{what} has length {}, expected {n}",
            v.len()
        )))
    }
}

/// Harmonic oscillator `(σ·w₂, −σ·w₁)`.
pub fn harmonic_exo_rhs(w: &[f64], sigma: f64) -> Result<Vec<f64>> {
    check_len("w", w, 2)?;
    Ok(vec![sigma * w[1], -sigma * w[0]])
}

/// Undamped Duffing oscillator `(w₂, −w₁ − w₁³)`.
pub fn duffing_exo_rhs(w: &[f64]) -> Result<Vec<f64>> {
    check_len("w", w, 2)?;
    Ok(vec![w[1], -w[0] - w[0] * w[0] * w[0]])
}

/// First integral of the Duffing exosystem.
pub fn duffing_energy(w: &[f64]) -> f64 {
    0.5 * w[0] * w[0] + 0.25 * w[0].powi(4) + 0.5 * w[1] * w[1]
}

// ---------------------------------------------------------------------------
// Lorenz

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorenzParams {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub a3: f64,
    /// Exosystem frequency.
    pub sigma: f64,
    /// Input gain.
    pub b: f64,
}

impl Default for LorenzParams {
    fn default() -> Self {
        Self {
            a11: -10.0,
            a12: 10.0,
            a21: 28.0,
            a22: -1.0,
            a3: -2.6667,
            sigma: 0.8,
            b: 1.0,
        }
    }
}

/// `(a11·z1 + a12·y, a3·z2 + z1·y, z1·(a21 − z2) + a22·y + u)`.
pub fn lorenz_rhs(x: &[f64], u: f64, p: &LorenzParams) -> Result<Vec<f64>> {
    check_len("state", x, 3)?;
    let mut out = vec![0.0; 3];
    lorenz_rhs_into(x, u, p, &mut out);
    Ok(out)
}

#[inline]
fn lorenz_rhs_into(x: &[f64], u: f64, p: &LorenzParams, out: &mut [f64]) {
    let (z1, z2, y) = (x[0], x[1], x[2]);
    out[0] = p.a11 * z1 + p.a12 * y;
    out[1] = p.a3 * z2 + z1 * y;
    out[2] = z1 * (p.a21 - z2) + p.a22 * y + p.b * u;
}

/// Coefficients of the polynomial steady-state maps
/// `z1* = r11·w1 + r12·w2`, `z2* = r21·w1² + r22·w2² + r23·w1·w2`, `y* = w1`
/// and of the cubic feedforward `u*(w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorenzCoefficients {
    pub r11: f64,
    pub r12: f64,
    pub r21: f64,
    pub r22: f64,
    pub r23: f64,
    pub r31: f64,
    pub r32: f64,
    pub r33: f64,
    pub r34: f64,
    pub r35: f64,
    pub r36: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorenzSteadyState {
    pub z1: f64,
    pub z2: f64,
    pub y: f64,
}

impl LorenzCoefficients {
    /// Solution of the regulator equations for the harmonic exosystem.
    pub fn from_params(p: &LorenzParams) -> Result<Self> {
        let s = p.sigma;
        let d1 = s * s + p.a11 * p.a11;
        if d1 == 0.0 {
            return Err(PlantError::SingularDenominator("σ² + a11²"));
        }
        let d2 = 4.0 * s * s + p.a3 * p.a3;
        if d2 == 0.0 || p.a3 == 0.0 {
            return Err(PlantError::SingularDenominator("a3·(a3² + 4σ²)"));
        }
        if p.b == 0.0 {
            return Err(PlantError::SingularDenominator("b"));
        }
        let r11 = -p.a11 * p.a12 / d1;
        let r12 = -p.a12 * s / d1;
        let r23 = -(r12 * p.a3 + 2.0 * s * r11) / d2;
        let r22 = s * r23 / p.a3;
        let r21 = -(p.a3 * p.a3 * r11 - p.a3 * s * r12 + 2.0 * s * s * r11) / (p.a3 * d2);
        Ok(Self::with_feedforward(p, r11, r12, r21, r22, r23))
    }

    /// A variant with `σ² + a11` in the `r11` denominator and a negative sign
    /// on the `r23` term of `r22`. It does not solve the regulator equations;
    /// kept so the residual oracle can show it.
    pub fn inconsistent_variant(p: &LorenzParams) -> Result<Self> {
        let s = p.sigma;
        let d11 = s * s + p.a11;
        let d12 = s * s + p.a11 * p.a11;
        let d2 = 4.0 * s * s + p.a3 * p.a3;
        if d11 == 0.0 || d12 == 0.0 || d2 == 0.0 || p.a3 == 0.0 || p.b == 0.0 {
            return Err(PlantError::SingularDenominator("variant coefficients"));
        }
        let r11 = -p.a11 * p.a12 / d11;
        let r12 = -p.a12 * s / d12;
        let r23 = -(r12 * p.a3 + 2.0 * s * r11) / d2;
        let r22 = -s / p.a3 * r23;
        let r21 = -(p.a3 * p.a3 * r11 - p.a3 * s * r12 + 2.0 * s * s * r11) / (p.a3 * d2);
        Ok(Self::with_feedforward(p, r11, r12, r21, r22, r23))
    }

    fn with_feedforward(p: &LorenzParams, r11: f64, r12: f64, r21: f64, r22: f64, r23: f64) -> Self {
        let binv = 1.0 / p.b;
        Self {
            r11,
            r12,
            r21,
            r22,
            r23,
            r31: -binv * (p.a22 + p.a21 * r11),
            r32: binv * (p.sigma - p.a21 * r12),
            r33: binv * r11 * r21,
            r34: binv * r12 * r22,
            r35: binv * (r12 * r21 + r11 * r23),
            r36: binv * (r11 * r22 + r12 * r23),
        }
    }

    pub fn steady_state(&self, w: &[f64]) -> LorenzSteadyState {
        let (w1, w2) = (w[0], w[1]);
        LorenzSteadyState {
            z1: self.r11 * w1 + self.r12 * w2,
            z2: self.r21 * w1 * w1 + self.r22 * w2 * w2 + self.r23 * w1 * w2,
            y: w1,
        }
    }

    pub fn feedforward(&self, w: &[f64]) -> f64 {
        let (w1, w2) = (w[0], w[1]);
        self.r31 * w1
            + self.r32 * w2
            + self.r33 * w1 * w1 * w1
            + self.r34 * w2 * w2 * w2
            + self.r35 * w1 * w1 * w2
            + self.r36 * w1 * w2 * w2
    }

    /// Mutable access by name (`"r11"` … `"r36"`), for sensitivity probes.
    pub fn get_mut(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "r11" => &mut self.r11,
            "r12" => &mut self.r12,
            "r21" => &mut self.r21,
            "r22" => &mut self.r22,
            "r23" => &mut self.r23,
            "r31" => &mut self.r31,
            "r32" => &mut self.r32,
            "r33" => &mut self.r33,
            "r34" => &mut self.r34,
            "r35" => &mut self.r35,
            "r36" => &mut self.r36,
            _ => return None,
        })
    }

    pub const NAMES: [&'static str; 11] = [
        "r11", "r12", "r21", "r22", "r23", "r31", "r32", "r33", "r34", "r35", "r36",
    ];
}

pub fn lorenz_steady_state(w: &[f64], p: &LorenzParams) -> Result<LorenzSteadyState> {
    check_len("w", w, 2)?;
    Ok(LorenzCoefficients::from_params(p)?.steady_state(w))
}

pub fn lorenz_ideal_feedforward(w: &[f64], p: &LorenzParams) -> Result<f64> {
    check_len("w", w, 2)?;
    Ok(LorenzCoefficients::from_params(p)?.feedforward(w))
}

#[derive(Debug, Clone)]
pub struct LorenzPlant {
    pub params: LorenzParams,
    coefficients: LorenzCoefficients,
}

impl LorenzPlant {
    pub fn new(params: LorenzParams) -> Result<Self> {
        Ok(Self {
            coefficients: LorenzCoefficients::from_params(&params)?,
            params,
        })
    }

    pub fn coefficients(&self) -> &LorenzCoefficients {
        &self.coefficients
    }
}

impl PlantModel for LorenzPlant {
    fn name(&self) -> &'static str {
        "lorenz"
    }

    fn state_names(&self) -> &'static [&'static str] {
        &["z1", "z2", "y"]
    }

    fn rhs(&self, _t: f64, x: &[f64], _w: &[f64], u: f64, out: &mut [f64]) {
        lorenz_rhs_into(x, u, &self.params, out);
    }

    fn exo_rhs(&self, w: &[f64], out: &mut [f64]) {
        out[0] = self.params.sigma * w[1];
        out[1] = -self.params.sigma * w[0];
    }

    fn error(&self, x: &[f64], w: &[f64]) -> f64 {
        x[2] - w[0]
    }

    fn ideal_feedforward(&self, w: &[f64]) -> Option<f64> {
        Some(self.coefficients.feedforward(w))
    }
}

// ---------------------------------------------------------------------------
// Example 2: nonlinear plant driven by a Duffing exosystem

/// `(−2z + y + 2w₁, w₂² + z·y + u)`.
pub fn example2_rhs(x: &[f64], w: &[f64], u: f64) -> Result<Vec<f64>> {
    check_len("state", x, 2)?;
    check_len("w", w, 2)?;
    let mut out = vec![0.0; 2];
    Example2Plant.rhs(0.0, x, w, u, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Example2Plant;

impl PlantModel for Example2Plant {
    fn name(&self) -> &'static str {
        "example2"
    }

    fn state_names(&self) -> &'static [&'static str] {
        &["z", "y"]
    }

    fn rhs(&self, _t: f64, x: &[f64], w: &[f64], u: f64, out: &mut [f64]) {
        let (z, y) = (x[0], x[1]);
        out[0] = -2.0 * z + y + 2.0 * w[0];
        out[1] = w[1] * w[1] + z * y + u;
    }

    fn exo_rhs(&self, w: &[f64], out: &mut [f64]) {
        out[0] = w[1];
        out[1] = -w[0] - w[0] * w[0] * w[0];
    }

    fn error(&self, x: &[f64], w: &[f64]) -> f64 {
        x[1] - w[0]
    }
}

// ---------------------------------------------------------------------------
// Continuous fermenter

/// Process parameters (units: g/L, 1/h).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BioreactorParams {
    /// Nominal cell-mass yield γ̄_X/S.
    pub yield_nominal: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu_max: f64,
    pub p_max: f64,
    pub k_m: f64,
    pub k_i: f64,
    pub dilution: f64,
    pub feed_nominal: f64,
    /// Amplitude of the sinusoidal yield disturbance.
    pub disturbance_amplitude: f64,
    pub disturbance_frequency: f64,
    /// Substrate set point `S_p`.
    pub setpoint: f64,
}

impl Default for BioreactorParams {
    fn default() -> Self {
        Self {
            yield_nominal: 0.4,
            alpha: 2.2,
            beta: 0.2,
            mu_max: 0.48,
            p_max: 50.0,
            k_m: 1.2,
            k_i: 22.0,
            dilution: 0.15,
            feed_nominal: 20.0,
            disturbance_amplitude: 0.2,
            disturbance_frequency: 0.8,
            setpoint: 23.4,
        }
    }
}

impl BioreactorParams {
    /// Steady operating point `(X, S, P)` listed with the nominal parameters.
    pub const NOMINAL_STATE: [f64; 3] = [7.038, 2.404, 24.87];

    /// `γ̄ + a₀·sin(ω·t)`.
    pub fn yield_at(&self, t: f64) -> f64 {
        self.yield_nominal + self.disturbance_amplitude * (self.disturbance_frequency * t).sin()
    }
}

/// Specific growth rate with product and substrate inhibition.
pub fn growth_rate(s: f64, p: f64, params: &BioreactorParams) -> f64 {
    params.mu_max * (1.0 - p / params.p_max) * s / (params.k_m + s + s * s / params.k_i)
}

#[inline]
fn bioreactor_rhs_with_yield(x: &[f64], u: f64, gamma: f64, p: &BioreactorParams, out: &mut [f64]) {
    let (bx, s, prod) = (x[0], x[1], x[2]);
    let mu = growth_rate(s, prod, p);
    out[0] = -p.dilution * bx + mu * bx;
    out[1] = p.dilution * (u - s) - mu * bx / gamma;
    out[2] = -p.dilution * prod + (p.alpha * mu + p.beta) * bx;
}

/// Fermenter dynamics with feed concentration `u = S_f` at time `t`.
pub fn bioreactor_rhs(x: &[f64], u: f64, t: f64, p: &BioreactorParams) -> Result<Vec<f64>> {
    check_len("state", x, 3)?;
    let mut out = vec![0.0; 3];
    bioreactor_rhs_with_yield(x, u, p.yield_at(t), p, &mut out);
    Ok(out)
}

/// The fermenter as a regulated plant. The yield disturbance is generated by
/// a harmonic exosystem of frequency ω started at `w = (0, 1)`, so that
/// `w₁(t) = sin(ω·t)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BioreactorPlant {
    pub params: BioreactorParams,
}

impl BioreactorPlant {
    pub const INPUT_BOUNDS: (f64, f64) = (0.0, 45.0);
    pub const EXO_INITIAL: [f64; 2] = [0.0, 1.0];
}

impl PlantModel for BioreactorPlant {
    fn name(&self) -> &'static str {
        "bioreactor"
    }

    fn state_names(&self) -> &'static [&'static str] {
        &["X", "S", "P"]
    }

    fn rhs(&self, _t: f64, x: &[f64], w: &[f64], u: f64, out: &mut [f64]) {
        let p = &self.params;
        let gamma = p.yield_nominal + p.disturbance_amplitude * w[0];
        bioreactor_rhs_with_yield(x, u, gamma, p, out);
    }

    fn exo_rhs(&self, w: &[f64], out: &mut [f64]) {
        let om = self.params.disturbance_frequency;
        out[0] = om * w[1];
        out[1] = -om * w[0];
    }

    fn error(&self, x: &[f64], _w: &[f64]) -> f64 {
        x[1] - self.params.setpoint
    }

    fn input_bounds(&self) -> Option<(f64, f64)> {
        Some(Self::INPUT_BOUNDS)
    }

    fn nonnegative_states(&self) -> bool {
        true
    }
}

// ---------------------------------------------------------------------------

/// Step of the central differences used by [`regulator_residual`].
pub const RESIDUAL_FD_STEP: f64 = 1e-5;

/// Largest mismatch of the regulator equations along an exosystem orbit.
///
/// `steady_maps(w)` returns the candidate steady plant state `x*(w)` and
/// feedforward `u*(w)`. Along `w(t)` (integrated with RK4 at step `h`), the
/// time derivative of `x*(w(t))` is taken by central differences in the
/// direction of the exosystem field and compared with the plant vector field
/// evaluated at `(x*, w, u*)`.
pub fn regulator_residual<F>(
    plant: &dyn PlantModel,
    steady_maps: F,
    w0: &[f64],
    duration: f64,
    h: f64,
) -> Result<f64>
where
    F: Fn(&[f64]) -> (Vec<f64>, f64),
{
    check_len("w0", w0, plant.exo_dim())?;
    let nx = plant.state_dim();
    let steps = (duration / h).round() as usize;
    let mut w = w0.to_vec();
    let mut rk = Rk4::new(w.len());
    let mut s = vec![0.0; w.len()];
    let mut f = vec![0.0; nx];
    let mut worst: f64 = 0.0;
    for k in 0..=steps {
        let t = k as f64 * h;
        plant.exo_rhs(&w, &mut s);
        let shifted = |sign: f64| -> Vec<f64> {
            w.iter()
                .zip(&s)
                .map(|(wi, si)| wi + sign * RESIDUAL_FD_STEP * si)
                .collect()
        };
        let (xp, _) = steady_maps(&shifted(1.0));
        let (xm, _) = steady_maps(&shifted(-1.0));
        let (x, u) = steady_maps(&w);
        check_len("steady state", &x, nx)?;
        plant.rhs(t, &x, &w, u, &mut f);
        for i in 0..nx {
            let dxdt = (xp[i] - xm[i]) / (2.0 * RESIDUAL_FD_STEP);
            worst = worst.max((dxdt - f[i]).abs());
        }
        if k < steps {
            rk.step(|_, w, dw| plant.exo_rhs(w, dw), t, &mut w, h)?;
        }
    }
    Ok(worst)
}

/// [`regulator_residual`] for the Lorenz plant with the given coefficients.
pub fn lorenz_residual(
    params: &LorenzParams,
    coefficients: &LorenzCoefficients,
    w0: &[f64],
    duration: f64,
) -> Result<f64> {
    let plant = LorenzPlant::new(*params)?;
    regulator_residual(
        &plant,
        |w| {
            let ss = coefficients.steady_state(w);
            (vec![ss.z1, ss.z2, ss.y], coefficients.feedforward(w))
        },
        w0,
        duration,
        1e-3,
    )
}
