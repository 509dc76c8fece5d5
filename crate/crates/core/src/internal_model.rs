//! Linear internal model `η̇ = Mη + N·u` and the steady-state diagnostics
//! built on it.

use thiserror::Error;

use crate::numerics::{self, max_real_eigenvalue, pbh_controllability_margin, Matrix, NumericsError, Rk4};

/// Smallest PBH margin accepted as "controllable".
pub const CONTROLLABILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("internal model dimension must be at least 1")]
    InvalidDimension,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("M is not Hurwitz (largest real eigenvalue {0})")]
    NotHurwitz(f64),
    #[error("(M, N) is not controllable (PBH margin {0:e})")]
    NotControllable(f64),
    #[error("input gain b must be positive, got {0}")]
    NonPositiveB(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InternalModel {
    m: Matrix,
    n: Vec<f64>,
}

impl InternalModel {
    /// Validates that `m` is Hurwitz and `(m, n)` controllable. Controllability
    /// is judged by the PBH margin, which stays of order one for long chains
    /// whose controllability matrix is numerically rank deficient.
    pub fn new(m: Matrix, n: Vec<f64>) -> Result<Self, ModelError> {
        if !m.is_square() || m.rows() != n.len() || n.is_empty() {
            return Err(ModelError::DimensionMismatch(format!(
                "M is {}x{}, N has length {}",
                m.rows(),
                m.cols(),
                n.len()
            )));
        }
        let lambda = max_real_eigenvalue(&m)?;
        if !(lambda < 0.0) {
            return Err(ModelError::NotHurwitz(lambda));
        }
        let s = pbh_controllability_margin(&m, &n)?;
        if !(s > CONTROLLABILITY_TOLERANCE) {
            return Err(ModelError::NotControllable(s));
        }
        Ok(Self { m, n })
    }

    /// Chain model: `−1` on the diagonal, `+1` on the superdiagonal and `N`
    /// the last standard basis vector.
    pub fn build_chain(dim: usize) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::InvalidDimension);
        }
        let mut m = Matrix::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = -1.0;
            if i + 1 < dim {
                m[(i, i + 1)] = 1.0;
            }
        }
        let mut n = vec![0.0; dim];
        n[dim - 1] = 1.0;
        Self::new(m, n)
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn m(&self) -> &Matrix {
        &self.m
    }

    pub fn n(&self) -> &[f64] {
        &self.n
    }

    /// Writes `Mη + N·u` into `out`.
    #[inline]
    pub fn derivative_into(&self, eta: &[f64], u: f64, out: &mut [f64]) {
        for (o, ni) in out.iter_mut().zip(&self.n) {
            *o = ni * u;
        }
        self.m.mul_vec_add_into(eta, out);
    }

    /// Integrates `η̇* = Mη* + N·u*(t)` from `η*(0) = 0` over `[0, duration]`
    /// with fixed step `h`, returning every grid point.
    pub fn ideal_eta_trajectory<F>(
        &self,
        u_star: F,
        duration: f64,
        h: f64,
    ) -> Result<Vec<(f64, Vec<f64>)>, ModelError>
    where
        F: Fn(f64) -> f64,
    {
        if !(h > 0.0) || !(duration >= 0.0) {
            return Err(ModelError::DimensionMismatch("step and duration must be positive".into()));
        }
        let steps = (duration / h).round() as usize;
        let mut eta = vec![0.0; self.dim()];
        let mut rk = Rk4::new(self.dim());
        let mut out = Vec::with_capacity(steps + 1);
        out.push((0.0, eta.clone()));
        for k in 0..steps {
            let t = k as f64 * h;
            rk.step(|t, x, dx| self.derivative_into(x, u_star(t), dx), t, &mut eta, h)?;
            out.push(((k + 1) as f64 * h, eta.clone()));
        }
        Ok(out)
    }
}

/// `η̄ = η − η* − b⁻¹·N·e`.
pub fn error_coordinates(
    eta: &[f64],
    eta_star: &[f64],
    e: f64,
    b: f64,
    n: &[f64],
) -> Result<Vec<f64>, ModelError> {
    if eta.len() != eta_star.len() || eta.len() != n.len() {
        return Err(ModelError::DimensionMismatch(format!(
            "η {}, η* {}, N {}",
            eta.len(),
            eta_star.len(),
            n.len()
        )));
    }
    if !(b > 0.0) {
        return Err(ModelError::NonPositiveB(b));
    }
    Ok(eta
        .iter()
        .zip(eta_star)
        .zip(n)
        .map(|((x, xs), ni)| x - xs - ni * e / b)
        .collect())
}

/// Worst-case distance between an η* trajectory and itself one period later,
/// over grid points with `t ≥ after`.
pub fn periodicity_defect(traj: &[(f64, Vec<f64>)], period_steps: usize, after: f64) -> f64 {
    traj.iter()
        .zip(traj.iter().skip(period_steps))
        .filter(|((t, _), _)| *t >= after)
        .map(|((_, a), (_, b))| {
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            numerics::norm(&d)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_of_six() {
        let im = InternalModel::build_chain(6).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j {
                    -1.0
                } else if j == i + 1 {
                    1.0
                } else {
                    0.0
                };
                assert_eq!(im.m()[(i, j)], want);
            }
        }
        assert_eq!(im.n(), &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(max_real_eigenvalue(im.m()).unwrap(), -1.0);
    }

    #[test]
    fn chain_of_ten_is_controllable() {
        let im = InternalModel::build_chain(10).unwrap();
        let s = numerics::controllability_min_singular_value(im.m(), im.n()).unwrap();
        assert!(s > 1e-12);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert_eq!(InternalModel::build_chain(0), Err(ModelError::InvalidDimension));
    }

    #[test]
    fn broken_superdiagonal_is_uncontrollable() {
        // Chain with the (9,10) entry zeroed: last state decouples from the rest.
        let mut m = InternalModel::build_chain(10).unwrap().m().clone();
        m[(8, 9)] = 0.0;
        let mut n = vec![0.0; 10];
        n[9] = 1.0;
        assert!(matches!(InternalModel::new(m, n), Err(ModelError::NotControllable(_))));
    }

    #[test]
    fn unstable_matrix_rejected() {
        let m = Matrix::from_rows(&[[0.5]]).unwrap();
        assert!(matches!(InternalModel::new(m, vec![1.0]), Err(ModelError::NotHurwitz(_))));
    }

    #[test]
    fn ideal_eta_examples() {
        let im = InternalModel::build_chain(3).unwrap();
        let traj = im.ideal_eta_trajectory(|_| 0.0, 1.0, 0.01).unwrap();
        assert!(traj.iter().all(|(_, x)| x.iter().all(|v| *v == 0.0)));

        let scalar = InternalModel::build_chain(1).unwrap();
        let traj = scalar.ideal_eta_trajectory(|_| 1.0, 5.0, 1e-3).unwrap();
        for (t, x) in traj.iter().step_by(250) {
            assert!((x[0] - (1.0 - (-t).exp())).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn error_coordinate_examples() {
        let n = [0.0, 0.0, 1.0];
        let z = error_coordinates(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], 0.0, 1.0, &n).unwrap();
        assert_eq!(z, vec![0.0; 3]);
        let z = error_coordinates(&[1.0, 2.0, 3.0], &[0.0; 3], 1.0, 1.0, &n).unwrap();
        assert_eq!(z, vec![1.0, 2.0, 2.0]);
        assert_eq!(
            error_coordinates(&[1.0; 3], &[0.0; 3], 1.0, 0.0, &n),
            Err(ModelError::NonPositiveB(0.0))
        );
        assert!(error_coordinates(&[1.0; 2], &[0.0; 3], 1.0, 1.0, &n).is_err());
    }
}
