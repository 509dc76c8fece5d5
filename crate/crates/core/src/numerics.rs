//! Dense linear algebra and fixed-step ODE stepping.
//!
//! Everything here is small and self-contained: the regulator works with
//! Gram matrices of at most a few dozen rows and internal models of modest
//! dimension, so straightforward `O(n^3)` routines are adequate.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

/// Largest jitter tried by [`cholesky_factor`] before giving up.
pub const MAX_JITTER: f64 = 1e-4;

/// Convergence tolerance of the iterative eigen/singular value routines.
pub const ITERATIVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not positive definite (last attempted jitter {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },
    #[error("non-finite derivative at t = {t}")]
    NonFiniteDerivative { t: f64 },
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("non-finite matrix entry")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(NumericsError::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row slices; all rows must share one length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(NumericsError::DimensionMismatch("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `y += self * x` without bounds re-checking; lengths must match.
    pub(crate) fn mul_vec_add_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += dot(self.row(i), x);
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(NumericsError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(NumericsError::DimensionMismatch("shape mismatch in sub".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    /// Induced 2-norm, computed as the largest singular value.
    pub fn spectral_norm(&self) -> Result<f64> {
        Ok(singular_values(self)?.into_iter().fold(0.0, f64::max))
    }

    fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        (0..self.rows).all(|i| {
            (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= rel_tol * scale)
        })
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lower-triangular Cholesky factor together with the jitter that made it succeed.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    pub factor: Matrix,
    pub jitter: f64,
    /// Number of jitter escalations beyond the caller's starting value.
    pub escalations: usize,
}

impl Cholesky {
    pub fn dim(&self) -> usize {
        self.factor.rows()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        solve_cholesky(&self.factor, b)
    }

    /// Solves `L y = b` only.
    pub fn forward(&self, b: &[f64]) -> Result<Vec<f64>> {
        forward_substitution(&self.factor, b)
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.factor[(i, i)].ln()).sum::<f64>()
    }
}

/// Factors `a + jitter·I = L·Lᵀ`, escalating the jitter tenfold up to
/// [`MAX_JITTER`] when the plain factorization breaks down.
pub fn cholesky_factor(a: &Matrix, jitter: f64) -> Result<Cholesky> {
    if !a.is_square() {
        return Err(NumericsError::DimensionMismatch(format!(
            "cholesky of {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_symmetric(1e-10) {
        return Err(NumericsError::DimensionMismatch("matrix is not symmetric".into()));
    }
    let mut jitter = jitter.max(0.0);
    let mut escalations = 0;
    loop {
        if let Some(factor) = try_cholesky(a, jitter) {
            return Ok(Cholesky {
                factor,
                jitter,
                escalations,
            });
        }
        let next = if jitter == 0.0 { 1e-12 } else { jitter * 10.0 };
        if next > MAX_JITTER * (1.0 + 1e-12) {
            return Err(NumericsError::NotPositiveDefinite { jitter });
        }
        jitter = next;
        escalations += 1;
    }
}

fn try_cholesky(a: &Matrix, jitter: f64) -> Option<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)] + jitter;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(l)
}

fn forward_substitution(l: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = l.rows();
    if b.len() != n || !l.is_square() {
        return Err(NumericsError::DimensionMismatch(format!(
            "triangular solve with {}x{} factor and rhs of length {}",
            l.rows(),
            l.cols(),
            b.len()
        )));
    }
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    Ok(y)
}

/// Solves `(L·Lᵀ) x = b` by forward then backward substitution.
pub fn solve_cholesky(l: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = l.rows();
    let mut x = forward_substitution(l, b)?;
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Ok(x)
}

/// Reusable scratch space for classical fourth-order Runge–Kutta steps.
#[derive(Debug, Clone, Default)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `x` in place by one step of size `h`. The field writes the
    /// derivative of its second argument into its third.
    pub fn step<F>(&mut self, mut f: F, t: f64, x: &mut [f64], h: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = x.len();
        for buf in [&mut self.k1, &mut self.k2, &mut self.k3, &mut self.k4, &mut self.tmp] {
            buf.resize(n, 0.0);
        }
        let half = 0.5 * h;

        f(t, x, &mut self.k1);
        check_finite(&self.k1, t)?;
        for i in 0..n {
            self.tmp[i] = x[i] + half * self.k1[i];
        }
        f(t + half, &self.tmp, &mut self.k2);
        check_finite(&self.k2, t + half)?;
        for i in 0..n {
            self.tmp[i] = x[i] + half * self.k2[i];
        }
        f(t + half, &self.tmp, &mut self.k3);
        check_finite(&self.k3, t + half)?;
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        f(t + h, &self.tmp, &mut self.k4);
        check_finite(&self.k4, t + h)?;

        let sixth = h / 6.0;
        for i in 0..n {
            x[i] += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}

fn check_finite(v: &[f64], t: f64) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(NumericsError::NonFiniteDerivative { t })
    }
}

/// One classical RK4 step of `ẋ = f(t, x)`.
pub fn rk4_step<F>(f: F, t: f64, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let mut out = x.to_vec();
    Rk4::new(x.len()).step(
        |t, x, dx| dx.copy_from_slice(&f(t, x)),
        t,
        &mut out,
        h,
    )?;
    Ok(out)
}

/// Eigenvalues `(re, im)` of a general real square matrix: reduction to upper
/// Hessenberg form followed by Francis double-shift QR.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<(f64, f64)>> {
    if !a.is_square() {
        return Err(NumericsError::DimensionMismatch("eigenvalues of non-square matrix".into()));
    }
    let n = a.rows();
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    hessenberg(&mut h);
    hqr(&mut h)
}

pub fn max_real_eigenvalue(a: &Matrix) -> Result<f64> {
    if a.rows() == 0 {
        return Err(NumericsError::DimensionMismatch("empty matrix".into()));
    }
    Ok(eigenvalues(a)?
        .into_iter()
        .map(|(re, _)| re)
        .fold(f64::NEG_INFINITY, f64::max))
}

// Gaussian elimination with partial pivoting to upper Hessenberg form.
fn hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    if n < 3 {
        return;
    }
    for m in 1..n - 1 {
        let mut x: f64 = 0.0;
        let mut i = m;
        for j in m..n {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                i = j;
            }
        }
        if i != m {
            for j in m - 1..n {
                let tmp = a[i][j];
                a[i][j] = a[m][j];
                a[m][j] = tmp;
            }
            for row in a.iter_mut() {
                row.swap(i, m);
            }
        }
        if x != 0.0 {
            for i in m + 1..n {
                let mut y = a[i][m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i][m - 1] = y;
                    for j in m..n {
                        a[i][j] -= y * a[m][j];
                    }
                    for row in a.iter_mut() {
                        row[m] += y * row[i];
                    }
                }
            }
        }
    }
    for i in 2..n {
        for j in 0..i - 1 {
            a[i][j] = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

// Francis double-shift QR on an upper Hessenberg matrix (destroys `a`).
fn hqr(a: &mut [Vec<f64>]) -> Result<Vec<(f64, f64)>> {
    const MAX_ITS: usize = 60;
    let n = a.len();
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    let mut total_its = 0;
    while nn >= 0 {
        let nu = nn as usize;
        let mut its = 0;
        loop {
            // Find a negligible subdiagonal element.
            let mut l = nu;
            while l >= 1 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() <= f64::EPSILON * s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nu][nu];
            if l == nu {
                wr[nu] = x + t;
                wi[nu] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[nu - 1][nu - 1];
            let mut w = a[nu][nu - 1] * a[nu - 1][nu];
            if l == nu - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    let z = p + sign(z, p);
                    wr[nu - 1] = x + z;
                    wr[nu] = if z != 0.0 { x - w / z } else { x + z };
                    wi[nu - 1] = 0.0;
                    wi[nu] = 0.0;
                } else {
                    wr[nu - 1] = x + p;
                    wr[nu] = x + p;
                    wi[nu - 1] = -z;
                    wi[nu] = z;
                }
                nn -= 2;
                break;
            }
            if its == MAX_ITS {
                return Err(NumericsError::NoConvergence {
                    iterations: total_its,
                });
            }
            if its == 10 || its == 20 {
                // Exceptional shift.
                t += x;
                for (i, row) in a.iter_mut().enumerate().take(nu + 1) {
                    row[i] -= x;
                }
                let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            total_its += 1;

            // Look for two consecutive small subdiagonal elements.
            let mut m = nu - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[m][m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - rr - ss;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }

            // Double QR step on rows l..=nu and columns m..=nu.
            let mut k = m;
            while k < nu {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = if k != nu - 1 { a[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        let mut pp = a[k][j] + q * a[k + 1][j];
                        if k != nu - 1 {
                            pp += r * a[k + 2][j];
                            a[k + 2][j] -= pp * z;
                        }
                        a[k + 1][j] -= pp * y;
                        a[k][j] -= pp * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for row in a.iter_mut().take(mmin + 1).skip(l) {
                        let mut pp = x * row[k] + y * row[k + 1];
                        if k != nu - 1 {
                            pp += z * row[k + 2];
                            row[k + 2] -= pp * r;
                        }
                        row[k + 1] -= pp * q;
                        row[k] -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(wr.into_iter().zip(wi).collect())
}

/// Singular values by one-sided (Hestenes) Jacobi rotations on the columns.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    jacobi_singular_values(a, 0.0)
}

/// One-sided Jacobi. Columns with norm at or below `floor` are left alone:
/// with `floor = 0` small singular values keep relative accuracy, which graded
/// matrices need, but an exactly rank-deficient matrix can then cycle on
/// rounding noise.
fn jacobi_singular_values(a: &Matrix, floor: f64) -> Result<Vec<f64>> {
    const MAX_SWEEPS: usize = 80;
    // Work on the orientation with at least as many rows as columns.
    let work = if a.rows() >= a.cols() { a.clone() } else { a.transpose() };
    let (m, n) = (work.rows(), work.cols());
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| work[(i, j)]).collect()).collect();
    // Columns count as orthogonal once their cosine is at rounding level;
    // a tighter test can cycle on badly scaled matrices.
    let tol = f64::EPSILON * m as f64;
    let negligible = floor * floor;
    for sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if gamma == 0.0 || alpha <= negligible || beta <= negligible || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = sign(1.0, zeta) / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(j);
                for (x, y) in left[i].iter_mut().zip(right[0].iter_mut()) {
                    let xi = *x;
                    let yj = *y;
                    *x = c * xi - s * yj;
                    *y = s * xi + c * yj;
                }
            }
        }
        if !rotated {
            return Ok(cols.iter().map(|c| norm(c)).collect());
        }
        if sweep + 1 == MAX_SWEEPS {
            break;
        }
    }
    Err(NumericsError::NoConvergence {
        iterations: MAX_SWEEPS,
    })
}

/// Popov–Belevitch–Hautus margin: the smallest singular value of
/// `[λI − m, n]` over the eigenvalues `λ` of `m`. Zero exactly when some mode
/// is unreachable. Unlike the controllability-matrix measure it does not
/// decay with the dimension for well-scaled pairs.
pub fn pbh_controllability_margin(m: &Matrix, n: &[f64]) -> Result<f64> {
    let dim = n.len();
    if !m.is_square() || m.rows() != dim || dim == 0 {
        return Err(NumericsError::DimensionMismatch(format!(
            "PBH test of {}x{} matrix with vector of length {dim}",
            m.rows(),
            m.cols()
        )));
    }
    let mut worst = f64::INFINITY;
    for (re, im) in eigenvalues(m)? {
        // Real form of the complex matrix [λI − m, n]:
        // [[Re, −Im], [Im, Re]] has the same singular values, each doubled.
        let (rows, cols) = if im == 0.0 { (dim, dim + 1) } else { (2 * dim, 2 * (dim + 1)) };
        let mut a = Matrix::zeros(rows, cols);
        for i in 0..dim {
            for j in 0..dim {
                a[(i, j)] = -m[(i, j)];
            }
            a[(i, i)] += re;
            a[(i, dim)] = n[i];
            if im != 0.0 {
                let (r0, c0) = (dim, dim + 1);
                for j in 0..dim {
                    a[(r0 + i, c0 + j)] = -m[(i, j)];
                }
                a[(r0 + i, c0 + i)] += re;
                a[(r0 + i, c0 + dim)] = n[i];
                a[(i, c0 + i)] = -im;
                a[(r0 + i, i)] = im;
            }
        }
        let floor = f64::EPSILON * a.frobenius_norm();
        let smallest = jacobi_singular_values(&a, floor)?.into_iter().fold(f64::INFINITY, f64::min);
        worst = worst.min(smallest);
    }
    Ok(worst)
}

/// Smallest singular value of the controllability matrix `[n, m·n, …, m^{d−1}·n]`.
pub fn controllability_min_singular_value(m: &Matrix, n: &[f64]) -> Result<f64> {
    let dim = n.len();
    if !m.is_square() || m.rows() != dim {
        return Err(NumericsError::DimensionMismatch(format!(
            "controllability of {}x{} matrix with vector of length {dim}",
            m.rows(),
            m.cols()
        )));
    }
    if dim == 0 {
        return Err(NumericsError::DimensionMismatch("empty system".into()));
    }
    let mut c = Matrix::zeros(dim, dim);
    let mut v = n.to_vec();
    for k in 0..dim {
        for i in 0..dim {
            c[(i, k)] = v[i];
        }
        v = m.mul_vec(&v)?;
    }
    Ok(singular_values(&c)?.into_iter().fold(f64::INFINITY, f64::min))
}
