//! Dense linear algebra for the small dimensions bandit problems live in.
//!
//! Everything here is sized at run time but assumes `d` is small (tens at
//! most): matrices are stored densely and factorizations are the textbook
//! O(d³) ones. Positive-definite systems are always solved through a
//! Cholesky factor; nothing in the crate forms an explicit inverse.

use std::fmt;
use std::ops::Index;

use crate::error::{Error, Result};

/// Relative tolerance used when checking a matrix for symmetry.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A finite vector in ℝᵈ, d ≥ 1.
#[derive(Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::usage("vector must have at least one component"));
        }
        if let Some(i) = components.iter().position(|c| !c.is_finite()) {
            return Err(Error::domain(format!("vector component {i} is not finite")));
        }
        Ok(Vector(components))
    }

    pub fn zeros(d: usize) -> Self {
        assert!(d >= 1, "dimension must be positive");
        Vector(vec![0.0; d])
    }

    /// The `i`-th standard basis vector of ℝᵈ.
    pub fn unit(d: usize, i: usize) -> Self {
        assert!(i < d, "basis index {i} out of range for dimension {d}");
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Vector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn scaled(&self, k: f64) -> Vector {
        Vector(self.0.iter().map(|c| c * k).collect())
    }

    /// `self / ‖self‖₂`, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Vector> {
        let n = self.norm();
        if n == 0.0 {
            None
        } else {
            Some(self.scaled(1.0 / n))
        }
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub(crate) fn axpy(&mut self, alpha: f64, x: &Vector) {
        for (s, xi) in self.0.iter_mut().zip(&x.0) {
            *s += alpha * xi;
        }
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

/// A symmetric d×d matrix stored densely in row-major order.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, k: f64) -> Self {
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = k;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = SymMatrix::zeros(n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    fn zeros(n: usize) -> Self {
        assert!(n >= 1, "dimension must be positive");
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Builds a matrix from rows, rejecting anything non-square, non-finite
    /// or asymmetric beyond [`SYMMETRY_TOL`]. The stored matrix is the exact
    /// symmetrization `(A + Aᵀ)/2`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::usage("matrix must have at least one row"));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::usage("matrix must be square"));
        }
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (rows[i][j], rows[j][i]);
                if !a.is_finite() {
                    return Err(Error::domain(format!("entry ({i},{j}) is not finite")));
                }
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(1.0) {
                    return Err(Error::domain(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
                m.data[i * n + j] = 0.5 * (a + b);
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn mul_vec(&self, x: &Vector) -> Vector {
        debug_assert_eq!(self.n, x.dim());
        Vector(
            self.data
                .chunks(self.n)
                .map(|row| row.iter().zip(x.as_slice()).map(|(a, b)| a * b).sum())
                .collect(),
        )
    }

    /// `k` if this matrix is exactly `k·I`.
    pub fn as_scaled_identity(&self) -> Option<f64> {
        let k = self.get(0, 0);
        for i in 0..self.n {
            for j in 0..self.n {
                let expect = if i == j { k } else { 0.0 };
                if self.get(i, j) != expect {
                    return None;
                }
            }
        }
        Some(k)
    }

    /// In-place `self += x xᵀ`.
    pub fn add_outer(&mut self, x: &Vector) -> Result<()> {
        check_dims(self.n, x.dim())?;
        let n = self.n;
        let xs = x.as_slice();
        for i in 0..n {
            for j in 0..n {
                self.data[i * n + j] += xs[i] * xs[j];
            }
        }
        Ok(())
    }

    /// Returns `self + x xᵀ`.
    pub fn rank_one_update(&self, x: &Vector) -> Result<SymMatrix> {
        let mut out = self.clone();
        out.add_outer(x)?;
        Ok(out)
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        Cholesky::factor(self)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        symmetric_eigenvalues(self)
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues().last().expect("nonempty")
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues()[0]
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.data.chunks(self.n)).finish()
    }
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::usage(format!(
            "dimension mismatch: expected {expected}, got {got}"
        )));
    }
    Ok(())
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Fails with a domain error when a pivot is not comfortably positive,
    /// i.e. when the matrix is not positive definite to working precision.
    pub fn factor(a: &SymMatrix) -> Result<Self> {
        let n = a.n;
        let scale = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
        let floor = n as f64 * f64::EPSILON * scale;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut pivot = a.get(j, j);
            for k in 0..j {
                pivot -= l[j * n + k] * l[j * n + k];
            }
            if !(pivot > floor) || !pivot.is_finite() {
                return Err(Error::domain(format!(
                    "matrix is not positive definite (pivot {j} = {pivot:e})"
                )));
            }
            let ljj = pivot.sqrt();
            l[j * n + j] = ljj;
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / ljj;
            }
        }
        Ok(Cholesky { n, l })
    }

    pub fn solve(&self, b: &Vector) -> Result<Vector> {
        check_dims(self.n, b.dim())?;
        let n = self.n;
        let mut z = b.as_slice().to_vec();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s -= self.l[i * n + k] * z[k];
            }
            z[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * z[k];
            }
            z[i] = s / self.l[i * n + i];
        }
        Ok(Vector(z))
    }

    /// `‖Lᵀx‖₂²`, which equals `xᵀAx`.
    pub fn quad_form(&self, x: &Vector) -> Result<f64> {
        check_dims(self.n, x.dim())?;
        let n = self.n;
        let xs = x.as_slice();
        Ok((0..n)
            .map(|j| {
                let v: f64 = (j..n).map(|i| self.l[i * n + j] * xs[i]).sum();
                v * v
            })
            .sum())
    }

    /// `xᵀA⁻¹x`.
    pub fn quad_form_inverse(&self, x: &Vector) -> Result<f64> {
        Ok(self.solve(x)?.dot(x))
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n)
            .map(|i| self.l[i * self.n + i].ln())
            .sum::<f64>()
    }
}

/// `√(xᵀAx)` for positive-definite `A`.
pub fn weighted_norm(x: &Vector, a: &SymMatrix) -> Result<f64> {
    check_dims(a.dim(), x.dim())?;
    Ok(a.cholesky()?.quad_form(x)?.sqrt())
}

/// Solves `W z = b` for positive-definite `W`.
pub fn solve_pd(w: &SymMatrix, b: &Vector) -> Result<Vector> {
    check_dims(w.dim(), b.dim())?;
    w.cholesky()?.solve(b)
}

/// Completes `v / ‖v‖₂` to an orthonormal basis of ℝᵈ.
///
/// The basis is the set of rows of the Householder reflector exchanging `e₁`
/// and the unit direction of `v`, with the first row sign-fixed so that the
/// first basis vector is exactly `v / ‖v‖₂`. The result is a deterministic
/// function of `v`.
pub fn complete_orthonormal_basis(v: &Vector) -> Result<Vec<Vector>> {
    let d = v.dim();
    let dir = v
        .normalized()
        .ok_or_else(|| Error::domain("cannot complete a basis from the zero vector"))?;
    // u = dir + sign(dir₀)·e₁ avoids cancellation; H = I - 2uuᵀ/‖u‖² then
    // maps e₁ to -sign(dir₀)·dir.
    let sign = if dir[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut u = dir.as_slice().to_vec();
    u[0] += sign;
    let u_sq: f64 = u.iter().map(|c| c * c).sum();
    let mut basis = Vec::with_capacity(d);
    basis.push(dir);
    for i in 1..d {
        let k = 2.0 * u[i] / u_sq;
        let row = (0..d)
            .map(|j| if i == j { 1.0 } else { 0.0 } - k * u[j])
            .collect();
        basis.push(Vector(row));
    }
    Ok(basis)
}

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
pub fn symmetric_eigenvalues(a: &SymMatrix) -> Vec<f64> {
    let n = a.n;
    let mut m = a.data.clone();
    let frob: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * frob || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}
