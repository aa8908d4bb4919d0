//! Dense complex matrix kernel.
//!
//! Everything here is small and dense: the verification workloads never go
//! beyond a few hundred rows, so the routines favour clarity over blocking.
//! The heavy lifting (SVD, Hermitian eigendecomposition) is delegated to
//! `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Regularization threshold below which a Gram matrix is rejected.
pub const EPS_PD: f64 = 1e-12;

/// Default cap on the number of entries a Kronecker product may produce.
pub const DEFAULT_KRON_LIMIT: usize = 1 << 22;

const HERMITIAN_TOL: f64 = 1e-12;

/// Dense complex matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix(DMatrix<C64>);

impl CMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Input(format!("matrix dimensions must be positive, got {rows}x{cols}")));
        }
        if entries.len() != rows * cols {
            return Err(Error::Input(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, &entries))
    }

    /// Wraps an existing `nalgebra` matrix after validating it.
    pub fn from_dmatrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::Input("matrix dimensions must be positive".into()));
        }
        if let Some((idx, z)) = m.iter().enumerate().find(|(_, z)| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Input(format!("non-finite entry {z} at storage index {idx}")));
        }
        Ok(CMatrix(m))
    }

    /// Wraps a matrix produced by internal arithmetic on finite inputs.
    pub(crate) fn wrap(m: DMatrix<C64>) -> Self {
        debug_assert!(m.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        CMatrix(m)
    }

    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::from_row_major(rows, cols, entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        CMatrix(DMatrix::identity(n, n))
    }

    /// Matrix unit `e_{ij}` of the given shape (zero-based indices).
    pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(rows, cols);
        m[(i, j)] = C64::new(1.0, 0.0);
        CMatrix(m)
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        CMatrix(m)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.0
    }

    /// Entries in row-major order.
    pub fn row_major(&self) -> Vec<C64> {
        let (r, c) = self.0.shape();
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        CMatrix(&self.0 * s)
    }

    pub fn add(&self, other: &CMatrix) -> Result<Self> {
        same_shape(self, other)?;
        Ok(CMatrix(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &CMatrix) -> Result<Self> {
        same_shape(self, other)?;
        Ok(CMatrix(&self.0 - &other.0))
    }

    pub fn matmul(&self, other: &CMatrix) -> Result<Self> {
        if self.cols() != other.rows() {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        Ok(CMatrix(&self.0 * &other.0))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Matrix with independent standard complex Gaussian entries
    /// (real and imaginary parts of variance 1/2).
    pub fn random_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        CMatrix(DMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng)))
    }
}

fn same_shape(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.0.shape() != b.0.shape() {
        return Err(Error::Dimension(format!(
            "shape {:?} does not match {:?}",
            a.0.shape(),
            b.0.shape()
        )));
    }
    Ok(())
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Largest singular value.
pub fn operator_norm(a: &CMatrix) -> f64 {
    op_norm_dm(&a.0)
}

pub(crate) fn op_norm_dm(a: &DMatrix<C64>) -> f64 {
    if a.nrows() == 1 || a.ncols() == 1 {
        return a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    }
    a.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Singular values in decreasing order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = a.0.clone().singular_values().iter().cloned().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Sum of singular values.
pub fn trace_norm(a: &CMatrix) -> f64 {
    trace_norm_dm(&a.0)
}

pub(crate) fn trace_norm_dm(a: &DMatrix<C64>) -> f64 {
    if a.nrows() == 1 || a.ncols() == 1 {
        return a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    }
    a.clone().singular_values().iter().sum()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    kron_with_limit(a, b, DEFAULT_KRON_LIMIT)
}

pub fn kron_with_limit(a: &CMatrix, b: &CMatrix, max_entries: usize) -> Result<CMatrix> {
    let rows = a.rows().checked_mul(b.rows());
    let cols = a.cols().checked_mul(b.cols());
    match (rows, cols) {
        (Some(r), Some(c)) if r.checked_mul(c).is_some_and(|n| n <= max_entries) => {
            Ok(CMatrix(a.0.kronecker(&b.0)))
        }
        _ => Err(Error::Resource(format!(
            "kronecker product of {}x{} and {}x{} exceeds {max_entries} entries",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        ))),
    }
}

pub fn conj(a: &CMatrix) -> CMatrix {
    CMatrix(a.0.map(|z| z.conj()))
}

pub fn transpose(a: &CMatrix) -> CMatrix {
    CMatrix(a.0.transpose())
}

pub fn adjoint(a: &CMatrix) -> CMatrix {
    CMatrix(a.0.adjoint())
}

/// Hermitian positive definite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianPD(CMatrix);

impl HermitianPD {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::Dimension(format!("Gram matrix must be square, got {}x{}", m.rows(), m.cols())));
        }
        let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
        let asym = (&m.0 - m.0.adjoint()).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if asym > HERMITIAN_TOL * scale {
            return Err(Error::Input(format!("matrix is not Hermitian (relative asymmetry {:e})", asym / scale)));
        }
        let h = hermitian_part(&m.0);
        let min_eig = SymmetricEigen::new(h.clone()).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig <= 0.0 {
            return Err(Error::Input(format!("matrix is not positive definite (smallest eigenvalue {min_eig:e})")));
        }
        Ok(HermitianPD(CMatrix(h)))
    }

    pub fn identity(n: usize) -> Self {
        HermitianPD(CMatrix::identity(n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(CMatrix::from_diagonal(diag))
    }

    /// Random well-conditioned Gram matrix `a a* + 0.1·I` with Gaussian `a`.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let a = CMatrix::random_gaussian(dim, dim, rng);
        let g = &a.0 * a.0.adjoint() + DMatrix::<C64>::identity(dim, dim).scale(0.1);
        HermitianPD(CMatrix(hermitian_part(&g)))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    /// Eigenvalues (ascending) and the matching orthonormal eigenvectors as columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<C64>) {
        let eig = SymmetricEigen::new(self.0 .0.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
        let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = DMatrix::from_fn(self.dim(), self.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
        (vals, vecs)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().0[0]
    }

    /// The quadratic form `(x* g x)^{1/2}`.
    pub fn norm_of(&self, x: &[C64]) -> f64 {
        quad_form(&self.0 .0, x).max(0.0).sqrt()
    }

    /// `m* g m` for a square invertible `m`.
    pub fn congruence(&self, m: &CMatrix) -> Result<HermitianPD> {
        if m.rows() != self.dim() || m.cols() != self.dim() {
            return Err(Error::Dimension("congruence matrix must match the Gram dimension".into()));
        }
        let g = m.0.adjoint() * &self.0 .0 * &m.0;
        HermitianPD::new(CMatrix::wrap(hermitian_part(&g)))
    }

    pub fn inverse(&self) -> Result<HermitianPD> {
        fractional_power_signed(self, -1.0, EPS_PD)
    }
}

pub(crate) fn quad_form(g: &DMatrix<C64>, x: &[C64]) -> f64 {
    let n = x.len();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        let mut row = C64::new(0.0, 0.0);
        for j in 0..n {
            row += g[(i, j)] * x[j];
        }
        acc += x[i].conj() * row;
    }
    acc.re
}

fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()).scale(0.5)
}

/// `g^t` for `t ∈ [0, 1]`, computed through the eigendecomposition.
pub fn fractional_power(g: &HermitianPD, t: f64) -> Result<HermitianPD> {
    fractional_power_with_eps(g, t, EPS_PD)
}

pub fn fractional_power_with_eps(g: &HermitianPD, t: f64, eps: f64) -> Result<HermitianPD> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Input(format!("exponent must lie in [0, 1], got {t}")));
    }
    fractional_power_signed(g, t, eps)
}

fn fractional_power_signed(g: &HermitianPD, t: f64, eps: f64) -> Result<HermitianPD> {
    let (vals, vecs) = g.eigen();
    let max = vals.last().cloned().unwrap_or(0.0).abs().max(1.0);
    if vals[0] <= eps * max {
        return Err(Error::NearSingular { min_eig: vals[0], threshold: eps * max });
    }
    let n = g.dim();
    let d = DMatrix::from_fn(n, n, |i, j| if i == j { C64::new(vals[i].powf(t), 0.0) } else { C64::new(0.0, 0.0) });
    let m = &vecs * d * vecs.adjoint();
    Ok(HermitianPD(CMatrix(hermitian_part(&m))))
}

/// The θ-weighted geometric mean `g0^{1/2} (g0^{-1/2} g1 g0^{-1/2})^θ g0^{1/2}`.
pub fn geometric_mean(g0: &HermitianPD, g1: &HermitianPD, theta: f64) -> Result<HermitianPD> {
    if g0.dim() != g1.dim() {
        return Err(Error::Dimension(format!("Gram dimensions {} and {} differ", g0.dim(), g1.dim())));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Input(format!("θ must lie in (0, 1), got {theta}")));
    }
    let half = fractional_power_signed(g0, 0.5, EPS_PD)?;
    let inv_half = fractional_power_signed(g0, -0.5, EPS_PD)?;
    let inner = &inv_half.0 .0 * &g1.0 .0 * &inv_half.0 .0;
    let inner = HermitianPD(CMatrix(hermitian_part(&inner)));
    let powered = fractional_power_signed(&inner, theta, 0.0)?;
    let m = &half.0 .0 * &powered.0 .0 * &half.0 .0;
    Ok(HermitianPD(CMatrix(hermitian_part(&m))))
}
