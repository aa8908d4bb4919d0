//! Norm oracles on flat complex coefficient vectors.
//!
//! A level-(k, l) tuple of n matrices is flattened as
//! `index = i·k·l + r·l + c` (matrix `i`, row `r`, column `c`).
//!
//! Subgradients follow the convention `Re⟨g, v⟩ = N(v)` with
//! `⟨g, v⟩ = Σ conj(gᵢ) vᵢ`, so the real gradient of `N` is the real
//! embedding of `g`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::linalg::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// A norm on `ℂ^dim` with first-order information.
pub trait NormOracle: Send + Sync {
    fn dim(&self) -> usize;

    fn norm(&self, v: &[C64]) -> f64;

    /// Value and one subgradient.
    fn subgradient(&self, v: &[C64]) -> (f64, Vec<C64>);

    /// Smooth surrogate converging to the norm as `p → ∞`, with its gradient.
    fn smoothed(&self, v: &[C64], _p: f64) -> (f64, Vec<C64>) {
        self.subgradient(v)
    }

    fn describe(&self) -> String;
}

pub type SharedOracle = Arc<dyn NormOracle>;

/// Which unitarily invariant norm is applied to the embedded matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixNormKind {
    /// Largest singular value.
    Operator,
    /// Sum of singular values.
    Trace,
}

/// `v ↦ ‖L(v)‖` where `L` places (weighted) coordinates into a fixed matrix shape.
#[derive(Clone, Debug)]
pub struct EmbeddedNorm {
    dim: usize,
    rows: usize,
    cols: usize,
    /// `(flat index, row, col, coefficient)`: `A[row, col] += coefficient · v[index]`.
    terms: Vec<(usize, usize, usize, C64)>,
    kind: MatrixNormKind,
    label: String,
}

impl EmbeddedNorm {
    pub fn new(
        dim: usize,
        rows: usize,
        cols: usize,
        terms: Vec<(usize, usize, usize, C64)>,
        kind: MatrixNormKind,
        label: impl Into<String>,
    ) -> Self {
        EmbeddedNorm { dim, rows, cols, terms, kind, label: label.into() }
    }

    /// Block row `[a₁ … aₙ]` of a level-(k, l) tuple.
    pub fn row(n: usize, k: usize, l: usize, kind: MatrixNormKind) -> Self {
        let mut terms = Vec::with_capacity(n * k * l);
        for i in 0..n {
            for r in 0..k {
                for c in 0..l {
                    terms.push((i * k * l + r * l + c, r, i * l + c, C64::new(1.0, 0.0)));
                }
            }
        }
        Self::new(n * k * l, k, n * l, terms, kind, format!("row(n={n}) level {k}x{l}"))
    }

    /// Block column `[a₁; …; aₙ]` of a level-(k, l) tuple.
    pub fn column(n: usize, k: usize, l: usize, kind: MatrixNormKind) -> Self {
        let mut terms = Vec::with_capacity(n * k * l);
        for i in 0..n {
            for r in 0..k {
                for c in 0..l {
                    terms.push((i * k * l + r * l + c, i * k + r, c, C64::new(1.0, 0.0)));
                }
            }
        }
        Self::new(n * k * l, n * k, l, terms, kind, format!("column(n={n}) level {k}x{l}"))
    }

    /// `Σᵢ bᵢ ⊗ aᵢ` for a concrete basis `(bᵢ)` of `d₁×d₂` matrices.
    pub fn concrete(basis: &[DMatrix<C64>], k: usize, l: usize, kind: MatrixNormKind) -> Self {
        let n = basis.len();
        let (d1, d2) = basis[0].shape();
        let mut terms = Vec::new();
        for (i, b) in basis.iter().enumerate() {
            for p in 0..d1 {
                for q in 0..d2 {
                    let coef = b[(p, q)];
                    if coef == ZERO {
                        continue;
                    }
                    for r in 0..k {
                        for c in 0..l {
                            terms.push((i * k * l + r * l + c, p * k + r, q * l + c, coef));
                        }
                    }
                }
            }
        }
        Self::new(n * k * l, d1 * k, d2 * l, terms, kind, format!("concrete(n={n}, {d1}x{d2}) level {k}x{l}"))
    }

    pub fn kind(&self) -> MatrixNormKind {
        self.kind
    }

    pub fn embed(&self, v: &[C64]) -> DMatrix<C64> {
        let mut a = DMatrix::zeros(self.rows, self.cols);
        for &(idx, r, c, coef) in &self.terms {
            a[(r, c)] += coef * v[idx];
        }
        a
    }

    fn pull_back(&self, g: &DMatrix<C64>) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim];
        for &(idx, r, c, coef) in &self.terms {
            out[idx] += coef.conj() * g[(r, c)];
        }
        out
    }

    fn is_vector(&self) -> bool {
        self.rows == 1 || self.cols == 1
    }
}

impl NormOracle for EmbeddedNorm {
    fn dim(&self) -> usize {
        self.dim
    }

    fn norm(&self, v: &[C64]) -> f64 {
        let a = self.embed(v);
        if self.is_vector() {
            return frob(&a);
        }
        let s = a.singular_values();
        match self.kind {
            MatrixNormKind::Operator => s.iter().cloned().fold(0.0, f64::max),
            MatrixNormKind::Trace => s.iter().sum(),
        }
    }

    fn subgradient(&self, v: &[C64]) -> (f64, Vec<C64>) {
        let a = self.embed(v);
        if self.is_vector() {
            let n = frob(&a);
            let g = if n > 0.0 { a.unscale(n) } else { DMatrix::zeros(self.rows, self.cols) };
            return (n, self.pull_back(&g));
        }
        let (value, g) = match self.kind {
            MatrixNormKind::Operator => operator_subgradient(&a),
            MatrixNormKind::Trace => trace_subgradient(&a),
        };
        (value, self.pull_back(&g))
    }

    fn smoothed(&self, v: &[C64], p: f64) -> (f64, Vec<C64>) {
        let a = self.embed(v);
        if self.is_vector() {
            return self.subgradient(v);
        }
        let exponent = match self.kind {
            MatrixNormKind::Operator => p,
            MatrixNormKind::Trace => p / (p - 1.0),
        };
        let (value, g) = schatten_gradient(&a, exponent);
        (value, self.pull_back(&g))
    }

    fn describe(&self) -> String {
        let k = match self.kind {
            MatrixNormKind::Operator => "operator",
            MatrixNormKind::Trace => "trace",
        };
        format!("{} [{k} norm]", self.label)
    }
}

fn frob(a: &DMatrix<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Operator norm and the dyad `u v*` of the top singular pair.
pub(crate) fn operator_subgradient(a: &DMatrix<C64>) -> (f64, DMatrix<C64>) {
    let svd = a.clone().svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let (imax, smax) = svd
        .singular_values
        .iter()
        .cloned()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc });
    let g = u.column(imax) * vt.row(imax);
    (smax.max(0.0), g)
}

/// Trace norm and the partial isometry `U V*` on the numerical support.
pub(crate) fn trace_subgradient(a: &DMatrix<C64>) -> (f64, DMatrix<C64>) {
    let svd = a.clone().svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut g = DMatrix::zeros(a.nrows(), a.ncols());
    let mut total = 0.0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        total += s;
        if s > 1e-13 * smax {
            g += u.column(i) * vt.row(i);
        }
    }
    (total, g)
}

/// Schatten-`p` norm and its gradient `U diag((σ/‖a‖_p)^{p-1}) V*`.
pub(crate) fn schatten_gradient(a: &DMatrix<C64>, p: f64) -> (f64, DMatrix<C64>) {
    let svd = a.clone().svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax <= 0.0 {
        return (0.0, DMatrix::zeros(a.nrows(), a.ncols()));
    }
    let sum: f64 = svd.singular_values.iter().map(|&s| (s / smax).powf(p)).sum();
    let value = smax * sum.powf(1.0 / p);
    let mut g = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let w = (s / value).powf(p - 1.0);
        if w > 1e-300 {
            g += (u.column(i) * vt.row(i)).scale(w);
        }
    }
    (value, g)
}

/// `‖Σᵢ aᵢ ⊗ conj(aᵢ)‖^{1/2}` at level (k, l).
#[derive(Clone, Debug)]
pub struct OhNorm {
    n: usize,
    k: usize,
    l: usize,
}

impl OhNorm {
    pub fn new(n: usize, k: usize, l: usize) -> Self {
        OhNorm { n, k, l }
    }

    fn gram(&self, v: &[C64]) -> DMatrix<C64> {
        let (k, l) = (self.k, self.l);
        let mut m = DMatrix::zeros(k * k, l * l);
        for i in 0..self.n {
            let a = &v[i * k * l..(i + 1) * k * l];
            for p in 0..k {
                for r in 0..l {
                    let apr = a[p * l + r];
                    if apr == ZERO {
                        continue;
                    }
                    for pp in 0..k {
                        for rr in 0..l {
                            m[(p * k + pp, r * l + rr)] += apr * a[pp * l + rr].conj();
                        }
                    }
                }
            }
        }
        m
    }

    /// Gradient of `a ↦ Re⟨W, Σ aᵢ⊗āᵢ⟩` for a fixed `W`.
    fn pull_back(&self, v: &[C64], w: &DMatrix<C64>) -> Vec<C64> {
        let (k, l) = (self.k, self.l);
        let mut out = vec![ZERO; v.len()];
        for i in 0..self.n {
            let off = i * k * l;
            let a = &v[off..off + k * l];
            for p in 0..k {
                for r in 0..l {
                    let mut g1 = ZERO;
                    let mut g2 = ZERO;
                    for pp in 0..k {
                        for rr in 0..l {
                            g1 += w[(p * k + pp, r * l + rr)] * a[pp * l + rr];
                            g2 += w[(pp * k + p, rr * l + r)].conj() * a[pp * l + rr];
                        }
                    }
                    out[off + p * l + r] = g1 + g2;
                }
            }
        }
        out
    }

    fn finish(&self, v: &[C64], s: f64, w: DMatrix<C64>) -> (f64, Vec<C64>) {
        let value = s.max(0.0).sqrt();
        if value <= 0.0 {
            return (0.0, vec![ZERO; v.len()]);
        }
        let mut g = self.pull_back(v, &w);
        let scale = 1.0 / (2.0 * value);
        g.iter_mut().for_each(|z| *z *= scale);
        (value, g)
    }
}

impl NormOracle for OhNorm {
    fn dim(&self) -> usize {
        self.n * self.k * self.l
    }

    fn norm(&self, v: &[C64]) -> f64 {
        let m = self.gram(v);
        crate::linalg::op_norm_dm(&m).sqrt()
    }

    fn subgradient(&self, v: &[C64]) -> (f64, Vec<C64>) {
        let m = self.gram(v);
        let (s, w) = if m.nrows() == 1 || m.ncols() == 1 {
            let f = frob(&m);
            (f, if f > 0.0 { m.unscale(f) } else { m.clone() })
        } else {
            operator_subgradient(&m)
        };
        self.finish(v, s, w)
    }

    fn smoothed(&self, v: &[C64], p: f64) -> (f64, Vec<C64>) {
        let m = self.gram(v);
        if m.nrows() == 1 || m.ncols() == 1 {
            return self.subgradient(v);
        }
        let (s, w) = schatten_gradient(&m, p);
        self.finish(v, s, w)
    }

    fn describe(&self) -> String {
        format!("oh(n={}) level {}x{}", self.n, self.k, self.l)
    }
}

/// Hilbertian norm `(v* G v)^{1/2}`.
#[derive(Clone, Debug)]
pub struct HilbertianNorm {
    gram: DMatrix<C64>,
    label: String,
}

impl HilbertianNorm {
    pub fn new(gram: DMatrix<C64>, label: impl Into<String>) -> Self {
        HilbertianNorm { gram, label: label.into() }
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim), format!("euclidean(dim={dim})"))
    }
}

impl NormOracle for HilbertianNorm {
    fn dim(&self) -> usize {
        self.gram.nrows()
    }

    fn norm(&self, v: &[C64]) -> f64 {
        crate::linalg::quad_form(&self.gram, v).max(0.0).sqrt()
    }

    fn subgradient(&self, v: &[C64]) -> (f64, Vec<C64>) {
        let n = self.dim();
        let value = self.norm(v);
        if value <= 0.0 {
            return (0.0, vec![ZERO; n]);
        }
        let g = (0..n)
            .map(|i| (0..n).map(|j| self.gram[(i, j)] * v[j]).sum::<C64>() / value)
            .collect();
        (value, g)
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

/// `ℓ∞` norm on coefficients.
#[derive(Clone, Debug)]
pub struct LInfNorm(pub usize);

impl NormOracle for LInfNorm {
    fn dim(&self) -> usize {
        self.0
    }

    fn norm(&self, v: &[C64]) -> f64 {
        v.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn subgradient(&self, v: &[C64]) -> (f64, Vec<C64>) {
        let mut g = vec![ZERO; v.len()];
        let (imax, m) = v.iter().enumerate().fold((0, 0.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
        if m > 0.0 {
            g[imax] = v[imax] / m;
        }
        (m, g)
    }

    fn smoothed(&self, v: &[C64], p: f64) -> (f64, Vec<C64>) {
        lp_gradient(v, p)
    }

    fn describe(&self) -> String {
        format!("linf(dim={})", self.0)
    }
}

/// `ℓ₁` norm on coefficients.
#[derive(Clone, Debug)]
pub struct L1Norm(pub usize);

impl NormOracle for L1Norm {
    fn dim(&self) -> usize {
        self.0
    }

    fn norm(&self, v: &[C64]) -> f64 {
        v.iter().map(|z| z.norm()).sum()
    }

    fn subgradient(&self, v: &[C64]) -> (f64, Vec<C64>) {
        let g = v.iter().map(|z| if z.norm() > 0.0 { z / z.norm() } else { ZERO }).collect();
        (self.norm(v), g)
    }

    fn smoothed(&self, v: &[C64], p: f64) -> (f64, Vec<C64>) {
        lp_gradient(v, p / (p - 1.0))
    }

    fn describe(&self) -> String {
        format!("l1(dim={})", self.0)
    }
}

fn lp_gradient(v: &[C64], p: f64) -> (f64, Vec<C64>) {
    let m = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if m <= 0.0 {
        return (0.0, vec![ZERO; v.len()]);
    }
    let value = m * v.iter().map(|z| (z.norm() / m).powf(p)).sum::<f64>().powf(1.0 / p);
    let g = v
        .iter()
        .map(|z| {
            let a = z.norm();
            if a > 0.0 {
                (z / a) * (a / value).powf(p - 1.0)
            } else {
                ZERO
            }
        })
        .collect();
    (value, g)
}

/// `max(N₀, N₁)`.
pub struct MaxNorm {
    pub first: SharedOracle,
    pub second: SharedOracle,
}

impl NormOracle for MaxNorm {
    fn dim(&self) -> usize {
        self.first.dim()
    }

    fn norm(&self, v: &[C64]) -> f64 {
        self.first.norm(v).max(self.second.norm(v))
    }

    fn subgradient(&self, v: &[C64]) -> (f64, Vec<C64>) {
        let a = self.first.subgradient(v);
        let b = self.second.subgradient(v);
        if a.0 >= b.0 {
            a
        } else {
            b
        }
    }

    fn smoothed(&self, v: &[C64], p: f64) -> (f64, Vec<C64>) {
        let (a, ga) = self.first.smoothed(v, p);
        let (b, gb) = self.second.smoothed(v, p);
        let m = a.max(b);
        if m <= 0.0 {
            return (0.0, ga);
        }
        let value = m * ((a / m).powf(p) + (b / m).powf(p)).powf(1.0 / p);
        let (wa, wb) = ((a / value).powf(p - 1.0), (b / value).powf(p - 1.0));
        let g = ga.iter().zip(&gb).map(|(x, y)| x * wa + y * wb).collect();
        (value, g)
    }

    fn describe(&self) -> String {
        format!("max({}, {})", self.first.describe(), self.second.describe())
    }
}

/// `v ↦ N(v ∘ π)`: the inner norm applied to permuted coordinates,
/// `inner_input[j] = v[perm[j]]`.
pub struct PermutedNorm {
    pub inner: SharedOracle,
    pub perm: Vec<usize>,
    pub label: String,
}

impl PermutedNorm {
    fn gather(&self, v: &[C64]) -> Vec<C64> {
        self.perm.iter().map(|&i| v[i]).collect()
    }

    fn scatter(&self, g: Vec<C64>) -> Vec<C64> {
        let mut out = vec![ZERO; g.len()];
        for (j, &i) in self.perm.iter().enumerate() {
            out[i] = g[j];
        }
        out
    }
}

impl NormOracle for PermutedNorm {
    fn dim(&self) -> usize {
        self.perm.len()
    }

    fn norm(&self, v: &[C64]) -> f64 {
        self.inner.norm(&self.gather(v))
    }

    fn subgradient(&self, v: &[C64]) -> (f64, Vec<C64>) {
        let (value, g) = self.inner.subgradient(&self.gather(v));
        (value, self.scatter(g))
    }

    fn smoothed(&self, v: &[C64], p: f64) -> (f64, Vec<C64>) {
        let (value, g) = self.inner.smoothed(&self.gather(v), p);
        (value, self.scatter(g))
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

/// Index map sending a level-(k, l) tuple to the level-(l, k) tuple of transposes.
pub fn transpose_permutation(n: usize, k: usize, l: usize) -> Vec<usize> {
    // entry (i, c, r) of the transposed tuple (shape l×k) reads entry (i, r, c) of the original
    let mut perm = Vec::with_capacity(n * k * l);
    for i in 0..n {
        for c in 0..l {
            for r in 0..k {
                perm.push(i * k * l + r * l + c);
            }
        }
    }
    perm
}
