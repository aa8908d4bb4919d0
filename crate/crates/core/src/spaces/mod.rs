//! Matrix-level norms of finite-dimensional operator space structures.
//!
//! An operator space of dimension `n` is represented by its norm oracle at
//! every matrix level `(k, l)`: the norm of `Σᵢ Tᵢ ⊗ aᵢ` where `(Tᵢ)` is the
//! distinguished basis of the structure and `aᵢ` are `k×l` matrices.

pub mod oracle;
mod sum;

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
pub use oracle::{
    EmbeddedNorm, HilbertianNorm, L1Norm, LInfNorm, MatrixNormKind, MaxNorm, NormOracle, OhNorm, PermutedNorm,
    SharedOracle,
};
pub use sum::{split_minimize, SumSplit};

/// Largest permitted `n·k·l` for a single tuple.
pub const MAX_TUPLE_ENTRIES: usize = 4096;

/// An ordered family of `n` complex `k×l` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixTuple {
    k: usize,
    l: usize,
    mats: Vec<CMatrix>,
}

impl MatrixTuple {
    pub fn new(mats: Vec<CMatrix>) -> Result<Self> {
        let first = mats.first().ok_or_else(|| Error::Input("a tuple needs at least one matrix".into()))?;
        let (k, l) = (first.rows(), first.cols());
        if let Some((i, m)) = mats.iter().enumerate().find(|(_, m)| m.rows() != k || m.cols() != l) {
            return Err(Error::Dimension(format!(
                "matrix {i} is {}x{} but the tuple level is {k}x{l}",
                m.rows(),
                m.cols()
            )));
        }
        if mats.len() * k * l > MAX_TUPLE_ENTRIES {
            return Err(Error::Resource(format!(
                "tuple with n·k·l = {} exceeds the cap {MAX_TUPLE_ENTRIES}",
                mats.len() * k * l
            )));
        }
        Ok(MatrixTuple { k, l, mats })
    }

    /// Scalar tuple at level (1, 1).
    pub fn scalars(values: &[C64]) -> Result<Self> {
        let mats = values
            .iter()
            .map(|&z| CMatrix::from_row_major(1, 1, vec![z]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(mats)
    }

    pub fn real_scalars(values: &[f64]) -> Result<Self> {
        Self::scalars(&values.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>())
    }

    /// Rebuilds a tuple from the flat layout `i·k·l + r·l + c`.
    pub fn from_flat(n: usize, k: usize, l: usize, flat: &[C64]) -> Result<Self> {
        if flat.len() != n * k * l {
            return Err(Error::Dimension(format!("expected {} coefficients, got {}", n * k * l, flat.len())));
        }
        let mats = flat
            .chunks_exact(k * l)
            .map(|chunk| CMatrix::from_row_major(k, l, chunk.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(mats)
    }

    pub fn random<R: Rng + ?Sized>(n: usize, k: usize, l: usize, rng: &mut R) -> Self {
        MatrixTuple { k, l, mats: (0..n).map(|_| CMatrix::random_gaussian(k, l, rng)).collect() }
    }

    pub fn n(&self) -> usize {
        self.mats.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn mats(&self) -> &[CMatrix] {
        &self.mats
    }

    pub fn to_flat(&self) -> Vec<C64> {
        self.mats.iter().flat_map(|m| m.row_major()).collect()
    }

    fn map(&self, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        let mats: Vec<CMatrix> = self.mats.iter().map(f).collect();
        MatrixTuple { k: mats[0].rows(), l: mats[0].cols(), mats }
    }

    pub fn transpose_each(&self) -> Self {
        self.map(linalg::transpose)
    }

    pub fn conj_each(&self) -> Self {
        self.map(linalg::conj)
    }

    pub fn adjoint_each(&self) -> Self {
        self.map(linalg::adjoint)
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|m| m.scale(s))
    }

    pub fn add(&self, other: &MatrixTuple) -> Result<Self> {
        self.check_same_shape(other)?;
        let mats = self.mats.iter().zip(&other.mats).map(|(a, b)| a.add(b)).collect::<Result<Vec<_>>>()?;
        Self::new(mats)
    }

    pub fn sub(&self, other: &MatrixTuple) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    fn check_same_shape(&self, other: &MatrixTuple) -> Result<()> {
        if (self.n(), self.k, self.l) != (other.n(), other.k, other.l) {
            return Err(Error::Dimension(format!(
                "tuple shapes n={} {}x{} and n={} {}x{} differ",
                self.n(),
                self.k,
                self.l,
                other.n(),
                other.k,
                other.l
            )));
        }
        Ok(())
    }

    /// Block-diagonal tuple `(aᵢ ⊕ bᵢ)` at level `(k + k', l + l')`.
    pub fn direct_sum(&self, other: &MatrixTuple) -> Result<Self> {
        if self.n() != other.n() {
            return Err(Error::Dimension("direct sum needs tuples of equal length".into()));
        }
        let (k, l) = (self.k + other.k, self.l + other.l);
        let mats = self
            .mats
            .iter()
            .zip(&other.mats)
            .map(|(a, b)| {
                let mut m = DMatrix::zeros(k, l);
                m.view_mut((0, 0), (self.k, self.l)).copy_from(a.as_dmatrix());
                m.view_mut((self.k, self.l), (other.k, other.l)).copy_from(b.as_dmatrix());
                CMatrix::wrap(m)
            })
            .collect();
        Self::new(mats)
    }

    /// `(α aᵢ β)` for scalar matrices `α` (k'×k) and `β` (l×l').
    pub fn bimodule(&self, alpha: &CMatrix, beta: &CMatrix) -> Result<Self> {
        let mats = self
            .mats
            .iter()
            .map(|a| alpha.matmul(a).and_then(|m| m.matmul(beta)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(mats)
    }

    /// `Σᵢ ⟨bᵢ, aᵢ⟩ = Σᵢ tr(bᵢ* aᵢ)`.
    pub fn pairing(&self, other: &MatrixTuple) -> Result<C64> {
        self.check_same_shape(other)?;
        Ok(self.to_flat().iter().zip(other.to_flat()).map(|(b, a)| b.conj() * a).sum())
    }
}

/// Parameters shared by the first-order solvers.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverParams {
    /// Polynomial degree of strip functions.
    pub degree: usize,
    /// Grid points per boundary line of the strip.
    pub grid: usize,
    /// Iteration budget per smoothing stage.
    pub max_iters: usize,
    /// Number of restarts (seeds) per solve.
    pub restarts: usize,
    /// Subgradient polish iterations on the exact objective.
    pub polish_iters: usize,
    /// Smoothing exponents, applied in order.
    pub smoothing: Vec<f64>,
    pub seed: u64,
    /// Evaluate restarts on the rayon pool.
    pub parallel: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            degree: 8,
            grid: 64,
            max_iters: 300,
            restarts: 5,
            polish_iters: 150,
            smoothing: vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0],
            seed: 0,
            parallel: false,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 8 {
            return Err(Error::Config(format!("grid size must be at least 8, got {}", self.grid)));
        }
        if self.restarts == 0 {
            return Err(Error::Config("at least one restart is required".into()));
        }
        if self.smoothing.iter().any(|&p| p <= 1.0 || !p.is_finite()) {
            return Err(Error::Config("smoothing exponents must be finite and > 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// `n` linearly independent `d₁×d₂` matrices spanning a concrete operator space.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcreteBasis {
    mats: Vec<CMatrix>,
}

impl ConcreteBasis {
    pub fn new(mats: Vec<CMatrix>) -> Result<Self> {
        let first = mats.first().ok_or_else(|| Error::Input("a concrete basis needs at least one matrix".into()))?;
        let (d1, d2) = (first.rows(), first.cols());
        if mats.iter().any(|m| m.rows() != d1 || m.cols() != d2) {
            return Err(Error::Dimension("concrete basis matrices must share one shape".into()));
        }
        let stacked = DMatrix::from_fn(mats.len(), d1 * d2, |i, j| mats[i].get(j / d2, j % d2));
        let sv = stacked.singular_values();
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if mats.len() > d1 * d2 || smin <= 1e-10 * smax {
            return Err(Error::Input("concrete basis is not linearly independent".into()));
        }
        Ok(ConcreteBasis { mats })
    }

    /// Matrix units `e_{1,i}` in `M_{1,n}`.
    pub fn row_units(n: usize) -> Self {
        ConcreteBasis { mats: (0..n).map(|i| CMatrix::unit(1, n, 0, i)).collect() }
    }

    /// Matrix units `e_{i,1}` in `M_{n,1}`.
    pub fn column_units(n: usize) -> Self {
        ConcreteBasis { mats: (0..n).map(|i| CMatrix::unit(n, 1, i, 0)).collect() }
    }

    /// Matrix units `e_{pq}` of `M_d`, ordered `p·d + q`.
    pub fn matrix_units(d: usize) -> Self {
        ConcreteBasis { mats: (0..d * d).map(|i| CMatrix::unit(d, d, i / d, i % d)).collect() }
    }

    pub fn mats(&self) -> &[CMatrix] {
        &self.mats
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.mats[0].rows(), self.mats[0].cols())
    }

    pub fn transposed(&self) -> Self {
        ConcreteBasis { mats: self.mats.iter().map(linalg::transpose).collect() }
    }

    pub fn conjugated(&self) -> Self {
        ConcreteBasis { mats: self.mats.iter().map(linalg::conj).collect() }
    }

    pub(crate) fn dmats(&self) -> Vec<DMatrix<C64>> {
        self.mats.iter().map(|m| m.as_dmatrix().clone()).collect()
    }

    /// Orthonormal for the trace inner product and spanning all of `M_{d₁,d₂}`.
    fn is_full_orthonormal(&self) -> bool {
        let (d1, d2) = self.shape();
        if self.len() != d1 * d2 {
            return false;
        }
        for (i, a) in self.mats.iter().enumerate() {
            for (j, b) in self.mats.iter().enumerate() {
                let ip: C64 = a.as_dmatrix().iter().zip(b.as_dmatrix().iter()).map(|(x, y)| x.conj() * y).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                if (ip - C64::new(expected, 0.0)).norm() > 1e-12 {
                    return false;
                }
            }
        }
        true
    }
}

/// A finite-dimensional operator space structure, given by its level norms.
#[derive(Clone, Debug)]
pub enum SpaceStructure {
    Concrete(ConcreteBasis),
    Row(usize),
    Column(usize),
    Oh(usize),
    Opposite(Box<SpaceStructure>),
    Intersection(Box<SpaceStructure>, Box<SpaceStructure>),
    Sum(Box<SpaceStructure>, Box<SpaceStructure>, SolverParams),
    Interpolated(Box<SpaceStructure>, Box<SpaceStructure>, f64, SolverParams),
}

impl SpaceStructure {
    pub fn intersection(s0: SpaceStructure, s1: SpaceStructure) -> Result<Self> {
        check_equal_dims(&s0, &s1)?;
        Ok(SpaceStructure::Intersection(Box::new(s0), Box::new(s1)))
    }

    pub fn sum(s0: SpaceStructure, s1: SpaceStructure, solver: SolverParams) -> Result<Self> {
        check_equal_dims(&s0, &s1)?;
        solver.validate()?;
        Ok(SpaceStructure::Sum(Box::new(s0), Box::new(s1), solver))
    }

    pub fn interpolated(s0: SpaceStructure, s1: SpaceStructure, theta: f64, solver: SolverParams) -> Result<Self> {
        check_equal_dims(&s0, &s1)?;
        solver.validate()?;
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::Input(format!("θ must lie in (0, 1), got {theta}")));
        }
        Ok(SpaceStructure::Interpolated(Box::new(s0), Box::new(s1), theta, solver))
    }

    /// Dimension `n` of the space.
    pub fn dim(&self) -> usize {
        match self {
            SpaceStructure::Concrete(b) => b.len(),
            SpaceStructure::Row(n) | SpaceStructure::Column(n) | SpaceStructure::Oh(n) => *n,
            SpaceStructure::Opposite(s) => s.dim(),
            SpaceStructure::Intersection(s, _) | SpaceStructure::Sum(s, _, _) | SpaceStructure::Interpolated(s, _, _, _) => {
                s.dim()
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            SpaceStructure::Concrete(b) => format!("concrete(n={}, {}x{})", b.len(), b.shape().0, b.shape().1),
            SpaceStructure::Row(n) => format!("R_{n}"),
            SpaceStructure::Column(n) => format!("C_{n}"),
            SpaceStructure::Oh(n) => format!("OH_{n}"),
            SpaceStructure::Opposite(s) => format!("({})^op", s.name()),
            SpaceStructure::Intersection(a, b) => format!("{} ∩ {}", a.name(), b.name()),
            SpaceStructure::Sum(a, b, _) => format!("{} + {}", a.name(), b.name()),
            SpaceStructure::Interpolated(a, b, t, _) => format!("({}, {})_{t}", a.name(), b.name()),
        }
    }

    /// Norm oracle for the flat coefficient space at level `(k, l)`.
    pub fn level_oracle(&self, k: usize, l: usize) -> Result<SharedOracle> {
        if k == 0 || l == 0 {
            return Err(Error::Input("matrix levels must be positive".into()));
        }
        let n = self.dim();
        Ok(match self {
            SpaceStructure::Concrete(b) => {
                Arc::new(EmbeddedNorm::concrete(&b.dmats(), k, l, MatrixNormKind::Operator))
            }
            SpaceStructure::Row(n) => Arc::new(EmbeddedNorm::row(*n, k, l, MatrixNormKind::Operator)),
            SpaceStructure::Column(n) => Arc::new(EmbeddedNorm::column(*n, k, l, MatrixNormKind::Operator)),
            SpaceStructure::Oh(n) => {
                check_kron_size(k, l)?;
                Arc::new(OhNorm::new(*n, k, l))
            }
            SpaceStructure::Opposite(inner) => Arc::new(PermutedNorm {
                inner: inner.level_oracle(l, k)?,
                perm: oracle::transpose_permutation(n, k, l),
                label: format!("{} level {k}x{l}", self.name()),
            }),
            SpaceStructure::Intersection(a, b) => {
                Arc::new(MaxNorm { first: a.level_oracle(k, l)?, second: b.level_oracle(k, l)? })
            }
            SpaceStructure::Sum(a, b, solver) => Arc::new(sum::SumOracle::new(
                a.level_oracle(k, l)?,
                b.level_oracle(k, l)?,
                solver.clone(),
            )),
            SpaceStructure::Interpolated(..) => {
                return Err(Error::Unsupported(
                    "interpolated structures expose certified bounds, not a single level norm".into(),
                ))
            }
        })
    }

    /// Banach dual of the level-(k, l) norm under `⟨b, a⟩ = Σ tr(bᵢ* aᵢ)`,
    /// where a closed form exists.
    pub fn dual_level_oracle(&self, k: usize, l: usize) -> Result<SharedOracle> {
        let n = self.dim();
        match self {
            SpaceStructure::Row(n) => Ok(Arc::new(EmbeddedNorm::row(*n, k, l, MatrixNormKind::Trace))),
            SpaceStructure::Column(n) => Ok(Arc::new(EmbeddedNorm::column(*n, k, l, MatrixNormKind::Trace))),
            SpaceStructure::Oh(n) if k == 1 && l == 1 => Ok(Arc::new(HilbertianNorm::euclidean(*n))),
            SpaceStructure::Concrete(b) if b.is_full_orthonormal() => {
                Ok(Arc::new(EmbeddedNorm::concrete(&b.dmats(), k, l, MatrixNormKind::Trace)))
            }
            SpaceStructure::Opposite(inner) => Ok(Arc::new(PermutedNorm {
                inner: inner.dual_level_oracle(l, k)?,
                perm: oracle::transpose_permutation(n, k, l),
                label: format!("dual of {} level {k}x{l}", self.name()),
            })),
            _ => Err(Error::Unsupported(format!(
                "no closed-form dual norm for {} at level {k}x{l}",
                self.name()
            ))),
        }
    }

    pub fn level_norm(&self, a: &MatrixTuple) -> Result<f64> {
        self.check_tuple(a)?;
        Ok(self.level_oracle(a.k(), a.l())?.norm(&a.to_flat()))
    }

    /// Certified `(lower, upper)` bracket of the level norm.
    ///
    /// Exact structures return `lower == upper`. A sum returns the split
    /// value as its upper bound, and interpolated structures run the strip
    /// solver; when no dual oracle is available the lower bound is 0.
    pub fn level_bounds(&self, a: &MatrixTuple) -> Result<(f64, f64)> {
        self.check_tuple(a)?;
        match self {
            SpaceStructure::Interpolated(s0, s1, theta, solver) => {
                let couple = crate::interp::CoupleLevel::from_structures(s0, s1, a.k(), a.l())?;
                let x = a.to_flat();
                if couple.has_duals() {
                    let b = crate::interp::interp_norm_bounds(&couple, *theta, &x, solver)?;
                    Ok((b.lower, b.upper))
                } else {
                    let ub = crate::interp::interp_upper_bound(&couple, *theta, &x, solver)?;
                    Ok((0.0, ub.value))
                }
            }
            SpaceStructure::Sum(s0, s1, solver) => {
                let split = sum_level_norm(s0, s1, a, solver)?;
                Ok((split.lower.unwrap_or(0.0), split.value))
            }
            _ => {
                let v = self.level_norm(a)?;
                Ok((v, v))
            }
        }
    }

    fn check_tuple(&self, a: &MatrixTuple) -> Result<()> {
        if a.n() != self.dim() {
            return Err(Error::Dimension(format!(
                "tuple has {} matrices but {} has dimension {}",
                a.n(),
                self.name(),
                self.dim()
            )));
        }
        Ok(())
    }
}

fn check_equal_dims(a: &SpaceStructure, b: &SpaceStructure) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("{} and {} have different dimensions", a.name(), b.name())));
    }
    Ok(())
}

fn check_kron_size(k: usize, l: usize) -> Result<()> {
    if (k * k).saturating_mul(l * l) > linalg::DEFAULT_KRON_LIMIT {
        return Err(Error::Resource(format!("level {k}x{l} needs a {}x{} Kronecker sum", k * k, l * l)));
    }
    Ok(())
}

/// `‖Σᵢ aᵢ aᵢ*‖^{1/2}`, the norm of the block row `[a₁ … aₙ]`.
pub fn row_level_norm(a: &MatrixTuple) -> f64 {
    EmbeddedNorm::row(a.n(), a.k(), a.l(), MatrixNormKind::Operator).norm(&a.to_flat())
}

/// `‖Σᵢ aᵢ* aᵢ‖^{1/2}`, the norm of the block column.
pub fn column_level_norm(a: &MatrixTuple) -> f64 {
    EmbeddedNorm::column(a.n(), a.k(), a.l(), MatrixNormKind::Operator).norm(&a.to_flat())
}

/// `‖Σᵢ aᵢ ⊗ conj(aᵢ)‖^{1/2}`.
pub fn oh_level_norm(a: &MatrixTuple) -> Result<f64> {
    check_kron_size(a.k(), a.l())?;
    Ok(OhNorm::new(a.n(), a.k(), a.l()).norm(&a.to_flat()))
}

/// `‖Σᵢ bᵢ ⊗ aᵢ‖` for a concrete structure with basis `(bᵢ)`.
pub fn min_tensor_level_norm(s: &SpaceStructure, a: &MatrixTuple) -> Result<f64> {
    let SpaceStructure::Concrete(basis) = s else {
        return Err(Error::Unsupported(format!("{} is not a concrete structure", s.name())));
    };
    s.check_tuple(a)?;
    let (d1, d2) = basis.shape();
    if (d1 * a.k()).saturating_mul(d2 * a.l()) > linalg::DEFAULT_KRON_LIMIT {
        return Err(Error::Resource("concrete level matrix too large".into()));
    }
    Ok(EmbeddedNorm::concrete(&basis.dmats(), a.k(), a.l(), MatrixNormKind::Operator).norm(&a.to_flat()))
}

pub fn intersection_level_norm(s0: &SpaceStructure, s1: &SpaceStructure, a: &MatrixTuple) -> Result<f64> {
    check_equal_dims(s0, s1)?;
    Ok(s0.level_norm(a)?.max(s1.level_norm(a)?))
}

/// Best splitting `a = y + z` minimizing `N₀(y) + N₁(z)` at the level of `a`.
pub fn sum_level_norm(
    s0: &SpaceStructure,
    s1: &SpaceStructure,
    a: &MatrixTuple,
    solver: &SolverParams,
) -> Result<SumSplit> {
    check_equal_dims(s0, s1)?;
    s0.check_tuple(a)?;
    solver.validate()?;
    let (k, l) = (a.k(), a.l());
    let n0 = s0.level_oracle(k, l)?;
    let n1 = s1.level_oracle(k, l)?;
    let duals = match (s0.dual_level_oracle(k, l), s1.dual_level_oracle(k, l)) {
        (Ok(d0), Ok(d1)) => Some((d0, d1)),
        _ => None,
    };
    let flat = a.to_flat();
    let mut split = split_minimize(n0.as_ref(), n1.as_ref(), &flat, solver, duals.as_ref().map(|(a, b)| (a.as_ref(), b.as_ref())));
    split.shape = (a.n(), k, l);
    Ok(split)
}

/// The opposite structure: level norms read the transposed coefficients.
pub fn opposite(s: &SpaceStructure) -> SpaceStructure {
    match s {
        SpaceStructure::Concrete(b) => SpaceStructure::Concrete(b.transposed()),
        SpaceStructure::Row(n) => SpaceStructure::Column(*n),
        SpaceStructure::Column(n) => SpaceStructure::Row(*n),
        SpaceStructure::Oh(n) => SpaceStructure::Oh(*n),
        SpaceStructure::Opposite(inner) => (**inner).clone(),
        SpaceStructure::Intersection(a, b) => {
            SpaceStructure::Intersection(Box::new(opposite(a)), Box::new(opposite(b)))
        }
        other => SpaceStructure::Opposite(Box::new(other.clone())),
    }
}

/// Level norm of `a` in `s^op`, i.e. the level norm of the transposes in `s`.
pub fn opposite_level_norm(s: &SpaceStructure, a: &MatrixTuple) -> Result<f64> {
    s.level_norm(&a.transpose_each())
}

pub fn dual_level_norm(s: &SpaceStructure, b: &MatrixTuple) -> Result<f64> {
    s.check_tuple(b)?;
    Ok(s.dual_level_oracle(b.k(), b.l())?.norm(&b.to_flat()))
}
