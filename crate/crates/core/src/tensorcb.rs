//! Tensor norms by factorization search, completely bounded norm estimates
//! at finite matrix levels, and the maps `Φ` and row/column constants on
//! matrix algebras.
//!
//! Every tensor-norm value here is an upper bound (a feasible
//! representation); every cb value is a lower bound (a feasible tuple).

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, complex_gaussian, CMatrix, C64};
use crate::opt::{self, pack, unpack, Minimum, Schedule};
use crate::spaces::{
    ConcreteBasis, MatrixTuple, NormOracle, OhNorm, SharedOracle, SolverParams, SpaceStructure,
};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Smoothing exponents of the gauge and ratio searches.
const SEARCH_SMOOTHING: [f64; 4] = [8.0, 32.0, 128.0, 512.0];

/// `u = Σ U_{ij} eᵢ ⊗ fⱼ ∈ E ⊗ F`.
#[derive(Clone, Debug)]
pub struct TensorElement {
    pub e: SpaceStructure,
    pub f: SpaceStructure,
    pub u: CMatrix,
}

impl TensorElement {
    pub fn new(e: SpaceStructure, f: SpaceStructure, u: CMatrix) -> Result<Self> {
        if u.rows() != e.dim() || u.cols() != f.dim() {
            return Err(Error::Dimension(format!(
                "coefficient matrix is {}x{} but dim E = {}, dim F = {}",
                u.rows(),
                u.cols(),
                e.dim(),
                f.dim()
            )));
        }
        Ok(TensorElement { e, f, u })
    }

    pub fn scaled(&self, s: C64) -> Self {
        TensorElement { e: self.e.clone(), f: self.f.clone(), u: self.u.scale(s) }
    }
}

/// `u = Σᵢ xᵢ ⊗ yᵢ` with `xᵢ`, `yᵢ` the columns of `X`, `Y`: `U = X Yᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Representation {
    pub x: CMatrix,
    pub y: CMatrix,
}

impl Representation {
    pub fn new(x: CMatrix, y: CMatrix) -> Result<Self> {
        if x.cols() != y.cols() {
            return Err(Error::Dimension(format!("X has {} columns, Y has {}", x.cols(), y.cols())));
        }
        Ok(Representation { x, y })
    }

    pub fn rank(&self) -> usize {
        self.x.cols()
    }

    /// `X Yᵀ`.
    pub fn product(&self) -> CMatrix {
        CMatrix::wrap(self.x.as_dmatrix() * self.y.as_dmatrix().transpose())
    }

    pub fn residual(&self, u: &CMatrix) -> f64 {
        (u.as_dmatrix() - self.product().as_dmatrix()).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Representation of `u + v` by juxtaposition of columns.
    pub fn concat(&self, other: &Representation) -> Result<Self> {
        let join = |a: &CMatrix, b: &CMatrix| -> Result<CMatrix> {
            if a.rows() != b.rows() {
                return Err(Error::Dimension("representations of different tensor spaces".into()));
            }
            let mut m = DMatrix::zeros(a.rows(), a.cols() + b.cols());
            m.view_mut((0, 0), (a.rows(), a.cols())).copy_from(a.as_dmatrix());
            m.view_mut((0, a.cols()), (b.rows(), b.cols())).copy_from(b.as_dmatrix());
            CMatrix::from_dmatrix(m)
        };
        Representation::new(join(&self.x, &other.x)?, join(&self.y, &other.y)?)
    }
}

/// A linear map between structures acting on coefficient vectors.
#[derive(Clone, Debug)]
pub struct CoeffMap {
    pub domain: SpaceStructure,
    pub codomain: SpaceStructure,
    pub matrix: CMatrix,
}

impl CoeffMap {
    pub fn new(domain: SpaceStructure, codomain: SpaceStructure, matrix: CMatrix) -> Result<Self> {
        if matrix.cols() != domain.dim() || matrix.rows() != codomain.dim() {
            return Err(Error::Dimension(format!(
                "map matrix is {}x{} but dim domain = {}, dim codomain = {}",
                matrix.rows(),
                matrix.cols(),
                domain.dim(),
                codomain.dim()
            )));
        }
        Ok(CoeffMap { domain, codomain, matrix })
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        (self.matrix.as_dmatrix() * DMatrix::from_column_slice(v.len(), 1, v)).iter().cloned().collect()
    }

    /// `(M aᵢ)` for a tuple, i.e. the amplification `M ⊗ id`.
    pub fn apply_tuple(&self, a: &MatrixTuple) -> Result<MatrixTuple> {
        if a.n() != self.domain.dim() {
            return Err(Error::Dimension("tuple length differs from the domain dimension".into()));
        }
        let kl = a.k() * a.l();
        let out = amplify(self.matrix.as_dmatrix(), &a.to_flat(), kl, false);
        MatrixTuple::from_flat(self.codomain.dim(), a.k(), a.l(), &out)
    }
}

/// `(M ⊗ I_kl) v` on the flat layout, or the adjoint when `adjoint` is set.
fn amplify(m: &DMatrix<C64>, v: &[C64], kl: usize, adjoint: bool) -> Vec<C64> {
    let (rows, cols) = if adjoint { (m.ncols(), m.nrows()) } else { (m.nrows(), m.ncols()) };
    let mut out = vec![ZERO; rows * kl];
    for i in 0..rows {
        for j in 0..cols {
            let coef = if adjoint { m[(j, i)].conj() } else { m[(i, j)] };
            if coef == ZERO {
                continue;
            }
            for e in 0..kl {
                out[i * kl + e] += coef * v[j * kl + e];
            }
        }
    }
    out
}

fn numerical_rank(u: &CMatrix) -> usize {
    let s = linalg::singular_values(u);
    let top = s.first().cloned().unwrap_or(0.0);
    s.iter().filter(|&&v| v > 1e-12 * top).count()
}

/// Concrete basis of a structure realized inside some `M_{d₁,d₂}`.
fn concrete_basis(s: &SpaceStructure) -> Option<ConcreteBasis> {
    match s {
        SpaceStructure::Concrete(b) => Some(b.clone()),
        SpaceStructure::Row(n) => Some(ConcreteBasis::row_units(*n)),
        SpaceStructure::Column(n) => Some(ConcreteBasis::column_units(*n)),
        SpaceStructure::Opposite(inner) => concrete_basis(inner).map(|b| b.transposed()),
        _ => None,
    }
}

/// Evaluates one factor of a representation, `Z` being `X` or `Y`.
enum Factor {
    /// The level norm of the rows of `Z` (levels `(1, r)` or `(r, 1)`).
    Level(SharedOracle),
    /// `‖Σᵢ zᵢ ⊗ z̄ᵢ‖^{1/2}` on OH, which is the operator norm of `Z`.
    OhSpace,
    /// `‖Σᵢ zᵢ ⊗ z̄ᵢ‖^{1/2}` with `zᵢ = Σ_p Z_{pi} b_p` in a concrete realization.
    OhConcrete(Vec<DMatrix<C64>>, OhNorm),
}

impl Factor {
    fn haagerup_left(s: &SpaceStructure, r: usize) -> Result<Self> {
        Ok(Factor::Level(s.level_oracle(1, r)?))
    }

    fn haagerup_right(s: &SpaceStructure, r: usize) -> Result<Self> {
        Ok(Factor::Level(s.level_oracle(r, 1)?))
    }

    fn oh(s: &SpaceStructure, r: usize) -> Result<Self> {
        if let SpaceStructure::Oh(_) = s {
            return Ok(Factor::OhSpace);
        }
        let basis = concrete_basis(s).ok_or_else(|| {
            Error::Unsupported(format!("oh factor norms need OH or a concrete realization, got {}", s.name()))
        })?;
        let (d1, d2) = basis.shape();
        Ok(Factor::OhConcrete(basis.mats().iter().map(|m| m.as_dmatrix().clone()).collect(), OhNorm::new(r, d1, d2)))
    }

    /// Exact value when `p` is `None`, otherwise the smoothed surrogate.
    fn value(&self, z: &DMatrix<C64>, p: Option<f64>) -> f64 {
        match self {
            Factor::Level(oracle) => {
                let flat: Vec<C64> = (0..z.nrows()).flat_map(|i| (0..z.ncols()).map(move |j| (i, j))).map(|(i, j)| z[(i, j)]).collect();
                match p {
                    Some(p) => oracle.smoothed(&flat, p).0,
                    None => oracle.norm(&flat),
                }
            }
            Factor::OhSpace => match p {
                Some(p) => crate::spaces::oracle::schatten_gradient(z, p).0,
                None => linalg::op_norm_dm(z),
            },
            Factor::OhConcrete(basis, oracle) => {
                let mut flat = Vec::with_capacity(z.ncols() * basis[0].len());
                for i in 0..z.ncols() {
                    let mut m = DMatrix::<C64>::zeros(basis[0].nrows(), basis[0].ncols());
                    for (p_idx, b) in basis.iter().enumerate() {
                        m += b * z[(p_idx, i)];
                    }
                    flat.extend((0..m.nrows()).flat_map(|a| (0..m.ncols()).map(move |c| (a, c))).map(|(a, c)| m[(a, c)]));
                }
                match p {
                    Some(p) => oracle.smoothed(&flat, p).0,
                    None => oracle.norm(&flat),
                }
            }
        }
    }
}

/// Upper bound for `oh(u)`: the infimum over representations of
/// `‖Σ xᵢ⊗x̄ᵢ‖^{1/2}_{E⊗min Ē} · ‖Σ yᵢ⊗ȳᵢ‖^{1/2}_{F⊗min F̄}`.
///
/// `r` defaults to the numerical rank of `U`.
pub fn oh_tensor_norm_ub(t: &TensorElement, r: Option<usize>, solver: &SolverParams) -> Result<(f64, Representation)> {
    oh_tensor_norm_ub_seeded(t, r, solver, &[])
}

pub fn oh_tensor_norm_ub_seeded(
    t: &TensorElement,
    r: Option<usize>,
    solver: &SolverParams,
    seeds: &[Representation],
) -> Result<(f64, Representation)> {
    factorization_search(t, r, solver, seeds, |rank| Ok((Factor::oh(&t.e, rank)?, Factor::oh(&t.f, rank)?)))
}

/// Upper bound for the Haagerup norm: the infimum over representations of
/// `‖(x₁ … x_r)‖_{M_{1,r}(E)} · ‖(y₁ … y_r)ᵀ‖_{M_{r,1}(F)}`.
pub fn haagerup_norm_ub(t: &TensorElement, r: Option<usize>, solver: &SolverParams) -> Result<(f64, Representation)> {
    haagerup_norm_ub_seeded(t, r, solver, &[])
}

pub fn haagerup_norm_ub_seeded(
    t: &TensorElement,
    r: Option<usize>,
    solver: &SolverParams,
    seeds: &[Representation],
) -> Result<(f64, Representation)> {
    factorization_search(t, r, solver, seeds, |rank| {
        Ok((Factor::haagerup_left(&t.e, rank)?, Factor::haagerup_right(&t.f, rank)?))
    })
}

/// `X = W Σ^{1/2}`, `Y = conj(V) Σ^{1/2}` from `U = W Σ V*`, truncated or
/// zero-padded to `r` columns.
fn svd_balanced(u: &CMatrix, r: usize) -> Representation {
    let svd = u.as_dmatrix().clone().svd(true, true);
    let (w, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let (m, n) = (u.rows(), u.cols());
    let mut x = DMatrix::zeros(m, r);
    let mut y = DMatrix::zeros(n, r);
    for i in 0..r.min(svd.singular_values.len()) {
        let s = svd.singular_values[i].sqrt();
        x.set_column(i, &(w.column(i) * C64::new(s, 0.0)));
        // row i of V* is conj(V) column i transposed
        y.set_column(i, &(vt.row(i).transpose() * C64::new(s, 0.0)));
    }
    Representation { x: CMatrix::wrap(x), y: CMatrix::wrap(y) }
}

fn factorization_search<F>(
    t: &TensorElement,
    r: Option<usize>,
    solver: &SolverParams,
    seeds: &[Representation],
    factors: F,
) -> Result<(f64, Representation)>
where
    F: Fn(usize) -> Result<(Factor, Factor)> + Sync,
{
    solver.validate()?;
    let rank = numerical_rank(&t.u);
    let r = r.unwrap_or(rank.max(1));
    if r < rank {
        return Err(Error::Infeasible(format!("r = {r} is below rank(U) = {rank}")));
    }
    let unorm = t.u.frobenius_norm();
    for s in seeds {
        if s.x.rows() != t.u.rows() || s.y.rows() != t.u.cols() || s.residual(&t.u) > 1e-10 * unorm.max(1e-300) {
            return Err(Error::Input("seed representation does not reproduce U".into()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(solver.seed);
    let base = svd_balanced(&t.u, r);
    let mut starts: Vec<(Representation, Option<DMatrix<C64>>)> = vec![(base.clone(), None)];
    if r == t.u.cols() {
        starts.push((Representation { x: t.u.clone(), y: CMatrix::identity(r) }, None));
    }
    if r == t.u.rows() {
        starts.push((Representation { x: CMatrix::identity(r), y: linalg::transpose(&t.u) }, None));
    }
    for _ in 0..4 * solver.restarts {
        let g = DMatrix::from_fn(r, r, |_, _| complex_gaussian(&mut rng) * 0.5) + DMatrix::identity(r, r);
        starts.push((base.clone(), Some(g)));
    }
    starts.extend(seeds.iter().map(|s| (s.clone(), None)));

    let run = |(rep, q0): &(Representation, Option<DMatrix<C64>>)| -> Result<(f64, Representation, bool)> {
        let (fe, ff) = factors(rep.rank())?;
        Ok(gauge_search(&fe, &ff, rep, q0.as_ref(), solver))
    };
    let results: Vec<Result<(f64, Representation, bool)>> =
        if solver.parallel { starts.par_iter().map(run).collect() } else { starts.iter().map(run).collect() };
    let mut best: Option<(f64, Representation)> = None;
    for res in results {
        let (v, rep, _) = res?;
        if rep.residual(&t.u) > 1e-10 * unorm.max(1e-300) {
            continue;
        }
        if best.as_ref().is_none_or(|b| v < b.0) {
            best = Some((v, rep));
        }
    }
    let (value, rep) = best.ok_or_else(|| Error::Numerical("no representation met the residual bound".into()))?;
    Ok((value, rep))
}

fn matrix_from_vars(v: &[f64], r: usize) -> DMatrix<C64> {
    let z = unpack(v);
    DMatrix::from_fn(r, r, |i, j| z[i * r + j])
}

/// Minimizes `f_E(XQ)·f_F(YQ^{-T})` over invertible gauges `Q`, returning a
/// balanced representation (`f_E = f_F`).
fn gauge_search(
    fe: &Factor,
    ff: &Factor,
    rep: &Representation,
    q0: Option<&DMatrix<C64>>,
    solver: &SolverParams,
) -> (f64, Representation, bool) {
    let r = rep.rank();
    let (x0, y0) = (rep.x.as_dmatrix(), rep.y.as_dmatrix());
    let apply = |v: &[f64]| -> Option<(DMatrix<C64>, DMatrix<C64>)> {
        let q = matrix_from_vars(v, r);
        let qinv = q.clone().try_inverse()?;
        Some((x0 * q, y0 * qinv.transpose()))
    };
    let log_value = |v: &[f64], p: Option<f64>| -> f64 {
        match apply(v) {
            Some((x, y)) => {
                let (a, b) = (fe.value(&x, p), ff.value(&y, p));
                if a > 0.0 && b > 0.0 {
                    a.ln() + b.ln()
                } else {
                    f64::INFINITY
                }
            }
            None => f64::INFINITY,
        }
    };
    let with_fd_gradient = |v: &[f64], p: Option<f64>| -> (f64, Vec<f64>) {
        let f0 = log_value(v, p);
        let mut g = vec![0.0; v.len()];
        let mut w = v.to_vec();
        for i in 0..v.len() {
            let h = 1e-6 * (1.0 + v[i].abs());
            w[i] = v[i] + h;
            let fp = log_value(&w, p);
            w[i] = v[i] - h;
            let fm = log_value(&w, p);
            w[i] = v[i];
            g[i] = if fp.is_finite() && fm.is_finite() { (fp - fm) / (2.0 * h) } else { 0.0 };
        }
        (f0, g)
    };

    let mut start = vec![0.0; 2 * r * r];
    let q_init = q0.cloned().unwrap_or_else(|| DMatrix::identity(r, r));
    let flat_q: Vec<C64> = (0..r).flat_map(|i| (0..r).map(move |j| (i, j))).map(|(i, j)| q_init[(i, j)]).collect();
    pack(&mut start, &flat_q);

    let identity_value = {
        let mut id = vec![0.0; 2 * r * r];
        let flat: Vec<C64> =
            (0..r).flat_map(|i| (0..r).map(move |j| if i == j { C64::new(1.0, 0.0) } else { ZERO })).collect();
        pack(&mut id, &flat);
        (log_value(&id, None), id)
    };

    let schedule = Schedule {
        exponents: &SEARCH_SMOOTHING,
        iters_per_stage: solver.max_iters.min(60),
        polish_iters: 0,
        step_hint: 0.1,
    };
    let m: Minimum = opt::continuation(
        |v, p| with_fd_gradient(v, Some(p)),
        |v| with_fd_gradient(v, None),
        start,
        &schedule,
    );
    let (best_log, best_vars) = if m.value <= identity_value.0 { (m.value, m.x) } else { identity_value };
    let (x, y) = apply(&best_vars).unwrap_or_else(|| (x0.clone(), y0.clone()));
    let (a, b) = (fe.value(&x, None), ff.value(&y, None));
    let s = if a > 0.0 && b > 0.0 { (a / b).sqrt() } else { 1.0 };
    let rep = Representation { x: CMatrix::wrap(x.unscale(s)), y: CMatrix::wrap(y.scale(s)) };
    let value = fe.value(rep.x.as_dmatrix(), None) * ff.value(rep.y.as_dmatrix(), None);
    debug_assert!(best_log.is_finite());
    (value, rep, m.converged)
}

/// Maximizes `N_num(L a) / N_den(a)` from the given seeds; returns the best
/// ratio and its argument.
fn ratio_ascent(
    num: &dyn NormOracle,
    den: &dyn NormOracle,
    map: &(dyn Fn(&[C64], bool) -> Vec<C64> + Sync),
    seeds: Vec<Vec<C64>>,
    exponents: &[f64],
    solver: &SolverParams,
) -> (f64, Vec<C64>) {
    let ratio = |a: &[C64]| -> f64 {
        let d = den.norm(a);
        if d > 0.0 {
            num.norm(&map(a, false)) / d
        } else {
            0.0
        }
    };
    let objective = |x: &[f64], p: Option<f64>| -> (f64, Vec<f64>) {
        let a = unpack(x);
        let (nd, gd) = match p {
            Some(p) => den.smoothed(&a, p),
            None => den.subgradient(&a),
        };
        let la = map(&a, false);
        let (nn, gn) = match p {
            Some(p) => num.smoothed(&la, p),
            None => num.subgradient(&la),
        };
        if nd <= 0.0 || nn <= 0.0 {
            return (f64::INFINITY, vec![0.0; x.len()]);
        }
        let back = map(&gn, true);
        let g: Vec<C64> = gd.iter().zip(&back).map(|(u, w)| u / nd - w / nn).collect();
        let mut out = vec![0.0; x.len()];
        pack(&mut out, &g);
        (nd.ln() - nn.ln(), out)
    };
    let schedule = Schedule { exponents, iters_per_stage: solver.max_iters, polish_iters: 0, step_hint: 0.1 };
    let run = |seed: &Vec<C64>| -> (f64, Vec<C64>) {
        let scale = seed.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if scale == 0.0 {
            return (0.0, seed.clone());
        }
        let mut x0 = vec![0.0; 2 * seed.len()];
        pack(&mut x0, &seed.iter().map(|z| z / scale).collect::<Vec<_>>());
        let m = opt::continuation(|x, p| objective(x, Some(p)), |x| objective(x, None), x0.clone(), &schedule);
        let polished = opt::lbfgs(|x| objective(x, None), m.x.clone(), solver.max_iters, 0.01);
        let mut best = (ratio(seed), seed.clone());
        for cand in [unpack(&m.x), unpack(&polished.x)] {
            let v = ratio(&cand);
            if v > best.0 {
                best = (v, cand);
            }
        }
        best
    };
    let results: Vec<(f64, Vec<C64>)> =
        if solver.parallel { seeds.par_iter().map(run).collect() } else { seeds.iter().map(run).collect() };
    results.into_iter().reduce(|a, b| if b.0 > a.0 { b } else { a }).unwrap_or((0.0, Vec::new()))
}

fn random_flat(len: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..len).map(|_| complex_gaussian(rng)).collect()
}

/// Per-level lower estimates of `‖M ⊗ id_{M_j}‖`, `j = 1..=kmax`, with the
/// best level-`kmax` tuple.
#[derive(Clone, Debug)]
pub struct CbEstimate {
    pub levels: Vec<f64>,
    pub witness: MatrixTuple,
}

impl CbEstimate {
    pub fn value(&self) -> f64 {
        self.levels.last().cloned().unwrap_or(0.0)
    }
}

/// Runs the level searches `1..=kmax`, seeding level `j + 1` with the level-`j`
/// witness padded by a zero block, so the estimates are nondecreasing.
pub fn cb_level_estimates(map: &CoeffMap, kmax: usize, solver: &SolverParams) -> Result<CbEstimate> {
    if kmax == 0 {
        return Err(Error::Input("the matrix level must be at least 1".into()));
    }
    solver.validate()?;
    let n = map.domain.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(solver.seed);
    let mut levels: Vec<f64> = Vec::with_capacity(kmax);
    let mut witness: Option<MatrixTuple> = None;
    for k in 1..=kmax {
        let den = map.domain.level_oracle(k, k)?;
        let num = map.codomain.level_oracle(k, k)?;
        let m = map.matrix.as_dmatrix().clone();
        let kk = k * k;
        let apply = move |v: &[C64], adjoint: bool| amplify(&m, v, kk, adjoint);
        let mut seeds: Vec<Vec<C64>> = Vec::new();
        match &witness {
            None => {
                // right singular vectors of M
                let svd = map.matrix.as_dmatrix().clone().svd(false, true);
                let vt = svd.v_t.unwrap();
                for i in 0..vt.nrows() {
                    seeds.push(vt.row(i).iter().map(|z| z.conj()).collect());
                }
            }
            Some(w) => {
                let pad = MatrixTuple::scalars(&vec![ZERO; n])?;
                seeds.push(w.direct_sum(&pad)?.to_flat());
            }
        }
        for _ in 0..solver.restarts {
            seeds.push(random_flat(n * kk, &mut rng));
        }
        let (value, arg) = ratio_ascent(num.as_ref(), den.as_ref(), &apply, seeds, &SEARCH_SMOOTHING, solver);
        let prev = levels.last().cloned().unwrap_or(0.0);
        levels.push(value.max(prev));
        if value >= prev || witness.is_none() {
            witness = Some(MatrixTuple::from_flat(n, k, k, &arg)?);
        } else if let Some(w) = &witness {
            witness = Some(w.direct_sum(&MatrixTuple::scalars(&vec![ZERO; n])?)?);
        }
    }
    Ok(CbEstimate { levels, witness: witness.expect("kmax ≥ 1") })
}

/// Exact-objective ascent of `‖(M ⊗ id_k) a‖ / ‖a‖` at level `k` started
/// from the given flat level-`k` tuples only; returns the best ratio and tuple.
pub(crate) fn cb_level_refine(map: &CoeffMap, k: usize, seeds: Vec<Vec<C64>>, solver: &SolverParams) -> Result<(f64, Vec<C64>)> {
    let n = map.domain.dim();
    if seeds.is_empty() || seeds.iter().any(|s| s.len() != n * k * k) {
        return Err(Error::Dimension(format!("seeds must be nonempty level-{k} tuples of {} coefficients", n * k * k)));
    }
    let den = map.domain.level_oracle(k, k)?;
    let num = map.codomain.level_oracle(k, k)?;
    let m = map.matrix.as_dmatrix().clone();
    let kk = k * k;
    let apply = move |v: &[C64], adjoint: bool| amplify(&m, v, kk, adjoint);
    Ok(ratio_ascent(num.as_ref(), den.as_ref(), &apply, seeds, &[], solver))
}

/// Lower bound on `‖u‖_cb` from level `k`.
pub fn cb_level_lower(map: &CoeffMap, k: usize, solver: &SolverParams) -> Result<f64> {
    Ok(cb_level_estimates(map, k, solver)?.value())
}

/// `‖u‖_cb` for a map between OH structures, which equals `‖M‖`.
pub fn cb_norm_oh_exact(map: &CoeffMap) -> Result<f64> {
    match (&map.domain, &map.codomain) {
        (SpaceStructure::Oh(_), SpaceStructure::Oh(_)) => Ok(linalg::operator_norm(&map.matrix)),
        _ => Err(Error::Unsupported("the exact cb norm is only available between OH structures".into())),
    }
}

fn matrix_algebra_size(s: &SpaceStructure) -> Option<usize> {
    let SpaceStructure::Concrete(b) = s else { return None };
    let (d1, d2) = b.shape();
    (d1 == d2 && b == &ConcreteBasis::matrix_units(d1)).then_some(d1)
}

/// `Φ(u)(a) = Σ U_{(ij),(kl)} e_{ij} a e_{kl}` on `M_n`, with `e_{pq}` at index `p·n + q`.
pub fn phi_map(t: &TensorElement) -> Result<CoeffMap> {
    let n = match (matrix_algebra_size(&t.e), matrix_algebra_size(&t.f)) {
        (Some(a), Some(b)) if a == b => a,
        _ => return Err(Error::Input("Φ needs E = F = M_n in the matrix-unit basis".into())),
    };
    let nn = n * n;
    let mut m = DMatrix::<C64>::zeros(nn, nn);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    // e_ij a e_kl = a_jk e_il
                    m[(i * n + l, j * n + k)] += t.u.get(i * n + j, k * n + l);
                }
            }
        }
    }
    let s = SpaceStructure::Concrete(ConcreteBasis::matrix_units(n));
    CoeffMap::new(s.clone(), s, CMatrix::wrap(m))
}

/// Lower bounds on the smallest `C_row`, `C_col` with
/// `‖Σ P(xᵢ)P(xᵢ)*‖ ≤ C_row² ‖Σ xᵢxᵢ*‖` and `‖Σ P(xᵢ)*P(xᵢ)‖ ≤ C_col² ‖Σ xᵢ*xᵢ‖`,
/// searched over tuples of `d²` matrices in `M_d`.
pub fn row_column_constant(p: &CoeffMap, samples: usize, solver: &SolverParams) -> Result<(f64, f64)> {
    solver.validate()?;
    let nn = p.domain.dim();
    let d = (nn as f64).sqrt().round() as usize;
    if d * d != nn || p.codomain.dim() != nn {
        return Err(Error::Input("P must act on the coefficients of a matrix algebra M_d".into()));
    }
    let terms = nn;
    let m = p.matrix.as_dmatrix().clone();
    // P applied to each matrix of the tuple is M ⊗ I_terms acting on the other tensor side
    let apply = move |v: &[C64], adjoint: bool| -> Vec<C64> {
        let mut out = vec![ZERO; v.len()];
        for t in 0..terms {
            let block = &v[t * nn..(t + 1) * nn];
            let image = amplify(&m, block, 1, adjoint);
            out[t * nn..(t + 1) * nn].copy_from_slice(&image);
        }
        out
    };
    let mut rng = ChaCha8Rng::seed_from_u64(solver.seed);
    let unit_family = |row: bool| -> Vec<C64> {
        let mut v = vec![ZERO; terms * nn];
        for i in 0..d {
            let (r, c) = if row { (0, i) } else { (i, 0) };
            v[i * nn + r * d + c] = C64::new(1.0, 0.0);
        }
        v
    };
    let mut seeds = vec![unit_family(true), unit_family(false)];
    for _ in 0..samples.max(1) {
        seeds.push(random_flat(terms * nn, &mut rng));
    }
    let row = crate::spaces::EmbeddedNorm::row(terms, d, d, crate::spaces::MatrixNormKind::Operator);
    let col = crate::spaces::EmbeddedNorm::column(terms, d, d, crate::spaces::MatrixNormKind::Operator);
    let (c_row, _) = ratio_ascent(&row, &row, &apply, seeds.clone(), &SEARCH_SMOOTHING, solver);
    let (c_col, _) = ratio_ascent(&col, &col, &apply, seeds, &SEARCH_SMOOTHING, solver);
    Ok((c_row, c_col))
}

#[cfg(test)]
mod tests;
