//! Complex interpolation of compatible couples of norms on a common
//! coefficient space.
//!
//! Upper bounds minimize the boundary sup over the family
//! `f(z) = e^{ρ(z−θ)} Σⱼ cⱼ w(z)ʲ` with `f(θ) = x`. Lower bounds solve the same
//! problem for the dual couple under the constraint `Re⟨g(θ), x⟩ = 1`: for
//! bounded analytic `f, g`, `z ↦ ⟨g(z̄), f(z)⟩` is bounded analytic, so the
//! three-lines lemma gives `|⟨g(θ), x⟩| ≤ ‖g‖·‖f‖`.
//!
//! Both bounds are exact for the grid-relaxed problems; the boundary
//! discretization slack is reported as a Lipschitz inflation `δ`.

mod grid;
mod strip;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, complex_gaussian, HermitianPD, C64};
use crate::opt::{self, Minimum, Schedule};
use crate::spaces::{HilbertianNorm, L1Norm, LInfNorm, NormOracle, SharedOracle, SolverParams, SpaceStructure};
pub use grid::{conformal_boundary_grid, disk_to_strip, strip_to_disk, BoundaryPoint};
pub use strip::StripFunction;
use strip::{Anchor, StripProblem};

/// Two norms on one coefficient space, with optional dual norms for the
/// pairing `⟨ξ, x⟩ = Σ conj(ξᵢ) xᵢ`.
#[derive(Clone)]
pub struct CoupleLevel {
    dim: usize,
    pub n0: SharedOracle,
    pub n1: SharedOracle,
    pub d0: Option<SharedOracle>,
    pub d1: Option<SharedOracle>,
}

impl std::fmt::Debug for CoupleLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoupleLevel")
            .field("dim", &self.dim)
            .field("n0", &self.n0.describe())
            .field("n1", &self.n1.describe())
            .field("duals", &self.has_duals())
            .finish()
    }
}

impl CoupleLevel {
    pub fn new(n0: SharedOracle, n1: SharedOracle) -> Result<Self> {
        if n0.dim() != n1.dim() {
            return Err(Error::Dimension(format!("couple norms act on ℂ^{} and ℂ^{}", n0.dim(), n1.dim())));
        }
        Ok(CoupleLevel { dim: n0.dim(), n0, n1, d0: None, d1: None })
    }

    pub fn with_duals(mut self, d0: SharedOracle, d1: SharedOracle) -> Result<Self> {
        if d0.dim() != self.dim || d1.dim() != self.dim {
            return Err(Error::Dimension("dual oracles must act on the couple's coefficient space".into()));
        }
        self.d0 = Some(d0);
        self.d1 = Some(d1);
        Ok(self)
    }

    /// Level-(k, l) norms of two structures, with duals when both have closed forms.
    pub fn from_structures(s0: &SpaceStructure, s1: &SpaceStructure, k: usize, l: usize) -> Result<Self> {
        if s0.dim() != s1.dim() {
            return Err(Error::Dimension(format!("{} and {} have different dimensions", s0.name(), s1.name())));
        }
        let couple = Self::new(s0.level_oracle(k, l)?, s1.level_oracle(k, l)?)?;
        match (s0.dual_level_oracle(k, l), s1.dual_level_oracle(k, l)) {
            (Ok(d0), Ok(d1)) => couple.with_duals(d0, d1),
            _ => Ok(couple),
        }
    }

    /// `(ℓ∞ⁿ, ℓ₁ⁿ)` with duals `(ℓ₁ⁿ, ℓ∞ⁿ)`.
    pub fn linf_l1(n: usize) -> Self {
        CoupleLevel {
            dim: n,
            n0: Arc::new(LInfNorm(n)),
            n1: Arc::new(L1Norm(n)),
            d0: Some(Arc::new(L1Norm(n))),
            d1: Some(Arc::new(LInfNorm(n))),
        }
    }

    /// Hilbertian norms `(x*gᵢx)^{1/2}`, with duals from the inverse Grams.
    pub fn hilbertian(g0: &HermitianPD, g1: &HermitianPD) -> Result<Self> {
        if g0.dim() != g1.dim() {
            return Err(Error::Dimension("Gram matrices differ in size".into()));
        }
        let oracle = |g: &HermitianPD, label: &str| -> SharedOracle {
            Arc::new(HilbertianNorm::new(g.matrix().as_dmatrix().clone(), label))
        };
        let (i0, i1) = (g0.inverse()?, g1.inverse()?);
        Self::new(oracle(g0, "g0"), oracle(g1, "g1"))?.with_duals(oracle(&i0, "g0⁻¹"), oracle(&i1, "g1⁻¹"))
    }

    /// `(N, N)`, optionally with the dual of `N`.
    pub fn equal(norm: SharedOracle, dual: Option<SharedOracle>) -> Self {
        CoupleLevel { dim: norm.dim(), n0: norm.clone(), n1: norm, d0: dual.clone(), d1: dual }
    }

    /// `(N₁, N₀)`: interpolating it at `1 − θ` gives the same space.
    pub fn reversed(&self) -> Self {
        CoupleLevel { dim: self.dim, n0: self.n1.clone(), n1: self.n0.clone(), d0: self.d1.clone(), d1: self.d0.clone() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_duals(&self) -> bool {
        self.d0.is_some() && self.d1.is_some()
    }

    fn duals(&self) -> Result<[&dyn NormOracle; 2]> {
        match (&self.d0, &self.d1) {
            (Some(d0), Some(d1)) => Ok([d0.as_ref(), d1.as_ref()]),
            _ => Err(Error::Unsupported("the couple has no dual oracles; lower bounds need them".into())),
        }
    }
}

/// Grid-relaxed upper bound with its witness.
#[derive(Clone, Debug, serde::Serialize)]
pub struct UpperBound {
    pub value: f64,
    pub witness: StripFunction,
    /// Lipschitz inflation: the true boundary sup of the witness is at most `value·(1 + delta)`.
    pub delta: f64,
    pub converged: bool,
}

/// Duality lower bound `|⟨ξ, x⟩| / value(dual function)`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct LowerBound {
    pub value: f64,
    pub witness: Vec<C64>,
    /// Dual-couple strip function with `g(θ) = ξ`.
    pub dual_function: StripFunction,
    /// Grid max of `dual_function`.
    pub dual_value: f64,
    /// Lipschitz inflation of the dual grid max.
    pub delta: f64,
    pub converged: bool,
}

/// Certified bracket of an interpolation norm.
#[derive(Clone, Debug, serde::Serialize)]
pub struct NormBounds {
    pub lower: f64,
    pub upper: f64,
    pub upper_witness: StripFunction,
    pub lower_witness: Vec<C64>,
    pub upper_converged: bool,
    pub lower_converged: bool,
    pub delta_upper: f64,
    pub delta_lower: f64,
}

impl NormBounds {
    /// `(upper − lower) / upper`.
    pub fn relative_width(&self) -> f64 {
        if self.upper > 0.0 {
            (self.upper - self.lower) / self.upper
        } else {
            0.0
        }
    }

    pub fn contains(&self, v: f64, rel_tol: f64) -> bool {
        v >= self.lower * (1.0 - rel_tol) && v <= self.upper * (1.0 + rel_tol)
    }
}

fn check_inputs(cl: &CoupleLevel, theta: f64, x: &[C64], solver: &SolverParams) -> Result<()> {
    solver.validate()?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Input(format!("θ must lie in (0, 1), got {theta}")));
    }
    if x.len() != cl.dim {
        return Err(Error::Dimension(format!("x has {} coefficients, the couple acts on ℂ^{}", x.len(), cl.dim)));
    }
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Input("x has non-finite entries".into()));
    }
    Ok(())
}

fn euclid(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn scaled(x: &[C64], s: f64) -> Vec<C64> {
    x.iter().map(|v| v * s).collect()
}

/// `ρ` balancing the two boundary lines of a constant function: `ln(a₀/a₁)`.
fn balancing_rho(a0: f64, a1: f64) -> f64 {
    if a0 > 0.0 && a1 > 0.0 {
        (a0 / a1).ln()
    } else {
        0.0
    }
}

fn schedule(solver: &SolverParams) -> Schedule<'_> {
    Schedule {
        exponents: &solver.smoothing,
        iters_per_stage: solver.max_iters,
        polish_iters: solver.polish_iters,
        step_hint: 0.1,
    }
}

/// Runs every seed through the continuation solver and keeps the best exact value.
fn solve(problem: &StripProblem<'_>, seeds: Vec<Vec<f64>>, solver: &SolverParams) -> Minimum {
    let sched = schedule(solver);
    let run = |seed: &Vec<f64>| {
        opt::continuation(|v, p| problem.objective(v, Some(p)), |v| problem.objective(v, None), seed.clone(), &sched)
    };
    let results: Vec<Minimum> =
        if solver.parallel { seeds.par_iter().map(run).collect() } else { seeds.iter().map(run).collect() };
    // first minimum wins ties so serial and parallel runs agree
    results
        .into_iter()
        .reduce(|best, m| if m.value < best.value { m } else { best })
        .expect("at least one seed")
}

fn random_coefficients(problem: &StripProblem<'_>, rho: f64, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..problem.n_vars()).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    v[0] = rho;
    v
}

/// Upper bound for `‖x‖_θ`.
pub fn interp_upper_bound(cl: &CoupleLevel, theta: f64, x: &[C64], solver: &SolverParams) -> Result<UpperBound> {
    interp_upper_bound_seeded(cl, theta, x, solver, &[])
}

/// As [`interp_upper_bound`], also starting from the given strip functions
/// (rescaled as needed; each must satisfy `f(θ) = x`). The reported value
/// never exceeds the grid max of any seed of degree ≤ m.
pub fn interp_upper_bound_seeded(
    cl: &CoupleLevel,
    theta: f64,
    x: &[C64],
    solver: &SolverParams,
    seeds: &[StripFunction],
) -> Result<UpperBound> {
    check_inputs(cl, theta, x, solver)?;
    let scale = euclid(x);
    let (a0, a1) = (cl.n0.norm(x), cl.n1.norm(x));
    if scale == 0.0 || solver.degree == 0 {
        return Ok(UpperBound {
            value: a0.max(a1),
            witness: StripFunction::constant(theta, x.to_vec()),
            delta: 0.0,
            converged: true,
        });
    }
    let xh = scaled(x, 1.0 / scale);
    let grid = conformal_boundary_grid(theta, solver.grid)?;
    let problem = StripProblem::new([cl.n0.as_ref(), cl.n1.as_ref()], &grid, theta, solver.degree, Anchor::Fixed(xh.clone()));

    let rho_star = balancing_rho(a0, a1);
    let zero = |rho: f64| {
        let mut v = vec![0.0; problem.n_vars()];
        v[0] = rho;
        v
    };
    let mut starts = vec![zero(rho_star), zero(0.0)];
    for f in seeds.iter().filter(|f| f.degree() <= solver.degree) {
        let mut g = f.clone();
        g.coeffs.iter_mut().for_each(|c| *c = scaled(c, 1.0 / scale));
        starts.push(problem.encode(&g));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(solver.seed);
    while starts.len() < solver.restarts.max(2) + seeds.len() {
        starts.push(random_coefficients(&problem, rho_star, 0.1 / (cl.dim as f64).sqrt(), &mut rng));
    }
    let best = solve(&problem, starts, solver);
    let mut witness = problem.decode(&best.x);
    let value = problem.grid_max(&witness);
    let delta = problem.inflation(&witness, value);
    witness.coeffs.iter_mut().for_each(|c| *c = scaled(c, scale));
    Ok(UpperBound { value: value * scale, witness, delta, converged: best.converged })
}

/// Duality lower bound for `‖x‖_θ`; needs the dual oracles of the couple.
pub fn interp_lower_bound(cl: &CoupleLevel, theta: f64, x: &[C64], solver: &SolverParams) -> Result<LowerBound> {
    interp_lower_bound_seeded(cl, theta, x, solver, None)
}

fn lower_seeded_impl(
    cl: &CoupleLevel,
    theta: f64,
    x: &[C64],
    solver: &SolverParams,
    upper_witness: Option<&StripFunction>,
) -> Result<LowerBound> {
    check_inputs(cl, theta, x, solver)?;
    let duals = cl.duals()?;
    let scale = euclid(x);
    if scale == 0.0 {
        return Ok(LowerBound {
            value: 0.0,
            witness: x.to_vec(),
            dual_function: StripFunction::constant(theta, x.to_vec()),
            dual_value: 0.0,
            delta: 0.0,
            converged: true,
        });
    }
    let xh = scaled(x, 1.0 / scale);
    let grid = conformal_boundary_grid(theta, solver.grid)?;
    let problem = StripProblem::new(duals, &grid, theta, solver.degree, Anchor::Normalized(xh.clone()));

    // candidate values of g(θ), each normalized to Re⟨ξ, x̂⟩ = 1
    let mut candidates: Vec<Vec<C64>> = Vec::new();
    if let Some(f) = upper_witness {
        let mut f = f.clone();
        f.coeffs.iter_mut().for_each(|c| *c = scaled(c, 1.0 / scale));
        let mut avg = vec![C64::new(0.0, 0.0); cl.dim];
        for p in &grid {
            let oracle = if p.label == 0 { &cl.n0 } else { &cl.n1 };
            let (_, s) = oracle.subgradient(&f.polynomial(p.w));
            avg.iter_mut().zip(&s).for_each(|(a, si)| *a += si * p.weight);
        }
        candidates.push(avg);
    }
    let (_, s0) = cl.n0.subgradient(&xh);
    let (_, s1) = cl.n1.subgradient(&xh);
    let mixed: Vec<C64> = s0.iter().zip(&s1).map(|(a, b)| a * (1.0 - theta) + b * theta).collect();
    candidates.extend([s0, s1, mixed]);
    let mut rng = ChaCha8Rng::seed_from_u64(solver.seed ^ 0x9e37_79b9_7f4a_7c15);
    while candidates.len() < solver.restarts.max(4) {
        candidates.push((0..cl.dim).map(|_| complex_gaussian(&mut rng)).collect());
    }

    let starts: Vec<Vec<f64>> = candidates
        .into_iter()
        .filter_map(|xi| {
            let re: f64 = xh.iter().zip(&xi).map(|(a, b)| (a.conj() * b).re).sum();
            if re.abs() < 1e-12 {
                return None;
            }
            let c0 = scaled(&xi, 1.0 / re);
            let rho = balancing_rho(duals[0].norm(&c0), duals[1].norm(&c0));
            let mut f = StripFunction { theta, rho, coeffs: vec![c0] };
            f = f.padded(solver.degree);
            Some(problem.encode(&f))
        })
        .collect();
    let best = solve(&problem, starts, solver);
    let g = problem.decode(&best.x);
    let dual_value = problem.grid_max(&g);
    if !(dual_value > 0.0) {
        return Err(Error::Numerical("dual strip problem produced a zero boundary norm".into()));
    }
    let delta = problem.inflation(&g, dual_value);
    let pairing: C64 = g.coeffs[0].iter().zip(&xh).map(|(a, b)| a.conj() * b).sum();
    // witness ξ = g(θ)/‖x‖ satisfies ⟨ξ, x⟩ = ⟨g(θ), x̂⟩
    let witness = scaled(&g.coeffs[0], 1.0 / scale);
    let mut dual_function = g;
    dual_function.coeffs.iter_mut().for_each(|c| *c = scaled(c, 1.0 / scale));
    Ok(LowerBound {
        value: pairing.norm() / dual_value * scale,
        witness,
        dual_function,
        dual_value: dual_value / scale,
        delta,
        converged: best.converged,
    })
}

/// As [`interp_lower_bound`], seeding `ξ` from the boundary subgradients of
/// an upper-bound witness.
pub fn interp_lower_bound_seeded(
    cl: &CoupleLevel,
    theta: f64,
    x: &[C64],
    solver: &SolverParams,
    upper_witness: Option<&StripFunction>,
) -> Result<LowerBound> {
    lower_seeded_impl(cl, theta, x, solver, upper_witness)
}

/// Both bounds; fails if they cross by more than the reported grid slack.
pub fn interp_norm_bounds(cl: &CoupleLevel, theta: f64, x: &[C64], solver: &SolverParams) -> Result<NormBounds> {
    let ub = interp_upper_bound(cl, theta, x, solver)?;
    let lb = interp_lower_bound_seeded(cl, theta, x, solver, Some(&ub.witness))?;
    if lb.value > ub.value * (1.0 + ub.delta) * (1.0 + lb.delta) + 1e-12 {
        return Err(Error::Numerical(format!(
            "lower bound {} exceeds upper bound {} beyond the grid slack",
            lb.value, ub.value
        )));
    }
    Ok(NormBounds {
        // crossing within the grid slack is a discretization artefact
        lower: lb.value.min(ub.value),
        upper: ub.value,
        upper_witness: ub.witness,
        lower_witness: lb.witness,
        upper_converged: ub.converged,
        lower_converged: lb.converged,
        delta_upper: ub.delta,
        delta_lower: lb.delta,
    })
}

/// Gram of `(g₀, g₁)_θ` for Hilbertian norms `(x*gᵢx)^{1/2}`: the weighted
/// geometric mean `g₀^{1/2}(g₀^{−1/2} g₁ g₀^{−1/2})^θ g₀^{1/2}`.
pub fn hilbertian_interp(g0: &HermitianPD, g1: &HermitianPD, theta: f64) -> Result<HermitianPD> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Input(format!("θ must lie in [0, 1], got {theta}")));
    }
    linalg::geometric_mean(g0, g1, theta)
}

#[cfg(test)]
mod tests;
