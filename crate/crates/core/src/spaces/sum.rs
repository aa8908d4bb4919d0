use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{MatrixTuple, NormOracle, SharedOracle, SolverParams};
use crate::error::Result;
use crate::linalg::{complex_gaussian, C64};
use crate::opt::{self, pack, unpack, Schedule};

/// Result of minimizing `N₀(y) + N₁(z)` over splittings `a = y + z`.
#[derive(Clone, Debug)]
pub struct SumSplit {
    /// `N₀(y) + N₁(z)` for the returned split; an upper bound of the sum norm.
    pub value: f64,
    pub y: Vec<C64>,
    pub z: Vec<C64>,
    /// Dual certificate `|⟨φ, a⟩| / max(N₀*(φ), N₁*(φ))` when dual oracles exist.
    pub lower: Option<f64>,
    pub converged: bool,
    /// Relative width `(value − lower) / value`, or the last polish improvement
    /// when no certificate is available.
    pub tolerance: f64,
    pub(crate) shape: (usize, usize, usize),
}

impl SumSplit {
    pub fn y_tuple(&self) -> Result<MatrixTuple> {
        MatrixTuple::from_flat(self.shape.0, self.shape.1, self.shape.2, &self.y)
    }

    pub fn z_tuple(&self) -> Result<MatrixTuple> {
        MatrixTuple::from_flat(self.shape.0, self.shape.1, self.shape.2, &self.z)
    }
}

fn to_real(g: &[C64]) -> Vec<f64> {
    let mut out = vec![0.0; 2 * g.len()];
    pack(&mut out, g);
    out
}

/// Minimizes `N₀(y) + N₁(a − y)`.
///
/// Seeds are `y = a`, `y = a/2`, `y = 0` and random points, up to
/// `solver.restarts` of them.
pub fn split_minimize(
    n0: &dyn NormOracle,
    n1: &dyn NormOracle,
    a: &[C64],
    solver: &SolverParams,
    duals: Option<(&dyn NormOracle, &dyn NormOracle)>,
) -> SumSplit {
    let dim = a.len();
    let scale = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if scale == 0.0 {
        return SumSplit {
            value: 0.0,
            y: a.to_vec(),
            z: a.to_vec(),
            lower: Some(0.0),
            converged: true,
            tolerance: 0.0,
            shape: (dim, 1, 1),
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(solver.seed);
    let mut seeds: Vec<Vec<C64>> = vec![a.to_vec(), a.iter().map(|z| z * 0.5).collect(), vec![C64::new(0.0, 0.0); dim]];
    while seeds.len() < solver.restarts.max(3) {
        let s = scale / (dim as f64).sqrt();
        seeds.push((0..dim).map(|_| complex_gaussian(&mut rng) * s).collect());
    }
    seeds.truncate(solver.restarts.max(1).max(3));

    let objective = |x: &[f64], p: Option<f64>| -> (f64, Vec<f64>) {
        let y = unpack(x);
        let z: Vec<C64> = a.iter().zip(&y).map(|(ai, yi)| ai - yi).collect();
        let ((v0, g0), (v1, g1)) = match p {
            Some(p) => (n0.smoothed(&y, p), n1.smoothed(&z, p)),
            None => (n0.subgradient(&y), n1.subgradient(&z)),
        };
        let g: Vec<C64> = g0.iter().zip(&g1).map(|(u, w)| u - w).collect();
        (v0 + v1, to_real(&g))
    };
    let schedule = Schedule {
        exponents: &solver.smoothing,
        iters_per_stage: solver.max_iters,
        polish_iters: solver.polish_iters,
        step_hint: 0.1 * scale,
    };
    let run = |seed: &Vec<C64>| {
        opt::continuation(|x, p| objective(x, Some(p)), |x| objective(x, None), to_real(seed), &schedule)
    };
    let results: Vec<opt::Minimum> =
        if solver.parallel { seeds.par_iter().map(run).collect() } else { seeds.iter().map(run).collect() };
    let best = results
        .into_iter()
        .min_by(|p, q| p.value.total_cmp(&q.value))
        .expect("at least one seed");

    let y = unpack(&best.x);
    let z: Vec<C64> = a.iter().zip(&y).map(|(ai, yi)| ai - yi).collect();
    let value = n0.norm(&y) + n1.norm(&z);
    let lower = duals.map(|(d0, d1)| {
        let (_, g0) = n0.subgradient(&y);
        let (_, g1) = n1.subgradient(&z);
        let mid: Vec<C64> = g0.iter().zip(&g1).map(|(u, w)| (u + w) * 0.5).collect();
        [g0, g1, mid]
            .iter()
            .map(|phi| {
                let pairing: C64 = phi.iter().zip(a).map(|(p, x)| p.conj() * x).sum();
                let denom = d0.norm(phi).max(d1.norm(phi));
                if denom > 0.0 {
                    pairing.norm() / denom
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
            .min(value)
    });
    let tolerance = match lower {
        Some(lb) if value > 0.0 => (value - lb) / value,
        _ => 0.0,
    };
    SumSplit { value, y, z, lower, converged: best.converged, tolerance, shape: (dim, 1, 1) }
}

/// Level norm oracle of a sum structure, evaluated by splitting.
///
/// Values are upper bounds of the exact sum norm.
pub(crate) struct SumOracle {
    first: SharedOracle,
    second: SharedOracle,
    solver: SolverParams,
}

impl SumOracle {
    pub(crate) fn new(first: SharedOracle, second: SharedOracle, solver: SolverParams) -> Self {
        SumOracle { first, second, solver }
    }
}

impl NormOracle for SumOracle {
    fn dim(&self) -> usize {
        self.first.dim()
    }

    fn norm(&self, v: &[C64]) -> f64 {
        split_minimize(self.first.as_ref(), self.second.as_ref(), v, &self.solver, None).value
    }

    fn subgradient(&self, v: &[C64]) -> (f64, Vec<C64>) {
        let split = split_minimize(self.first.as_ref(), self.second.as_ref(), v, &self.solver, None);
        // at an optimal split both pieces share a subgradient
        let (_, g0) = self.first.subgradient(&split.y);
        let (_, g1) = self.second.subgradient(&split.z);
        let g = g0.iter().zip(&g1).map(|(u, w)| (u + w) * 0.5).collect();
        (split.value, g)
    }

    fn describe(&self) -> String {
        format!("{} + {}", self.first.describe(), self.second.describe())
    }
}
