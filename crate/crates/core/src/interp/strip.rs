use super::grid::{arc_spacing, disk_to_strip, strip_to_disk, BoundaryPoint};
use crate::linalg::C64;
use crate::opt::pack;
use crate::spaces::NormOracle;

/// `f(z) = e^{ρ(z−θ)} Σⱼ cⱼ w(z)ʲ`, analytic and bounded on the strip, with
/// `f(θ) = c₀`.
///
/// On the line `Re z = j` the factor has modulus `e^{ρ(j−θ)}`; norms are
/// absolutely homogeneous, so only that modulus enters boundary norms.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct StripFunction {
    pub theta: f64,
    pub rho: f64,
    /// `coeffs[j]` is `cⱼ`; all have the coefficient-space dimension.
    pub coeffs: Vec<Vec<C64>>,
}

impl StripFunction {
    pub fn constant(theta: f64, x: Vec<C64>) -> Self {
        StripFunction { theta, rho: 0.0, coeffs: vec![x] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn value_at_theta(&self) -> &[C64] {
        &self.coeffs[0]
    }

    /// `Σⱼ cⱼ wʲ`.
    pub fn polynomial(&self, w: C64) -> Vec<C64> {
        let mut out = self.coeffs[0].clone();
        let mut wj = C64::new(1.0, 0.0);
        for c in &self.coeffs[1..] {
            wj *= w;
            out.iter_mut().zip(c).for_each(|(o, ci)| *o += ci * wj);
        }
        out
    }

    pub fn eval(&self, z: C64) -> Vec<C64> {
        let factor = (self.rho * (z - self.theta)).exp();
        self.polynomial(strip_to_disk(self.theta, z)).into_iter().map(|v| v * factor).collect()
    }

    /// Modulus of the exponential factor on boundary line `label`.
    pub fn boundary_weight(&self, label: u8) -> f64 {
        (self.rho * (label as f64 - self.theta)).exp()
    }

    /// Value of `f` at a boundary node, when the node has a finite strip preimage.
    pub fn eval_boundary(&self, p: &BoundaryPoint) -> Option<Vec<C64>> {
        disk_to_strip(self.theta, p.w).map(|z| self.eval(z))
    }

    /// Same family with degree raised to `m` by zero coefficients.
    pub fn padded(&self, m: usize) -> Self {
        let mut f = self.clone();
        let dim = f.coeffs[0].len();
        while f.coeffs.len() < m + 1 {
            f.coeffs.push(vec![C64::new(0.0, 0.0); dim]);
        }
        f
    }
}

/// How `c₀` is pinned in a strip problem.
#[derive(Clone, Debug)]
pub(crate) enum Anchor {
    /// `c₀ = x`.
    Fixed(Vec<C64>),
    /// `c₀ = x/‖x‖² + y − Re⟨x,y⟩ x/‖x‖²` with `y` free, so `Re⟨c₀, x⟩ = 1`.
    Normalized(Vec<C64>),
}

/// `min max_{grid} e^{ρ(label−θ)} N_label(Σⱼ cⱼ wʲ)` over `ρ` and the free
/// coefficients.
///
/// Variable layout: `[ρ, c₀-free?, c₁, …, c_m]`, complex blocks interleaved.
pub(crate) struct StripProblem<'a> {
    pub norms: [&'a dyn NormOracle; 2],
    pub grid: &'a [BoundaryPoint],
    pub theta: f64,
    pub degree: usize,
    pub anchor: Anchor,
    dim: usize,
    /// `powers[i][j] = w_iʲ` for `j = 0..=m`.
    powers: Vec<Vec<C64>>,
}

impl<'a> StripProblem<'a> {
    pub fn new(norms: [&'a dyn NormOracle; 2], grid: &'a [BoundaryPoint], theta: f64, degree: usize, anchor: Anchor) -> Self {
        let dim = match &anchor {
            Anchor::Fixed(x) | Anchor::Normalized(x) => x.len(),
        };
        let powers = grid
            .iter()
            .map(|p| {
                let mut row = Vec::with_capacity(degree + 1);
                let mut wj = C64::new(1.0, 0.0);
                for _ in 0..=degree {
                    row.push(wj);
                    wj *= p.w;
                }
                row
            })
            .collect();
        StripProblem { norms, grid, theta, degree, anchor, dim, powers }
    }

    fn free_c0(&self) -> bool {
        matches!(self.anchor, Anchor::Normalized(_))
    }

    pub fn n_vars(&self) -> usize {
        1 + 2 * self.dim * (self.degree + usize::from(self.free_c0()))
    }

    fn c0_of(&self, y: &[C64]) -> Vec<C64> {
        match &self.anchor {
            Anchor::Fixed(x) => x.clone(),
            Anchor::Normalized(x) => {
                let xx: f64 = x.iter().map(|v| v.norm_sqr()).sum();
                let re: f64 = x.iter().zip(y).map(|(a, b)| (a.conj() * b).re).sum();
                x.iter().zip(y).map(|(a, b)| a * ((1.0 - re) / xx) + b).collect()
            }
        }
    }

    /// Projects a `c₀`-gradient onto the free direction.
    fn c0_gradient(&self, g: &[C64]) -> Vec<C64> {
        match &self.anchor {
            Anchor::Fixed(_) => Vec::new(),
            Anchor::Normalized(x) => {
                let xx: f64 = x.iter().map(|v| v.norm_sqr()).sum();
                let re: f64 = x.iter().zip(g).map(|(a, b)| (a.conj() * b).re).sum();
                x.iter().zip(g).map(|(a, b)| b - a * (re / xx)).collect()
            }
        }
    }

    pub fn decode(&self, vars: &[f64]) -> StripFunction {
        let rho = vars[0];
        let blocks: Vec<Vec<C64>> = vars[1..]
            .chunks_exact(2 * self.dim)
            .map(|b| b.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect())
            .collect();
        let (c0, rest) = if self.free_c0() {
            (self.c0_of(&blocks[0]), &blocks[1..])
        } else {
            (self.c0_of(&[]), &blocks[..])
        };
        let mut coeffs = vec![c0];
        coeffs.extend(rest.iter().cloned());
        StripFunction { theta: self.theta, rho, coeffs }
    }

    /// Variables reproducing `f` (which must have degree ≤ m). For a
    /// normalized anchor, `f`'s `c₀` must satisfy `Re⟨c₀, x⟩ = 1`.
    pub fn encode(&self, f: &StripFunction) -> Vec<f64> {
        let mut vars = vec![0.0; self.n_vars()];
        vars[0] = f.rho;
        let mut offset = 1;
        let block = 2 * self.dim;
        if self.free_c0() {
            pack(&mut vars[offset..offset + block], &f.coeffs[0]);
            offset += block;
        }
        for c in f.coeffs.iter().skip(1).take(self.degree) {
            pack(&mut vars[offset..offset + block], c);
            offset += block;
        }
        vars
    }

    /// Per-node values `t_i = λ N(P(w_i))` and their complex gradients
    /// with respect to `P(w_i)`, smoothed when `p` is given.
    fn node_terms(&self, f: &StripFunction, p: Option<f64>) -> Vec<(f64, Vec<C64>)> {
        let lambdas = [f.boundary_weight(0), f.boundary_weight(1)];
        self.grid
            .iter()
            .zip(&self.powers)
            .map(|(pt, pw)| {
                let mut v = f.coeffs[0].clone();
                for (c, wj) in f.coeffs.iter().zip(pw).skip(1) {
                    v.iter_mut().zip(c).for_each(|(o, ci)| *o += ci * wj);
                }
                let oracle = self.norms[pt.label as usize];
                let (n, g) = match p {
                    Some(p) => oracle.smoothed(&v, p),
                    None => oracle.subgradient(&v),
                };
                let lam = lambdas[pt.label as usize];
                (lam * n, g.into_iter().map(|gi| gi * lam).collect())
            })
            .collect()
    }

    /// Objective and real gradient; exact max when `p` is `None`, otherwise
    /// the `ℓ_p` aggregate of smoothed node values.
    pub fn objective(&self, vars: &[f64], p: Option<f64>) -> (f64, Vec<f64>) {
        let f = self.decode(vars);
        let terms = self.node_terms(&f, p);
        let tmax = terms.iter().map(|t| t.0).fold(0.0, f64::max);
        let mut grad = vec![0.0; vars.len()];
        if tmax <= 0.0 || !tmax.is_finite() {
            return (tmax, grad);
        }
        let (value, node_weights): (f64, Vec<f64>) = match p {
            None => {
                let arg = terms.iter().position(|t| t.0 == tmax).unwrap_or(0);
                let mut w = vec![0.0; terms.len()];
                w[arg] = 1.0;
                (tmax, w)
            }
            Some(p) => {
                let s: f64 = terms.iter().map(|t| (t.0 / tmax).powf(p)).sum();
                let value = tmax * s.powf(1.0 / p);
                (value, terms.iter().map(|t| (t.0 / value).powf(p - 1.0)).collect())
            }
        };
        let block = 2 * self.dim;
        let mut c0_grad = vec![C64::new(0.0, 0.0); self.dim];
        for (((pt, pw), (t, g)), &a) in self.grid.iter().zip(&self.powers).zip(&terms).zip(&node_weights) {
            if a == 0.0 {
                continue;
            }
            grad[0] += a * (pt.label as f64 - self.theta) * t;
            if self.free_c0() {
                c0_grad.iter_mut().zip(g).for_each(|(o, gi)| *o += gi * a);
            }
            let first = 1 + if self.free_c0() { block } else { 0 };
            for j in 1..=self.degree {
                let cw = pw[j].conj() * a;
                let off = first + (j - 1) * block;
                for (q, gi) in g.iter().enumerate() {
                    let v = gi * cw;
                    grad[off + 2 * q] += v.re;
                    grad[off + 2 * q + 1] += v.im;
                }
            }
        }
        if self.free_c0() {
            let proj = self.c0_gradient(&c0_grad);
            pack(&mut grad[1..1 + block], &proj);
        }
        (value, grad)
    }

    /// Exact grid maximum of `f`.
    pub fn grid_max(&self, f: &StripFunction) -> f64 {
        self.node_terms(f, None).iter().map(|t| t.0).fold(0.0, f64::max)
    }

    /// Lipschitz inflation `δ` with `sup_boundary ≤ (1 + δ)·grid max`.
    pub fn inflation(&self, f: &StripFunction, grid_value: f64) -> f64 {
        if grid_value <= 0.0 {
            return 0.0;
        }
        let g = self.grid.len() / 2;
        let mut worst: f64 = 0.0;
        for label in [0u8, 1] {
            let oracle = self.norms[label as usize];
            let slope: f64 = f.coeffs.iter().enumerate().skip(1).map(|(j, c)| j as f64 * oracle.norm(c)).sum();
            let bound = f.boundary_weight(label) * slope * arc_spacing(self.theta, g, label) / 2.0;
            worst = worst.max(bound);
        }
        worst / grid_value
    }
}
