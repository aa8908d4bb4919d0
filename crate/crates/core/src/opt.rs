//! First-order minimizers used by the interpolation, splitting and
//! factorization searches.
//!
//! All problems are posed over real vectors; complex coefficient blocks are
//! packed as interleaved `(re, im)` pairs.

use crate::linalg::C64;

pub(crate) fn pack(dst: &mut [f64], src: &[C64]) {
    for (pair, z) in dst.chunks_exact_mut(2).zip(src) {
        pair[0] = z.re;
        pair[1] = z.im;
    }
}

pub(crate) fn unpack(src: &[f64]) -> Vec<C64> {
    src.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Debug)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

/// Limited-memory BFGS with Armijo backtracking.
///
/// `step_hint` sets the length of the very first trial step.
pub(crate) fn lbfgs<F>(mut f: F, x0: Vec<f64>, max_iters: usize, step_hint: f64) -> Minimum
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    const MEMORY: usize = 12;
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() {
        return Minimum { x, value: fx, converged: false };
    }
    let mut s_hist: Vec<Vec<f64>> = Vec::with_capacity(MEMORY);
    let mut y_hist: Vec<Vec<f64>> = Vec::with_capacity(MEMORY);
    let mut stalls = 0;
    let mut converged = false;

    for _ in 0..max_iters {
        let gnorm = norm(&g);
        if gnorm <= 1e-14 * fx.abs().max(1e-300) {
            converged = true;
            break;
        }
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, y) in s_hist.iter().zip(&y_hist).rev() {
            let rho = 1.0 / dot(y, s);
            let a = rho * dot(s, &d);
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
            alphas.push((a, rho));
        }
        let gamma = match (s_hist.last(), y_hist.last()) {
            (Some(s), Some(y)) => dot(s, y) / dot(y, y),
            _ => step_hint / gnorm,
        };
        d.iter_mut().for_each(|di| *di *= gamma);
        for ((s, y), (a, rho)) in s_hist.iter().zip(&y_hist).zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            s_hist.clear();
            y_hist.clear();
            d = g.iter().map(|v| -v * step_hint / gnorm).collect();
            slope = dot(&g, &d);
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            let (ft, gt) = f(&xt);
            if ft.is_finite() && ft <= fx + 1e-4 * t * slope {
                accepted = Some((xt, ft, gt));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            if s_hist.is_empty() {
                converged = true;
                break;
            }
            s_hist.clear();
            y_hist.clear();
            continue;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        let decrease = fx - fnew;
        x = xn;
        g = gn;
        fx = fnew;
        if decrease <= 1e-13 * fx.abs() {
            stalls += 1;
            if stalls >= 5 {
                converged = true;
                break;
            }
        } else {
            stalls = 0;
        }
    }
    Minimum { x, value: fx, converged }
}

/// Subgradient descent with Polyak steps toward an adaptive target level.
/// Returns the best point visited.
pub(crate) fn polyak<F>(mut f: F, x0: Vec<f64>, iters: usize) -> Minimum
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut best = Minimum { x: x.clone(), value: fx, converged: false };
    let mut gap = 1e-3 * fx.abs().max(1e-300);
    let mut since_improvement = 0;
    for _ in 0..iters {
        let gg = dot(&g, &g);
        if gg <= 0.0 || !fx.is_finite() {
            best.converged = true;
            break;
        }
        let target = best.value - gap;
        let step = (fx - target) / gg;
        x.iter_mut().zip(&g).for_each(|(xi, gi)| *xi -= step * gi);
        let (fnew, gnew) = f(&x);
        fx = fnew;
        g = gnew;
        if fx < best.value {
            best.x.clone_from(&x);
            best.value = fx;
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= 10 {
                gap *= 0.5;
                since_improvement = 0;
                x.clone_from(&best.x);
                let (f0, g0) = f(&x);
                fx = f0;
                g = g0;
            }
        }
        if gap < 1e-12 * best.value.abs() {
            best.converged = true;
            break;
        }
    }
    best
}

/// Settings for [`continuation`].
#[derive(Clone, Debug)]
pub(crate) struct Schedule<'a> {
    pub exponents: &'a [f64],
    pub iters_per_stage: usize,
    pub polish_iters: usize,
    pub step_hint: f64,
}

/// Minimizes a max-type objective by L-BFGS on smoothed surrogates of
/// increasing sharpness, then polishes with Polyak subgradient steps.
///
/// `smoothed(x, p)` must converge to `exact(x)` as `p → ∞`. The returned
/// value is always the exact objective at the returned point.
pub(crate) fn continuation<S, E>(mut smoothed: S, mut exact: E, x0: Vec<f64>, schedule: &Schedule<'_>) -> Minimum
where
    S: FnMut(&[f64], f64) -> (f64, Vec<f64>),
    E: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let v0 = exact(&x0).0;
    let mut best = Minimum { x: x0, value: v0, converged: false };
    let mut x = best.x.clone();
    let mut hint = schedule.step_hint;
    for &p in schedule.exponents {
        let m = lbfgs(|y| smoothed(y, p), x, schedule.iters_per_stage, hint);
        let v = exact(&m.x).0;
        if v < best.value {
            best = Minimum { x: m.x.clone(), value: v, converged: m.converged };
        }
        hint = (hint * 0.5).max(1e-6 * schedule.step_hint);
        x = m.x;
    }
    if schedule.polish_iters > 0 {
        let m = polyak(&mut exact, best.x.clone(), schedule.polish_iters);
        if m.value < best.value {
            best = Minimum { x: m.x, value: m.value, converged: best.converged || m.converged };
        }
    }
    best
}
