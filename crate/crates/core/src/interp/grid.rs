//! Conformal data: the strip `0 ≤ Re z ≤ 1` mapped onto the unit disk with
//! `θ ↦ 0`.
//!
//! `ζ = e^{iπz}` sends the strip to the closed upper half plane and
//! `w = (ζ − ζ₀)/(ζ − ζ̄₀)` with `ζ₀ = e^{iπθ}` sends that to the disk. The
//! line `Re z = 1` becomes the arc of angles `[0, 2πθ]` and the line
//! `Re z = 0` the arc `[2πθ, 2π]`, so the harmonic measures seen from the
//! centre are `θ` and `1 − θ`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// One boundary node of the discretized strip.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPoint {
    /// Disk coordinate, `|w| = 1`.
    pub w: C64,
    /// Angle of `w` in `[0, 2π]`.
    pub angle: f64,
    /// Which boundary line: `0` for `Re z = 0`, `1` for `Re z = 1`.
    pub label: u8,
    /// Trapezoid weight of the harmonic measure at `θ`; the weights of each
    /// label sum to its harmonic measure.
    pub weight: f64,
}

impl BoundaryPoint {
    /// Strip coordinate, or `None` at the two arc junctions (`Im z = ±∞`).
    pub fn z(&self, theta: f64) -> Option<C64> {
        disk_to_strip(theta, self.w)
    }
}

/// `G` equispaced nodes (endpoints included) on each of the two arcs.
pub fn conformal_boundary_grid(theta: f64, g: usize) -> Result<Vec<BoundaryPoint>> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Input(format!("θ must lie in (0, 1), got {theta}")));
    }
    if g < 8 {
        return Err(Error::Config(format!("grid size must be at least 8, got {g}")));
    }
    let mut points = Vec::with_capacity(2 * g);
    let arcs = [(1u8, 0.0, 2.0 * PI * theta, theta), (0u8, 2.0 * PI * theta, 2.0 * PI, 1.0 - theta)];
    for (label, start, end, measure) in arcs {
        let h = (end - start) / (g - 1) as f64;
        for j in 0..g {
            let angle = start + h * j as f64;
            let trapezoid = if j == 0 || j == g - 1 { 0.5 } else { 1.0 };
            points.push(BoundaryPoint {
                w: C64::from_polar(1.0, angle),
                angle,
                label,
                weight: trapezoid * measure / (g - 1) as f64,
            });
        }
    }
    Ok(points)
}

/// Arc spacing of label `label` for a grid of `g` nodes per arc.
pub(crate) fn arc_spacing(theta: f64, g: usize, label: u8) -> f64 {
    let measure = if label == 1 { theta } else { 1.0 - theta };
    2.0 * PI * measure / (g - 1) as f64
}

pub fn strip_to_disk(theta: f64, z: C64) -> C64 {
    let zeta = (I * PI * z).exp();
    let zeta0 = C64::from_polar(1.0, PI * theta);
    (zeta - zeta0) / (zeta - zeta0.conj())
}

/// Inverse of [`strip_to_disk`], with `Re z` reduced to `[0, 1]`.
/// Returns `None` for `w = 1` and `w = e^{2πiθ}`, the images of `Im z = ∓∞`.
pub fn disk_to_strip(theta: f64, w: C64) -> Option<C64> {
    let zeta0 = C64::from_polar(1.0, PI * theta);
    let denom = w - 1.0;
    if denom.norm() < 1e-14 {
        return None;
    }
    let zeta = (w * zeta0.conj() - zeta0) / denom;
    if zeta.norm() < 1e-14 {
        return None;
    }
    let mut z = zeta.ln() / (I * PI);
    // ln has argument in (−π, π]; the closed upper half plane needs [0, π]
    if z.re < -1e-12 {
        z.re += 2.0;
    }
    Some(C64::new(z.re.clamp(0.0, 1.0), z.im))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_has_two_g_points() {
        let grid = conformal_boundary_grid(0.3, 8).unwrap();
        assert_eq!(grid.len(), 16);
        assert_eq!(grid.iter().filter(|p| p.label == 1).count(), 8);
    }

    #[test]
    fn half_grid_is_conjugation_symmetric() {
        let grid = conformal_boundary_grid(0.5, 16).unwrap();
        for p in &grid {
            let q = p.w.conj();
            assert!(grid.iter().any(|r| (r.w - q).norm() < 1e-12), "missing conjugate of {}", p.w);
        }
    }

    #[test]
    fn weights_match_harmonic_measure_quadrature() {
        // density of the harmonic measure at θ on the line Re z = 1, in t = Im z
        let theta: f64 = 0.25;
        let density = |t: f64| {
            let (s, c) = (PI * theta).sin_cos();
            let e = (-PI * t).exp();
            s * e / ((e + c).powi(2) + s * s)
        };
        let steps = 200_000;
        let (lo, hi) = (-40.0, 40.0);
        let h = (hi - lo) / steps as f64;
        let integral: f64 = (0..steps).map(|i| density(lo + (i as f64 + 0.5) * h) * h).sum();
        assert_abs_diff_eq!(integral, theta, epsilon = 1e-6);

        let grid = conformal_boundary_grid(theta, 64).unwrap();
        let w1: f64 = grid.iter().filter(|p| p.label == 1).map(|p| p.weight).sum();
        let w0: f64 = grid.iter().filter(|p| p.label == 0).map(|p| p.weight).sum();
        assert_abs_diff_eq!(w1, integral, epsilon = 1e-6);
        assert_abs_diff_eq!(w0, 1.0 - integral, epsilon = 1e-6);
    }

    #[test]
    fn labels_agree_with_strip_lines() {
        let theta = 0.37;
        for p in conformal_boundary_grid(theta, 32).unwrap() {
            if let Some(z) = p.z(theta) {
                assert_abs_diff_eq!(z.re, p.label as f64, epsilon = 1e-9);
                assert!((strip_to_disk(theta, z) - p.w).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn theta_maps_to_centre() {
        assert!(strip_to_disk(0.3, C64::new(0.3, 0.0)).norm() < 1e-15);
        let z = C64::new(0.4, -0.7);
        let back = disk_to_strip(0.6, strip_to_disk(0.6, z)).unwrap();
        assert!((back - z).norm() < 1e-12);
    }
}
