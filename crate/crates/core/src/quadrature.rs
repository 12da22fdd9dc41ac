//! Tensor quadrature on `[−π, π]^d` with dyadic refinement toward the origin,
//! where the integrands of interest behave like `‖θ‖^{−2}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-dimensional base rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadScheme {
    TensorGauss,
    TensorTrapezoid,
}

/// Parameters of the singular cube quadrature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub scheme: QuadScheme,
    pub points_per_axis: usize,
    pub origin_refinement_levels: usize,
    pub rel_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            scheme: QuadScheme::TensorGauss,
            points_per_axis: 12,
            origin_refinement_levels: 24,
            rel_tol: 1e-6,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points_per_axis < 8 {
            return Err(Error::InvalidArgument(format!(
                "points_per_axis must be >= 8, got {}",
                self.points_per_axis
            )));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rel_tol must be > 0, got {}",
                self.rel_tol
            )));
        }
        if self.origin_refinement_levels < 2 {
            return Err(Error::InvalidArgument(
                "origin_refinement_levels must be >= 2".into(),
            ));
        }
        Ok(())
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(z) and P_{n−1}(z)
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let (pn, pn1) = if n == 1 { (z, 1.0) } else { (p1, p0) };
            dp = nf * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Composite rule on `[a, b]` with `panels` equal panels of `order` points.
pub fn composite_rule(
    scheme: QuadScheme,
    order: usize,
    a: f64,
    b: f64,
    panels: usize,
) -> (Vec<f64>, Vec<f64>) {
    let panels = panels.max(1);
    let hw = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * order);
    let mut ws = Vec::with_capacity(panels * order);
    match scheme {
        QuadScheme::TensorGauss => {
            let (gx, gw) = gauss_legendre(order);
            for p in 0..panels {
                let lo = a + p as f64 * hw;
                for (x, w) in gx.iter().zip(&gw) {
                    xs.push(lo + 0.5 * hw * (x + 1.0));
                    ws.push(0.5 * hw * w);
                }
            }
        }
        QuadScheme::TensorTrapezoid => {
            let m = panels * (order - 1);
            let step = (b - a) / m as f64;
            for k in 0..=m {
                xs.push(a + k as f64 * step);
                ws.push(if k == 0 || k == m { 0.5 * step } else { step });
            }
        }
    }
    (xs, ws)
}

/// `∫_a^b f` with a composite Gauss rule.
pub fn integrate_1d(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (xs, ws) = composite_rule(QuadScheme::TensorGauss, order, a, b, panels);
    xs.iter().zip(&ws).map(|(&x, &w)| w * f(x)).sum()
}

/// Axis-aligned box.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Cell {
    pub fn width(&self, k: usize) -> f64 {
        self.hi[k] - self.lo[k]
    }
}

/// Tensor rule on a cell: per-axis nodes and weights.
pub struct TensorRule {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
}

impl TensorRule {
    /// `panels[k]` equal panels along axis `k`.
    pub fn new(cell: &Cell, scheme: QuadScheme, order: usize, panels: &[usize]) -> Self {
        let (nodes, weights) = (0..cell.lo.len())
            .map(|k| composite_rule(scheme, order, cell.lo[k], cell.hi[k], panels[k]))
            .unzip();
        TensorRule { nodes, weights }
    }

    /// Sum `w(θ)·f(θ)` over the tensor grid.
    pub fn integrate(&self, f: &impl Fn(&[f64]) -> f64) -> f64 {
        let d = self.nodes.len();
        let sizes: Vec<usize> = self.nodes.iter().map(|n| n.len()).collect();
        let total: usize = sizes.iter().product();
        let mut idx = vec![0usize; d];
        let mut theta: Vec<f64> = self.nodes.iter().map(|n| n[0]).collect();
        let mut sum = 0.0;
        for _ in 0..total {
            let w: f64 = (0..d).map(|k| self.weights[k][idx[k]]).product();
            sum += w * f(&theta);
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < sizes[k] {
                    theta[k] = self.nodes[k][idx[k]];
                    break;
                }
                idx[k] = 0;
                theta[k] = self.nodes[k][0];
            }
        }
        sum
    }
}

/// Panels per axis so that each panel spans at most half an oscillation of
/// `cos(freq_k θ_k)`.
pub fn panels_for(cell: &Cell, freq: &[f64], multiplier: usize) -> Vec<usize> {
    (0..cell.lo.len())
        .map(|k| {
            let m = (freq[k] * cell.width(k) / std::f64::consts::PI).ceil() as usize;
            m.max(1) * multiplier
        })
        .collect()
}

/// Cells of refinement shell `level`: the region between the cubes of
/// half-width `π 2^{−level}` and `π 2^{−level−1}`, restricted to the
/// nonnegative orthant when `orthant` is set.
pub fn shell_cells(d: usize, orthant: bool, level: usize) -> Vec<Cell> {
    let a = std::f64::consts::PI * 0.5f64.powi(level as i32);
    let half = a / 2.0;
    // per-axis intervals of the subdivision and whether each is the inner one
    let intervals: Vec<(f64, f64, bool)> = if orthant {
        vec![(0.0, half, true), (half, a, false)]
    } else {
        vec![
            (-a, -half, false),
            (-half, 0.0, true),
            (0.0, half, true),
            (half, a, false),
        ]
    };
    let m = intervals.len();
    let mut cells = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        if idx.iter().any(|&i| !intervals[i].2) {
            cells.push(Cell {
                lo: idx.iter().map(|&i| intervals[i].0).collect(),
                hi: idx.iter().map(|&i| intervals[i].1).collect(),
            });
        }
        let mut k = d;
        loop {
            if k == 0 {
                return cells;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Contribution of one refinement shell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellEstimate {
    pub level: usize,
    pub value: f64,
}

/// Result of the singular cube quadrature with diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeQuadrature {
    pub value: f64,
    pub error_estimate: f64,
    pub tail: f64,
    pub levels: usize,
    pub shells: Vec<ShellEstimate>,
}

/// Integrates over `[−π, π]^d` (or over `[0, π]^d` when `orthant`, which the
/// caller multiplies out by symmetry) an integrand with a `‖θ‖^{−2}`
/// singularity at the origin.
///
/// `cell_integral(cell, order, panel_multiplier)` must return the integral
/// over one cell with a tensor rule of the given order. Shells are summed
/// down to `origin_refinement_levels`; the innermost cube is estimated from
/// the homogeneity of the singularity (each shell is `2^{2−d}` times the
/// previous one). The error estimate combines the change from dropping the
/// last shell and the difference between orders `p` and `p + 4`. On failure
/// the rule is refined (more panels and shells) up to three times.
pub fn integrate_dyadic<F>(
    d: usize,
    orthant: bool,
    spec: &QuadratureSpec,
    cell_integral: F,
) -> Result<CubeQuadrature>
where
    F: Fn(&Cell, usize, usize) -> f64 + Sync,
{
    spec.validate()?;
    if d < 3 {
        return Err(Error::Unsupported(format!(
            "the θ^-2 singularity is not integrable in d = {d}"
        )));
    }
    let ratio = 2f64.powi(2 - d as i32);
    let mut best_estimate = f64::INFINITY;
    for attempt in 0..4usize {
        let levels = spec.origin_refinement_levels + 4 * attempt;
        let multiplier = 1usize << attempt;
        let cells: Vec<(usize, Cell)> = (0..levels)
            .flat_map(|l| shell_cells(d, orthant, l).into_iter().map(move |c| (l, c)))
            .collect();
        let p = spec.points_per_axis;
        let vals: Vec<(f64, f64)> = cells
            .par_iter()
            .map(|(_, c)| {
                (
                    cell_integral(c, p, multiplier),
                    cell_integral(c, p + 4, multiplier),
                )
            })
            .collect();
        let mut shells_lo = vec![0.0; levels];
        let mut shells_hi = vec![0.0; levels];
        for ((l, _), (lo, hi)) in cells.iter().zip(&vals) {
            shells_lo[*l] += lo;
            shells_hi[*l] += hi;
        }
        let total = |s: &[f64], upto: usize| -> (f64, f64) {
            let tail = s[upto - 1] * ratio / (1.0 - ratio);
            (s[..upto].iter().sum::<f64>() + tail, tail)
        };
        let (value, tail) = total(&shells_hi, levels);
        let (value_lo, _) = total(&shells_lo, levels);
        let (value_short, _) = total(&shells_hi, levels - 1);
        let estimate = (value - value_lo).abs() + (value - value_short).abs();
        let rel = estimate / value.abs().max(f64::MIN_POSITIVE);
        if rel <= spec.rel_tol {
            return Ok(CubeQuadrature {
                value,
                error_estimate: estimate,
                tail,
                levels,
                shells: shells_hi
                    .iter()
                    .enumerate()
                    .map(|(level, &value)| ShellEstimate { level, value })
                    .collect(),
            });
        }
        best_estimate = best_estimate.min(rel);
    }
    Err(Error::QuadratureNotConverged {
        rel_tol: spec.rel_tol,
        estimate: best_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 8, 16, 20] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            // exact up to degree 2n − 1
            let deg = 2 * n - 1;
            let q: f64 = x
                .iter()
                .zip(&w)
                .map(|(x, w)| w * x.powi(deg as i32 - 1))
                .sum();
            let exact = if (deg - 1) % 2 == 0 {
                2.0 / deg as f64
            } else {
                0.0
            };
            assert!((q - exact).abs() < 1e-13, "n={n}: {q} vs {exact}");
        }
    }

    #[test]
    fn shells_tile_the_cube() {
        for orthant in [true, false] {
            let d = 3;
            let levels = 6;
            let vol: f64 = (0..levels)
                .flat_map(|l| shell_cells(d, orthant, l))
                .map(|c| (0..d).map(|k| c.width(k)).product::<f64>())
                .sum();
            let side = if orthant { PI } else { 2.0 * PI };
            let inner = side * 0.5f64.powi(levels as i32);
            assert!((vol + inner.powi(3) - side.powi(3)).abs() < 1e-9);
            let per = shell_cells(d, orthant, 0).len();
            assert_eq!(per, if orthant { 7 } else { 56 });
        }
    }

    #[test]
    fn inverse_square_over_ball_like_cube() {
        // ∫_{[−π,π]^3} ‖θ‖^{-2} against the same integral computed over the orthant
        let spec = QuadratureSpec {
            rel_tol: 1e-8,
            ..Default::default()
        };
        let f = |t: &[f64]| 1.0 / t.iter().map(|x| x * x).sum::<f64>();
        let cell = |c: &Cell, p: usize, m: usize| {
            TensorRule::new(c, QuadScheme::TensorGauss, p, &vec![m; 3]).integrate(&f)
        };
        let full = integrate_dyadic(3, false, &spec, cell).unwrap();
        let orth = integrate_dyadic(3, true, &spec, cell).unwrap();
        assert!((full.value - 8.0 * orth.value).abs() < 1e-8 * full.value);
        // radial oracle: inside the ball of radius π the integral is 4π·π
        assert!(full.value > 4.0 * PI * PI);
    }

    #[test]
    fn homogeneous_tail_is_exact() {
        // for an exactly homogeneous integrand the truncated shells plus tail are exact
        let spec = QuadratureSpec {
            origin_refinement_levels: 3,
            rel_tol: 1e-9,
            ..Default::default()
        };
        let f = |t: &[f64]| 1.0 / t.iter().map(|x| x * x).sum::<f64>();
        let cell = |c: &Cell, p: usize, m: usize| {
            TensorRule::new(c, QuadScheme::TensorGauss, p, &vec![m; 3]).integrate(&f)
        };
        let a = integrate_dyadic(3, true, &spec, cell).unwrap();
        let b = integrate_dyadic(
            3,
            true,
            &QuadratureSpec {
                origin_refinement_levels: 10,
                ..spec.clone()
            },
            cell,
        )
        .unwrap();
        assert!((a.value - b.value).abs() < 1e-9 * b.value);
    }

    #[test]
    fn spec_validation() {
        let mut s = QuadratureSpec::default();
        assert!(s.validate().is_ok());
        s.points_per_axis = 4;
        assert!(s.validate().is_err());
        s.points_per_axis = 8;
        s.rel_tol = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn trapezoid_rule_weights() {
        let (x, w) = composite_rule(QuadScheme::TensorTrapezoid, 9, 0.0, 1.0, 2);
        assert_eq!(x.len(), 17);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
