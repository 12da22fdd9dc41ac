//! Finite-volume Green's functions `G_Λ = J^{−1}`, Dirichlet solves, and the
//! infinite-volume covariance by Fourier inversion of the symbol.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{symbol_mu, Coefficients, GridFunction, SparseSymOperator};
use crate::quadrature::{integrate_dyadic, panels_for, CubeQuadrature, QuadratureSpec, TensorRule};
use crate::sparse::norm_inf;

/// Relative residual accepted for Green columns and Dirichlet solves.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-9;

/// `y ↦ G_Λ(x, y)` for a fixed source `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenColumn {
    pub source: Vec<i64>,
    pub source_index: usize,
    pub values: GridFunction,
}

impl GreenColumn {
    /// CSV with node coordinates (integer lattice units) and value.
    pub fn write_csv<W: Write>(&self, op: &SparseSymOperator, mut w: W) -> Result<()> {
        let dom = op.domain();
        let cols: Vec<String> = (0..dom.dim()).map(|k| format!("z{k}")).collect();
        writeln!(w, "{},value", cols.join(","))?;
        for (i, v) in self.values.values.iter().enumerate() {
            let z: Vec<String> = dom.node(i).iter().map(|c| c.to_string()).collect();
            writeln!(w, "{},{v:.17e}", z.join(","))?;
        }
        Ok(())
    }
}

fn checked_solve(op: &SparseSymOperator, b: &[f64]) -> Result<Vec<f64>> {
    let x = op.solver()?.solve(b)?;
    let r: Vec<f64> = op
        .matrix()
        .mul_vec(&x)
        .iter()
        .zip(b)
        .map(|(a, b)| a - b)
        .collect();
    let res = norm_inf(&r);
    let scale = norm_inf(&x).max(norm_inf(b));
    if res > SOLVE_RESIDUAL_TOL * scale {
        return Err(Error::SolveFailure(format!(
            "residual {res:e} exceeds {SOLVE_RESIDUAL_TOL:e} · {scale:e}"
        )));
    }
    Ok(x)
}

/// Solve `J G(x, ·) = δ_x` with zero exterior values.
pub fn green_column(op: &SparseSymOperator, x: &[i64]) -> Result<GreenColumn> {
    let i = op.domain().index_of(x).ok_or(Error::NotInterior)?;
    green_column_index(op, i)
}

/// [`green_column`] addressed by interior index.
pub fn green_column_index(op: &SparseSymOperator, i: usize) -> Result<GreenColumn> {
    if i >= op.n() {
        return Err(Error::NotInterior);
    }
    let x = checked_solve(op, &GridFunction::delta(op.n(), i).values)?;
    Ok(GreenColumn {
        source: op.domain().node(i).to_vec(),
        source_index: i,
        values: GridFunction::new(x),
    })
}

/// Solve `op · u = f` on the interior with `u = 0` outside.
pub fn dirichlet_solve(op: &SparseSymOperator, f: &GridFunction) -> Result<GridFunction> {
    if f.len() != op.n() {
        return Err(Error::DimensionMismatch {
            expected: op.n(),
            got: f.len(),
        });
    }
    Ok(GridFunction::new(checked_solve(op, &f.values)?))
}

/// `G(x, x)` at every interior node (one solve per node, in parallel).
pub fn green_diagonal(op: &SparseSymOperator) -> Result<Vec<f64>> {
    op.solver()?;
    (0..op.n())
        .into_par_iter()
        .map(|i| green_column_index(op, i).map(|c| c.values.values[i]))
        .collect()
}

/// Full dense `G = J^{−1}`, row `i` being the column with source `i`.
pub fn green_matrix(op: &SparseSymOperator) -> Result<Vec<Vec<f64>>> {
    op.solver()?;
    (0..op.n())
        .into_par_iter()
        .map(|i| green_column_index(op, i).map(|c| c.values.values))
        .collect()
}

fn check_infinite(coeffs: &Coefficients, d: usize) -> Result<()> {
    if d < 3 {
        return Err(Error::Unsupported(
            "infinite-volume covariance requires d >= 3".into(),
        ));
    }
    if !(coeffs.kappa()[0] > 0.0) {
        return Err(Error::InvalidCoefficients(
            "infinite-volume covariance requires kappa_1 > 0".into(),
        ));
    }
    Ok(())
}

/// `G(0, x) = (2π)^{−d} ∫_{[−π,π]^d} cos⟨x, θ⟩ / Σ κ_i μ(θ)^i dθ` with diagnostics.
///
/// The integrand is even in every coordinate, so the integral is taken over
/// `[0, π]^d` with `cos⟨x,θ⟩` replaced by `Π cos(x_i θ_i)`.
pub fn green_infinite_detailed(
    x: &[i64],
    coeffs: &Coefficients,
    quad: &QuadratureSpec,
) -> Result<CubeQuadrature> {
    let d = x.len();
    check_infinite(coeffs, d)?;
    let freq: Vec<f64> = x.iter().map(|&v| v.unsigned_abs() as f64).collect();
    let integrand = |t: &[f64]| {
        let c: f64 = t
            .iter()
            .zip(x)
            .map(|(t, &z)| (z as f64 * t).cos())
            .product();
        c / coeffs.symbol(t)
    };
    let mut q = integrate_dyadic(d, true, quad, |cell, p, m| {
        TensorRule::new(cell, quad.scheme, p, &panels_for(cell, &freq, m)).integrate(&integrand)
    })?;
    let norm = std::f64::consts::PI.powi(-(d as i32));
    q.value *= norm;
    q.error_estimate *= norm;
    q.tail *= norm;
    for s in &mut q.shells {
        s.value *= norm;
    }
    Ok(q)
}

/// Infinite-volume covariance `G(0, x)` for `d ≥ 3`.
pub fn green_infinite(x: &[i64], coeffs: &Coefficients, quad: &QuadratureSpec) -> Result<f64> {
    green_infinite_detailed(x, coeffs, quad).map(|q| q.value)
}

/// Lower bound, value and upper bound of the rescaled inverse symbol
/// `N^{−2}(μ(θ/N) + μ(θ/N)²)^{−1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
}

impl Sandwich {
    pub fn holds(&self) -> bool {
        self.lower <= self.value && self.value <= self.upper
    }
}

/// Calibrated sandwich constants for `d = 1..=4`, each the supremum of
/// `(2/d)[(μ(u) + μ(u)²)^{−1} − 2d/‖u‖²]` over `u ∈ [−π, π]^d` found by
/// [`calibrate_sandwich_constant`], rounded up.
pub const SANDWICH_CONSTANTS: [f64; 4] = [0.0, 0.0948, 0.1948, 0.2614];

/// Calibrated constant for dimension `d`.
pub fn sandwich_constant(d: usize) -> f64 {
    SANDWICH_CONSTANTS
        .get(d.wrapping_sub(1))
        .copied()
        .unwrap_or_else(|| calibrate_sandwich_constant(d, 24))
}

fn sandwich_excess(u: &[f64]) -> f64 {
    let d = u.len() as f64;
    let mu = symbol_mu(u);
    let r2: f64 = u.iter().map(|x| x * x).sum();
    (2.0 / d) * (1.0 / (mu + mu * mu) - 2.0 * d / r2)
}

/// Supremum over `u ∈ (0, π]^d` (the excess is even in each coordinate) of
/// the sandwich excess, by a grid search followed by local coordinate refinement.
pub fn calibrate_sandwich_constant(d: usize, grid_per_axis: usize) -> f64 {
    let pi = std::f64::consts::PI;
    let g = grid_per_axis.max(2);
    let mut best = f64::NEG_INFINITY;
    let mut best_u = vec![pi; d];
    let total = g.pow(d as u32);
    let mut u = vec![0.0; d];
    for flat in 0..total {
        let mut r = flat;
        for k in 0..d {
            u[k] = pi * (r % g + 1) as f64 / g as f64;
            r /= g;
        }
        let e = sandwich_excess(&u);
        if e > best {
            best = e;
            best_u = u.clone();
        }
    }
    // the excess has a finite limit at the origin; probe small radii too
    for k in 1..=20 {
        let s = pi * 0.5f64.powi(k);
        for axis in 0..d {
            let mut v = vec![s * 1e-3; d];
            v[axis] = s;
            best = best.max(sandwich_excess(&v));
        }
        best = best.max(sandwich_excess(&vec![s; d]));
    }
    let mut step = pi / g as f64;
    while step > 1e-10 {
        let mut improved = false;
        for k in 0..d {
            for dir in [-1.0, 1.0] {
                let mut v = best_u.clone();
                v[k] = (v[k] + dir * step).clamp(1e-12, pi);
                let e = sandwich_excess(&v);
                if e > best {
                    best = e;
                    best_u = v;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    best
}

/// Evaluate the bounds of the rescaled symbol at `θ ∈ [−Nπ, Nπ]^d \ {0}` with
/// the constant `c` in the upper bound `2d/‖θ‖² + c·d/(2N²)`.
pub fn mu_sandwich_with(theta: &[f64], n: usize, c: f64) -> Sandwich {
    let d = theta.len() as f64;
    let nf = n as f64;
    let r2: f64 = theta.iter().map(|t| t * t).sum();
    let u: Vec<f64> = theta.iter().map(|t| t / nf).collect();
    let mu = symbol_mu(&u);
    let a = r2 / (2.0 * d * nf * nf);
    Sandwich {
        lower: 1.0 / (nf * nf * (a + a * a)),
        value: 1.0 / (nf * nf * (mu + mu * mu)),
        upper: 2.0 * d / r2 + c * d / (2.0 * nf * nf),
    }
}

/// [`mu_sandwich_with`] using the calibrated constant of the dimension.
pub fn mu_sandwich_check(theta: &[f64], n: usize) -> Sandwich {
    mu_sandwich_with(theta, n, sandwich_constant(theta.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{discretize, DomainSpec};
    use crate::operators::precision;
    use std::sync::Arc;

    fn op_1d(n: usize, kappa: Vec<f64>) -> SparseSymOperator {
        let k = kappa.len();
        let d = Arc::new(discretize(&DomainSpec::Interval, n, k).unwrap());
        precision(&d, &Coefficients::new(kappa).unwrap()).unwrap()
    }

    #[test]
    fn dgff_green_matches_tridiagonal_inverse() {
        // interior {1..N−1}; relabel as 1..n with n = N − 1
        let op = op_1d(12, vec![1.0]);
        let n = op.n();
        assert_eq!(n, 11);
        let g = green_matrix(&op).unwrap();
        for i in 1..=n {
            for j in i..=n {
                let want = 2.0 * (i * (n + 1 - j)) as f64 / (n + 1) as f64;
                assert!((g[i - 1][j - 1] - want).abs() < 1e-12);
                assert!((g[j - 1][i - 1] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_node_green() {
        let spec = DomainSpec::Ball {
            dimension: 1,
            radius: 0.25,
            center: vec![0.0],
        };
        let d = Arc::new(discretize(&spec, 4, 1).unwrap());
        let op = precision(&d, &Coefficients::new(vec![1.0]).unwrap()).unwrap();
        let c = green_column(&op, &[0]).unwrap();
        assert_eq!(c.values.values, vec![1.0]);
    }

    #[test]
    fn mixed_dominated_by_dgff_at_centre() {
        // five interior nodes in both models: Ball(1d) radius 5/16 at N=16 with K=2
        let spec = DomainSpec::Ball {
            dimension: 1,
            radius: 0.25,
            center: vec![0.0],
        };
        let d = Arc::new(discretize(&spec, 16, 2).unwrap());
        assert_eq!(d.len(), 5);
        let mixed = precision(&d, &Coefficients::new(vec![1.0, 1.0]).unwrap()).unwrap();
        let g = green_column(&mixed, &[0]).unwrap();
        assert!(g.values.values[2] < 3.0);
        let pure = precision(&d, &Coefficients::new(vec![1.0]).unwrap()).unwrap();
        let gp = green_column(&pure, &[0]).unwrap();
        assert!((gp.values.values[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn not_interior_source() {
        let op = op_1d(8, vec![1.0]);
        assert_eq!(green_column(&op, &[0]).unwrap_err(), Error::NotInterior);
    }

    #[test]
    fn dirichlet_round_trip() {
        let op = op_1d(32, vec![1.0, 1.0]);
        let g: Vec<f64> = (0..op.n()).map(|i| (i as f64 * 0.3).sin()).collect();
        let f = GridFunction::new(op.matrix().mul_vec(&g));
        let u = dirichlet_solve(&op, &f).unwrap();
        for (a, b) in u.values.iter().zip(&g) {
            assert!((a - b).abs() < 1e-9);
        }
        let z = dirichlet_solve(&op, &GridFunction::zeros(op.n())).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
        let c = green_column_index(&op, 3).unwrap();
        let u = dirichlet_solve(&op, &GridFunction::delta(op.n(), 3)).unwrap();
        assert_eq!(c.values, u);
    }

    #[test]
    fn infinite_volume_needs_d3() {
        let c = Coefficients::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            green_infinite(&[0, 0], &c, &QuadratureSpec::default()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn sandwich_small_theta_is_continuum() {
        let s = mu_sandwich_check(&[0.01, 0.02, -0.015], 16);
        let r2 = 0.01f64.powi(2) + 0.02f64.powi(2) + 0.015f64.powi(2);
        assert!((s.value - 6.0 / r2).abs() < 0.01 * s.value);
        assert!(s.holds());
    }

    #[test]
    fn sandwich_lower_is_sharp_as_n_grows() {
        let theta = [1.0, 0.5, -0.25];
        let mut prev = f64::INFINITY;
        for n in [8, 16, 32, 64] {
            let s = mu_sandwich_check(&theta, n);
            let gap = (s.value - s.lower) / s.value;
            assert!(gap < prev);
            prev = gap;
        }
    }

    #[test]
    fn sandwich_at_face_centre() {
        // μ(π, 0, 0) = 2/3 in d = 3
        let n = 8;
        let s = mu_sandwich_check(&[n as f64 * std::f64::consts::PI, 0.0, 0.0], n);
        let mu = 2.0 / 3.0;
        assert!((s.value - 1.0 / (64.0 * (mu + mu * mu))).abs() < 1e-15);
    }

    #[test]
    fn frozen_constants_dominate_calibration() {
        for d in 1..=4 {
            let c = calibrate_sandwich_constant(d, if d <= 2 { 200 } else { 24 });
            assert!(
                SANDWICH_CONSTANTS[d - 1] >= c,
                "d={d}: frozen {} < {c}",
                SANDWICH_CONSTANTS[d - 1]
            );
        }
    }
}
