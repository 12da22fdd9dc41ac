//! One-dimensional scaling limit: piecewise-linear interpolation of the
//! rescaled field, comparison of the rescaled Green's function with the
//! Brownian-bridge covariance `x∧y − xy`, and path maxima.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::green_matrix;
use crate::lattice::LatticeDomain;
use crate::operators::{GridFunction, SparseSymOperator};
use crate::sampler::sample_rng;
use crate::scaling::variance::k_squared;
use crate::stats::mean;

/// Path on `[0, 1]` given by its values at `t = i/N`, linear in between.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathFunction1d {
    pub values: Vec<f64>,
}

impl PathFunction1d {
    /// `N`, the number of grid intervals.
    pub fn resolution(&self) -> usize {
        self.values.len() - 1
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.resolution();
        let s = (t.clamp(0.0, 1.0) * n as f64).min(n as f64);
        let i = (s.floor() as usize).min(n.saturating_sub(1));
        let frac = s - i as f64;
        if n == 0 {
            return self.values[0];
        }
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }
}

fn check_1d(domain: &LatticeDomain) -> Result<()> {
    if domain.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: domain.dim(),
        });
    }
    Ok(())
}

/// Lattice position `i ∈ {0..N}` of every interior node.
fn positions_1d(domain: &LatticeDomain) -> Result<Vec<usize>> {
    let n = domain.resolution() as i64;
    domain
        .interior()
        .iter()
        .map(|z| {
            if (0..=n).contains(&z[0]) {
                Ok(z[0] as usize)
            } else {
                Err(Error::Unsupported(
                    "interpolation needs nodes inside [0, N]".into(),
                ))
            }
        })
        .collect()
}

/// `ψ_N(i/N) = k N^{−1/2} φ_i`, zero outside the interior, linear in between.
pub fn interpolate_path_1d(phi: &GridFunction, domain: &LatticeDomain) -> Result<PathFunction1d> {
    check_1d(domain)?;
    if phi.len() != domain.len() {
        return Err(Error::DimensionMismatch {
            expected: domain.len(),
            got: phi.len(),
        });
    }
    let n = domain.resolution();
    let scale = k_squared(1).sqrt() / (n as f64).sqrt();
    let mut values = vec![0.0; n + 1];
    for (p, v) in positions_1d(domain)?.into_iter().zip(&phi.values) {
        values[p] = scale * v;
    }
    Ok(PathFunction1d { values })
}

/// Maximum of the path; for a piecewise-linear path it is attained at a grid time.
pub fn path_max_1d(path: &PathFunction1d) -> f64 {
    path.values
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Brownian-bridge covariance `x∧y − xy`.
pub fn bridge_covariance(x: f64, y: f64) -> f64 {
    x.min(y) - x * y
}

/// `G_{1/N}(i, j) = (k²/N) G_Λ(i, j)` on `{0..N}²`, zero off the interior.
fn rescaled_green(op: &SparseSymOperator) -> Result<Vec<Vec<f64>>> {
    let dom = op.domain();
    check_1d(dom)?;
    let n = dom.resolution();
    let pos = positions_1d(dom)?;
    let g = green_matrix(op)?;
    let c = k_squared(1) / n as f64;
    let mut out = vec![vec![0.0; n + 1]; n + 1];
    for (a, &i) in pos.iter().enumerate() {
        for (b, &j) in pos.iter().enumerate() {
            out[i][j] = c * g[a][b];
        }
    }
    Ok(out)
}

/// `sup |G^I_{1/N} − G_D|` over `[0,1)²`, where `G^I` is constant on every cell
/// `[i/N, (i+1)/N) × [j/N, (j+1)/N)`. Off the diagonal `G_D` is bilinear on a cell,
/// so its extremes sit at corners; on a diagonal cell the restriction to the
/// diagonal `t − t²` is also checked at its peak.
pub fn green_interp_sup_distance_1d(op: &SparseSymOperator) -> Result<f64> {
    let g = rescaled_green(op)?;
    let n = op.domain().resolution();
    let nf = n as f64;
    let mut sup = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let c = g[i][j];
            let (x0, x1) = (i as f64 / nf, (i + 1) as f64 / nf);
            let (y0, y1) = (j as f64 / nf, (j + 1) as f64 / nf);
            let mut cand = [
                bridge_covariance(x0, y0),
                bridge_covariance(x0, y1),
                bridge_covariance(x1, y0),
                bridge_covariance(x1, y1),
                f64::NAN,
            ];
            if i == j {
                let t = 0.5f64.clamp(x0, x1);
                cand[4] = bridge_covariance(t, t);
            }
            for v in cand.iter().filter(|v| !v.is_nan()) {
                sup = sup.max((c - v).abs());
            }
        }
    }
    Ok(sup)
}

/// Smallest `C` with `Var[ψ_N(t) − ψ_N(s)] ≤ C|t − s|` over all grid pairs:
/// `max_{i≠j} k²(G_ii + G_jj − 2G_ij)/|i − j|` with `G` zero-extended.
pub fn increment_constant_1d(op: &SparseSymOperator) -> Result<f64> {
    let g = rescaled_green(op)?;
    let n = op.domain().resolution();
    let nf = n as f64;
    let mut c = 0.0f64;
    for i in 0..=n {
        for j in i + 1..=n {
            let var = g[i][i] + g[j][j] - 2.0 * g[i][j];
            c = c.max(var / ((j - i) as f64 / nf));
        }
    }
    Ok(c)
}

/// Mean maximum of a Brownian bridge on `[0, 1]`, estimated from `paths`
/// random-walk bridges with `steps` Gaussian increments each.
pub fn dense_bridge_max_mean(steps: usize, paths: usize, seed: u64) -> Result<f64> {
    if steps == 0 || paths == 0 {
        return Err(Error::InvalidArgument(
            "steps and paths must be positive".into(),
        ));
    }
    let dt = (1.0 / steps as f64).sqrt();
    let maxima: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = sample_rng(seed, p as u64);
            let mut w = vec![0.0; steps + 1];
            for k in 1..=steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                w[k] = w[k - 1] + dt * z;
            }
            let end = w[steps];
            (0..=steps)
                .map(|k| w[k] - k as f64 / steps as f64 * end)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(mean(&maxima))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{discretize, DomainSpec};
    use crate::operators::{precision, Coefficients};
    use std::sync::Arc;

    fn interval_op(n: usize, kappa: Vec<f64>) -> SparseSymOperator {
        let k = kappa.len();
        let dom = Arc::new(discretize(&DomainSpec::Interval, n, k).unwrap());
        precision(&dom, &Coefficients::new(kappa).unwrap()).unwrap()
    }

    #[test]
    fn covariance_values() {
        assert_eq!(bridge_covariance(0.5, 0.5), 0.25);
        assert_eq!(bridge_covariance(0.0, 0.3), 0.0);
        assert!((bridge_covariance(1.0 / 3.0, 2.0 / 3.0) - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn interpolation_at_grid_and_midpoints() {
        let dom = discretize(&DomainSpec::Interval, 8, 1).unwrap();
        let phi = GridFunction::new((1..=7).map(|i| i as f64).collect());
        let p = interpolate_path_1d(&phi, &dom).unwrap();
        let s = (0.5f64).sqrt() / 8f64.sqrt();
        assert_eq!(p.values[0], 0.0);
        assert_eq!(p.values[8], 0.0);
        assert!((p.eval(3.0 / 8.0) - 3.0 * s).abs() < 1e-15);
        assert!((p.eval(3.5 / 8.0) - 3.5 * s).abs() < 1e-15);
        assert_eq!(path_max_1d(&p), p.values[7]);
    }

    #[test]
    fn path_max_trivial() {
        let zero = PathFunction1d {
            values: vec![0.0; 5],
        };
        assert_eq!(path_max_1d(&zero), 0.0);
        let spike = PathFunction1d {
            values: vec![0.0, 0.0, 0.7, 0.0, 0.0],
        };
        assert_eq!(path_max_1d(&spike), 0.7);
    }

    #[test]
    fn gradient_green_matches_bridge() {
        // G_Λ = 2 · (i(N − j)/N) for i ≤ j, so G_{1/N}(i/N, j/N) = G_D exactly on the grid
        let op = interval_op(16, vec![1.0]);
        let g = rescaled_green(&op).unwrap();
        for i in 0..=16 {
            for j in 0..=16 {
                let want = bridge_covariance(i as f64 / 16.0, j as f64 / 16.0);
                assert!((g[i][j] - want).abs() < 1e-12);
            }
        }
        let d64 = green_interp_sup_distance_1d(&interval_op(64, vec![1.0])).unwrap();
        assert!(d64 <= 0.05, "{d64}");
        let d32 = green_interp_sup_distance_1d(&interval_op(32, vec![1.0])).unwrap();
        assert!(d64 < d32);
    }

    #[test]
    fn dense_bridge_degenerate_and_limit() {
        assert_eq!(dense_bridge_max_mean(1, 10, 3).unwrap(), 0.0);
        assert!(dense_bridge_max_mean(0, 10, 3).is_err());
        // E max of a Brownian bridge is √(π/8); the walk undershoots slightly
        let m = dense_bridge_max_mean(1024, 4000, 9).unwrap();
        let exact = (std::f64::consts::PI / 8.0).sqrt();
        assert!(m < exact + 0.02 && m > exact - 0.05, "{m}");
    }

    #[test]
    fn increment_constant_for_gradient_model() {
        // Var of increments is (t − s)(1 − (t − s)) ≤ |t − s|
        let c = increment_constant_1d(&interval_op(32, vec![1.0])).unwrap();
        assert!(c <= 1.0 + 1e-12 && c > 0.9, "{c}");
    }
}
