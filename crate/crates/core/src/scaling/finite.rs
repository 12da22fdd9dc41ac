//! Finite-volume continuum limit `∫_D u f` with `−Δ_c u = f`, `u = 0` on `∂D`.

use crate::continuum::assemble_continuum;
use crate::error::{Error, Result};
use crate::lattice::DomainSpec;
use crate::scaling::test_function::TestFunction;
use crate::sparse::SpdSolver;

/// Riemann sum `h^d Σ u f` of the finite-difference solution at spacing `h`.
pub fn dirichlet_energy_fd(spec: &DomainSpec, f: &TestFunction, h: f64) -> Result<f64> {
    let grid = assemble_continuum(spec, h)?;
    let rhs = grid.sample(|x| f.eval(x));
    let u = SpdSolver::new(&grid.matrix)?.solve(&rhs)?;
    let dot: f64 = u.iter().zip(&rhs).map(|(a, b)| a * b).sum();
    Ok(grid.h.powi(grid.dim() as i32) * dot)
}

/// `∫_D u f` from second-order finite differences at `h_ref` and `h_ref/2`,
/// combined by Richardson extrapolation `(4 I_{h/2} − I_h)/3`.
pub fn limit_variance_finite(spec: &DomainSpec, f: &TestFunction, h_ref: f64) -> Result<f64> {
    f.validate()?;
    if f.dim() != spec.dimension() {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension(),
            got: f.dim(),
        });
    }
    let inside = f
        .bumps()
        .iter()
        .all(|b| spec.distance_to_complement(&b.center) >= b.radius - 1e-12);
    if !inside {
        return Err(Error::InvalidArgument(
            "test function support leaves the domain".into(),
        ));
    }
    let coarse = dirichlet_energy_fd(spec, f, h_ref)?;
    let fine = dirichlet_energy_fd(spec, f, h_ref / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn interval_eigenfunction() {
        let f = TestFunction::product_sine(vec![1]);
        let v = limit_variance_finite(&DomainSpec::interval(), &f, 1.0 / 64.0).unwrap();
        assert!((v - 1.0 / (2.0 * PI * PI)).abs() < 1e-7, "{v}");
    }

    #[test]
    fn box_normalized_eigenfunction() {
        let f = TestFunction::ProductSine {
            modes: vec![1, 1],
            scale: 1.0,
            amplitude: 2.0,
        };
        let v = limit_variance_finite(&DomainSpec::unit_box(2), &f, 1.0 / 32.0).unwrap();
        assert!((v - 1.0 / (2.0 * PI * PI)).abs() < 1e-6, "{v}");
    }

    #[test]
    fn bump_on_ball_self_converges() {
        let spec = DomainSpec::ball(2, 1.0);
        let f = TestFunction::bump(vec![0.1, -0.2], 0.5, 1.0);
        let v = limit_variance_finite(&spec, &f, 1.0 / 32.0).unwrap();
        let reference = limit_variance_finite(&spec, &f, 1.0 / 128.0).unwrap();
        assert!(
            ((v - reference) / reference).abs() < 1e-3,
            "{v} {reference}"
        );
    }

    #[test]
    fn rejects_escaping_support() {
        let f = TestFunction::bump(vec![0.8, 0.0], 0.5, 1.0);
        assert!(limit_variance_finite(&DomainSpec::ball(2, 1.0), &f, 1.0 / 16.0).is_err());
    }
}
