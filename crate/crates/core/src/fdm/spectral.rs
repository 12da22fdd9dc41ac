//! Smallest eigenvalues by inverse iteration and the convergence
//! `h^{−2} μ_1^{(h)} → κ_1 λ_1(−Δ_c)`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::continuum::assemble_continuum;
use crate::error::{Error, Result};
use crate::lattice::{discretize, resolution_from_spacing, DomainSpec};
use crate::operators::{scaled_operator_lh, Coefficients, OperatorKind, SparseSymOperator};
use crate::report::{ExperimentReport, Provenance, ReportPoint};
use crate::scaling::variance::k_squared;
use crate::sparse::{dot, norm2, CsrMatrix, SpdSolver};
use crate::stats::loglog_slope;

const MAX_ITERATIONS: usize = 2000;

/// Smallest eigenvalue of the SPD matrix `a` by unshifted inverse iteration
/// with `solver`; stops when the Rayleigh quotient changes by at most `tol`
/// relative, and returns it.
pub fn smallest_eigenvalue_csr(a: &CsrMatrix, solver: &SpdSolver, tol: f64) -> Result<f64> {
    let n = a.n();
    if n == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut rho = dot(&x, &a.mul_vec(&x));
    for _ in 0..MAX_ITERATIONS {
        let mut y = solver.solve(&x)?;
        let s = norm2(&y);
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::SolveFailure("inverse iteration broke down".into()));
        }
        y.iter_mut().for_each(|v| *v /= s);
        let next = dot(&y, &a.mul_vec(&y));
        x = y;
        if (next - rho).abs() <= tol * next.abs() {
            return Ok(next);
        }
        rho = next;
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
    })
}

/// `μ_1` of `h² L_h` when `op` is `L_h`, and the smallest eigenvalue of the
/// matrix itself for the unit-scale operators.
pub fn smallest_eigenvalue(op: &SparseSymOperator, tol: f64) -> Result<f64> {
    let lambda = smallest_eigenvalue_csr(op.matrix(), op.solver()?, tol)?;
    Ok(match op.kind() {
        OperatorKind::ScaledLh => lambda * op.h() * op.h(),
        OperatorKind::Precision | OperatorKind::NegLaplacian => lambda,
    })
}

/// `k² N^{−2} / λ_min(J)`: the largest eigenvalue of the rescaled Green's
/// operator `G_{1/N}` acting on `L²` with cell measure `N^{−d}`. Tends to `1/(κ_1 λ_1)`.
pub fn nu_max_scaled(op: &SparseSymOperator, tol: f64) -> Result<f64> {
    let d = op.domain().dim();
    let n = op.domain().resolution() as f64;
    let lam = smallest_eigenvalue_csr(op.matrix(), op.solver()?, tol)?;
    let lam_j = match op.kind() {
        OperatorKind::ScaledLh => lam * op.h() * op.h() / (2 * d) as f64,
        OperatorKind::Precision | OperatorKind::NegLaplacian => lam,
    };
    Ok(k_squared(d) / (n * n * lam_j))
}

/// First Dirichlet eigenvalue of the second-order finite-difference `−Δ_c` at spacing `h`.
pub fn continuum_first_eigenvalue(spec: &DomainSpec, h: f64) -> Result<f64> {
    let grid = assemble_continuum(spec, h)?;
    let solver = SpdSolver::new(&grid.matrix)?;
    smallest_eigenvalue_csr(&grid.matrix, &solver, 1e-12)
}

/// `λ_1(−Δ_c)` on a ball from finite differences at `h ≈ R/128` and `h/2`,
/// combined by Richardson extrapolation.
pub fn ball_reference_eigenvalue(spec: &DomainSpec) -> Result<f64> {
    let DomainSpec::Ball { radius, .. } = spec else {
        return Err(Error::Unsupported(
            "reference eigenvalue is computed for balls".into(),
        ));
    };
    let n = (128.0 / radius).round().max(8.0) as usize;
    let hs = [1.0 / n as f64, 0.5 / n as f64];
    let lam: Vec<f64> = hs
        .par_iter()
        .map(|&h| continuum_first_eigenvalue(spec, h))
        .collect::<Result<_>>()?;
    Ok((4.0 * lam[1] - lam[0]) / 3.0)
}

/// `λ_1(−Δ_c)` with its provenance.
fn reference_eigenvalue(spec: &DomainSpec) -> Result<(f64, Provenance, &'static str)> {
    let pi2 = std::f64::consts::PI.powi(2);
    Ok(match spec {
        DomainSpec::Interval => (pi2, Provenance::ClosedForm, "pi^2"),
        DomainSpec::UnitBox { dimension } => {
            (*dimension as f64 * pi2, Provenance::ClosedForm, "d pi^2")
        }
        DomainSpec::Ball { .. } => (
            ball_reference_eigenvalue(spec)?,
            Provenance::Derived,
            "finite differences at h ~ R/128 and R/256 with Richardson extrapolation",
        ),
    })
}

/// Table of `h^{−2} μ_1^{(h)}` against `κ_1 λ_1` over a decreasing `h` grid.
pub fn spectral_gap_convergence(
    spec: &DomainSpec,
    coeffs: &Coefficients,
    h_list: &[f64],
) -> Result<ExperimentReport> {
    if h_list.is_empty() || h_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument(
            "h grid must be strictly decreasing".into(),
        ));
    }
    let (lambda1, provenance, note) = reference_eigenvalue(spec)?;
    let target = coeffs.kappa()[0] * lambda1;
    let values: Vec<(f64, f64)> = h_list
        .par_iter()
        .map(|&h| {
            let n = resolution_from_spacing(h)?;
            let dom = Arc::new(discretize(spec, n, coeffs.order())?);
            let op = scaled_operator_lh(&dom, coeffs)?;
            let h = op.h();
            Ok((h, smallest_eigenvalue(&op, 1e-12)? / (h * h)))
        })
        .collect::<Result<_>>()?;
    let mut report = ExperimentReport::new("spectral_gap", "h");
    report.reference("kappa1_lambda1", target, provenance, note);
    for &(h, v) in &values {
        report.points.push(ReportPoint::new(h, v, Some(target)));
    }
    if values.len() >= 2 {
        let hs: Vec<f64> = values.iter().map(|v| v.0).collect();
        let errs: Vec<f64> = values.iter().map(|v| (v.1 - target).abs()).collect();
        if errs.iter().all(|&e| e > 0.0) {
            report.slope("relative_error_vs_h", loglog_slope(&hs, &errs)?);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::discretize;
    use crate::operators::precision;

    #[test]
    fn tridiagonal_oracle() {
        // h = 1/8, κ = (1): h²L_h = tridiag(−1, 2, −1) on 7 nodes
        let dom = Arc::new(discretize(&DomainSpec::Interval, 8, 1).unwrap());
        let op = scaled_operator_lh(&dom, &Coefficients::new(vec![1.0]).unwrap()).unwrap();
        let mu = smallest_eigenvalue(&op, 1e-13).unwrap();
        let want = 2.0 * (1.0 - (std::f64::consts::PI / 8.0).cos());
        assert!((mu - want).abs() < 1e-10, "{mu} {want}");
        assert!((want - 0.152241).abs() < 1e-6);
    }

    #[test]
    fn one_by_one() {
        let a = CsrMatrix::from_triplets(1, vec![(0, 0, 3.5)]);
        let s = SpdSolver::new(&a).unwrap();
        assert!((smallest_eigenvalue_csr(&a, &s, 1e-14).unwrap() - 3.5).abs() < 1e-14);
    }

    #[test]
    fn nu_max_approaches_inverse_eigenvalue() {
        let dom = Arc::new(discretize(&DomainSpec::Interval, 128, 1).unwrap());
        let op = precision(&dom, &Coefficients::new(vec![1.0]).unwrap()).unwrap();
        let v = nu_max_scaled(&op, 1e-12).unwrap();
        let want = 1.0 / std::f64::consts::PI.powi(2);
        assert!(((v - want) / want).abs() < 1e-3, "{v}");
    }

    #[test]
    fn continuum_eigenvalue_on_box() {
        // five-point Laplacian on the unit square: (8/h²) sin²(πh/2)
        let h = 1.0 / 16.0;
        let lam = continuum_first_eigenvalue(&DomainSpec::unit_box(2), h).unwrap();
        let want = 8.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
        assert!((lam - want).abs() < 1e-9 * want);
    }
}
