//! Finite-difference error analysis for the scaled operator `L_h`: grid norms,
//! manufactured-solution errors, the truncated-operator residual split and
//! spectral-gap convergence.

pub mod manufactured;
pub mod spectral;

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::dirichlet_solve;
use crate::lattice::{
    discretize, resolution_from_spacing, thomee_partition, DomainSpec, LatticeDomain,
    ThomeePartition,
};
use crate::operators::{apply, scaled_operator_lh, Coefficients, GridFunction, SparseSymOperator};
use crate::stats::loglog_slope;

pub use manufactured::{ManufacturedSolution, Polynomial};
pub use spectral::{
    ball_reference_eigenvalue, continuum_first_eigenvalue, nu_max_scaled, smallest_eigenvalue,
    smallest_eigenvalue_csr, spectral_gap_convergence,
};

/// `‖f‖_h = (h^d Σ f(ξ)²)^{1/2}`.
pub fn grid_norm(f: &GridFunction, h: f64, d: usize) -> f64 {
    (h.powi(d as i32) * f.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// Discrete solution of `L_h u_h = f` on `R_h`, `u_h = 0` on `B_h`, and its error.
#[derive(Clone, Debug)]
pub struct ThomeeSolution {
    pub operator: SparseSymOperator,
    pub u_h: GridFunction,
    /// `e_h = u − u_h` on `R_h`.
    pub error: GridFunction,
}

impl ThomeeSolution {
    pub fn domain(&self) -> &LatticeDomain {
        self.operator.domain()
    }

    pub fn error_norm(&self) -> f64 {
        grid_norm(&self.error, self.operator.h(), self.domain().dim())
    }
}

fn check_ball(spec: &DomainSpec) -> Result<()> {
    match spec {
        DomainSpec::Ball { .. } => Ok(()),
        _ => Err(Error::Unsupported(
            "the finite-difference error study needs a ball (C² boundary)".into(),
        )),
    }
}

/// Solve the discrete problem on the ball with `K = len(κ)` and right-hand
/// side `κ_1·(−Δ_c u)`, the continuum limit of `L_h` applied to `u`.
pub fn thomee_solve(
    spec: &DomainSpec,
    ms: &ManufacturedSolution,
    coeffs: &Coefficients,
    h: f64,
) -> Result<ThomeeSolution> {
    check_ball(spec)?;
    if spec != &ms.domain {
        return Err(Error::InvalidArgument(
            "manufactured solution belongs to another domain".into(),
        ));
    }
    let n = resolution_from_spacing(h)?;
    let depth = coeffs.order();
    // the partition enforces h ≤ diam/(4K)
    thomee_partition(spec, 1.0 / n as f64, depth)?;
    let dom = Arc::new(discretize(spec, n, depth)?);
    let op = scaled_operator_lh(&dom, coeffs)?;
    let k1 = coeffs.kappa()[0];
    let rhs = GridFunction::from_fn(&dom, |x| k1 * ms.rhs(x));
    let u_h = dirichlet_solve(&op, &rhs)?;
    let exact = GridFunction::from_fn(&dom, |x| ms.eval(x));
    let error = GridFunction::new(
        exact
            .values
            .iter()
            .zip(&u_h.values)
            .map(|(a, b)| a - b)
            .collect(),
    );
    Ok(ThomeeSolution {
        operator: op,
        u_h,
        error,
    })
}

/// `‖R_h e_h‖_h` for the manufactured solution at spacing `h`.
pub fn thomee_error(
    spec: &DomainSpec,
    ms: &ManufacturedSolution,
    coeffs: &Coefficients,
    h: f64,
) -> Result<f64> {
    thomee_solve(spec, ms, coeffs, h).map(|s| s.error_norm())
}

/// `‖L_{h,1} R_h e‖_h` split into the part on `R_h*` (where `L_{h,1} = L_h`)
/// and the part on the collar `B_h*` (where `L_{h,1} = h L_h`).
pub fn truncated_residual(
    op: &SparseSymOperator,
    partition: &ThomeePartition,
    e: &GridFunction,
) -> Result<(f64, f64)> {
    let dom = op.domain();
    if partition.r_h.len() != dom.len() || (partition.h - op.h()).abs() > 1e-15 {
        return Err(Error::InvalidArgument(
            "partition and operator describe different grids".into(),
        ));
    }
    let r = apply(op, e)?;
    let h = op.h();
    let d = dom.dim();
    let part = |nodes: &crate::lattice::NodeList, factor: f64| -> Result<f64> {
        let mut s = 0.0;
        for z in nodes.iter() {
            let i = dom.index_of(z).ok_or(Error::NotInterior)?;
            s += (factor * r.values[i]).powi(2);
        }
        Ok((h.powi(d as i32) * s).sqrt())
    };
    Ok((
        part(&partition.r_h_star, 1.0)?,
        part(&partition.b_h_star, h)?,
    ))
}

/// One row of the error study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub h: f64,
    pub error_norm: f64,
    /// `M_3² h² + h (M_3² h⁴ + M_1²)`.
    pub bound_shape: f64,
    /// `C · bound_shape` with the calibrated `C`.
    pub bound: f64,
    pub holds: bool,
    pub interior_residual: f64,
    pub collar_residual: f64,
}

/// Error study over a decreasing list of spacings, with `C` calibrated at the coarsest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub solution_id: String,
    pub domain: DomainSpec,
    pub kappa: Vec<f64>,
    pub m1: f64,
    pub m3: f64,
    pub calibrated_c: f64,
    pub rows: Vec<ErrorRow>,
    /// Log-log slope of `‖R_h e_h‖_h` against `h`.
    pub error_slope: f64,
    /// Log-log slope of the interior residual against `h`.
    pub interior_residual_slope: f64,
}

impl ErrorTable {
    /// Whether `‖R_h e_h‖²_h ≤ C·shape` at every finer spacing.
    pub fn bound_holds(&self) -> bool {
        self.rows.iter().skip(1).all(|r| r.holds)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "h,error_norm,bound_shape,bound,holds,interior_residual,collar_residual"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e},{:.17e}",
                r.h,
                r.error_norm,
                r.bound_shape,
                r.bound,
                r.holds,
                r.interior_residual,
                r.collar_residual
            )?;
        }
        Ok(())
    }
}

pub fn error_table(
    spec: &DomainSpec,
    ms: &ManufacturedSolution,
    coeffs: &Coefficients,
    h_list: &[f64],
) -> Result<ErrorTable> {
    if h_list.len() < 2 || h_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument(
            "h grid must hold at least two strictly decreasing spacings".into(),
        ));
    }
    let (m1, m3) = (ms.m1, ms.m3);
    let shape = |h: f64| m3 * m3 * h * h + h * (m3 * m3 * h.powi(4) + m1 * m1);
    let raw: Vec<(f64, f64, f64, f64)> = h_list
        .par_iter()
        .map(|&h| {
            let sol = thomee_solve(spec, ms, coeffs, h)?;
            let part = thomee_partition(spec, sol.operator.h(), coeffs.order())?;
            let (ri, rc) = truncated_residual(&sol.operator, &part, &sol.error)?;
            Ok((sol.operator.h(), sol.error_norm(), ri, rc))
        })
        .collect::<Result<_>>()?;
    let (h0, e0, _, _) = raw[0];
    let c = e0 * e0 / shape(h0);
    let rows: Vec<ErrorRow> = raw
        .iter()
        .map(|&(h, e, ri, rc)| {
            let s = shape(h);
            ErrorRow {
                h,
                error_norm: e,
                bound_shape: s,
                bound: c * s,
                holds: e * e <= c * s * (1.0 + 1e-12),
                interior_residual: ri,
                collar_residual: rc,
            }
        })
        .collect();
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let es: Vec<f64> = rows.iter().map(|r| r.error_norm).collect();
    let ri: Vec<f64> = rows.iter().map(|r| r.interior_residual).collect();
    Ok(ErrorTable {
        solution_id: ms.id.clone(),
        domain: spec.clone(),
        kappa: coeffs.kappa().to_vec(),
        m1,
        m3,
        calibrated_c: c,
        error_slope: loglog_slope(&hs, &es)?,
        interior_residual_slope: loglog_slope(&hs, &ri)?,
        rows,
    })
}
