//! Discrete Laplacian, the precision operator `J = Σ κ_i (−Δ)^i` with zero
//! exterior values, the rescaled finite-difference operator `L_h`, and the
//! Fourier symbol `μ`.
//!
//! Conventions: `Δf(x) = (1/2d) Σ_i (f(x+e_i) + f(x−e_i) − 2f(x))` and the model
//! Hamiltonian is `H(φ) = ½⟨φ, (−κ₁Δ + κ₂Δ²)φ⟩`. The gradient form
//! `Σ_x (a‖∇φ_x‖² + b(Δφ_x)²)` corresponds to `κ = (4d·a, 2b)`, see
//! [`Coefficients::from_gradient_form`].

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeDomain;
use crate::sparse::{CsrMatrix, SpdSolver};

/// Number of grid points used to check positivity of the symbol polynomial.
const SYMBOL_CHECK_POINTS: usize = 10_000;

/// `μ(θ) = (1/d) Σ (1 − cos θ_i)`, evaluated as `(2/d) Σ sin²(θ_i/2)` to keep
/// relative accuracy near the origin.
pub fn symbol_mu(theta: &[f64]) -> f64 {
    let d = theta.len() as f64;
    2.0 * theta.iter().map(|t| (0.5 * t).sin().powi(2)).sum::<f64>() / d
}

/// Polynomial coefficients `κ₁..κ_K` of the precision operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Coefficients {
    kappa: Vec<f64>,
}

impl Coefficients {
    /// Validates that `Σ κ_i r^i > 0` on a fine grid of `(0, 2)`.
    pub fn new(kappa: Vec<f64>) -> Result<Self> {
        if kappa.is_empty() {
            return Err(Error::InvalidCoefficients("kappa must not be empty".into()));
        }
        if kappa.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidCoefficients("kappa must be finite".into()));
        }
        let c = Coefficients { kappa };
        for j in 1..=SYMBOL_CHECK_POINTS {
            let r = 2.0 * j as f64 / (SYMBOL_CHECK_POINTS + 1) as f64;
            if !(c.polynomial(r) > 0.0) {
                return Err(Error::CoefficientSign { r });
            }
        }
        Ok(c)
    }

    /// Gradient-form constants `Σ_x (tension‖∇φ_x‖² + rigidity(Δφ_x)²)` in dimension `d`.
    pub fn from_gradient_form(d: usize, tension: f64, rigidity: f64) -> Result<Self> {
        Self::new(vec![4.0 * d as f64 * tension, 2.0 * rigidity])
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    /// Operator order `K` (number of coefficients).
    pub fn order(&self) -> usize {
        self.kappa.len()
    }

    /// `Σ κ_i r^i`.
    pub fn polynomial(&self, r: f64) -> f64 {
        self.kappa.iter().rev().fold(0.0, |acc, k| (acc + k) * r)
    }

    /// Fourier multiplier of `J`: `Σ κ_i μ(θ)^i`.
    pub fn symbol(&self, theta: &[f64]) -> f64 {
        self.polynomial(symbol_mu(theta))
    }
}

impl TryFrom<Vec<f64>> for Coefficients {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Coefficients::new(v)
    }
}

impl From<Coefficients> for Vec<f64> {
    fn from(c: Coefficients) -> Self {
        c.kappa
    }
}

/// A lattice stencil: offsets with weights, sorted by offset.
pub type Stencil = Vec<(Vec<i64>, f64)>;

fn convolve(a: &BTreeMap<Vec<i64>, f64>, b: &BTreeMap<Vec<i64>, f64>) -> BTreeMap<Vec<i64>, f64> {
    let mut out = BTreeMap::new();
    for (oa, va) in a {
        for (ob, vb) in b {
            let o: Vec<i64> = oa.iter().zip(ob).map(|(x, y)| x + y).collect();
            *out.entry(o).or_insert(0.0) += va * vb;
        }
    }
    out
}

/// Stencil of `−Δ` (normalized) scaled by `scale`: `scale` at the origin, `−scale/2d` at neighbours.
fn one_step(d: usize, scale: f64) -> BTreeMap<Vec<i64>, f64> {
    let mut s = BTreeMap::new();
    s.insert(vec![0; d], scale);
    for k in 0..d {
        for step in [-1, 1] {
            let mut o = vec![0; d];
            o[k] = step;
            s.insert(o, -scale / (2 * d) as f64);
        }
    }
    s
}

/// Full-lattice stencil of `Σ_i c_i A^i` where `A` has the stencil of `scale·(−Δ)`.
fn polynomial_stencil(d: usize, scale: f64, c: &[f64]) -> Stencil {
    let step = one_step(d, scale);
    let mut power: BTreeMap<Vec<i64>, f64> = BTreeMap::from([(vec![0; d], 1.0)]);
    let mut total: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for &ci in c {
        power = convolve(&power, &step);
        if ci != 0.0 {
            for (o, v) in &power {
                *total.entry(o.clone()).or_insert(0.0) += ci * v;
            }
        }
    }
    total.into_iter().filter(|(_, v)| *v != 0.0).collect()
}

/// Stencil of `Σ κ_i (−Δ)^i` on the whole of `Z^d`.
pub fn precision_stencil(d: usize, coeffs: &Coefficients) -> Stencil {
    polynomial_stencil(d, 1.0, coeffs.kappa())
}

/// Restrict a translation-invariant stencil to the interior of `domain`.
///
/// Because every lattice path of length `≤ K` from an interior node stays in
/// `Λ ∪ ∂_K Λ`, this equals forming the powers on the extended node set with
/// zero exterior values and then restricting to `Λ × Λ`.
fn assemble(domain: &LatticeDomain, stencil: &Stencil) -> CsrMatrix {
    let d = domain.dim();
    let mut trip = Vec::with_capacity(domain.len() * stencil.len());
    let mut nb = vec![0i64; d];
    for i in 0..domain.len() {
        let x = domain.node(i);
        for (off, v) in stencil {
            for k in 0..d {
                nb[k] = x[k] + off[k];
            }
            if let Some(j) = domain.index_of(&nb) {
                trip.push((i, j, *v));
            }
        }
    }
    CsrMatrix::from_triplets(domain.len(), trip)
}

/// Which operator a [`SparseSymOperator`] represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// `−Δ` with zero exterior values.
    NegLaplacian,
    /// `J = Σ κ_i (−Δ)^i` at unit lattice scale.
    Precision,
    /// `L_h = Σ κ_i (h²/2d)^{i−1} (−Δ_h)^i`.
    ScaledLh,
}

/// Values on the interior nodes of a lattice domain (implicitly zero elsewhere).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Self {
        GridFunction { values }
    }

    pub fn zeros(n: usize) -> Self {
        GridFunction {
            values: vec![0.0; n],
        }
    }

    /// Indicator of node `i`.
    pub fn delta(n: usize, i: usize) -> Self {
        let mut g = Self::zeros(n);
        g.values[i] = 1.0;
        g
    }

    /// Sample `f(h·z)` at every interior node.
    pub fn from_fn(domain: &LatticeDomain, f: impl Fn(&[f64]) -> f64) -> Self {
        GridFunction {
            values: (0..domain.len()).map(|i| f(&domain.position(i))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Symmetric positive definite operator on the interior of a lattice domain.
#[derive(Debug)]
pub struct SparseSymOperator {
    matrix: CsrMatrix,
    domain: Arc<LatticeDomain>,
    h: f64,
    kind: OperatorKind,
    coeffs: Coefficients,
    solver: OnceLock<SpdSolver>,
}

impl Clone for SparseSymOperator {
    fn clone(&self) -> Self {
        SparseSymOperator {
            matrix: self.matrix.clone(),
            domain: self.domain.clone(),
            h: self.h,
            kind: self.kind,
            coeffs: self.coeffs.clone(),
            solver: OnceLock::new(),
        }
    }
}

impl SparseSymOperator {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn domain(&self) -> &LatticeDomain {
        &self.domain
    }

    pub fn domain_arc(&self) -> Arc<LatticeDomain> {
        self.domain.clone()
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    /// Factorization (or iterative solver), built on first use and shared afterwards.
    pub fn solver(&self) -> Result<&SpdSolver> {
        if let Some(s) = self.solver.get() {
            return Ok(s);
        }
        let s = SpdSolver::new(&self.matrix)?;
        let _ = self.solver.set(s);
        Ok(self.solver.get().expect("solver initialized"))
    }

    /// Dump the matrix as `row col value` triplets.
    pub fn write_triplets<W: Write>(&self, w: W) -> Result<()> {
        self.matrix.write_triplets(w)
    }
}

fn check_domain(domain: &LatticeDomain, coeffs: &Coefficients) -> Result<()> {
    if domain.is_empty() {
        return Err(Error::EmptyInterior {
            n: domain.resolution(),
            depth: domain.depth(),
        });
    }
    if domain.depth() < coeffs.order() {
        return Err(Error::InsufficientDepth {
            depth: domain.depth(),
            order: coeffs.order(),
        });
    }
    Ok(())
}

fn build(
    domain: &Arc<LatticeDomain>,
    matrix: CsrMatrix,
    kind: OperatorKind,
    coeffs: Coefficients,
) -> SparseSymOperator {
    SparseSymOperator {
        matrix,
        h: domain.h(),
        domain: domain.clone(),
        kind,
        coeffs,
        solver: OnceLock::new(),
    }
}

/// `−Δ` restricted to functions vanishing outside the interior.
pub fn laplacian_normalized(domain: &Arc<LatticeDomain>) -> Result<SparseSymOperator> {
    let coeffs = Coefficients::new(vec![1.0])?;
    check_domain(domain, &coeffs)?;
    let m = assemble(domain, &precision_stencil(domain.dim(), &coeffs));
    Ok(build(domain, m, OperatorKind::NegLaplacian, coeffs))
}

/// `J = Σ κ_i (−Δ)^i` with zero exterior values; requires layer depth `K ≥ len(κ)`.
pub fn precision(domain: &Arc<LatticeDomain>, coeffs: &Coefficients) -> Result<SparseSymOperator> {
    check_domain(domain, coeffs)?;
    let m = assemble(domain, &precision_stencil(domain.dim(), coeffs));
    Ok(build(domain, m, OperatorKind::Precision, coeffs.clone()))
}

/// `L_h = Σ κ_i (h²/2d)^{i−1} (−Δ_h)^i` with the finite-difference Laplacian
/// `Δ_h`; checked entrywise against `(2d/h²)·J`.
pub fn scaled_operator_lh(
    domain: &Arc<LatticeDomain>,
    coeffs: &Coefficients,
) -> Result<SparseSymOperator> {
    check_domain(domain, coeffs)?;
    let d = domain.dim();
    let h = domain.h();
    let two_d = 2.0 * d as f64;
    // −Δ_h has stencil (2d/h²)·(−Δ)
    let c: Vec<f64> = coeffs
        .kappa()
        .iter()
        .enumerate()
        .map(|(i, k)| k * (h * h / two_d).powi(i as i32))
        .collect();
    let lh = assemble(domain, &polynomial_stencil(d, two_d / (h * h), &c));
    let j = assemble(domain, &precision_stencil(d, coeffs));
    let scale = two_d / (h * h);
    let diff = lh.add_scaled(1.0, &j, -scale);
    let tol = 1e-12 * lh.norm_inf().max(1.0);
    for i in 0..diff.n() {
        if diff.row(i).1.iter().any(|v| v.abs() > tol) {
            return Err(Error::SolveFailure(
                "L_h differs from (2d/h²)·J beyond rounding".into(),
            ));
        }
    }
    Ok(build(domain, lh, OperatorKind::ScaledLh, coeffs.clone()))
}

/// Matrix-vector product `op · f`.
pub fn apply(op: &SparseSymOperator, f: &GridFunction) -> Result<GridFunction> {
    if f.len() != op.n() {
        return Err(Error::DimensionMismatch {
            expected: op.n(),
            got: f.len(),
        });
    }
    Ok(GridFunction::new(op.matrix.mul_vec(&f.values)))
}
