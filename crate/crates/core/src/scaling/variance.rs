//! Variances of the rescaled field `(Ψ_N, f) = k N^{−(d+2)/2} Σ_z φ_z f(z/N)`,
//! `k = 1/√(2d)`, in finite volume (one Dirichlet solve) and in infinite
//! volume (Fourier inversion), together with their continuum limits.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::{dirichlet_solve, mu_sandwich_check};
use crate::lattice::LatticeDomain;
use crate::operators::{Coefficients, GridFunction, OperatorKind, SparseSymOperator};
use crate::quadrature::{
    composite_rule, integrate_dyadic, CubeQuadrature, QuadScheme, QuadratureSpec, TensorRule,
};
use crate::scaling::test_function::{radial_bump_transform, sinc, TestFunction};

/// `k² = 1/(2d)`.
pub fn k_squared(d: usize) -> f64 {
    1.0 / (2 * d) as f64
}

/// `(Ψ_N, f) = k N^{−(d+2)/2} Σ_z φ_z f(z/N)` over the interior of `domain`.
pub fn field_pairing(phi: &GridFunction, f: &TestFunction, domain: &LatticeDomain) -> Result<f64> {
    if phi.len() != domain.len() {
        return Err(Error::DimensionMismatch {
            expected: domain.len(),
            got: phi.len(),
        });
    }
    let d = domain.dim();
    let n = domain.resolution() as f64;
    let s: f64 = (0..domain.len())
        .map(|i| phi.values[i] * f.eval(&domain.position(i)))
        .sum();
    Ok(k_squared(d).sqrt() * n.powf(-(d as f64 + 2.0) / 2.0) * s)
}

/// `Var[(Ψ_N, f)] = k² N^{−(d+2)} vᵀ J^{−1} v` with `v_z = f(z/N)`, by one solve.
///
/// Accepts either the unit-scale precision `J` or `L_h = (2d/h²) J`.
pub fn variance_pairing_exact(op: &SparseSymOperator, f: &TestFunction) -> Result<f64> {
    let dom = op.domain();
    let d = dom.dim();
    if f.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: f.dim(),
        });
    }
    let n = dom.resolution() as f64;
    let v = GridFunction::from_fn(dom, |x| f.eval(x));
    let u = dirichlet_solve(op, &v)?;
    let quad: f64 = v.values.iter().zip(&u.values).map(|(a, b)| a * b).sum();
    let to_unit = match op.kind() {
        OperatorKind::ScaledLh => (2 * d) as f64 * n * n,
        OperatorKind::Precision | OperatorKind::NegLaplacian => 1.0,
    };
    Ok(k_squared(d) * n.powf(-(d as f64) - 2.0) * quad * to_unit)
}

/// Parseval integral `‖(−Δ)^{−1/2} f‖² = ∫ ‖θ‖^{−2} |f̂(θ)|² dθ` for sums of bumps in `d = 3`.
///
/// Angular integration is done in closed form: with `f = Σ_j A_j g_j(· − c_j)`
/// the integral reduces to
/// `4π ∫_0^∞ Σ_{j,l} A_j A_l ĝ_j(k) ĝ_l(k) sinc(k‖c_j − c_l‖) dk`,
/// evaluated by composite Gauss quadrature in `k` with panel refinement until
/// two successive refinements agree to `rel_tol`.
pub fn limit_variance_infinite(f: &TestFunction, d: usize, quad: &QuadratureSpec) -> Result<f64> {
    quad.validate()?;
    f.validate()?;
    if d < 3 {
        return Err(Error::Unsupported(
            "the infinite-volume limit requires d >= 3".into(),
        ));
    }
    if d != 3 || f.dim() != 3 {
        return Err(Error::Unsupported(
            "limit_variance_infinite is implemented for d = 3".into(),
        ));
    }
    let bumps = f.bumps();
    if bumps.is_empty() {
        return Err(Error::Unsupported(
            "limit_variance_infinite needs a bump test function".into(),
        ));
    }
    let rmin = bumps.iter().map(|b| b.radius).fold(f64::INFINITY, f64::min);
    let mut spread = 0.0f64;
    for a in &bumps {
        for b in &bumps {
            let dist = a
                .center
                .iter()
                .zip(&b.center)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            spread = spread.max(dist);
        }
    }
    let integrand = |k: f64| -> Result<f64> {
        let g: Vec<f64> = bumps
            .iter()
            .map(|b| radial_bump_transform(3, b.radius, k, 1).map(|v| v * b.amplitude))
            .collect::<Result<_>>()?;
        let mut s = 0.0;
        for (j, a) in bumps.iter().enumerate() {
            for (l, b) in bumps.iter().enumerate() {
                let dist = a
                    .center
                    .iter()
                    .zip(&b.center)
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
                    .sqrt();
                s += g[j] * g[l] * sinc(k * dist);
            }
        }
        Ok(4.0 * std::f64::consts::PI * s)
    };
    // |ĝ(k)|² decays like exp(−2√(2kr)); beyond k r = 1500 it is below 1e-45
    let kmax = 1500.0 / rmin;
    let evaluate = |panels_per_unit: f64, order: usize| -> Result<f64> {
        // graded panels: uniform in √k to follow the stretched-exponential decay
        let scale = rmin.min(1.0 / (spread + rmin));
        let width = std::f64::consts::PI / (rmin.max(spread) + rmin);
        let mut total = 0.0;
        let mut a = 0.0;
        while a < kmax {
            let b = (a + width * (1.0 + (a * scale).sqrt())).min(kmax);
            let panels = (panels_per_unit).ceil() as usize;
            let (xs, ws) = composite_rule(QuadScheme::TensorGauss, order, a, b, panels);
            for (x, w) in xs.iter().zip(&ws) {
                total += w * integrand(*x)?;
            }
            a = b;
        }
        Ok(total)
    };
    let p = quad.points_per_axis;
    let mut prev = evaluate(1.0, p)?;
    for level in 1..6 {
        let next = evaluate((1 << level) as f64, p + 4)?;
        if (next - prev).abs() <= quad.rel_tol * next.abs() {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureNotConverged {
        rel_tol: quad.rel_tol,
        estimate: f64::NAN,
    })
}

/// Result of [`discrete_variance_fourier_detailed`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteVariance {
    pub value: f64,
    pub quadrature: CubeQuadrature,
    /// Quadrature nodes at which the symbol sandwich was checked (only for κ = (1, 1)).
    pub sandwich_nodes_checked: usize,
    pub sandwich_violations: usize,
}

/// Nonzero lattice samples `f(z/N)` on the support of `f`, as a dense box.
struct LatticeSamples {
    lower: Vec<i64>,
    shape: Vec<usize>,
    values: Vec<f64>,
}

fn lattice_samples(f: &TestFunction, n: usize) -> LatticeSamples {
    let (lo, hi) = f.support_box();
    let nf = n as f64;
    let lower: Vec<i64> = lo.iter().map(|v| (v * nf).floor() as i64).collect();
    let upper: Vec<i64> = hi.iter().map(|v| (v * nf).ceil() as i64).collect();
    let shape: Vec<usize> = lower
        .iter()
        .zip(&upper)
        .map(|(l, u)| (u - l + 1) as usize)
        .collect();
    let total: usize = shape.iter().product();
    let d = shape.len();
    let mut x = vec![0.0; d];
    let values = (0..total)
        .map(|flat| {
            let mut r = flat;
            for k in (0..d).rev() {
                x[k] = (lower[k] + (r % shape[k]) as i64) as f64 / nf;
                r /= shape[k];
            }
            f.eval(&x)
        })
        .collect();
    LatticeSamples {
        lower,
        shape,
        values,
    }
}

/// Contract axis `axis` of a row-major array with `table` (`g × shape[axis]`).
pub(crate) fn contract_axis<T>(
    data: &[T],
    shape: &[usize],
    axis: usize,
    table: &[T],
    g: usize,
) -> (Vec<T>, Vec<usize>)
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<Output = T>,
{
    let n_ax = shape[axis];
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![T::default(); outer * g * inner];
    for o in 0..outer {
        for a in 0..g {
            let row = &table[a * n_ax..(a + 1) * n_ax];
            let dst = &mut out[(o * g + a) * inner..(o * g + a + 1) * inner];
            for (z, &t) in row.iter().enumerate() {
                let src = &data[(o * n_ax + z) * inner..(o * n_ax + z + 1) * inner];
                for (dv, &sv) in dst.iter_mut().zip(src) {
                    *dv = *dv + t * sv;
                }
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[axis] = g;
    (out, new_shape)
}

/// Exact infinite-volume variance of `(Ψ_N, f)` for `d ≥ 3`:
/// `k² N^{d−2} (2π)^{−d} ∫_{[−π,π]^d} |F(u)|² / Σ κ_i μ(u)^i du` with
/// `F(u) = N^{−d} Σ_z f(z/N) e^{−i⟨z,u⟩}` summed exactly over the support of `f`.
pub fn discrete_variance_fourier(
    f: &TestFunction,
    n: usize,
    coeffs: &Coefficients,
    quad: &QuadratureSpec,
) -> Result<f64> {
    discrete_variance_fourier_detailed(f, n, coeffs, quad).map(|r| r.value)
}

pub fn discrete_variance_fourier_detailed(
    f: &TestFunction,
    n: usize,
    coeffs: &Coefficients,
    quad: &QuadratureSpec,
) -> Result<DiscreteVariance> {
    f.validate()?;
    let d = f.dim();
    if d < 3 {
        return Err(Error::Unsupported(
            "the infinite-volume variance requires d >= 3".into(),
        ));
    }
    if !(coeffs.kappa()[0] > 0.0) {
        return Err(Error::InvalidCoefficients("kappa_1 must be > 0".into()));
    }
    let samples = lattice_samples(f, n);
    let even = f.is_even();
    let nd = (n as f64).powi(d as i32);
    let check_sandwich = coeffs.kappa() == [1.0, 1.0];
    let checked = std::sync::atomic::AtomicUsize::new(0);
    let violations = std::sync::atomic::AtomicUsize::new(0);

    // frequencies per axis for panel selection
    let freq: Vec<f64> = (0..d)
        .map(|k| {
            let lo = samples.lower[k];
            let hi = lo + samples.shape[k] as i64 - 1;
            lo.unsigned_abs().max(hi.unsigned_abs()) as f64
        })
        .collect();

    // in the even case fold onto z ≥ 0 with multiplicity 2 for z > 0
    let (fold_values, fold_shape, fold_offsets): (Vec<f64>, Vec<usize>, Vec<Vec<i64>>) = if even {
        let shape: Vec<usize> = (0..d)
            .map(|k| (samples.lower[k] + samples.shape[k] as i64 - 1) as usize + 1)
            .collect();
        let total: usize = shape.iter().product();
        let mut vals = vec![0.0; total];
        let src_total: usize = samples.shape.iter().product();
        for flat in 0..src_total {
            let mut r = flat;
            let mut dst = 0usize;
            let mut stride = 1usize;
            let mut z = vec![0i64; d];
            for k in (0..d).rev() {
                z[k] = samples.lower[k] + (r % samples.shape[k]) as i64;
                r /= samples.shape[k];
            }
            if z.iter().any(|&v| v < 0) {
                continue;
            }
            for k in (0..d).rev() {
                dst += z[k] as usize * stride;
                stride *= shape[k];
            }
            let mult: f64 = z.iter().map(|&v| if v > 0 { 2.0 } else { 1.0 }).product();
            vals[dst] = samples.values[flat] * mult;
        }
        let offs = shape.iter().map(|&s| (0..s as i64).collect()).collect();
        (vals, shape, offs)
    } else {
        let offs = (0..d)
            .map(|k| {
                (0..samples.shape[k] as i64)
                    .map(|i| samples.lower[k] + i)
                    .collect()
            })
            .collect();
        (samples.values.clone(), samples.shape.clone(), offs)
    };

    let cell_integral = |cell: &crate::quadrature::Cell, p: usize, m: usize| -> f64 {
        let rule = TensorRule::new(
            cell,
            quad.scheme,
            p,
            &crate::quadrature::panels_for(cell, &freq, m),
        );
        let sizes: Vec<usize> = rule.nodes.iter().map(|v| v.len()).collect();
        // |F|² on the tensor grid
        let f2: Vec<f64> = if even {
            let mut data = fold_values.clone();
            let mut shape = fold_shape.clone();
            for k in (0..d).rev() {
                let g = sizes[k];
                let table: Vec<f64> = rule.nodes[k]
                    .iter()
                    .flat_map(|&u| fold_offsets[k].iter().map(move |&z| (z as f64 * u).cos()))
                    .collect();
                let (nd_, ns) = contract_axis(&data, &shape, k, &table, g);
                data = nd_;
                shape = ns;
            }
            data.iter().map(|v| (v / nd) * (v / nd)).collect()
        } else {
            let mut data: Vec<Complex64> = fold_values
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect();
            let mut shape = fold_shape.clone();
            for k in (0..d).rev() {
                let g = sizes[k];
                let table: Vec<Complex64> = rule.nodes[k]
                    .iter()
                    .flat_map(|&u| {
                        fold_offsets[k]
                            .iter()
                            .map(move |&z| Complex64::from_polar(1.0, -(z as f64) * u))
                    })
                    .collect();
                let (nd_, ns) = contract_axis(&data, &shape, k, &table, g);
                data = nd_;
                shape = ns;
            }
            data.iter().map(|v| (v / nd).norm_sqr()).collect()
        };
        let mut idx = vec![0usize; d];
        let mut u = vec![0.0; d];
        let mut theta = vec![0.0; d];
        let mut sum = 0.0;
        let mut local_checked = 0usize;
        let mut local_viol = 0usize;
        for &val in &f2 {
            let mut w = 1.0;
            for k in 0..d {
                u[k] = rule.nodes[k][idx[k]];
                w *= rule.weights[k][idx[k]];
            }
            sum += w * val / coeffs.symbol(&u);
            if check_sandwich {
                for k in 0..d {
                    theta[k] = u[k] * n as f64;
                }
                local_checked += 1;
                if !mu_sandwich_check(&theta, n).holds() {
                    local_viol += 1;
                }
            }
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < sizes[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        checked.fetch_add(local_checked, std::sync::atomic::Ordering::Relaxed);
        violations.fetch_add(local_viol, std::sync::atomic::Ordering::Relaxed);
        sum
    };
    let mut q = integrate_dyadic(d, even, quad, cell_integral)?;
    let sym = if even { 2f64.powi(d as i32) } else { 1.0 };
    let pref = k_squared(d)
        * (n as f64).powi(d as i32 - 2)
        * (2.0 * std::f64::consts::PI).powi(-(d as i32))
        * sym;
    q.value *= pref;
    q.error_estimate *= pref;
    q.tail *= pref;
    for s in &mut q.shells {
        s.value *= pref;
    }
    Ok(DiscreteVariance {
        value: q.value,
        quadrature: q,
        sandwich_nodes_checked: checked.into_inner(),
        sandwich_violations: violations.into_inner(),
    })
}

/// `N^{−d}(2π)^{−d/2} Σ_z f(z/N) e^{−i⟨z/N, θ⟩}`, the lattice approximation of `f̂(θ)`.
pub fn lattice_fourier(f: &TestFunction, n: usize, theta: &[f64]) -> Complex64 {
    let s = lattice_samples(f, n);
    let d = s.shape.len();
    let nf = n as f64;
    let total: usize = s.shape.iter().product();
    let mut acc = Complex64::new(0.0, 0.0);
    for flat in 0..total {
        let mut r = flat;
        let mut phase = 0.0;
        for k in (0..d).rev() {
            let z = s.lower[k] + (r % s.shape[k]) as i64;
            r /= s.shape[k];
            phase += z as f64 / nf * theta[k];
        }
        acc += s.values[flat] * Complex64::from_polar(1.0, -phase);
    }
    acc * nf.powi(-(d as i32)) * (2.0 * std::f64::consts::PI).powf(-(d as f64) / 2.0)
}

/// Source of variances for the λ-scaling statistic.
pub enum VarianceSource<'a> {
    /// Infinite volume, `d ≥ 3`, through [`discrete_variance_fourier`].
    Infinite {
        n: usize,
        coeffs: &'a Coefficients,
        quad: &'a QuadratureSpec,
    },
    /// Finite volume, through [`variance_pairing_exact`] on the operator's domain.
    Finite { op: &'a SparseSymOperator },
}

/// `(λ, λ^d·Var[(Ψ_N, f_λ)])` for each `λ ∈ (0, 1]`.
pub fn besov_scaling_statistic(
    f: &TestFunction,
    lambdas: &[f64],
    source: &VarianceSource,
) -> Result<Vec<(f64, f64)>> {
    let d = f.dim();
    lambdas
        .iter()
        .map(|&lambda| {
            if !(lambda > 0.0 && lambda <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "lambda must lie in (0, 1], got {lambda}"
                )));
            }
            let fl = f.dilate(lambda);
            let var = match source {
                VarianceSource::Infinite { n, coeffs, quad } => {
                    discrete_variance_fourier(&fl, *n, coeffs, quad)?
                }
                VarianceSource::Finite { op } => {
                    let (lo, hi) = fl.support_box();
                    let spec = op.domain().spec();
                    let corners_inside = [&lo, &hi].iter().all(|c| spec.contains_closure(c));
                    if !corners_inside {
                        return Err(Error::InvalidArgument(format!(
                            "support of f_lambda (lambda = {lambda}) leaves the domain"
                        )));
                    }
                    variance_pairing_exact(op, &fl)?
                }
            };
            Ok((lambda, lambda.powi(d as i32) * var))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{discretize, DomainSpec};
    use crate::operators::{precision, scaled_operator_lh};
    use std::sync::Arc;

    #[test]
    fn pairing_of_zero_and_spike() {
        let dom = discretize(&DomainSpec::unit_box(2), 8, 1).unwrap();
        let f = TestFunction::product_sine(vec![1, 1]);
        assert_eq!(
            field_pairing(&GridFunction::zeros(dom.len()), &f, &dom).unwrap(),
            0.0
        );
        let i = dom.index_of(&[3, 5]).unwrap();
        let got = field_pairing(&GridFunction::delta(dom.len(), i), &f, &dom).unwrap();
        let want = (0.25f64).sqrt() * 8f64.powi(-2) * f.eval(&[3.0 / 8.0, 5.0 / 8.0]);
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn exact_variance_same_for_j_and_lh() {
        let dom = Arc::new(discretize(&DomainSpec::ball(2, 1.0), 16, 2).unwrap());
        let c = Coefficients::new(vec![1.0, 1.0]).unwrap();
        let f = TestFunction::bump(vec![0.0, 0.0], 0.5, 1.0);
        let a = variance_pairing_exact(&precision(&dom, &c).unwrap(), &f).unwrap();
        let b = variance_pairing_exact(&scaled_operator_lh(&dom, &c).unwrap(), &f).unwrap();
        assert!((a - b).abs() < 1e-10 * a);
        let zero = TestFunction::bump(vec![0.0, 0.0], 0.5, 0.0);
        assert_eq!(
            variance_pairing_exact(&precision(&dom, &c).unwrap(), &zero).unwrap(),
            0.0
        );
    }

    #[test]
    fn contraction_matches_direct_sum() {
        let data: Vec<f64> = (0..12).map(|v| v as f64).collect();
        let shape = vec![3, 4];
        let table = vec![1.0, 2.0, 0.0, -1.0, 0.5, 0.5, 0.5, 0.5];
        let (out, s) = contract_axis(&data, &shape, 1, &table, 2);
        assert_eq!(s, vec![3, 2]);
        for r in 0..3 {
            for a in 0..2 {
                let want: f64 = (0..4).map(|z| table[a * 4 + z] * data[r * 4 + z]).sum();
                assert_eq!(out[r * 2 + a], want);
            }
        }
    }
}
