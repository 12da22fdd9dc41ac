//! Dirichlet eigenbasis of the unit box, negative Sobolev norms and the
//! truncated Wiener series of the continuum free field.
//!
//! On `[0,1]^d`: `λ_m = π²‖m‖²`, `u_m(x) = 2^{d/2} Π sin(m_i π x_i)`, `m ∈ {1,2,…}^d`.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::DomainSpec;
use crate::quadrature::{composite_rule, QuadScheme};
use crate::sampler::sample_rng;
use crate::scaling::test_function::TestFunction;
use crate::scaling::variance::contract_axis;

use std::f64::consts::PI;

/// One Dirichlet eigenpair of the unit box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub m: Vec<u32>,
    pub lambda: f64,
}

impl Mode {
    pub fn eval(&self, x: &[f64]) -> f64 {
        if x.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return 0.0;
        }
        let d = self.m.len() as i32;
        2f64.powf(d as f64 / 2.0)
            * x.iter()
                .zip(&self.m)
                .map(|(v, &m)| (m as f64 * PI * v).sin())
                .product::<f64>()
    }
}

/// The `J` lowest Dirichlet modes of the unit box, ascending in `λ` with
/// ties broken lexicographically in `m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenData {
    pub domain: DomainSpec,
    pub modes: Vec<Mode>,
}

impl EigenData {
    pub fn unit_box(d: usize, truncation: usize) -> Result<Self> {
        if d == 0 || truncation == 0 {
            return Err(Error::InvalidArgument(
                "eigendata needs d >= 1 and truncation >= 1".into(),
            ));
        }
        // every mode with ‖m‖ ≤ M lies in the cube {1..M}^d
        let mut radius = 1u32;
        let modes = loop {
            let mut inside = Vec::new();
            let mut m = vec![1u32; d];
            loop {
                let r2: u64 = m.iter().map(|&v| (v as u64) * (v as u64)).sum();
                if r2 <= (radius as u64).pow(2) {
                    inside.push((r2, m.clone()));
                }
                let mut k = d;
                let done = loop {
                    if k == 0 {
                        break true;
                    }
                    k -= 1;
                    m[k] += 1;
                    if m[k] <= radius {
                        break false;
                    }
                    m[k] = 1;
                };
                if done {
                    break;
                }
            }
            if inside.len() >= truncation {
                inside.sort();
                break inside;
            }
            radius *= 2;
        };
        Ok(EigenData {
            domain: DomainSpec::unit_box(d),
            modes: modes
                .into_iter()
                .take(truncation)
                .map(|(r2, m)| Mode {
                    m,
                    lambda: PI * PI * r2 as f64,
                })
                .collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.dimension()
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }

    /// Range of `λ_j / j^{2/d}` over the truncation (Weyl asymptotics).
    pub fn weyl_ratio_range(&self) -> (f64, f64) {
        let e = 2.0 / self.dim() as f64;
        self.modes
            .iter()
            .enumerate()
            .map(|(j, m)| m.lambda / ((j + 1) as f64).powf(e))
            .fold((f64::INFINITY, 0.0), |(lo, hi), r| (lo.min(r), hi.max(r)))
    }

    /// Asymptotic `λ_j ≈ c_W j^{2/d}` with `c_W = π² (2^d / ω_d)^{2/d}`, `ω_d` the unit-ball volume.
    pub fn weyl_constant(&self) -> f64 {
        let d = self.dim();
        let omega = DomainSpec::ball(d, 1.0).volume();
        PI * PI * (2f64.powi(d as i32) / omega).powf(2.0 / d as f64)
    }

    /// `⟨f, u_j⟩` for every retained mode: closed form for product sines,
    /// composite Gauss quadrature over the support otherwise.
    pub fn coefficients(&self, f: &TestFunction) -> Result<Vec<f64>> {
        f.validate()?;
        let d = self.dim();
        if f.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: f.dim(),
            });
        }
        if let TestFunction::ProductSine {
            modes,
            scale,
            amplitude,
        } = f
        {
            if *scale == 1.0 {
                // A Π sin(k_i π x) = A 2^{−d/2} u_k
                let c = amplitude * 2f64.powf(-(d as f64) / 2.0);
                return Ok(self
                    .modes
                    .iter()
                    .map(|mode| if mode.m == *modes { c } else { 0.0 })
                    .collect());
            }
        }
        let (lo, hi) = f.support_box();
        let mmax = self
            .modes
            .iter()
            .flat_map(|m| m.m.iter().copied())
            .max()
            .unwrap_or(1) as usize;
        let mut shape = Vec::with_capacity(d);
        let mut tables = Vec::with_capacity(d);
        let mut nodes = Vec::with_capacity(d);
        for k in 0..d {
            let a = lo[k].max(0.0);
            let b = hi[k].min(1.0);
            let panels = (64.0f64.max(2.0 * mmax as f64 * (b - a))).ceil() as usize;
            let (xs, ws) = composite_rule(QuadScheme::TensorGauss, 8, a, b, panels);
            let mut table = Vec::with_capacity(mmax * xs.len());
            for m in 1..=mmax {
                for (x, w) in xs.iter().zip(&ws) {
                    table.push(w * std::f64::consts::SQRT_2 * (m as f64 * PI * x).sin());
                }
            }
            shape.push(xs.len());
            tables.push(table);
            nodes.push(xs);
        }
        let total: usize = shape.iter().product();
        let mut data = vec![0.0; total];
        let mut x = vec![0.0; d];
        for (flat, v) in data.iter_mut().enumerate() {
            let mut r = flat;
            for k in (0..d).rev() {
                x[k] = nodes[k][r % shape[k]];
                r /= shape[k];
            }
            *v = f.eval(&x);
        }
        let mut cur_shape = shape;
        for k in (0..d).rev() {
            let (next, s) = contract_axis(&data, &cur_shape, k, &tables[k], mmax);
            data = next;
            cur_shape = s;
        }
        Ok(self
            .modes
            .iter()
            .map(|mode| {
                let flat = mode
                    .m
                    .iter()
                    .fold(0usize, |acc, &m| acc * mmax + (m as usize - 1));
                data[flat]
            })
            .collect())
    }
}

/// Truncated `‖f‖²_{−s} = Σ_{j≤J} λ_j^{−s}⟨f,u_j⟩²` with a Weyl-based tail estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevNorm {
    pub squared: f64,
    /// `max_j⟨f,u_j⟩² · Σ_{j>J} λ_j^{−s}`, the sum bounded by `∫_J^∞ (c_W x^{2/d})^{−s} dx`;
    /// infinite when `2s ≤ d`.
    pub tail_bound: f64,
}

pub fn sobolev_norm_neg(coef: &[f64], s: f64, eig: &EigenData) -> Result<SobolevNorm> {
    if coef.len() > eig.len() {
        return Err(Error::DimensionMismatch {
            expected: eig.len(),
            got: coef.len(),
        });
    }
    let squared = coef
        .iter()
        .zip(&eig.modes)
        .map(|(c, m)| m.lambda.powf(-s) * c * c)
        .sum();
    let max_c2 = coef.iter().map(|c| c * c).fold(0.0, f64::max);
    let p = 2.0 * s / eig.dim() as f64;
    let tail_bound = if max_c2 == 0.0 {
        0.0
    } else if p <= 1.0 {
        f64::INFINITY
    } else {
        let jn = coef.len() as f64;
        max_c2 * eig.weyl_constant().powf(-s) * jn.powf(1.0 - p) / (p - 1.0)
    };
    Ok(SobolevNorm {
        squared,
        tail_bound,
    })
}

/// `Σ_j λ_j^{s}⟨f,u_j⟩²`, the positive-index counterpart used for duality checks.
pub fn sobolev_norm_pos_squared(coef: &[f64], s: f64, eig: &EigenData) -> f64 {
    coef.iter()
        .zip(&eig.modes)
        .map(|(c, m)| m.lambda.powf(s) * c * c)
        .sum()
}

/// Coefficients `λ_j^{−1/2} ξ_j`, `j ≤ J`, of the truncated Wiener series
/// `Ψ_D = Σ λ_j^{−1/2} ξ_j u_j` with i.i.d. standard normal `ξ_j`.
pub fn gff_series_sample(eig: &EigenData, truncation: usize, seed: u64) -> Result<Vec<f64>> {
    gff_series_draw(eig, truncation, seed, 0)
}

/// Draw `index` of a batch seeded with `seed`; draw 0 is [`gff_series_sample`].
pub fn gff_series_draw(
    eig: &EigenData,
    truncation: usize,
    seed: u64,
    index: u64,
) -> Result<Vec<f64>> {
    if truncation == 0 || truncation > eig.len() {
        return Err(Error::InvalidArgument(format!(
            "truncation must lie in 1..={}, got {truncation}",
            eig.len()
        )));
    }
    let mut rng = sample_rng(seed, index);
    Ok(eig.modes[..truncation]
        .iter()
        .map(|m| {
            let xi: f64 = StandardNormal.sample(&mut rng);
            xi / m.lambda.sqrt()
        })
        .collect())
}

/// `(Ψ, f) = Σ_j c_j ⟨f, u_j⟩` in coefficient space.
pub fn series_pairing(field: &[f64], fcoef: &[f64]) -> f64 {
    field.iter().zip(fcoef).map(|(a, b)| a * b).sum()
}
