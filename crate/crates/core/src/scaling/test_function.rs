//! Smooth compactly supported test functions, their dilations and Fourier transforms.
//!
//! Fourier convention: `f̂(θ) = (2π)^{−d/2} ∫ f(x) e^{−i⟨x,θ⟩} dx`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{composite_rule, QuadScheme};

/// `A·exp(−1/(1 − ‖x−c‖²/r²))` inside the ball of radius `r`, zero outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
}

/// Unit bump profile `exp(−1/(1 − s²))` for `|s| < 1`.
pub fn bump_profile(s: f64) -> f64 {
    let q = 1.0 - s * s;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}

impl Bump {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum();
        self.amplitude * bump_profile((r2.sqrt() / self.radius).min(1.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    Bump {
        center: Vec<f64>,
        radius: f64,
        amplitude: f64,
    },
    /// Sum of bumps (e.g. a difference of two bumps with matched integrals).
    BumpSum { bumps: Vec<Bump> },
    /// `A Π sin(m_i π x_i / s)` on `[0, s]^d`, zero outside.
    ProductSine {
        modes: Vec<u32>,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl TestFunction {
    pub fn bump(center: Vec<f64>, radius: f64, amplitude: f64) -> Self {
        TestFunction::Bump {
            center,
            radius,
            amplitude,
        }
    }

    pub fn product_sine(modes: Vec<u32>) -> Self {
        TestFunction::ProductSine {
            modes,
            scale: 1.0,
            amplitude: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        match self {
            TestFunction::ProductSine { modes, scale, .. } => {
                if modes.is_empty() || modes.contains(&0) {
                    return bad("product_sine modes must be >= 1");
                }
                if !(*scale > 0.0) {
                    return bad("product_sine scale must be > 0");
                }
            }
            _ => {
                let bumps = self.bumps();
                if bumps.is_empty() {
                    return bad("bump sum is empty");
                }
                let d = bumps[0].center.len();
                if d == 0 || bumps.iter().any(|b| b.center.len() != d) {
                    return bad("bump centers must share a positive dimension");
                }
                if bumps
                    .iter()
                    .any(|b| !(b.radius > 0.0) || !b.amplitude.is_finite())
                {
                    return bad("bump radius must be > 0 and amplitude finite");
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            TestFunction::Bump { center, .. } => center.len(),
            TestFunction::BumpSum { bumps } => bumps.first().map_or(0, |b| b.center.len()),
            TestFunction::ProductSine { modes, .. } => modes.len(),
        }
    }

    /// Bumps making up the function (empty for product sines).
    pub fn bumps(&self) -> Vec<Bump> {
        match self {
            TestFunction::Bump {
                center,
                radius,
                amplitude,
            } => vec![Bump {
                center: center.clone(),
                radius: *radius,
                amplitude: *amplitude,
            }],
            TestFunction::BumpSum { bumps } => bumps.clone(),
            TestFunction::ProductSine { .. } => Vec::new(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::ProductSine {
                modes,
                scale,
                amplitude,
            } => {
                if x.iter().any(|&v| v < 0.0 || v > *scale) {
                    return 0.0;
                }
                amplitude
                    * x.iter()
                        .zip(modes)
                        .map(|(v, &m)| (m as f64 * std::f64::consts::PI * v / scale).sin())
                        .product::<f64>()
            }
            _ => self.bumps().iter().map(|b| b.eval(x)).sum(),
        }
    }

    /// `f_λ(x) = λ^{−d} f(x/λ)`.
    pub fn dilate(&self, lambda: f64) -> TestFunction {
        let amp = lambda.powi(-(self.dim() as i32));
        let scale_bump = |b: &Bump| Bump {
            center: b.center.iter().map(|c| c * lambda).collect(),
            radius: b.radius * lambda,
            amplitude: b.amplitude * amp,
        };
        match self {
            TestFunction::Bump { .. } => {
                let b = scale_bump(&self.bumps()[0]);
                TestFunction::Bump {
                    center: b.center,
                    radius: b.radius,
                    amplitude: b.amplitude,
                }
            }
            TestFunction::BumpSum { bumps } => TestFunction::BumpSum {
                bumps: bumps.iter().map(scale_bump).collect(),
            },
            TestFunction::ProductSine {
                modes,
                scale,
                amplitude,
            } => TestFunction::ProductSine {
                modes: modes.clone(),
                scale: scale * lambda,
                amplitude: amplitude * amp,
            },
        }
    }

    /// Evaluate `f_λ(x)` directly.
    pub fn eval_dilated(&self, x: &[f64], lambda: f64) -> f64 {
        let y: Vec<f64> = x.iter().map(|v| v / lambda).collect();
        lambda.powi(-(self.dim() as i32)) * self.eval(&y)
    }

    /// Axis-aligned box containing the support.
    pub fn support_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            TestFunction::ProductSine { modes, scale, .. } => {
                (vec![0.0; modes.len()], vec![*scale; modes.len()])
            }
            _ => {
                let bumps = self.bumps();
                let d = self.dim();
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for b in &bumps {
                    for k in 0..d {
                        lo[k] = lo[k].min(b.center[k] - b.radius);
                        hi[k] = hi[k].max(b.center[k] + b.radius);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Whether `f(…, −x_k, …) = f(…, x_k, …)` for every axis `k`.
    pub fn is_even(&self) -> bool {
        match self {
            TestFunction::ProductSine { .. } => false,
            _ => self
                .bumps()
                .iter()
                .all(|b| b.center.iter().all(|&c| c == 0.0)),
        }
    }

    /// `∫ f`.
    pub fn integral(&self) -> Result<f64> {
        Ok(self.fourier(&vec![0.0; self.dim()])?.re
            * (2.0 * std::f64::consts::PI).powf(self.dim() as f64 / 2.0))
    }

    /// `f̂(θ)` at the default resolution.
    pub fn fourier(&self, theta: &[f64]) -> Result<Complex64> {
        self.fourier_with_resolution(theta, 1)
    }

    /// `f̂(θ)`: closed form for product sines, radial quadrature for bumps
    /// (`d ≤ 3`). `resolution` multiplies the number of quadrature panels.
    pub fn fourier_with_resolution(&self, theta: &[f64], resolution: usize) -> Result<Complex64> {
        let d = self.dim();
        if theta.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: theta.len(),
            });
        }
        let norm = (2.0 * std::f64::consts::PI).powf(-(d as f64) / 2.0);
        match self {
            TestFunction::ProductSine {
                modes,
                scale,
                amplitude,
            } => {
                let mut v = Complex64::new(amplitude * norm, 0.0);
                for (&t, &m) in theta.iter().zip(modes) {
                    v *= sine_transform_1d(m, *scale, t);
                }
                Ok(v)
            }
            _ => {
                let k = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
                let mut v = Complex64::new(0.0, 0.0);
                for b in self.bumps() {
                    let phase: f64 = theta.iter().zip(&b.center).map(|(t, c)| t * c).sum();
                    let g = b.amplitude * radial_bump_transform(d, b.radius, k, resolution)?;
                    v += Complex64::from_polar(g, -phase);
                }
                Ok(v)
            }
        }
    }
}

/// `∫_0^s sin(mπx/s) e^{−itx} dx`.
fn sine_transform_1d(m: u32, s: f64, t: f64) -> Complex64 {
    let a = m as f64 * std::f64::consts::PI / s;
    let denom = a * a - t * t;
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    if denom.abs() > 1e-6 * a * a {
        let e = Complex64::from_polar(1.0, -t * s);
        a * (Complex64::new(1.0, 0.0) - sign * e) / denom
    } else {
        let (xs, ws) = composite_rule(QuadScheme::TensorGauss, 16, 0.0, s, 4 * m as usize + 4);
        xs.iter()
            .zip(&ws)
            .map(|(&x, &w)| w * (a * x).sin() * Complex64::from_polar(1.0, -t * x))
            .sum()
    }
}

/// Fourier transform of the unit-amplitude radial bump of radius `r` at frequency `|θ| = k`.
pub fn radial_bump_transform(d: usize, r: f64, k: f64, resolution: usize) -> Result<f64> {
    use std::f64::consts::PI;
    let kr = k * r;
    let panels = resolution * (48 + (kr / PI).ceil() as usize);
    let (xs, ws) = composite_rule(QuadScheme::TensorGauss, 16, 0.0, 1.0, panels);
    let sum: f64 = match d {
        1 => {
            2.0 * xs
                .iter()
                .zip(&ws)
                .map(|(&s, &w)| w * bump_profile(s) * (kr * s).cos())
                .sum::<f64>()
        }
        2 => {
            2.0 * PI
                * xs.iter()
                    .zip(&ws)
                    .map(|(&s, &w)| w * bump_profile(s) * s * libm::j0(kr * s))
                    .sum::<f64>()
        }
        3 => {
            4.0 * PI
                * xs.iter()
                    .zip(&ws)
                    .map(|(&s, &w)| w * bump_profile(s) * s * s * sinc(kr * s))
                    .sum::<f64>()
        }
        _ => {
            return Err(Error::Unsupported(format!(
                "bump Fourier transform implemented for d <= 3, got {d}"
            )))
        }
    };
    Ok((2.0 * PI).powf(-(d as f64) / 2.0) * r.powi(d as i32) * sum)
}

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0 + x.powi(4) / 120.0
    } else {
        x.sin() / x
    }
}
