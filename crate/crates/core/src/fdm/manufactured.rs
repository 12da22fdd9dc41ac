//! Manufactured solutions `u(x) = (R² − ‖x − c‖²)² g(x − c)` on a ball with
//! polynomial `g`, their Laplacians and derivative sup-norms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::DomainSpec;

/// Multivariate polynomial as a map from exponent vectors to coefficients.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    dim: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Polynomial {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(vec![0; dim], c);
        p
    }

    /// The coordinate `y_k`.
    pub fn coordinate(dim: usize, k: usize) -> Self {
        let mut e = vec![0; dim];
        e[k] = 1;
        let mut p = Self::zero(dim);
        p.add_term(e, 1.0);
        p
    }

    pub fn from_terms(dim: usize, terms: &[(Vec<u32>, f64)]) -> Result<Self> {
        let mut p = Self::zero(dim);
        for (e, c) in terms {
            if e.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: e.len(),
                });
            }
            p.add_term(e.clone(), *c);
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &f64)> {
        self.terms.iter()
    }

    fn add_term(&mut self, e: Vec<u32>, c: f64) {
        if c == 0.0 {
            return;
        }
        let slot = self.terms.entry(e).or_insert(0.0);
        *slot += c;
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut p = self.clone();
        for (e, c) in &other.terms {
            p.add_term(e.clone(), *c);
        }
        p.terms.retain(|_, c| *c != 0.0);
        p
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut p = Self::zero(self.dim);
        for (e, c) in &self.terms {
            p.add_term(e.clone(), c * s);
        }
        p
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut p = Self::zero(self.dim);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                p.add_term(e, ca * cb);
            }
        }
        p.terms.retain(|_, c| *c != 0.0);
        p
    }

    pub fn derivative(&self, k: usize) -> Polynomial {
        let mut p = Self::zero(self.dim);
        for (e, c) in &self.terms {
            if e[k] > 0 {
                let mut f = e.clone();
                f[k] -= 1;
                p.add_term(f, c * e[k] as f64);
            }
        }
        p
    }

    /// `∂^α p`.
    pub fn partial(&self, alpha: &[u32]) -> Polynomial {
        let mut p = self.clone();
        for (k, &a) in alpha.iter().enumerate() {
            for _ in 0..a {
                p = p.derivative(k);
            }
        }
        p
    }

    pub fn laplacian(&self) -> Polynomial {
        (0..self.dim).fold(Self::zero(self.dim), |acc, k| {
            acc.add(&self.derivative(k).derivative(k))
        })
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                c * e
                    .iter()
                    .zip(y)
                    .map(|(&p, v)| v.powi(p as i32))
                    .product::<f64>()
            })
            .sum()
    }
}

/// Multi-indices `α` with `|α| = order` in `dim` variables.
fn multi_indices(dim: usize, order: u32) -> Vec<Vec<u32>> {
    if dim == 1 {
        return vec![vec![order]];
    }
    (0..=order)
        .flat_map(|a| {
            multi_indices(dim - 1, order - a)
                .into_iter()
                .map(move |mut rest| {
                    rest.insert(0, a);
                    rest
                })
        })
        .collect()
}

/// Analytic solution of the Dirichlet problem on a ball, vanishing to second
/// order on the sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedSolution {
    pub id: String,
    pub domain: DomainSpec,
    /// `u` in coordinates `y = x − c`.
    pub u: Polynomial,
    /// `−Δ_c u` in the same coordinates.
    pub minus_laplacian: Polynomial,
    /// `M_1 = Σ_{|α|≤1} sup|D^α u|` over the closed ball.
    pub m1: f64,
    /// `M_3 = Σ_{|α|≤3} sup|D^α u|` over the closed ball.
    pub m3: f64,
}

impl ManufacturedSolution {
    /// `u = (R² − ‖y‖²)² g(y)`; sup-norms from a dense polar/tensor sample of the closed ball.
    pub fn ball(id: &str, domain: &DomainSpec, g: &Polynomial) -> Result<Self> {
        let DomainSpec::Ball {
            dimension, radius, ..
        } = domain
        else {
            return Err(Error::Unsupported(
                "manufactured solutions are defined on balls".into(),
            ));
        };
        let d = *dimension;
        if g.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: g.dim(),
            });
        }
        let r2 = Polynomial::constant(d, radius * radius);
        let norm2 = (0..d).fold(Polynomial::zero(d), |acc, k| {
            let y = Polynomial::coordinate(d, k);
            acc.add(&y.mul(&y))
        });
        let w = r2.add(&norm2.scale(-1.0));
        let u = w.mul(&w).mul(g);
        let minus_laplacian = u.laplacian().scale(-1.0);
        let samples = ball_samples(d, *radius);
        let sup = |p: &Polynomial| samples.iter().map(|y| p.eval(y).abs()).fold(0.0, f64::max);
        let mut by_order = Vec::new();
        for order in 0..=3 {
            let s: f64 = multi_indices(d, order)
                .iter()
                .map(|a| sup(&u.partial(a)))
                .sum();
            by_order.push(s);
        }
        Ok(ManufacturedSolution {
            id: id.to_string(),
            domain: domain.clone(),
            m1: by_order[0] + by_order[1],
            m3: by_order.iter().sum(),
            u,
            minus_laplacian,
        })
    }

    /// `g(y) = 1 + y_1/2 + y_d²/4`.
    pub fn standard(domain: &DomainSpec) -> Result<Self> {
        let d = domain.dimension();
        let mut last = vec![0; d];
        last[d - 1] += 2;
        let mut first = vec![0; d];
        first[0] += 1;
        let g = Polynomial::from_terms(d, &[(vec![0; d], 1.0), (first, 0.5), (last, 0.25)])?;
        Self::ball("ball-quartic-g2", domain, &g)
    }

    fn shift(&self, x: &[f64]) -> Vec<f64> {
        match &self.domain {
            DomainSpec::Ball { center, .. } => x.iter().zip(center).map(|(a, c)| a - c).collect(),
            _ => x.to_vec(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.u.eval(&self.shift(x))
    }

    /// Right-hand side `f = −Δ_c u`.
    pub fn rhs(&self, x: &[f64]) -> f64 {
        self.minus_laplacian.eval(&self.shift(x))
    }
}

/// Tensor grid of the closed ball plus a dense sample of its boundary sphere.
fn ball_samples(d: usize, r: f64) -> Vec<Vec<f64>> {
    let per_axis = match d {
        1 => 4001,
        2 => 401,
        _ => 61,
    };
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        let y: Vec<f64> = idx
            .iter()
            .map(|&i| -r + 2.0 * r * i as f64 / (per_axis - 1) as f64)
            .collect();
        let n2: f64 = y.iter().map(|v| v * v).sum();
        if n2 <= r * r {
            out.push(y);
        }
        let mut k = d;
        loop {
            if k == 0 {
                break;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
        }
        if idx.iter().all(|&i| i == 0) {
            break;
        }
    }
    // boundary points along each coordinate-pair circle
    for a in 0..d {
        for b in a + 1..d {
            for t in 0..2000 {
                let phi = 2.0 * std::f64::consts::PI * t as f64 / 2000.0;
                let mut y = vec![0.0; d];
                y[a] = r * phi.cos();
                y[b] = r * phi.sin();
                out.push(y);
            }
        }
    }
    out
}
