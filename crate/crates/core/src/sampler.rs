//! Exact Gaussian sampling from a precision operator, the one-dimensional
//! random-walk bridge construction, and empirical covariances.
//!
//! Each sample uses its own ChaCha8 stream selected by the sample index, so a
//! batch is a pure function of `(operator, count, seed)` whatever the thread count.

use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{discretize_unchecked, DomainSpec, LatticeDomain};
use crate::operators::{Coefficients, GridFunction, SparseSymOperator};
use crate::sparse::EnvelopeCholesky;

/// Independent samples of a centred Gaussian field on a lattice domain.
#[derive(Clone, Debug)]
pub struct SampleBatch {
    pub domain: Arc<LatticeDomain>,
    pub coeffs: Coefficients,
    pub seed: u64,
    pub samples: Vec<GridFunction>,
}

/// Random stream for sample `index` of a batch seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

impl SampleBatch {
    pub fn count(&self) -> usize {
        self.samples.len()
    }

    /// Values of node `i` across the batch.
    pub fn node_values(&self, i: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.values[i]).collect()
    }

    /// CSV with one row per sample, preceded by a `#`-prefixed JSON header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            domain: &'a DomainSpec,
            resolution: usize,
            depth: usize,
            kappa: &'a [f64],
            seed: u64,
            count: usize,
        }
        let header = Header {
            domain: self.domain.spec(),
            resolution: self.domain.resolution(),
            depth: self.domain.depth(),
            kappa: self.coeffs.kappa(),
            seed: self.seed,
            count: self.count(),
        };
        writeln!(
            w,
            "# {}",
            serde_json::to_string(&header).map_err(|e| Error::Io(e.to_string()))?
        )?;
        let names: Vec<String> = (0..self.domain.len())
            .map(|i| {
                let z: Vec<String> = self.domain.node(i).iter().map(|c| c.to_string()).collect();
                format!("n{}", z.join("_"))
            })
            .collect();
        writeln!(w, "sample,{}", names.join(","))?;
        for (s, g) in self.samples.iter().enumerate() {
            let v: Vec<String> = g.values.iter().map(|x| format!("{x:.17e}")).collect();
            writeln!(w, "{s},{}", v.join(","))?;
        }
        Ok(())
    }
}

/// Draw `count` samples of `N(0, J^{−1})` as `φ = L^{−T} z`, `J = L Lᵀ`, `z ~ N(0, I)`.
pub fn sample(op: &SparseSymOperator, count: usize, seed: u64) -> Result<SampleBatch> {
    let owned;
    let factor = match op.solver()?.factor() {
        Some(f) => f,
        None => {
            owned = EnvelopeCholesky::factor(op.matrix())?;
            &owned
        }
    };
    let n = op.n();
    let samples = (0..count)
        .into_par_iter()
        .map(|s| {
            let mut rng = sample_rng(seed, s as u64);
            let mut z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            factor.solve_upper(&mut z);
            GridFunction::new(z)
        })
        .collect();
    Ok(SampleBatch {
        domain: op.domain_arc(),
        coeffs: op.coefficients().clone(),
        seed,
        samples,
    })
}

/// Zero-boundary walk bridge: with `X_m ~ N(0, 2)` i.i.d., `S_1 = 0`,
/// `S_i = S_{i−1} + X_i`, and `S'_i = S_i − (i−1)/(N−2)·S_{N−1}` for
/// `i = 1..N−1`. The free values `S'_2..S'_{N−2}` live on the interior
/// `{2, …, N−2}` of the unit interval at resolution `N` with layer depth 2.
pub fn sample_bridge_dgff_1d(n: usize, count: usize, seed: u64) -> Result<SampleBatch> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!(
            "bridge needs N >= 4, got {n}"
        )));
    }
    let domain = Arc::new(discretize_unchecked(&DomainSpec::Interval, n, 2)?);
    let normal = Normal::new(0.0, std::f64::consts::SQRT_2).expect("valid normal");
    let denom = (n - 2) as f64;
    let samples = (0..count)
        .into_par_iter()
        .map(|s| {
            let mut rng = sample_rng(seed, s as u64);
            // s_path[i] = S_i for i = 1..N−1 (index 0 unused)
            let mut path = vec![0.0; n];
            for i in 2..n {
                path[i] = path[i - 1] + normal.sample(&mut rng);
            }
            let end = path[n - 1];
            GridFunction::new(
                (2..=n - 2)
                    .map(|i| path[i] - (i - 1) as f64 / denom * end)
                    .collect(),
            )
        })
        .collect();
    Ok(SampleBatch {
        domain,
        coeffs: Coefficients::new(vec![1.0])?,
        seed,
        samples,
    })
}

/// Unbiased sample covariances for the given pairs of interior indices.
pub fn empirical_covariance(batch: &SampleBatch, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    let m = batch.count();
    if m < 2 {
        return Err(Error::InvalidArgument(
            "empirical covariance needs at least two samples".into(),
        ));
    }
    let n = batch.domain.len();
    if let Some(&(i, j)) = pairs.iter().find(|(i, j)| *i >= n || *j >= n) {
        return Err(Error::InvalidArgument(format!(
            "pair ({i}, {j}) outside the {n} interior nodes"
        )));
    }
    let mf = m as f64;
    let means: Vec<f64> = (0..n)
        .map(|i| batch.samples.iter().map(|s| s.values[i]).sum::<f64>() / mf)
        .collect();
    Ok(pairs
        .iter()
        .map(|&(i, j)| {
            batch
                .samples
                .iter()
                .map(|s| (s.values[i] - means[i]) * (s.values[j] - means[j]))
                .sum::<f64>()
                / (mf - 1.0)
        })
        .collect())
}
