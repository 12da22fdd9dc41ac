//! Symmetric sparse matrices, envelope Cholesky and preconditioned CG.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Compressed sparse row matrix. Both triangles are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(triplets.len());
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i},{j}) out of range for n = {n}");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                rows.push(i);
                last = Some((i, j));
            }
        }
        let mut keep_cols = Vec::with_capacity(col_idx.len());
        let mut keep_vals = Vec::with_capacity(values.len());
        for ((i, j), v) in rows.into_iter().zip(col_idx).zip(values) {
            if v != 0.0 {
                row_ptr[i + 1] += 1;
                keep_cols.push(j);
                keep_vals.push(v);
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx: keep_cols,
            values: keep_vals,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }

    /// `self · other` (sparse product).
    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.n, other.n);
        let mut trip = Vec::new();
        let mut acc = vec![0.0; self.n];
        let mut seen = vec![false; self.n];
        let mut touched = Vec::new();
        for i in 0..self.n {
            let (ca, va) = self.row(i);
            for (&k, &a) in ca.iter().zip(va) {
                let (cb, vb) = other.row(k);
                for (&j, &b) in cb.iter().zip(vb) {
                    if !seen[j] {
                        seen[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                trip.push((i, j, acc[j]));
                acc[j] = 0.0;
                seen[j] = false;
            }
            touched.clear();
        }
        CsrMatrix::from_triplets(self.n, trip)
    }

    /// `a·self + b·other`.
    pub fn add_scaled(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        assert_eq!(self.n, other.n);
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for (m, s) in [(self, a), (other, b)] {
            for i in 0..m.n {
                let (c, v) = m.row(i);
                trip.extend(c.iter().zip(v).map(|(&j, &x)| (i, j, s * x)));
            }
        }
        CsrMatrix::from_triplets(self.n, trip)
    }

    pub fn scale(&self, s: f64) -> CsrMatrix {
        CsrMatrix {
            values: self.values.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    /// Largest `|a_ij − a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                worst = worst.max((x - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                row[j] = x;
            }
        }
        d
    }

    /// Dump as `row col value` lines with 17 significant digits.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<()> {
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                writeln!(w, "{i} {j} {x:.16e}")?;
            }
        }
        Ok(())
    }

    /// Index of the first nonzero column in each row, restricted to `j ≤ i`.
    fn envelope_starts(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| self.row(i).0.first().copied().unwrap_or(i).min(i))
            .collect()
    }

    /// Number of stored entries and flop estimate of an envelope factorization.
    pub fn envelope_cost(&self) -> (usize, f64) {
        let starts = self.envelope_starts();
        let mut size = 0usize;
        let mut work = 0.0f64;
        for (i, &s) in starts.iter().enumerate() {
            let w = i - s + 1;
            size += w;
            work += (w * w) as f64;
        }
        (size, work)
    }
}

/// Row-oriented envelope (profile) Cholesky factor `A = L Lᵀ`.
///
/// Row `i` of `L` is stored densely from its first nonzero column to the diagonal.
#[derive(Clone, Debug)]
pub struct EnvelopeCholesky {
    n: usize,
    start: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        let start = a.envelope_starts();
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - start[i] + 1);
        }
        let mut data = vec![0.0; offset[n]];
        for i in 0..n {
            let (c, v) = a.row(i);
            for (&j, &x) in c.iter().zip(v) {
                if j <= i {
                    data[offset[i] + j - start[i]] = x;
                }
            }
        }
        for i in 0..n {
            let si = start[i];
            let (done, rest) = data.split_at_mut(offset[i]);
            let row_i = &mut rest[..i - si + 1];
            for j in si..i {
                let sj = start[j];
                let row_j = &done[offset[j]..offset[j] + (j - sj + 1)];
                let k0 = si.max(sj);
                let dot: f64 = row_i[k0 - si..j - si]
                    .iter()
                    .zip(&row_j[k0 - sj..j - sj])
                    .map(|(x, y)| x * y)
                    .sum();
                row_i[j - si] = (row_i[j - si] - dot) / row_j[j - sj];
            }
            let sq: f64 = row_i[..i - si].iter().map(|x| x * x).sum();
            let d = row_i[i - si] - sq;
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::SolveFailure(format!(
                    "matrix is not positive definite (pivot {d:e} at row {i})"
                )));
            }
            row_i[i - si] = d.sqrt();
        }
        Ok(EnvelopeCholesky {
            n,
            start,
            offset,
            data,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[self.offset[i]..self.offset[i + 1]]
    }

    /// Solve `L y = b` in place.
    pub fn solve_lower(&self, b: &mut [f64]) {
        for i in 0..self.n {
            let s = self.start[i];
            let row = self.row(i);
            let dot: f64 = row[..i - s].iter().zip(&b[s..i]).map(|(l, y)| l * y).sum();
            b[i] = (b[i] - dot) / row[i - s];
        }
    }

    /// Solve `Lᵀ x = y` in place.
    pub fn solve_upper(&self, y: &mut [f64]) {
        for i in (0..self.n).rev() {
            let s = self.start[i];
            let row = self.row(i);
            y[i] /= row[i - s];
            let xi = y[i];
            for (yk, l) in y[s..i].iter_mut().zip(&row[..i - s]) {
                *yk -= l * xi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower(&mut x);
        self.solve_upper(&mut x);
        x
    }

    /// `log det A = 2 Σ log L_ii`.
    pub fn log_det(&self) -> f64 {
        (0..self.n)
            .map(|i| 2.0 * self.row(i)[i - self.start[i]].ln())
            .sum()
    }
}

/// Jacobi-preconditioned conjugate gradients to relative residual `tol`.
pub fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.n();
    let dinv: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        let ap = par_mul(a, &p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolveFailure(
                "conjugate gradients met a non-positive curvature direction".into(),
            ));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm2(&r) <= tol * bnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
    })
}

fn par_mul(a: &CsrMatrix, x: &[f64]) -> Vec<f64> {
    (0..a.n())
        .into_par_iter()
        .with_min_len(4096)
        .map(|i| {
            let (c, v) = a.row(i);
            c.iter().zip(v).map(|(&j, &w)| w * x[j]).sum()
        })
        .collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Envelope size above which the direct factorization is replaced by PCG.
pub const DIRECT_ENVELOPE_LIMIT: usize = 40_000_000;
/// Flop estimate above which the direct factorization is replaced by PCG.
pub const DIRECT_WORK_LIMIT: f64 = 4.0e10;
const CG_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-9;

/// Linear solver for a symmetric positive definite matrix: envelope
/// Cholesky when the profile is affordable, otherwise Jacobi PCG.
#[derive(Clone, Debug)]
pub enum SpdSolver {
    Direct {
        matrix: CsrMatrix,
        factor: EnvelopeCholesky,
    },
    Iterative {
        matrix: CsrMatrix,
    },
}

impl SpdSolver {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let (size, work) = a.envelope_cost();
        if size <= DIRECT_ENVELOPE_LIMIT && work <= DIRECT_WORK_LIMIT {
            Self::direct(a)
        } else {
            Ok(SpdSolver::Iterative { matrix: a.clone() })
        }
    }

    /// Always factorize, whatever the profile size.
    pub fn direct(a: &CsrMatrix) -> Result<Self> {
        Ok(SpdSolver::Direct {
            matrix: a.clone(),
            factor: EnvelopeCholesky::factor(a)?,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        match self {
            SpdSolver::Direct { matrix, .. } | SpdSolver::Iterative { matrix } => matrix,
        }
    }

    pub fn factor(&self) -> Option<&EnvelopeCholesky> {
        match self {
            SpdSolver::Direct { factor, .. } => Some(factor),
            SpdSolver::Iterative { .. } => None,
        }
    }

    /// Solve `A x = b` and check `‖Ax − b‖∞ ≤ 1e−9 · max(‖b‖∞, ‖A‖∞‖x‖∞)`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let a = self.matrix();
        if b.len() != a.n() {
            return Err(Error::DimensionMismatch {
                expected: a.n(),
                got: b.len(),
            });
        }
        let mut x = match self {
            SpdSolver::Direct { factor, .. } => factor.solve(b),
            SpdSolver::Iterative { matrix } => pcg(matrix, b, CG_TOL, 20 * matrix.n() + 100)?,
        };
        let scale = |x: &[f64]| norm_inf(b).max(a.norm_inf() * norm_inf(x));
        let mut r: Vec<f64> = a.mul_vec(&x).iter().zip(b).map(|(ax, b)| b - ax).collect();
        if norm_inf(&r) > RESIDUAL_TOL * scale(&x) {
            // one step of iterative refinement
            if let SpdSolver::Direct { factor, .. } = self {
                let dx = factor.solve(&r);
                for (xi, d) in x.iter_mut().zip(dx) {
                    *xi += d;
                }
                r = a.mul_vec(&x).iter().zip(b).map(|(ax, b)| b - ax).collect();
            }
        }
        let res = norm_inf(&r);
        if !res.is_finite() || res > RESIDUAL_TOL * scale(&x) {
            return Err(Error::SolveFailure(format!(
                "residual {res:e} exceeds tolerance"
            )));
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, d: f64, o: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, d));
            if i + 1 < n {
                t.push((i, i + 1, o));
                t.push((i + 1, i, o));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, 0.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn cholesky_solves_tridiagonal() {
        let a = tridiag(50, 2.0, -1.0);
        let f = EnvelopeCholesky::factor(&a).unwrap();
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let x = f.solve(&b);
        let r = a.mul_vec(&x);
        for (u, v) in r.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
        // det of tridiag(-1,2,-1) is n+1
        assert!((f.log_det() - 51f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = tridiag(4, 1.0, -1.0);
        assert!(matches!(
            EnvelopeCholesky::factor(&a),
            Err(Error::SolveFailure(_))
        ));
    }

    #[test]
    fn upper_solve_gives_inverse_covariance_factor() {
        // B = L^{-T} satisfies B Bᵀ = A^{-1}, so x = B z has covariance A^{-1}
        let n = 6;
        let a = tridiag(n, 3.0, -1.0);
        let f = EnvelopeCholesky::factor(&a).unwrap();
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                let mut e = vec![0.0; n];
                e[k] = 1.0;
                f.solve_upper(&mut e);
                e
            })
            .collect();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let inv = f.solve(&e);
            for i in 0..n {
                let bbt: f64 = (0..n).map(|k| cols[k][i] * cols[k][j]).sum();
                assert!((bbt - inv[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn pcg_matches_direct() {
        let a = tridiag(200, 2.5, -1.0);
        let b: Vec<f64> = (0..200).map(|i| 1.0 + (i % 7) as f64).collect();
        let x1 = pcg(&a, &b, 1e-12, 2000).unwrap();
        let x2 = EnvelopeCholesky::factor(&a).unwrap().solve(&b);
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn matmul_matches_dense() {
        let a = tridiag(5, 2.0, -1.0);
        let p = a.matmul(&a).to_dense();
        let d = a.to_dense();
        for i in 0..5 {
            for j in 0..5 {
                let want: f64 = (0..5).map(|k| d[i][k] * d[k][j]).sum();
                assert_eq!(p[i][j], want);
            }
        }
    }

    #[test]
    fn solver_reports_dimension_mismatch() {
        let s = SpdSolver::new(&tridiag(3, 2.0, -1.0)).unwrap();
        assert_eq!(
            s.solve(&[1.0]).unwrap_err(),
            Error::DimensionMismatch {
                expected: 3,
                got: 1
            }
        );
    }
}
