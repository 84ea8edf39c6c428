//! Dense linear algebra and seeded random sampling shared by every other
//! module. Everything is `f64`; matrices are row-major and immutable once
//! built.

mod rng;

pub use rng::SeededRng;

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count must be rows*cols");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &v) in entries.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `self * v`
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = self.row(i);
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += row[j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// `self^T * v`
    pub fn matvec_transpose(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = self.row(i);
            let vi = v[i];
            for j in 0..self.cols {
                out[j] += row[j] * vi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// Gram matrix `self^T * self` (always symmetric PSD).
    pub fn gram(&self) -> Matrix {
        let mut g = Matrix::zeros(self.cols, self.cols);
        for i in 0..self.rows {
            let row = self.row(i);
            for a in 0..self.cols {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                for b in a..self.cols {
                    g[(a, b)] += ra * row[b];
                }
            }
        }
        for a in 0..self.cols {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        g
    }

    pub fn add_scaled_identity(&mut self, eps: f64) {
        assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            self[(i, i)] += eps;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactorization {
    lower: Matrix,
    dim: usize,
}

/// Cholesky factorization `m = L L^T`. The input must be square and
/// symmetric; a non-positive pivot reports which row failed, which usually
/// signals a degenerate covariance or rank-deficient Gram matrix.
pub fn cholesky(m: &Matrix) -> Result<SpdFactorization> {
    if m.rows() != m.cols() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            actual: m.cols(),
            context: "cholesky requires a square matrix",
        });
    }
    let n = m.rows();
    let mut lower = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = m[(j, j)];
        for k in 0..j {
            diag -= lower[(j, k)] * lower[(j, k)];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite {
                index: j,
                pivot: diag,
            });
        }
        let ljj = diag.sqrt();
        lower[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut acc = m[(i, j)];
            for k in 0..j {
                acc -= lower[(i, k)] * lower[(j, k)];
            }
            lower[(i, j)] = acc / ljj;
        }
    }
    Ok(SpdFactorization { lower, dim: n })
}

impl SpdFactorization {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    /// `log det(m) = 2 * sum_i log L[i][i]`
    pub fn log_det(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.lower[(i, i)].ln())
            .sum::<f64>()
            * 2.0
    }

    /// Solve `L y = b` by forward substitution.
    pub fn solve_lower(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: b.len(),
                context: "solve_lower rhs",
            });
        }
        let mut y = b.to_vec();
        for i in 0..self.dim {
            for k in 0..i {
                let lik = self.lower[(i, k)];
                y[i] -= lik * y[k];
            }
            y[i] /= self.lower[(i, i)];
        }
        Ok(y)
    }

    /// Solve `m x = b` via the two triangular solves.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.solve_lower(b)?;
        // back substitution with L^T
        for i in (0..self.dim).rev() {
            for k in (i + 1)..self.dim {
                let lki = self.lower[(k, i)];
                x[i] -= lki * x[k];
            }
            x[i] /= self.lower[(i, i)];
        }
        Ok(x)
    }
}

/// `log det` via a Cholesky factorization.
pub fn log_det_spd(f: &SpdFactorization) -> f64 {
    f.log_det()
}

/// Solve an SPD system given its factorization.
pub fn solve_spd(f: &SpdFactorization, b: &[f64]) -> Result<Vec<f64>> {
    f.solve(b)
}

/// Draw `mean + L z` with `z` standard normal.
pub fn sample_gaussian(
    rng: &mut SeededRng,
    mean: &[f64],
    cov_factor: &SpdFactorization,
) -> Result<Vec<f64>> {
    if mean.len() != cov_factor.dim() {
        return Err(Error::DimensionMismatch {
            expected: cov_factor.dim(),
            actual: mean.len(),
            context: "sample_gaussian mean",
        });
    }
    let n = mean.len();
    let z: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
    let mut out = mean.to_vec();
    for i in 0..n {
        for k in 0..=i {
            out[i] += cov_factor.lower()[(i, k)] * z[k];
        }
    }
    Ok(out)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Numerically stable `log(sum(exp(v)))`.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = v.iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_identity() {
        let f = cholesky(&Matrix::identity(3)).unwrap();
        assert_eq!(f.lower(), &Matrix::identity(3));
    }

    #[test]
    fn cholesky_diagonal_square_roots() {
        let f = cholesky(&Matrix::diag(&[4.0, 9.0])).unwrap();
        assert_eq!(f.lower(), &Matrix::diag(&[2.0, 3.0]));
    }

    #[test]
    fn cholesky_reconstructs_random_spd() {
        let mut rng = SeededRng::new(7);
        for _ in 0..20 {
            let n = 4;
            let mut a = Matrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] = rng.next_normal();
                }
            }
            let mut m = a.transpose().matmul(&a);
            m.add_scaled_identity(1.0);
            let f = cholesky(&m).unwrap();
            let rec = f.lower().matmul(&f.lower().transpose());
            let mut diff = 0.0;
            for i in 0..n {
                for j in 0..n {
                    diff += (rec[(i, j)] - m[(i, j)]).powi(2);
                }
            }
            let rel = diff.sqrt() / m.frobenius_norm();
            assert!(rel < 1e-10, "relative reconstruction error {rel}");
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = Matrix::diag(&[1.0, -1.0]);
        match cholesky(&m) {
            Err(Error::NotPositiveDefinite { index: 1, .. }) => {}
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn log_det_matches_closed_forms() {
        let f = cholesky(&Matrix::identity(5)).unwrap();
        assert!(f.log_det().abs() < 1e-14);

        let f = cholesky(&Matrix::diag(&[4.0, 9.0])).unwrap();
        assert!((f.log_det() - 36f64.ln()).abs() < 1e-12);

        let f = cholesky(&Matrix::diag(&[2.0, 2.0])).unwrap();
        assert!((f.log_det() - 4f64.ln()).abs() < 1e-12);
    }

    // Oracle: cofactor-expansion determinant for small matrices.
    fn det_cofactor(m: &Matrix) -> f64 {
        let n = m.rows();
        if n == 1 {
            return m[(0, 0)];
        }
        let mut det = 0.0;
        for j in 0..n {
            let mut minor = Matrix::zeros(n - 1, n - 1);
            for i in 1..n {
                let mut cj = 0;
                for k in 0..n {
                    if k == j {
                        continue;
                    }
                    minor[(i - 1, cj)] = m[(i, k)];
                    cj += 1;
                }
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            det += sign * m[(0, j)] * det_cofactor(&minor);
        }
        det
    }

    #[test]
    fn log_det_matches_cofactor_expansion() {
        let mut rng = SeededRng::new(11);
        for n in 1..=4usize {
            for _ in 0..10 {
                let mut a = Matrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        a[(i, j)] = rng.next_normal();
                    }
                }
                let mut m = a.transpose().matmul(&a);
                m.add_scaled_identity(0.5);
                let f = cholesky(&m).unwrap();
                let oracle = det_cofactor(&m).ln();
                let rel = (f.log_det() - oracle).abs() / oracle.abs().max(1.0);
                assert!(rel < 1e-10, "n={n} rel={rel}");
            }
        }
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let f = cholesky(&Matrix::identity(2)).unwrap();
        assert_eq!(f.solve(&[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);

        let f = cholesky(&Matrix::diag(&[2.0, 2.0])).unwrap();
        let x = f.solve(&[4.0, 6.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-14 && (x[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn solve_random_spd_residual() {
        let mut rng = SeededRng::new(23);
        for _ in 0..20 {
            let n = 5;
            let mut a = Matrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] = rng.next_normal();
                }
            }
            let mut m = a.transpose().matmul(&a);
            m.add_scaled_identity(1.0);
            let b: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
            let f = cholesky(&m).unwrap();
            let x = f.solve(&b).unwrap();
            let mb = m.matvec(&x);
            let res: f64 = mb
                .iter()
                .zip(&b)
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(res / bn.max(1e-300) < 1e-9);
        }
    }

    #[test]
    fn solve_dimension_mismatch() {
        let f = cholesky(&Matrix::identity(3)).unwrap();
        assert!(matches!(
            f.solve(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gaussian_sampling_is_seed_deterministic() {
        let f = cholesky(&Matrix::identity(3)).unwrap();
        let mut r1 = SeededRng::new(99);
        let mut r2 = SeededRng::new(99);
        let a = sample_gaussian(&mut r1, &[0.0; 3], &f).unwrap();
        let b = sample_gaussian(&mut r2, &[0.0; 3], &f).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_sampling_moments() {
        let f = cholesky(&Matrix::diag(&[1.0, 4.0])).unwrap();
        let mean = [1.0, 2.0];
        let mut rng = SeededRng::new(5);
        let n = 100_000;
        let mut sum = [0.0; 2];
        let mut sumsq = [0.0; 2];
        for _ in 0..n {
            let s = sample_gaussian(&mut rng, &mean, &f).unwrap();
            for d in 0..2 {
                sum[d] += s[d];
                sumsq[d] += s[d] * s[d];
            }
        }
        for d in 0..2 {
            let m = sum[d] / n as f64;
            let v = sumsq[d] / n as f64 - m * m;
            assert!((m - mean[d]).abs() < 0.05, "mean[{d}] = {m}");
            let target = if d == 0 { 1.0 } else { 4.0 };
            assert!((v - target).abs() < 0.1, "var[{d}] = {v}");
        }
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-14);
        let v = [-1000.0, -1000.5];
        let got = log_sum_exp(&v);
        let expect = -1000.0 + (1.0 + (-0.5f64).exp()).ln();
        assert!((got - expect).abs() < 1e-12);
    }
}
