//! Dense row-major matrices and the few kernels the rest of the crate needs.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A dense `rows x cols` matrix of `f64`, stored row-major.
///
/// Storage order is internal. Every file format in [`crate::io`] states its own
/// element order, so nothing outside this module depends on it.
#[derive(Clone, PartialEq)]
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

    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// One column per slice.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.as_ref().len());
        let mut m = Matrix::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            let c = c.as_ref();
            if c.len() != rows {
                return Err(Error::InvalidArgument(format!(
                    "column {j} has {} entries, expected {rows}",
                    c.len()
                )));
            }
            m.set_column(j, c);
        }
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Matrix::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn column_vector(values: &[f64]) -> Self {
        Matrix {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major view of the entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows);
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Standard product `self * other`.
    ///
    /// Each output entry accumulates its terms in increasing inner index, so the
    /// result is bit-identical to a textbook triple loop.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let out_row = &mut out[i * m..(i + 1) * m];
            let a_row = &self.data[i * k..(i + 1) * k];
            for (p, &a) in a_row.iter().enumerate() {
                let b_row = &other.data[p * m..(p + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Matrix {
            rows: n,
            cols: m,
            data: out,
        })
    }

    /// `selfᵀ * other` without materializing the transpose.
    pub fn tr_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch {
                op: "tr_matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let (k, n, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; n * m];
        for p in 0..k {
            let a_row = &self.data[p * n..(p + 1) * n];
            let b_row = &other.data[p * m..(p + 1) * m];
            for (i, &a) in a_row.iter().enumerate() {
                let out_row = &mut out[i * m..(i + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Matrix {
            rows: n,
            cols: m,
            data: out,
        })
    }

    /// `self * otherᵀ`, the row-by-row dot products.
    pub fn matmul_tr(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                op: "matmul_tr",
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(Matrix::from_fn(self.rows, other.rows, |i, j| {
            dot(self.row(i), other.row(j))
        }))
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Adds `v` to every column.
    pub fn add_column_vector(&self, v: &[f64]) -> Result<Matrix> {
        self.broadcast(v, 1.0)
    }

    /// Subtracts `v` from every column.
    pub fn sub_column_vector(&self, v: &[f64]) -> Result<Matrix> {
        self.broadcast(v, -1.0)
    }

    fn broadcast(&self, v: &[f64], sign: f64) -> Result<Matrix> {
        if v.len() != self.rows {
            return Err(Error::DimensionMismatch {
                op: "column broadcast",
                left: self.shape(),
                right: (v.len(), 1),
            });
        }
        let mut out = self.clone();
        for (i, &vi) in v.iter().enumerate() {
            for x in out.row_mut(i) {
                *x += sign * vi;
            }
        }
        Ok(out)
    }

    /// Sum of each row, i.e. `self * 1`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Columns at the given indices, in that order.
    pub fn select_columns(&self, indices: &[usize]) -> Matrix {
        Matrix::from_fn(self.rows, indices.len(), |i, j| self[(i, indices[j])])
    }

    pub fn leading_columns(&self, k: usize) -> Matrix {
        let k = k.min(self.cols);
        Matrix::from_fn(self.rows, k, |i, j| self[(i, j)])
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm_sq(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(12) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(12) {
                write!(f, "{:>12.6} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Free-function form of [`Matrix::matmul`].
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.matmul(b)
}

/// Element-wise mean of the columns (the mean observation).
pub fn column_mean(y: &Matrix) -> Result<Vec<f64>> {
    if y.cols() == 0 || y.rows() == 0 {
        return Err(Error::Empty("column_mean"));
    }
    let n = y.cols() as f64;
    Ok(y.row_sums().into_iter().map(|s| s / n).collect())
}

/// Sum of squared entries.
pub fn frobenius_norm_sq(a: &Matrix) -> f64 {
    a.as_slice().iter().map(|v| v * v).sum()
}

/// Seeded generator behind every random draw in the crate.
///
/// ChaCha8 keyed by the 64-bit seed through `SeedableRng::seed_from_u64`, with
/// normals drawn by `rand_distr::StandardNormal`. Both are platform
/// independent, so a seed reproduces the same stream everywhere.
#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// A uniformly random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut self.rng);
        idx
    }
}

/// I.i.d. `N(0, scale²)` entries.
pub fn gaussian_fill(rng: &mut RandomSource, rows: usize, cols: usize, scale: f64) -> Result<Matrix> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "gaussian scale must be positive, got {scale}"
        )));
    }
    Ok(Matrix::from_fn(rows, cols, |_, _| scale * rng.normal()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut c = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a[(i, k)] * b[(k, j)];
                }
                c[(i, j)] = s;
            }
        }
        c
    }

    fn random(rng: &mut RandomSource, r: usize, c: usize) -> Matrix {
        gaussian_fill(rng, r, c, 1.0).unwrap()
    }

    #[test]
    fn identity_product() {
        let mut rng = RandomSource::new(1);
        let a = random(&mut rng, 3, 4);
        assert_eq!(Matrix::identity(3).matmul(&a).unwrap(), a);
    }

    #[test]
    fn small_product_by_hand() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[[1.0], [1.0]]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().as_slice(), &[3.0, 7.0]);
    }

    #[test]
    fn matches_triple_loop_exactly() {
        let mut rng = RandomSource::new(7);
        let a = random(&mut rng, 7, 5);
        let b = random(&mut rng, 5, 4);
        assert_eq!(a.matmul(&b).unwrap(), naive(&a, &b));
        assert_eq!(a.transpose().tr_matmul(&b).unwrap(), naive(&a, &b));
        assert_eq!(a.matmul_tr(&b.transpose()).unwrap(), naive(&a, &b));
    }

    #[test]
    fn dimension_mismatch() {
        let a = Matrix::zeros(2, 3);
        assert!(matches!(
            a.matmul(&Matrix::zeros(2, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn column_mean_cases() {
        let y = Matrix::from_columns(&[[1.0, 1.0], [3.0, 3.0]]).unwrap();
        assert_eq!(column_mean(&y).unwrap(), vec![2.0, 2.0]);
        let c = Matrix::column_vector(&[0.5, -2.0, 9.0]);
        assert_eq!(column_mean(&c).unwrap(), vec![0.5, -2.0, 9.0]);
        assert!(matches!(column_mean(&Matrix::zeros(3, 0)), Err(Error::Empty(_))));
    }

    #[test]
    fn column_mean_of_standard_normals() {
        let mut rng = RandomSource::new(11);
        let y = random(&mut rng, 4, 1000);
        // 4σ/√N with σ = 1, N = 1000 is about 0.126.
        for m in column_mean(&y).unwrap() {
            assert!(m.abs() < 0.15, "{m}");
        }
    }

    #[test]
    fn frobenius_cases() {
        assert_eq!(frobenius_norm_sq(&Matrix::zeros(3, 2)), 0.0);
        assert_eq!(frobenius_norm_sq(&Matrix::from_rows(&[[3.0, 4.0]]).unwrap()), 25.0);
        let mut rng = RandomSource::new(3);
        let a = random(&mut rng, 4, 6);
        assert!((frobenius_norm_sq(&a) - frobenius_norm_sq(&a.transpose())).abs() < 1e-12);
    }

    #[test]
    fn gaussian_fill_determinism_and_moments() {
        assert!(gaussian_fill(&mut RandomSource::new(0), 2, 2, 0.0).is_err());
        let a = gaussian_fill(&mut RandomSource::new(5), 3, 3, 1.0).unwrap();
        let b = gaussian_fill(&mut RandomSource::new(5), 3, 3, 1.0).unwrap();
        assert_eq!(a, b);
        let c = gaussian_fill(&mut RandomSource::new(6), 3, 3, 1.0).unwrap();
        assert_ne!(a, c);

        let big = gaussian_fill(&mut RandomSource::new(42), 100, 100, 1.0).unwrap();
        let n = 10_000.0;
        let mean = big.as_slice().iter().sum::<f64>() / n;
        let var = big.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05, "{mean}");
        assert!((var - 1.0).abs() < 0.1, "{var}");
    }

    #[test]
    fn permutation_is_a_permutation() {
        let mut p = RandomSource::new(9).permutation(50);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn associativity(seed in any::<u64>(), n in 1usize..20, k in 1usize..20, l in 1usize..20, m in 1usize..20) {
            let mut rng = RandomSource::new(seed);
            let a = random(&mut rng, n, k);
            let b = random(&mut rng, k, l);
            let c = random(&mut rng, l, m);
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            let err = left.sub(&right).unwrap().frobenius_norm();
            prop_assert!(err <= 1e-9 * left.frobenius_norm().max(1e-300));
        }

        #[test]
        fn transpose_of_product(seed in any::<u64>(), n in 1usize..12, k in 1usize..12, m in 1usize..12) {
            let mut rng = RandomSource::new(seed);
            let a = random(&mut rng, n, k);
            let b = random(&mut rng, k, m);
            prop_assert_eq!(
                a.matmul(&b).unwrap().transpose(),
                b.transpose().matmul(&a.transpose()).unwrap()
            );
        }

        #[test]
        fn centered_rows_sum_to_zero(seed in any::<u64>(), n in 1usize..8, cols in 1usize..300, offset in -50.0f64..50.0) {
            let mut rng = RandomSource::new(seed);
            let y = random(&mut rng, n, cols).map(|v| v * 3.0 + offset);
            let y0 = y.sub_column_vector(&column_mean(&y).unwrap()).unwrap();
            let bound = 1e-9 * cols as f64 * y.max_abs();
            for s in y0.row_sums() {
                prop_assert!(s.abs() <= bound);
            }
        }
    }
}
