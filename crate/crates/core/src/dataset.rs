//! Datasets (one observation per column) and planted-spectrum generators.

use crate::error::{Error, Result};
use crate::matrix::{dot, gaussian_fill, Matrix, RandomSource};
use crate::spectral::orthonormality_error;

/// `n x N` observations, one per column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: Matrix,
    source_tag: String,
    image_shape: Option<(usize, usize)>,
}

impl Dataset {
    pub fn new(observations: Matrix, source_tag: impl Into<String>) -> Result<Self> {
        if observations.rows() == 0 || observations.cols() == 0 {
            return Err(Error::Empty("dataset"));
        }
        if !observations.is_finite() {
            return Err(Error::NonFinite("dataset"));
        }
        Ok(Dataset {
            observations,
            source_tag: source_tag.into(),
            image_shape: None,
        })
    }

    pub fn with_image_shape(mut self, height: usize, width: usize) -> Result<Self> {
        if height * width != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "image shape {height}x{width} does not match dimension {}",
                self.dim()
            )));
        }
        self.image_shape = Some((height, width));
        Ok(self)
    }

    pub fn observations(&self) -> &Matrix {
        &self.observations
    }

    pub fn into_observations(self) -> Matrix {
        self.observations
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn image_shape(&self) -> Option<(usize, usize)> {
        self.image_shape
    }

    /// Observation dimension `n`.
    pub fn dim(&self) -> usize {
        self.observations.rows()
    }

    /// Number of observations `N`.
    pub fn len(&self) -> usize {
        self.observations.cols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The first `count` observations.
    pub fn truncate(&self, count: usize) -> Result<Dataset> {
        if count == 0 {
            return Err(Error::Empty("dataset"));
        }
        let count = count.min(self.len());
        let idx: Vec<usize> = (0..count).collect();
        Ok(Dataset {
            observations: self.observations.select_columns(&idx),
            source_tag: format!("{}[..{count}]", self.source_tag),
            image_shape: self.image_shape,
        })
    }

    /// Returns a copy with `shift` added to every observation.
    pub fn shifted(&self, shift: &[f64]) -> Result<Dataset> {
        Ok(Dataset {
            observations: self.observations.add_column_vector(shift)?,
            source_tag: format!("{}+shift", self.source_tag),
            image_shape: self.image_shape,
        })
    }
}

/// Ground truth for synthetic data: an orthogonal basis, per-axis standard
/// deviations and a mean.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpectrum {
    basis: Matrix,
    stds: Vec<f64>,
    mean: Vec<f64>,
}

impl PlantedSpectrum {
    /// `stds` must be strictly descending over its positive entries; a tail of
    /// exact zeros is allowed for rank-deficient data.
    pub fn new(basis: Matrix, stds: Vec<f64>, mean: Vec<f64>) -> Result<Self> {
        let n = basis.rows();
        if n == 0 || !basis.is_square() {
            return Err(Error::InvalidArgument("basis must be a non-empty square matrix".into()));
        }
        if stds.len() != n || mean.len() != n {
            return Err(Error::InvalidArgument(format!(
                "basis is {n}x{n} but {} stds and {} mean entries were given",
                stds.len(),
                mean.len()
            )));
        }
        let dev = orthonormality_error(&basis);
        if dev > 1e-10 {
            return Err(Error::NotOrthonormal(dev));
        }
        validate_stds(&stds)?;
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mean"));
        }
        Ok(PlantedSpectrum { basis, stds, mean })
    }

    /// Random orthogonal basis with zero mean.
    pub fn random(stds: Vec<f64>, rng: &mut RandomSource) -> Result<Self> {
        let n = stds.len();
        let basis = random_orthogonal(n, rng)?;
        PlantedSpectrum::new(basis, stds, vec![0.0; n])
    }

    pub fn with_mean(mut self, mean: Vec<f64>) -> Result<Self> {
        if mean.len() != self.dim() {
            return Err(Error::InvalidArgument("mean has the wrong length".into()));
        }
        self.mean = mean;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// `basis · diag(stds²) · basisᵀ`.
    pub fn covariance(&self) -> Matrix {
        let var: Vec<f64> = self.stds.iter().map(|s| s * s).collect();
        self.basis
            .matmul(&Matrix::diag(&var))
            .and_then(|m| m.matmul_tr(&self.basis))
            .expect("square shapes")
    }
}

pub(crate) fn validate_stds(stds: &[f64]) -> Result<()> {
    if stds.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::InvalidArgument("stds must be finite and non-negative".into()));
    }
    let positive = stds.iter().take_while(|&&s| s > 0.0).count();
    if stds[positive..].iter().any(|&s| s != 0.0) {
        return Err(Error::InvalidArgument("zero stds may only appear at the end".into()));
    }
    if stds[..positive].windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("stds must be strictly descending".into()));
    }
    Ok(())
}

/// Draws `count` observations `mean + basis · (stds ⊙ z)` with `z ~ N(0, I)`.
pub fn synthesize_gaussian(spectrum: &PlantedSpectrum, count: usize, rng: &mut RandomSource) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::Empty("synthesize_gaussian"));
    }
    let n = spectrum.dim();
    let mut y = Matrix::zeros(n, count);
    let mut scaled = vec![0.0; n];
    for j in 0..count {
        for (s, &sd) in scaled.iter_mut().zip(&spectrum.stds) {
            *s = sd * rng.normal();
        }
        for i in 0..n {
            y[(i, j)] = spectrum.mean[i] + dot(spectrum.basis.row(i), &scaled);
        }
    }
    Dataset::new(y, format!("planted(n={n},N={count},seed={})", rng.seed()))
}

/// Orthonormalizes the columns of an `n x n` Gaussian matrix with two passes of
/// modified Gram–Schmidt.
pub fn random_orthogonal(n: usize, rng: &mut RandomSource) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::Empty("random_orthogonal"));
    }
    let g = gaussian_fill(rng, n, n, 1.0)?;
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut c = g.column(j);
        for _ in 0..2 {
            for b in &cols {
                let p = dot(&c, b);
                for (x, y) in c.iter_mut().zip(b) {
                    *x -= p * y;
                }
            }
        }
        let len = dot(&c, &c).sqrt();
        if !(len > 1e-12) {
            return Err(Error::RankDeficient { rank: j, required: n });
        }
        cols.push(c.into_iter().map(|x| x / len).collect());
    }
    Matrix::from_columns(&cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::column_mean;

    /// Determinant by Gaussian elimination with partial pivoting.
    fn lu_det(a: &Matrix) -> f64 {
        let n = a.rows();
        let mut m = a.clone();
        let mut det = 1.0;
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| m[(i, k)].abs().total_cmp(&m[(j, k)].abs())).unwrap();
            if p != k {
                for c in 0..n {
                    let t = m[(k, c)];
                    m[(k, c)] = m[(p, c)];
                    m[(p, c)] = t;
                }
                det = -det;
            }
            det *= m[(k, k)];
            for i in k + 1..n {
                let f = m[(i, k)] / m[(k, k)];
                for c in k..n {
                    let v = m[(k, c)];
                    m[(i, c)] -= f * v;
                }
            }
        }
        det
    }

    #[test]
    fn orthogonal_cases() {
        let q1 = random_orthogonal(1, &mut RandomSource::new(0)).unwrap();
        assert_eq!(q1[(0, 0)].abs(), 1.0);
        for seed in 0..5 {
            let q = random_orthogonal(6, &mut RandomSource::new(seed)).unwrap();
            assert!(orthonormality_error(&q) < 1e-10);
            assert!((lu_det(&q).abs() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_stds_give_constant_data() {
        let spectrum = PlantedSpectrum::new(Matrix::identity(3), vec![0.0; 3], vec![1.0, -2.0, 0.5]).unwrap();
        let d = synthesize_gaussian(&spectrum, 10, &mut RandomSource::new(1)).unwrap();
        for j in 0..10 {
            assert_eq!(d.observations().column(j), vec![1.0, -2.0, 0.5]);
        }
    }

    #[test]
    fn axis_aligned_sample_moments() {
        let spectrum = PlantedSpectrum::new(Matrix::identity(2), vec![3.0, 1.0], vec![0.0, 0.0]).unwrap();
        let d = synthesize_gaussian(&spectrum, 50_000, &mut RandomSource::new(2)).unwrap();
        let y = d.observations();
        let mu = column_mean(y).unwrap();
        let y0 = y.sub_column_vector(&mu).unwrap();
        let c = y0.matmul_tr(&y0).unwrap().scale(1.0 / 50_000.0);
        assert!((c[(0, 0)] / 9.0 - 1.0).abs() < 0.03, "{}", c[(0, 0)]);
        assert!((c[(1, 1)] - 1.0).abs() < 0.03, "{}", c[(1, 1)]);
        assert!(c[(0, 1)].abs() < 0.05);
    }

    #[test]
    fn synthesis_is_deterministic() {
        let spectrum = PlantedSpectrum::random(vec![4.0, 2.0, 1.0], &mut RandomSource::new(3)).unwrap();
        let a = synthesize_gaussian(&spectrum, 20, &mut RandomSource::new(9)).unwrap();
        let b = synthesize_gaussian(&spectrum, 20, &mut RandomSource::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empirical_covariance_converges() {
        let stds: Vec<f64> = (0..12).map(|i| 6.0 - 0.45 * i as f64).collect();
        let spectrum = PlantedSpectrum::random(stds, &mut RandomSource::new(4)).unwrap();
        let d = synthesize_gaussian(&spectrum, 50_000, &mut RandomSource::new(5)).unwrap();
        let y0 = d
            .observations()
            .sub_column_vector(&column_mean(d.observations()).unwrap())
            .unwrap();
        let c = y0.matmul_tr(&y0).unwrap().scale(1.0 / 50_000.0);
        let want = spectrum.covariance();
        let rel = c.sub(&want).unwrap().frobenius_norm() / want.frobenius_norm();
        assert!(rel < 0.05, "{rel}");
    }

    #[test]
    fn stds_validation() {
        let id = || Matrix::identity(3);
        assert!(PlantedSpectrum::new(id(), vec![3.0, 3.0, 1.0], vec![0.0; 3]).is_err());
        assert!(PlantedSpectrum::new(id(), vec![1.0, 2.0, 3.0], vec![0.0; 3]).is_err());
        assert!(PlantedSpectrum::new(id(), vec![2.0, 0.0, 1.0], vec![0.0; 3]).is_err());
        assert!(PlantedSpectrum::new(id(), vec![2.0, 1.0, 0.0], vec![0.0; 3]).is_ok());
        let skew = Matrix::from_rows(&[[1.0, 0.1], [0.0, 1.0]]).unwrap();
        assert!(matches!(
            PlantedSpectrum::new(skew, vec![2.0, 1.0], vec![0.0; 2]),
            Err(Error::NotOrthonormal(_))
        ));
    }

    #[test]
    fn image_shape_must_match() {
        let d = Dataset::new(Matrix::zeros(6, 2), "t").unwrap();
        assert!(d.clone().with_image_shape(2, 3).is_ok());
        assert!(d.with_image_shape(2, 2).is_err());
    }
}
