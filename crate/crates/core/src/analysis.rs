//! Reference PCA, loading-vector recovery from trained weights, and the
//! diagnostics used to compare the two.
//!
//! Variances are unnormalized sums of squares (eigenvalues of `Y0 Y0ᵀ`);
//! divide by `N` for per-observation variances. Covariances reported by
//! [`covariance_report`] use `1/N`.

use std::fmt;
use std::path::Path;

use crate::autoencoder::AutoencoderParams;
use crate::error::{Error, FormatError, Kind, Result};
use crate::io::{format_csv, parse_key_values, read_matrix, write_key_values, write_matrix, Orientation};
use crate::matrix::{column_mean, frobenius_norm_sq, Matrix};
use crate::spectral::{orthonormality_error, pseudoinverse, sym_eigen, thin_svd, DEGENERACY_TOL};

const ORTHONORMAL_TOL: f64 = 1e-8;
const ANGLE_INPUT_TOL: f64 = 1e-6;

/// Where a model's loading vectors came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Oracle,
    RecoveredFromW2,
    RecoveredFromW1,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Oracle => "oracle",
            Provenance::RecoveredFromW2 => "w2",
            Provenance::RecoveredFromW1 => "w1",
        })
    }
}

impl std::str::FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "oracle" => Ok(Provenance::Oracle),
            "w2" => Ok(Provenance::RecoveredFromW2),
            "w1" => Ok(Provenance::RecoveredFromW1),
            other => Err(format!("unknown provenance {other:?}")),
        }
    }
}

/// Which weight matrix to factor: `W2` (`n x m`) or `W1ᵀ` (`n x m`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightSource {
    #[default]
    W2,
    W1,
}

/// Mean, orthonormal loading vectors (columns) and their variances.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    loading_vectors: Matrix,
    variances: Option<Vec<f64>>,
    singular_values: Option<Vec<f64>>,
    provenance: Provenance,
    degenerate: bool,
}

impl PcaModel {
    pub fn new(
        mean: Vec<f64>,
        loading_vectors: Matrix,
        variances: Option<Vec<f64>>,
        provenance: Provenance,
        degenerate: bool,
    ) -> Result<Self> {
        let (n, m) = loading_vectors.shape();
        if n == 0 || m == 0 {
            return Err(Error::Empty("loading vectors"));
        }
        if mean.len() != n {
            return Err(Error::InvalidArgument(format!("mean has length {}, expected {n}", mean.len())));
        }
        let dev = orthonormality_error(&loading_vectors);
        if dev > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal(dev));
        }
        if let Some(v) = &variances {
            if v.len() != m {
                return Err(Error::InvalidArgument(format!("{} variances for {m} loading vectors", v.len())));
            }
            if v.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(Error::InvalidArgument("variances must be finite and non-negative".into()));
            }
            if !is_descending(v) {
                return Err(Error::InvalidArgument("variances must be descending".into()));
            }
        }
        Ok(PcaModel { mean, loading_vectors, variances, singular_values: None, provenance, degenerate })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn loading_vectors(&self) -> &Matrix {
        &self.loading_vectors
    }

    pub fn variances(&self) -> Option<&[f64]> {
        self.variances.as_deref()
    }

    /// Singular values of the factored weight matrix, for recovered models.
    pub fn singular_values(&self) -> Option<&[f64]> {
        self.singular_values.as_deref()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Set when neighbouring spectrum values are too close for individual
    /// vectors to be identified; the spanned subspace is still meaningful.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn dim(&self) -> usize {
        self.loading_vectors.rows()
    }

    pub fn components(&self) -> usize {
        self.loading_vectors.cols()
    }

    /// The model restricted to its first `k` components.
    pub fn truncate(&self, k: usize) -> Result<PcaModel> {
        if k == 0 || k > self.components() {
            return Err(Error::InvalidArgument(format!(
                "cannot keep {k} of {} components",
                self.components()
            )));
        }
        Ok(PcaModel {
            mean: self.mean.clone(),
            loading_vectors: self.loading_vectors.leading_columns(k),
            variances: self.variances.as_ref().map(|v| v[..k].to_vec()),
            singular_values: self.singular_values.clone(),
            provenance: self.provenance,
            degenerate: self.degenerate,
        })
    }

    /// Writes `loading_vectors.pcae`, `mean.pcae`, optional `variances.pcae`
    /// and `singular_values.pcae`, and a `model.txt` descriptor.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_matrix(dir.join("loading_vectors.pcae"), &self.loading_vectors)?;
        write_matrix(dir.join("mean.pcae"), &Matrix::column_vector(&self.mean))?;
        for (name, values) in [("variances.pcae", &self.variances), ("singular_values.pcae", &self.singular_values)] {
            let path = dir.join(name);
            match values {
                Some(v) => write_matrix(&path, &Matrix::column_vector(v))?,
                None if path.exists() => std::fs::remove_file(&path)?,
                None => {}
            }
        }
        let pairs = vec![
            ("provenance".to_string(), self.provenance.to_string()),
            ("n".to_string(), self.dim().to_string()),
            ("m".to_string(), self.components().to_string()),
            ("degenerate".to_string(), self.degenerate.to_string()),
            ("variances".to_string(), if self.variances.is_some() { "set" } else { "unset" }.to_string()),
        ];
        write_key_values(dir.join("model.txt"), &pairs)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let malformed = |detail: String| -> Error { FormatError::Malformed { kind: Kind::Model, detail }.into() };
        let text = std::fs::read_to_string(dir.join("model.txt"))?;
        let pairs = parse_key_values(&text);
        let get = |key: &str| {
            pairs
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| malformed(format!("model.txt lacks {key}")))
        };
        let provenance: Provenance = get("provenance")?.parse().map_err(malformed)?;
        let degenerate: bool = get("degenerate")?.parse().map_err(|_| malformed("bad degenerate flag".into()))?;
        let vector = |name: &str| -> Result<Option<Vec<f64>>> {
            let path = dir.join(name);
            if !path.exists() {
                return Ok(None);
            }
            let m = read_matrix(path)?;
            if m.cols() != 1 {
                return Err(malformed(format!("{name} must be a column vector")));
            }
            Ok(Some(m.into_vec()))
        };
        let loading_vectors = read_matrix(dir.join("loading_vectors.pcae"))?;
        let mean = vector("mean.pcae")?.ok_or_else(|| malformed("mean.pcae is missing".into()))?;
        let variances = vector("variances.pcae")?;
        let singular_values = vector("singular_values.pcae")?;
        let mut model = PcaModel::new(mean, loading_vectors, variances, provenance, degenerate)
            .map_err(|e| malformed(e.to_string()))?;
        model.singular_values = singular_values;
        Ok(model)
    }
}

fn is_descending(v: &[f64]) -> bool {
    let scale = v.first().copied().unwrap_or(0.0).abs();
    v.windows(2).all(|w| w[1] <= w[0] + 1e-9 * scale)
}

/// Flips each column so its largest-magnitude entry is positive; ties go to
/// the lowest index.
pub fn canonicalize_signs(vectors: &mut Matrix) {
    for j in 0..vectors.cols() {
        let mut best = 0;
        for i in 1..vectors.rows() {
            if vectors[(i, j)].abs() > vectors[(best, j)].abs() {
                best = i;
            }
        }
        if vectors[(best, j)] < 0.0 {
            for i in 0..vectors.rows() {
                vectors[(i, j)] = -vectors[(i, j)];
            }
        }
    }
}

fn centered(data: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let mean = column_mean(data)?;
    let y0 = data.sub_column_vector(&mean)?;
    Ok((mean, y0))
}

/// Eigenvalues of `Y0 Y0ᵀ` in descending order.
pub fn sample_eigenvalues(data: &Matrix) -> Result<Vec<f64>> {
    let (_, y0) = centered(data)?;
    Ok(sym_eigen(&y0.matmul_tr(&y0)?)?.values)
}

/// PCA from the eigendecomposition of the scatter matrix `Y0 Y0ᵀ`.
pub fn oracle_pca(data: &Matrix, m: usize) -> Result<PcaModel> {
    let (n, count) = data.shape();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("cannot keep {m} components of a {n}-dimensional dataset")));
    }
    if count < 2 {
        return Err(Error::InvalidArgument(format!("oracle PCA needs at least 2 observations, got {count}")));
    }
    let (mean, y0) = centered(data)?;
    let eig = sym_eigen(&y0.matmul_tr(&y0)?)?;
    let mut vectors = eig.vectors.leading_columns(m);
    canonicalize_signs(&mut vectors);
    let values: Vec<f64> = eig.values[..m].iter().map(|v| v.max(0.0)).collect();
    let top = eig.values[0].max(0.0);
    let edge = (m + 1).min(n);
    let degenerate = top == 0.0
        || eig.values[..edge].windows(2).any(|w| w[0] - w[1] < DEGENERACY_TOL * top);
    PcaModel::new(mean, vectors, Some(values), Provenance::Oracle, degenerate)
}

/// Left singular vectors of `W2` or `W1ᵀ`. The mean is left at zero and the
/// variances unset until [`estimate_variances`] is applied.
pub fn recover_loading_vectors(params: &AutoencoderParams, source: WeightSource, m: usize) -> Result<PcaModel> {
    let hidden = params.hidden_dim();
    if m == 0 || m > hidden {
        return Err(Error::InvalidArgument(format!("cannot recover {m} vectors from {hidden} hidden units")));
    }
    let (factor, provenance) = match source {
        WeightSource::W2 => (params.w2.clone(), Provenance::RecoveredFromW2),
        WeightSource::W1 => (params.w1.transpose(), Provenance::RecoveredFromW1),
    };
    let svd = thin_svd(&factor)?;
    if svd.rank < m {
        return Err(Error::RankDeficient { rank: svd.rank, required: m });
    }
    let mut vectors = svd.u.leading_columns(m);
    canonicalize_signs(&mut vectors);
    let mut model = PcaModel::new(vec![0.0; params.input_dim()], vectors, None, provenance, svd.degenerate)?;
    model.singular_values = Some(svd.sigma);
    Ok(model)
}

/// Sets the mean to the data mean and the variances to the sums of squares of
/// the centered scores, re-sorting components by descending variance.
pub fn estimate_variances(model: &PcaModel, data: &Matrix) -> Result<PcaModel> {
    if data.rows() != model.dim() {
        return Err(Error::DimensionMismatch {
            op: "estimate_variances",
            left: model.loading_vectors.shape(),
            right: data.shape(),
        });
    }
    let (mean, y0) = centered(data)?;
    let scores = model.loading_vectors.tr_matmul(&y0)?;
    let sums: Vec<f64> = (0..scores.rows()).map(|i| scores.row(i).iter().map(|v| v * v).sum()).collect();
    let mut order: Vec<usize> = (0..sums.len()).collect();
    order.sort_by(|&a, &b| sums[b].total_cmp(&sums[a]));
    let mut vectors = model.loading_vectors.select_columns(&order);
    canonicalize_signs(&mut vectors);
    let variances = order.iter().map(|&i| sums[i]).collect();
    let mut out = PcaModel::new(mean, vectors, Some(variances), model.provenance, model.degenerate)?;
    out.singular_values = model.singular_values.clone();
    Ok(out)
}

/// Centered scores `Pᵀ (Y − mean)`.
pub fn transform(model: &PcaModel, data: &Matrix) -> Result<Matrix> {
    if data.rows() != model.dim() {
        return Err(Error::DimensionMismatch { op: "transform", left: model.loading_vectors.shape(), right: data.shape() });
    }
    model.loading_vectors.tr_matmul(&data.sub_column_vector(&model.mean)?)
}

/// Scores scaled so each row has unit second moment: row `i` is divided by
/// `sqrt(variance_i / N + epsilon)`, where `N` is the number of columns of
/// `data`. Rows with a zero denominator come out as zeros.
pub fn whiten(model: &PcaModel, data: &Matrix, epsilon: f64) -> Result<Matrix> {
    let variances = model.variances.as_ref().ok_or(Error::VariancesUnset)?;
    let mut scores = transform(model, data)?;
    let count = data.cols() as f64;
    for (i, &v) in variances.iter().enumerate() {
        let denom = (v / count + epsilon).sqrt();
        let row = scores.row_mut(i);
        if denom > 0.0 {
            row.iter_mut().for_each(|x| *x /= denom);
        } else {
            row.fill(0.0);
        }
    }
    Ok(scores)
}

/// Principal angles in degrees, ascending, between the column spaces of two
/// orthonormal `n x k` bases. Small angles come from the sines of
/// `b − a aᵀ b` to avoid the loss of precision in `acos` near 1.
pub fn principal_angles(a: &Matrix, b: &Matrix) -> Result<Vec<f64>> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch { op: "principal_angles", left: a.shape(), right: b.shape() });
    }
    if a.is_empty() {
        return Err(Error::Empty("principal_angles"));
    }
    for m in [a, b] {
        let dev = orthonormality_error(m);
        if dev > ANGLE_INPUT_TOL {
            return Err(Error::NotOrthonormal(dev));
        }
    }
    let cross = a.tr_matmul(b)?;
    let cosines = thin_svd(&cross)?.sigma;
    let residual = b.sub(&a.matmul(&cross)?)?;
    let mut sines = thin_svd(&residual)?.sigma;
    sines.reverse();
    Ok(cosines
        .iter()
        .zip(&sines)
        .map(|(&c, &s)| {
            let c = c.clamp(0.0, 1.0);
            let rad = if c > std::f64::consts::FRAC_1_SQRT_2 { s.clamp(0.0, 1.0).asin() } else { c.acos() };
            rad.to_degrees()
        })
        .collect())
}

/// Largest principal angle in degrees.
pub fn max_principal_angle(a: &Matrix, b: &Matrix) -> Result<f64> {
    Ok(principal_angles(a, b)?.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport {
    /// `1/N` covariance of the centered scores.
    pub covariance: Matrix,
    /// Off-diagonal Frobenius mass over total Frobenius mass.
    pub offdiag_ratio: f64,
    /// Diagonal is non-increasing up to a `1e-9` relative slack.
    pub descending_ok: bool,
}

pub fn covariance_report(scores: &Matrix) -> Result<CovarianceReport> {
    let count = scores.cols();
    if count < 2 {
        return Err(Error::InvalidArgument(format!("covariance needs at least 2 observations, got {count}")));
    }
    let (_, s0) = centered(scores)?;
    let covariance = s0.matmul_tr(&s0)?.scale(1.0 / count as f64);
    let total = frobenius_norm_sq(&covariance);
    let diag: Vec<f64> = (0..covariance.rows()).map(|i| covariance[(i, i)]).collect();
    let on: f64 = diag.iter().map(|d| d * d).sum();
    let offdiag_ratio = if total > 0.0 { ((total - on).max(0.0) / total).sqrt() } else { 0.0 };
    Ok(CovarianceReport { covariance, offdiag_ratio, descending_ok: is_descending(&diag) })
}

/// A rank-`m` projector to compare against the optimal one.
#[derive(Debug, Clone, Copy)]
pub enum Projector<'a> {
    /// `W2 W2†`.
    Params(&'a AutoencoderParams),
    /// `P Pᵀ`.
    Model(&'a PcaModel),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EckartYoung {
    /// `‖Y0 − Π Y0‖²_F / N`.
    pub recon_error: f64,
    /// Sum of the trailing scatter eigenvalues past the projector rank, over `N`.
    pub bound: f64,
    /// `(recon_error − bound) / bound`, or `recon_error` itself when the bound is zero.
    pub gap: f64,
    pub relative: bool,
}

pub fn eckart_young_gap(data: &Matrix, projector: Projector<'_>) -> Result<EckartYoung> {
    eckart_young_gap_with(data, projector, &sample_eigenvalues(data)?)
}

/// As [`eckart_young_gap`], reusing precomputed [`sample_eigenvalues`].
pub fn eckart_young_gap_with(data: &Matrix, projector: Projector<'_>, eigenvalues: &[f64]) -> Result<EckartYoung> {
    let (_, y0) = centered(data)?;
    let count = data.cols() as f64;
    let (projected, rank) = match projector {
        Projector::Params(p) => {
            if p.input_dim() != data.rows() {
                return Err(Error::DimensionMismatch { op: "eckart_young_gap", left: p.w2.shape(), right: data.shape() });
            }
            (p.w2.matmul(&pseudoinverse(&p.w2)?.matmul(&y0)?)?, p.hidden_dim())
        }
        Projector::Model(m) => {
            if m.dim() != data.rows() {
                return Err(Error::DimensionMismatch {
                    op: "eckart_young_gap",
                    left: m.loading_vectors.shape(),
                    right: data.shape(),
                });
            }
            let p = &m.loading_vectors;
            (p.matmul(&p.tr_matmul(&y0)?)?, m.components())
        }
    };
    let recon_error = frobenius_norm_sq(&y0.sub(&projected)?) / count;
    let tail: f64 = eigenvalues.iter().skip(rank).map(|v| v.max(0.0)).sum();
    let total: f64 = eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let bound = tail / count;
    let relative = tail > 1e-12 * total;
    let gap = if relative { (recon_error - bound) / bound } else { recon_error };
    Ok(EckartYoung { recon_error, bound: if relative { bound } else { 0.0 }, gap, relative })
}

/// Principal angles between the first `smaller.components()` columns of
/// `larger` and the basis of `smaller`.
pub fn nestedness_check(larger: &PcaModel, smaller: &PcaModel) -> Result<Vec<f64>> {
    let (m1, m2) = (larger.components(), smaller.components());
    if m2 >= m1 {
        return Err(Error::InvalidArgument(format!(
            "nestedness needs the second model to be smaller ({m2} >= {m1})"
        )));
    }
    principal_angles(&larger.loading_vectors.leading_columns(m2), &smaller.loading_vectors)
}

/// Scores through the raw decoder weights, `W2ᵀ (Y − mean)`, without any SVD.
pub fn raw_w2_scores(params: &AutoencoderParams, data: &Matrix) -> Result<Matrix> {
    let (_, y0) = centered(data)?;
    params.w2.tr_matmul(&y0)
}

/// Everything `report` writes: decorrelation, Eckart–Young and optional
/// comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub covariance: Matrix,
    pub offdiag_ratio: f64,
    pub descending_ok: bool,
    pub principal_angles_deg: Vec<f64>,
    pub recon_error: f64,
    pub eckart_young_bound: f64,
    pub eckart_young_gap: f64,
    pub pseudoinverse_residual: Option<f64>,
}

impl DiagnosticsReport {
    pub fn key_values(&self) -> Vec<(String, String)> {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        let mut out = vec![
            ("offdiag_ratio".to_string(), format!("{:?}", self.offdiag_ratio)),
            ("descending_ok".to_string(), self.descending_ok.to_string()),
            ("principal_angles_deg".to_string(), join(&self.principal_angles_deg)),
            ("recon_error".to_string(), format!("{:?}", self.recon_error)),
            ("eckart_young_bound".to_string(), format!("{:?}", self.eckart_young_bound)),
            ("eckart_young_gap".to_string(), format!("{:?}", self.eckart_young_gap)),
        ];
        if let Some(r) = self.pseudoinverse_residual {
            out.push(("pseudoinverse_residual".to_string(), format!("{r:?}")));
        }
        out
    }

    /// Writes `report.txt` (key=value) and `covariance.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_key_values(dir.join("report.txt"), &self.key_values())?;
        std::fs::write(dir.join("covariance.csv"), format_csv(&self.covariance, Orientation::ColumnsAreObservations))?;
        Ok(())
    }
}
