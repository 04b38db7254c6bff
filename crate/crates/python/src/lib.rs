//! Python bindings. Matrices cross the boundary as lists of rows; anything
//! iterable as rows of floats (including 2-D numpy arrays) is accepted.

use std::path::PathBuf;

use pcae_core::analysis::{self, Projector};
use pcae_core::autoencoder;
use pcae_core::dataset;
use pcae_core::io::{self as pio, Orientation};
use pcae_core::{Error as CoreError, Matrix, RandomSource, WeightSource};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(pcae, PcaeError, PyException, "Numerical or format failure in pcae.");

fn to_py(e: CoreError) -> PyErr {
    match e {
        CoreError::Io(io) => PyOSError::new_err(io.to_string()),
        other => PcaeError::new_err(other.to_string()),
    }
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(to_py)
}

fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn orientation(columns: bool) -> Orientation {
    if columns {
        Orientation::ColumnsAreObservations
    } else {
        Orientation::RowsAreObservations
    }
}

fn weight_source(name: &str) -> PyResult<WeightSource> {
    match name {
        "w2" => Ok(WeightSource::W2),
        "w1" => Ok(WeightSource::W1),
        other => Err(PyValueError::new_err(format!("source must be 'w2' or 'w1', got {other:?}"))),
    }
}

/// Hyperparameters for minibatch Adam training.
#[pyclass(module = "pcae", name = "TrainConfig", get_all, set_all, skip_from_py_object)]
#[derive(Clone)]
struct PyTrainConfig {
    learning_rate: f64,
    weight_decay: f64,
    batch_size: usize,
    epochs: usize,
    seed: u64,
    init_scale: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl From<&PyTrainConfig> for autoencoder::TrainConfig {
    fn from(c: &PyTrainConfig) -> Self {
        autoencoder::TrainConfig {
            learning_rate: c.learning_rate,
            weight_decay: c.weight_decay,
            batch_size: c.batch_size,
            epochs: c.epochs,
            seed: c.seed,
            init_scale: c.init_scale,
            beta1: c.beta1,
            beta2: c.beta2,
            epsilon: c.epsilon,
        }
    }
}

#[pymethods]
impl PyTrainConfig {
    #[new]
    #[pyo3(signature = (*, learning_rate=None, weight_decay=None, batch_size=None, epochs=None, seed=None, init_scale=None))]
    fn new(
        learning_rate: Option<f64>,
        weight_decay: Option<f64>,
        batch_size: Option<usize>,
        epochs: Option<usize>,
        seed: Option<u64>,
        init_scale: Option<f64>,
    ) -> Self {
        let d = autoencoder::TrainConfig::default();
        PyTrainConfig {
            learning_rate: learning_rate.unwrap_or(d.learning_rate),
            weight_decay: weight_decay.unwrap_or(d.weight_decay),
            batch_size: batch_size.unwrap_or(d.batch_size),
            epochs: epochs.unwrap_or(d.epochs),
            seed: seed.unwrap_or(d.seed),
            init_scale: init_scale.unwrap_or(d.init_scale),
            beta1: d.beta1,
            beta2: d.beta2,
            epsilon: d.epsilon,
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "TrainConfig(learning_rate={}, weight_decay={}, batch_size={}, epochs={}, seed={})",
            self.learning_rate, self.weight_decay, self.batch_size, self.epochs, self.seed
        )
    }
}

/// Trained encoder/decoder weights.
#[pyclass(module = "pcae", name = "AutoencoderParams")]
struct PyParams {
    inner: autoencoder::AutoencoderParams,
}

#[pymethods]
impl PyParams {
    #[new]
    fn new(w1: Vec<Vec<f64>>, b1: Vec<f64>, w2: Vec<Vec<f64>>, b2: Vec<f64>) -> PyResult<Self> {
        let inner = autoencoder::AutoencoderParams::new(to_matrix(w1)?, b1, to_matrix(w2)?, b2).map_err(to_py)?;
        Ok(PyParams { inner })
    }

    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(PyParams { inner: autoencoder::AutoencoderParams::load(dir).map_err(to_py)? })
    }

    fn save(&self, dir: PathBuf) -> PyResult<()> {
        self.inner.save(dir).map_err(to_py)
    }

    #[getter]
    fn w1(&self) -> Vec<Vec<f64>> {
        to_rows(&self.inner.w1)
    }

    #[getter]
    fn b1(&self) -> Vec<f64> {
        self.inner.b1.clone()
    }

    #[getter]
    fn w2(&self) -> Vec<Vec<f64>> {
        to_rows(&self.inner.w2)
    }

    #[getter]
    fn b2(&self) -> Vec<f64> {
        self.inner.b2.clone()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    #[getter]
    fn hidden_dim(&self) -> usize {
        self.inner.hidden_dim()
    }

    /// Returns `(codes, reconstructions)`, one observation per column.
    fn forward(&self, data: Vec<Vec<f64>>) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let (h, r) = autoencoder::forward(&self.inner, &to_matrix(data)?).map_err(to_py)?;
        Ok((to_rows(&h), to_rows(&r)))
    }

    fn reconstruction_loss(&self, data: Vec<Vec<f64>>) -> PyResult<f64> {
        autoencoder::reconstruction_loss(&self.inner, &to_matrix(data)?).map_err(to_py)
    }

    fn pseudoinverse_residual(&self) -> PyResult<f64> {
        self.inner.pseudoinverse_residual().map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("AutoencoderParams(n={}, m={})", self.inner.input_dim(), self.inner.hidden_dim())
    }
}

/// Orthonormal loading vectors with optional variances.
#[pyclass(module = "pcae", name = "PcaModel")]
struct PyModel {
    inner: analysis::PcaModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(PyModel { inner: analysis::PcaModel::load(dir).map_err(to_py)? })
    }

    fn save(&self, dir: PathBuf) -> PyResult<()> {
        self.inner.save(dir).map_err(to_py)
    }

    #[getter]
    fn loading_vectors(&self) -> Vec<Vec<f64>> {
        to_rows(self.inner.loading_vectors())
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.mean().to_vec()
    }

    #[getter]
    fn variances(&self) -> Option<Vec<f64>> {
        self.inner.variances().map(<[f64]>::to_vec)
    }

    #[getter]
    fn singular_values(&self) -> Option<Vec<f64>> {
        self.inner.singular_values().map(<[f64]>::to_vec)
    }

    #[getter]
    fn provenance(&self) -> String {
        self.inner.provenance().to_string()
    }

    #[getter]
    fn degenerate(&self) -> bool {
        self.inner.is_degenerate()
    }

    #[getter]
    fn components(&self) -> usize {
        self.inner.components()
    }

    fn transform(&self, data: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(to_rows(&analysis::transform(&self.inner, &to_matrix(data)?).map_err(to_py)?))
    }

    #[pyo3(signature = (data, epsilon=1e-12))]
    fn whiten(&self, data: Vec<Vec<f64>>, epsilon: f64) -> PyResult<Vec<Vec<f64>>> {
        Ok(to_rows(&analysis::whiten(&self.inner, &to_matrix(data)?, epsilon).map_err(to_py)?))
    }

    fn with_variances(&self, data: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(PyModel { inner: analysis::estimate_variances(&self.inner, &to_matrix(data)?).map_err(to_py)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "PcaModel(n={}, m={}, provenance={})",
            self.inner.dim(),
            self.inner.components(),
            self.inner.provenance()
        )
    }
}

/// Gaussian data with a random orthonormal basis; returns `(data, basis)`,
/// data holding one observation per column.
#[pyfunction]
#[pyo3(signature = (stds, count, seed=0, mean=None))]
fn synthesize(
    stds: Vec<f64>,
    count: usize,
    seed: u64,
    mean: Option<Vec<f64>>,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let mut rng = RandomSource::new(seed);
    let mut spectrum = dataset::PlantedSpectrum::random(stds, &mut rng).map_err(to_py)?;
    if let Some(mean) = mean {
        spectrum = spectrum.with_mean(mean).map_err(to_py)?;
    }
    let data = dataset::synthesize_gaussian(&spectrum, count, &mut rng).map_err(to_py)?;
    Ok((to_rows(data.observations()), to_rows(spectrum.basis())))
}

/// Reads IDX, PCAE or CSV input as an `n x N` matrix.
#[pyfunction]
#[pyo3(signature = (path, csv_columns=false))]
fn read_dataset(path: PathBuf, csv_columns: bool) -> PyResult<Vec<Vec<f64>>> {
    Ok(to_rows(pio::read_dataset(path, orientation(csv_columns)).map_err(to_py)?.observations()))
}

#[pyfunction]
fn write_matrix(path: PathBuf, matrix: Vec<Vec<f64>>) -> PyResult<()> {
    pio::write_matrix(path, &to_matrix(matrix)?).map_err(to_py)
}

#[pyfunction]
fn read_matrix(path: PathBuf) -> PyResult<Vec<Vec<f64>>> {
    Ok(to_rows(&pio::read_matrix(path).map_err(to_py)?))
}

/// Trains on `data` (one observation per column); returns `(params, report)`.
#[pyfunction]
#[pyo3(signature = (data, hidden, config=None))]
fn train<'py>(
    py: Python<'py>,
    data: Vec<Vec<f64>>,
    hidden: usize,
    config: Option<PyRef<'py, PyTrainConfig>>,
) -> PyResult<(PyParams, Bound<'py, PyDict>)> {
    let config = config.map(|c| autoencoder::TrainConfig::from(&*c)).unwrap_or_default();
    let y = to_matrix(data)?;
    let (params, report) = py.detach(|| autoencoder::train(&y, hidden, &config)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("epoch_losses", report.epoch_losses)?;
    out.set_item("final_loss", report.final_loss)?;
    out.set_item("steps", report.steps)?;
    out.set_item("wall_time_secs", report.wall_time_secs)?;
    Ok((PyParams { inner: params }, out))
}

#[pyfunction]
fn oracle_pca(data: Vec<Vec<f64>>, m: usize) -> PyResult<PyModel> {
    Ok(PyModel { inner: analysis::oracle_pca(&to_matrix(data)?, m).map_err(to_py)? })
}

/// Loading vectors from the left singular vectors of `W2` (or `W1ᵀ`).
#[pyfunction]
#[pyo3(signature = (params, m=None, source="w2", data=None))]
fn recover_loading_vectors(
    params: PyRef<'_, PyParams>,
    m: Option<usize>,
    source: &str,
    data: Option<Vec<Vec<f64>>>,
) -> PyResult<PyModel> {
    let m = m.unwrap_or(params.inner.hidden_dim());
    let mut model = analysis::recover_loading_vectors(&params.inner, weight_source(source)?, m).map_err(to_py)?;
    if let Some(data) = data {
        model = analysis::estimate_variances(&model, &to_matrix(data)?).map_err(to_py)?;
    }
    Ok(PyModel { inner: model })
}

/// Principal angles in degrees, ascending.
#[pyfunction]
fn principal_angles(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    analysis::principal_angles(&to_matrix(a)?, &to_matrix(b)?).map_err(to_py)
}

/// Returns `(covariance, offdiag_ratio, descending_ok)` for a score matrix.
#[pyfunction]
fn covariance_report(scores: Vec<Vec<f64>>) -> PyResult<(Vec<Vec<f64>>, f64, bool)> {
    let r = analysis::covariance_report(&to_matrix(scores)?).map_err(to_py)?;
    Ok((to_rows(&r.covariance), r.offdiag_ratio, r.descending_ok))
}

/// Returns `(recon_error, bound, gap)` for either a model or trained params.
#[pyfunction]
fn eckart_young_gap(data: Vec<Vec<f64>>, projector: &Bound<'_, PyAny>) -> PyResult<(f64, f64, f64)> {
    let y = to_matrix(data)?;
    let ey = if let Ok(model) = projector.cast::<PyModel>() {
        analysis::eckart_young_gap(&y, Projector::Model(&model.borrow().inner))
    } else if let Ok(params) = projector.cast::<PyParams>() {
        analysis::eckart_young_gap(&y, Projector::Params(&params.borrow().inner))
    } else {
        return Err(PyValueError::new_err("projector must be a PcaModel or AutoencoderParams"));
    }
    .map_err(to_py)?;
    Ok((ey.recon_error, ey.bound, ey.gap))
}

#[pymodule]
fn pcae(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PcaeError", m.py().get_type::<PcaeError>())?;
    m.add_class::<PyTrainConfig>()?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(read_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(write_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(read_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_pca, m)?)?;
    m.add_function(wrap_pyfunction!(recover_loading_vectors, m)?)?;
    m.add_function(wrap_pyfunction!(principal_angles, m)?)?;
    m.add_function(wrap_pyfunction!(covariance_report, m)?)?;
    m.add_function(wrap_pyfunction!(eckart_young_gap, m)?)?;
    Ok(())
}
