//! Single-hidden-layer linear autoencoder trained with Adam.

use std::path::Path;
use std::time::Instant;

use crate::error::{Error, FormatError, Kind, Result};
use crate::io::{read_matrix, write_matrix};
use crate::matrix::{frobenius_norm_sq, gaussian_fill, Matrix, RandomSource};
use crate::spectral::pseudoinverse;

/// Encoder `x = W1 y + b1` and decoder `ŷ = W2 x + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderParams {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl AutoencoderParams {
    /// Validates shapes (`w1` is `m x n`, `w2` is `n x m`, `m < n`) and finiteness.
    pub fn new(w1: Matrix, b1: Vec<f64>, w2: Matrix, b2: Vec<f64>) -> Result<Self> {
        let (m, n) = w1.shape();
        if w2.shape() != (n, m) {
            return Err(Error::DimensionMismatch { op: "params", left: w1.shape(), right: w2.shape() });
        }
        if b1.len() != m || b2.len() != n {
            return Err(Error::InvalidArgument(format!(
                "bias lengths ({}, {}) do not match hidden={m}, input={n}",
                b1.len(),
                b2.len()
            )));
        }
        if m == 0 || m >= n {
            return Err(Error::InvalidArgument(format!("hidden width {m} must satisfy 0 < m < n = {n}")));
        }
        let params = AutoencoderParams { w1, b1, w2, b2 };
        if !params.is_finite() {
            return Err(Error::NonFinite("params"));
        }
        Ok(params)
    }

    pub fn input_dim(&self) -> usize {
        self.w2.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn is_finite(&self) -> bool {
        self.w1.is_finite()
            && self.w2.is_finite()
            && self.b1.iter().chain(&self.b2).all(|v| v.is_finite())
    }

    /// Writes `w1.pcae`, `b1.pcae`, `w2.pcae` and `b2.pcae` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_matrix(dir.join("w1.pcae"), &self.w1)?;
        write_matrix(dir.join("b1.pcae"), &Matrix::column_vector(&self.b1))?;
        write_matrix(dir.join("w2.pcae"), &self.w2)?;
        write_matrix(dir.join("b2.pcae"), &Matrix::column_vector(&self.b2))?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let vector = |name: &str| -> Result<Vec<f64>> {
            let m = read_matrix(dir.join(name))?;
            if m.cols() != 1 {
                return Err(FormatError::Malformed {
                    kind: Kind::Params,
                    detail: format!("{name} must be a column vector, found {}x{}", m.rows(), m.cols()),
                }
                .into());
            }
            Ok(m.into_vec())
        };
        let w1 = read_matrix(dir.join("w1.pcae"))?;
        let w2 = read_matrix(dir.join("w2.pcae"))?;
        let (b1, b2) = (vector("b1.pcae")?, vector("b2.pcae")?);
        AutoencoderParams::new(w1, b1, w2, b2).map_err(|e| match e {
            Error::Io(_) | Error::Format(_) => e,
            other => FormatError::Malformed { kind: Kind::Params, detail: other.to_string() }.into(),
        })
    }

    /// `‖W1 − W2†‖_F / ‖W1‖_F`.
    pub fn pseudoinverse_residual(&self) -> Result<f64> {
        let pinv = pseudoinverse(&self.w2)?;
        let denom = self.w1.frobenius_norm();
        if denom == 0.0 {
            return Err(Error::InvalidArgument("W1 is zero".into()));
        }
        Ok(self.w1.sub(&pinv)?.frobenius_norm() / denom)
    }
}

/// Gradient of the loss with respect to each parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Coefficient of `½‖W‖²_F` for each weight matrix; biases are not decayed.
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub init_scale: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 2e-4,
            weight_decay: 7.0,
            batch_size: 4,
            epochs: 200,
            seed: 0,
            init_scale: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return bad("init_scale must be positive");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("Adam epsilon must be positive");
        }
        Ok(())
    }
}

/// Adam moment estimates mirroring [`AutoencoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Gradients,
    pub second_moment: Gradients,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &AutoencoderParams, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let zeros = Gradients {
            w1: Matrix::zeros(params.w1.rows(), params.w1.cols()),
            b1: vec![0.0; params.b1.len()],
            w2: Matrix::zeros(params.w2.rows(), params.w2.cols()),
            b2: vec![0.0; params.b2.len()],
        };
        AdamState {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    pub fn for_config(params: &AutoencoderParams, config: &TrainConfig) -> Self {
        AdamState::new(params, config.beta1, config.beta2, config.epsilon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean minibatch loss for each epoch.
    pub epoch_losses: Vec<f64>,
    /// Full-dataset loss of the returned parameters.
    pub final_loss: f64,
    pub wall_time_secs: f64,
    pub steps: u64,
}

/// Gaussian weights with std `config.init_scale`, zero biases. `W1` is drawn
/// before `W2` from a generator seeded with `config.seed`.
pub fn init_params(n: usize, m: usize, config: &TrainConfig) -> Result<AutoencoderParams> {
    if m == 0 || m >= n {
        return Err(Error::InvalidArgument(format!("hidden width {m} must satisfy 0 < m < n = {n}")));
    }
    let mut rng = RandomSource::new(config.seed);
    let w1 = gaussian_fill(&mut rng, m, n, config.init_scale)?;
    let w2 = gaussian_fill(&mut rng, n, m, config.init_scale)?;
    AutoencoderParams::new(w1, vec![0.0; m], w2, vec![0.0; n])
}

/// Returns `(codes, recon)` for a batch with one observation per column.
pub fn forward(params: &AutoencoderParams, batch: &Matrix) -> Result<(Matrix, Matrix)> {
    let codes = params.w1.matmul(batch)?.add_column_vector(&params.b1)?;
    let recon = params.w2.matmul(&codes)?.add_column_vector(&params.b2)?;
    Ok((codes, recon))
}

/// Mean squared reconstruction error over the batch columns.
pub fn reconstruction_loss(params: &AutoencoderParams, batch: &Matrix) -> Result<f64> {
    if batch.cols() == 0 {
        return Err(Error::Empty("batch"));
    }
    let (_, recon) = forward(params, batch)?;
    Ok(frobenius_norm_sq(&batch.sub(&recon)?) / batch.cols() as f64)
}

/// Reconstruction loss plus `weight_decay · ½(‖W1‖² + ‖W2‖²)`.
pub fn loss(params: &AutoencoderParams, batch: &Matrix, weight_decay: f64) -> Result<f64> {
    Ok(reconstruction_loss(params, batch)? + weight_decay * regularizer(params))
}

fn regularizer(params: &AutoencoderParams) -> f64 {
    0.5 * (frobenius_norm_sq(&params.w1) + frobenius_norm_sq(&params.w2))
}

pub fn gradients(params: &AutoencoderParams, batch: &Matrix, weight_decay: f64) -> Result<Gradients> {
    Ok(gradients_with_loss(params, batch, weight_decay)?.0)
}

fn gradients_with_loss(params: &AutoencoderParams, batch: &Matrix, weight_decay: f64) -> Result<(Gradients, f64)> {
    if batch.cols() == 0 {
        return Err(Error::Empty("batch"));
    }
    let (codes, recon) = forward(params, batch)?;
    let scale = 2.0 / batch.cols() as f64;
    let err = recon.sub(batch)?;
    let loss = frobenius_norm_sq(&err) / batch.cols() as f64 + weight_decay * regularizer(params);
    let back = params.w2.tr_matmul(&err)?;

    let w2 = err.matmul_tr(&codes)?.scale(scale).add(&params.w2.scale(weight_decay))?;
    let w1 = back.matmul_tr(batch)?.scale(scale).add(&params.w1.scale(weight_decay))?;
    let b2 = err.row_sums().into_iter().map(|v| v * scale).collect();
    let b1 = back.row_sums().into_iter().map(|v| v * scale).collect();
    Ok((Gradients { w1, b1, w2, b2 }, loss))
}

fn check_shapes(params: &AutoencoderParams, other: &Gradients) -> Result<()> {
    if params.w1.shape() != other.w1.shape() {
        return Err(Error::DimensionMismatch { op: "adam_step", left: params.w1.shape(), right: other.w1.shape() });
    }
    if params.w2.shape() != other.w2.shape() {
        return Err(Error::DimensionMismatch { op: "adam_step", left: params.w2.shape(), right: other.w2.shape() });
    }
    if params.b1.len() != other.b1.len() || params.b2.len() != other.b2.len() {
        return Err(Error::InvalidArgument("adam_step: bias shapes differ".into()));
    }
    Ok(())
}

/// One Adam update with bias correction.
pub fn adam_step(
    params: &mut AutoencoderParams,
    grads: &Gradients,
    state: &mut AdamState,
    learning_rate: f64,
) -> Result<()> {
    check_shapes(params, grads)?;
    check_shapes(params, &state.first_moment)?;
    check_shapes(params, &state.second_moment)?;
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            p[i] -= learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
        }
    };
    let (m, v) = (&mut state.first_moment, &mut state.second_moment);
    update(params.w1.as_mut_slice(), grads.w1.as_slice(), m.w1.as_mut_slice(), v.w1.as_mut_slice());
    update(&mut params.b1, &grads.b1, &mut m.b1, &mut v.b1);
    update(params.w2.as_mut_slice(), grads.w2.as_slice(), m.w2.as_mut_slice(), v.w2.as_mut_slice());
    update(&mut params.b2, &grads.b2, &mut m.b2, &mut v.b2);
    Ok(())
}

/// Trains on raw (uncentered) observations. Each epoch visits the columns in
/// an order drawn from `seed + epoch`; the last minibatch may be short.
pub fn train(data: &Matrix, hidden: usize, config: &TrainConfig) -> Result<(AutoencoderParams, TrainReport)> {
    config.validate()?;
    let (n, count) = data.shape();
    if count < config.batch_size {
        return Err(Error::InvalidArgument(format!(
            "dataset has {count} observations, fewer than batch_size {}",
            config.batch_size
        )));
    }
    if !data.is_finite() {
        return Err(Error::NonFinite("training data"));
    }
    let start = Instant::now();
    let mut params = init_params(n, hidden, config)?;
    let mut state = AdamState::for_config(&params, config);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let order = RandomSource::new(config.seed.wrapping_add(epoch as u64)).permutation(count);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = data.select_columns(chunk);
            let (grads, batch_loss) = gradients_with_loss(&params, &batch, config.weight_decay)?;
            adam_step(&mut params, &grads, &mut state, config.learning_rate)?;
            total += batch_loss * chunk.len() as f64;
        }
        let mean = total / count as f64;
        if !mean.is_finite() || !params.is_finite() {
            return Err(Error::NonFinite("training"));
        }
        epoch_losses.push(mean);
    }
    let final_loss = loss(&params, data, config.weight_decay)?;
    let report = TrainReport {
        epoch_losses,
        final_loss,
        wall_time_secs: start.elapsed().as_secs_f64(),
        steps: state.step_count,
    };
    Ok((params, report))
}
