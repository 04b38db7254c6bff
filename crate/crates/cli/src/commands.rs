use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use pcae_core::analysis::{
    covariance_report, eckart_young_gap_with, estimate_variances, max_principal_angle, nestedness_check,
    oracle_pca, principal_angles, raw_w2_scores, recover_loading_vectors, sample_eigenvalues, transform,
    DiagnosticsReport, PcaModel, Projector, WeightSource,
};
use pcae_core::autoencoder::{reconstruction_loss, train as fit, AutoencoderParams};
use pcae_core::dataset::{synthesize_gaussian, Dataset, PlantedSpectrum};
use pcae_core::io::{read_dataset, write_matrix, write_pgm_grid};
use pcae_core::matrix::{Matrix, RandomSource};
use pcae_core::Error as CoreError;

use crate::error::CliError;
use crate::manifest::Manifest;
use crate::{DataArgs, OracleArgs, RecoverArgs, RenderArgs, RenderOpts, ReportArgs, SynthArgs, TrainArgs};

/// The reference PCA forms an `n x n` scatter matrix; beyond this it is refused.
pub const MAX_ORACLE_DIM: usize = 4096;

fn load_data(args: &DataArgs) -> Result<Dataset, CliError> {
    let data = read_dataset(&args.data, args.csv_layout.into())?;
    match args.limit {
        Some(0) => Err(CliError::Usage("--limit must be positive".into())),
        Some(k) => Ok(data.truncate(k)?),
        None => Ok(data),
    }
}

fn record_data(manifest: &mut Manifest, args: &DataArgs, data: &Dataset) {
    manifest
        .set("data", args.data.display())
        .set("csv_layout", format!("{:?}", args.csv_layout).to_lowercase())
        .set("limit", args.limit.map_or("none".to_string(), |l| l.to_string()))
        .set("n", data.dim())
        .set("count", data.len());
}

fn guard_oracle(n: usize) -> Result<(), CliError> {
    if n > MAX_ORACLE_DIM {
        return Err(CliError::Usage(format!(
            "refusing reference PCA for n = {n}: the scatter matrix is only formed for n <= {MAX_ORACLE_DIM}"
        )));
    }
    Ok(())
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Mean of Euclidean norm `norm` with entries `±norm/√n`, alternating in sign.
fn alternating_shift(n: usize, norm: f64) -> Vec<f64> {
    let s = norm / (n as f64).sqrt();
    (0..n).map(|i| if i % 2 == 0 { s } else { -s }).collect()
}

pub fn synth(args: SynthArgs) -> Result<(), CliError> {
    if args.stds.len() != args.n {
        return Err(CliError::Usage(format!("--stds has {} entries but --n is {}", args.stds.len(), args.n)));
    }
    if args.count == 0 {
        return Err(CliError::Usage("--count must be positive".into()));
    }
    if !args.shift_norm.is_finite() || args.shift_norm < 0.0 {
        return Err(CliError::Usage("--shift-norm must be a non-negative number".into()));
    }
    let mut rng = RandomSource::new(args.seed);
    let spectrum = PlantedSpectrum::random(args.stds.clone(), &mut rng)?
        .with_mean(alternating_shift(args.n, args.shift_norm))?;
    let data = synthesize_gaussian(&spectrum, args.count, &mut rng)?;

    let out = &args.out.out;
    prepare_out(out)?;
    write_matrix(out.join("data.pcae"), data.observations())?;
    write_matrix(out.join("basis.pcae"), spectrum.basis())?;
    write_matrix(out.join("stds.pcae"), &Matrix::column_vector(spectrum.stds()))?;
    write_matrix(out.join("mean.pcae"), &Matrix::column_vector(spectrum.mean()))?;
    let mut manifest = Manifest::new("synth");
    manifest
        .set("n", args.n)
        .set("count", args.count)
        .set_list("stds", &args.stds)
        .set("seed", args.seed)
        .set_f64("shift_norm", args.shift_norm)
        .set("outputs", "data.pcae,basis.pcae,stds.pcae,mean.pcae");
    manifest.write(out)?;
    Ok(())
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let config = args.config();
    let data = load_data(&args.data)?;
    let y = data.observations();
    let start = Instant::now();
    let (params, report) = fit(y, args.m, &config)?;
    eprintln!("trained {} steps in {:.2}s", report.steps, start.elapsed().as_secs_f64());

    let out = &args.out.out;
    prepare_out(out)?;
    params.save(out.join("params"))?;
    let mut trace = String::from("epoch,loss\n");
    for (i, l) in report.epoch_losses.iter().enumerate() {
        writeln!(trace, "{},{l:?}", i + 1).unwrap();
    }
    fs::write(out.join("loss.csv"), trace)?;

    let mut manifest = Manifest::new("train");
    record_data(&mut manifest, &args.data, &data);
    manifest
        .set("m", args.m)
        .set_f64("learning_rate", config.learning_rate)
        .set_f64("weight_decay", config.weight_decay)
        .set("batch_size", config.batch_size)
        .set("epochs", config.epochs)
        .set("seed", config.seed)
        .set_f64("init_scale", config.init_scale)
        .set_f64("beta1", config.beta1)
        .set_f64("beta2", config.beta2)
        .set_f64("epsilon", config.epsilon)
        .set("steps", report.steps)
        .set_f64("final_loss", report.final_loss)
        .set_f64("reconstruction_loss", reconstruction_loss(&params, y)?);
    if let Ok(r) = params.pseudoinverse_residual() {
        manifest.set_f64("pseudoinverse_residual", r);
    }
    if data.dim() <= MAX_ORACLE_DIM {
        let ey = eckart_young_gap_with(y, Projector::Params(&params), &sample_eigenvalues(y)?)?;
        manifest
            .set_f64("recon_error", ey.recon_error)
            .set_f64("eckart_young_bound", ey.bound)
            .set_f64("eckart_young_gap", ey.gap);
    }
    manifest.set("outputs", "params/w1.pcae,params/b1.pcae,params/w2.pcae,params/b2.pcae,loss.csv");
    manifest.write(out)?;
    Ok(())
}

fn load_params(dir: &Path) -> Result<AutoencoderParams, CliError> {
    AutoencoderParams::load(dir).map_err(|e| match e {
        e @ CoreError::Io(_) => CliError::Hinted {
            source: e,
            hint: "--params must be a directory holding w1.pcae, b1.pcae, w2.pcae and b2.pcae",
        },
        other => other.into(),
    })
}

fn recover_with_hint(params: &AutoencoderParams, source: WeightSource, m: usize) -> Result<PcaModel, CliError> {
    recover_loading_vectors(params, source, m).map_err(|e| match e {
        e @ CoreError::RankDeficient { .. } => CliError::Hinted {
            source: e,
            hint: "the weights collapsed; train for more epochs or lower --wd",
        },
        other => other.into(),
    })
}

fn tile_shape(opts: &RenderOpts, data: &Dataset) -> Result<(usize, usize), CliError> {
    opts.shape
        .or(data.image_shape())
        .ok_or_else(|| CliError::Usage("--render needs --shape HxW for non-image data".into()))
}

pub fn recover(args: RecoverArgs) -> Result<(), CliError> {
    let params = load_params(&args.params)?;
    let data = load_data(&args.data)?;
    if data.dim() != params.input_dim() {
        return Err(CliError::Usage(format!(
            "weights expect dimension {}, data has {}",
            params.input_dim(),
            data.dim()
        )));
    }
    let m = args.m.unwrap_or(params.hidden_dim());
    let source: WeightSource = args.source.into();
    let other = match source {
        WeightSource::W2 => WeightSource::W1,
        WeightSource::W1 => WeightSource::W2,
    };
    let y = data.observations();
    let model = estimate_variances(&recover_with_hint(&params, source, m)?, y)?;
    let alternate = recover_with_hint(&params, other, m)?;
    let cross = max_principal_angle(model.loading_vectors(), alternate.loading_vectors())?;

    let out = &args.out.out;
    prepare_out(out)?;
    model.save(out.join("model"))?;
    let mut manifest = Manifest::new("recover");
    record_data(&mut manifest, &args.data, &data);
    manifest
        .set("params", args.params.display())
        .set("m", m)
        .set("source", format!("{:?}", args.source).to_lowercase())
        .set("degenerate", model.is_degenerate())
        .set_list("singular_values", model.singular_values().unwrap_or(&[]))
        .set_list("variances", model.variances().unwrap_or(&[]))
        .set_f64("cross_source_angle_deg", cross);
    if args.render.render {
        let shape = tile_shape(&args.render, &data)?;
        write_pgm_grid(out.join("loading_vectors.pgm"), model.loading_vectors(), shape, args.render.grid_cols)?;
        manifest.set("render", "loading_vectors.pgm");
    }
    manifest.write(out)?;
    Ok(())
}

pub fn oracle(args: OracleArgs) -> Result<(), CliError> {
    let data = load_data(&args.data)?;
    guard_oracle(data.dim())?;
    let model = oracle_pca(data.observations(), args.m)?;
    let out = &args.out.out;
    prepare_out(out)?;
    model.save(out.join("model"))?;
    let mut manifest = Manifest::new("oracle");
    record_data(&mut manifest, &args.data, &data);
    manifest
        .set("m", args.m)
        .set("degenerate", model.is_degenerate())
        .set_list("variances", model.variances().unwrap_or(&[]));
    if args.render.render {
        let shape = tile_shape(&args.render, &data)?;
        write_pgm_grid(out.join("loading_vectors.pgm"), model.loading_vectors(), shape, args.render.grid_cols)?;
        manifest.set("render", "loading_vectors.pgm");
    }
    manifest.write(out)?;
    Ok(())
}

fn load_model(dir: &Path) -> Result<PcaModel, CliError> {
    PcaModel::load(dir.join("model")).or_else(|_| PcaModel::load(dir)).map_err(CliError::from)
}

/// Angles between a model and a reference of possibly different width.
fn reference_angles(model: &PcaModel, reference: &PcaModel) -> Result<Vec<f64>, CliError> {
    use std::cmp::Ordering;
    Ok(match model.components().cmp(&reference.components()) {
        Ordering::Equal => principal_angles(model.loading_vectors(), reference.loading_vectors())?,
        Ordering::Greater => nestedness_check(model, reference)?,
        Ordering::Less => nestedness_check(reference, model)?,
    })
}

pub fn report(args: ReportArgs) -> Result<(), CliError> {
    let data = load_data(&args.data)?;
    guard_oracle(data.dim())?;
    let y = data.observations();
    let params = args.params.as_deref().map(load_params).transpose()?;
    let eigenvalues = sample_eigenvalues(y)?;

    let mut manifest = Manifest::new("report");
    record_data(&mut manifest, &args.data, &data);
    let (scores, ey, angles) = if args.no_svd {
        let p = params.as_ref().expect("clap enforces --params with --no-svd");
        manifest.set("scores", "raw_w2");
        let ey = eckart_young_gap_with(y, Projector::Params(p), &eigenvalues)?;
        (raw_w2_scores(p, y)?, ey, Vec::new())
    } else {
        let dir = args.model.as_deref().expect("clap enforces --model without --no-svd");
        let model = load_model(dir)?;
        manifest.set("model", dir.display()).set("scores", "model");
        let ey = eckart_young_gap_with(y, Projector::Model(&model), &eigenvalues)?;
        let angles = match &args.reference {
            Some(r) => reference_angles(&model, &load_model(r)?)?,
            None => Vec::new(),
        };
        (transform(&model, y)?, ey, angles)
    };
    let cov = covariance_report(&scores)?;
    let diagnostics = DiagnosticsReport {
        covariance: cov.covariance,
        offdiag_ratio: cov.offdiag_ratio,
        descending_ok: cov.descending_ok,
        principal_angles_deg: angles,
        recon_error: ey.recon_error,
        eckart_young_bound: ey.bound,
        eckart_young_gap: ey.gap,
        pseudoinverse_residual: params.as_ref().map(|p| p.pseudoinverse_residual()).transpose()?,
    };
    let out = &args.out.out;
    prepare_out(out)?;
    diagnostics.write(out)?;
    if let Some(p) = &args.params {
        manifest.set("params", p.display());
    }
    if let Some(r) = &args.reference {
        manifest.set("reference", r.display());
    }
    for (k, v) in diagnostics.key_values() {
        manifest.set(&k, v);
    }
    manifest.set("outputs", "report.txt,covariance.csv");
    manifest.write(out)?;
    Ok(())
}

pub fn render(args: RenderArgs) -> Result<(), CliError> {
    let mut manifest = Manifest::new("render");
    let (vectors, shape) = if let Some(dir) = &args.model {
        let model = load_model(dir)?;
        let shape = args.shape.ok_or_else(|| CliError::Usage("rendering a model needs --shape HxW".into()))?;
        manifest.set("model", dir.display());
        (model.loading_vectors().clone(), shape)
    } else {
        let path = args.data.as_ref().expect("clap enforces --model or --data");
        let data = read_dataset(path, pcae_core::io::Orientation::RowsAreObservations)?;
        let shape = args
            .shape
            .or(data.image_shape())
            .ok_or_else(|| CliError::Usage("--shape HxW is required for non-image data".into()))?;
        let keep: Vec<usize> = (0..args.count.min(data.len())).collect();
        manifest.set("data", path.display()).set("count", keep.len());
        (data.observations().select_columns(&keep), shape)
    };
    let out = &args.out.out;
    prepare_out(out)?;
    write_pgm_grid(out.join("grid.pgm"), &vectors, shape, args.grid_cols)?;
    manifest
        .set("shape", format!("{}x{}", shape.0, shape.1))
        .set("grid_cols", args.grid_cols)
        .set("outputs", "grid.pgm");
    manifest.write(out)?;
    Ok(())
}
