//! PCA through linear autoencoders.
//!
//! A linear autoencoder trained with weight decay is factored with an SVD to
//! recover principal loading vectors; the results are checked against a
//! direct eigendecomposition of the sample scatter matrix.

pub mod analysis;
pub mod autoencoder;
pub mod dataset;
pub mod error;
pub mod io;
pub mod matrix;
pub mod spectral;

pub use analysis::{
    covariance_report, eckart_young_gap, estimate_variances, nestedness_check, oracle_pca, principal_angles,
    recover_loading_vectors, transform, whiten, CovarianceReport, DiagnosticsReport, EckartYoung, PcaModel,
    Projector, Provenance, WeightSource,
};
pub use autoencoder::{train, AutoencoderParams, TrainConfig, TrainReport};
pub use dataset::{random_orthogonal, synthesize_gaussian, Dataset, PlantedSpectrum};
pub use error::{Error, FormatError, Result};
pub use matrix::{Matrix, RandomSource};
pub use spectral::{pseudoinverse, sym_eigen, thin_svd, SymEigen, ThinSvd};
