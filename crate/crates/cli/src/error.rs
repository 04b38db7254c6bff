use pcae_core::Error as CoreError;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{source}\nhint: {hint}")]
    Hinted { source: CoreError, hint: &'static str },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) | CliError::Hinted { source: e, .. } => core_exit_code(e),
        }
    }
}

fn core_exit_code(e: &CoreError) -> u8 {
    match e {
        CoreError::Io(_) | CoreError::Format(_) => EXIT_IO,
        CoreError::InvalidArgument(_) | CoreError::DimensionMismatch { .. } | CoreError::Empty(_) => EXIT_USAGE,
        CoreError::NotSymmetric(_)
        | CoreError::NotOrthonormal(_)
        | CoreError::RankDeficient { .. }
        | CoreError::VariancesUnset
        | CoreError::NonFinite(_) => EXIT_NUMERICAL,
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}
