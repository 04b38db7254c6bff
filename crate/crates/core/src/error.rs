use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: dimension mismatch ({}x{} vs {}x{})", left.0, left.1, right.0, right.1)]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{0}: empty input")]
    Empty(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("columns are not orthonormal (deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("matrix has rank {rank}, at least {required} required")]
    RankDeficient { rank: usize, required: usize },
    #[error("model variances have not been estimated")]
    VariancesUnset,
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Problems decoding one of the on-disk formats.
#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("not an image IDX file (magic 0x{0:08x})")]
    IdxMagic(u32),
    #[error("IDX file truncated: expected {expected} bytes, found {found}")]
    IdxTruncated { expected: usize, found: usize },
    #[error("IDX dimensions overflow ({0} x {1} x {2})")]
    IdxOverflow(u32, u32, u32),
    #[error("bad PCAE magic {0:?}")]
    PcaeMagic([u8; 4]),
    #[error("unsupported PCAE version {0}")]
    PcaeVersion(u32),
    #[error("PCAE file truncated: expected {expected} bytes, found {found}")]
    PcaeTruncated { expected: u64, found: u64 },
    #[error("PCAE file has {0} unexpected trailing bytes")]
    PcaeTrailing(u64),
    #[error("PCAE dimensions overflow ({0} x {1})")]
    PcaeOverflow(u64, u64),
    #[error("CSV is empty")]
    CsvEmpty,
    #[error("CSV row {row}: expected {expected} columns, found {found}")]
    CsvRagged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("CSV row {row}, column {col}: cannot parse {text:?} as a number")]
    CsvNumber { row: usize, col: usize, text: String },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("malformed {kind} file: {detail}")]
    Malformed { kind: Kind, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Model,
    Params,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Model => f.write_str("model"),
            Kind::Params => f.write_str("parameter"),
        }
    }
}
