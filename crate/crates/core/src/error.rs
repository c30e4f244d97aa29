use thiserror::Error;

/// Errors surfaced by the simulator, the statistics chain and the CLI.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("integration failure: non-finite derivative at t = {t:e} s")]
    Integration { t: f64 },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("degenerate population: 1 - |c_e|^2 - Q_tot = {remaining:e} <= 0")]
    DegeneratePopulation { remaining: f64 },

    #[error("degenerate denominator: <Y> = {mean_y:e} <= 0")]
    DegenerateDenominator { mean_y: f64 },

    #[error("loss overflow: Q = {q:e} >= 1 (pulse too long or detuning too small)")]
    LossOverflow { q: f64 },

    #[error("model violation: Q = {q:e} exceeds gamma_l * t_tot = {gamma_t:e}")]
    ModelViolation { q: f64, gamma_t: f64 },

    #[error("linearization singularity: alpha*<a> = {arg:e}")]
    LinearizationSingularity { arg: f64 },

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("no data: every sweep row failed")]
    NoData,

    #[error("config error at line {line}, key `{key}`: {message}")]
    Config {
        key: String,
        line: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short stable name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Integration { .. } => "integration",
            Error::Validation(_) => "validation",
            Error::DegenerateGeometry(_) => "degenerate-geometry",
            Error::DegeneratePopulation { .. } => "degenerate-population",
            Error::DegenerateDenominator { .. } => "degenerate-denominator",
            Error::LossOverflow { .. } => "loss-overflow",
            Error::ModelViolation { .. } => "model-violation",
            Error::LinearizationSingularity { .. } => "linearization-singularity",
            Error::Sample { source, .. } => source.kind(),
            Error::NoData => "no-data",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn in_sample(self, index: usize) -> Self {
        Error::Sample {
            index,
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
