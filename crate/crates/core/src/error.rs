use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "photon cutoff n_max = {0} is too small: the two-photon component |11>|2> of the \
         C = 0 dark state needs n_max >= 2"
    )]
    PhotonCutoff(usize),

    #[error("invalid basis label {0:?} (expected e.g. \"a1;0\")")]
    Label(String),

    #[error("level |{0}> is not part of this basis (build it with include_u)")]
    MissingLevel(char),

    #[error("unknown protocol {0:?} (expected swap8, swap7 or cnot11)")]
    UnknownProtocol(String),

    #[error("parameter {name} must be {requirement}, got {value}")]
    Parameter {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },

    #[error("time {t} lies outside the schedule window [{start}, {end}]")]
    OutsideWindow { t: f64, start: f64, end: f64 },

    #[error("time step dt = {dt} exceeds the stability bound {bound}")]
    StepSize { dt: f64, bound: f64 },

    #[error("non-finite amplitude at t = {t} (integration became unstable)")]
    NonFinite { t: f64 },

    #[error("state vector dimension {got} does not match basis dimension {expected}")]
    Dimension { expected: usize, got: usize },

    #[error("initial state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("dark-state direction undefined: all coefficients vanish")]
    DegenerateDarkState,

    #[error("no basis state carries charge {0}")]
    NoSuchBlock(i32),

    #[error("dark-state tracking lost continuity at t = {t} (overlap {overlap})")]
    Tracking { t: f64, overlap: f64 },

    #[error("step index {0} out of range")]
    NoSuchStep(usize),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::Tracking { .. } | Error::DegenerateDarkState
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
