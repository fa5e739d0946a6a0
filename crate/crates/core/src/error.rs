use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid arm model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("closed-form dynamics are only available for 2 links, model has {0}")]
    UnsupportedLinkCount(usize),

    #[error("integration diverged at time step {step} (t = {time:.4} s)")]
    Divergence { step: usize, time: f64 },

    #[error("point ({x:.4}, {y:.4}) is not reachable, distance deficit {deficit:.3e} m")]
    Unreachable { x: f64, y: f64, deficit: f64 },

    #[error("could not sample a valid target after {0} attempts")]
    SamplingExhausted(usize),

    #[error("task initial posture does not match the basis initial posture (max deviation {0:.3e} rad)")]
    InitialStateMismatch(f64),

    #[error("only rest-to-rest tasks are supported")]
    NotRestToRest,

    #[error("proto-task rejected: interpolation error {err_i:.3e} exceeds {threshold:.1e}")]
    RejectedProtoTask { err_i: f64, threshold: f64 },

    #[error("no grid target is farther than {d_min} m from the existing proto-tasks")]
    Saturated { d_min: f64 },

    #[error("model fingerprint mismatch: archive {archive}, config {config}")]
    FingerprintMismatch { archive: String, config: String },

    #[error("archive integrity check failed: {0}")]
    Archive(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Short machine-readable tag, used for the CLI error document.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::InvalidModel(_) => "invalid_model",
            Error::InvalidConfig(_) => "invalid_config",
            Error::UnsupportedLinkCount(_) => "unsupported_link_count",
            Error::Divergence { .. } => "divergence",
            Error::Unreachable { .. } => "unreachable",
            Error::SamplingExhausted(_) => "sampling_exhausted",
            Error::InitialStateMismatch(_) => "initial_state_mismatch",
            Error::NotRestToRest => "not_rest_to_rest",
            Error::RejectedProtoTask { .. } => "rejected_proto_task",
            Error::Saturated { .. } => "saturated",
            Error::FingerprintMismatch { .. } => "fingerprint_mismatch",
            Error::Archive(_) => "archive",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
        }
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            found,
        })
    }
}
