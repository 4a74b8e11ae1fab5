use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point projects behind the camera (depth {depth:.6} m)")]
    BehindCamera { depth: f64 },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("no candidates on the `{0}` axis")]
    EmptyAxis(&'static str),

    #[error("joint `{joint}` angle {value:.4} outside [{min:.4}, {max:.4}]")]
    JointLimit {
        joint: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("crop rectangle {x},{y} {w}x{h} outside {width}x{height} image")]
    RectOutOfBounds {
        x: u32,
        y: u32,
        w: u32,
        h: u32,
        width: u32,
        height: u32,
    },

    #[error("expected 21 hand keypoints, got {0}")]
    WrongKeypointCount(usize),

    #[error("manifest is empty")]
    EmptyManifest,

    #[error("need at least {needed} distinct driver identities, found {found}")]
    TooFewIdentities { needed: usize, found: usize },

    #[error("target is unachievable by deletion: {0}")]
    UnachievableTarget(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("forward cache does not match the parameters it is used with")]
    StaleCache,

    #[error("metric undefined: labels contain only one class")]
    OneClassOnly,

    #[error("no categorized errors in the triage store")]
    NoCategorizedErrors,

    #[error("invalid plan delta: {0}")]
    InvalidDelta(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown frame `{0}`")]
    UnknownFrame(String),

    #[error("cannot bind {address}: {source}")]
    Bind {
        address: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable, machine-parsable error class name.
    pub fn class(&self) -> &'static str {
        match self {
            Error::BehindCamera { .. } => "BehindCamera",
            Error::InvalidGeometry(_) => "InvalidGeometry",
            Error::EmptyAxis(_) => "EmptyAxis",
            Error::JointLimit { .. } => "JointLimit",
            Error::RectOutOfBounds { .. } => "RectOutOfBounds",
            Error::WrongKeypointCount(_) => "WrongKeypointCount",
            Error::EmptyManifest => "EmptyManifest",
            Error::TooFewIdentities { .. } => "TooFewIdentities",
            Error::UnachievableTarget(_) => "UnachievableTarget",
            Error::InsufficientData(_) => "InsufficientData",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::StaleCache => "StaleCache",
            Error::OneClassOnly => "OneClassOnly",
            Error::NoCategorizedErrors => "NoCategorizedErrors",
            Error::InvalidDelta(_) => "InvalidDelta",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Parse { .. } => "ParseError",
            Error::UnknownFrame(_) => "UnknownFrame",
            Error::Bind { .. } => "BindError",
            Error::Io { .. } => "Io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
