use thiserror::Error;

/// Errors produced by the pipeline and its supporting modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounding box: w={w}, h={h} (both must be > 0)")]
    InvalidBox { w: f64, h: f64 },

    #[error("invalid depth {0} (must be finite and > 0)")]
    InvalidDepth(f64),

    #[error("insufficient valid depth samples in box ({got} < {min})")]
    InsufficientDepth { got: usize, min: usize },

    #[error("empty point set")]
    EmptyPointSet,

    #[error("object candidate {0} has no map points")]
    EmptyObject(u64),

    #[error("point class {point_class} does not match object class {object_class}")]
    ClassMismatch { point_class: i32, object_class: i32 },

    #[error("unknown object id {0}")]
    UnknownObject(u64),

    #[error("non-positive dt {0}")]
    NonPositiveDt(f64),

    #[error("innovation covariance is singular")]
    SingularInnovation,

    #[error("no matching timestamp pairs between trajectories")]
    NoMatches,

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {file} line {line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("io failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(file: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code for the CLI: config 2, parse 3, io 4, everything else 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Parse { .. } => 3,
            Error::Io { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
