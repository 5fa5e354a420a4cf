use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The ray's incidence angle is too close to (or beyond) 90 degrees to hit the world plane.
    #[error("incidence angle {theta} rad is outside the forward hemisphere")]
    IncidenceOutOfRange { theta: f64 },

    #[error("point lies at or behind the pinhole camera (z = {z})")]
    BehindCamera { z: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("label value {value} at pixel {index} is not a train ID or the ignore label")]
    ValueOutOfRange { value: u8, index: usize },

    #[error("unknown preset `{0}` (expected one of: base, rand_f, rand_r, rand_t, rand_fr, rand_ft, six_dof, seven_dof)")]
    UnknownPreset(String),

    #[error("policy parse error: {0}")]
    PolicyParse(String),

    #[error("image {image} has no label partner (expected {expected})")]
    MissingLabel { image: PathBuf, expected: PathBuf },

    #[error("split `{split}` under {root} contains no images")]
    EmptySplit { root: PathBuf, split: String },

    #[error("no class has a defined IoU")]
    NoDefinedClasses,

    #[error("missing directory for f={f}: {path}")]
    MissingFocal { f: f64, path: PathBuf },

    #[error("remap table format: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
