use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by any stage of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("manifest {path}: line {line}: {message}")]
    ManifestParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(
        "manifest {path}: duplicate (camera {camera}, timestamp {timestamp}) \
         on lines {first_line} and {second_line}"
    )]
    DuplicateTimestamp {
        path: PathBuf,
        camera: String,
        timestamp: String,
        first_line: usize,
        second_line: usize,
    },

    #[error("cannot read image {path}: {source}")]
    ImageRead {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("image {path}: dimensions {found_w}x{found_h} do not match expected {expected_w}x{expected_h}")]
    ImageDimensionMismatch {
        path: PathBuf,
        expected_w: usize,
        expected_h: usize,
        found_w: usize,
        found_h: usize,
    },

    #[error("{0}")]
    ShapeMismatch(String),

    #[error("empty image list")]
    EmptyImageList,

    #[error("window size must be at least 1")]
    ZeroWindow,

    #[error("frame {path} does not belong to the manifest")]
    FrameNotInManifest { path: PathBuf },

    #[error("frame {path} has no timestamp-independent modality and the clock policy needs one")]
    MissingTimestamp { path: PathBuf },

    #[error("colour fit needs at least {needed} sampled pixels, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("annotation file {path}: line {line}: {message}")]
    AnnotationParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("ambiguous label mapping: frames {first} and {second} share the stem {stem:?}")]
    AmbiguousLabelStem {
        first: PathBuf,
        second: PathBuf,
        stem: String,
    },

    #[error("clustering needs at least {k} distinct values, got {distinct}")]
    TooFewDistinctValues { k: usize, distinct: usize },

    #[error("camera {camera} has no labelled images")]
    NoLabelledImages { camera: String },

    #[error("partition constraint violated: {0}")]
    InfeasiblePartition(String),

    #[error("no candidate partition passes the evaluation-subset image cap of {fraction}")]
    NoFeasiblePartition { fraction: f64 },

    #[error("{name} is out of range: {value}")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("not a TLF5 file: {0}")]
    Tlf5Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("I/O error: {0}")]
    Stream(#[from] std::io::Error),

    /// CSV table could not be written.
    #[error("CSV write failed: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
