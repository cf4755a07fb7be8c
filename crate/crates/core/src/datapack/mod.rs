//! On-disk formats and dataset generation.

mod dataset;
mod png16;
mod tensor;

use std::path::PathBuf;

use thiserror::Error;

pub use dataset::{
    augment_dataset, generate_dataset, read_manifest, tree_files, DatasetConfig, Failure, GenerateOptions, Manifest,
    ObjectSpec, OutputFlags, Record, RecordStatus, MANIFEST_FILE, SCHEMA_VERSION,
};
pub use png16::{export_png16, import_png16, quantize};
pub use tensor::{read_mask, read_tensor, write_mask, write_tensor, Tensor, HEADER_LEN, MAGIC};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("unsupported magic {0:?}")]
    UnsupportedMagic([u8; 4]),
    #[error("truncated input at offset {offset}: expected {expected} bytes")]
    Truncated { offset: usize, expected: usize },
    #[error("unexpected trailing bytes at offset {offset}")]
    TrailingBytes { offset: usize },
    #[error("tensor dimensions overflow")]
    TooLarge,
    #[error("payload has {found} values, shape needs {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("expected a single-channel tensor, found {0} channels")]
    Channels(u32),
    #[error("mask value {value} at offset {offset} is neither 0 nor 1")]
    NotAMask { offset: usize, value: f32 },
    #[error("value {value} at pixel {index} outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("png: {0}")]
    Png(String),
}

#[derive(Debug, Error)]
pub enum DatapackError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid manifest: {0}")]
    Manifest(String),
}

impl DatapackError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Configuration problems, as opposed to I/O or data failures.
    pub fn is_config(&self) -> bool {
        matches!(self, Self::Config(_))
    }
}
