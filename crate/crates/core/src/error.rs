use std::path::PathBuf;

use thiserror::Error;

use crate::volume::Geometry;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// The `Display` form always starts with the stable kebab-case kind returned
/// by [`Error::kind`], so a printed error line is machine-parsable.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io-error: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not-a-nifti: {0}")]
    NotNifti(String),
    #[error("unsupported-datatype: NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("unsupported-format: {0}")]
    UnsupportedFormat(String),
    #[error("dimension-mismatch: grid holds {expected} voxels, data holds {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid-geometry: {0}")]
    InvalidGeometry(String),
    #[error("geometry-mismatch: {a} vs {b}")]
    GeometryMismatch { a: Box<Geometry>, b: Box<Geometry> },
    #[error("unknown-code: label code {0} is not part of the schema")]
    UnknownCode(u8),
    #[error("invalid-schema: {0}")]
    InvalidSchema(String),
    #[error("region-undefined-for-schema: region {region} has no meaning in schema {schema}")]
    RegionUndefined { region: String, schema: String },
    #[error("wrong-schema: expected a {expected} label map, got {found}")]
    WrongSchema { expected: String, found: String },
    #[error("schema-incompatible: {0}")]
    SchemaIncompatible(String),
    #[error("disjointness-violation: {0} voxels carry more than one of ET/CC/ED")]
    DisjointnessViolation(usize),
    #[error("empty-mask: {0}")]
    EmptyMask(&'static str),
    #[error("spec-out-of-bounds: {0}")]
    SpecOutOfBounds(String),
    #[error("invalid-op-parameters: {0}")]
    InvalidOp(String),
    #[error("invalid-params: {0}")]
    InvalidParams(String),
    #[error("inconsistent-region-sets: {0}")]
    InconsistentRegionSets(String),
    #[error("config-error: line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("report-parse-error: {0}")]
    ReportParse(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn geometry_mismatch(a: &Geometry, b: &Geometry) -> Self {
        Error::GeometryMismatch {
            a: Box::new(a.clone()),
            b: Box::new(b.clone()),
        }
    }

    /// Stable identifier of the error category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io-error",
            Error::NotNifti(_) => "not-a-nifti",
            Error::UnsupportedDatatype(_) => "unsupported-datatype",
            Error::UnsupportedFormat(_) => "unsupported-format",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::InvalidGeometry(_) => "invalid-geometry",
            Error::GeometryMismatch { .. } => "geometry-mismatch",
            Error::UnknownCode(_) => "unknown-code",
            Error::InvalidSchema(_) => "invalid-schema",
            Error::RegionUndefined { .. } => "region-undefined-for-schema",
            Error::WrongSchema { .. } => "wrong-schema",
            Error::SchemaIncompatible(_) => "schema-incompatible",
            Error::DisjointnessViolation(_) => "disjointness-violation",
            Error::EmptyMask(_) => "empty-mask",
            Error::SpecOutOfBounds(_) => "spec-out-of-bounds",
            Error::InvalidOp(_) => "invalid-op-parameters",
            Error::InvalidParams(_) => "invalid-params",
            Error::InconsistentRegionSets(_) => "inconsistent-region-sets",
            Error::Config { .. } => "config-error",
            Error::ReportParse(_) => "report-parse-error",
        }
    }
}
