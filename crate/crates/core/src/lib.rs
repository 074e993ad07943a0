//! Residual whole-tumor label fusion and lesion-wise evaluation of 3D
//! brain-tumor segmentations.
//!
//! The pipeline: read label volumes ([`nifti`]), interpret them under a label
//! schema ([`labels`]), fuse a whole-tumor mask with a three-label
//! prediction ([`fusion`]), score predictions lesion by lesion ([`metrics`])
//! and tabulate cohorts ([`report`]). [`phantom`] builds synthetic ground
//! truth for testing and [`config`] reads the flat key-value config format.

pub mod config;
pub mod error;
pub mod fusion;
pub mod labels;
pub mod metrics;
pub mod morphology;
pub mod nifti;
pub mod phantom;
pub mod report;
pub mod volume;

pub use config::Config;
pub use error::{Error, Result};
pub use fusion::{decompose, fuse_3lwt, FusionMode, FusionWarnings, SubregionTriplet};
pub use labels::{LabelMap, LabelSchema, Region, SchemaKind, Subregion};
pub use metrics::{dice, hd95, lesionwise_eval, MetricParams, PercentileMethod, RegionScores};
pub use morphology::{connected_components, Connectivity};
pub use nifti::{read_nifti, write_nifti};
pub use phantom::{degrade, generate_phantom, DegradationOp, PhantomSpec};
pub use report::{aggregate, emit, eval_case, CaseReport, CohortReport, ReportFormat};
pub use volume::{AnyVolume, BinaryMask, Dims, Geometry, Volume};
