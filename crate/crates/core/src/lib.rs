//! Fusion, post-processing and evaluation of 3D lesion segmentations.
//!
//! The crate covers the steps after model inference: averaging per-model
//! probability maps ([`ensemble`]), connected-component post-processing of
//! the fused map ([`postprocess`]), the evaluation metrics ([`metrics`]) and
//! lesion-size-balanced cross-validation folds ([`splits`]). Volumes are read
//! and written as NIfTI-1 ([`nifti`]).

pub mod components;
pub mod ensemble;
pub mod error;
pub mod metrics;
pub mod nifti;
pub mod postprocess;
pub mod splits;
pub mod volume;

pub use components::{
    annotate_peaks, label_components, remove_components, ComponentSet, Connectivity,
};
pub use ensemble::{average_maps, EnsembleInput};
pub use error::{Error, GridMismatch, Result};
pub use metrics::{aggregate, evaluate_case, AggregateReport, EvalOptions, MetricReport};
pub use postprocess::{postprocess, Branch, PostprocessParams, PostprocessReport};
pub use splits::{fold_summary, size_balanced_split, FoldAssignment, SubjectRecord};
pub use volume::{
    check_compatible, foreground_count, threshold, BinaryMask, Grid, ProbabilityMap, Volume,
};
