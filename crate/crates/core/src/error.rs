use std::fmt;

use crate::nifti::NiftiError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// The first field on which two grids disagree.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMismatch {
    pub field: &'static str,
    pub left: String,
    pub right: String,
}

impl fmt::Display for GridMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} differs ({} vs {})",
            self.field, self.left, self.right
        )
    }
}

impl std::error::Error for GridMismatch {}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid volume: {0}")]
    InvalidVolume(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(#[from] GridMismatch),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Nifti(#[from] NiftiError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
