//! Dense 3D volumes and the elementary voxel operations built on them.
//!
//! Voxel data is always held in canonical order: x varies fastest, then y,
//! then z. A linear index is therefore `x + nx * (y + ny * z)`.

use std::ops::Deref;

use crate::error::{Error, GridMismatch, Result};

/// Relative tolerance used when comparing voxel spacings.
pub const SPACING_RTOL: f64 = 1e-5;

pub type Affine = [[f64; 4]; 4];

/// Geometry shared by every volume: voxel counts, voxel size and the
/// voxel-to-world transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dims: [usize; 3],
    spacing: [f64; 3],
    affine: Affine,
}

impl Grid {
    /// Grid with a diagonal affine built from `spacing`.
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        let mut affine = [[0.0; 4]; 4];
        for axis in 0..3 {
            affine[axis][axis] = spacing[axis];
        }
        affine[3][3] = 1.0;
        Self::with_affine(dims, spacing, affine)
    }

    pub fn with_affine(dims: [usize; 3], spacing: [f64; 3], affine: Affine) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidVolume(format!(
                "dimensions must be positive, got {dims:?}"
            )));
        }
        if dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .is_none()
        {
            return Err(Error::InvalidVolume(format!(
                "dimensions {dims:?} overflow the addressable voxel count"
            )));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidVolume(format!(
                "spacing must be finite and strictly positive, got {spacing:?}"
            )));
        }
        if affine[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::InvalidVolume(format!(
                "affine last row must be (0, 0, 0, 1), got {:?}",
                affine[3]
            )));
        }
        Ok(Self {
            dims,
            spacing,
            affine,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn affine(&self) -> &Affine {
        &self.affine
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }
}

/// Compares two grids on dimensions and spacing. The affine is carried but
/// never compared: all metric math is voxel/millimetre based.
pub fn check_compatible(a: &Grid, b: &Grid) -> Result<(), GridMismatch> {
    const DIM_NAMES: [&str; 3] = ["nx", "ny", "nz"];
    const SPACING_NAMES: [&str; 3] = ["sx", "sy", "sz"];
    for axis in 0..3 {
        if a.dims[axis] != b.dims[axis] {
            return Err(GridMismatch {
                field: DIM_NAMES[axis],
                left: a.dims[axis].to_string(),
                right: b.dims[axis].to_string(),
            });
        }
    }
    for axis in 0..3 {
        let (sa, sb) = (a.spacing[axis], b.spacing[axis]);
        if (sa - sb).abs() > SPACING_RTOL * sa.abs().max(sb.abs()) {
            return Err(GridMismatch {
                field: SPACING_NAMES[axis],
                left: sa.to_string(),
                right: sb.to_string(),
            });
        }
    }
    Ok(())
}

/// A scalar value per voxel on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    grid: Grid,
    data: Vec<T>,
}

impl<T> Volume<T> {
    pub fn new(grid: Grid, data: Vec<T>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidVolume(format!(
                "data length {} does not match grid of {} voxels",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut([usize; 3]) -> T) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self { grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn into_parts(self) -> (Grid, Vec<T>) {
        (self.grid, self.data)
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> &T {
        &self.data[self.grid.index(x, y, z)]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Volume<U> {
        Volume {
            grid: self.grid.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T: Clone> Volume<T> {
    pub fn filled(grid: Grid, value: T) -> Self {
        let data = vec![value; grid.len()];
        Self { grid, data }
    }
}

/// Volume whose every value lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap(Volume<f32>);

impl ProbabilityMap {
    pub fn new(volume: Volume<f32>) -> Result<Self> {
        if let Some((i, v)) = volume
            .data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidVolume(format!(
                "probability {v} at voxel {:?} is outside [0, 1]",
                volume.grid.coords(i)
            )));
        }
        Ok(Self(volume))
    }

    pub fn into_volume(self) -> Volume<f32> {
        self.0
    }

    pub fn max_value(&self) -> f32 {
        self.0.data.iter().copied().fold(0.0, f32::max)
    }
}

impl Deref for ProbabilityMap {
    type Target = Volume<f32>;

    fn deref(&self) -> &Volume<f32> {
        &self.0
    }
}

/// Volume whose every value is exactly 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask(Volume<u8>);

impl BinaryMask {
    pub fn new(volume: Volume<u8>) -> Result<Self> {
        if let Some((i, v)) = volume.data.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(Error::InvalidVolume(format!(
                "mask value {v} at voxel {:?} is not 0 or 1",
                volume.grid.coords(i)
            )));
        }
        Ok(Self(volume))
    }

    pub fn empty(grid: Grid) -> Self {
        Self(Volume::filled(grid, 0))
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut([usize; 3]) -> bool) -> Self {
        Self(Volume::from_fn(grid, |c| u8::from(f(c))))
    }

    /// Any nonzero, non-NaN value becomes foreground.
    pub fn from_nonzero(volume: &Volume<f32>) -> Self {
        Self(volume.map(|&v| u8::from(v != 0.0 && !v.is_nan())))
    }

    /// Strict conversion: every value must already be exactly 0 or 1.
    pub fn from_values(volume: &Volume<f32>) -> Result<Self> {
        if let Some((i, v)) = volume
            .data
            .iter()
            .enumerate()
            .find(|(_, &v)| v != 0.0 && v != 1.0)
        {
            return Err(Error::InvalidVolume(format!(
                "mask value {v} at voxel {:?} is not 0 or 1",
                volume.grid.coords(i)
            )));
        }
        Ok(Self(volume.map(|&v| u8::from(v == 1.0))))
    }

    pub fn into_volume(self) -> Volume<u8> {
        self.0
    }

    pub fn to_f32(&self) -> Volume<f32> {
        self.0.map(|&v| f32::from(v))
    }

    #[inline]
    pub fn is_set(&self, index: usize) -> bool {
        self.0.data[index] != 0
    }

    pub fn foreground_count(&self) -> usize {
        self.0.data.iter().filter(|&&v| v != 0).count()
    }
}

impl Deref for BinaryMask {
    type Target = Volume<u8>;

    fn deref(&self) -> &Volume<u8> {
        &self.0
    }
}

fn validate_threshold(t: f32) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "threshold {t} is outside [0, 1]"
        )))
    }
}

/// Binarizes `p` with an inclusive comparison: a voxel is foreground iff
/// `p >= t`.
pub fn threshold(p: &ProbabilityMap, t: f32) -> Result<BinaryMask> {
    validate_threshold(t)?;
    Ok(BinaryMask(p.map(|&v| u8::from(v >= t))))
}

pub fn foreground_count(m: &BinaryMask) -> usize {
    m.foreground_count()
}
