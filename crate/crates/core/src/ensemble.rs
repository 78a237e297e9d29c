//! Voxelwise fusion of probability maps produced by several models.

use crate::error::{Error, Result};
use crate::volume::{check_compatible, ProbabilityMap, Volume};

/// Maps to fuse, with optional non-negative weights (uniform when absent).
#[derive(Debug, Clone)]
pub struct EnsembleInput {
    maps: Vec<ProbabilityMap>,
    weights: Option<Vec<f64>>,
}

impl EnsembleInput {
    pub fn new(maps: Vec<ProbabilityMap>, weights: Option<Vec<f64>>) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::InvalidParameter("ensemble needs at least one map".into()))?;
        for m in &maps[1..] {
            check_compatible(first.grid(), m.grid())?;
        }
        if let Some(w) = &weights {
            if w.len() != maps.len() {
                return Err(Error::InvalidParameter(format!(
                    "{} weights given for {} maps",
                    w.len(),
                    maps.len()
                )));
            }
            if w.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
                return Err(Error::InvalidParameter(
                    "weights must be finite and non-negative".into(),
                ));
            }
            if w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::InvalidParameter("weights sum to zero".into()));
            }
        }
        Ok(Self { maps, weights })
    }

    pub fn uniform(maps: Vec<ProbabilityMap>) -> Result<Self> {
        Self::new(maps, None)
    }

    pub fn maps(&self) -> &[ProbabilityMap] {
        &self.maps
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }
}

/// Weighted voxelwise mean of the input maps.
///
/// Per voxel the (value, weight) pairs are sorted before summation, so the
/// result is bit-identical under any reordering of the inputs. The mean is
/// computed in f64 and clamped to the range of the contributing values
/// before rounding to f32.
pub fn average_maps(e: &EnsembleInput) -> Result<ProbabilityMap> {
    let n = e.maps.len();
    let first = &e.maps[0];
    let weights: Vec<f64> = match &e.weights {
        Some(w) => w.clone(),
        None => vec![1.0; n],
    };
    let total_weight: f64 = {
        let mut sorted = weights.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.iter().sum()
    };

    let mut terms: Vec<(f32, f64)> = Vec::with_capacity(n);
    let data = (0..first.grid().len())
        .map(|i| {
            terms.clear();
            terms.extend(e.maps.iter().zip(&weights).map(|(m, &w)| (m.data()[i], w)));
            terms.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            let (lo, hi) = (terms[0].0, terms[n - 1].0);
            let sum: f64 = terms.iter().map(|&(v, w)| f64::from(v) * w).sum();
            ((sum / total_weight) as f32).clamp(lo, hi)
        })
        .collect();
    ProbabilityMap::new(Volume::new(first.grid().clone(), data)?)
}
