//! Segmentation evaluation: Dice, lesion-wise F1, simple lesion count,
//! volume difference and 95th-percentile Hausdorff distance, plus
//! mean/std aggregation over subjects.

pub mod distance;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::components::{label_components, ComponentSet, Connectivity};
use crate::error::{Error, Result};
use crate::volume::{check_compatible, BinaryMask};

pub const AGGREGATE_REPORT_VERSION: u32 = 1;

/// How the two directed boundary-distance sets are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HausdorffVariant {
    /// 95th percentile of both directed sets merged into one.
    #[default]
    Pooled,
    /// Larger of the two directed 95th percentiles.
    MaxOfDirected,
}

impl FromStr for HausdorffVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pooled" => Ok(Self::Pooled),
            "max-of-directed" => Ok(Self::MaxOfDirected),
            other => Err(format!(
                "unknown Hausdorff variant {other:?} (pooled | max-of-directed)"
            )),
        }
    }
}

impl fmt::Display for HausdorffVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pooled => "pooled",
            Self::MaxOfDirected => "max-of-directed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeUnits {
    #[default]
    Voxels,
    Mm3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalOptions {
    pub connectivity: Connectivity,
    pub hd95_variant: HausdorffVariant,
    pub vd_units: VolumeUnits,
}

fn check(pred: &BinaryMask, gt: &BinaryMask) -> Result<()> {
    check_compatible(pred.grid(), gt.grid())?;
    Ok(())
}

/// `2|P∩G| / (|P|+|G|)`, with two empty masks scoring 1.
pub fn dice(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    check(pred, gt)?;
    let (mut p, mut g, mut both) = (0usize, 0usize, 0usize);
    for (&a, &b) in pred.data().iter().zip(gt.data()) {
        p += a as usize;
        g += b as usize;
        both += (a & b) as usize;
    }
    if p + g == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (p + g) as f64)
}

/// Detection counts behind the lesion-wise F1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LesionCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl LesionCounts {
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.true_positives + self.false_positives + self.false_negatives;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.true_positives as f64 / denom as f64
        }
    }
}

/// A ground-truth component is detected when any of its voxels is predicted
/// foreground; a predicted component is a false positive when none of its
/// voxels is ground-truth foreground.
pub fn lesion_counts(
    pred: &BinaryMask,
    gt: &BinaryMask,
    pred_cc: &ComponentSet,
    gt_cc: &ComponentSet,
) -> LesionCounts {
    let mut gt_hit = vec![false; gt_cc.count() + 1];
    let mut pred_hit = vec![false; pred_cc.count() + 1];
    let gt_labels = gt_cc.labels().data();
    let pred_labels = pred_cc.labels().data();
    for i in 0..gt_labels.len() {
        if gt_labels[i] != 0 && pred.is_set(i) {
            gt_hit[gt_labels[i] as usize] = true;
        }
        if pred_labels[i] != 0 && gt.is_set(i) {
            pred_hit[pred_labels[i] as usize] = true;
        }
    }
    let tp = gt_hit[1..].iter().filter(|&&h| h).count();
    LesionCounts {
        true_positives: tp,
        false_negatives: gt_cc.count() - tp,
        false_positives: pred_hit[1..].iter().filter(|&&h| !h).count(),
    }
}

pub fn lesion_f1(pred: &BinaryMask, gt: &BinaryMask, c: Connectivity) -> Result<f64> {
    check(pred, gt)?;
    let pred_cc = label_components(pred, c);
    let gt_cc = label_components(gt, c);
    Ok(lesion_counts(pred, gt, &pred_cc, &gt_cc).f1())
}

pub fn simple_lesion_count(pred: &BinaryMask, gt: &BinaryMask, c: Connectivity) -> Result<usize> {
    check(pred, gt)?;
    Ok(label_components(pred, c)
        .count()
        .abs_diff(label_components(gt, c).count()))
}

/// Absolute difference in foreground voxel counts.
pub fn volume_difference(pred: &BinaryMask, gt: &BinaryMask) -> Result<usize> {
    check(pred, gt)?;
    Ok(pred.foreground_count().abs_diff(gt.foreground_count()))
}

pub fn volume_difference_mm3(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    Ok(volume_difference(pred, gt)? as f64 * pred.grid().voxel_volume())
}

/// Percentile of an ascending slice, interpolating linearly between the two
/// closest ranks: with `h = (n - 1) q`, the result is
/// `a[⌊h⌋] + (h - ⌊h⌋)(a[⌊h⌋ + 1] - a[⌊h⌋])`.
pub fn percentile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Inclusive voxel box that holds all foreground of both masks.
fn joint_bbox(a: &BinaryMask, b: &BinaryMask) -> Option<([usize; 3], [usize; 3])> {
    let grid = a.grid();
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut any = false;
    for i in 0..grid.len() {
        if a.is_set(i) || b.is_set(i) {
            any = true;
            let c = grid.coords(i);
            for axis in 0..3 {
                lo[axis] = lo[axis].min(c[axis]);
                hi[axis] = hi[axis].max(c[axis]);
            }
        }
    }
    any.then_some((lo, hi))
}

/// Boundary flags for `m` restricted to the box `[lo, hi]`. A boundary voxel
/// is foreground with at least one background face neighbor; outside the
/// grid counts as background. Everything outside the box is background
/// (the box covers all foreground), so cropping does not change the result.
fn boundary_in_box(m: &BinaryMask, lo: [usize; 3], box_dims: [usize; 3]) -> Vec<bool> {
    let grid = m.grid();
    let [gx, gy, gz] = grid.dims();
    let [bx, by, bz] = box_dims;
    let mut out = vec![false; bx * by * bz];
    for z in 0..bz {
        for y in 0..by {
            for x in 0..bx {
                let (vx, vy, vz) = (x + lo[0], y + lo[1], z + lo[2]);
                if !m.is_set(grid.index(vx, vy, vz)) {
                    continue;
                }
                let background = |dx: isize, dy: isize, dz: isize| {
                    let (qx, qy, qz) = (vx as isize + dx, vy as isize + dy, vz as isize + dz);
                    qx < 0
                        || qy < 0
                        || qz < 0
                        || qx >= gx as isize
                        || qy >= gy as isize
                        || qz >= gz as isize
                        || !m.is_set(grid.index(qx as usize, qy as usize, qz as usize))
                };
                out[x + bx * (y + by * z)] = background(-1, 0, 0)
                    || background(1, 0, 0)
                    || background(0, -1, 0)
                    || background(0, 1, 0)
                    || background(0, 0, -1)
                    || background(0, 0, 1);
            }
        }
    }
    out
}

/// Both directed boundary-to-boundary distance sets (mm): from each
/// boundary voxel of `a` to the nearest boundary voxel of `b`, and back.
/// `None` when either mask is empty.
pub fn directed_boundary_distances(
    a: &BinaryMask,
    b: &BinaryMask,
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    check(a, b)?;
    if a.foreground_count() == 0 || b.foreground_count() == 0 {
        return Ok(None);
    }
    let (lo, hi) = joint_bbox(a, b).expect("both masks nonempty");
    let box_dims = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
    let spacing = a.grid().spacing();
    let edge_a = boundary_in_box(a, lo, box_dims);
    let edge_b = boundary_in_box(b, lo, box_dims);
    let to_b = distance::squared_edt(box_dims, spacing, &edge_b);
    let to_a = distance::squared_edt(box_dims, spacing, &edge_a);
    let sample = |edge: &[bool], field: &[f64]| -> Vec<f64> {
        edge.iter()
            .zip(field)
            .filter(|(&e, _)| e)
            .map(|(_, &d2)| d2.sqrt())
            .collect()
    };
    Ok(Some((sample(&edge_a, &to_b), sample(&edge_b, &to_a))))
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Boundary 95th-percentile Hausdorff distance in mm; `None` when either
/// mask is empty.
pub fn hausdorff95(
    pred: &BinaryMask,
    gt: &BinaryMask,
    variant: HausdorffVariant,
) -> Result<Option<f64>> {
    hausdorff_percentile(pred, gt, 0.95, variant)
}

/// Classical (100th percentile) boundary Hausdorff distance.
pub fn hausdorff_max(pred: &BinaryMask, gt: &BinaryMask) -> Result<Option<f64>> {
    hausdorff_percentile(pred, gt, 1.0, HausdorffVariant::Pooled)
}

pub fn hausdorff_percentile(
    pred: &BinaryMask,
    gt: &BinaryMask,
    q: f64,
    variant: HausdorffVariant,
) -> Result<Option<f64>> {
    let Some((pg, gp)) = directed_boundary_distances(pred, gt)? else {
        return Ok(None);
    };
    Ok(match variant {
        HausdorffVariant::Pooled => {
            let mut all = pg;
            all.extend(gp);
            percentile(&sorted(all), q)
        }
        HausdorffVariant::MaxOfDirected => {
            let a = percentile(&sorted(pg), q).expect("nonempty boundary");
            let b = percentile(&sorted(gp), q).expect("nonempty boundary");
            Some(a.max(b))
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dice: f64,
    pub lesion_f1: f64,
    pub slc: usize,
    /// In the units selected by [`EvalOptions::vd_units`].
    pub vd: f64,
    pub hd95: Option<f64>,
    pub pred_components: usize,
    pub gt_components: usize,
}

pub fn evaluate_case(
    pred: &BinaryMask,
    gt: &BinaryMask,
    options: &EvalOptions,
) -> Result<MetricReport> {
    check(pred, gt)?;
    let pred_cc = label_components(pred, options.connectivity);
    let gt_cc = label_components(gt, options.connectivity);
    let vd = match options.vd_units {
        VolumeUnits::Voxels => volume_difference(pred, gt)? as f64,
        VolumeUnits::Mm3 => volume_difference_mm3(pred, gt)?,
    };
    Ok(MetricReport {
        dice: dice(pred, gt)?,
        lesion_f1: lesion_counts(pred, gt, &pred_cc, &gt_cc).f1(),
        slc: pred_cc.count().abs_diff(gt_cc.count()),
        vd,
        hd95: hausdorff95(pred, gt, options.hd95_variant)?,
        pred_components: pred_cc.count(),
        gt_components: gt_cc.count(),
    })
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Summary {
    /// Values are sorted before every reduction so the result does not
    /// depend on input order.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let values = sorted(values.to_vec());
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let deviations = sorted(values.iter().map(|v| (v - mean) * (v - mean)).collect());
        let std = (deviations.iter().sum::<f64>() / n).sqrt();
        Some(Self {
            mean,
            std,
            count: values.len(),
        })
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}±{:.3}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub format_version: u32,
    pub subjects: usize,
    pub dice: Summary,
    pub lesion_f1: Summary,
    pub slc: Summary,
    pub vd: Summary,
    /// Over subjects with a defined value only; `None` if there are none.
    pub hd95: Option<Summary>,
    pub hd95_undefined: usize,
}

pub fn aggregate(reports: &[MetricReport]) -> Result<AggregateReport> {
    if reports.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot aggregate zero reports".into(),
        ));
    }
    let column = |f: fn(&MetricReport) -> f64| {
        Summary::of(&reports.iter().map(f).collect::<Vec<_>>()).expect("nonempty")
    };
    let hd: Vec<f64> = reports.iter().filter_map(|r| r.hd95).collect();
    Ok(AggregateReport {
        format_version: AGGREGATE_REPORT_VERSION,
        subjects: reports.len(),
        dice: column(|r| r.dice),
        lesion_f1: column(|r| r.lesion_f1),
        slc: column(|r| r.slc as f64),
        vd: column(|r| r.vd),
        hd95_undefined: reports.len() - hd.len(),
        hd95: Summary::of(&hd),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;

    fn grid(dims: [usize; 3], spacing: [f64; 3]) -> Grid {
        Grid::new(dims, spacing).unwrap()
    }

    fn mask(dims: [usize; 3], f: impl FnMut([usize; 3]) -> bool) -> BinaryMask {
        BinaryMask::from_fn(grid(dims, [1.0; 3]), f)
    }

    fn voxels(g: Grid, vs: &[[usize; 3]]) -> BinaryMask {
        BinaryMask::from_fn(g, |c| vs.contains(&c))
    }

    #[test]
    fn dice_cases() {
        let a = mask([4, 4, 4], |[x, _, _]| x < 2);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        let b = mask([4, 4, 4], |[x, _, _]| x >= 2);
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        let e = mask([4, 4, 4], |_| false);
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
        assert_eq!(dice(&a, &e).unwrap(), 0.0);

        // |P| = 8, |G| = 4, overlap 4
        let p = mask([8, 1, 1], |_| true);
        let g = mask([8, 1, 1], |[x, _, _]| x < 4);
        assert!((dice(&p, &g).unwrap() - 2.0 * 4.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn lesion_f1_cases() {
        let one = mask([5, 5, 5], |[x, y, z]| x < 2 && y < 2 && z < 2);
        assert_eq!(lesion_f1(&one, &one, Connectivity::TwentySix).unwrap(), 1.0);

        let empty = mask([5, 5, 5], |_| false);
        assert_eq!(
            lesion_f1(&empty, &empty, Connectivity::TwentySix).unwrap(),
            1.0
        );

        // gt: A at x=0, B at x=4; pred: one overlapping A, one overlapping nothing
        let gt = mask([5, 1, 3], |[x, _, z]| (x == 0 || x == 4) && z == 0);
        let pred = mask([5, 1, 3], |[x, _, z]| {
            (x == 0 && z == 0) || (x == 2 && z == 2)
        });
        let pc = label_components(&pred, Connectivity::TwentySix);
        let gc = label_components(&gt, Connectivity::TwentySix);
        let counts = lesion_counts(&pred, &gt, &pc, &gc);
        assert_eq!(
            counts,
            LesionCounts {
                true_positives: 1,
                false_positives: 1,
                false_negatives: 1
            }
        );
        assert_eq!(lesion_f1(&pred, &gt, Connectivity::TwentySix).unwrap(), 0.5);
    }

    #[test]
    fn count_and_volume_cases() {
        let three = mask([9, 1, 1], |[x, _, _]| x % 4 == 0);
        let five = mask([9, 1, 1], |[x, _, _]| x % 2 == 0);
        assert_eq!(
            simple_lesion_count(&three, &three, Connectivity::Six).unwrap(),
            0
        );
        assert_eq!(
            simple_lesion_count(&three, &five, Connectivity::Six).unwrap(),
            2
        );
        let four = mask([7, 1, 1], |[x, _, _]| x % 2 == 0);
        let none = mask([7, 1, 1], |_| false);
        assert_eq!(
            simple_lesion_count(&none, &four, Connectivity::Six).unwrap(),
            4
        );

        let p = mask([120, 1, 1], |_| true);
        let g = mask([120, 1, 1], |[x, _, _]| x < 100);
        assert_eq!(volume_difference(&p, &g).unwrap(), 20);
        assert_eq!(volume_difference(&p, &p).unwrap(), 0);
        let g57 = mask([120, 1, 1], |[x, _, _]| x < 57);
        let e = mask([120, 1, 1], |_| false);
        assert_eq!(volume_difference(&e, &g57).unwrap(), 57);

        let g2 = BinaryMask::from_fn(grid([120, 1, 1], [2.0, 1.0, 0.5]), |[x, _, _]| x < 100);
        let p2 = BinaryMask::from_fn(grid([120, 1, 1], [2.0, 1.0, 0.5]), |_| true);
        assert_eq!(volume_difference_mm3(&p2, &g2).unwrap(), 20.0);
    }

    #[test]
    fn hausdorff_cases() {
        let a = mask([6, 6, 6], |[x, y, z]| {
            (1..4).contains(&x) && (1..5).contains(&y) && z > 2
        });
        assert_eq!(
            hausdorff95(&a, &a, HausdorffVariant::Pooled).unwrap(),
            Some(0.0)
        );

        let g = grid([4, 1, 1], [1.0; 3]);
        let p = voxels(g.clone(), &[[0, 0, 0]]);
        let q = voxels(g, &[[3, 0, 0]]);
        assert_eq!(
            hausdorff95(&p, &q, HausdorffVariant::Pooled).unwrap(),
            Some(3.0)
        );

        let g = grid([4, 1, 1], [2.0, 1.0, 1.0]);
        let p = voxels(g.clone(), &[[0, 0, 0]]);
        let q = voxels(g.clone(), &[[3, 0, 0]]);
        assert_eq!(
            hausdorff95(&p, &q, HausdorffVariant::Pooled).unwrap(),
            Some(6.0)
        );
        assert_eq!(
            hausdorff95(&p, &q, HausdorffVariant::MaxOfDirected).unwrap(),
            Some(6.0)
        );

        let e = BinaryMask::empty(g);
        assert_eq!(hausdorff95(&p, &e, HausdorffVariant::Pooled).unwrap(), None);
        assert_eq!(hausdorff95(&e, &e, HausdorffVariant::Pooled).unwrap(), None);
    }

    #[test]
    fn interior_voxels_are_not_boundary() {
        // 3x3x3 cube inside a 5^3 grid: the center voxel is interior
        let m = mask([5, 5, 5], |[x, y, z]| {
            (1..4).contains(&x) && (1..4).contains(&y) && (1..4).contains(&z)
        });
        let b = boundary_in_box(&m, [0, 0, 0], [5, 5, 5]);
        assert_eq!(b.iter().filter(|&&v| v).count(), 26);
        // a full grid: only voxels on the grid faces are boundary
        let full = mask([3, 3, 3], |_| true);
        let b = boundary_in_box(&full, [0, 0, 0], [3, 3, 3]);
        assert_eq!(b.iter().filter(|&&v| v).count(), 26);
    }

    #[test]
    fn percentile_interpolates() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.95), Some(3.8));
        assert_eq!(percentile(&v, 1.0), Some(4.0));
        assert_eq!(percentile(&[7.0], 0.95), Some(7.0));
        assert_eq!(percentile(&[], 0.5), None);
    }

    #[test]
    fn mismatched_grids_are_errors() {
        let a = mask([2, 2, 2], |_| true);
        let b = mask([2, 2, 3], |_| true);
        assert!(matches!(dice(&a, &b), Err(Error::GridMismatch(_))));
        assert!(evaluate_case(&a, &b, &EvalOptions::default()).is_err());
        assert!(hausdorff95(&a, &b, HausdorffVariant::Pooled).is_err());
    }

    fn report(dice: f64, hd95: Option<f64>) -> MetricReport {
        MetricReport {
            dice,
            lesion_f1: 1.0,
            slc: 0,
            vd: 0.0,
            hd95,
            pred_components: 1,
            gt_components: 1,
        }
    }

    #[test]
    fn aggregation() {
        let single = aggregate(&[report(0.42, Some(3.0))]).unwrap();
        assert_eq!(single.dice.mean, 0.42);
        assert_eq!(single.dice.std, 0.0);

        let two = aggregate(&[report(0.5, Some(2.0)), report(0.7, None)]).unwrap();
        assert!((two.dice.mean - 0.6).abs() < 1e-12);
        assert!((two.dice.std - 0.1).abs() < 1e-12);
        assert_eq!(two.hd95.unwrap().count, 1);
        assert_eq!(two.hd95.unwrap().mean, 2.0);
        assert_eq!(two.hd95_undefined, 1);

        let swapped = aggregate(&[report(0.7, None), report(0.5, Some(2.0))]).unwrap();
        assert_eq!(swapped, two);

        assert!(matches!(aggregate(&[]), Err(Error::InvalidParameter(_))));
        assert_eq!(format!("{}", two.dice), "0.600±0.100");
    }

    #[test]
    fn evaluate_composes_metrics() {
        let gt = mask([6, 6, 6], |[x, y, z]| x < 2 && y < 2 && z < 2);
        let pred = mask([6, 6, 6], |[x, y, z]| {
            (x < 2 && y < 2 && z < 2) || (x == 5 && y == 5 && z == 5)
        });
        let r = evaluate_case(&pred, &gt, &EvalOptions::default()).unwrap();
        assert_eq!(r.pred_components, 2);
        assert_eq!(r.gt_components, 1);
        assert_eq!(r.slc, 1);
        assert_eq!(r.vd, 1.0);
        assert_eq!(r.lesion_f1, 2.0 / 3.0);
        assert!((r.dice - 16.0 / 17.0).abs() < 1e-15);
        assert!(r.hd95.unwrap() > 0.0);
    }
}
