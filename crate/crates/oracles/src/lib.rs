//! Deliberately naive reference implementations for cross-checking the
//! production code in tests. Nothing here depends on `segfuse-core`: inputs
//! are plain dimension triples and flat `u8` masks in x-fastest order.

use std::collections::VecDeque;

/// Value computed by an oracle together with what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<T> {
    pub value: T,
    pub algorithm: &'static str,
    /// FNV-1a hash of the inputs.
    pub fingerprint: u64,
}

fn fingerprint(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in *part {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn dims_bytes(dims: [usize; 3]) -> Vec<u8> {
    dims.iter()
        .flat_map(|d| (*d as u64).to_le_bytes())
        .collect()
}

fn coords(dims: [usize; 3], i: usize) -> [i64; 3] {
    let x = i % dims[0];
    let y = (i / dims[0]) % dims[1];
    let z = i / (dims[0] * dims[1]);
    [x as i64, y as i64, z as i64]
}

/// Whether two distinct voxels touch under the 6/18/26 neighborhood.
fn touching(a: [i64; 3], b: [i64; 3], connectivity: u8) -> bool {
    let d: Vec<i64> = (0..3).map(|k| (a[k] - b[k]).abs()).collect();
    if d.iter().any(|&v| v > 1) {
        return false;
    }
    let differing = d.iter().filter(|&&v| v == 1).count();
    match connectivity {
        6 => differing == 1,
        18 => differing == 1 || differing == 2,
        26 => differing >= 1,
        other => panic!("unknown connectivity {other}"),
    }
}

/// Breadth-first region growing. Returns the foreground partition: each
/// region is an ascending list of linear indices, and regions are ordered by
/// their smallest index.
pub fn flood_fill_label(
    dims: [usize; 3],
    mask: &[u8],
    connectivity: u8,
) -> OracleResult<Vec<Vec<usize>>> {
    let n = dims[0] * dims[1] * dims[2];
    assert_eq!(mask.len(), n);
    let mut seen = vec![false; n];
    let mut regions = Vec::new();
    for start in 0..n {
        if mask[start] == 0 || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut region = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let ci = coords(dims, i);
            for dz in -1..=1 {
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let q = [ci[0] + dx, ci[1] + dy, ci[2] + dz];
                        if (0..3).any(|k| q[k] < 0 || q[k] >= dims[k] as i64) {
                            continue;
                        }
                        if !touching(ci, q, connectivity) {
                            continue;
                        }
                        let j = q[0] as usize + dims[0] * (q[1] as usize + dims[1] * q[2] as usize);
                        if mask[j] != 0 && !seen[j] {
                            seen[j] = true;
                            region.push(j);
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        region.sort_unstable();
        regions.push(region);
    }
    OracleResult {
        value: regions,
        algorithm: "bfs-flood-fill",
        fingerprint: fingerprint(&[&dims_bytes(dims), mask, &[connectivity]]),
    }
}

fn is_boundary(dims: [usize; 3], mask: &[u8], i: usize) -> bool {
    if mask[i] == 0 {
        return false;
    }
    let c = coords(dims, i);
    let steps = [
        [1, 0, 0],
        [-1, 0, 0],
        [0, 1, 0],
        [0, -1, 0],
        [0, 0, 1],
        [0, 0, -1],
    ];
    steps.iter().any(|s| {
        let q = [c[0] + s[0], c[1] + s[1], c[2] + s[2]];
        let outside = (0..3).any(|k| q[k] < 0 || q[k] >= dims[k] as i64);
        if outside {
            return true;
        }
        let j = q[0] as usize + dims[0] * (q[1] as usize + dims[1] * q[2] as usize);
        mask[j] == 0
    })
}

/// Every boundary-to-nearest-boundary distance in both directions, in mm.
pub fn brute_boundary_distances(
    dims: [usize; 3],
    pred: &[u8],
    gt: &[u8],
    spacing: [f64; 3],
) -> Vec<f64> {
    let n = dims[0] * dims[1] * dims[2];
    let edge = |m: &[u8]| -> Vec<[i64; 3]> {
        (0..n)
            .filter(|&i| is_boundary(dims, m, i))
            .map(|i| coords(dims, i))
            .collect()
    };
    let (ep, eg) = (edge(pred), edge(gt));
    let dist = |a: [i64; 3], b: [i64; 3]| -> f64 {
        let mut s = 0.0;
        for k in 0..3 {
            let d = (a[k] - b[k]) as f64 * spacing[k];
            s += d * d;
        }
        s.sqrt()
    };
    let mut all = Vec::new();
    for (from, to) in [(&ep, &eg), (&eg, &ep)] {
        for &a in from.iter() {
            let mut best = f64::INFINITY;
            for &b in to.iter() {
                best = best.min(dist(a, b));
            }
            all.push(best);
        }
    }
    all
}

fn nearest_rank_interpolated(mut values: Vec<f64>, q: f64) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (values.len() - 1) as f64;
    let below = pos.floor() as usize;
    if below + 1 >= values.len() {
        return values[below];
    }
    let frac = pos - below as f64;
    values[below] * (1.0 - frac) + values[below + 1] * frac
}

/// Pooled 95th-percentile boundary Hausdorff distance by all-pairs
/// enumeration. Both masks must be nonempty.
pub fn brute_hd95(
    dims: [usize; 3],
    pred: &[u8],
    gt: &[u8],
    spacing: [f64; 3],
) -> OracleResult<f64> {
    let all = brute_boundary_distances(dims, pred, gt, spacing);
    assert!(!all.is_empty(), "both masks must be nonempty");
    let spacing_bytes: Vec<u8> = spacing.iter().flat_map(|s| s.to_le_bytes()).collect();
    OracleResult {
        value: nearest_rank_interpolated(all, 0.95),
        algorithm: "all-pairs-boundary-hd95",
        fingerprint: fingerprint(&[&dims_bytes(dims), pred, gt, &spacing_bytes]),
    }
}

/// Maximum boundary-to-boundary distance by all-pairs enumeration.
pub fn brute_hausdorff_max(dims: [usize; 3], pred: &[u8], gt: &[u8], spacing: [f64; 3]) -> f64 {
    brute_boundary_distances(dims, pred, gt, spacing)
        .into_iter()
        .fold(0.0, f64::max)
}

/// Lesion-wise F1 by explicit double loop over (gt region, pred region)
/// pairs: a gt region counts as detected if any pred region shares a voxel
/// with it, and a pred region is a false positive if it shares no voxel
/// with any gt region.
pub fn brute_lesion_f1(
    dims: [usize; 3],
    pred: &[u8],
    gt: &[u8],
    connectivity: u8,
) -> OracleResult<f64> {
    let pred_regions = flood_fill_label(dims, pred, connectivity).value;
    let gt_regions = flood_fill_label(dims, gt, connectivity).value;
    let overlaps = |a: &Vec<usize>, b: &Vec<usize>| a.iter().any(|i| b.contains(i));

    let mut tp = 0usize;
    let mut fn_ = 0usize;
    for g in &gt_regions {
        let mut hit = false;
        for p in &pred_regions {
            if overlaps(g, p) {
                hit = true;
            }
        }
        if hit {
            tp += 1
        } else {
            fn_ += 1
        }
    }
    let mut fp = 0usize;
    for p in &pred_regions {
        let mut hit = false;
        for g in &gt_regions {
            if overlaps(p, g) {
                hit = true;
            }
        }
        if !hit {
            fp += 1;
        }
    }
    let value = if tp + fp + fn_ == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    };
    OracleResult {
        value,
        algorithm: "component-pair-overlap-f1",
        fingerprint: fingerprint(&[&dims_bytes(dims), pred, gt, &[connectivity]]),
    }
}

/// `|count(pred regions) - count(gt regions)|` via flood fill.
pub fn brute_lesion_count_difference(
    dims: [usize; 3],
    pred: &[u8],
    gt: &[u8],
    connectivity: u8,
) -> usize {
    let a = flood_fill_label(dims, pred, connectivity).value.len();
    let b = flood_fill_label(dims, gt, connectivity).value.len();
    a.abs_diff(b)
}
