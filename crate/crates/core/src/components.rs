//! 3D connected-component labeling and per-component statistics.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{check_compatible, BinaryMask, ProbabilityMap, Volume};

/// Voxel neighborhood used to decide whether two foreground voxels touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    /// Face neighbors.
    Six,
    /// Face and edge neighbors.
    Eighteen,
    /// Face, edge and corner neighbors.
    #[default]
    TwentySix,
}

impl Connectivity {
    pub const ALL: [Connectivity; 3] = [
        Connectivity::Six,
        Connectivity::Eighteen,
        Connectivity::TwentySix,
    ];

    pub fn neighbor_count(self) -> u8 {
        match self {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }

    /// Whether an offset with `nonzero` nonzero coordinates is a neighbor.
    fn admits(self, nonzero: usize) -> bool {
        match self {
            Connectivity::Six => nonzero == 1,
            Connectivity::Eighteen => (1..=2).contains(&nonzero),
            Connectivity::TwentySix => (1..=3).contains(&nonzero),
        }
    }

    /// Neighbor offsets that precede the origin in canonical scan order.
    fn backward_offsets(self) -> Vec<[isize; 3]> {
        let mut out = Vec::new();
        for dz in -1isize..=0 {
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let precedes = dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0)));
                    let nonzero = [dx, dy, dz].iter().filter(|&&d| d != 0).count();
                    if precedes && self.admits(nonzero) {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(value: u8) -> std::result::Result<Self, String> {
        match value {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            other => Err(format!("connectivity must be 6, 18 or 26, got {other}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        c.neighbor_count()
    }
}

impl FromStr for Connectivity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let n: u8 = s
            .trim()
            .parse()
            .map_err(|_| format!("connectivity must be 6, 18 or 26, got {s:?}"))?;
        Connectivity::try_from(n)
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.neighbor_count())
    }
}

/// Inclusive voxel ranges along each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: [usize; 3],
    pub max: [usize; 3],
}

impl BoundingBox {
    fn at(c: [usize; 3]) -> Self {
        Self { min: c, max: c }
    }

    fn include(&mut self, c: [usize; 3]) {
        for axis in 0..3 {
            self.min[axis] = self.min[axis].min(c[axis]);
            self.max[axis] = self.max[axis].max(c[axis]);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentStats {
    pub label: u32,
    pub size: usize,
    pub bbox: BoundingBox,
    pub peak_probability: Option<f32>,
}

/// Label volume (0 = background, components numbered `1..=count`) plus
/// statistics for each component, indexed by `label - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSet {
    labels: Volume<u32>,
    stats: Vec<ComponentStats>,
    connectivity: Connectivity,
}

impl ComponentSet {
    pub fn labels(&self) -> &Volume<u32> {
        &self.labels
    }

    pub fn stats(&self) -> &[ComponentStats] {
        &self.stats
    }

    pub fn count(&self) -> usize {
        self.stats.len()
    }

    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    pub fn component(&self, label: u32) -> Option<&ComponentStats> {
        label
            .checked_sub(1)
            .and_then(|i| self.stats.get(i as usize))
    }

    pub fn total_size(&self) -> usize {
        self.stats.iter().map(|s| s.size).sum()
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        Self { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grandparent = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grandparent;
            x = grandparent;
        }
        x
    }

    /// The smaller root always wins, so a root is the earliest provisional
    /// label of its set.
    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        lo
    }
}

/// Labels the maximal connected foreground regions of `m`.
///
/// Two passes with union-find over provisional labels. Final labels are
/// assigned in order of each component's first voxel in canonical scan order,
/// which makes the numbering independent of how the merging proceeded.
pub fn label_components(m: &BinaryMask, connectivity: Connectivity) -> ComponentSet {
    const NONE: u32 = u32::MAX;
    let grid = m.grid().clone();
    let [nx, ny, nz] = grid.dims();
    let offsets = connectivity.backward_offsets();

    let mut provisional = vec![NONE; grid.len()];
    let mut sets = DisjointSet::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = grid.index(x, y, z);
                if !m.is_set(i) {
                    continue;
                }
                let mut current = NONE;
                for &[dx, dy, dz] in &offsets {
                    let (qx, qy, qz) = (x as isize + dx, y as isize + dy, z as isize + dz);
                    if qx < 0 || qy < 0 || qz < 0 || qx >= nx as isize || qy >= ny as isize {
                        continue;
                    }
                    let neighbor = provisional[grid.index(qx as usize, qy as usize, qz as usize)];
                    if neighbor == NONE {
                        continue;
                    }
                    current = if current == NONE {
                        sets.find(neighbor)
                    } else {
                        sets.union(current, neighbor)
                    };
                }
                provisional[i] = if current == NONE {
                    sets.make()
                } else {
                    current
                };
            }
        }
    }

    let mut final_of_root = vec![0u32; sets.parent.len()];
    let mut stats: Vec<ComponentStats> = Vec::new();
    let mut labels = vec![0u32; grid.len()];
    for (i, &p) in provisional.iter().enumerate() {
        if p == NONE {
            continue;
        }
        let root = sets.find(p) as usize;
        let coords = grid.coords(i);
        if final_of_root[root] == 0 {
            stats.push(ComponentStats {
                label: stats.len() as u32 + 1,
                size: 0,
                bbox: BoundingBox::at(coords),
                peak_probability: None,
            });
            final_of_root[root] = stats.len() as u32;
        }
        let label = final_of_root[root];
        labels[i] = label;
        let s = &mut stats[label as usize - 1];
        s.size += 1;
        s.bbox.include(coords);
    }

    ComponentSet {
        labels: Volume::new(grid, labels).expect("label volume matches mask grid"),
        stats,
        connectivity,
    }
}

/// Sets each component's peak probability to the maximum of `p` over its
/// voxels.
pub fn annotate_peaks(mut cs: ComponentSet, p: &ProbabilityMap) -> Result<ComponentSet> {
    check_compatible(cs.labels.grid(), p.grid())?;
    let mut peaks = vec![f32::NEG_INFINITY; cs.stats.len()];
    for (&label, &v) in cs.labels.data().iter().zip(p.data()) {
        if label != 0 {
            let peak = &mut peaks[label as usize - 1];
            *peak = peak.max(v);
        }
    }
    for (s, peak) in cs.stats.iter_mut().zip(peaks) {
        s.peak_probability = Some(peak);
    }
    Ok(cs)
}

/// Zeroes every voxel of the listed components.
pub fn remove_components(m: &BinaryMask, cs: &ComponentSet, ids: &[u32]) -> Result<BinaryMask> {
    check_compatible(m.grid(), cs.labels.grid())?;
    let count = cs.count() as u32;
    let mut remove = vec![false; cs.count() + 1];
    for &id in ids {
        if id == 0 || id > count {
            return Err(Error::InvalidParameter(format!(
                "component id {id} is not in 1..={count}"
            )));
        }
        remove[id as usize] = true;
    }
    let data = m
        .data()
        .iter()
        .zip(cs.labels.data())
        .map(|(&v, &label)| if remove[label as usize] { 0 } else { v })
        .collect();
    BinaryMask::new(Volume::new(m.grid().clone(), data)?)
}

/// Set of labels present in a label volume, ignoring background.
pub fn present_labels(labels: &Volume<u32>) -> BTreeSet<u32> {
    labels.data().iter().copied().filter(|&l| l != 0).collect()
}
