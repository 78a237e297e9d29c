#![allow(dead_code)]

use proptest::prelude::*;
use segfuse_core::{BinaryMask, Grid, ProbabilityMap, Volume};

pub fn grid(dims: [usize; 3], spacing: [f64; 3]) -> Grid {
    Grid::new(dims, spacing).unwrap()
}

pub fn mask(dims: [usize; 3], spacing: [f64; 3], bits: Vec<bool>) -> BinaryMask {
    BinaryMask::new(
        Volume::new(
            grid(dims, spacing),
            bits.into_iter().map(u8::from).collect(),
        )
        .unwrap(),
    )
    .unwrap()
}

pub fn dims_up_to(max: usize) -> impl Strategy<Value = [usize; 3]> {
    (1..=max, 1..=max, 1..=max).prop_map(|(x, y, z)| [x, y, z])
}

/// Two random masks on one random grid, with a random foreground density.
pub fn mask_pair(max: usize) -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
    (
        dims_up_to(max),
        0.05f64..0.6,
        0.05f64..0.6,
        [0.5f64..3.0, 0.5f64..3.0, 0.5f64..3.0],
    )
        .prop_flat_map(|(dims, da, db, spacing)| {
            let n = dims.iter().product::<usize>();
            (
                proptest::collection::vec(proptest::bool::weighted(da), n),
                proptest::collection::vec(proptest::bool::weighted(db), n),
            )
                .prop_map(move |(a, b)| (mask(dims, spacing, a), mask(dims, spacing, b)))
        })
}

pub fn single_mask(max: usize) -> impl Strategy<Value = BinaryMask> {
    mask_pair(max).prop_map(|(a, _)| a)
}

/// Probability maps whose values come from a small set that includes exact
/// threshold boundaries.
pub fn prob_map(max: usize) -> impl Strategy<Value = ProbabilityMap> {
    const LEVELS: [f32; 9] = [0.0, 0.2, 0.49, 0.5, 0.52, 0.55, 0.6, 0.7, 0.95];
    dims_up_to(max).prop_flat_map(|dims| {
        let n = dims.iter().product::<usize>();
        proptest::collection::vec(proptest::sample::select(&LEVELS[..]), n).prop_map(move |v| {
            ProbabilityMap::new(Volume::new(grid(dims, [1.0; 3]), v).unwrap()).unwrap()
        })
    })
}
