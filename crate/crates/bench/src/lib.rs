//! Synthetic inputs shared by the benchmarks.

use fedpoison_core::rng::rng_for;
use fedpoison_core::ParamVector;
use rand_distr::{Distribution, StandardNormal};

/// `n` updates of dimension `d` scattered around a common centre.
pub fn cluster(n: usize, d: usize, seed: u64) -> Vec<ParamVector> {
    let mut rng = rng_for(seed, 0xBE, &[]);
    let centre: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    (0..n)
        .map(|_| {
            centre
                .iter()
                .map(|c| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    c + 0.1 * e
                })
                .collect::<Vec<_>>()
                .into()
        })
        .collect()
}

pub fn as_slices(updates: &[ParamVector]) -> Vec<&[f64]> {
    updates.iter().map(|u| u.as_slice()).collect()
}
