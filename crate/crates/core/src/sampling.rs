//! Distance-matrix distribution fingerprints.
//!
//! A metric-measure space induces a law on `k x k` distance matrices by
//! sampling `k` points independently from the mass distribution. The
//! fingerprint summarizes that law by the empirical distributions of the
//! sampled off-diagonal entries and of the sampled triple defects, and
//! two fingerprints are compared by the larger of the two
//! Kolmogorov-Smirnov sup-differences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::scalar::Scalar;
use crate::scan::MassSampler;
use crate::space::PointSpace;

/// Empirical summary of the distance-matrix law of one space.
///
/// `entry_ecdf` holds the `trials * k * (k-1) / 2` sampled off-diagonal
/// entries sorted ascending; `defect_ecdf` the triangle defects of all
/// ordered triples of distinct sample positions, sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub k: usize,
    pub trials: u64,
    pub entry_ecdf: Vec<f64>,
    pub defect_ecdf: Vec<f64>,
}

/// Draws `k` indices i.i.d. proportional to the masses and returns the
/// `k x k` table of kernel values at the sampled points. Reproducible
/// per seed.
pub fn sample_distance_matrix<T: Scalar>(
    kernel: &Kernel<T>,
    space: &PointSpace<T>,
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<T>>> {
    if k == 0 {
        return Err(Error::SampleTooSmall { min: 1 });
    }
    check(kernel, space)?;
    let sampler = MassSampler::new(space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx: Vec<usize> = (0..k).map(|_| sampler.draw(&mut rng)).collect();
    Ok(idx
        .iter()
        .map(|&i| idx.iter().map(|&j| kernel.at(i, j)).collect())
        .collect())
}

fn check<T: Scalar>(kernel: &Kernel<T>, space: &PointSpace<T>) -> Result<()> {
    if kernel.len() != space.len() {
        return Err(Error::DimensionMismatch {
            kernel: kernel.len(),
            space: space.len(),
        });
    }
    if let Some((i, j)) = kernel.first_non_finite() {
        return Err(Error::NonFiniteEntry { i, j });
    }
    Ok(())
}

/// Builds the fingerprint of one space: `trials` independent `k`-point
/// samples, each contributing its pairwise entries and ordered-triple
/// defects. Per-trial randomness comes from stream `t` of the master
/// seed, so trials are order-independent and parallelizable.
pub fn fingerprint<T: Scalar>(
    kernel: &Kernel<T>,
    space: &PointSpace<T>,
    k: usize,
    trials: u64,
    seed: u64,
) -> Result<Fingerprint> {
    if k < 2 {
        return Err(Error::SampleTooSmall { min: 2 });
    }
    check(kernel, space)?;
    let sampler = MassSampler::new(space)?;
    let mut entries = Vec::with_capacity((trials as usize) * k * (k - 1) / 2);
    let mut defects = Vec::new();
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t);
        let idx: Vec<usize> = (0..k).map(|_| sampler.draw(&mut rng)).collect();
        for a in 0..k {
            for b in (a + 1)..k {
                entries.push(kernel.at(idx[a], idx[b]).to_f64().unwrap());
            }
        }
        for a in 0..k {
            for b in 0..k {
                if b == a {
                    continue;
                }
                for c in 0..k {
                    if c == a || c == b {
                        continue;
                    }
                    let d = kernel.at(idx[a], idx[c])
                        - kernel.at(idx[a], idx[b])
                        - kernel.at(idx[b], idx[c]);
                    defects.push(d.to_f64().unwrap());
                }
            }
        }
    }
    entries.sort_by(|a, b| a.partial_cmp(b).unwrap());
    defects.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(Fingerprint {
        k,
        trials,
        entry_ecdf: entries,
        defect_ecdf: defects,
    })
}

/// Two-sample Kolmogorov-Smirnov statistic of two sorted samples.
fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { 1.0 };
    }
    let (mut i, mut j) = (0usize, 0usize);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut sup: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    sup
}

/// Distance between two fingerprints: the larger of the entry and defect
/// Kolmogorov-Smirnov statistics, in `[0, 1]`.
pub fn fingerprint_distance(a: &Fingerprint, b: &Fingerprint) -> f64 {
    ks_distance(&a.entry_ecdf, &b.entry_ecdf).max(ks_distance(&a.defect_ecdf, &b.defect_ecdf))
}

/// End-to-end comparison of two spaces at matched sample size and trial
/// count. Symmetric up to the seed roles; a space against itself with
/// the same seed is exactly zero, and with independent seeds the
/// statistic concentrates near zero as the trial count grows.
#[allow(clippy::too_many_arguments)]
pub fn fingerprint_compare<T: Scalar>(
    kernel_a: &Kernel<T>,
    space_a: &PointSpace<T>,
    kernel_b: &Kernel<T>,
    space_b: &PointSpace<T>,
    k: usize,
    trials: u64,
    seed_a: u64,
    seed_b: u64,
) -> Result<f64> {
    let fa = fingerprint(kernel_a, space_a, k, trials, seed_a)?;
    let fb = fingerprint(kernel_b, space_b, k, trials, seed_b)?;
    Ok(fingerprint_distance(&fa, &fb))
}
