//! Seeded ground-truth instances and controlled corruptions.
//!
//! Families produce kernels with zero triangle (or ultrametric) defect by
//! construction; corruptions overwrite a known index set so that tests can
//! plant violations with exact bookkeeping. Instances are bit-identical
//! per (spec, seed): randomness comes from ChaCha8 seeded with the given
//! seed, and the manifest records the generator identifier.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{Kernel, Provenance};
use crate::scalar::Scalar;
use crate::space::{Layout, PointSpace};

/// Identifier of the pseudo-random scheme, recorded in manifests so that
/// instances are portable across implementations.
pub const GENERATOR_ID: &str = "chacha8-v1";

/// Metric family of the clean kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Arc distance between cell centers of the discretized unit circle.
    Circle,
    /// Euclidean distances of seeded points in the unit cube.
    Embedding { dim: usize },
    /// Distance `2^-(common prefix length)` of block indices; `block = 1`
    /// gives the cell-level dyadic ultrametric, larger blocks give the
    /// two-scale variant that is constant on aligned blocks.
    DyadicUltrametric { block: usize },
    /// Ultrametric from a random binary merge tree with level heights.
    Dendrogram,
    /// Constant off-diagonal value.
    Constant { value: f64 },
}

/// Planted corruption applied on top of the clean kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Corruption {
    /// Overwrites whole rows (and, by symmetry, columns): the k-th listed
    /// row receives the constant `value / 3^k`, later rows winning on
    /// intersections. Diagonal entries are left at zero.
    ///
    /// A single row at one constant keeps the triangle inequality (an
    /// isolated uniformly-far point is metric); the stagger gives every
    /// far row a strictly cheaper far row as a shortcut, so corrupting
    /// two or more rows with `value >= 3 * max clean entry` plants
    /// genuine violations of defect at least `value / 3 - 2 * max clean`.
    Rows { indices: Vec<usize>, value: f64 },
    /// Overwrites individual symmetric pairs. A pair `(i, i)` explicitly
    /// requests a diagonal write.
    Cells { pairs: Vec<(usize, usize)>, value: f64 },
    /// Adds `magnitude * u`, `u ~ U(0, 1]`, to a seeded random fraction of
    /// the off-diagonal pairs.
    ScaledNoise { fraction: f64, magnitude: f64, seed: u64 },
}

/// Zero-mass points appended after the family at a fixed distance from
/// everything, modeling non-separable null sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutlierSpec {
    pub count: usize,
    pub distance: f64,
}

/// Full description of a generated instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceSpec {
    pub family: Family,
    pub n: usize,
    pub corruption: Option<Corruption>,
    pub outliers: Option<OutlierSpec>,
}

/// Exact bookkeeping of what a corruption touched.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorruptionManifest {
    /// Ordered cells whose value differs from the clean kernel.
    pub cells: Vec<(usize, usize)>,
    /// Product-measure mass of the touched region of the square. For row
    /// corruption this is the mass of `R x X  u  X x R`.
    pub pair_mass: f64,
    pub generator: &'static str,
    pub seed: u64,
}

/// A generated instance: space, (possibly corrupted) kernel, the clean
/// kernel, and the corruption manifest.
#[derive(Debug, Clone)]
pub struct Instance<T: Scalar> {
    pub space: PointSpace<T>,
    pub kernel: Kernel<T>,
    pub clean: Kernel<T>,
    pub manifest: CorruptionManifest,
}

fn circle_distance(n: usize, i: usize, j: usize) -> f64 {
    let d = (i as i64 - j as i64).unsigned_abs() as usize;
    let d = d.min(n - d);
    d as f64 / n as f64
}

/// Length of the common binary prefix of `i` and `j` in `bits`-bit words.
fn common_prefix_len(i: usize, j: usize, bits: u32) -> u32 {
    let x = (i ^ j) as u64;
    if x == 0 {
        bits
    } else {
        bits - (64 - x.leading_zeros()).min(bits)
    }
}

fn clean_kernel<T: Scalar>(family: &Family, n: usize, rng: &mut ChaCha8Rng) -> Result<Kernel<T>> {
    let from = |v: f64| T::from_f64(v).unwrap();
    match family {
        Family::Circle => Ok(Kernel::from_fn(n, Provenance::Generated, |i, j| {
            from(circle_distance(n, i, j))
        })),
        Family::Embedding { dim } => {
            if *dim == 0 {
                return Err(Error::InvalidInstanceSpec {
                    reason: "embedding dimension must be positive".into(),
                });
            }
            let points: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..*dim).map(|_| rng.gen::<f64>()).collect())
                .collect();
            Ok(Kernel::from_fn(n, Provenance::Generated, |i, j| {
                let d2: f64 = points[i]
                    .iter()
                    .zip(&points[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                from(d2.sqrt())
            }))
        }
        Family::DyadicUltrametric { block } => {
            let b = *block;
            if b == 0 || n % b != 0 || !(n / b).is_power_of_two() {
                return Err(Error::InvalidInstanceSpec {
                    reason: format!("dyadic family needs block | n and n/block a power of two (n={n}, block={b})"),
                });
            }
            let bits = (n / b).trailing_zeros();
            Ok(Kernel::from_fn(n, Provenance::Generated, |i, j| {
                let (bi, bj) = (i / b, j / b);
                if bi == bj {
                    if i == j || b > 1 {
                        T::zero()
                    } else {
                        unreachable!("b == 1 forces bi != bj for i != j")
                    }
                } else {
                    from(0.5f64.powi(common_prefix_len(bi, bj, bits) as i32))
                }
            }))
        }
        Family::Dendrogram => {
            // Random binary merge tree; merge k happens at height k/(n-1),
            // and d(i, j) is the height of the first merge joining them.
            let mut cluster: Vec<usize> = (0..n).collect();
            let mut active: Vec<usize> = (0..n).collect();
            let mut k = Kernel::zeros(n);
            k.set_meta(Provenance::Generated);
            let merges = n.saturating_sub(1);
            for step in 0..merges {
                let a_pos = rng.gen_range(0..active.len());
                let a = active.swap_remove(a_pos);
                let b_pos = rng.gen_range(0..active.len());
                let b = active[b_pos];
                let height = (step + 1) as f64 / merges as f64;
                for i in 0..n {
                    if cluster[i] != a {
                        continue;
                    }
                    for j in 0..n {
                        if cluster[j] == b {
                            k.set_sym(i, j, from(height));
                        }
                    }
                }
                for c in cluster.iter_mut() {
                    if *c == a {
                        *c = b;
                    }
                }
            }
            Ok(k)
        }
        Family::Constant { value } => {
            if *value < 0.0 {
                return Err(Error::InvalidInstanceSpec {
                    reason: "constant value must be nonnegative".into(),
                });
            }
            Ok(Kernel::from_fn(n, Provenance::Generated, |i, j| {
                if i == j {
                    T::zero()
                } else {
                    from(*value)
                }
            }))
        }
    }
}

fn is_ultrametric_family(family: &Family) -> bool {
    matches!(
        family,
        Family::DyadicUltrametric { .. } | Family::Dendrogram | Family::Constant { .. }
    )
}

/// Generates the instance described by `spec`, reproducibly per seed.
pub fn generate<T: Scalar>(spec: &InstanceSpec, seed: u64) -> Result<Instance<T>> {
    if spec.n == 0 {
        return Err(Error::InvalidInstanceSpec {
            reason: "n must be positive".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = clean_kernel::<T>(&spec.family, spec.n, &mut rng)?;

    // Append zero-mass outliers at a fixed distance from everything.
    let (clean, space) = match spec.outliers {
        None => (base, PointSpace::circle(spec.n)?),
        Some(OutlierSpec { count, distance }) => {
            let max_clean = base.max_finite_entry().to_f64().unwrap();
            if distance <= 0.0 {
                return Err(Error::InvalidInstanceSpec {
                    reason: "outlier distance must be positive".into(),
                });
            }
            let metric_ok = 2.0 * distance >= max_clean;
            let ultra_ok = distance >= max_clean;
            if is_ultrametric_family(&spec.family) && !ultra_ok {
                return Err(Error::InvalidInstanceSpec {
                    reason: format!(
                        "outlier distance {distance} below the max clean entry {max_clean} breaks the ultrametric"
                    ),
                });
            }
            if !metric_ok {
                return Err(Error::InvalidInstanceSpec {
                    reason: format!(
                        "outlier distance {distance} below half the max clean entry {max_clean} breaks the triangle inequality"
                    ),
                });
            }
            let total = spec.n + count;
            let d = T::from_f64(distance).unwrap();
            let k = Kernel::from_fn(total, Provenance::Generated, |i, j| {
                if i == j {
                    T::zero()
                } else if i < spec.n && j < spec.n {
                    base.at(i, j)
                } else {
                    d
                }
            });
            let cell = T::one() / T::from_count(spec.n);
            let mut masses = vec![cell; spec.n];
            masses.extend(std::iter::repeat(T::zero()).take(count));
            (k, PointSpace::new(masses, Layout::Unordered)?)
        }
    };

    let (kernel, manifest) = apply_corruption(&clean, &space, spec.corruption.as_ref(), seed)?;
    Ok(Instance {
        space,
        kernel,
        clean,
        manifest,
    })
}

fn apply_corruption<T: Scalar>(
    clean: &Kernel<T>,
    space: &PointSpace<T>,
    corruption: Option<&Corruption>,
    seed: u64,
) -> Result<(Kernel<T>, CorruptionManifest)> {
    let n = clean.len();
    let mut kernel = clean.clone();
    let mut cells: Vec<(usize, usize)> = Vec::new();
    let mut pair_mass = 0.0f64;
    let masses: Vec<f64> = space.masses().iter().map(|m| m.to_f64().unwrap()).collect();

    match corruption {
        None => {}
        Some(Corruption::Rows { indices, value }) => {
            for &i in indices {
                if i >= n {
                    return Err(Error::IndexOutOfRange { index: i, n });
                }
            }
            for (k, &i) in indices.iter().enumerate() {
                let v = T::from_f64(value / 3f64.powi(k as i32)).unwrap();
                for j in 0..n {
                    if j != i {
                        kernel.set_sym(i, j, v);
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    if kernel.at(i, j) != clean.at(i, j) {
                        cells.push((i, j));
                    }
                }
            }
            // Mass of R x X  u  X x R, including the untouched diagonal.
            let m_r: f64 = indices.iter().map(|&i| masses[i]).sum();
            pair_mass = 2.0 * m_r - m_r * m_r;
        }
        Some(Corruption::Cells { pairs, value }) => {
            let v = T::from_f64(*value).unwrap();
            for &(i, j) in pairs {
                if i >= n || j >= n {
                    return Err(Error::IndexOutOfRange { index: i.max(j), n });
                }
                kernel.set_sym(i, j, v);
            }
            for i in 0..n {
                for j in 0..n {
                    if kernel.at(i, j) != clean.at(i, j) {
                        cells.push((i, j));
                        pair_mass += masses[i] * masses[j];
                    }
                }
            }
        }
        Some(Corruption::ScaledNoise {
            fraction,
            magnitude,
            seed: noise_seed,
        }) => {
            if !(0.0..=1.0).contains(fraction) {
                return Err(Error::InvalidInstanceSpec {
                    reason: "noise fraction must lie in [0, 1]".into(),
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*noise_seed);
            let mut all_pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .collect();
            let keep = ((all_pairs.len() as f64) * fraction).round() as usize;
            // Seeded partial Fisher-Yates: the first `keep` slots are the
            // selected pairs.
            for t in 0..keep.min(all_pairs.len()) {
                let r = rng.gen_range(t..all_pairs.len());
                all_pairs.swap(t, r);
            }
            let mut touched: Vec<(usize, usize)> = all_pairs[..keep.min(all_pairs.len())].to_vec();
            touched.sort_unstable();
            for &(i, j) in &touched {
                let bump = magnitude * (1.0 - rng.gen::<f64>()); // U(0, 1]
                let v = kernel.at(i, j) + T::from_f64(bump).unwrap();
                kernel.set_sym(i, j, v);
                cells.push((i, j));
                cells.push((j, i));
                pair_mass += 2.0 * masses[i] * masses[j];
            }
            cells.sort_unstable();
        }
    }

    Ok((
        kernel,
        CorruptionManifest {
            cells,
            pair_mass,
            generator: GENERATOR_ID,
            seed,
        },
    ))
}

/// Covers the points by index sets of pairwise distance at most `delta`
/// under the given kernel, by a first-fit greedy sweep. The result is a
/// partition: each point joins the first set whose members all lie within
/// `delta` of it, or starts a new set.
pub fn essential_diameter_sets<T: Scalar>(kernel: &Kernel<T>, delta: T) -> Result<Vec<Vec<usize>>> {
    if delta <= T::zero() {
        return Err(Error::NonPositiveParameter { name: "delta" });
    }
    let n = kernel.len();
    let mut sets: Vec<Vec<usize>> = Vec::new();
    for p in 0..n {
        let mut placed = false;
        for set in sets.iter_mut() {
            if set.iter().all(|&q| kernel.at(p, q) <= delta) {
                set.push(p);
                placed = true;
                break;
            }
        }
        if !placed {
            sets.push(vec![p]);
        }
    }
    Ok(sets)
}
