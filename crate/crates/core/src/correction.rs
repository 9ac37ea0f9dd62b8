//! The semimetric correction pipeline.
//!
//! Four stages, composable but independently callable:
//!
//! 1. [`renormalize_measure`] replaces the masses by an equivalent set
//!    under which the distance-to-base-point function has finite weighted
//!    sum (dyadic damping of the level sets of the base row).
//! 2. [`window_average`] smooths the kernel by forward-anchored cyclic
//!    window averages in both coordinates; averaging a semimetric yields a
//!    semimetric because the pointwise triangle inequality survives
//!    integration over the three window offsets.
//! 3. [`limsup_correct`] combines window averages across a ladder of
//!    scales (the per-entry maximum over the finest scales is the discrete
//!    stand-in for an upper limit as the window shrinks) and zeroes the
//!    diagonal.
//! 4. [`patch_from_basepoint`] extends a semimetric from a full-measure
//!    subset to the whole space by collapsing the complement onto a base
//!    point; the output is a pullback and hence a semimetric everywhere.
//!
//! [`separable_support`] extracts the admissible core: the points covered
//! by finite greedy ball covers at every requested radius.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{Kernel, Provenance};
use crate::scalar::Scalar;
use crate::space::{Layout, PointSpace};

/// How the ladder of window averages is collapsed into one kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    /// Value at the smallest window.
    Finest,
    /// Per-entry maximum over the `L` smallest windows.
    MaxOverTail(usize),
}

/// Parameters of the ladder correction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectionParams {
    /// Window sizes, strictly ascending; every window must divide `n`.
    pub ladder: Vec<usize>,
    pub tail_mode: TailMode,
}

impl CorrectionParams {
    /// Single-window ladder, `Finest` tail.
    pub fn single(w: usize) -> Self {
        Self {
            ladder: vec![w],
            tail_mode: TailMode::Finest,
        }
    }

    /// Dyadic ladder `{w_min, 2 w_min, ..., <= w_max}` with the default
    /// tail (maximum over the two smallest windows).
    pub fn dyadic(w_min: usize, w_max: usize) -> Result<Self> {
        if w_min == 0 || w_max < w_min {
            return Err(Error::InvalidLadder {
                reason: format!("need 1 <= w_min <= w_max, got {w_min}..{w_max}"),
            });
        }
        let mut ladder = Vec::new();
        let mut w = w_min;
        while w <= w_max {
            ladder.push(w);
            w *= 2;
        }
        Ok(Self {
            ladder,
            tail_mode: TailMode::MaxOverTail(2),
        })
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.ladder.is_empty() {
            return Err(Error::InvalidLadder {
                reason: "ladder is empty".into(),
            });
        }
        for pair in self.ladder.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::InvalidLadder {
                    reason: "ladder windows must be strictly ascending".into(),
                });
            }
        }
        for &w in &self.ladder {
            if w == 0 || n % w != 0 {
                return Err(Error::WindowDoesNotDivide { w, n });
            }
        }
        if let TailMode::MaxOverTail(l) = self.tail_mode {
            if l == 0 || l > self.ladder.len() {
                return Err(Error::InvalidLadder {
                    reason: format!(
                        "tail length {l} must lie in 1..={}",
                        self.ladder.len()
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Full-measure subset and base point used by [`patch_from_basepoint`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatchSpec {
    /// Retained point set, ascending indices.
    pub s1: Vec<usize>,
    /// Base point; must belong to `s1`.
    pub x0: usize,
}

/// Result of a measure renormalization.
#[derive(Debug, Clone)]
pub struct RenormalizedSpace<T: Scalar> {
    pub space: PointSpace<T>,
    /// Points whose base-row value is `+inf`; they received mass zero.
    pub infinite_points: Vec<usize>,
}

/// Replaces the masses by an equivalent (same null sets among finite
/// rows) probability vector under which the base row `f(t) = k[x0][t]`
/// has finite weighted sum. Points in the level set `f in [k-1, k)` are
/// damped by `2^-k`; points with `f = +inf` get mass zero and are
/// reported.
pub fn renormalize_measure<T: Scalar>(
    space: &PointSpace<T>,
    kernel: &Kernel<T>,
    x0: usize,
) -> Result<RenormalizedSpace<T>> {
    let n = space.len();
    if kernel.len() != n {
        return Err(Error::DimensionMismatch {
            kernel: kernel.len(),
            space: n,
        });
    }
    if x0 >= n {
        return Err(Error::IndexOutOfRange { index: x0, n });
    }
    let row = kernel.row(x0);

    // Bucket index k >= 1 for finite values: f in [k-1, k).
    let bucket = |f: T| -> u32 { f.to_f64().unwrap().floor() as u32 + 1 };
    let mut min_bucket = u32::MAX;
    for &f in row {
        if f.is_finite() {
            min_bucket = min_bucket.min(bucket(f));
        }
    }
    if min_bucket == u32::MAX {
        return Err(Error::NoFiniteMass);
    }

    let half = T::from_f64(0.5).unwrap();
    let mut infinite_points = Vec::new();
    let mut weights = vec![T::zero(); n];
    for (t, &f) in row.iter().enumerate() {
        if !f.is_finite() {
            infinite_points.push(t);
            continue;
        }
        // Shift by the smallest occupied bucket; the normalization constant
        // absorbs the shift, and small weighted spaces stay away from
        // underflow.
        let shift = bucket(f) - min_bucket;
        weights[t] = half.powi(shift as i32) * space.mass(t);
    }
    let total: T = weights.iter().fold(T::zero(), |a, &w| a + w);
    if total <= T::zero() {
        return Err(Error::NoFiniteMass);
    }
    let masses: Vec<T> = weights.into_iter().map(|w| w / total).collect();
    Ok(RenormalizedSpace {
        space: PointSpace::new_unchecked(masses, Layout::Unordered),
        infinite_points,
    })
}

fn require_circle<T: Scalar>(space: &PointSpace<T>) -> Result<()> {
    if space.layout() != Layout::Circle {
        return Err(Error::RequiresCircleLayout);
    }
    Ok(())
}

fn check_window<T: Scalar>(kernel: &Kernel<T>, space: &PointSpace<T>, w: usize) -> Result<()> {
    let n = kernel.len();
    if n != space.len() {
        return Err(Error::DimensionMismatch {
            kernel: n,
            space: space.len(),
        });
    }
    require_circle(space)?;
    if w == 0 || n % w != 0 {
        return Err(Error::WindowDoesNotDivide { w, n });
    }
    if kernel.first_non_finite().is_some() {
        // Every entry lands in some window once all anchors are computed;
        // report the lexicographically first offending anchor.
        let (x, y) = first_bad_anchor(kernel, w);
        return Err(Error::NonFiniteWindow { x, y });
    }
    Ok(())
}

fn first_bad_anchor<T: Scalar>(kernel: &Kernel<T>, w: usize) -> (usize, usize) {
    let n = kernel.len();
    // bad_row[i][y] = row i has a non-finite entry in columns [y, y+w).
    let mut bad_row = vec![false; n * n];
    for i in 0..n {
        for y in 0..n {
            let mut bad = false;
            for s in 0..w {
                if !kernel.at(i, (y + s) % n).is_finite() {
                    bad = true;
                    break;
                }
            }
            bad_row[i * n + y] = bad;
        }
    }
    for x in 0..n {
        for y in 0..n {
            for t in 0..w {
                if bad_row[((x + t) % n) * n + y] {
                    return (x, y);
                }
            }
        }
    }
    unreachable!("called only when a non-finite entry exists")
}

/// Forward-anchored two-sided cyclic window average:
/// `out[x][y] = w^-2 * sum_{t,s < w} k[(x+t) mod n][(y+s) mod n]`.
///
/// Requires circle layout and `w | n`; refuses any non-finite entry. The
/// output is mirrored from the upper triangle so that it is symmetric
/// exactly as stored.
pub fn window_average<T: Scalar>(
    kernel: &Kernel<T>,
    space: &PointSpace<T>,
    w: usize,
) -> Result<Kernel<T>> {
    check_window(kernel, space, w)?;
    let n = kernel.len();
    let norm = T::one() / (T::from_count(w) * T::from_count(w));

    // Row-window sums: rs[i][y] = sum_{s < w} k[i][(y+s) mod n].
    let rs: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = kernel.row(i);
            (0..n)
                .map(|y| {
                    let mut acc = T::zero();
                    for s in 0..w {
                        acc = acc + row[(y + s) % n];
                    }
                    acc
                })
                .collect()
        })
        .collect();

    // Upper triangle, then mirror.
    let uppers: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|x| {
            (x..n)
                .map(|y| {
                    let mut acc = T::zero();
                    for t in 0..w {
                        acc = acc + rs[(x + t) % n][y];
                    }
                    acc * norm
                })
                .collect()
        })
        .collect();

    let mut out = Kernel::zeros(n);
    out.set_meta(kernel.meta());
    for x in 0..n {
        for (off, &v) in uppers[x].iter().enumerate() {
            out.set_sym(x, x + off, v);
        }
    }
    Ok(out)
}

/// Per-entry maximum over the row-window and column-window of `kernel`,
/// the `p -> inf` limit of the power means.
pub(crate) fn window_max<T: Scalar>(
    kernel: &Kernel<T>,
    space: &PointSpace<T>,
    w: usize,
) -> Result<Kernel<T>> {
    check_window(kernel, space, w)?;
    let n = kernel.len();
    let rs: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = kernel.row(i);
            (0..n)
                .map(|y| {
                    let mut acc = T::neg_infinity();
                    for s in 0..w {
                        let v = row[(y + s) % n];
                        if v > acc {
                            acc = v;
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let uppers: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|x| {
            (x..n)
                .map(|y| {
                    let mut acc = T::neg_infinity();
                    for t in 0..w {
                        let v = rs[(x + t) % n][y];
                        if v > acc {
                            acc = v;
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let mut out = Kernel::zeros(n);
    out.set_meta(kernel.meta());
    for x in 0..n {
        for (off, &v) in uppers[x].iter().enumerate() {
            out.set_sym(x, x + off, v);
        }
    }
    Ok(out)
}

/// Ladder correction: window averages at every ladder scale, combined
/// per entry by the tail mode, diagonal zeroed. The per-entry maximum
/// over the finest scales plays the role of the upper limit as the
/// averaging window shrinks to zero.
pub fn limsup_correct<T: Scalar>(
    kernel: &Kernel<T>,
    space: &PointSpace<T>,
    params: &CorrectionParams,
) -> Result<Kernel<T>> {
    params.validate(kernel.len())?;
    let averages: Vec<Kernel<T>> = params
        .ladder
        .iter()
        .map(|&w| window_average(kernel, space, w))
        .collect::<Result<_>>()?;

    let tail = match params.tail_mode {
        TailMode::Finest => 1,
        TailMode::MaxOverTail(l) => l,
    };
    let n = kernel.len();
    let mut out = averages[0].clone();
    for avg in averages.iter().take(tail).skip(1) {
        for x in 0..n {
            for y in 0..n {
                if avg.at(x, y) > out.at(x, y) {
                    out.set_raw(x, y, avg.at(x, y));
                }
            }
        }
    }
    let mut out = out.with_zero_diagonal();
    out.set_meta(Provenance::Corrected);
    Ok(out)
}

/// Extends the restriction of `kernel` to `s1` to the whole index set by
/// collapsing the complement of `s1` onto the base point `x0`:
/// rows outside `s1` copy the base row homoited to `s1`, and pairs fully
/// outside `s1` are at distance zero. Because the output is the pullback
/// of the `s1`-restriction under that collapse, it satisfies the triangle
/// inequality everywhere as soon as the restriction does; the
/// preconditions (finite `s1` square with semimetric defect at most
/// `tolerance`, near-zero diagonal) are checked and failures are loud.
pub fn patch_from_basepoint<T: Scalar>(
    kernel: &Kernel<T>,
    patch: &PatchSpec,
    tolerance: T,
) -> Result<Kernel<T>> {
    let n = kernel.len();
    for &i in &patch.s1 {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
    }
    if !patch.s1.contains(&patch.x0) {
        return Err(Error::BasePointOutsidePatchSet { x0: patch.x0 });
    }

    // Precondition: finite entries and near-zero diagonal on s1 x s1.
    for &i in &patch.s1 {
        for &j in &patch.s1 {
            if !kernel.at(i, j).is_finite() {
                return Err(Error::PatchPreconditionFailed {
                    reason: format!("non-finite entry at ({i}, {j}) inside the patch set"),
                });
            }
        }
        let d = kernel.at(i, i);
        if d.abs() > tolerance {
            return Err(Error::PatchPreconditionFailed {
                reason: format!("diagonal entry {d} at point {i} exceeds the tolerance"),
            });
        }
    }
    // Precondition: triangle inequality on s1 x s1 within tolerance.
    for &x in &patch.s1 {
        for &y in &patch.s1 {
            for &z in &patch.s1 {
                let d = kernel.at(x, z) - kernel.at(x, y) - kernel.at(y, z);
                if d > tolerance {
                    return Err(Error::PatchPreconditionFailed {
                        reason: format!(
                            "triangle defect {d} at ({x}, {y}, {z}) inside the patch set"
                        ),
                    });
                }
            }
        }
    }

    let mut in_s1 = vec![false; n];
    for &i in &patch.s1 {
        in_s1[i] = true;
    }
    // Collapse map: identity on s1, x0 elsewhere.
    let collapse: Vec<usize> = (0..n).map(|i| if in_s1[i] { i } else { patch.x0 }).collect();
    let mut out = Kernel::from_fn(n, Provenance::Corrected, |i, j| {
        kernel.at(collapse[i], collapse[j])
    });
    out = out.with_zero_diagonal();
    Ok(out)
}

/// One greedy ball cover at a fixed radius.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallCover {
    pub epsilon: f64,
    pub centers: Vec<usize>,
    /// Indices inside the union of the selected balls, ascending.
    pub covered: Vec<usize>,
    pub covered_mass: f64,
}

/// Separable-support extraction result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportResult {
    /// Points covered at every ladder radius whose own balls all carry
    /// positive mass, ascending.
    pub retained: Vec<usize>,
    pub retained_mass: f64,
    pub covers: Vec<BallCover>,
}

/// Greedy ball covers at every ladder radius; the retained set is the
/// intersection of the covered sets, minus points around which some ball
/// of a ladder radius has zero mass. When the space is admissible at
/// every scale the retained mass equals the total positive mass.
pub fn separable_support<T: Scalar>(
    kernel: &Kernel<T>,
    space: &PointSpace<T>,
    epsilon_ladder: &[T],
) -> Result<SupportResult> {
    if epsilon_ladder.is_empty() {
        return Err(Error::EmptyLadder);
    }
    let n = kernel.len();
    if n != space.len() {
        return Err(Error::DimensionMismatch {
            kernel: n,
            space: space.len(),
        });
    }
    if let Some((i, j)) = kernel.first_non_finite() {
        return Err(Error::NonFiniteEntry { i, j });
    }

    let mut in_all = vec![true; n];
    let mut dropped = vec![false; n];
    let mut covers = Vec::with_capacity(epsilon_ladder.len());
    for &eps in epsilon_ladder {
        let cover = greedy_cover(kernel, space, eps);
        let mut covered_flag = vec![false; n];
        for &i in &cover.covered {
            covered_flag[i] = true;
        }
        for i in 0..n {
            in_all[i] &= covered_flag[i];
            let ball_mass: T = (0..n)
                .filter(|&j| kernel.at(i, j) <= eps)
                .fold(T::zero(), |a, j| a + space.mass(j));
            if ball_mass == T::zero() {
                dropped[i] = true;
            }
        }
        covers.push(cover);
    }
    let retained: Vec<usize> = (0..n).filter(|&i| in_all[i] && !dropped[i]).collect();
    let retained_mass = space.mass_of(&retained).to_f64().unwrap();
    Ok(SupportResult {
        retained,
        retained_mass,
        covers,
    })
}

/// Greedy maximum-coverage: add the center (any index, ties to the lowest)
/// whose closed `eps`-ball adds the most uncovered mass, until all
/// positive mass is covered or no candidate makes progress.
fn greedy_cover<T: Scalar>(kernel: &Kernel<T>, space: &PointSpace<T>, eps: T) -> BallCover {
    let n = kernel.len();
    let mut covered = vec![false; n];
    let mut centers = Vec::new();
    let target = space.positive_mass();
    let mut covered_mass = T::zero();
    loop {
        if covered_mass >= target {
            break;
        }
        let mut best: Option<(T, usize)> = None;
        for c in 0..n {
            let mut gain = T::zero();
            for j in 0..n {
                if !covered[j] && kernel.at(c, j) <= eps {
                    gain = gain + space.mass(j);
                }
            }
            let beats = match best {
                None => gain > T::zero(),
                Some((g, _)) => gain > g,
            };
            if beats {
                best = Some((gain, c));
            }
        }
        let Some((_, c)) = best else {
            break; // no candidate adds mass: uncoverable remainder
        };
        centers.push(c);
        for j in 0..n {
            if kernel.at(c, j) <= eps {
                covered[j] = true;
            }
        }
        // Recompute from scratch in index order so the stopping test does
        // not depend on the accumulation history.
        covered_mass = (0..n)
            .filter(|&j| covered[j])
            .fold(T::zero(), |a, j| a + space.mass(j));
    }
    let covered_idx: Vec<usize> = (0..n).filter(|&j| covered[j]).collect();
    BallCover {
        epsilon: eps.to_f64().unwrap(),
        centers,
        covered: covered_idx,
        covered_mass: covered_mass.to_f64().unwrap(),
    }
}
