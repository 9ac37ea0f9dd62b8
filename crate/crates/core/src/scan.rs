//! Triple scans for triangle and ultrametric defects.
//!
//! A triple `(x, y, z)` of point indices violates the triangle inequality
//! when `k[x][z] - k[x][y] - k[y][z]` exceeds the tolerance, and the
//! ultrametric inequality when `k[x][z] - max(k[x][y], k[y][z])` does.
//! Exact scans walk all `n^3` ordered triples (degenerate triples with
//! repeated indices included; with a zero diagonal they never violate).
//! The violating mass is the product-measure weight of the violating
//! ordered triples, the finite stand-in for "almost all triples".
//!
//! Determinism contract: the scan is partitioned by leading index `x`;
//! each partition accumulates sequentially in `(y, z)` order, and partials
//! are folded in ascending `x` order. Results are therefore bit-identical
//! for any rayon worker count. Partial maxima combine by (defect
//! descending, triple lexicographic ascending).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::scalar::Scalar;
use crate::space::PointSpace;

/// How a scan walks the triple space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanMode {
    /// All `n^3` ordered triples.
    Exact,
    /// `count` triples drawn i.i.d. from the product measure.
    Sampled { count: u64, seed: u64 },
}

/// Which defect a scan measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefectKind {
    Triangle,
    Ultrametric,
}

/// Outcome of a defect scan.
///
/// `max_defect` is the largest defect over the scanned triples, clamped
/// at zero; `witness`, when present, is the lexicographically smallest
/// triple attaining it. `violating_mass` is the product-measure mass of
/// the violating ordered triples (in sampled mode, the violating fraction
/// of the sample).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationReport<T: Scalar> {
    pub max_defect: T,
    pub witness: Option<[usize; 3]>,
    pub violating_mass: T,
    pub count_checked: u64,
    pub mode: &'static str,
}

/// Default violation tolerance: `1e-12 + 1e-9 * max finite entry`.
/// Separates float noise from genuine defects across kernel scales.
pub fn default_tolerance<T: Scalar>(kernel: &Kernel<T>) -> T {
    let abs = T::from_f64(1e-12).unwrap();
    let rel = T::from_f64(1e-9).unwrap();
    abs + rel * kernel.max_finite_entry()
}

#[inline]
fn defect_at<T: Scalar>(kind: DefectKind, xz: T, xy: T, yz: T) -> T {
    match kind {
        DefectKind::Triangle => xz - xy - yz,
        DefectKind::Ultrametric => xz - if xy > yz { xy } else { yz },
    }
}

struct RowPartial<T> {
    max_defect: T,
    witness: Option<[usize; 3]>,
    violating_mass: T,
}

/// Scans every ordered triple of `kernel` for defects of the given kind.
///
/// Errors on non-finite entries (infinities must be patched first), on a
/// kernel/space dimension mismatch, and on an empty sample request.
pub fn defect_scan<T: Scalar>(
    kernel: &Kernel<T>,
    space: &PointSpace<T>,
    tolerance: T,
    mode: ScanMode,
    kind: DefectKind,
) -> Result<ViolationReport<T>> {
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
    match mode {
        ScanMode::Exact => exact_scan(kernel, space, tolerance, kind),
        ScanMode::Sampled { count, seed } => {
            if count == 0 {
                return Err(Error::EmptySample);
            }
            sampled_scan(kernel, space, tolerance, kind, count, seed)
        }
    }
}

fn exact_scan<T: Scalar>(
    kernel: &Kernel<T>,
    space: &PointSpace<T>,
    tolerance: T,
    kind: DefectKind,
) -> Result<ViolationReport<T>> {
    let n = kernel.len();
    let masses = space.masses();

    let partials: Vec<RowPartial<T>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let rx = kernel.row(x);
            let mut max_defect = T::neg_infinity();
            let mut witness = None;
            // Sum of m_y * m_z over violating (y, z); scaled by m_x once at
            // the end so the partial is a fixed function of the row.
            let mut pair_mass = T::zero();
            for y in 0..n {
                let xy = rx[y];
                let ry = kernel.row(y);
                let my = masses[y];
                for z in 0..n {
                    let d = defect_at(kind, rx[z], xy, ry[z]);
                    if d > max_defect {
                        max_defect = d;
                        witness = Some([x, y, z]);
                    }
                    if d > tolerance {
                        pair_mass = pair_mass + my * masses[z];
                    }
                }
            }
            RowPartial {
                max_defect,
                witness,
                violating_mass: masses[x] * pair_mass,
            }
        })
        .collect();

    // Sequential fold in ascending x keeps the result independent of the
    // parallel schedule.
    let mut max_defect = T::neg_infinity();
    let mut witness = None;
    let mut violating_mass = T::zero();
    for p in partials {
        if p.max_defect > max_defect {
            max_defect = p.max_defect;
            witness = p.witness;
        }
        violating_mass = violating_mass + p.violating_mass;
    }

    let (max_defect, witness) = clamp_report(max_defect, witness);
    Ok(ViolationReport {
        max_defect,
        witness,
        violating_mass,
        count_checked: (n as u64).pow(3),
        mode: "exact",
    })
}

fn clamp_report<T: Scalar>(raw_max: T, witness: Option<[usize; 3]>) -> (T, Option<[usize; 3]>) {
    if raw_max >= T::zero() {
        (raw_max, witness)
    } else {
        // Every scanned defect was negative (possible only with a nonzero
        // diagonal); report zero with no witness.
        (T::zero(), None)
    }
}

/// Cumulative-mass table for product-measure sampling. Zero-mass points
/// have empty intervals and are never drawn.
pub(crate) struct MassSampler<T: Scalar> {
    cumulative: Vec<T>,
}

impl<T: Scalar> MassSampler<T> {
    pub(crate) fn new(space: &PointSpace<T>) -> Result<Self> {
        let total = space.positive_mass();
        if total <= T::zero() {
            return Err(Error::AllMassesZero);
        }
        let mut cumulative = Vec::with_capacity(space.len());
        let mut acc = T::zero();
        for &m in space.masses() {
            acc = acc + m / total;
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = T::infinity(); // guard against rounding shortfall
        }
        Ok(Self { cumulative })
    }

    pub(crate) fn draw(&self, rng: &mut impl Rng) -> usize {
        let u = T::from_f64(rng.gen::<f64>()).unwrap();
        // First index whose cumulative mass strictly exceeds u.
        let mut lo = 0usize;
        let mut hi = self.cumulative.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.cumulative[mid] > u {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }
}

fn sampled_scan<T: Scalar>(
    kernel: &Kernel<T>,
    space: &PointSpace<T>,
    tolerance: T,
    kind: DefectKind,
    count: u64,
    seed: u64,
) -> Result<ViolationReport<T>> {
    let sampler = MassSampler::new(space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_defect = T::neg_infinity();
    let mut witness: Option<[usize; 3]> = None;
    let mut violating = 0u64;
    for _ in 0..count {
        let x = sampler.draw(&mut rng);
        let y = sampler.draw(&mut rng);
        let z = sampler.draw(&mut rng);
        let d = defect_at(kind, kernel.at(x, z), kernel.at(x, y), kernel.at(y, z));
        let triple = [x, y, z];
        let beats = d > max_defect || (d == max_defect && Some(triple) < witness);
        if beats {
            max_defect = d;
            witness = Some(triple);
        }
        if d > tolerance {
            violating += 1;
        }
    }
    let (max_defect, witness) = clamp_report(max_defect, witness);
    let violating_mass = T::from_u64(violating).unwrap() / T::from_u64(count).unwrap();
    Ok(ViolationReport {
        max_defect,
        witness,
        violating_mass,
        count_checked: count,
        mode: "sampled",
    })
}

/// Triangle-inequality defect scan over all ordered triples.
pub fn triangle_defect_scan<T: Scalar>(
    kernel: &Kernel<T>,
    space: &PointSpace<T>,
    tolerance: T,
    mode: ScanMode,
) -> Result<ViolationReport<T>> {
    defect_scan(kernel, space, tolerance, mode, DefectKind::Triangle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Provenance;

    fn three_point_defect_kernel() -> Kernel<f64> {
        // d(0,1) = d(1,2) = 1, d(0,2) = 3: one broken long edge.
        let mut k = Kernel::zeros(3);
        k.set_sym(0, 1, 1.0);
        k.set_sym(1, 2, 1.0);
        k.set_sym(0, 2, 3.0);
        k
    }

    /// Independent oracle: enumerate all ordered triples directly.
    fn oracle_scan(
        k: &Kernel<f64>,
        masses: &[f64],
        tol: f64,
        kind: DefectKind,
    ) -> (f64, Option<[usize; 3]>, f64) {
        let n = k.len();
        let mut max_d = f64::NEG_INFINITY;
        let mut wit = None;
        let mut mass = 0.0;
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    let d = match kind {
                        DefectKind::Triangle => k.at(x, z) - k.at(x, y) - k.at(y, z),
                        DefectKind::Ultrametric => k.at(x, z) - k.at(x, y).max(k.at(y, z)),
                    };
                    if d > max_d {
                        max_d = d;
                        wit = Some([x, y, z]);
                    }
                    if d > tol {
                        mass += masses[x] * masses[y] * masses[z];
                    }
                }
            }
        }
        (max_d.max(0.0), wit, mass)
    }

    #[test]
    fn three_point_instance_matches_hand_enumeration() {
        let k = three_point_defect_kernel();
        let s = PointSpace::circle(3).unwrap();
        let r = triangle_defect_scan(&k, &s, 1e-9, ScanMode::Exact).unwrap();
        assert_eq!(r.max_defect, 1.0);
        assert_eq!(r.witness, Some([0, 1, 2]));
        // Exactly (0,1,2) and (2,1,0) violate: mass 2/27.
        assert!((r.violating_mass - 2.0 / 27.0).abs() < 1e-15);
        assert_eq!(r.count_checked, 27);

        let (om, ow, omass) = oracle_scan(&k, s.masses(), 1e-9, DefectKind::Triangle);
        assert_eq!(r.max_defect, om);
        assert_eq!(r.witness, ow);
        assert!((r.violating_mass - omass).abs() < 1e-15);
    }

    #[test]
    fn one_point_space_has_no_defect() {
        let k = Kernel::<f64>::zeros(1);
        let s = PointSpace::circle(1).unwrap();
        let r = triangle_defect_scan(&k, &s, 0.0, ScanMode::Exact).unwrap();
        assert_eq!(r.max_defect, 0.0);
        assert_eq!(r.violating_mass, 0.0);
        assert_eq!(r.witness, Some([0, 0, 0]));
    }

    #[test]
    fn circle_metric_is_clean() {
        let n = 8;
        let k = Kernel::from_fn(n, Provenance::Generated, |i, j| {
            let d = (i as i64 - j as i64).unsigned_abs() as usize;
            let d = d.min(n - d);
            d as f64 / n as f64
        });
        let s = PointSpace::circle(n).unwrap();
        let r = triangle_defect_scan(&k, &s, 1e-12, ScanMode::Exact).unwrap();
        assert_eq!(r.violating_mass, 0.0);
        assert!(r.max_defect <= 1e-12);
    }

    #[test]
    fn infinite_entries_are_refused() {
        let mut k = Kernel::<f64>::zeros(2);
        k.set_sym(0, 1, f64::INFINITY);
        let s = PointSpace::circle(2).unwrap();
        let err = triangle_defect_scan(&k, &s, 0.0, ScanMode::Exact).unwrap_err();
        assert_eq!(err, Error::NonFiniteEntry { i: 0, j: 1 });
    }

    #[test]
    fn empty_sample_is_an_error() {
        let k = Kernel::<f64>::zeros(2);
        let s = PointSpace::circle(2).unwrap();
        let err =
            triangle_defect_scan(&k, &s, 0.0, ScanMode::Sampled { count: 0, seed: 1 }).unwrap_err();
        assert_eq!(err, Error::EmptySample);
    }

    #[test]
    fn sampled_mode_is_reproducible() {
        let k = three_point_defect_kernel();
        let s = PointSpace::circle(3).unwrap();
        let mode = ScanMode::Sampled {
            count: 500,
            seed: 42,
        };
        let a = triangle_defect_scan(&k, &s, 1e-9, mode).unwrap();
        let b = triangle_defect_scan(&k, &s, 1e-9, mode).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mode, "sampled");
        assert_eq!(a.count_checked, 500);
    }

    #[test]
    fn zero_mass_points_are_never_sampled() {
        let mut k = Kernel::<f64>::zeros(3);
        k.set_sym(0, 2, 100.0);
        k.set_sym(1, 2, 100.0);
        let s = PointSpace::new(vec![0.5, 0.5, 0.0], crate::space::Layout::Unordered).unwrap();
        let r = triangle_defect_scan(
            &k,
            &s,
            1e-9,
            ScanMode::Sampled {
                count: 2000,
                seed: 7,
            },
        )
        .unwrap();
        // Point 2 carries every large entry; with mass 0 it never shows up.
        assert_eq!(r.max_defect, 0.0);
        assert_eq!(r.violating_mass, 0.0);
    }

    #[test]
    fn ultrametric_defect_differs_from_triangle() {
        // d(0,1) = d(1,2) = 1, d(0,2) = 2: triangle-clean, ultrametric-broken.
        let mut k = Kernel::zeros(3);
        k.set_sym(0, 1, 1.0);
        k.set_sym(1, 2, 1.0);
        k.set_sym(0, 2, 2.0);
        let s = PointSpace::circle(3).unwrap();
        let tri = defect_scan(&k, &s, 1e-9, ScanMode::Exact, DefectKind::Triangle).unwrap();
        let ultra = defect_scan(&k, &s, 1e-9, ScanMode::Exact, DefectKind::Ultrametric).unwrap();
        assert_eq!(tri.max_defect, 0.0);
        assert_eq!(tri.violating_mass, 0.0);
        assert_eq!(ultra.max_defect, 1.0);
        assert_eq!(ultra.witness, Some([0, 1, 2]));
        let (om, ow, omass) = oracle_scan(&k, s.masses(), 1e-9, DefectKind::Ultrametric);
        assert_eq!(ultra.max_defect, om);
        assert_eq!(ultra.witness, ow);
        assert!((ultra.violating_mass - omass).abs() < 1e-15);
    }
}
