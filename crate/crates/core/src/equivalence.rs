//! Coincidence extraction for kernels that agree off a sparse pair set.
//!
//! Two kernels equal almost everywhere must, on an admissible space,
//! agree exactly on a full-measure subset. The finite analog: build the
//! graph of disagreeing pairs over the positive-mass points and remove a
//! minimum-mass vertex cover; what remains agrees pairwise. The transfer
//! check then replays the inequality that powers the continuum argument:
//! route `k2[x1][x2]` through a witness in a small `k1`-ball on which
//! both kernels agree.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::scalar::Scalar;
use crate::scan::MassSampler;
use crate::space::PointSpace;

/// How the vertex cover is found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverMethod {
    GreedyCover,
    ExactCover,
}

/// A removed point together with its incident disagreement mass in the
/// original graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemovedPoint {
    pub index: usize,
    pub incident_mass: f64,
}

/// Result of a coincidence extraction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoincidenceResult {
    /// Points kept; no pair inside disagrees beyond the tolerance.
    pub retained: Vec<usize>,
    pub retained_mass: f64,
    pub removed: Vec<RemovedPoint>,
    pub method: CoverMethod,
}

fn check_dims<T: Scalar>(k1: &Kernel<T>, k2: &Kernel<T>, space: &PointSpace<T>) -> Result<()> {
    if k1.len() != k2.len() {
        return Err(Error::KernelDimensionMismatch {
            left: k1.len(),
            right: k2.len(),
        });
    }
    if k1.len() != space.len() {
        return Err(Error::DimensionMismatch {
            kernel: k1.len(),
            space: space.len(),
        });
    }
    for k in [k1, k2] {
        if let Some((i, j)) = k.first_non_finite() {
            return Err(Error::NonFiniteEntry { i, j });
        }
    }
    Ok(())
}

/// Edges `(x, y)`, `x < y`, between positive-mass points where the two
/// kernels differ by more than the tolerance. Sorted lexicographically.
pub fn disagreement_graph<T: Scalar>(
    k1: &Kernel<T>,
    k2: &Kernel<T>,
    space: &PointSpace<T>,
    tolerance: T,
) -> Result<Vec<(usize, usize)>> {
    check_dims(k1, k2, space)?;
    let pos = space.positive_points();
    let mut edges = Vec::new();
    for (a, &x) in pos.iter().enumerate() {
        for &y in &pos[a + 1..] {
            if (k1.at(x, y) - k2.at(x, y)).abs() > tolerance {
                edges.push((x, y));
            }
        }
    }
    Ok(edges)
}

fn incident_masses<T: Scalar>(
    edges: &[(usize, usize)],
    space: &PointSpace<T>,
    n: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for &(x, y) in edges {
        let w = (space.mass(x) * space.mass(y)).to_f64().unwrap();
        out[x] += w;
        out[y] += w;
    }
    out
}

/// Extracts a maximal agreeing subset by removing a vertex cover of the
/// disagreement graph.
///
/// `GreedyCover` repeatedly removes the vertex with the largest incident
/// disagreement mass over the remaining edges (ties: larger remaining
/// degree, then lower index). `ExactCover` finds the minimum-total-mass
/// cover by branch-and-bound, maximizing the retained mass; it refuses
/// spaces above 20 points.
pub fn coincidence_support<T: Scalar>(
    k1: &Kernel<T>,
    k2: &Kernel<T>,
    space: &PointSpace<T>,
    tolerance: T,
    method: CoverMethod,
) -> Result<CoincidenceResult> {
    let edges = disagreement_graph(k1, k2, space, tolerance)?;
    let n = k1.len();
    let original_incident = incident_masses(&edges, space, n);

    let removed_set: Vec<usize> = match method {
        CoverMethod::GreedyCover => greedy_cover(&edges, space, n),
        CoverMethod::ExactCover => {
            const EXACT_COVER_LIMIT: usize = 20;
            if n > EXACT_COVER_LIMIT {
                return Err(Error::SizeLimitExceeded {
                    n,
                    limit: EXACT_COVER_LIMIT,
                });
            }
            exact_cover(&edges, space)
        }
    };

    let mut removed_flag = vec![false; n];
    for &v in &removed_set {
        removed_flag[v] = true;
    }
    let retained: Vec<usize> = space
        .positive_points()
        .into_iter()
        .filter(|&v| !removed_flag[v])
        .collect();
    let retained_mass = space.mass_of(&retained).to_f64().unwrap();
    let mut removed: Vec<RemovedPoint> = removed_set
        .into_iter()
        .map(|v| RemovedPoint {
            index: v,
            incident_mass: original_incident[v],
        })
        .collect();
    removed.sort_by_key(|r| r.index);
    Ok(CoincidenceResult {
        retained,
        retained_mass,
        removed,
        method,
    })
}

fn greedy_cover<T: Scalar>(edges: &[(usize, usize)], space: &PointSpace<T>, n: usize) -> Vec<usize> {
    let mut remaining: Vec<(usize, usize)> = edges.to_vec();
    let mut removed = Vec::new();
    while !remaining.is_empty() {
        let incident = incident_masses(&remaining, space, n);
        let mut degree = vec![0usize; n];
        for &(x, y) in &remaining {
            degree[x] += 1;
            degree[y] += 1;
        }
        let mut best = usize::MAX;
        for v in 0..n {
            if degree[v] == 0 {
                continue;
            }
            if best == usize::MAX {
                best = v;
                continue;
            }
            let better = incident[v] > incident[best]
                || (incident[v] == incident[best] && degree[v] > degree[best]);
            if better {
                best = v;
            }
        }
        removed.push(best);
        remaining.retain(|&(x, y)| x != best && y != best);
    }
    removed.sort_unstable();
    removed
}

/// Minimum-mass vertex cover by branching on an uncovered edge.
fn exact_cover<T: Scalar>(edges: &[(usize, usize)], space: &PointSpace<T>) -> Vec<usize> {
    struct State<'a, T: Scalar> {
        edges: &'a [(usize, usize)],
        space: &'a PointSpace<T>,
        best_mass: f64,
        best: Vec<usize>,
    }
    fn branch<T: Scalar>(s: &mut State<T>, chosen: &mut Vec<usize>, mass: f64) {
        if mass >= s.best_mass {
            return;
        }
        let uncovered = s
            .edges
            .iter()
            .find(|&&(x, y)| !chosen.contains(&x) && !chosen.contains(&y));
        match uncovered {
            None => {
                s.best_mass = mass;
                s.best = chosen.clone();
            }
            Some(&(x, y)) => {
                for v in [x, y] {
                    chosen.push(v);
                    branch(s, chosen, mass + s.space.mass(v).to_f64().unwrap());
                    chosen.pop();
                }
            }
        }
    }
    let mut state = State {
        edges,
        space,
        best_mass: f64::INFINITY,
        best: Vec::new(),
    };
    // Seed the bound with the trivial cover of all endpoints.
    let mut all: Vec<usize> = edges.iter().flat_map(|&(x, y)| [x, y]).collect();
    all.sort_unstable();
    all.dedup();
    state.best_mass = space.mass_of(&all).to_f64().unwrap() + 1e-30;
    state.best = all;
    let mut chosen = Vec::new();
    branch(&mut state, &mut chosen, 0.0);
    let mut best = state.best;
    best.sort_unstable();
    best.dedup();
    best
}

/// One verified transfer-inequality trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferFailure {
    pub x1: usize,
    pub x2: usize,
    pub witness: Option<usize>,
    /// Which link of the chain broke, when a witness existed.
    pub step: &'static str,
}

/// Report of a transfer-inequality verification run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferReport {
    pub trials: u64,
    pub verified: u64,
    /// Pairs whose `k1`-ball of radius `r` held no agreeing witness.
    pub no_witness: Vec<(usize, usize)>,
    pub failures: Vec<TransferFailure>,
}

/// Samples pairs `(x1, x2)` from the retained set (mass-proportionally)
/// and verifies the transfer chain through the lowest-index witness `y`
/// with `k1[x1][y] < r` whose rows agree with both endpoints:
///
/// `k2[x1][x2] <= k2[x1][y] + k2[y][x2] = k1[x1][y] + k1[y][x2]
///             <= 2r + k1[x1][x2]`
///
/// Reports pairs without witnesses and any broken link. With two genuine
/// semimetrics agreeing on the retained square, every trial verifies.
pub fn transfer_inequality_check<T: Scalar>(
    k1: &Kernel<T>,
    k2: &Kernel<T>,
    space: &PointSpace<T>,
    retained: &[usize],
    r: T,
    tolerance: T,
    trials: u64,
    seed: u64,
) -> Result<TransferReport> {
    check_dims(k1, k2, space)?;
    if r <= T::zero() {
        return Err(Error::NonPositiveParameter { name: "r" });
    }
    if retained.is_empty() {
        return Err(Error::AllMassesZero);
    }
    for &v in retained {
        if v >= k1.len() {
            return Err(Error::IndexOutOfRange {
                index: v,
                n: k1.len(),
            });
        }
    }

    // Restricted sampler over the retained set.
    let total = space.mass_of(retained);
    if total <= T::zero() {
        return Err(Error::AllMassesZero);
    }
    let masses: Vec<T> = retained.iter().map(|&v| space.mass(v) / total).collect();
    let sub = PointSpace::new_unchecked(masses, crate::space::Layout::Unordered);
    let sampler = MassSampler::new(&sub)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Chain slack: two agreement substitutions plus float noise.
    let slack = tolerance + tolerance + T::from_f64(1e-12).unwrap();
    let agrees = |a: usize, b: usize| (k1.at(a, b) - k2.at(a, b)).abs() <= tolerance;

    let mut verified = 0u64;
    let mut no_witness = Vec::new();
    let mut failures = Vec::new();
    for _ in 0..trials {
        let x1 = retained[sampler.draw(&mut rng)];
        let x2 = retained[sampler.draw(&mut rng)];
        let witness = (0..k1.len()).find(|&y| k1.at(x1, y) < r && agrees(x1, y) && agrees(x2, y));
        let Some(y) = witness else {
            no_witness.push((x1, x2));
            continue;
        };
        let two_r = r + r;
        let step = if k2.at(x1, x2) > k2.at(x1, y) + k2.at(y, x2) + slack {
            Some("k2_triangle")
        } else if k1.at(x1, y) + k1.at(y, x2) > two_r + k1.at(x1, x2) + slack {
            Some("k1_chain")
        } else if k2.at(x1, x2) > two_r + k1.at(x1, x2) + slack + slack {
            Some("combined")
        } else {
            None
        };
        match step {
            None => verified += 1,
            Some(step) => failures.push(TransferFailure {
                x1,
                x2,
                witness: Some(y),
                step,
            }),
        }
    }
    Ok(TransferReport {
        trials,
        verified,
        no_witness,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{generate, Family, Instance, InstanceSpec};
    use crate::space::Layout;

    fn embedding(n: usize, seed: u64) -> Instance<f64> {
        generate(
            &InstanceSpec {
                family: Family::Embedding { dim: 2 },
                n,
                corruption: None,
                outliers: None,
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn identical_kernels_have_no_edges() {
        let inst = embedding(6, 0);
        let edges = disagreement_graph(&inst.kernel, &inst.kernel, &inst.space, 1e-12).unwrap();
        assert!(edges.is_empty());
        let r = coincidence_support(
            &inst.kernel,
            &inst.kernel,
            &inst.space,
            1e-12,
            CoverMethod::GreedyCover,
        )
        .unwrap();
        assert_eq!(r.retained.len(), 6);
        assert!((r.retained_mass - 1.0).abs() < 1e-12);
        assert!(r.removed.is_empty());
    }

    #[test]
    fn single_perturbed_pair_yields_one_edge() {
        let inst = embedding(8, 1);
        let mut k2 = inst.kernel.clone();
        k2.set_sym(2, 5, k2.at(2, 5) + 1.0);
        let edges = disagreement_graph(&inst.kernel, &k2, &inst.space, 1e-9).unwrap();
        assert_eq!(edges, vec![(2, 5)]);
    }

    #[test]
    fn perturbation_below_tolerance_is_ignored() {
        let inst = embedding(8, 1);
        let mut k2 = inst.kernel.clone();
        k2.set_sym(2, 5, k2.at(2, 5) + 1e-12);
        let edges = disagreement_graph(&inst.kernel, &k2, &inst.space, 1e-9).unwrap();
        assert!(edges.is_empty());
    }

    #[test]
    fn exact_cover_removes_the_lighter_endpoint() {
        let k1 = Kernel::<f64>::zeros(3);
        let mut k2 = k1.clone();
        k2.set_sym(0, 1, 1.0);
        // masses: point 0 lighter than point 1.
        let s = PointSpace::new(vec![0.2, 0.5, 0.3], Layout::Unordered).unwrap();
        let r = coincidence_support(&k1, &k2, &s, 1e-9, CoverMethod::ExactCover).unwrap();
        assert_eq!(r.retained, vec![1, 2]);
        assert!((r.retained_mass - 0.8).abs() < 1e-12);
        assert_eq!(r.removed.len(), 1);
        assert_eq!(r.removed[0].index, 0);
        assert!((r.removed[0].incident_mass - 0.1).abs() < 1e-12);
    }

    #[test]
    fn exact_cover_removes_a_star_center() {
        let n = 6;
        let k1 = Kernel::<f64>::zeros(n);
        let mut k2 = k1.clone();
        for leaf in [1, 2, 3, 4] {
            k2.set_sym(0, leaf, 1.0);
        }
        let s = PointSpace::uniform_unordered(n).unwrap();
        let r = coincidence_support(&k1, &k2, &s, 1e-9, CoverMethod::ExactCover).unwrap();
        assert_eq!(r.removed.len(), 1);
        assert_eq!(r.removed[0].index, 0);
        assert_eq!(r.retained, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn greedy_also_removes_the_star_center() {
        let n = 6;
        let k1 = Kernel::<f64>::zeros(n);
        let mut k2 = k1.clone();
        for leaf in [1, 2, 3, 4] {
            k2.set_sym(0, leaf, 1.0);
        }
        let s = PointSpace::uniform_unordered(n).unwrap();
        let r = coincidence_support(&k1, &k2, &s, 1e-9, CoverMethod::GreedyCover).unwrap();
        assert_eq!(r.removed.len(), 1);
        assert_eq!(r.removed[0].index, 0);
    }

    #[test]
    fn retained_square_never_disagrees() {
        let inst = embedding(10, 3);
        let mut k2 = inst.kernel.clone();
        for &(a, b) in &[(0, 3), (0, 7), (2, 5), (5, 9)] {
            k2.set_sym(a, b, k2.at(a, b) + 2.0);
        }
        for method in [CoverMethod::GreedyCover, CoverMethod::ExactCover] {
            let r = coincidence_support(&inst.kernel, &k2, &inst.space, 1e-9, method).unwrap();
            for &x in &r.retained {
                for &y in &r.retained {
                    assert!((inst.kernel.at(x, y) - k2.at(x, y)).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn exact_cover_refuses_large_spaces() {
        let k = Kernel::<f64>::zeros(21);
        let s = PointSpace::uniform_unordered(21).unwrap();
        assert!(matches!(
            coincidence_support(&k, &k, &s, 1e-9, CoverMethod::ExactCover).unwrap_err(),
            Error::SizeLimitExceeded { n: 21, limit: 20 }
        ));
    }

    #[test]
    fn zero_mass_points_are_outside_the_graph() {
        let mut k2 = Kernel::<f64>::zeros(3);
        k2.set_sym(0, 2, 5.0);
        let k1 = Kernel::<f64>::zeros(3);
        let s = PointSpace::new(vec![0.5, 0.5, 0.0], Layout::Unordered).unwrap();
        let edges = disagreement_graph(&k1, &k2, &s, 1e-9).unwrap();
        assert!(edges.is_empty());
    }

    #[test]
    fn transfer_holds_on_identical_semimetrics() {
        let inst = embedding(12, 4);
        let retained: Vec<usize> = (0..12).collect();
        let r = transfer_inequality_check(
            &inst.kernel,
            &inst.kernel,
            &inst.space,
            &retained,
            0.3,
            1e-9,
            200,
            7,
        )
        .unwrap();
        assert_eq!(r.verified, 200);
        assert!(r.no_witness.is_empty());
        assert!(r.failures.is_empty());
    }

    #[test]
    fn transfer_flags_planted_triangle_violation() {
        // k1 = k2 share a triangle violation: d(2,3) huge, short detour
        // through point 0.
        let mut k = Kernel::<f64>::zeros(4);
        k.set_sym(2, 3, 10.0);
        k.set_sym(0, 2, 0.1);
        k.set_sym(0, 3, 0.1);
        k.set_sym(0, 1, 0.1);
        k.set_sym(1, 2, 0.1);
        k.set_sym(1, 3, 0.1);
        let s = PointSpace::uniform_unordered(4).unwrap();
        let retained: Vec<usize> = (0..4).collect();
        let r =
            transfer_inequality_check(&k, &k, &s, &retained, 0.2, 1e-9, 400, 11).unwrap();
        assert!(
            r.failures.iter().any(|f| f.step == "k2_triangle"),
            "expected a broken triangle link, got {r:?}"
        );
    }

    #[test]
    fn nonpositive_radius_rejected() {
        let k = Kernel::<f64>::zeros(2);
        let s = PointSpace::circle(2).unwrap();
        assert_eq!(
            transfer_inequality_check(&k, &k, &s, &[0, 1], 0.0, 1e-9, 10, 0).unwrap_err(),
            Error::NonPositiveParameter { name: "r" }
        );
    }
}
