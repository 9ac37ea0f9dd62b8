//! Admissibility audits: ε-entropy, ball-mass profiles, and the
//! three-way cross-check.
//!
//! A finite metric-measure space is admissible exactly when, at every
//! scale, (1) finitely many balls cover all but an ε of the mass,
//! (2) the separable support carries full mass, and (3) balls around
//! typical points have positive mass. The three criteria are equivalent
//! in the continuum; [`lemma1_crosscheck`] verifies that the finite
//! implementations agree and reports any discrepancy as evidence.
//!
//! The radius and the mass deficit both default to ε (the coupled form);
//! the decoupled entry points exist because scale-covariance only holds
//! when the radius scales with the kernel while the deficit stays put.

use serde::Serialize;

use crate::correction::separable_support;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::scalar::Scalar;
use crate::space::PointSpace;

/// Cover found by an entropy search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub epsilon: f64,
    pub count: usize,
    pub centers: Vec<usize>,
    pub covered_mass: f64,
    pub method: &'static str,
}

/// Table of ball masses `mu(B(x, r))` over a radius ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallMassProfile {
    pub radii: Vec<f64>,
    /// `masses[x][i]` is the mass of the closed ball of radius `radii[i]`
    /// around point `x`; nondecreasing along each row.
    pub masses: Vec<Vec<f64>>,
    /// Points around which some ladder ball carries zero mass.
    pub flagged: Vec<usize>,
}

/// Closed ball: `{y : k[center][y] <= r}`. Requires a finite center row.
pub fn ball<T: Scalar>(kernel: &Kernel<T>, center: usize, r: T) -> Result<Vec<usize>> {
    let n = kernel.len();
    if center >= n {
        return Err(Error::IndexOutOfRange { index: center, n });
    }
    let row = kernel.row(center);
    if let Some(j) = row.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteEntry { i: center, j });
    }
    Ok((0..n).filter(|&j| row[j] <= r).collect())
}

fn require_finite<T: Scalar>(kernel: &Kernel<T>) -> Result<()> {
    if let Some((i, j)) = kernel.first_non_finite() {
        return Err(Error::NonFiniteEntry { i, j });
    }
    Ok(())
}

/// Greedy maximum-coverage entropy with decoupled radius and deficit:
/// repeatedly add the center whose closed `radius`-ball adds the most
/// uncovered mass (ties to the lowest index) until the covered mass
/// reaches `1 - deficit`, or no candidate makes progress.
pub fn entropy_greedy_rd<T: Scalar>(
    kernel: &Kernel<T>,
    space: &PointSpace<T>,
    radius: T,
    deficit: T,
) -> Result<EntropyReport> {
    let n = kernel.len();
    if n != space.len() {
        return Err(Error::DimensionMismatch {
            kernel: n,
            space: space.len(),
        });
    }
    require_finite(kernel)?;
    let target = T::one() - deficit;
    let mut covered = vec![false; n];
    let mut covered_mass = T::zero();
    let mut centers = Vec::new();
    while covered_mass < target {
        let mut best: Option<(T, usize)> = None;
        for c in 0..n {
            let mut gain = T::zero();
            for j in 0..n {
                if !covered[j] && kernel.at(c, j) <= radius {
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
        let Some((_, c)) = best else { break };
        centers.push(c);
        for j in 0..n {
            if kernel.at(c, j) <= radius {
                covered[j] = true;
            }
        }
        covered_mass = (0..n)
            .filter(|&j| covered[j])
            .fold(T::zero(), |a, j| a + space.mass(j));
    }
    Ok(EntropyReport {
        epsilon: radius.to_f64().unwrap(),
        count: centers.len(),
        centers,
        covered_mass: covered_mass.to_f64().unwrap(),
        method: "greedy",
    })
}

/// Coupled-form greedy ε-entropy: radius ε, mass target `1 - ε`.
pub fn epsilon_entropy_greedy<T: Scalar>(
    kernel: &Kernel<T>,
    space: &PointSpace<T>,
    epsilon: T,
) -> Result<EntropyReport> {
    entropy_greedy_rd(kernel, space, epsilon, epsilon)
}

/// Word-packed index set over `0..n`.
#[derive(Clone, PartialEq, Eq)]
struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    fn empty(n: usize) -> Self {
        Self {
            words: vec![0; n.div_ceil(64)],
        }
    }
    fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }
    fn union_with(&mut self, other: &Self) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }
    fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * 64 + b)
                }
            })
        })
    }
}

struct ExactSearch<'a, T: Scalar> {
    balls: Vec<BitSet>,
    /// Static full-ball masses, one per candidate, for the optimistic bound.
    ball_mass: Vec<T>,
    masses: &'a [T],
    target: T,
    best: Option<Vec<usize>>,
}

impl<T: Scalar> ExactSearch<'_, T> {
    fn covered_mass(&self, covered: &BitSet) -> T {
        covered
            .iter_ones()
            .fold(T::zero(), |a, j| a + self.masses[j])
    }

    /// Depth-first search for a cover of exactly `k` centers, candidates
    /// taken in descending static-mass order starting from `from`.
    fn dfs(&mut self, order: &[usize], from: usize, chosen: &mut Vec<usize>, covered: &BitSet, k: usize) -> bool {
        let have = self.covered_mass(covered);
        if have >= self.target {
            self.best = Some(chosen.clone());
            return true;
        }
        let left = k - chosen.len();
        if left == 0 {
            return false;
        }
        // Optimistic bound: even disjoint top-`left` remaining balls cannot
        // close the gap.
        let mut optimistic = have;
        for &c in order[from..].iter().take(left) {
            optimistic = optimistic + self.ball_mass[c];
        }
        if optimistic < self.target {
            return false;
        }
        for i in from..order.len() {
            let c = order[i];
            let mut next = covered.clone();
            next.union_with(&self.balls[c]);
            chosen.push(c);
            if self.dfs(order, i + 1, chosen, &next, k) {
                return true;
            }
            chosen.pop();
        }
        false
    }
}

/// Exact minimal entropy with decoupled radius and deficit, by
/// branch-and-bound over center subsets of increasing cardinality.
/// The greedy solution seeds the upper bound; the disjoint-union bound
/// over the statically largest balls prunes the search. Rejects spaces
/// above `size_limit`.
pub fn entropy_exact_rd<T: Scalar>(
    kernel: &Kernel<T>,
    space: &PointSpace<T>,
    radius: T,
    deficit: T,
    size_limit: usize,
) -> Result<EntropyReport> {
    let n = kernel.len();
    if n > size_limit {
        return Err(Error::SizeLimitExceeded { n, limit: size_limit });
    }
    if n != space.len() {
        return Err(Error::DimensionMismatch {
            kernel: n,
            space: space.len(),
        });
    }
    require_finite(kernel)?;

    let greedy = entropy_greedy_rd(kernel, space, radius, deficit)?;
    let target = T::one() - deficit;
    if target <= T::zero() {
        return Ok(EntropyReport {
            epsilon: radius.to_f64().unwrap(),
            count: 0,
            centers: vec![],
            covered_mass: 0.0,
            method: "exact",
        });
    }

    let mut balls = Vec::with_capacity(n);
    let mut ball_mass = Vec::with_capacity(n);
    for c in 0..n {
        let mut bs = BitSet::empty(n);
        let mut m = T::zero();
        for j in 0..n {
            if kernel.at(c, j) <= radius {
                bs.insert(j);
                m = m + space.mass(j);
            }
        }
        balls.push(bs);
        ball_mass.push(m);
    }
    // Deduplicate identical coverage sets, keeping the lowest index.
    let mut order: Vec<usize> = Vec::new();
    for c in 0..n {
        if ball_mass[c] > T::zero() && !order.iter().any(|&o| balls[o] == balls[c]) {
            order.push(c);
        }
    }
    order.sort_by(|&a, &b| {
        ball_mass[b]
            .partial_cmp(&ball_mass[a])
            .unwrap()
            .then(a.cmp(&b))
    });

    let masses = space.masses();
    let mut search = ExactSearch {
        balls,
        ball_mass,
        masses,
        target,
        best: None,
    };
    // Lower bound from the disjoint-union relaxation.
    let mut lower = 0usize;
    {
        let mut acc = T::zero();
        for &c in &order {
            if acc >= target {
                break;
            }
            acc = acc + search.ball_mass[c];
            lower += 1;
        }
        if acc < target {
            // Even every ball together cannot reach the target: the greedy
            // result (all useful centers) is optimal.
            lower = greedy.count;
        }
    }

    // The greedy cover is an achieved upper bound; when the relaxation
    // meets it the optimum is proven without searching.
    if lower < greedy.count {
        for k in lower..=greedy.count {
            let mut chosen = Vec::new();
            let covered = BitSet::empty(n);
            if search.dfs(&order, 0, &mut chosen, &covered, k) {
                break;
            }
        }
    }
    let centers = search.best.unwrap_or_else(|| greedy.centers.clone());
    let mut covered = BitSet::empty(n);
    for &c in &centers {
        let mut bs = BitSet::empty(n);
        for j in 0..n {
            if kernel.at(c, j) <= radius {
                bs.insert(j);
            }
        }
        covered.union_with(&bs);
    }
    let covered_mass = covered
        .iter_ones()
        .fold(T::zero(), |a, j| a + space.mass(j));
    Ok(EntropyReport {
        epsilon: radius.to_f64().unwrap(),
        count: centers.len(),
        centers,
        covered_mass: covered_mass.to_f64().unwrap(),
        method: "exact",
    })
}

/// Coupled-form exact ε-entropy.
pub fn epsilon_entropy_exact<T: Scalar>(
    kernel: &Kernel<T>,
    space: &PointSpace<T>,
    epsilon: T,
    size_limit: usize,
) -> Result<EntropyReport> {
    entropy_exact_rd(kernel, space, epsilon, epsilon, size_limit)
}

/// Default `size_limit` of the exact entropy search.
pub const DEFAULT_EXACT_LIMIT: usize = 16;

/// Ball-mass table over an ascending radius ladder. Flags every point
/// around which some ladder ball carries zero mass; with a zero diagonal
/// this can only hit zero-mass points, so flags on positive-mass points
/// expose nonzero-diagonal kernels.
pub fn ball_mass_profile<T: Scalar>(
    kernel: &Kernel<T>,
    space: &PointSpace<T>,
    radii: &[T],
) -> Result<BallMassProfile> {
    let n = kernel.len();
    if n != space.len() {
        return Err(Error::DimensionMismatch {
            kernel: n,
            space: space.len(),
        });
    }
    require_finite(kernel)?;
    if radii.is_empty() {
        return Err(Error::EmptyLadder);
    }
    for (i, pair) in radii.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            return Err(Error::RadiiNotSorted { position: i + 1 });
        }
    }
    let mut masses = vec![Vec::with_capacity(radii.len()); n];
    let mut flagged = Vec::new();
    for (x, row) in masses.iter_mut().enumerate() {
        let mut zero = false;
        for &r in radii {
            let m: T = (0..n)
                .filter(|&j| kernel.at(x, j) <= r)
                .fold(T::zero(), |a, j| a + space.mass(j));
            zero |= m == T::zero();
            row.push(m.to_f64().unwrap());
        }
        if zero {
            flagged.push(x);
        }
    }
    Ok(BallMassProfile {
        radii: radii.iter().map(|r| r.to_f64().unwrap()).collect(),
        masses,
        flagged,
    })
}

/// Evidence from one scale of the cross-check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleEvidence {
    pub epsilon: f64,
    pub entropy_count: usize,
    pub entropy_covered_mass: f64,
    /// `covered_mass >= 1 - epsilon` held.
    pub entropy_ok: bool,
}

/// Consistency report of the three admissibility criteria.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosscheckReport {
    pub pass: bool,
    pub scales: Vec<ScaleEvidence>,
    pub support_mass: f64,
    pub positive_mass: f64,
    pub flagged: Vec<usize>,
    pub flagged_mass: f64,
    /// `|support_mass - (positive_mass - flagged_mass)|`.
    pub core_mass_discrepancy: f64,
}

/// Cross-checks the three admissibility criteria on one kernel:
/// finite-entropy covers at every ladder scale, separable-support mass,
/// and the ball-mass profile. Consistent inputs (zero diagonal, genuine
/// kernels) pass; adversarial ones produce a failing report with the
/// discrepancy quantified.
pub fn lemma1_crosscheck<T: Scalar>(
    kernel: &Kernel<T>,
    space: &PointSpace<T>,
    epsilon_ladder: &[T],
) -> Result<CrosscheckReport> {
    if epsilon_ladder.is_empty() {
        return Err(Error::EmptyLadder);
    }
    require_finite(kernel)?;

    let mut scales = Vec::with_capacity(epsilon_ladder.len());
    let mut all_ok = true;
    for &eps in epsilon_ladder {
        let report = epsilon_entropy_greedy(kernel, space, eps)?;
        let ok = report.covered_mass >= 1.0 - eps.to_f64().unwrap() - 1e-9;
        all_ok &= ok;
        scales.push(ScaleEvidence {
            epsilon: eps.to_f64().unwrap(),
            entropy_count: report.count,
            entropy_covered_mass: report.covered_mass,
            entropy_ok: ok,
        });
    }

    let support = separable_support(kernel, space, epsilon_ladder)?;

    let mut radii = epsilon_ladder.to_vec();
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    radii.dedup();
    let profile = ball_mass_profile(kernel, space, &radii)?;
    let flagged_mass: f64 = profile
        .flagged
        .iter()
        .map(|&x| space.mass(x).to_f64().unwrap())
        .sum();

    let positive_mass = space.positive_mass().to_f64().unwrap();
    let discrepancy = (support.retained_mass - (positive_mass - flagged_mass)).abs();
    // Flagged points must carry no mass: positive flagged mass means the
    // ball-positivity criterion contradicts the entropy criterion.
    let pass = all_ok && discrepancy <= 1e-9 && flagged_mass == 0.0;
    Ok(CrosscheckReport {
        pass,
        scales,
        support_mass: support.retained_mass,
        positive_mass,
        flagged: profile.flagged,
        flagged_mass,
        core_mass_discrepancy: discrepancy,
    })
}
