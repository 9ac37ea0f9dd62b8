//! Property tests for the scan, correction, entropy, and cover invariants.

use proptest::prelude::*;

use metrep_core::admissibility::{entropy_exact_rd, epsilon_entropy_exact, epsilon_entropy_greedy};
use metrep_core::correction::{patch_from_basepoint, window_average, PatchSpec};
use metrep_core::equivalence::{coincidence_support, CoverMethod};
use metrep_core::generators::{generate, Family, Instance, InstanceSpec};
use metrep_core::scan::{triangle_defect_scan, ScanMode};
use metrep_core::ultrametric::power_mean_correct;
use metrep_core::ultrametric::PowerLadder;
use metrep_core::{Kernel, PointSpace, Provenance};

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

/// Symmetric kernel with entries in [0, 2), possibly wildly non-metric.
fn arb_kernel(n: usize) -> impl Strategy<Value = Kernel<f64>> {
    proptest::collection::vec(0.0f64..2.0, n * (n + 1) / 2).prop_map(move |upper| {
        let mut it = upper.into_iter();
        Kernel::from_fn(n, Provenance::Raw, |i, j| {
            if i == j {
                0.0
            } else {
                it.next().unwrap()
            }
        })
    })
}

fn arb_perm(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Simultaneous permutation of rows/columns and masses leaves the scan
    /// outcome unchanged (violating mass up to resummation noise).
    #[test]
    fn scan_is_permutation_invariant(
        kernel in arb_kernel(6),
        perm in arb_perm(6),
        masses in proptest::collection::vec(0.01f64..1.0, 6),
    ) {
        let total: f64 = masses.iter().sum();
        let masses: Vec<f64> = masses.iter().map(|m| m / total).collect();
        let space = PointSpace::new_unchecked(masses.clone(), metrep_core::Layout::Unordered);
        let permuted_masses: Vec<f64> = perm.iter().map(|&p| masses[p]).collect();
        let pspace = PointSpace::new_unchecked(permuted_masses, metrep_core::Layout::Unordered);
        let pkernel = kernel.permuted(&perm);

        let a = triangle_defect_scan(&kernel, &space, 1e-9, ScanMode::Exact).unwrap();
        let b = triangle_defect_scan(&pkernel, &pspace, 1e-9, ScanMode::Exact).unwrap();
        prop_assert_eq!(a.max_defect, b.max_defect);
        prop_assert!((a.violating_mass - b.violating_mass).abs() <= 1e-12);
    }

    /// Scaling by a power of two scales the maximal defect exactly and
    /// leaves the violating-triple set (at tolerance zero) unchanged.
    #[test]
    fn scan_is_dyadic_scale_covariant(kernel in arb_kernel(6), pow in -2i32..6) {
        let lambda = 2.0f64.powi(pow);
        let space = PointSpace::circle(6).unwrap();
        let scaled = Kernel::from_fn(6, Provenance::Raw, |i, j| kernel.at(i, j) * lambda);
        let a = triangle_defect_scan(&kernel, &space, 0.0, ScanMode::Exact).unwrap();
        let b = triangle_defect_scan(&scaled, &space, 0.0, ScanMode::Exact).unwrap();
        prop_assert_eq!(a.max_defect * lambda, b.max_defect);
        prop_assert_eq!(a.witness, b.witness);
        prop_assert_eq!(a.violating_mass, b.violating_mass);
    }

    /// Averaging a kernel never worsens its maximal triangle defect beyond
    /// float slack (semimetric preservation, applied to arbitrary input).
    #[test]
    fn averaging_never_worsens_the_defect(seed in 0u64..500, w in prop::sample::select(vec![2usize, 4])) {
        let inst = embedding(8, seed);
        let out = window_average(&inst.kernel, &inst.space, w).unwrap();
        let tol = 1e-12 * inst.kernel.max_finite_entry();
        let r = triangle_defect_scan(&out, &inst.space, tol, ScanMode::Exact).unwrap();
        prop_assert_eq!(r.violating_mass, 0.0);
    }

    /// Patching a valid restriction always yields a semimetric, testable by
    /// exhaustive scan.
    #[test]
    fn patched_kernels_pass_the_exhaustive_scan(
        seed in 0u64..1000,
        n in 3usize..10,
        keep in proptest::collection::btree_set(0usize..10, 2..8),
    ) {
        let inst = embedding(n, seed);
        let s1: Vec<usize> = keep.into_iter().filter(|&i| i < n).collect();
        prop_assume!(s1.len() >= 2);
        let mut k = inst.kernel.clone();
        // Garbage outside the retained square.
        let in_s1 = |i: usize| s1.contains(&i);
        for i in 0..n {
            for j in 0..n {
                if i != j && (!in_s1(i) || !in_s1(j)) {
                    let v = if (i + j) % 3 == 0 { f64::INFINITY } else { 7.0 + i as f64 };
                    k.set_sym(i, j, v);
                }
            }
        }
        let patch = PatchSpec { s1: s1.clone(), x0: s1[0] };
        let out = patch_from_basepoint(&k, &patch, 1e-12).unwrap();
        let scale = out.max_finite_entry();
        let r = triangle_defect_scan(&out, &inst.space, 1e-12 * scale, ScanMode::Exact).unwrap();
        prop_assert_eq!(r.violating_mass, 0.0);
    }

    /// Greedy entropy never beats the exact optimum, and the exact count is
    /// monotone nonincreasing in epsilon.
    #[test]
    fn entropy_bounds_and_monotonicity(seed in 0u64..300) {
        let inst = embedding(8, seed);
        let mut last = usize::MAX;
        for eps in [0.05, 0.1, 0.2, 0.4] {
            let g = epsilon_entropy_greedy(&inst.kernel, &inst.space, eps).unwrap();
            let e = epsilon_entropy_exact(&inst.kernel, &inst.space, eps, 16).unwrap();
            prop_assert!(g.count >= e.count);
            prop_assert!(e.count <= last);
            prop_assert!(g.covered_mass >= 1.0 - eps - 1e-12);
            last = e.count;
        }
    }

    /// Exact entropy is permutation-invariant and covariant under dyadic
    /// scaling of kernel and radius with the deficit held fixed.
    #[test]
    fn entropy_symmetries(seed in 0u64..200, pow in 0i32..4) {
        let inst = embedding(7, seed);
        let eps = 0.3;
        let base = epsilon_entropy_exact(&inst.kernel, &inst.space, eps, 16).unwrap();

        let perm: Vec<usize> = (0..7).rev().collect();
        let pk = inst.kernel.permuted(&perm);
        let p = epsilon_entropy_exact(&pk, &inst.space, eps, 16).unwrap();
        prop_assert_eq!(base.count, p.count);

        let lambda = 2.0f64.powi(pow);
        let scaled = Kernel::from_fn(7, Provenance::Raw, |i, j| inst.kernel.at(i, j) * lambda);
        let s = entropy_exact_rd(&scaled, &inst.space, eps * lambda, eps, 16).unwrap();
        prop_assert_eq!(base.count, s.count);
    }

    /// The exact cover retains at least as much mass as the greedy cover,
    /// and adding disagreement edges never increases the exact retained mass.
    #[test]
    fn cover_quality_and_monotonicity(
        seed in 0u64..200,
        extra in proptest::collection::btree_set((0usize..9, 0usize..9), 1..6),
    ) {
        let inst = embedding(9, seed);
        let mut k2 = inst.kernel.clone();
        k2.set_sym(0, 4, k2.at(0, 4) + 1.0);
        k2.set_sym(2, 7, k2.at(2, 7) + 1.0);
        let g = coincidence_support(&inst.kernel, &k2, &inst.space, 1e-9, CoverMethod::GreedyCover).unwrap();
        let e = coincidence_support(&inst.kernel, &k2, &inst.space, 1e-9, CoverMethod::ExactCover).unwrap();
        prop_assert!(e.retained_mass >= g.retained_mass - 1e-12);

        let mut k3 = k2.clone();
        for (a, b) in extra {
            if a != b {
                k3.set_sym(a, b, k3.at(a, b) + 2.0);
            }
        }
        let e3 = coincidence_support(&inst.kernel, &k3, &inst.space, 1e-9, CoverMethod::ExactCover).unwrap();
        prop_assert!(e3.retained_mass <= e.retained_mass + 1e-12);
    }

    /// Power means are pointwise nondecreasing along the exponent ladder.
    #[test]
    fn power_means_are_monotone(seed in 0u64..200) {
        let inst = embedding(8, seed);
        let ladder = PowerLadder { exponents: vec![1, 2, 4], include_max: true, window: 2 };
        let out = power_mean_correct(&inst.kernel, &inst.space, &ladder).unwrap();
        let scale = inst.kernel.max_finite_entry();
        for pair in out.kernels.windows(2) {
            for x in 0..8 {
                for y in 0..8 {
                    prop_assert!(pair[0].at(x, y) <= pair[1].at(x, y) + 1e-12 * scale);
                }
            }
        }
    }
}

/// Exact-mode violating mass agrees with the sampled estimate within three
/// standard errors on at least 95% of seeds.
#[test]
fn sampled_mass_tracks_exact_mass() {
    let inst: Instance<f64> = generate(
        &InstanceSpec {
            family: Family::Circle,
            n: 16,
            corruption: Some(metrep_core::generators::Corruption::Cells {
                pairs: vec![(0, 5), (3, 11), (7, 12)],
                value: 2.0,
            }),
            outliers: None,
        },
        0,
    )
    .unwrap();
    let tol = 1e-9;
    let exact = triangle_defect_scan(&inst.kernel, &inst.space, tol, ScanMode::Exact).unwrap();
    let p = exact.violating_mass;
    assert!(p > 0.0 && p < 1.0);

    let count = 4000u64;
    let se = (p * (1.0 - p) / count as f64).sqrt();
    let mut hits = 0;
    let seeds = 40;
    for seed in 0..seeds {
        let est =
            triangle_defect_scan(&inst.kernel, &inst.space, tol, ScanMode::Sampled { count, seed })
                .unwrap();
        if (est.violating_mass - p).abs() <= 3.0 * se {
            hits += 1;
        }
    }
    assert!(
        hits * 100 >= 95 * seeds,
        "only {hits}/{seeds} seeds within three standard errors"
    );
}
