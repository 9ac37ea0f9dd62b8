use std::time::Instant;

use metrep_core::admissibility::epsilon_entropy_exact;
use metrep_core::generators::{generate, Family, Instance, InstanceSpec};
use metrep_core::sampling::fingerprint_compare;

fn inst(family: Family, n: usize, seed: u64) -> Instance<f64> {
    generate(
        &InstanceSpec {
            family,
            n,
            corruption: None,
            outliers: None,
        },
        seed,
    )
    .unwrap()
}

fn main() {
    let circle = inst(Family::Circle, 64, 0);
    let dyadic = inst(Family::DyadicUltrametric { block: 1 }, 64, 0);

    let t0 = Instant::now();
    let e = epsilon_entropy_exact(&circle.kernel, &circle.space, 0.1, 64).unwrap();
    println!("entropy circle64 eps=0.1: count={} in {:?}", e.count, t0.elapsed());

    // Self-comparison across independent seed pairs.
    let mut worst_self: f64 = 0.0;
    for s in 0..10u64 {
        let d = fingerprint_compare(
            &circle.kernel,
            &circle.space,
            &circle.kernel,
            &circle.space,
            4,
            2000,
            2 * s + 1,
            2 * s + 2,
        )
        .unwrap();
        worst_self = worst_self.max(d);
        println!("self seedpair {s}: {d:.5}");
    }
    println!("worst self: {worst_self:.5}");

    let mut best_cross: f64 = 1.0;
    for s in 0..10u64 {
        let d = fingerprint_compare(
            &circle.kernel,
            &circle.space,
            &dyadic.kernel,
            &dyadic.space,
            4,
            2000,
            2 * s + 1,
            2 * s + 2,
        )
        .unwrap();
        best_cross = best_cross.min(d);
        println!("cross seedpair {s}: {d:.5}");
    }
    println!("lowest cross: {best_cross:.5}");
}
