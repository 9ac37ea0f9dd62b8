//! Repair and audit of "almost-metrics" on discretized measure spaces.
//!
//! A kernel here is a symmetric nonnegative distance table on a finite
//! collection of weighted points (a discretized probability space). The
//! crate provides:
//!
//! * defect scans that locate and weigh triangle / ultrametric violations
//!   ([`scan`], [`ultrametric`]),
//! * the correction pipeline that turns an almost-metric into a genuine
//!   semimetric: measure renormalization, cyclic window averaging with a
//!   scale ladder, diagonal zeroing, and base-point patching ([`correction`]),
//! * power-mean ladders that repair almost-ultrametrics ([`ultrametric`]),
//! * admissibility audits: ε-entropy, ball-mass profiles, separable-support
//!   extraction, and a cross-check of the three criteria ([`admissibility`]),
//! * coincidence extraction for kernels that agree off a sparse pair set
//!   ([`equivalence`]),
//! * seeded instance generators and distance-matrix distribution
//!   fingerprints ([`generators`], [`sampling`]).
//!
//! All numeric code is generic over the scalar type via [`Scalar`];
//! `f64` aliases are exported at the crate root. Operations are pure
//! functions over immutable inputs, and every parallel reduction is
//! specified so that results are bit-identical for any worker count.

pub mod admissibility;
pub mod correction;
pub mod equivalence;
pub mod error;
pub mod generators;
pub mod io;
pub mod kernel;
pub mod sampling;
pub mod scalar;
pub mod scan;
pub mod space;
pub mod ultrametric;

pub use error::{Error, Result};
pub use kernel::{Kernel, Provenance};
pub use scalar::Scalar;
pub use scan::{triangle_defect_scan, ScanMode, ViolationReport};
pub use space::{Layout, PointSpace};

/// Double-precision kernel, the default working type.
pub type Kernel64 = Kernel<f64>;
/// Single-precision kernel.
pub type Kernel32 = Kernel<f32>;
/// Double-precision point space.
pub type PointSpace64 = PointSpace<f64>;
/// Single-precision point space.
pub type PointSpace32 = PointSpace<f32>;
