//! Power-mean ladder correction for almost-ultrametrics.
//!
//! For exponent `p`, the corrected value at `(x, y)` is the `p`-th root
//! of the window average of the `p`-th power of the kernel; the window
//! maximum is the `p -> inf` member of the family. By the power-mean
//! inequality the outputs are pointwise nondecreasing in `p`, and each
//! `p`-th power output inherits the semimetric-preservation property of
//! plain window averaging applied to `kernel^p`.
//!
//! A finite model cannot shrink the window and grow the exponent at
//! once, so the trade-off is explicit: with `r` corrupted rows of
//! magnitude `M`, the spill-over at clean anchors of an exponent-`p`
//! output is of order `M * (r/w)^(1/p)` and decays as the window grows.

use serde::Serialize;

use crate::correction::{window_average, window_max};
use crate::error::{Error, Result};
use crate::kernel::{Kernel, Provenance};
use crate::scalar::Scalar;
use crate::scan::{defect_scan, DefectKind, ScanMode, ViolationReport};
use crate::space::PointSpace;

/// One rung of the power ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerExponent {
    Finite(u32),
    /// Window maximum, the limiting member of the family.
    Max,
}

impl std::fmt::Display for PowerExponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PowerExponent::Finite(p) => write!(f, "{p}"),
            PowerExponent::Max => write!(f, "inf"),
        }
    }
}

/// Strictly increasing exponents, optionally terminated by the window
/// maximum, plus the averaging window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerLadder {
    pub exponents: Vec<u32>,
    pub include_max: bool,
    pub window: usize,
}

impl PowerLadder {
    /// Default ladder `{1, 2, 4, 8, inf}`.
    pub fn default_with_window(window: usize) -> Self {
        Self {
            exponents: vec![1, 2, 4, 8],
            include_max: true,
            window,
        }
    }

    pub fn rungs(&self) -> Vec<PowerExponent> {
        let mut out: Vec<PowerExponent> =
            self.exponents.iter().map(|&p| PowerExponent::Finite(p)).collect();
        if self.include_max {
            out.push(PowerExponent::Max);
        }
        out
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.exponents.is_empty() && !self.include_max {
            return Err(Error::InvalidLadder {
                reason: "power ladder is empty".into(),
            });
        }
        if self.exponents.first().is_some_and(|&p| p == 0) {
            return Err(Error::InvalidLadder {
                reason: "exponents must be at least 1".into(),
            });
        }
        for pair in self.exponents.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::InvalidLadder {
                    reason: "exponents must be strictly increasing".into(),
                });
            }
        }
        if self.window == 0 || n % self.window != 0 {
            return Err(Error::WindowDoesNotDivide {
                w: self.window,
                n,
            });
        }
        Ok(())
    }
}

/// Output of the power-mean ladder.
#[derive(Debug, Clone)]
pub struct PowerMeanOutput<T: Scalar> {
    pub rungs: Vec<PowerExponent>,
    /// One kernel per rung, raw (diagonals untouched), pointwise
    /// nondecreasing along the list.
    pub kernels: Vec<Kernel<T>>,
    /// Final rung with the diagonal zeroed: the corrected kernel.
    pub corrected: Kernel<T>,
}

/// Exponentiating through very large entries overflows; past this bound
/// on `p * ln(max entry)` the kernel is rescaled by its maximum first.
const SAFE_LOG_RANGE: f64 = 600.0;

fn power_mean_single<T: Scalar>(
    kernel: &Kernel<T>,
    space: &PointSpace<T>,
    w: usize,
    p: u32,
) -> Result<Kernel<T>> {
    if p == 1 {
        return window_average(kernel, space, w);
    }
    let n = kernel.len();
    let max = kernel.max_finite_entry();
    let needs_scaling =
        max > T::one() && (p as f64) * max.to_f64().unwrap().ln() > SAFE_LOG_RANGE;
    let scale = if needs_scaling { max } else { T::one() };

    let powered = Kernel::from_fn(n, kernel.meta(), |i, j| {
        (kernel.at(i, j) / scale).powi(p as i32)
    });
    let averaged = window_average(&powered, space, w)?;
    let root = T::one() / T::from_u32(p).unwrap();
    Ok(Kernel::from_fn(n, kernel.meta(), |i, j| {
        averaged.at(i, j).powf(root) * scale
    }))
}

/// Runs the whole ladder. Every rung is a full kernel; the final rung,
/// diagonal zeroed, is the corrected output.
pub fn power_mean_correct<T: Scalar>(
    kernel: &Kernel<T>,
    space: &PointSpace<T>,
    ladder: &PowerLadder,
) -> Result<PowerMeanOutput<T>> {
    ladder.validate(kernel.len())?;
    if let Some((i, j)) = kernel.first_non_finite() {
        return Err(Error::NonFiniteEntry { i, j });
    }
    let rungs = ladder.rungs();
    let mut kernels = Vec::with_capacity(rungs.len());
    for rung in &rungs {
        let k = match rung {
            PowerExponent::Finite(p) => power_mean_single(kernel, space, ladder.window, *p)?,
            PowerExponent::Max => window_max(kernel, space, ladder.window)?,
        };
        kernels.push(k);
    }
    let mut corrected = kernels
        .last()
        .expect("validated ladder is nonempty")
        .clone()
        .with_zero_diagonal();
    corrected.set_meta(Provenance::Corrected);
    Ok(PowerMeanOutput {
        rungs,
        kernels,
        corrected,
    })
}

/// Ultrametric-inequality defect scan over all ordered triples: the
/// defect of `(x, y, z)` is `k[x][z] - max(k[x][y], k[y][z])`.
pub fn ultrametric_defect_scan<T: Scalar>(
    kernel: &Kernel<T>,
    space: &PointSpace<T>,
    tolerance: T,
    mode: ScanMode,
) -> Result<ViolationReport<T>> {
    defect_scan(kernel, space, tolerance, mode, DefectKind::Ultrametric)
}
