use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::space::PointSpace;

/// Where a kernel came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Raw,
    Corrected,
    Generated,
}

/// Symmetric nonnegative `n x n` value table; entries may be `+inf`.
///
/// The table is the discrete stand-in for a measurable two-point function:
/// entry `(i, j)` is the distance-like value between points `i` and `j`.
/// Constructors only enforce shape; [`validate`] checks the structural
/// invariants (symmetry, nonnegativity) so that malformed inputs can be
/// loaded and audited rather than rejected at parse time.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<T: Scalar> {
    n: usize,
    values: Vec<T>,
    meta: Provenance,
}

impl<T: Scalar> Kernel<T> {
    /// Builds a kernel from row-major values. Only the shape is checked.
    pub fn from_values(n: usize, values: Vec<T>, meta: Provenance) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::InvalidSpace {
                reason: format!("expected {} values for n={n}, got {}", n * n, values.len()),
            });
        }
        Ok(Self { n, values, meta })
    }

    /// Builds a kernel from nested rows.
    pub fn from_rows(rows: Vec<Vec<T>>, meta: Provenance) -> Result<Self> {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidSpace {
                    reason: format!("row {i} has {} entries, expected {n}", row.len()),
                });
            }
            values.extend(row);
        }
        Ok(Self { n, values, meta })
    }

    /// All-zero kernel.
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            values: vec![T::zero(); n * n],
            meta: Provenance::Raw,
        }
    }

    /// Builds a symmetric kernel by evaluating `f` on the upper triangle
    /// (including the diagonal) and mirroring.
    pub fn from_fn(n: usize, meta: Provenance, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut k = Self::zeros(n);
        k.meta = meta;
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                k.values[i * n + j] = v;
                k.values[j * n + i] = v;
            }
        }
        k
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn meta(&self) -> Provenance {
        self.meta
    }

    pub fn set_meta(&mut self, meta: Provenance) {
        self.meta = meta;
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set_sym(&mut self, i: usize, j: usize, v: T) {
        self.values[i * self.n + j] = v;
        self.values[j * self.n + i] = v;
    }

    /// Sets a single entry without mirroring. Used by loaders and tests
    /// that need to represent asymmetric (invalid) tables for auditing.
    pub fn set_raw(&mut self, i: usize, j: usize, v: T) {
        self.values[i * self.n + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Largest finite entry, or zero for an all-infinite/empty table.
    pub fn max_finite_entry(&self) -> T {
        self.values
            .iter()
            .filter(|v| v.is_finite())
            .fold(T::zero(), |a, &v| if v > a { v } else { a })
    }

    /// First non-finite entry in row-major order, if any.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.values
            .iter()
            .position(|v| !v.is_finite())
            .map(|p| (p / self.n, p % self.n))
    }

    pub fn is_finite(&self) -> bool {
        self.first_non_finite().is_none()
    }

    /// Returns the same table with the diagonal set to zero.
    pub fn with_zero_diagonal(mut self) -> Self {
        for i in 0..self.n {
            self.values[i * self.n + i] = T::zero();
        }
        self
    }

    /// Applies a simultaneous permutation to rows and columns:
    /// entry `(i, j)` of the result is entry `(perm[i], perm[j])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n);
        let mut out = Self::zeros(self.n);
        out.meta = self.meta;
        for i in 0..self.n {
            for j in 0..self.n {
                out.values[i * self.n + j] = self.at(perm[i], perm[j]);
            }
        }
        out
    }
}

/// One structural defect found by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructuralViolation {
    DimensionMismatch {
        kernel: usize,
        space: usize,
    },
    /// Worst asymmetric pair: `|k[i][j] - k[j][i]|` is maximal at `(i, j)`.
    Asymmetry {
        i: usize,
        j: usize,
        gap: f64,
    },
    NegativeEntry {
        i: usize,
        j: usize,
        value: f64,
    },
    MassesNotNormalized {
        sum: f64,
    },
}

/// Checks dimension agreement, symmetry, nonnegativity, and mass
/// normalization. Returns the list of structural violations (empty when
/// the pair is well formed). Triangle violations are the business of the
/// defect scans, not of this check.
pub fn validate<T: Scalar>(kernel: &Kernel<T>, space: &PointSpace<T>) -> Vec<StructuralViolation> {
    let mut out = Vec::new();
    if kernel.len() != space.len() {
        out.push(StructuralViolation::DimensionMismatch {
            kernel: kernel.len(),
            space: space.len(),
        });
    }
    let n = kernel.len();
    // Worst offender only: the largest |k[i][j] - k[j][i]| over i < j.
    let mut worst: Option<(usize, usize, T)> = None;
    for i in 0..n {
        for j in (i + 1)..n {
            let a = kernel.at(i, j);
            let b = kernel.at(j, i);
            if a != b && !(a.is_nan() && b.is_nan()) {
                let gap = if a.is_finite() && b.is_finite() {
                    (a - b).abs()
                } else {
                    T::infinity()
                };
                let beats = match worst {
                    None => true,
                    Some((_, _, g)) => gap > g,
                };
                if beats {
                    worst = Some((i, j, gap));
                }
            }
        }
    }
    if let Some((i, j, gap)) = worst {
        out.push(StructuralViolation::Asymmetry {
            i,
            j,
            gap: gap.to_f64().unwrap_or(f64::INFINITY),
        });
    }
    for i in 0..n {
        for j in 0..n {
            let v = kernel.at(i, j);
            if v < T::zero() || v.is_nan() {
                out.push(StructuralViolation::NegativeEntry {
                    i,
                    j,
                    value: v.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    let sum = space.masses().iter().fold(T::zero(), |a, &m| a + m);
    let slack = T::from_f64(crate::space::MASS_SUM_TOLERANCE).unwrap();
    if (sum - T::one()).abs() > slack {
        out.push(StructuralViolation::MassesNotNormalized {
            sum: sum.to_f64().unwrap_or(f64::NAN),
        });
    }
    out
}
