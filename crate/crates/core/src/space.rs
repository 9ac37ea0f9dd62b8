use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How the points of a space are arranged.
///
/// `Circle` means the points are cyclically ordered cells of equal mass
/// `1/n`; window operators require it. `Unordered` carries no adjacency
/// structure and admits arbitrary nonnegative masses (zero masses model
/// null sets).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Circle,
    Unordered,
}

/// Finite discretization of a probability space: `n` points with
/// nonnegative masses summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSpace<T: Scalar> {
    masses: Vec<T>,
    layout: Layout,
}

/// Mass-normalization slack: masses must sum to 1 within this bound.
pub const MASS_SUM_TOLERANCE: f64 = 1e-9;

impl<T: Scalar> PointSpace<T> {
    /// Uniform space of `n` equal-mass cells in cyclic order.
    pub fn circle(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSpace {
                reason: "point count must be positive".into(),
            });
        }
        let cell = T::one() / T::from_count(n);
        Ok(Self {
            masses: vec![cell; n],
            layout: Layout::Circle,
        })
    }

    /// Uniform space without cyclic structure.
    pub fn uniform_unordered(n: usize) -> Result<Self> {
        let mut s = Self::circle(n)?;
        s.layout = Layout::Unordered;
        Ok(s)
    }

    /// Space with explicit masses. Checks nonnegativity and normalization;
    /// circle layout additionally requires every mass to equal `1/n` exactly.
    pub fn new(masses: Vec<T>, layout: Layout) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidSpace {
                reason: "point count must be positive".into(),
            });
        }
        if let Some(i) = masses.iter().position(|m| *m < T::zero() || !m.is_finite()) {
            return Err(Error::InvalidSpace {
                reason: format!("mass at index {i} is negative or non-finite"),
            });
        }
        let sum = masses.iter().fold(T::zero(), |a, &m| a + m);
        let slack = T::from_f64(MASS_SUM_TOLERANCE).unwrap();
        if (sum - T::one()).abs() > slack {
            return Err(Error::InvalidSpace {
                reason: format!("masses sum to {sum}, expected 1"),
            });
        }
        if layout == Layout::Circle {
            let cell = T::one() / T::from_count(masses.len());
            if masses.iter().any(|&m| m != cell) {
                return Err(Error::InvalidSpace {
                    reason: "circle layout requires all masses exactly 1/n".into(),
                });
            }
        }
        Ok(Self { masses, layout })
    }

    /// Builds a space without checking the invariants. Loaders use this so
    /// that malformed mass files can be audited via `kernel::validate`
    /// instead of failing at parse time.
    pub fn new_unchecked(masses: Vec<T>, layout: Layout) -> Self {
        Self { masses, layout }
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn mass(&self, i: usize) -> T {
        self.masses[i]
    }

    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    /// Total mass of the positive-mass points (1 up to the admission slack).
    pub fn positive_mass(&self) -> T {
        self.masses
            .iter()
            .filter(|m| **m > T::zero())
            .fold(T::zero(), |a, &m| a + m)
    }

    /// Indices carrying positive mass, ascending.
    pub fn positive_points(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.masses[i] > T::zero()).collect()
    }

    /// Sum of masses over an index set, in the order given.
    pub fn mass_of(&self, indices: &[usize]) -> T {
        indices.iter().fold(T::zero(), |a, &i| a + self.masses[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_masses_are_exactly_uniform() {
        let s = PointSpace::<f64>::circle(8).unwrap();
        assert_eq!(s.len(), 8);
        assert!(s.masses().iter().all(|&m| m == 0.125));
        assert_eq!(s.layout(), Layout::Circle);
    }

    #[test]
    fn unnormalized_masses_rejected() {
        let err = PointSpace::new(vec![0.5, 0.6], Layout::Unordered).unwrap_err();
        match err {
            Error::InvalidSpace { reason } => assert!(reason.contains("1.1")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn zero_masses_are_legal() {
        let s = PointSpace::new(vec![0.5, 0.5, 0.0], Layout::Unordered).unwrap();
        assert_eq!(s.positive_points(), vec![0, 1]);
        assert_eq!(s.positive_mass(), 1.0);
    }

    #[test]
    fn circle_layout_requires_exact_cells() {
        let err = PointSpace::new(vec![0.5, 0.25, 0.25], Layout::Circle).unwrap_err();
        assert!(matches!(err, Error::InvalidSpace { .. }));
    }

    #[test]
    fn negative_mass_rejected() {
        let err = PointSpace::new(vec![1.5, -0.5], Layout::Unordered).unwrap_err();
        assert!(matches!(err, Error::InvalidSpace { .. }));
    }
}
