use crate::error::{Error, Result};

/// Periodic structured grid on the flat-torus chart `[0, L1) x [0, L2)`.
///
/// Grid point `(i, j)` sits at `(i * h1, j * h2)`. Storage is row-major with
/// `i` (the x index) as the slow index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n1: usize,
    n2: usize,
    l1: f64,
    l2: f64,
}

impl GridSpec {
    pub const MIN_CELLS: usize = 8;

    pub fn new(n1: usize, n2: usize, l1: f64, l2: f64) -> Result<Self> {
        if n1 < Self::MIN_CELLS || n2 < Self::MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "need at least {} cells per direction, got {n1}x{n2}",
                Self::MIN_CELLS
            )));
        }
        if !(l1 > 0.0 && l1.is_finite() && l2 > 0.0 && l2.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "periods must be positive and finite, got {l1} x {l2}"
            )));
        }
        Ok(Self { n1, n2, l1, l2 })
    }

    /// Unit-period square grid.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn l1(&self) -> f64 {
        self.l1
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub fn h1(&self) -> f64 {
        self.l1 / self.n1 as f64
    }

    pub fn h2(&self) -> f64 {
        self.l2 / self.n2 as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.h1() * self.h2()
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        (i % self.n1) * self.n2 + (j % self.n2)
    }

    /// Inverse of [`GridSpec::idx`].
    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k / self.n2, k % self.n2)
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h1()
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.h2()
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_degenerate_grids() {
        assert!(GridSpec::new(7, 8, 1.0, 1.0).is_err());
        assert!(GridSpec::new(8, 8, 0.0, 1.0).is_err());
        assert!(GridSpec::new(8, 8, 1.0, f64::NAN).is_err());
        assert!(GridSpec::new(8, 8, 1.0, 2.0).is_ok());
    }

    #[test]
    fn spacing_is_derived() {
        let g = GridSpec::new(16, 32, 2.0, 1.0).unwrap();
        assert_eq!(g.h1(), 0.125);
        assert_eq!(g.h2(), 1.0 / 32.0);
        assert_eq!(g.idx(17, 33), g.idx(1, 1));
        assert_eq!(g.ij(g.idx(3, 5)), (3, 5));
    }
}
