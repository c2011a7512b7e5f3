use rand::Rng;

use super::GridSpec;
use crate::error::{Error, Point, Result};

fn check_finite(grid: &GridSpec, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => {
            let (i, j) = grid.ij(k);
            Err(Error::NonFinite(Point { i, j }))
        }
        None => Ok(()),
    }
}

fn sample(grid: &GridSpec, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(grid.len());
    for i in 0..grid.n1() {
        let x = grid.x(i);
        for j in 0..grid.n2() {
            v.push(f(x, grid.y(j)));
        }
    }
    v
}

fn shift_values(grid: &GridSpec, v: &[f64], a: usize, b: usize) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for i in 0..grid.n1() {
        for j in 0..grid.n2() {
            out[grid.idx(i + a, j + b)] = v[grid.idx(i, j)];
        }
    }
    out
}

/// Real-valued function sampled on the periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        check_finite(&grid, &values)?;
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::from_vec(grid, sample(&grid, f))
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self::from_vec(grid, vec![c; grid.len()])
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Random trigonometric polynomial with all wavenumbers `|k1|, |k2| <= max_mode`
    /// and coefficients uniform in `[-amplitude, amplitude]`.
    pub fn random_bandlimited<R: Rng + ?Sized>(
        grid: GridSpec,
        max_mode: usize,
        amplitude: f64,
        rng: &mut R,
    ) -> Self {
        let m = max_mode as i64;
        let mut modes = Vec::new();
        for k1 in -m..=m {
            for k2 in 0..=m {
                if k2 == 0 && k1 < 0 {
                    continue;
                }
                let a = rng.gen_range(-amplitude..=amplitude);
                let b = rng.gen_range(-amplitude..=amplitude);
                modes.push((k1 as f64, k2 as f64, a, b));
            }
        }
        let (w1, w2) = (
            std::f64::consts::TAU / grid.l1(),
            std::f64::consts::TAU / grid.l2(),
        );
        Self::from_fn(grid, |x, y| {
            modes
                .iter()
                .map(|&(k1, k2, a, b)| {
                    let phase = k1 * w1 * x + k2 * w2 * y;
                    a * phase.cos() + b * phase.sin()
                })
                .sum()
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination; panics if the grids differ.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.grid, other.grid, "zip_map across grids");
        Self::from_vec(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Index of the entry with the largest magnitude (first on ties).
    pub fn argmax_abs(&self) -> usize {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if v.abs() > self.values[best].abs() {
                best = k;
            }
        }
        best
    }

    /// Circular shift: the value at `(i, j)` moves to `(i + a, j + b)`.
    pub fn shifted(&self, a: usize, b: usize) -> Self {
        Self::from_vec(self.grid, shift_values(&self.grid, &self.values, a, b))
    }
}

/// Symmetric covariant 2-tensor field; only `T11, T12, T22` are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    grid: GridSpec,
    t11: Vec<f64>,
    t12: Vec<f64>,
    t22: Vec<f64>,
}

impl SymTensorField {
    pub fn new(grid: GridSpec, t11: Vec<f64>, t12: Vec<f64>, t22: Vec<f64>) -> Result<Self> {
        if t11.len() != grid.len() || t12.len() != grid.len() || t22.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        check_finite(&grid, &t11)?;
        check_finite(&grid, &t12)?;
        check_finite(&grid, &t22)?;
        Ok(Self { grid, t11, t12, t22 })
    }

    pub(crate) fn from_vecs(grid: GridSpec, t11: Vec<f64>, t12: Vec<f64>, t22: Vec<f64>) -> Self {
        Self { grid, t11, t12, t22 }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> [f64; 3]) -> Self {
        let n = grid.len();
        let (mut a, mut b, mut c) = (
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        );
        for i in 0..grid.n1() {
            for j in 0..grid.n2() {
                let [t11, t12, t22] = f(grid.x(i), grid.y(j));
                a.push(t11);
                b.push(t12);
                c.push(t22);
            }
        }
        Self::from_vecs(grid, a, b, c)
    }

    pub fn constant(grid: GridSpec, t: [f64; 3]) -> Self {
        let n = grid.len();
        Self::from_vecs(grid, vec![t[0]; n], vec![t[1]; n], vec![t[2]; n])
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, [0.0; 3])
    }

    pub fn identity(grid: GridSpec) -> Self {
        Self::constant(grid, [1.0, 0.0, 1.0])
    }

    /// `f * delta_ij` pointwise.
    pub fn diagonal(f: &ScalarField) -> Self {
        Self::from_vecs(
            *f.grid(),
            f.values().to_vec(),
            vec![0.0; f.grid().len()],
            f.values().to_vec(),
        )
    }

    pub fn random_bandlimited<R: Rng + ?Sized>(
        grid: GridSpec,
        max_mode: usize,
        amplitude: f64,
        rng: &mut R,
    ) -> Self {
        let a = ScalarField::random_bandlimited(grid, max_mode, amplitude, rng);
        let b = ScalarField::random_bandlimited(grid, max_mode, amplitude, rng);
        let c = ScalarField::random_bandlimited(grid, max_mode, amplitude, rng);
        Self::from_vecs(grid, a.into_values(), b.into_values(), c.into_values())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn t11(&self) -> &[f64] {
        &self.t11
    }

    pub fn t12(&self) -> &[f64] {
        &self.t12
    }

    pub fn t22(&self) -> &[f64] {
        &self.t22
    }

    /// Components `[T11, T12, T22]` at flat index `k`.
    #[inline]
    pub fn at(&self, k: usize) -> [f64; 3] {
        [self.t11[k], self.t12[k], self.t22[k]]
    }

    /// Component `T_ab` with `a, b` in `{0, 1}`.
    pub fn component(&self, a: usize, b: usize) -> &[f64] {
        match (a, b) {
            (0, 0) => &self.t11,
            (1, 1) => &self.t22,
            _ => &self.t12,
        }
    }

    pub fn map_points(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let n = self.grid.len();
        let (mut a, mut b, mut c) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for k in 0..n {
            let [x, y, z] = f(self.at(k));
            a[k] = x;
            b[k] = y;
            c[k] = z;
        }
        Self::from_vecs(self.grid, a, b, c)
    }

    /// Pointwise `self + c * other`; panics if the grids differ.
    pub fn axpy(&self, c: f64, other: &SymTensorField) -> Self {
        assert_eq!(self.grid, other.grid, "axpy across grids");
        let comb = |x: &[f64], y: &[f64]| -> Vec<f64> {
            x.iter().zip(y).map(|(&a, &b)| a + c * b).collect()
        };
        Self::from_vecs(
            self.grid,
            comb(&self.t11, &other.t11),
            comb(&self.t12, &other.t12),
            comb(&self.t22, &other.t22),
        )
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_points(|[a, b, d]| [c * a, c * b, c * d])
    }

    /// Pointwise product with a scalar field; panics if the grids differ.
    pub fn scale_by(&self, f: &ScalarField) -> Self {
        assert_eq!(&self.grid, f.grid(), "scale_by across grids");
        let s = f.values();
        let mul = |x: &[f64]| -> Vec<f64> { x.iter().zip(s).map(|(&a, &b)| a * b).collect() };
        Self::from_vecs(self.grid, mul(&self.t11), mul(&self.t12), mul(&self.t22))
    }

    pub fn max_abs(&self) -> f64 {
        self.t11
            .iter()
            .chain(&self.t12)
            .chain(&self.t22)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn shifted(&self, a: usize, b: usize) -> Self {
        Self::from_vecs(
            self.grid,
            shift_values(&self.grid, &self.t11, a, b),
            shift_values(&self.grid, &self.t12, a, b),
            shift_values(&self.grid, &self.t22, a, b),
        )
    }
}

/// Contravariant vector field `(X^1, X^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    x1: Vec<f64>,
    x2: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: GridSpec, x1: Vec<f64>, x2: Vec<f64>) -> Result<Self> {
        if x1.len() != grid.len() || x2.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        check_finite(&grid, &x1)?;
        check_finite(&grid, &x2)?;
        Ok(Self { grid, x1, x2 })
    }

    pub(crate) fn from_vecs(grid: GridSpec, x1: Vec<f64>, x2: Vec<f64>) -> Self {
        Self { grid, x1, x2 }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let a = sample(&grid, |x, y| f(x, y)[0]);
        let b = sample(&grid, |x, y| f(x, y)[1]);
        Self::from_vecs(grid, a, b)
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::from_vecs(grid, vec![0.0; grid.len()], vec![0.0; grid.len()])
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn x1(&self) -> &[f64] {
        &self.x1
    }

    pub fn x2(&self) -> &[f64] {
        &self.x2
    }

    pub fn component(&self, a: usize) -> &[f64] {
        if a == 0 {
            &self.x1
        } else {
            &self.x2
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.x1
            .iter()
            .chain(&self.x2)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn shifted(&self, a: usize, b: usize) -> Self {
        Self::from_vecs(
            self.grid,
            shift_values(&self.grid, &self.x1, a, b),
            shift_values(&self.grid, &self.x2, a, b),
        )
    }
}

/// Covariant vector field `(w_1, w_2)`, e.g. the differential `df`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovectorField {
    grid: GridSpec,
    w1: Vec<f64>,
    w2: Vec<f64>,
}

impl CovectorField {
    pub(crate) fn from_vecs(grid: GridSpec, w1: Vec<f64>, w2: Vec<f64>) -> Self {
        Self { grid, w1, w2 }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn component(&self, a: usize) -> &[f64] {
        if a == 0 {
            &self.w1
        } else {
            &self.w2
        }
    }

    /// Pointwise product with a scalar field; panics if the grids differ.
    pub fn scale_by(&self, f: &ScalarField) -> Self {
        assert_eq!(&self.grid, f.grid(), "scale_by across grids");
        let s = f.values();
        Self::from_vecs(
            self.grid,
            self.w1.iter().zip(s).map(|(&a, &b)| a * b).collect(),
            self.w2.iter().zip(s).map(|(&a, &b)| a * b).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn rejects_non_finite_and_wrong_length() {
        let g = GridSpec::unit(8).unwrap();
        assert!(matches!(
            ScalarField::new(g, vec![0.0; 63]),
            Err(Error::GridMismatch)
        ));
        let mut v = vec![0.0; 64];
        v[10] = f64::NAN;
        assert!(matches!(
            ScalarField::new(g, v),
            Err(Error::NonFinite(Point { i: 1, j: 2 }))
        ));
    }

    #[test]
    fn shift_is_circular() {
        let g = GridSpec::unit(8).unwrap();
        let f = ScalarField::from_fn(g, |x, y| x + 10.0 * y);
        let s = f.shifted(3, 7);
        assert_eq!(s.get(3, 7), f.get(0, 0));
        assert_eq!(s.get(1, 2), f.get(6, 3));
        assert_eq!(s.shifted(5, 1), f);
    }

    #[test]
    fn bandlimited_noise_is_deterministic() {
        let g = GridSpec::unit(16).unwrap();
        let mut r1 = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut r2 = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let a = ScalarField::random_bandlimited(g, 3, 1.0, &mut r1);
        let b = ScalarField::random_bandlimited(g, 3, 1.0, &mut r2);
        assert_eq!(a, b);
        assert!(a.max_abs() > 0.0);
    }
}
