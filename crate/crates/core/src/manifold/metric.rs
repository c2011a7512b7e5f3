use super::{GridSpec, ScalarField, SymTensorField};
use crate::error::{Error, Point, Result};

/// Riemannian metric `g_ij` with cached inverse `g^ij` and `sqrt(det g)`.
///
/// Values are immutable; every transformation builds a new metric and
/// recomputes the caches.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    tensor: SymTensorField,
    inv: SymTensorField,
    sqrt_det: ScalarField,
}

impl MetricField {
    /// Validates positive definiteness and caches `g^ij` and `sqrt(det g)`.
    pub fn new(tensor: SymTensorField) -> Result<Self> {
        let grid = *tensor.grid();
        let n = grid.len();
        let (mut i11, mut i12, mut i22, mut sd) =
            (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for k in 0..n {
            let [a, b, c] = tensor.at(k);
            let det = a * c - b * b;
            if !(a > 0.0 && det > 0.0 && det.is_finite()) {
                let (i, j) = grid.ij(k);
                return Err(Error::NonPositiveDefinite(Point { i, j }));
            }
            let r = 1.0 / det;
            i11[k] = c * r;
            i12[k] = -b * r;
            i22[k] = a * r;
            sd[k] = det.sqrt();
        }
        Ok(Self {
            inv: SymTensorField::from_vecs(grid, i11, i12, i22),
            sqrt_det: ScalarField::from_vec(grid, sd),
            tensor,
        })
    }

    pub fn flat(grid: GridSpec) -> Self {
        Self::new(SymTensorField::identity(grid)).expect("identity is positive definite")
    }

    /// `e^{2u} delta_ij`.
    pub fn conformal(u: &ScalarField) -> Self {
        Self::new(SymTensorField::diagonal(&u.map(|v| (2.0 * v).exp())))
            .expect("conformal metric is positive definite")
    }

    pub fn grid(&self) -> &GridSpec {
        self.tensor.grid()
    }

    pub fn tensor(&self) -> &SymTensorField {
        &self.tensor
    }

    pub fn inv(&self) -> &SymTensorField {
        &self.inv
    }

    pub fn sqrt_det(&self) -> &ScalarField {
        &self.sqrt_det
    }

    /// The homothetic metric `s * g`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.tensor.scale(s))
    }

    /// `max |g^ik g_kj - delta^i_j|` over the grid.
    pub fn inverse_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.grid().len() {
            let [a, b, c] = self.tensor.at(k);
            let [p, q, r] = self.inv.at(k);
            let e11 = p * a + q * b - 1.0;
            let e12 = p * b + q * c;
            let e21 = q * a + r * b;
            let e22 = q * b + r * c - 1.0;
            worst = worst.max(e11.abs().max(e12.abs()).max(e21.abs()).max(e22.abs()));
        }
        worst
    }
}

pub fn build_metric(tensor: SymTensorField) -> Result<MetricField> {
    MetricField::new(tensor)
}

/// Eigenvalues `(min, max)` of `g^{-1} a` at one point, i.e. the roots of
/// `det(a - mu g) = 0` for symmetric `a` and positive definite `g`.
///
/// Reduces to the symmetric matrix `L^{-1} a L^{-T}` with `g = L L^T`, whose
/// eigenvalue split is a `hypot` of small quantities: a pencil with `a = c g`
/// comes out with both roots equal to rounding, where the quadratic formula
/// would lose half the digits.
pub fn generalized_eigenvalues(a: [f64; 3], g: [f64; 3]) -> (f64, f64) {
    let l11 = g[0].sqrt();
    let l21 = g[1] / l11;
    let l22 = (g[2] - l21 * l21).sqrt();
    // L^{-1} = [[p, 0], [q, r]]
    let (p, r) = (1.0 / l11, 1.0 / l22);
    let q = -l21 * p * r;
    let m11 = p * p * a[0];
    let m12 = p * (q * a[0] + r * a[1]);
    let m22 = q * q * a[0] + 2.0 * q * r * a[1] + r * r * a[2];
    let mean = 0.5 * (m11 + m22);
    let radius = (0.5 * (m11 - m22)).hypot(m12);
    (mean - radius, mean + radius)
}
