//! Geometric differential operators on the discrete chart.
//!
//! Two discretizations of the Laplacians are provided. The divergence forms
//! ([`laplace_beltrami`], [`p_laplacian`]) are exactly self-adjoint against the
//! discrete measure and are what the eigensolver minimizes. The covariant
//! forms ([`covariant_laplacian`], [`covariant_p_laplacian`]) trace the
//! Christoffel-corrected Hessian; they agree with the divergence forms to
//! O(h^4) and make the metric-variation identities hold exactly on the grid.

use crate::error::{Error, Result};
use crate::manifold::stencil::{d, d_x, d_y};
use crate::manifold::{
    covector_norm_sq, differential, divergence, gradient, integrate, pow_half, raise,
    CovectorField, GridSpec, MetricField, ScalarField, SymTensorField, VectorField,
};

pub(crate) fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidP(p))
    }
}

/// `Delta_g f = |g|^{-1/2} d_i(|g|^{1/2} g^ij d_j f)`.
pub fn laplace_beltrami(f: &ScalarField, g: &MetricField) -> Result<ScalarField> {
    divergence(&gradient(f, g)?, g)
}

/// `div((|grad f|^2 + eps^2)^{(p-2)/2} grad f)`.
pub fn p_laplacian(f: &ScalarField, g: &MetricField, p: f64, eps: f64) -> Result<ScalarField> {
    check_p(p)?;
    f.grid().ensure_same(g.grid())?;
    if p == 2.0 {
        return laplace_beltrami(f, g);
    }
    let df = differential(f);
    let z = covector_norm_sq(&df, g).map(|s| pow_half(s + eps * eps, p - 2.0));
    let x = raise(&df.scale_by(&z), g)?;
    divergence(&x, g)
}

/// Christoffel symbols `Gamma^k_ij`, symmetric in the lower pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelField {
    grid: GridSpec,
    // index k * 3 + (i + j)
    gamma: [Vec<f64>; 6],
}

impl ChristoffelField {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `Gamma^k_ij` with all indices in `{0, 1}`.
    pub fn get(&self, k: usize, i: usize, j: usize) -> &[f64] {
        &self.gamma[k * 3 + i + j]
    }

    #[inline]
    fn at(&self, k: usize, i: usize, j: usize, p: usize) -> f64 {
        self.gamma[k * 3 + i + j][p]
    }

    pub fn max_abs(&self) -> f64 {
        self.gamma
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Partials of the three metric components: `[axis][component]`.
fn metric_partials(t: &SymTensorField) -> [[Vec<f64>; 3]; 2] {
    let grid = t.grid();
    let comps = [t.t11(), t.t12(), t.t22()];
    [
        comps.map(|c| d_x(grid, c)),
        comps.map(|c| d_y(grid, c)),
    ]
}

/// `Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)`.
pub fn christoffel(g: &MetricField) -> ChristoffelField {
    let grid = *g.grid();
    let n = grid.len();
    let dg = metric_partials(g.tensor());
    let inv = g.inv();
    let mut gamma: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; n]);
    for p in 0..n {
        let gi = inv.at(p);
        let ginv = |a: usize, b: usize| gi[a + b];
        let dgp = |axis: usize, a: usize, b: usize| dg[axis][a + b][p];
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            let lower = |l: usize| 0.5 * (dgp(i, j, l) + dgp(j, i, l) - dgp(l, i, j));
            let (l0, l1) = (lower(0), lower(1));
            for k in 0..2 {
                gamma[k * 3 + i + j][p] = ginv(k, 0) * l0 + ginv(k, 1) * l1;
            }
        }
    }
    ChristoffelField { grid, gamma }
}

/// Scalar curvature from the Riemann tensor contraction
/// `R = g^ij (d_k G^k_ij - d_j G^k_ki + G^k_kl G^l_ij - G^k_jl G^l_ki)`.
pub fn scalar_curvature_2d(g: &MetricField) -> ScalarField {
    let grid = *g.grid();
    let n = grid.len();
    let gam = christoffel(g);
    // div_gamma[ij] = d_k Gamma^k_ij
    let div_gamma: [Vec<f64>; 3] = std::array::from_fn(|ij| {
        let a = d_x(&grid, &gam.gamma[ij]);
        let b = d_y(&grid, &gam.gamma[3 + ij]);
        a.iter().zip(&b).map(|(x, y)| x + y).collect()
    });
    // trace A_i = Gamma^k_ki
    let trace: [Vec<f64>; 2] = std::array::from_fn(|i| {
        (0..n)
            .map(|p| gam.at(0, 0, i, p) + gam.at(1, 1, i, p))
            .collect()
    });
    // d_trace[j][i] = d_j A_i
    let d_trace: [[Vec<f64>; 2]; 2] =
        std::array::from_fn(|j| std::array::from_fn(|i| d(&grid, j, &trace[i])));
    let inv = g.inv();
    let out = (0..n)
        .map(|p| {
            let gi = inv.at(p);
            let mut r = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    let mut rij = div_gamma[i + j][p] - d_trace[j][i][p];
                    for l in 0..2 {
                        rij += trace[l][p] * gam.at(l, i, j, p);
                        for k in 0..2 {
                            rij -= gam.at(k, j, l, p) * gam.at(l, k, i, p);
                        }
                    }
                    r += gi[i + j] * rij;
                }
            }
            r
        })
        .collect();
    ScalarField::from_vec(grid, out)
}

/// Fast path for `g = e^{2u} delta`: `R = -2 e^{-2u} Delta_0 u`.
pub fn conformal_scalar_curvature(u: &ScalarField) -> ScalarField {
    let flat = MetricField::flat(*u.grid());
    let lap = laplace_beltrami(u, &flat).expect("same grid");
    lap.zip_map(u, |l, v| -2.0 * (-2.0 * v).exp() * l)
}

/// Metric trace `H = g^ij h_ij`.
pub fn trace_tensor(h: &SymTensorField, g: &MetricField) -> Result<ScalarField> {
    h.grid().ensure_same(g.grid())?;
    let inv = g.inv();
    let out = (0..h.grid().len())
        .map(|k| {
            let [a, b, c] = inv.at(k);
            let [p, q, r] = h.at(k);
            a * p + 2.0 * b * q + c * r
        })
        .collect();
    Ok(ScalarField::from_vec(*h.grid(), out))
}

/// Both indices raised: `h^ij = g^ik h_kl g^lj`.
pub fn raise_tensor(h: &SymTensorField, g: &MetricField) -> Result<SymTensorField> {
    h.grid().ensure_same(g.grid())?;
    let inv = g.inv();
    Ok(h.map_points_with(inv, |[p, q, r], [a, b, c]| {
        // G H G with G = [[a, b], [b, c]], H = [[p, q], [q, r]]
        let (m11, m12, m21, m22) = (a * p + b * q, a * q + b * r, b * p + c * q, b * q + c * r);
        [m11 * a + m12 * b, m11 * b + m12 * c, m21 * b + m22 * c]
    }))
}

impl SymTensorField {
    fn map_points_with(
        &self,
        other: &SymTensorField,
        f: impl Fn([f64; 3], [f64; 3]) -> [f64; 3],
    ) -> SymTensorField {
        let n = self.grid().len();
        let (mut a, mut b, mut c) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for k in 0..n {
            let [x, y, z] = f(self.at(k), other.at(k));
            a[k] = x;
            b[k] = y;
            c[k] = z;
        }
        SymTensorField::from_vecs(*self.grid(), a, b, c)
    }
}

/// `|h|^2_g = h^ij h_ij`.
pub fn tensor_norm_sq(h: &SymTensorField, g: &MetricField) -> Result<ScalarField> {
    let up = raise_tensor(h, g)?;
    let out = (0..h.grid().len())
        .map(|k| {
            let [a, b, c] = up.at(k);
            let [p, q, r] = h.at(k);
            a * p + 2.0 * b * q + c * r
        })
        .collect();
    Ok(ScalarField::from_vec(*h.grid(), out))
}

/// `h_ij X^i Y^j` pointwise.
pub fn tensor_apply(h: &SymTensorField, x: &VectorField, y: &VectorField) -> Result<ScalarField> {
    h.grid().ensure_same(x.grid())?;
    h.grid().ensure_same(y.grid())?;
    let out = (0..h.grid().len())
        .map(|k| {
            let [a, b, c] = h.at(k);
            let (p1, p2, q1, q2) = (x.x1()[k], x.x2()[k], y.x1()[k], y.x2()[k]);
            a * p1 * q1 + b * (p1 * q2 + p2 * q1) + c * p2 * q2
        })
        .collect();
    Ok(ScalarField::from_vec(*h.grid(), out))
}

/// Covariant divergence `(div h)_l = g^ij nabla_i h_jl`, returned raised.
pub fn div_tensor(h: &SymTensorField, g: &MetricField) -> Result<VectorField> {
    h.grid().ensure_same(g.grid())?;
    let grid = *g.grid();
    let gam = christoffel(g);
    let dh = metric_partials(h);
    let inv = g.inv();
    let n = grid.len();
    let (mut w1, mut w2) = (vec![0.0; n], vec![0.0; n]);
    for p in 0..n {
        let gi = inv.at(p);
        let hp = h.at(p);
        let hc = |a: usize, b: usize| hp[a + b];
        for l in 0..2 {
            let mut s = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    let mut nab = dh[i][j + l][p];
                    for m in 0..2 {
                        nab -= gam.at(m, i, j, p) * hc(m, l) + gam.at(m, i, l, p) * hc(j, m);
                    }
                    s += gi[i + j] * nab;
                }
            }
            if l == 0 {
                w1[p] = s;
            } else {
                w2[p] = s;
            }
        }
    }
    raise(&CovectorField::from_vecs(grid, w1, w2), g)
}

/// `nabla_l h_ij = d_l h_ij - Gamma^m_li h_mj - Gamma^m_lj h_im`, indexed
/// `[l][i + j]`.
pub(crate) fn covariant_derivative_sym(h: &SymTensorField, gamma: &ChristoffelField) -> [[Vec<f64>; 3]; 2] {
    let dh = metric_partials(h);
    let n = h.grid().len();
    std::array::from_fn(|l| {
        std::array::from_fn(|ij| {
            let (i, j) = if ij == 0 { (0, 0) } else if ij == 1 { (0, 1) } else { (1, 1) };
            (0..n)
                .map(|p| {
                    let hp = h.at(p);
                    let hc = |a: usize, b: usize| hp[a + b];
                    let mut v = dh[l][ij][p];
                    for m in 0..2 {
                        v -= gamma.at(m, l, i, p) * hc(m, j) + gamma.at(m, l, j, p) * hc(i, m);
                    }
                    v
                })
                .collect()
        })
    })
}

/// `(g^ij nabla_l h_ij)_l`, the gradient of the trace written through the
/// covariant derivative of `h` (equal to `dH` by metric compatibility).
pub fn trace_of_covariant_derivative(h: &SymTensorField, g: &MetricField) -> Result<CovectorField> {
    h.grid().ensure_same(g.grid())?;
    let nab = covariant_derivative_sym(h, &christoffel(g));
    let inv = g.inv();
    let contract = |l: usize| -> Vec<f64> {
        (0..h.grid().len())
            .map(|p| {
                let [a, b, c] = inv.at(p);
                a * nab[l][0][p] + 2.0 * b * nab[l][1][p] + c * nab[l][2][p]
            })
            .collect()
    };
    Ok(CovectorField::from_vecs(*h.grid(), contract(0), contract(1)))
}

/// `a^ij (d_i w_j - Gamma^k_ij w_k)` for a symmetric contravariant `a`.
///
/// With `a = g^{-1}` this is the covariant divergence of `w`; with `w = df`
/// it is the contraction of the covariant Hessian.
pub fn contract_covariant_derivative(
    w: &CovectorField,
    a: &SymTensorField,
    gamma: &ChristoffelField,
) -> Result<ScalarField> {
    w.grid().ensure_same(a.grid())?;
    w.grid().ensure_same(gamma.grid())?;
    let grid = *w.grid();
    let (d1w1, d2w1) = (d_x(&grid, w.w1()), d_y(&grid, w.w1()));
    let (d1w2, d2w2) = (d_x(&grid, w.w2()), d_y(&grid, w.w2()));
    let out = (0..grid.len())
        .map(|p| {
            let [a11, a12, a22] = a.at(p);
            let (v1, v2) = (w.w1()[p], w.w2()[p]);
            let cor = |i: usize, j: usize| gamma.at(0, i, j, p) * v1 + gamma.at(1, i, j, p) * v2;
            a11 * (d1w1[p] - cor(0, 0))
                + a12 * (d1w2[p] + d2w1[p] - 2.0 * cor(0, 1))
                + a22 * (d2w2[p] - cor(1, 1))
        })
        .collect();
    Ok(ScalarField::from_vec(grid, out))
}

/// Covariant Hessian `nabla_i nabla_j f = d_i d_j f - Gamma^k_ij d_k f`.
pub fn covariant_hessian(f: &ScalarField, g: &MetricField) -> Result<SymTensorField> {
    f.grid().ensure_same(g.grid())?;
    let grid = *g.grid();
    let gam = christoffel(g);
    let (fx, fy) = (d_x(&grid, f.values()), d_y(&grid, f.values()));
    let (fxx, fxy, fyy) = (d_x(&grid, &fx), d_y(&grid, &fx), d_y(&grid, &fy));
    let n = grid.len();
    let (mut a, mut b, mut c) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for p in 0..n {
        let cor = |i: usize, j: usize| gam.at(0, i, j, p) * fx[p] + gam.at(1, i, j, p) * fy[p];
        a[p] = fxx[p] - cor(0, 0);
        b[p] = fxy[p] - cor(0, 1);
        c[p] = fyy[p] - cor(1, 1);
    }
    Ok(SymTensorField::from_vecs(grid, a, b, c))
}

/// `g^ij nabla_i nabla_j f`.
pub fn covariant_laplacian(f: &ScalarField, g: &MetricField) -> Result<ScalarField> {
    f.grid().ensure_same(g.grid())?;
    contract_covariant_derivative(&differential(f), g.inv(), &christoffel(g))
}

/// `g^ij nabla_i (Z nabla_j f)` with `Z = (|grad f|^2 + eps^2)^{(p-2)/2}`.
pub fn covariant_p_laplacian(f: &ScalarField, g: &MetricField, p: f64, eps: f64) -> Result<ScalarField> {
    check_p(p)?;
    f.grid().ensure_same(g.grid())?;
    let df = differential(f);
    let z = covector_norm_sq(&df, g).map(|s| pow_half(s + eps * eps, p - 2.0));
    contract_covariant_derivative(&df.scale_by(&z), g.inv(), &christoffel(g))
}

/// `int |grad f|^p dmu / int |f|^p dmu`.
pub fn rayleigh_quotient(f: &ScalarField, g: &MetricField, p: f64) -> Result<f64> {
    check_p(p)?;
    f.grid().ensure_same(g.grid())?;
    let num = integrate(&crate::manifold::grad_norm_pow(f, g, p, 0.0)?, g)?;
    let den = integrate(&f.map(|v| v.abs().powf(p)), g)?;
    if den < 1e-300 {
        return Err(Error::ZeroDenominator(den));
    }
    Ok(num / den)
}
