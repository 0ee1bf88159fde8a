//! Navigation transform from `(h, W = mu ∂θ)` to the Randers data `(a, b)`,
//! evaluation of `F = α + β`, its fundamental tensor and the Finslerian cosine.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{Profile, SurfacePoint};

/// Coefficients of `F = sqrt(a11 y1^2 + a22 y2^2) + b2 y2` at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RandersData {
    pub a11: f64,
    pub a22: f64,
    pub b2: f64,
    /// `1 - mu^2 m^2`
    pub lambda: f64,
}

impl RandersData {
    /// `a^{22} b2^2`, the squared α-norm of β. Equals `(mu m)^2`.
    pub fn b_norm_sq(&self) -> f64 {
        self.b2 * self.b2 / self.a22
    }
}

/// Tangent vector `y1 ∂r + y2 ∂θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tangent {
    pub y1: f64,
    pub y2: f64,
}

impl Tangent {
    pub fn new(y1: f64, y2: f64) -> Self {
        Self { y1, y2 }
    }
    pub fn is_zero(&self) -> bool {
        self.y1 == 0.0 && self.y2 == 0.0
    }
    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.y1 * k, self.y2 * k)
    }
}

/// Symmetric 2x2 matrix `[[g11, g12], [g12, g22]]`.
pub type Sym2 = [[f64; 2]; 2];

pub fn navigation_transform(p: &Profile, r: f64) -> Result<RandersData> {
    let m = p.m(r);
    let mu = p.mu();
    let mu_m = mu * m;
    if mu_m >= 1.0 || !mu_m.is_finite() {
        return Err(Error::MetricDegenerate { r, mu_m });
    }
    Ok(randers_data(mu, m))
}

#[inline]
pub(crate) fn randers_data(mu: f64, m: f64) -> RandersData {
    let lambda = 1.0 - mu * mu * m * m;
    RandersData {
        a11: 1.0 / lambda,
        a22: m * m / (lambda * lambda),
        b2: -mu * m * m / lambda,
        lambda,
    }
}

/// `α + β` without argument checks. Hot path for integrators and quadrature.
#[inline]
pub fn f_norm(p: &Profile, r: f64, y1: f64, y2: f64) -> f64 {
    let d = randers_data(p.mu(), p.m(r));
    (d.a11 * y1 * y1 + d.a22 * y2 * y2).sqrt() + d.b2 * y2
}

/// `F(x, y)` via `α + β`.
pub fn eval_f(p: &Profile, x: SurfacePoint, y: Tangent) -> Result<f64> {
    if y.is_zero() {
        return Err(Error::InvalidParameter("zero tangent vector".into()));
    }
    navigation_transform(p, x.r)?;
    let f = f_norm(p, x.r, y.y1, y.y2);
    debug_assert!(
        {
            let g = eval_f_navigation(p, x, y).unwrap_or(f);
            (f - g).abs() <= 1e-11 * f.max(1.0)
        },
        "Randers and navigation forms disagree"
    );
    Ok(f)
}

/// `F(x, y)` via the navigation form `(sqrt(λ|y|^2 + W0^2) - W0) / λ`, with
/// the rationalised variant when `W0 > 0` to avoid cancellation.
pub fn eval_f_navigation(p: &Profile, x: SurfacePoint, y: Tangent) -> Result<f64> {
    if y.is_zero() {
        return Err(Error::InvalidParameter("zero tangent vector".into()));
    }
    let m = p.m(x.r);
    let mu = p.mu();
    let lambda = 1.0 - mu * mu * m * m;
    if lambda <= 0.0 {
        return Err(Error::MetricDegenerate { r: x.r, mu_m: mu * m });
    }
    let h_yy = y.y1 * y.y1 + m * m * y.y2 * y.y2;
    let w0 = mu * m * m * y.y2;
    let root = (lambda * h_yy + w0 * w0).sqrt();
    Ok(if w0 > 0.0 {
        h_yy / (root + w0)
    } else {
        (root - w0) / lambda
    })
}

/// `g_ij(x, y) = ½ ∂²F²/∂y^i∂y^j` from the closed Randers form
/// `(F/α)(a_ij - α_i α_j) + (α_i + b_i)(α_j + b_j)`, `α_i = a_ij y^j / α`.
pub fn fundamental_tensor(p: &Profile, x: SurfacePoint, y: Tangent) -> Result<Sym2> {
    if y.is_zero() {
        return Err(Error::InvalidParameter("zero tangent vector".into()));
    }
    if x.r <= 0.0 {
        return Err(Error::VertexSingular);
    }
    let d = navigation_transform(p, x.r)?;
    Ok(tensor_from(&d, y))
}

pub(crate) fn tensor_from(d: &RandersData, y: Tangent) -> Sym2 {
    let alpha = (d.a11 * y.y1 * y.y1 + d.a22 * y.y2 * y.y2).sqrt();
    let f = alpha + d.b2 * y.y2;
    let l = [d.a11 * y.y1 / alpha, d.a22 * y.y2 / alpha];
    let b = [0.0, d.b2];
    let a = [[d.a11, 0.0], [0.0, d.a22]];
    let mut g = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            g[i][j] = f / alpha * (a[i][j] - l[i] * l[j]) + (l[i] + b[i]) * (l[j] + b[j]);
        }
    }
    g
}

fn bilinear(g: &Sym2, u: Tangent, v: Tangent) -> f64 {
    g[0][0] * u.y1 * v.y1 + g[0][1] * (u.y1 * v.y2 + u.y2 * v.y1) + g[1][1] * u.y2 * v.y2
}

/// `g_y(u, v)` at `x`.
pub fn inner_product(p: &Profile, x: SurfacePoint, y: Tangent, u: Tangent, v: Tangent) -> Result<f64> {
    let g = fundamental_tensor(p, x, y)?;
    Ok(bilinear(&g, u, v))
}

/// `g_y(y, v) / (|y|_{g_y} |v|_{g_y})`.
pub fn cos_f(p: &Profile, x: SurfacePoint, y: Tangent, v: Tangent) -> Result<f64> {
    if v.is_zero() {
        return Err(Error::InvalidParameter("zero tangent vector".into()));
    }
    let g = fundamental_tensor(p, x, y)?;
    Ok(bilinear(&g, y, v) / (bilinear(&g, y, y).sqrt() * bilinear(&g, v, v).sqrt()))
}

/// Background Riemannian norm squared `h(y, y) = y1^2 + m^2 y2^2`.
#[inline]
pub fn h_norm_sq(p: &Profile, r: f64, y: Tangent) -> f64 {
    let m = p.m(r);
    y.y1 * y.y1 + m * m * y.y2 * y.y2
}
