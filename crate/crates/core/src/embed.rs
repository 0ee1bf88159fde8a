//! Embedding of the Randers surface into the Minkowski cylinder
//! `x² + y² < 1/μ²` carrying Euclidean space navigated by the rotational wind
//! `(−μy, μx, 0)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geodesics::GeodesicPath;
use crate::par::Exec;
use crate::profile::{Profile, SurfacePoint};
use crate::quad;
use crate::zermelo::{f_norm, navigation_transform, Tangent};

/// Grid size for the `|m'| <= 1` check.
pub const EMBED_GRID: usize = 10_000;
const HEIGHT_NODES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinkowskiPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl MinkowskiPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
    pub fn rho_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }
}

/// Randers data of the Minkowski cylinder at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinkowskiRanders {
    pub mu: f64,
    pub lambda_t: f64,
    pub a_t: [[f64; 3]; 3],
    pub b_t: [f64; 3],
}

impl MinkowskiRanders {
    pub fn at(mu: f64, pt: MinkowskiPoint) -> Result<Self> {
        let rho2 = pt.rho_sq();
        let lambda_t = 1.0 - mu * mu * rho2;
        if !(lambda_t > 0.0) {
            return Err(Error::OutsideCylinder {
                rho2,
                bound: 1.0 / (mu * mu),
            });
        }
        let (x, y) = (pt.x, pt.y);
        let k = 1.0 / (lambda_t * lambda_t);
        let mu2 = mu * mu;
        let a_t = [
            [k * (1.0 - mu2 * x * x), -k * mu2 * x * y, 0.0],
            [-k * mu2 * x * y, k * (1.0 - mu2 * y * y), 0.0],
            [0.0, 0.0, 1.0 / lambda_t],
        ];
        let b_t = [mu * y / lambda_t, -mu * x / lambda_t, 0.0];
        Ok(Self {
            mu,
            lambda_t,
            a_t,
            b_t,
        })
    }

    pub fn alpha(&self, v: [f64; 3]) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.a_t[i][j] * v[i] * v[j];
            }
        }
        s.max(0.0).sqrt()
    }

    pub fn beta(&self, v: [f64; 3]) -> f64 {
        self.b_t.iter().zip(v).map(|(b, y)| b * y).sum()
    }

    pub fn eval(&self, v: [f64; 3]) -> f64 {
        self.alpha(v) + self.beta(v)
    }
}

/// `F̃(point, v)`.
pub fn eval_f_tilde(mu: f64, pt: MinkowskiPoint, v: [f64; 3]) -> Result<f64> {
    if v.iter().all(|c| *c == 0.0) {
        return Err(Error::InvalidParameter("zero tangent vector".into()));
    }
    Ok(MinkowskiRanders::at(mu, pt)?.eval(v))
}

/// Embedding `(r, θ) ↦ (m cos θ, m sin θ, z(r))`, `z' = sqrt(1 − m'²)`.
#[derive(Debug, Clone)]
pub struct Embedding {
    profile: Profile,
    /// Points with `r` beyond this radius are not embeddable.
    limit: f64,
    violation: Option<(f64, f64)>,
    node_h: f64,
    heights: Vec<f64>,
}

impl Embedding {
    pub fn new(p: &Profile) -> Result<Self> {
        let r_max = p.r_max();
        let mut violation = None;
        for i in 0..=EMBED_GRID {
            let r = r_max * i as f64 / EMBED_GRID as f64;
            let a = p.m1(r).abs();
            if a > 1.0 + 1e-12 {
                violation = Some((r, a));
                break;
            }
        }
        let limit = violation.map_or(r_max, |(r, _)| r);
        let node_h = limit / HEIGHT_NODES as f64;
        let mut heights = Vec::with_capacity(HEIGHT_NODES + 1);
        heights.push(0.0);
        for k in 0..HEIGHT_NODES {
            let a = k as f64 * node_h;
            let seg = quad::integrate(|t| slope(p, t), a, a + node_h, 1e-13)?;
            heights.push(heights[k] + seg);
        }
        Ok(Self {
            profile: p.clone(),
            limit,
            violation,
            node_h,
            heights,
        })
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn limit(&self) -> f64 {
        self.limit
    }

    fn check(&self, r: f64) -> Result<()> {
        match self.violation {
            Some((bad, m1_abs)) if r >= bad => Err(Error::NotEmbeddable { r: bad, m1_abs }),
            _ => Ok(()),
        }
    }

    /// `z(r) = ∫₀ʳ sqrt(1 − m'(t)²) dt`.
    pub fn height(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::InvalidParameter(format!("negative radius {r}")));
        }
        self.check(r)?;
        let k = ((r / self.node_h) as usize).min(HEIGHT_NODES);
        let a = k as f64 * self.node_h;
        let tail = if r > a {
            quad::integrate(|t| slope(&self.profile, t), a, r, 1e-13)?
        } else {
            0.0
        };
        Ok(self.heights[k] + tail)
    }

    pub fn embed_point(&self, q: SurfacePoint) -> Result<MinkowskiPoint> {
        let m = self.profile.m(q.r);
        let (s, c) = q.theta.sin_cos();
        Ok(MinkowskiPoint::new(m * c, m * s, self.height(q.r)?))
    }

    pub fn pushforward(&self, q: SurfacePoint, v: Tangent) -> Result<[f64; 3]> {
        self.check(q.r)?;
        let p = &self.profile;
        let (m, m1) = (p.m(q.r), p.m1(q.r));
        let (s, c) = q.theta.sin_cos();
        Ok([
            m1 * c * v.y1 - m * s * v.y2,
            m1 * s * v.y1 + m * c * v.y2,
            slope(p, q.r) * v.y1,
        ])
    }

    /// `F̃(φ(q), φ_* v)`.
    pub fn f_tilde(&self, q: SurfacePoint, v: Tangent) -> Result<f64> {
        let pt = self.embed_point(q)?;
        eval_f_tilde(self.profile.mu(), pt, self.pushforward(q, v)?)
    }

    /// `|F(q, v) − F̃(φ(q), φ_* v)|`.
    pub fn pullback_residual(&self, q: SurfacePoint, v: Tangent) -> Result<f64> {
        navigation_transform(&self.profile, q.r)?;
        let f = f_norm(&self.profile, q.r, v.y1, v.y2);
        Ok((f - self.f_tilde(q, v)?).abs())
    }

    /// F̃-length of the embedded image of `path`.
    pub fn f_tilde_length(&self, path: &GeodesicPath) -> Result<f64> {
        let mut total = 0.0;
        let mut err = None;
        for w in path.samples().windows(2) {
            total += quad::gauss_legendre8(
                |s| {
                    let st = path.state_at(s);
                    match self.f_tilde(st.point(), st.velocity()) {
                        Ok(v) => v,
                        Err(e) => {
                            err.get_or_insert(e);
                            0.0
                        }
                    }
                },
                w[0].s,
                w[1].s,
            );
        }
        match err {
            Some(e) => Err(e),
            None => Ok(total),
        }
    }

    /// Embedded polyline of `path` sampled every `ds`.
    pub fn polyline(&self, path: &GeodesicPath, ds: f64) -> Result<Vec<MinkowskiPoint>> {
        path.resample(ds)
            .into_iter()
            .map(|(_, st)| self.embed_point(st.point()))
            .collect()
    }
}

fn slope(p: &Profile, r: f64) -> f64 {
    let m1 = p.m1(r);
    (1.0 - m1 * m1).max(0.0).sqrt()
}

/// Sine of the angle at `a` spanned by `b` and `c`; zero for collinear points.
pub fn collinearity(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let w = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let n = |x: [f64; 3]| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    n(w) / (n(u) * n(v))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PullbackReport {
    pub samples: usize,
    pub max_residual: f64,
    pub mu: f64,
    pub profile: String,
    pub seed: u64,
    pub r_range: [f64; 2],
}

/// Residuals at `n` seeded random `(point, direction)` pairs with
/// `r ∈ r_range`. Directions are h-unit vectors scaled by a factor in `[0.1, 10]`.
pub fn certify_pullback(
    emb: &Embedding,
    n: usize,
    seed: u64,
    r_range: [f64; 2],
    exec: Exec,
) -> Result<PullbackReport> {
    let p = emb.profile();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<(SurfacePoint, Tangent)> = (0..n)
        .map(|_| {
            let r = rng.gen_range(r_range[0]..r_range[1]);
            let th = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let psi = rng.gen_range(0.0..std::f64::consts::TAU);
            let k = 10f64.powf(rng.gen_range(-1.0..1.0));
            let v = Tangent::new(k * psi.cos(), k * psi.sin() / p.m(r));
            (SurfacePoint::new(r, th), v)
        })
        .collect();
    let residuals = exec.map(&cases, |(q, v)| emb.pullback_residual(*q, *v));
    let mut max_residual: f64 = 0.0;
    for r in residuals {
        max_residual = max_residual.max(r?);
    }
    Ok(PullbackReport {
        samples: n,
        max_residual,
        mu: p.mu(),
        profile: format!("{:?}", p.kind()),
        seed,
        r_range,
    })
}

/// The ã-pullback of `∂r` under the map with height `z = r`, next to `a11`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiteralHeightCheck {
    pub r: f64,
    pub pulled_back: f64,
    pub a11: f64,
    pub mismatch: f64,
}

pub fn literal_height_check(p: &Profile, r: f64) -> Result<LiteralHeightCheck> {
    let d = navigation_transform(p, r)?;
    let pt = MinkowskiPoint::new(p.m(r), 0.0, r);
    let mr = MinkowskiRanders::at(p.mu(), pt)?;
    let pulled = mr.alpha([p.m1(r), 0.0, 1.0]).powi(2);
    Ok(LiteralHeightCheck {
        r,
        pulled_back: pulled,
        a11: d.a11,
        mismatch: pulled - d.a11,
    })
}
