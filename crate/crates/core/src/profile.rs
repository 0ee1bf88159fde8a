//! Warp functions `m(r)` of rotational metrics `dr^2 + m(r)^2 dθ^2`, their
//! derivatives, Gauss curvature and a few structural predicates.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::quad;

/// Default numerical domain cap for catalog profiles.
pub const DEFAULT_R_MAX: f64 = 20.0;

/// Grid resolution used to locate critical points of `m` and to check
/// boundedness of user profiles.
const SCAN_POINTS: usize = 10_000;

/// A warp function with two analytic derivatives.
pub trait Warp: Send + Sync {
    fn m(&self, r: f64) -> f64;
    fn m1(&self, r: f64) -> f64;
    fn m2(&self, r: f64) -> f64;
}

/// `m(r) = r / sqrt(c^2 r^2 + 1)`, bounded by `1/c`.
#[derive(Debug, Clone, Copy)]
pub struct ParaboloidWarp {
    pub c: f64,
}

impl Warp for ParaboloidWarp {
    fn m(&self, r: f64) -> f64 {
        r / (self.c * self.c * r * r + 1.0).sqrt()
    }
    fn m1(&self, r: f64) -> f64 {
        (self.c * self.c * r * r + 1.0).powf(-1.5)
    }
    fn m2(&self, r: f64) -> f64 {
        let c2 = self.c * self.c;
        -3.0 * c2 * r * (c2 * r * r + 1.0).powf(-2.5)
    }
}

/// Warp given by three parsed expressions; `mu` inside the expressions is
/// bound to the value supplied at construction.
#[derive(Debug, Clone)]
pub struct ExprWarp {
    m: Expr,
    m1: Expr,
    m2: Expr,
    mu: f64,
}

impl Warp for ExprWarp {
    fn m(&self, r: f64) -> f64 {
        self.m.eval(r, self.mu)
    }
    fn m1(&self, r: f64) -> f64 {
        self.m1.eval(r, self.mu)
    }
    fn m2(&self, r: f64) -> f64 {
        self.m2.eval(r, self.mu)
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

struct FnWarp {
    m: ScalarFn,
    m1: ScalarFn,
    m2: ScalarFn,
}

impl Warp for FnWarp {
    fn m(&self, r: f64) -> f64 {
        (self.m)(r)
    }
    fn m1(&self, r: f64) -> f64 {
        (self.m1)(r)
    }
    fn m2(&self, r: f64) -> f64 {
        (self.m2)(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    ParaboloidLike,
    CustomAnalytic,
}

/// Surface definition as read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SurfaceSpec {
    Paraboloid {
        mu: f64,
        #[serde(default = "default_r_max")]
        r_max: f64,
    },
    Custom {
        mu: f64,
        #[serde(default = "default_r_max")]
        r_max: f64,
        m: String,
        m1: String,
        m2: String,
    },
}

fn default_r_max() -> f64 {
    DEFAULT_R_MAX
}

impl SurfaceSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("surface definition: {e}")))
    }

    pub fn build(&self) -> Result<Profile> {
        match self {
            SurfaceSpec::Paraboloid { mu, r_max } => Profile::paraboloid(*mu, *r_max),
            SurfaceSpec::Custom {
                mu,
                r_max,
                m,
                m1,
                m2,
            } => Profile::custom(m, m1, m2, *mu, *r_max),
        }
    }

    /// Replaces the wind strength (and for the paraboloid, the shape parameter).
    pub fn with_mu(&self, new_mu: f64) -> Self {
        let mut s = self.clone();
        match &mut s {
            SurfaceSpec::Paraboloid { mu, .. } | SurfaceSpec::Custom { mu, .. } => *mu = new_mu,
        }
        s
    }
}

/// A point in h-geodesic polar coordinates around the vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub r: f64,
    /// Unreduced angle; reduce with [`SurfacePoint::theta_mod`] for comparisons.
    pub theta: f64,
}

impl SurfacePoint {
    pub fn new(r: f64, theta: f64) -> Self {
        Self { r, theta }
    }

    pub fn vertex() -> Self {
        Self { r: 0.0, theta: 0.0 }
    }

    pub fn is_vertex(&self) -> bool {
        self.r == 0.0
    }

    pub fn theta_mod(&self) -> f64 {
        self.theta.rem_euclid(std::f64::consts::TAU)
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let t = (a + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
    if t == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        t
    }
}

/// A bounded rotational profile together with the wind strength `mu`.
#[derive(Clone)]
pub struct Profile {
    warp: Arc<dyn Warp>,
    mu: f64,
    r_max: f64,
    kind: ProfileKind,
    spec: Option<SurfaceSpec>,
    critical: Arc<Vec<f64>>,
    m_sup: f64,
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Profile")
            .field("kind", &self.kind)
            .field("mu", &self.mu)
            .field("r_max", &self.r_max)
            .field("critical", &self.critical)
            .finish()
    }
}

/// The paraboloid-like profile `m(r) = r / sqrt(mu^2 r^2 + 1)` with wind `mu`.
pub fn make_paraboloid(mu: f64) -> Result<Profile> {
    Profile::paraboloid(mu, DEFAULT_R_MAX)
}

impl Profile {
    pub fn paraboloid(mu: f64, r_max: f64) -> Result<Profile> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        Self::check_r_max(r_max)?;
        let warp = Arc::new(ParaboloidWarp { c: mu });
        Self::assemble(
            warp,
            mu,
            r_max,
            ProfileKind::ParaboloidLike,
            Some(SurfaceSpec::Paraboloid { mu, r_max }),
        )
    }

    /// Builds a profile from expression strings for `m`, `m'` and `m''`.
    pub fn custom(m: &str, m1: &str, m2: &str, mu: f64, r_max: f64) -> Result<Profile> {
        let warp = ExprWarp {
            m: Expr::parse(m)?,
            m1: Expr::parse(m1)?,
            m2: Expr::parse(m2)?,
            mu,
        };
        let spec = SurfaceSpec::Custom {
            mu,
            r_max,
            m: m.into(),
            m1: m1.into(),
            m2: m2.into(),
        };
        Self::validated(Arc::new(warp), mu, r_max, Some(spec))
    }

    /// Builds a profile from Rust closures; validated like expression profiles.
    pub fn from_fns<M, M1, M2>(m: M, m1: M1, m2: M2, mu: f64, r_max: f64) -> Result<Profile>
    where
        M: Fn(f64) -> f64 + Send + Sync + 'static,
        M1: Fn(f64) -> f64 + Send + Sync + 'static,
        M2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let warp = FnWarp {
            m: Arc::new(m),
            m1: Arc::new(m1),
            m2: Arc::new(m2),
        };
        Self::validated(Arc::new(warp), mu, r_max, None)
    }

    fn check_r_max(r_max: f64) -> Result<()> {
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::InvalidParameter(format!("r_max must be positive, got {r_max}")));
        }
        Ok(())
    }

    fn validated(
        warp: Arc<dyn Warp>,
        mu: f64,
        r_max: f64,
        spec: Option<SurfaceSpec>,
    ) -> Result<Profile> {
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("mu must be non-negative, got {mu}")));
        }
        Self::check_r_max(r_max)?;
        let m0 = warp.m(0.0);
        let d0 = warp.m1(0.0);
        if m0.abs() > 1e-12 || (d0 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "profile must satisfy m(0) = 0 and m'(0) = 1, got m(0) = {m0}, m'(0) = {d0}"
            )));
        }
        // derivative consistency against central differences
        let n = 200;
        for i in 1..=n {
            let r = r_max * i as f64 / n as f64;
            // Richardson-extrapolated central differences, O(h^4)
            let d1 = |h: f64| (warp.m(r + h) - warp.m(r - h)) / (2.0 * h);
            let d2 = |h: f64| (warp.m(r + h) - 2.0 * warp.m(r) + warp.m(r - h)) / (h * h);
            let h = 1e-3 * r.max(1.0);
            let fd1 = (4.0 * d1(0.5 * h) - d1(h)) / 3.0;
            let hh = 1e-2 * r.max(1.0);
            let fd2 = (4.0 * d2(0.5 * hh) - d2(hh)) / 3.0;
            let (a1, a2) = (warp.m1(r), warp.m2(r));
            if (a1 - fd1).abs() > 1e-6 * a1.abs().max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "m' disagrees with finite differences at r = {r}: {a1} vs {fd1}"
                )));
            }
            if (a2 - fd2).abs() > 1e-6 * a2.abs().max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "m'' disagrees with finite differences at r = {r}: {a2} vs {fd2}"
                )));
            }
        }
        Self::assemble(warp, mu, r_max, ProfileKind::CustomAnalytic, spec)
    }

    fn assemble(
        warp: Arc<dyn Warp>,
        mu: f64,
        r_max: f64,
        kind: ProfileKind,
        spec: Option<SurfaceSpec>,
    ) -> Result<Profile> {
        let mut m_sup: f64 = 0.0;
        for i in 1..=SCAN_POINTS {
            let r = r_max * i as f64 / SCAN_POINTS as f64;
            let m = warp.m(r);
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::InvalidParameter(format!("m(r) must be positive, m({r}) = {m}")));
            }
            if mu * m >= 1.0 {
                return Err(Error::MetricDegenerate { r, mu_m: mu * m });
            }
            m_sup = m_sup.max(m);
        }
        let grid: Vec<f64> = (0..=SCAN_POINTS)
            .map(|i| r_max * i as f64 / SCAN_POINTS as f64)
            .collect();
        let critical = sign_changes(|r| warp.m1(r), &grid, 1e-13);
        Ok(Profile {
            warp,
            mu,
            r_max,
            kind,
            spec,
            critical: Arc::new(critical),
            m_sup,
        })
    }

    /// Same shape with a different wind strength (`mu = 0` gives the
    /// Riemannian limit). Fails if the new wind is not a mild breeze.
    pub fn with_wind(&self, mu: f64) -> Result<Profile> {
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("mu must be non-negative, got {mu}")));
        }
        if mu * self.m_sup >= 1.0 {
            return Err(Error::MetricDegenerate {
                r: f64::NAN,
                mu_m: mu * self.m_sup,
            });
        }
        let mut p = self.clone();
        p.mu = mu;
        p.spec = None;
        Ok(p)
    }

    /// Same profile on a different numerical domain.
    pub fn with_r_max(&self, r_max: f64) -> Result<Profile> {
        Self::check_r_max(r_max)?;
        let spec = self.spec.clone().map(|s| match s {
            SurfaceSpec::Paraboloid { mu, .. } => SurfaceSpec::Paraboloid { mu, r_max },
            SurfaceSpec::Custom {
                mu, m, m1, m2, ..
            } => SurfaceSpec::Custom {
                mu,
                r_max,
                m,
                m1,
                m2,
            },
        });
        Self::assemble(self.warp.clone(), self.mu, r_max, self.kind, spec)
    }

    #[inline]
    pub fn m(&self, r: f64) -> f64 {
        self.warp.m(r)
    }
    #[inline]
    pub fn m1(&self, r: f64) -> f64 {
        self.warp.m1(r)
    }
    #[inline]
    pub fn m2(&self, r: f64) -> f64 {
        self.warp.m2(r)
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn kind(&self) -> ProfileKind {
        self.kind
    }
    pub fn spec(&self) -> Option<&SurfaceSpec> {
        self.spec.as_ref()
    }

    /// Largest sampled value of `m` on `(0, r_max]`.
    pub fn m_sup(&self) -> f64 {
        self.m_sup
    }

    /// Sorted radii in `(0, r_max)` where `m'` changes sign.
    pub fn critical_radii(&self) -> &[f64] {
        &self.critical
    }

    /// Cut-off below which curvature is evaluated through its vertex limit.
    pub fn r_eps(&self) -> f64 {
        1e-6 * self.r_max.max(1.0)
    }

    /// Gauss curvature `G = -m''/m`.
    pub fn gauss_curvature(&self, r: f64) -> f64 {
        let r = r.abs().max(self.r_eps());
        -self.m2(r) / self.m(r)
    }

    /// `min (1 - mu m(r))` over the scan grid.
    pub fn boundedness_margin(&self) -> f64 {
        1.0 - self.mu * self.m_sup
    }

    /// Checks whether `G` is non-increasing along `grid`.
    pub fn is_von_mangoldt(&self, grid: &[f64]) -> Result<MangoldtVerdict> {
        self.check_grid(grid)?;
        let mut prev = self.gauss_curvature(grid[0]);
        for (i, &r) in grid.iter().enumerate().skip(1) {
            let g = self.gauss_curvature(r);
            if g > prev + 1e-10 {
                return Ok(MangoldtVerdict {
                    holds: false,
                    first_violation: Some(i),
                });
            }
            prev = g;
        }
        Ok(MangoldtVerdict {
            holds: true,
            first_violation: None,
        })
    }

    /// Radii of geodesic parallels (`m'(r) = 0`) bracketed on `grid`.
    pub fn geodesic_parallels(&self, grid: &[f64]) -> Vec<f64> {
        sign_changes(|r| self.m1(r), grid, 1e-10)
    }

    fn check_grid(&self, grid: &[f64]) -> Result<()> {
        if grid.is_empty() {
            return Err(Error::InvalidParameter("empty radius grid".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("radius grid must be strictly increasing".into()));
        }
        if grid[0] < 0.0 || grid[grid.len() - 1] > self.r_max * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "radius grid must lie in [0, {}]",
                self.r_max
            )));
        }
        Ok(())
    }

    /// Evenly spaced grid on `[0, r_max]` with `n + 1` points.
    pub fn uniform_grid(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|i| self.r_max * i as f64 / n as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MangoldtVerdict {
    pub holds: bool,
    pub first_violation: Option<usize>,
}

/// Refined roots of `f` at every sign change along `grid`.
fn sign_changes<F: Fn(f64) -> f64>(f: F, grid: &[f64], tol: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (f(a), f(b));
        if fa == 0.0 {
            if out.last() != Some(&a) && a > grid[0] {
                out.push(a);
            }
            continue;
        }
        if fa.signum() != fb.signum() && fb != 0.0 {
            if let Ok(r) = quad::bisect(&f, a, b, tol) {
                out.push(r);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump() -> Profile {
        // single interior maximum of m at r = 1
        Profile::custom(
            "r/(1+r^2)",
            "(1-r^2)/(1+r^2)^2",
            "2*r*(r^2-3)/(1+r^2)^3",
            1.0,
            10.0,
        )
        .unwrap()
    }

    #[test]
    fn paraboloid_values() {
        let p = make_paraboloid(1.0).unwrap();
        assert_eq!(p.m(0.0), 0.0);
        assert!((p.m(1.0) - 0.707_106_781_186_547_5).abs() < 1e-15);
        assert!((p.m1(1.0) - 0.353_553_390_593_273_8).abs() < 1e-15);
        assert!((p.gauss_curvature(1.0) - 0.75).abs() < 1e-14);
        assert!((p.gauss_curvature(0.0) - 3.0).abs() < 1e-8);
    }

    #[test]
    fn paraboloid_rejects_bad_mu() {
        assert!(matches!(make_paraboloid(0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(make_paraboloid(-1.0), Err(Error::InvalidParameter(_))));
        assert!(make_paraboloid(f64::NAN).is_err());
    }

    #[test]
    fn von_mangoldt_predicate() {
        let p = make_paraboloid(1.0).unwrap();
        let grid: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.01).collect();
        assert!(p.is_von_mangoldt(&grid).unwrap().holds);
        assert!(p.is_von_mangoldt(&[0.5]).unwrap().holds);
        assert!(p.is_von_mangoldt(&[]).is_err());

        let b = bump();
        let v = b.is_von_mangoldt(&b.uniform_grid(1000)).unwrap();
        assert!(!v.holds);
        let idx = v.first_violation.unwrap();
        // G = 2(3 - r^2)/(1 + r^2)^2 has its minimum at r = sqrt(7)
        let r = b.uniform_grid(1000)[idx];
        assert!((r - 7f64.sqrt()).abs() < 0.02, "{r}");
    }

    #[test]
    fn geodesic_parallels_found() {
        let p = make_paraboloid(1.0).unwrap();
        assert!(p.geodesic_parallels(&p.uniform_grid(2000)).is_empty());
        let b = bump();
        let par = b.geodesic_parallels(&b.uniform_grid(2000));
        assert_eq!(par.len(), 1);
        assert!((par[0] - 1.0).abs() < 1e-10);
        assert!(b.geodesic_parallels(&[0.5]).is_empty());
        assert_eq!(b.critical_radii().len(), 1);
    }

    #[test]
    fn custom_profile_validation() {
        // wrong derivative
        assert!(Profile::custom("r/(1+r^2)", "1", "0", 1.0, 5.0).is_err());
        // m'(0) != 1
        assert!(Profile::custom("2*r", "2", "0", 0.01, 5.0).is_err());
        // wind too strong: max m = 1/2, so mu = 2 degenerates
        assert!(matches!(
            Profile::custom("r/(1+r^2)", "(1-r^2)/(1+r^2)^2", "2*r*(r^2-3)/(1+r^2)^3", 2.5, 5.0),
            Err(Error::MetricDegenerate { .. })
        ));
        let flat = Profile::custom("r", "1", "0", 0.01, 50.0).unwrap();
        assert_eq!(flat.gauss_curvature(3.0), 0.0);
    }

    #[test]
    fn surface_spec_roundtrip() {
        let s = SurfaceSpec::from_json(r#"{ "kind": "paraboloid", "mu": 1.0, "r_max": 20.0 }"#)
            .unwrap();
        let p = s.build().unwrap();
        assert_eq!(p.kind(), ProfileKind::ParaboloidLike);
        assert!((p.boundedness_margin() - (1.0 - 20.0 / 401f64.sqrt())).abs() < 1e-12);
        let c = SurfaceSpec::from_json(
            r#"{ "kind": "custom", "mu": 1.0, "r_max": 5.0,
                 "m": "r/sqrt(mu^2*r^2+1)", "m1": "(mu^2*r^2+1)^(-1.5)",
                 "m2": "-3*mu^2*r*(mu^2*r^2+1)^(-2.5)" }"#,
        )
        .unwrap();
        let q = c.build().unwrap();
        assert!((q.m(1.0) - p.m(1.0)).abs() < 1e-15);
        assert!(SurfaceSpec::from_json(r#"{ "kind": "torus", "mu": 1.0 }"#).is_err());
        assert!(SurfaceSpec::from_json(r#"{ "kind": "paraboloid", "mu": 1.0, "bogus": 1 }"#)
            .is_err());
    }

    #[test]
    fn wrap_angle_range() {
        use std::f64::consts::PI;
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
    }
}
