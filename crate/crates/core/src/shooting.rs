//! Two-point boundary problems by shooting over the initial heading.
//!
//! Every h-geodesic from `q1` is labelled by its heading `φ` (angle from the
//! outward meridian). Its radial motion is split into monotone legs between
//! turning points, and each passage through the target radius is one
//! *crossing*. For a fixed crossing the angular miss is a continuous function
//! of `φ`, so roots are bracketed on a uniform heading scan and refined with
//! Brent's method. A twist rate `w` adds `w·s` to the angle, which turns the
//! same machinery into F-geodesic shooting.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geodesics::{integrate_h, quadrature_segment_tol, twist, GeodesicPath, GeodesicState};
use crate::par::Exec;
use crate::profile::{wrap_angle, Profile, SurfacePoint};
use crate::quad;

/// One geodesic from `q1` that reaches the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Shot {
    /// h-heading at `q1`, in (-π, π].
    pub heading: f64,
    pub nu: f64,
    /// Parameter length; h-length of the pre-image and F-length when twisted.
    pub length: f64,
    /// Index of the passage through the target radius.
    pub crossing: usize,
    /// Residual angular miss at the target.
    pub miss: f64,
}

#[derive(Debug, Clone, Copy)]
struct Crossing {
    index: usize,
    up: bool,
    s: f64,
    dtheta: f64,
}

/// Radial structure of the h-geodesic with Clairaut constant `nu` through `r1`.
#[derive(Debug, Clone, Copy)]
struct Orbit {
    nu: f64,
    up: bool,
    r1: f64,
    lo: f64,
    hi: Option<f64>,
}

/// Below this |ν| the geodesic is treated as the meridian through the vertex.
const NU_MERIDIAN: f64 = 1e-10;

fn monotone_pieces(p: &Profile) -> Vec<f64> {
    let mut knots = vec![0.0];
    knots.extend_from_slice(p.critical_radii());
    knots.push(p.r_max());
    knots
}

fn root_in(p: &Profile, anu: f64, a: f64, b: f64) -> Result<f64> {
    Ok(quad::brent(|r| p.m(r) - anu, a, b, 1e-15)?.0)
}

impl Orbit {
    /// At a fold heading the turning point nearest `r2` is snapped onto it.
    fn with_fold(p: &Profile, r1: f64, phi: f64, r2: f64) -> Result<Orbit> {
        let mut o = Orbit::new(p, r1, phi)?;
        let near = |t: f64| (t - r2).abs() <= 1e-8 * r2.max(1.0);
        if near(o.lo) {
            o.lo = r2;
        } else if o.hi.is_some_and(near) {
            o.hi = Some(r2);
        }
        Ok(o)
    }

    fn new(p: &Profile, r1: f64, phi: f64) -> Result<Orbit> {
        let nu = p.m(r1) * phi.sin();
        let anu = nu.abs();
        let up = phi.cos() > 0.0;
        let knots = monotone_pieces(p);
        // nearest turning point below r1
        let mut lo = None;
        let mut top = r1;
        for w in knots.windows(2).rev() {
            if w[0] >= r1 {
                continue;
            }
            let bottom = w[0];
            if p.m(bottom) <= anu {
                lo = Some(if p.m(top) - anu <= 0.0 { top } else { root_in(p, anu, bottom, top)? });
                break;
            }
            top = bottom;
        }
        let lo = lo.unwrap_or(0.0);
        // nearest turning point above r1
        let mut hi = None;
        let mut bottom = r1;
        for w in knots.windows(2) {
            if w[1] <= r1 {
                continue;
            }
            let top = w[1];
            if p.m(top) <= anu {
                hi = Some(if p.m(bottom) - anu <= 0.0 { bottom } else { root_in(p, anu, bottom, top)? });
                break;
            }
            bottom = top;
        }
        Ok(Orbit { nu, up, r1, lo, hi })
    }

    fn leg(&self, p: &Profile, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
        let q = quadrature_segment_tol(p, a, b, self.nu, (b - a).signum(), tol)?;
        Ok((q.delta_s, q.delta_theta))
    }

    fn crossings(&self, p: &Profile, r2: f64, s_cap: f64, tol: f64) -> Result<Vec<Crossing>> {
        let mut out = Vec::new();
        let (mut s, mut th, mut r, mut up) = (0.0, 0.0, self.r1, self.up);
        let mut full: Option<(f64, f64)> = None;
        let mut k = 0;
        loop {
            let end = if up { self.hi.unwrap_or(p.r_max()) } else { self.lo };
            let hit = if up { r < r2 && r2 <= end } else { end <= r2 && r2 < r };
            if hit {
                let (ds, dth) = self.leg(p, r, r2, tol)?;
                if s + ds > s_cap {
                    break;
                }
                out.push(Crossing {
                    index: k,
                    up,
                    s: s + ds,
                    dtheta: th + dth,
                });
                k += 1;
                if end == r2 {
                    // tangent to the target parallel: the down and up
                    // passages coincide
                    out.push(Crossing {
                        index: k,
                        up: !up,
                        s: s + ds,
                        dtheta: th + dth,
                    });
                    k += 1;
                }
            }
            if up && self.hi.is_none() {
                break;
            }
            let is_full = r == self.lo || Some(r) == self.hi;
            let (ds, dth) = match (is_full, full) {
                (true, Some(f)) => f,
                _ => {
                    let f = self.leg(p, r, end, tol)?;
                    if is_full {
                        full = Some(f);
                    }
                    f
                }
            };
            s += ds;
            th += dth;
            r = end;
            up = !up;
            if s > s_cap || ds <= 0.0 {
                break;
            }
        }
        Ok(out)
    }
}

/// Heading scan from a fixed start point.
#[derive(Debug, Clone)]
pub struct ShootingFan<'a> {
    p: &'a Profile,
    q1: SurfacePoint,
    twist: f64,
    headings: usize,
    tol: f64,
    exec: Exec,
}

impl<'a> ShootingFan<'a> {
    /// `twist = 0` shoots h-geodesics; `twist = mu` shoots F-geodesics.
    pub fn new(p: &'a Profile, q1: SurfacePoint, twist: f64) -> Self {
        Self {
            p,
            q1,
            twist,
            headings: 360,
            tol: 1e-12,
            exec: Exec::default(),
        }
    }
    pub fn headings(mut self, n: usize) -> Self {
        self.headings = n.max(8);
        self
    }
    pub fn quad_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
    pub fn exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    fn miss(&self, q2: SurfacePoint, s: f64, dtheta: f64) -> f64 {
        wrap_angle(self.q1.theta + dtheta + self.twist * s - q2.theta)
    }

    /// Crossings of a heading; near-meridian headings use the meridian chart.
    fn scan(&self, phi: f64, r2: f64, s_cap: f64, fold: bool) -> Result<Vec<Crossing>> {
        let p = self.p;
        let r1 = self.q1.r;
        let nu = p.m(r1) * phi.sin();
        if nu.abs() < NU_MERIDIAN {
            return Ok(meridian_crossings(r1, r2, phi.cos() > 0.0, nu, s_cap));
        }
        let orbit = if fold {
            Orbit::with_fold(p, r1, phi, r2)?
        } else {
            Orbit::new(p, r1, phi)?
        };
        orbit.crossings(p, r2, s_cap, self.tol)
    }

    /// Headings whose geodesic is tangent to the target parallel, `|ν| = m(r2)`.
    fn fold_headings(&self, r2: f64) -> Vec<f64> {
        let ratio = self.p.m(r2) / self.p.m(self.q1.r);
        if !(ratio < 1.0) {
            return Vec::new();
        }
        let a = ratio.asin();
        vec![a, PI - a, -a, a - PI]
    }

    /// All geodesics from `q1` reaching `q2` with parameter length at most `s_cap`,
    /// sorted by length.
    pub fn shots(&self, q2: SurfacePoint, s_cap: f64) -> Result<Vec<Shot>> {
        let p = self.p;
        let (r1, r2) = (self.q1.r, q2.r);
        if r1 > p.r_max() || r2 > p.r_max() {
            return Err(Error::InvalidParameter("point beyond r_max".into()));
        }
        if r1 == 0.0 {
            // all geodesics from the vertex are (twisted) meridians
            let theta0 = q2.theta - self.twist * r2;
            return Ok(vec![Shot {
                heading: wrap_angle(theta0),
                nu: 0.0,
                length: r2,
                crossing: 0,
                miss: 0.0,
            }]);
        }
        if r2 == 0.0 {
            return Ok(vec![Shot {
                heading: PI,
                nu: 0.0,
                length: r1,
                crossing: 0,
                miss: 0.0,
            }]);
        }
        let step = 2.0 * PI / self.headings as f64;
        let mut grid: Vec<(f64, bool)> = (0..self.headings)
            .map(|k| (-PI + (k as f64 + 0.5) * step, false))
            .collect();
        grid.extend(self.fold_headings(r2).into_iter().map(|a| (a, true)));
        grid.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = grid.len();
        let phis: Vec<f64> = grid.iter().map(|g| g.0).collect();
        let scans: Vec<Vec<Crossing>> = self
            .exec
            .map(&grid, |&(phi, fold)| self.scan(phi, r2, s_cap, fold))
            .into_iter()
            .collect::<Result<_>>()?;

        // brackets (heading interval, crossing index)
        let mut brackets = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            let (pa, pb) = (phis[i], if j == 0 { phis[0] + 2.0 * PI } else { phis[j] });
            for ca in &scans[i] {
                let Some(cb) = scans[j].iter().find(|c| c.index == ca.index && c.up == ca.up) else {
                    continue;
                };
                let ma = self.miss(q2, ca.s, ca.dtheta);
                let mb = self.miss(q2, cb.s, cb.dtheta);
                if ma == 0.0 || (ma.signum() != mb.signum() && (ma - mb).abs() < PI) {
                    brackets.push((pa, pb, ca.index, ca.up));
                }
            }
        }

        let folds: Vec<f64> = grid.iter().filter(|g| g.1).map(|g| g.0).collect();
        let refined = self.exec.map(&brackets, |&(pa, pb, k, up)| {
            let eval = |phi: f64| -> Option<(f64, Crossing)> {
                let fold = folds.iter().any(|f| wrap_angle(f - phi) == 0.0);
                let cs = self.scan(phi, r2, s_cap, fold).ok()?;
                let c = cs.into_iter().find(|c| c.index == k && c.up == up)?;
                Some((self.miss(q2, c.s, c.dtheta), c))
            };
            let f = |phi: f64| eval(phi).map_or(f64::NAN, |x| x.0);
            let (phi, _) = quad::brent(f, pa, pb, 1e-15).ok()?;
            let (miss, c) = eval(phi)?;
            (miss.abs() < 1e-8).then_some(Shot {
                heading: wrap_angle(phi),
                nu: p.m(r1) * phi.sin(),
                length: c.s,
                crossing: k,
                miss,
            })
        });

        let mut shots: Vec<Shot> = refined.into_iter().flatten().collect();
        // exact meridian solutions
        for (phi, up) in [(0.0, true), (PI, false)] {
            for c in meridian_crossings(r1, r2, up, 0.0, s_cap) {
                let miss = self.miss(q2, c.s, c.dtheta);
                if miss.abs() < 1e-12 {
                    shots.push(Shot {
                        heading: phi,
                        nu: 0.0,
                        length: c.s,
                        crossing: c.index,
                        miss,
                    });
                }
            }
        }
        shots.sort_by(|a, b| a.length.total_cmp(&b.length));
        let mut out: Vec<Shot> = Vec::new();
        for s in shots {
            let dup = out.iter().any(|o| {
                (o.length - s.length).abs() < 1e-9 && wrap_angle(o.heading - s.heading).abs() < 1e-7
            });
            if !dup {
                out.push(s);
            }
        }
        Ok(out)
    }

    /// Parameter length of the shortest geodesic to `q2`.
    pub fn distance(&self, q2: SurfacePoint) -> Result<f64> {
        let cap = self.q1.r + q2.r;
        let shots = self.shots(q2, cap * (1.0 + 1e-9) + 1e-12)?;
        shots
            .first()
            .map(|s| s.length)
            .ok_or(Error::SearchHorizon { horizon: cap })
    }

    /// Rebuilds the geodesic of a shot; twisted when the fan is.
    pub fn path(&self, shot: &Shot, tol: f64) -> Result<GeodesicPath> {
        let st = if self.q1.r == 0.0 {
            GeodesicState::new(0.0, shot.heading, 1.0, 0.0)
        } else if shot.nu == 0.0 {
            GeodesicState::new(self.q1.r, self.q1.theta, shot.heading.cos().signum(), 0.0)
        } else {
            GeodesicState::from_heading(self.p, self.q1.r, self.q1.theta, shot.heading)
        };
        let h = integrate_h(self.p, st, shot.length, tol)?;
        if self.twist == 0.0 {
            Ok(h)
        } else {
            twist(&h, self.twist)
        }
    }
}

fn meridian_crossings(r1: f64, r2: f64, up: bool, nu: f64, s_cap: f64) -> Vec<Crossing> {
    let mut out = Vec::new();
    if up {
        if r2 > r1 && r2 - r1 <= s_cap {
            out.push(Crossing {
                index: 0,
                up: true,
                s: r2 - r1,
                dtheta: 0.0,
            });
        }
    } else {
        let mut k = 0;
        if r2 < r1 && r1 - r2 <= s_cap {
            out.push(Crossing {
                index: 0,
                up: false,
                s: r1 - r2,
                dtheta: 0.0,
            });
            k = 1;
        }
        if r1 + r2 <= s_cap {
            out.push(Crossing {
                index: k,
                up: true,
                s: r1 + r2,
                dtheta: if nu < 0.0 { -PI } else { PI },
            });
        }
    }
    out
}

/// h-distance by shooting.
pub fn h_distance(p: &Profile, q1: SurfacePoint, q2: SurfacePoint) -> Result<f64> {
    ShootingFan::new(p, q1, 0.0).distance(q2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn par() -> Profile {
        Profile::paraboloid(1.0, 100.0).unwrap()
    }

    #[test]
    fn same_meridian_distance() {
        let p = par();
        let d = h_distance(&p, SurfacePoint::new(1.0, 0.3), SurfacePoint::new(2.5, 0.3)).unwrap();
        assert!((d - 1.5).abs() < 1e-12);
        let d = h_distance(&p, SurfacePoint::new(1.0, 0.3), SurfacePoint::new(0.5, 0.3 + PI)).unwrap();
        assert!((d - 1.5).abs() < 1e-12);
    }

    #[test]
    fn shots_land_on_target() {
        let p = par();
        let q1 = SurfacePoint::new(1.0, 0.0);
        let q2 = SurfacePoint::new(1.7, 2.0);
        let fan = ShootingFan::new(&p, q1, 0.0);
        let shots = fan.shots(q2, 6.0).unwrap();
        assert!(!shots.is_empty());
        for s in &shots {
            let path = fan.path(s, 1e-12).unwrap();
            let e = path.end();
            assert!((e.r - q2.r).abs() < 1e-7, "{s:?} {e:?}");
            assert!(wrap_angle(e.theta - q2.theta).abs() < 1e-7, "{s:?} {e:?}");
        }
    }

    #[test]
    fn flat_plane_distance_is_euclidean() {
        let p = Profile::from_fns(|r| r, |_| 1.0, |_| 0.0, 0.0, 50.0).unwrap();
        let (a, b) = (SurfacePoint::new(1.0, 0.2), SurfacePoint::new(2.0, 1.7));
        let euclid = ((a.r * a.theta.cos() - b.r * b.theta.cos()).powi(2)
            + (a.r * a.theta.sin() - b.r * b.theta.sin()).powi(2))
        .sqrt();
        let d = h_distance(&p, a, b).unwrap();
        assert!((d - euclid).abs() < 1e-9, "{d} vs {euclid}");
    }
}
