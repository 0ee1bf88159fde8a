//! Jacobi fields along meridians, first conjugate points, the pole
//! certificate for the vertex and the F-cut locus of a point.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geodesics::{integrate_f, integrate_h, GeodesicPath, GeodesicState};
use crate::ode::{self, Flow, StepControl};
use crate::par::Exec;
use crate::profile::{wrap_angle, Profile, SurfacePoint};
use crate::quad;
use crate::shooting::{Shot, ShootingFan};
use crate::zermelo::Tangent;

/// Scalar normal Jacobi field `y'' + G y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JacobiState {
    pub y: f64,
    pub yp: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct JacobiRun {
    pub samples: Vec<(f64, JacobiState)>,
    /// First zero of `y` for `s > 0`.
    pub first_zero: Option<f64>,
}

const JACOBI_TOL: f64 = 1e-13;
const JACOBI_STEP: f64 = 0.05;

fn jacobi_segment(
    p: &Profile,
    base: &GeodesicPath,
    s0: f64,
    j0: JacobiState,
    s1: f64,
    mut each: impl FnMut(f64, JacobiState),
) -> Result<JacobiState> {
    let rhs = |s: f64, y: &[f64; 2]| {
        let g = p.gauss_curvature(base.state_at(s).r);
        [y[1], -g * y[0]]
    };
    let mut last = j0;
    ode::integrate(
        rhs,
        s0,
        [j0.y, j0.yp],
        s1,
        StepControl::new(JACOBI_TOL, JACOBI_STEP),
        |s, y| {
            last = JacobiState { y: y[0], yp: y[1] };
            each(s, last);
            Flow::Continue
        },
    )?;
    Ok(last)
}

/// Integrates the Jacobi equation along `base` on `[0, upto]`.
pub fn jacobi_integrate(
    p: &Profile,
    base: &GeodesicPath,
    y0: f64,
    yp0: f64,
    upto: f64,
) -> Result<JacobiRun> {
    if !(upto > 0.0) || upto > base.s_end() * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "Jacobi horizon {upto} outside the base path [0, {}]",
            base.s_end()
        )));
    }
    let upto = upto.min(base.s_end());
    let j0 = JacobiState { y: y0, yp: yp0 };
    let mut samples = vec![(0.0, j0)];
    jacobi_segment(p, base, 0.0, j0, upto, |s, j| samples.push((s, j)))?;

    let mut first_zero = None;
    for w in samples.windows(2) {
        let ((sa, ja), (sb, jb)) = (w[0], w[1]);
        if jb.y == 0.0 {
            first_zero = Some(sb);
            break;
        }
        if ja.y != 0.0 && ja.y.signum() != jb.y.signum() {
            let f = |s: f64| {
                jacobi_segment(p, base, sa, ja, s, |_, _| {})
                    .map_or(f64::NAN, |j| j.y)
            };
            let z = if f(sb).is_nan() {
                None
            } else {
                quad::brent(|s| if s == sa { ja.y } else { f(s) }, sa, sb, 1e-12)
                    .ok()
                    .map(|x| x.0)
            };
            first_zero = z.or(Some(0.5 * (sa + sb)));
            break;
        }
    }
    Ok(JacobiRun {
        samples,
        first_zero,
    })
}

/// The unit speed h-geodesic from `q` through the vertex, continued along
/// the opposite meridian.
pub fn tau_q(p: &Profile, q: SurfacePoint, length: f64) -> Result<GeodesicPath> {
    if q.is_vertex() {
        return Err(Error::InvalidParameter("q must differ from the vertex".into()));
    }
    integrate_h(p, GeodesicState::new(q.r, q.theta, -1.0, 0.0), length, 1e-12)
}

fn require_von_mangoldt(p: &Profile) -> Result<()> {
    let v = p.is_von_mangoldt(&p.uniform_grid(4000))?;
    if !v.holds {
        return Err(Error::InvalidParameter(
            "profile is not von Mangoldt (curvature increases somewhere)".into(),
        ));
    }
    Ok(())
}

/// Parameter of the first conjugate point of `q` along the meridian through
/// the vertex. Twisting does not move conjugate parameters.
pub fn first_conjugate(p: &Profile, q: SurfacePoint) -> Result<f64> {
    if q.is_vertex() {
        return Err(Error::InvalidParameter(
            "the vertex is a pole: it has no conjugate points".into(),
        ));
    }
    require_von_mangoldt(p)?;
    let rho = q.r;
    let horizon = rho + p.r_max();
    let base = tau_q(p, q, horizon)?;
    let run = jacobi_integrate(p, &base, 0.0, 1.0, horizon)?;
    let c = run.first_zero.ok_or(Error::ConjugateHorizon { lower_bound: horizon })?;
    if c <= rho {
        return Err(Error::VerificationFailed(format!(
            "conjugate parameter {c} does not lie beyond the vertex (rho = {rho})"
        )));
    }
    Ok(c)
}

/// Conjugate parameter estimated from the spread of the two geodesics leaving
/// `q` at headings `π ± delta`, with a Richardson step in `delta`.
/// `twisted` selects F-geodesics (integrated from F-initial data) over
/// h-geodesics.
pub fn spread_conjugate(p: &Profile, q: SurfacePoint, delta: f64, twisted: bool) -> Result<f64> {
    let one = |d: f64| spread_crossing(p, q, d, twisted);
    let a = one(delta)?;
    let b = one(2.0 * delta)?;
    Ok((4.0 * a - b) / 3.0)
}

fn spread_crossing(p: &Profile, q: SurfacePoint, delta: f64, twisted: bool) -> Result<f64> {
    let rho = q.r;
    let len = (rho + p.r_max()).min(4.0 * rho + 20.0);
    let mk = |phi: f64| -> Result<GeodesicPath> {
        let st = GeodesicState::from_heading(p, q.r, q.theta, phi);
        if twisted {
            let y = Tangent::new(st.dr, st.dtheta + p.mu());
            integrate_f(p, q, y, len, 1e-12)
        } else {
            integrate_h(p, st, len, 1e-12)
        }
    };
    let (a, b) = (mk(PI - delta)?, mk(PI + delta)?);
    let end = a.s_end().min(b.s_end());
    // half the angular gap reaches π where the pair meets again
    let g = |s: f64| (0.5 * (a.state_at(s).theta - b.state_at(s).theta)).sin();
    let n = ((end - rho) / 0.01).ceil() as usize;
    let mut prev = (rho, g(rho));
    for k in 1..=n {
        let s = rho + (end - rho) * k as f64 / n as f64;
        let v = g(s);
        if v.signum() != prev.1.signum() {
            return Ok(quad::brent(g, prev.0, s, 1e-14)?.0);
        }
        prev = (s, v);
    }
    Err(Error::ConjugateHorizon { lower_bound: end })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutSample {
    /// Parameter along the meridian through the vertex.
    pub s: f64,
    pub r: f64,
    pub theta: f64,
    /// h-distance from `q` to the meridian point; the twist acts for this long.
    pub ell: f64,
    /// Angle of `(r, θ_q + π + μ s)`, the point reached by twisting for time `s`.
    pub theta_literal: f64,
}

/// Sub-arc of the F-cut locus of `q`, starting at the first conjugate point.
#[derive(Debug, Clone, Serialize)]
pub struct CutArc {
    pub q: SurfacePoint,
    pub rho: f64,
    pub c: f64,
    pub mu: f64,
    pub samples: Vec<CutSample>,
}

/// Point of the cut locus of `q` above the meridian point at parameter `s`:
/// the opposite-meridian point rotated by the wind for the h-distance to it.
pub fn cut_point(p: &Profile, q: SurfacePoint, s: f64, headings: usize) -> Result<CutSample> {
    let rho = q.r;
    let r = s - rho;
    if r <= 0.0 || r > p.r_max() {
        return Err(Error::InvalidParameter(format!(
            "parameter {s} is not on the opposite meridian inside r_max"
        )));
    }
    let z = SurfacePoint::new(r, q.theta + PI);
    let ell = if p.mu() == 0.0 {
        s
    } else {
        ShootingFan::new(p, q, 0.0)
            .headings(headings)
            .exec(Exec::Sequential)
            .distance(z)?
    };
    Ok(CutSample {
        s,
        r,
        theta: z.theta + p.mu() * ell,
        ell,
        theta_literal: z.theta + p.mu() * s,
    })
}

pub fn cut_locus(p: &Profile, q: SurfacePoint, s_export_max: Option<f64>, n: usize) -> Result<CutArc> {
    let c = first_conjugate(p, q)?;
    let rho = q.r;
    let s_max = s_export_max
        .unwrap_or(c + 10.0 * rho.max(1.0))
        .min(rho + p.r_max());
    if s_max < c {
        return Err(Error::InvalidParameter(format!(
            "export limit {s_max} lies before the conjugate parameter {c}"
        )));
    }
    let n = n.max(2);
    let ss: Vec<f64> = (0..n)
        .map(|k| c + (s_max - c) * k as f64 / (n - 1) as f64)
        .collect();
    let samples = Exec::default()
        .map(&ss, |&s| {
            if s == c {
                // the conjugate point itself is still reached by the meridian
                let theta = q.theta + PI + p.mu() * c;
                Ok(CutSample {
                    s,
                    r: c - rho,
                    theta,
                    ell: c,
                    theta_literal: theta,
                })
            } else {
                cut_point(p, q, s, 360)
            }
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(CutArc {
        q,
        rho,
        c,
        mu: p.mu(),
        samples,
    })
}

/// F-geodesic segments from `q` to `y` of (numerically) minimal length.
#[derive(Debug, Clone, Serialize)]
pub struct CutPointCheck {
    pub target: SurfacePoint,
    /// Minimisers: shots whose length is within `tol` of the shortest.
    pub minimizers: Vec<Shot>,
    /// Every shot found, shortest first.
    pub shots: Vec<Shot>,
    /// Length gap between the two shortest shots, or infinity.
    pub gap: f64,
    /// Largest chart distance between an integrated minimiser's end and `y`.
    pub landing_error: f64,
}

/// Shoots F-geodesics from `q` to `y` over a 720-heading scan.
pub fn shoot_minimizers(p: &Profile, q: SurfacePoint, y: SurfacePoint, tol: f64) -> Result<CutPointCheck> {
    let fan = ShootingFan::new(p, q, p.mu()).headings(720);
    let shots = fan.shots(y, 2.0 * (q.r + y.r))?;
    let Some(best) = shots.first().copied() else {
        return Err(Error::VerificationFailed("no F-geodesic from q reaches the target".into()));
    };
    let minimizers: Vec<Shot> = shots
        .iter()
        .copied()
        .filter(|s| s.length - best.length <= tol)
        .collect();
    let gap = shots.get(1).map_or(f64::INFINITY, |s| s.length - best.length);
    let mut landing_error: f64 = 0.0;
    for s in &minimizers {
        let e = fan.path(s, 1e-12)?.end();
        let m = p.m(y.r);
        landing_error = landing_error
            .max(((e.r - y.r).powi(2) + (m * wrap_angle(e.theta - y.theta)).powi(2)).sqrt());
    }
    Ok(CutPointCheck {
        target: y,
        minimizers,
        shots,
        gap,
        landing_error,
    })
}

/// Confirms that `y` is joined to `q` by two distinct F-geodesics of equal length.
pub fn verify_cut_point(p: &Profile, q: SurfacePoint, y: SurfacePoint, tol: f64) -> Result<CutPointCheck> {
    let chk = shoot_minimizers(p, q, y, tol)?;
    let distinct = chk.minimizers.len() >= 2
        && wrap_angle(chk.minimizers[0].heading - chk.minimizers[1].heading).abs() > 1e-6;
    if !distinct {
        return Err(Error::VerificationFailed(format!(
            "found {} minimising F-geodesic(s) to ({}, {}); length gap to the next {:e}",
            chk.minimizers.len(),
            y.r,
            y.theta,
            chk.gap
        )));
    }
    Ok(chk)
}

#[derive(Debug, Clone, Serialize)]
pub struct PoleCertificate {
    pub horizon: f64,
    pub mu: f64,
    /// `mu^2 (horizon - 1) / (4 π^2)`, a lower bound for the integral below.
    pub closed_form_bound: f64,
    /// `∫_1^horizon (2π m)^-2 dr`.
    pub integral: f64,
    /// Largest `|y(s) - m(s)|` for the Jacobi field from the vertex.
    pub jacobi_max_dev: f64,
    pub jacobi_positive: bool,
    pub certified: bool,
    pub message: String,
}

pub fn certify_pole(p: &Profile, horizon: f64) -> Result<PoleCertificate> {
    if !(horizon > 1.0) || horizon > p.r_max() {
        return Err(Error::InvalidParameter(format!(
            "pole horizon must lie in (1, r_max], got {horizon}"
        )));
    }
    let mu = p.mu();
    let bound = mu * mu * (horizon - 1.0) / (4.0 * PI * PI);
    let integral = quad::integrate(
        |r| {
            let l = 2.0 * PI * p.m(r);
            1.0 / (l * l)
        },
        1.0,
        horizon,
        1e-10,
    )?;
    let base = integrate_h(p, GeodesicState::new(0.0, 0.0, 1.0, 0.0), horizon, 1e-12)?;
    let run = jacobi_integrate(p, &base, 0.0, 1.0, horizon)?;
    let mut dev: f64 = 0.0;
    let mut positive = true;
    for &(s, j) in &run.samples[1..] {
        dev = dev.max((j.y - p.m(s)).abs());
        positive &= j.y > 0.0;
    }
    let certified = positive && run.first_zero.is_none() && integral >= bound * (1.0 - 1e-9);
    let message = if certified {
        format!("pole certified up to horizon r_max = {horizon}")
    } else {
        format!("pole NOT certified up to horizon {horizon}")
    };
    Ok(PoleCertificate {
        horizon,
        mu,
        closed_form_bound: bound,
        integral,
        jacobi_max_dev: dev,
        jacobi_positive: positive,
        certified,
        message,
    })
}
