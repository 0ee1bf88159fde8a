//! Lengths, distances, the Finslerian momentum and the Clairaut relations.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geodesics::{integrate_f, GeodesicPath, GeodesicState};
use crate::profile::{wrap_angle, Profile, SurfacePoint};
use crate::quad;
use crate::shooting::ShootingFan;
use crate::zermelo::{f_norm, navigation_transform, Tangent};

/// `∫ F(ċ) ds` over the dense output of `path`, 8-point Gauss–Legendre per
/// stored step.
pub fn f_length(p: &Profile, path: &GeodesicPath) -> Result<f64> {
    let samples = path.samples();
    if samples.len() < 2 {
        return Err(Error::InvalidParameter("length needs at least two samples".into()));
    }
    let mut total = 0.0;
    for w in samples.windows(2) {
        total += quad::gauss_legendre8(
            |s| {
                let st = path.state_at(s);
                f_norm(p, st.r, st.dr, st.dtheta)
            },
            w[0].s,
            w[1].s,
        );
    }
    if !total.is_finite() {
        return Err(Error::NumericalBlowup {
            s: path.s_end(),
            reason: "non-finite F-length".into(),
        });
    }
    Ok(total)
}

/// `∫ F(c, ċ) dt` for an arbitrary curve `t ↦ (r, θ, ṙ, θ̇)` on `[a, b]`.
pub fn f_length_curve<C>(p: &Profile, curve: C, a: f64, b: f64, tol: f64) -> Result<f64>
where
    C: Fn(f64) -> GeodesicState,
{
    quad::integrate(
        |t| {
            let st = curve(t);
            f_norm(p, st.r, st.dr, st.dtheta)
        },
        a,
        b,
        tol,
    )
}

/// Lengths of one full turn around the parallel `r = r0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParallelLengths {
    pub r0: f64,
    /// F-length travelling with the wind.
    pub plus: f64,
    pub h: f64,
    /// F-length travelling against the wind.
    pub minus: f64,
}

pub fn parallel_lengths(p: &Profile, r0: f64) -> Result<ParallelLengths> {
    if !(r0 > 0.0) || r0 > p.r_max() {
        return Err(Error::InvalidParameter(format!("parallel radius {r0}")));
    }
    navigation_transform(p, r0)?;
    let turn = |dir: f64| {
        f_length_curve(
            p,
            |t| GeodesicState::new(r0, dir * t, 0.0, dir),
            0.0,
            2.0 * PI,
            1e-13,
        )
    };
    let m = p.m(r0);
    let h = quad::integrate(|_| m, 0.0, 2.0 * PI, 1e-13)?;
    Ok(ParallelLengths {
        r0,
        plus: turn(1.0)?,
        h,
        minus: turn(-1.0)?,
    })
}

/// Two travellers leave the same point of a parallel in opposite directions,
/// each carried by the wind. They meet after parameters `s1`, `s2` with
/// `s1 + s2 = 2π` once their F-lengths agree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeetingPoint {
    pub r0: f64,
    pub m0: f64,
    pub mu: f64,
    /// `(π(1 + μm), π(1 − μm), πμm)`
    pub closed_form: [f64; 3],
    /// The same triple from quadrature rates and a 2x2 solve.
    pub numeric: [f64; 3],
    pub max_dev: f64,
    /// Common length when the parameter is the angle swept (`πm`).
    pub angle_parametrized_length: f64,
}

/// F-length per unit parameter of the arc of `r = r0` with velocity `(0, v)`.
fn parallel_rate(p: &Profile, r0: f64, v: f64) -> Result<f64> {
    f_length_curve(p, |t| GeodesicState::new(r0, v * t, 0.0, v), 0.0, 1.0, 1e-14)
}

pub fn meeting_point(p: &Profile, r0: f64) -> Result<MeetingPoint> {
    if !(r0 > 0.0) || r0 > p.r_max() {
        return Err(Error::InvalidParameter(format!("parallel radius {r0}")));
    }
    navigation_transform(p, r0)?;
    let (mu, m) = (p.mu(), p.m(r0));
    let closed_form = [PI * (1.0 + mu * m), PI * (1.0 - mu * m), PI * mu * m];
    // rates per unit wind; F is positively homogeneous so the solve is the
    // same for the rates F(0, ±mu) = mu F(0, ±1)
    let kp = parallel_rate(p, r0, 1.0)?;
    let km = parallel_rate(p, r0, -1.0)?;
    // [1 1; kp -km] (s1, s2) = (2π, 0)
    let det = -km - kp;
    let s1 = (-km * 2.0 * PI) / det;
    let s2 = (-kp * 2.0 * PI) / det;
    let numeric = [s1, s2, mu * kp * s1];
    let max_dev = closed_form
        .iter()
        .zip(&numeric)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(MeetingPoint {
        r0,
        m0: m,
        mu,
        closed_form,
        numeric,
        max_dev,
        angle_parametrized_length: kp * s1,
    })
}

/// Closed-loop F-length of the parallel with the wind, computed three ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoopConstantReport {
    pub r0: f64,
    /// Quadrature of one geometric turn: `2πm/(1+μm)`.
    pub full_turn_quadrature: f64,
    /// Wind-carried traveller with `s1 = 2π`: `2πμm/(1+μm)`.
    pub wind_loop_length: f64,
    /// The stated constant `πm/(1+μm)`.
    pub stated_constant: f64,
    pub ratio_turn_to_stated: f64,
    pub ratio_wind_to_stated: f64,
    /// True only if both ratios equal 1 to 1e-9.
    pub consistent: bool,
}

pub fn loop_constant_report(p: &Profile, r0: f64) -> Result<LoopConstantReport> {
    let lengths = parallel_lengths(p, r0)?;
    let (mu, m) = (p.mu(), p.m(r0));
    let wind = parallel_rate(p, r0, mu)? * 2.0 * PI;
    let stated = PI * m / (1.0 + mu * m);
    let rt = lengths.plus / stated;
    let rw = wind / stated;
    Ok(LoopConstantReport {
        r0,
        full_turn_quadrature: lengths.plus,
        wind_loop_length: wind,
        stated_constant: stated,
        ratio_turn_to_stated: rt,
        ratio_wind_to_stated: rw,
        consistent: (rt - 1.0).abs() < 1e-9 && (rw - 1.0).abs() < 1e-9,
    })
}

/// `p2 = ½ ∂F²/∂y²` at an F-unit state.
pub fn momentum_p2(p: &Profile, state: &GeodesicState) -> Result<f64> {
    if state.r <= 0.0 {
        return Err(Error::VertexSingular);
    }
    let d = navigation_transform(p, state.r)?;
    let (y1, y2) = (state.dr, state.dtheta);
    let alpha = (d.a11 * y1 * y1 + d.a22 * y2 * y2).sqrt();
    let f = alpha + d.b2 * y2;
    Ok(f * (d.a22 * y2 / alpha + d.b2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct ClairautReport {
    pub nu: f64,
    pub samples: usize,
    /// `|m sin φ − ν|`
    pub max_h_residual: f64,
    /// `|√(1+2μν+μ²m²) cos(ψ−φ) − (1+μν)|`
    pub max_f1_residual: f64,
    /// `|m sin ψ − (ν+μm²)/√(1+2μν+μ²m²)|`
    pub max_f2_residual: f64,
    /// `|p2 − ν/(1+μν)|`
    pub max_momentum_residual: f64,
    /// `|h(γ̇, Ṗ) − (1+μν)|`
    pub max_pairing_residual: f64,
    /// `|F(Ṗ) − 1|`
    pub max_unit_residual: f64,
}

/// Evaluates the Riemannian and Finslerian Clairaut relations at every stored
/// sample of an F-path (a twisted h-path; its pre-image is recovered by
/// removing the twist).
pub fn clairaut_verify(p: &Profile, path_f: &GeodesicPath) -> Result<ClairautReport> {
    let mu = p.mu();
    if (path_f.twist_mu() - mu).abs() > 1e-15 {
        return Err(Error::InconsistentInput(format!(
            "path twisted by {} but the profile wind is {mu}",
            path_f.twist_mu()
        )));
    }
    let nu = path_f.nu();
    let k_expected = 1.0 + mu * nu;
    let mut rep = ClairautReport {
        nu,
        ..Default::default()
    };
    for x in path_f.samples() {
        let st = x.state;
        if st.r < 1e-12 {
            continue;
        }
        rep.samples += 1;
        let m = p.m(st.r);
        let th_f = st.dtheta;
        let th_h = th_f - mu;
        let phi = (m * th_h).atan2(st.dr);
        let psi = (m * th_f).atan2(st.dr);
        let speed = (1.0 + 2.0 * mu * nu + mu * mu * m * m).sqrt();
        let h_res = (m * phi.sin() - nu).abs();
        let f1 = (speed * (psi - phi).cos() - k_expected).abs();
        let f2 = (m * psi.sin() - (nu + mu * m * m) / speed).abs();
        let mom = (momentum_p2(p, &st)? - nu / k_expected).abs();
        let pairing = (st.dr * st.dr + m * m * th_h * th_f - k_expected).abs();
        let unit = (f_norm(p, st.r, st.dr, th_f) - 1.0).abs();
        rep.max_h_residual = rep.max_h_residual.max(h_res);
        rep.max_f1_residual = rep.max_f1_residual.max(f1);
        rep.max_f2_residual = rep.max_f2_residual.max(f2);
        rep.max_momentum_residual = rep.max_momentum_residual.max(mom);
        rep.max_pairing_residual = rep.max_pairing_residual.max(pairing);
        rep.max_unit_residual = rep.max_unit_residual.max(unit);
    }
    Ok(rep)
}

/// F-distance from the vertex equals the h-distance, which is `r`.
pub fn distance_from_vertex(q: SurfacePoint) -> f64 {
    q.r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceReport {
    pub q1: SurfacePoint,
    pub q2: SurfacePoint,
    pub distance: f64,
    /// h-distance between the same points.
    pub h_distance: f64,
    pub bracket: [f64; 2],
    pub iterations: usize,
    pub horizon: f64,
}

/// Default search horizon `4 (r1 + r2 + π max m)`.
pub fn default_horizon(p: &Profile, q1: SurfacePoint, q2: SurfacePoint) -> f64 {
    4.0 * (q1.r + q2.r + PI * p.m_sup())
}

fn same_point(a: SurfacePoint, b: SurfacePoint) -> bool {
    (a.r == 0.0 && b.r == 0.0) || (a.r == b.r && wrap_angle(a.theta - b.theta) == 0.0)
}

/// Forward F-distance: the smallest `T` with `d_h(q1, flow(−T, q2)) = T`.
pub fn distance_f(p: &Profile, q1: SurfacePoint, q2: SurfacePoint, tol: f64) -> Result<DistanceReport> {
    distance_f_with(p, q1, q2, tol, default_horizon(p, q1, q2), 360)
}

pub fn distance_f_with(
    p: &Profile,
    q1: SurfacePoint,
    q2: SurfacePoint,
    tol: f64,
    horizon: f64,
    headings: usize,
) -> Result<DistanceReport> {
    let report = |distance, h_distance, bracket, iterations| DistanceReport {
        q1,
        q2,
        distance,
        h_distance,
        bracket,
        iterations,
        horizon,
    };
    if same_point(q1, q2) {
        return Ok(report(0.0, 0.0, [0.0, 0.0], 0));
    }
    if q1.is_vertex() {
        return Ok(report(q2.r, q2.r, [q2.r, q2.r], 0));
    }
    if q2.is_vertex() {
        return Ok(report(q1.r, q1.r, [q1.r, q1.r], 0));
    }
    let fan = ShootingFan::new(p, q1, 0.0).headings(headings);
    let d_h = |t: f64| fan.distance(SurfacePoint::new(q2.r, q2.theta - p.mu() * t));
    let d0 = d_h(0.0)?;
    let mu_m = p.mu() * p.m(q2.r);
    if mu_m == 0.0 {
        return Ok(report(d0, d0, [d0, d0], 1));
    }
    // the rotated target moves at h-speed mu m2 < 1, so g(T) = d_h - T is
    // strictly decreasing; d_h <= r1 + r2 through the vertex caps the root
    let bracket = [d0 / (1.0 + mu_m), (d0 / (1.0 - mu_m)).min(q1.r + q2.r)];
    if bracket[1] > horizon {
        return Err(Error::SearchHorizon { horizon });
    }
    let mut err = None;
    let g = |t: f64| match d_h(t) {
        Ok(d) => d - t,
        Err(e) => {
            err.get_or_insert(e);
            f64::NAN
        }
    };
    let res = quad::brent(g, bracket[0], bracket[1], tol);
    if let Some(e) = err {
        return Err(e);
    }
    let (t, evals) = res?;
    Ok(report(t, d0, bracket, evals))
}

/// Outcome of shooting the twisted meridian from the vertex at a target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VertexShot {
    pub target: SurfacePoint,
    /// Initial angle of the twisted meridian at the vertex.
    pub theta0: f64,
    /// Parameter at which the geodesic reaches the target radius.
    pub length: f64,
    pub miss: f64,
    pub iterations: usize,
}

/// Secant iteration on the initial angle of the F-geodesic leaving the vertex
/// until it passes through `target`.
pub fn shoot_from_vertex(p: &Profile, target: SurfacePoint, tol: f64) -> Result<VertexShot> {
    if !(target.r > 0.0) {
        return Err(Error::InvalidParameter("target must differ from the vertex".into()));
    }
    let fire = |theta0: f64| -> Result<(f64, f64)> {
        let span = (target.r + 1.0).min(p.r_max());
        let path = integrate_f(p, SurfacePoint::new(0.0, theta0), Tangent::new(1.0, 0.0), span, tol)?;
        let s = quad::bisect(|s| path.state_at(s).r - target.r, 0.0, path.s_end(), 1e-15)?;
        Ok((wrap_angle(path.state_at(s).theta - target.theta), s))
    };
    let (mut a, mut b) = (target.theta, target.theta - 0.5);
    let (mut fa, _) = fire(a)?;
    let (mut fb, mut sb) = fire(b)?;
    for it in 1..=60 {
        if fb.abs() < 1e-14 || fb == fa {
            return Ok(VertexShot {
                target,
                theta0: b,
                length: sb,
                miss: fb,
                iterations: it,
            });
        }
        let c = b - fb * (b - a) / (fb - fa);
        let (fc, sc) = fire(c)?;
        (a, fa) = (b, fb);
        (b, fb, sb) = (c, fc, sc);
    }
    Err(Error::VerificationFailed(format!(
        "vertex shooting did not converge: miss {fb:e}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesics::integrate_h;
    use crate::profile::make_paraboloid;

    #[test]
    fn meeting_point_spot_value() {
        let p = make_paraboloid(1.0).unwrap();
        let r0 = 1.0 / 3f64.sqrt();
        let mp = meeting_point(&p, r0).unwrap();
        assert!((mp.closed_form[0] - 1.5 * PI).abs() < 1e-12);
        assert!((mp.closed_form[1] - 0.5 * PI).abs() < 1e-12);
        assert!((mp.numeric[2] - 0.5 * PI).abs() < 1e-10);
        assert!(mp.max_dev < 1e-10);
    }

    #[test]
    fn parallel_ordering() {
        let p = make_paraboloid(1.0).unwrap();
        let l = parallel_lengths(&p, 2.0).unwrap();
        assert!(l.plus < l.h && l.h < l.minus);
        let m = p.m(2.0);
        assert!((l.plus - 2.0 * PI * m / (1.0 + m)).abs() < 1e-12);
    }

    #[test]
    fn loop_constant_flags_the_factor() {
        let p = make_paraboloid(1.0).unwrap();
        let c = loop_constant_report(&p, 1.0 / 3f64.sqrt()).unwrap();
        assert!(!c.consistent);
        assert!((c.ratio_turn_to_stated - 2.0).abs() < 1e-10);
    }

    #[test]
    fn momentum_zero_on_twisted_meridian() {
        let p = make_paraboloid(1.0).unwrap();
        let st = GeodesicState::new(1.0, 0.0, 1.0, 0.0);
        let path = crate::geodesics::twist(&integrate_h(&p, st, 3.0, 1e-10).unwrap(), 1.0).unwrap();
        let rep = clairaut_verify(&p, &path).unwrap();
        assert!(rep.max_momentum_residual < 1e-14);
        assert!(rep.max_f2_residual < 1e-14);
    }

    #[test]
    fn vertex_distance_is_radius() {
        let p = make_paraboloid(1.0).unwrap();
        let q = SurfacePoint::new(2.0, 0.7);
        assert_eq!(distance_from_vertex(q), 2.0);
        let shot = shoot_from_vertex(&p, q, 1e-10).unwrap();
        assert!((shot.length - 2.0).abs() < 1e-12);
        assert!(shot.miss.abs() < 1e-13);
    }

    #[test]
    fn asymmetric_distance_on_a_parallel() {
        let p = Profile::paraboloid(1.0, 100.0).unwrap();
        let a = SurfacePoint::new(1.0, 0.0);
        let b = SurfacePoint::new(1.0, 1.0);
        let ab = distance_f(&p, a, b, 1e-10).unwrap().distance;
        let ba = distance_f(&p, b, a, 1e-10).unwrap().distance;
        // the wind turns counter-clockwise, so a -> b is downwind
        assert!(ab < ba, "{ab} {ba}");
    }
}
