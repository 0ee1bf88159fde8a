//! h-geodesics (ODE and quadrature forms), the wind twist that turns them
//! into unit speed F-geodesics, and turning-point bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, Flow, StepControl};
use crate::profile::{wrap_angle, Profile, SurfacePoint};
use crate::quad;
use crate::zermelo::{eval_f, f_norm, Tangent};

pub const DEFAULT_TOL: f64 = 1e-10;

/// Phase-space point `(r, θ, ṙ, θ̇)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub r: f64,
    pub theta: f64,
    pub dr: f64,
    pub dtheta: f64,
}

impl GeodesicState {
    pub fn new(r: f64, theta: f64, dr: f64, dtheta: f64) -> Self {
        Self {
            r,
            theta,
            dr,
            dtheta,
        }
    }

    /// h-unit state leaving `(r, theta)` at angle `phi` from the outward
    /// meridian, measured towards `∂θ`.
    pub fn from_heading(p: &Profile, r: f64, theta: f64, phi: f64) -> Self {
        let m = p.m(r);
        let dtheta = if m > 0.0 { phi.sin() / m } else { 0.0 };
        Self::new(r, theta, phi.cos(), dtheta)
    }

    pub fn point(&self) -> SurfacePoint {
        SurfacePoint::new(self.r, self.theta)
    }

    pub fn velocity(&self) -> Tangent {
        Tangent::new(self.dr, self.dtheta)
    }

    pub fn h_speed_sq(&self, p: &Profile) -> f64 {
        let m = p.m(self.r);
        self.dr * self.dr + m * m * self.dtheta * self.dtheta
    }
}

/// `ν = m(r)^2 θ̇`.
pub fn clairaut_constant(p: &Profile, s: &GeodesicState) -> f64 {
    let m = p.m(s.r);
    m * m * s.dtheta
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricTag {
    #[serde(rename = "h")]
    H,
    #[serde(rename = "F")]
    F,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    Meridian,
    TwistedMeridian,
    Parallel,
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "status")]
pub enum Termination {
    Complete,
    /// The path left `r <= r_max` at parameter `s`.
    DomainExit { s: f64 },
}

/// One stored point of a path. `accel` is `(r̈, θ̈)`, used by the quintic
/// Hermite dense output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub s: f64,
    pub state: GeodesicState,
    pub accel: [f64; 2],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PathQuality {
    /// Largest `|ṙ² + m²θ̇² - 1|` seen before renormalisation.
    pub max_speed_drift: f64,
    /// Largest `|m²θ̇ - ν|` over the stored samples.
    pub max_clairaut_drift: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct MeridianChart {
    r0: f64,
    theta0: f64,
    outward: bool,
}

impl MeridianChart {
    fn state(&self, s: f64) -> GeodesicState {
        if self.outward {
            GeodesicState::new(self.r0 + s, self.theta0, 1.0, 0.0)
        } else if s <= self.r0 {
            GeodesicState::new(self.r0 - s, self.theta0, -1.0, 0.0)
        } else {
            GeodesicState::new(s - self.r0, self.theta0 + std::f64::consts::PI, 1.0, 0.0)
        }
    }
}

/// A sampled geodesic with dense output. The parameter always starts at 0.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    samples: Vec<Sample>,
    nu: f64,
    metric_tag: MetricTag,
    kind: PathKind,
    twist_mu: f64,
    termination: Termination,
    quality: PathQuality,
    tol: f64,
    meridian: Option<MeridianChart>,
}

impl GeodesicPath {
    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }
    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn metric_tag(&self) -> MetricTag {
        self.metric_tag
    }
    pub fn kind(&self) -> PathKind {
        self.kind
    }
    /// Wind applied by [`twist`]; 0 for h-paths.
    pub fn twist_mu(&self) -> f64 {
        self.twist_mu
    }
    pub fn termination(&self) -> Termination {
        self.termination
    }
    pub fn quality(&self) -> PathQuality {
        self.quality
    }
    pub fn tol(&self) -> f64 {
        self.tol
    }
    pub fn s_end(&self) -> f64 {
        self.samples.last().map_or(0.0, |x| x.s)
    }
    pub fn start(&self) -> GeodesicState {
        self.samples[0].state
    }
    pub fn end(&self) -> GeodesicState {
        self.samples[self.samples.len() - 1].state
    }

    /// State at parameter `s`, clamped to the sampled range.
    pub fn state_at(&self, s: f64) -> GeodesicState {
        let s = s.clamp(0.0, self.s_end());
        if let Some(ch) = &self.meridian {
            let mut st = ch.state(s);
            st.theta += self.twist_mu * s;
            st.dtheta += self.twist_mu;
            return st;
        }
        let n = self.samples.len();
        if n == 1 {
            return self.samples[0].state;
        }
        let i = self.samples.partition_point(|x| x.s <= s).clamp(1, n - 1);
        hermite(&self.samples[i - 1], &self.samples[i], s)
    }

    /// The h-path this F-path was twisted from.
    pub fn preimage(&self) -> GeodesicPath {
        if self.twist_mu == 0.0 {
            return self.clone();
        }
        let mut out = twist_by(self, -self.twist_mu);
        out.metric_tag = MetricTag::H;
        out.twist_mu = 0.0;
        out.kind = match self.kind {
            PathKind::TwistedMeridian => PathKind::Meridian,
            k => k,
        };
        out
    }

    /// Points sampled so that consecutive parameters differ by at most `ds`.
    pub fn resample(&self, ds: f64) -> Vec<(f64, GeodesicState)> {
        let end = self.s_end();
        let n = ((end / ds).ceil() as usize).max(1);
        (0..=n)
            .map(|k| {
                let s = end * k as f64 / n as f64;
                (s, self.state_at(s))
            })
            .collect()
    }
}

fn hermite(a: &Sample, b: &Sample, s: f64) -> GeodesicState {
    let h = b.s - a.s;
    if h <= 0.0 {
        return b.state;
    }
    let t = (s - a.s) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h3 = 0.5 * (t3 - 2.0 * t4 + t5);
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let d0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
    let d1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
    let d2 = 0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4);
    let d3 = 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4);
    let d4 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
    let d5 = 30.0 * t2 - 60.0 * t3 + 30.0 * t4;
    let hh = h * h;
    let value = |f0: f64, v0: f64, a0: f64, f1: f64, v1: f64, a1: f64| {
        f0 * h0 + h * v0 * h1 + hh * a0 * h2 + hh * a1 * h3 + h * v1 * h4 + f1 * h5
    };
    let deriv = |f0: f64, v0: f64, a0: f64, f1: f64, v1: f64, a1: f64| {
        (f0 * d0 + h * v0 * d1 + hh * a0 * d2 + hh * a1 * d3 + h * v1 * d4 + f1 * d5) / h
    };
    let (x, y) = (&a.state, &b.state);
    let ra = (x.r, x.dr, a.accel[0], y.r, y.dr, b.accel[0]);
    let ta = (x.theta, x.dtheta, a.accel[1], y.theta, y.dtheta, b.accel[1]);
    GeodesicState::new(
        value(ra.0, ra.1, ra.2, ra.3, ra.4, ra.5),
        value(ta.0, ta.1, ta.2, ta.3, ta.4, ta.5),
        deriv(ra.0, ra.1, ra.2, ra.3, ra.4, ra.5),
        deriv(ta.0, ta.1, ta.2, ta.3, ta.4, ta.5),
    )
}

#[inline]
fn h_accel(p: &Profile, r: f64, dr: f64, dtheta: f64) -> [f64; 2] {
    let m = p.m(r);
    let m1 = p.m1(r);
    [m * m1 * dtheta * dtheta, -2.0 * m1 / m * dr * dtheta]
}

/// Default cap on the step length: `min(0.1, 0.1 / mu)`.
pub fn default_step_cap(p: &Profile) -> f64 {
    if p.mu() > 0.0 {
        0.1f64.min(0.1 / p.mu())
    } else {
        0.1
    }
}

/// Integrates the unit speed h-geodesic starting at `s0` for parameter
/// length `length`.
///
/// States with `θ̇ = 0` are meridians and are evaluated in closed form,
/// including the passage through the vertex. A path leaving `r_max` is
/// truncated at the exit and flagged by [`Termination::DomainExit`].
pub fn integrate_h(p: &Profile, s0: GeodesicState, length: f64, tol: f64) -> Result<GeodesicPath> {
    if !(length >= 0.0) || !length.is_finite() {
        return Err(Error::InvalidParameter(format!("path length {length}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol}")));
    }
    if !(s0.r >= 0.0) || !s0.r.is_finite() {
        return Err(Error::InvalidParameter(format!("start radius {}", s0.r)));
    }
    if s0.r > p.r_max() {
        return Err(Error::InvalidParameter(format!(
            "start radius {} beyond r_max {}",
            s0.r,
            p.r_max()
        )));
    }
    if s0.r == 0.0 || s0.dtheta == 0.0 {
        return meridian_path(p, s0, length, tol);
    }
    let speed = s0.h_speed_sq(p);
    if (speed - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "initial state is not h-unit: |v|^2 = {speed}"
        )));
    }

    let nu = clairaut_constant(p, &s0);
    let kind = if s0.dr == 0.0 && p.m1(s0.r).abs() < 1e-12 {
        PathKind::Parallel
    } else {
        PathKind::Generic
    };
    let r_max = p.r_max();
    let mut quality = PathQuality::default();
    let mut samples = vec![Sample {
        s: 0.0,
        state: s0,
        accel: h_accel(p, s0.r, s0.dr, s0.dtheta),
    }];
    let mut blowup: Option<(f64, String)> = None;
    let mut exited = false;

    let rhs = |_s: f64, y: &[f64; 4]| {
        let a = h_accel(p, y[0], y[2], y[3]);
        [y[2], y[3], a[0], a[1]]
    };
    let hook = |s: f64, y: &mut [f64; 4]| {
        if !y.iter().all(|v| v.is_finite()) || y[0] <= 0.0 {
            blowup = Some((s, format!("state left the chart: r = {}", y[0])));
            return Flow::Stop;
        }
        let m = p.m(y[0]);
        let sp = y[2] * y[2] + m * m * y[3] * y[3];
        quality.max_speed_drift = quality.max_speed_drift.max((sp - 1.0).abs());
        let k = sp.sqrt().recip();
        y[2] *= k;
        y[3] *= k;
        quality.max_clairaut_drift = quality.max_clairaut_drift.max((m * m * y[3] - nu).abs());
        samples.push(Sample {
            s,
            state: GeodesicState::new(y[0], y[1], y[2], y[3]),
            accel: h_accel(p, y[0], y[2], y[3]),
        });
        if y[0] > r_max {
            exited = true;
            return Flow::Stop;
        }
        Flow::Continue
    };
    let (_, stats) = ode::integrate(
        rhs,
        0.0,
        [s0.r, s0.theta, s0.dr, s0.dtheta],
        length,
        StepControl::new(tol, default_step_cap(p)),
        hook,
    )?;
    if let Some((s, reason)) = blowup {
        return Err(Error::NumericalBlowup { s, reason });
    }
    quality.accepted_steps = stats.accepted;
    quality.rejected_steps = stats.rejected;

    let mut termination = Termination::Complete;
    if exited {
        let n = samples.len();
        let (a, b) = (samples[n - 2], samples[n - 1]);
        let s_exit = quad::bisect(|s| hermite(&a, &b, s).r - r_max, a.s, b.s, 1e-14)?;
        let st = hermite(&a, &b, s_exit);
        samples[n - 1] = Sample {
            s: s_exit,
            state: st,
            accel: h_accel(p, st.r, st.dr, st.dtheta),
        };
        if samples[n - 1].s <= samples[n - 2].s {
            samples.pop();
        }
        termination = Termination::DomainExit { s: s_exit };
    }

    Ok(GeodesicPath {
        samples,
        nu,
        metric_tag: MetricTag::H,
        kind,
        twist_mu: 0.0,
        termination,
        quality,
        tol,
        meridian: None,
    })
}

fn meridian_path(p: &Profile, s0: GeodesicState, length: f64, tol: f64) -> Result<GeodesicPath> {
    if (s0.dr.abs() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "meridian start needs dr = ±1, got {}",
            s0.dr
        )));
    }
    let chart = if s0.r == 0.0 && s0.dr < 0.0 {
        MeridianChart {
            r0: 0.0,
            theta0: s0.theta + std::f64::consts::PI,
            outward: true,
        }
    } else {
        MeridianChart {
            r0: s0.r,
            theta0: s0.theta,
            outward: s0.dr > 0.0,
        }
    };
    // parameter at which r reaches r_max
    let s_exit = if chart.outward {
        p.r_max() - chart.r0
    } else {
        p.r_max() + chart.r0
    };
    let (end, termination) = if length > s_exit {
        (s_exit, Termination::DomainExit { s: s_exit })
    } else {
        (length, Termination::Complete)
    };
    let cap = default_step_cap(p);
    let mut grid: Vec<f64> = {
        let n = ((end / cap).ceil() as usize).max(1);
        (0..=n).map(|k| end * k as f64 / n as f64).collect()
    };
    if !chart.outward && chart.r0 < end && chart.r0 > 0.0 {
        grid.push(chart.r0);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
    }
    let samples = grid
        .into_iter()
        .map(|s| Sample {
            s,
            state: chart.state(s),
            accel: [0.0, 0.0],
        })
        .collect();
    Ok(GeodesicPath {
        samples,
        nu: 0.0,
        metric_tag: MetricTag::H,
        kind: PathKind::Meridian,
        twist_mu: 0.0,
        termination,
        quality: PathQuality::default(),
        tol,
        meridian: Some(chart),
    })
}

fn twist_by(path: &GeodesicPath, mu: f64) -> GeodesicPath {
    let samples = path
        .samples
        .iter()
        .map(|x| Sample {
            s: x.s,
            state: GeodesicState::new(
                x.state.r,
                x.state.theta + mu * x.s,
                x.state.dr,
                x.state.dtheta + mu,
            ),
            accel: x.accel,
        })
        .collect();
    GeodesicPath {
        samples,
        twist_mu: path.twist_mu + mu,
        ..path.clone()
    }
}

/// `(r, θ, ṙ, θ̇) ↦ (r, θ + μs, ṙ, θ̇ + μ)`. A negative `mu` produces the
/// backward branch when applied to a path integrated with reversed velocity.
pub fn twist(path: &GeodesicPath, mu: f64) -> Result<GeodesicPath> {
    if path.metric_tag != MetricTag::H {
        return Err(Error::InvalidParameter("twist expects an h-path".into()));
    }
    let mut out = twist_by(path, mu);
    if mu != 0.0 {
        out.metric_tag = MetricTag::F;
        if out.kind == PathKind::Meridian {
            out.kind = PathKind::TwistedMeridian;
        }
    }
    Ok(out)
}

/// h-initial data for the F-unit vector `y_f` at `q`: subtract the wind.
pub fn h_initial_state(p: &Profile, q: SurfacePoint, y_f: Tangent) -> Result<GeodesicState> {
    let f = if q.r == 0.0 {
        y_f.y1.abs()
    } else {
        eval_f(p, q, y_f)?
    };
    if (f - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!("F(q, y) = {f}, expected 1")));
    }
    if q.r == 0.0 {
        return Ok(GeodesicState::new(0.0, q.theta, y_f.y1.signum(), 0.0));
    }
    let dtheta = y_f.y2 - p.mu();
    let st = GeodesicState::new(q.r, q.theta, y_f.y1, dtheta);
    let sp = st.h_speed_sq(p);
    if (sp - 1.0).abs() > 1e-8 {
        return Err(Error::InconsistentInput(format!(
            "wind-subtracted vector has h-norm^2 {sp}"
        )));
    }
    let k = sp.sqrt().recip();
    let mut st = GeodesicState::new(q.r, q.theta, y_f.y1 * k, dtheta * k);
    if st.dtheta.abs() < 1e-15 && (st.dr.abs() - 1.0).abs() < 1e-12 {
        st.dtheta = 0.0;
        st.dr = st.dr.signum();
    }
    Ok(st)
}

/// Unit speed F-geodesic from `q` with F-unit initial velocity `y_f`.
pub fn integrate_f(
    p: &Profile,
    q: SurfacePoint,
    y_f: Tangent,
    length: f64,
    tol: f64,
) -> Result<GeodesicPath> {
    let st = h_initial_state(p, q, y_f)?;
    let h = integrate_h(p, st, length, tol)?;
    twist(&h, p.mu())
}

/// Result of [`quadrature_segment`]. `delta_s` is always non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadSegment {
    pub delta_theta: f64,
    pub delta_s: f64,
    pub delta_p2: f64,
}

fn is_turning(p: &Profile, r: f64, anu: f64) -> bool {
    anu > 0.0 && (p.m(r) - anu).abs() <= 1e-8 * anu.max(1.0)
}

/// Angle and arclength swept by an h-geodesic with Clairaut constant `nu`
/// while `r` runs from `ra` to `rb` monotonically; `sign` is the sign of `ṙ`.
pub fn quadrature_segment(p: &Profile, ra: f64, rb: f64, nu: f64, sign: f64) -> Result<QuadSegment> {
    quadrature_segment_tol(p, ra, rb, nu, sign, 1e-10)
}

pub fn quadrature_segment_tol(
    p: &Profile,
    ra: f64,
    rb: f64,
    nu: f64,
    sign: f64,
    tol: f64,
) -> Result<QuadSegment> {
    if ra == rb {
        return Ok(QuadSegment {
            delta_theta: 0.0,
            delta_s: 0.0,
            delta_p2: 0.0,
        });
    }
    if sign * (rb - ra) <= 0.0 {
        return Err(Error::InconsistentInput(format!(
            "sign {sign} does not match the direction from {ra} to {rb}"
        )));
    }
    let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
    if lo < 0.0 {
        return Err(Error::InvalidParameter(format!("negative radius {lo}")));
    }
    let mu = p.mu();
    if nu == 0.0 {
        let ds = hi - lo;
        return Ok(QuadSegment {
            delta_theta: 0.0,
            delta_s: ds,
            delta_p2: mu * ds,
        });
    }
    let anu = nu.abs();
    for k in 1..64 {
        let r = lo + (hi - lo) * k as f64 / 64.0;
        if p.m(r) <= anu {
            return Err(Error::InvalidBracket(format!(
                "m({r}) = {} <= |nu| = {anu} inside [{lo}, {hi}]",
                p.m(r)
            )));
        }
    }
    let lo_turn = is_turning(p, lo, anu);
    let hi_turn = is_turning(p, hi, anu);
    for (r, flag) in [(lo, lo_turn), (hi, hi_turn)] {
        if !flag && p.m(r) <= anu {
            return Err(Error::InvalidBracket(format!(
                "m({r}) = {} <= |nu| = {anu} at an end point",
                p.m(r)
            )));
        }
        if flag && p.m1(r).abs() < 1e-12 {
            return Err(Error::InvalidBracket(format!(
                "degenerate turning point at the geodesic parallel r = {r}"
            )));
        }
    }

    // (∫ξ, ∫η) over [a, b], with a turning point optionally at `a` or `b`
    let piece = |a: f64, b: f64, turn_at_a: bool, turn_at_b: bool| -> Result<(f64, f64)> {
        debug_assert!(!(turn_at_a && turn_at_b));
        let (base, dir, m1_t) = if turn_at_a {
            (a, 1.0, p.m1(a).abs())
        } else if turn_at_b {
            (b, -1.0, p.m1(b).abs())
        } else {
            (a, 0.0, 0.0)
        };
        let pair = |r: f64, u: f64| -> (f64, f64) {
            let m = p.m(r);
            let mut d = m * m - nu * nu;
            if d <= 0.0 {
                d = 2.0 * anu * m1_t * u * u;
            }
            let sq = d.sqrt();
            (nu / (m * sq), m / sq)
        };
        if dir == 0.0 {
            let th = quad::integrate(|r| pair(r, 0.0).0, a, b, tol)?;
            let s = quad::integrate(|r| pair(r, 0.0).1, a, b, tol)?;
            Ok((th, s))
        } else {
            // r = base + dir u^2 removes the inverse square root at the turning
            // point. m(r) - |nu| is taken from a Taylor series in t = dir u^2 near
            // the base, where base + t would round away the offset.
            let (mb1, mb2) = (p.m1(base), p.m2(base));
            let hd = 1e-4 * base.max(1.0);
            let mb3 = (p.m2(base + hd) - p.m2((base - hd).max(0.0))) / (base + hd - (base - hd).max(0.0));
            let mbase = p.m(base);
            let near = 1e-3 * (1.0 + base);
            let umax = (b - a).sqrt();
            let f = |u: f64, which: usize| {
                let t = dir * u * u;
                let dm = if t.abs() < near {
                    t * (mb1 + t * (0.5 * mb2 + t * mb3 / 6.0))
                } else {
                    p.m(base + t) - mbase
                };
                let m = anu + dm;
                let mut d = dm * (dm + 2.0 * anu);
                if d <= 0.0 {
                    d = 2.0 * anu * m1_t * u * u;
                }
                let sq = d.sqrt();
                2.0 * u * if which == 0 { nu / (m * sq) } else { m / sq }
            };
            let th = quad::integrate(|u| f(u, 0), 0.0, umax, tol)?;
            let s = quad::integrate(|u| f(u, 1), 0.0, umax, tol)?;
            Ok((th, s))
        }
    };

    let (th, s) = if lo_turn && hi_turn {
        let mid = 0.5 * (lo + hi);
        let (t1, s1) = piece(lo, mid, true, false)?;
        let (t2, s2) = piece(mid, hi, false, true)?;
        (t1 + t2, s1 + s2)
    } else {
        piece(lo, hi, lo_turn, hi_turn)?
    };
    Ok(QuadSegment {
        delta_theta: th,
        delta_s: s,
        delta_p2: th + mu * s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TurningPoint {
    pub r: f64,
    /// `m'(r) = 0` here, so the geodesic is the parallel itself.
    pub geodesic_parallel: bool,
}

/// Radii on `grid` where `m(r) = |nu|`, refined to 1e-12.
pub fn turning_points(p: &Profile, nu: f64, grid: &[f64]) -> Vec<TurningPoint> {
    let anu = nu.abs();
    if anu == 0.0 || grid.len() < 2 {
        return Vec::new();
    }
    let f = |r: f64| p.m(r) - anu;
    let mut out = Vec::new();
    let mut prev = f(grid[0]);
    if prev == 0.0 && grid[0] > 0.0 {
        out.push(grid[0]);
    }
    for w in grid.windows(2) {
        let cur = f(w[1]);
        if cur == 0.0 {
            out.push(w[1]);
        } else if prev != 0.0 && prev.signum() != cur.signum() {
            if let Ok((r, _)) = quad::brent(f, w[0], w[1], 1e-13) {
                out.push(r);
            }
        }
        prev = cur;
    }
    out.into_iter()
        .map(|r| TurningPoint {
            r,
            geodesic_parallel: p.m1(r).abs() < 1e-9,
        })
        .collect()
}

/// Largest chart deviation between `path` and a freshly shot F-geodesic with
/// the same initial point and direction, both in F-arclength, divided by the
/// F-length of `path`.
pub fn f_geodesic_residual(p: &Profile, path: &GeodesicPath) -> Result<f64> {
    let n = path.samples.len();
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "residual needs at least 3 samples, got {n}"
        )));
    }
    if path.samples.iter().any(|x| x.state.r <= 0.0) {
        return Err(Error::VertexSingular);
    }
    // cumulative F-arclength at every stored sample
    let mut sigma = Vec::with_capacity(n);
    sigma.push(0.0);
    for w in path.samples.windows(2) {
        let seg = quad::gauss_legendre8(
            |s| {
                let st = path.state_at(s);
                f_norm(p, st.r, st.dr, st.dtheta)
            },
            w[0].s,
            w[1].s,
        );
        sigma.push(sigma.last().unwrap() + seg);
    }
    let total = *sigma.last().unwrap();
    let st0 = path.start();
    let f0 = f_norm(p, st0.r, st0.dr, st0.dtheta);
    let y = Tangent::new(st0.dr / f0, st0.dtheta / f0);
    let shot = integrate_f(p, st0.point(), y, total, 1e-12)?;
    let mut worst: f64 = 0.0;
    for (x, &sg) in path.samples.iter().zip(&sigma) {
        let a = x.state;
        let b = shot.state_at(sg);
        let m = p.m(0.5 * (a.r + b.r));
        let dth = wrap_angle(a.theta - b.theta);
        worst = worst.max(((a.r - b.r).powi(2) + (m * dth).powi(2)).sqrt());
    }
    Ok(worst / total)
}

/// Points `(r cos θ, r sin θ)` of the path in the polar plane, spaced by at
/// most `ds` in the parameter.
pub fn polar_polyline(path: &GeodesicPath, ds: f64) -> Vec<[f64; 2]> {
    path.resample(ds)
        .into_iter()
        .map(|(_, st)| [st.r * st.theta.cos(), st.r * st.theta.sin()])
        .collect()
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| {
        (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    };
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Number of proper crossings between non-adjacent segments of a polyline.
/// Uses a uniform bucket grid so long polylines stay cheap.
pub fn self_intersections(pts: &[[f64; 2]]) -> usize {
    let n = pts.len();
    if n < 4 {
        return 0;
    }
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for q in pts {
        xmin = xmin.min(q[0]);
        xmax = xmax.max(q[0]);
        ymin = ymin.min(q[1]);
        ymax = ymax.max(q[1]);
    }
    let cells = ((n as f64).sqrt().ceil() as usize).max(1);
    let wx = ((xmax - xmin) / cells as f64).max(1e-300);
    let wy = ((ymax - ymin) / cells as f64).max(1e-300);
    let cell = |v: f64, lo: f64, w: f64| (((v - lo) / w) as usize).min(cells - 1);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); cells * cells];
    for i in 0..n - 1 {
        let (a, b) = (pts[i], pts[i + 1]);
        let (cx0, cx1) = (cell(a[0].min(b[0]), xmin, wx), cell(a[0].max(b[0]), xmin, wx));
        let (cy0, cy1) = (cell(a[1].min(b[1]), ymin, wy), cell(a[1].max(b[1]), ymin, wy));
        for cx in cx0..=cx1 {
            for cy in cy0..=cy1 {
                buckets[cx * cells + cy].push(i);
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    for b in &buckets {
        for (k, &i) in b.iter().enumerate() {
            for &j in &b[k + 1..] {
                let (i, j) = (i.min(j), i.max(j));
                if j <= i + 1 || seen.contains(&(i, j)) {
                    continue;
                }
                if segments_cross(pts[i], pts[i + 1], pts[j], pts[j + 1]) {
                    seen.insert((i, j));
                }
            }
        }
    }
    seen.len()
}

/// The F-geodesic through `q` with F-unit velocity `y_f` at `q`, traced over
/// parameters `[-back, fwd]`, as one polar-plane polyline.
pub fn two_sided_polyline(
    p: &Profile,
    q: SurfacePoint,
    y_f: Tangent,
    back: f64,
    fwd: f64,
    tol: f64,
    ds: f64,
) -> Result<Vec<[f64; 2]>> {
    let st = h_initial_state(p, q, y_f)?;
    let fwd_path = twist(&integrate_h(p, st, fwd, tol)?, p.mu())?;
    let rev = GeodesicState::new(st.r, st.theta, -st.dr, -st.dtheta);
    let back_path = twist(&integrate_h(p, rev, back, tol)?, -p.mu())?;
    let mut pts = polar_polyline(&back_path, ds);
    pts.reverse();
    pts.pop();
    pts.extend(polar_polyline(&fwd_path, ds));
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::make_paraboloid;

    fn par() -> Profile {
        Profile::paraboloid(1.0, 100.0).unwrap()
    }

    #[test]
    fn meridian_closed_form() {
        let p = par();
        let path = integrate_h(&p, GeodesicState::new(0.5, 0.3, 1.0, 0.0), 2.0, 1e-10).unwrap();
        assert_eq!(path.kind(), PathKind::Meridian);
        assert_eq!(path.nu(), 0.0);
        let st = path.state_at(1.25);
        assert!((st.r - 1.75).abs() < 1e-15 && st.theta == 0.3);
        // through the vertex
        let path = integrate_h(&p, GeodesicState::new(0.5, 0.3, -1.0, 0.0), 2.0, 1e-10).unwrap();
        assert!(path.samples().iter().any(|x| x.state.r == 0.0));
        let st = path.state_at(1.5);
        assert!((st.r - 1.0).abs() < 1e-15);
        assert!((st.theta - 0.3 - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn parallel_stays_put() {
        // m = r/(1+r^2) has a geodesic parallel at r = 1
        let p = Profile::from_fns(
            |r| r / (1.0 + r * r),
            |r| (1.0 - r * r) / (1.0 + r * r).powi(2),
            |r| 2.0 * r * (r * r - 3.0) / (1.0 + r * r).powi(3),
            1.0,
            10.0,
        )
        .unwrap();
        let st = GeodesicState::new(1.0, 0.0, 0.0, 1.0 / p.m(1.0));
        let path = integrate_h(&p, st, 20.0, 1e-10).unwrap();
        assert_eq!(path.kind(), PathKind::Parallel);
        for x in path.samples() {
            assert!((x.state.r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn clairaut_drift_generic() {
        let p = par();
        let st = GeodesicState::from_heading(&p, 2.0, 0.0, std::f64::consts::FRAC_PI_4);
        let path = integrate_h(&p, st, 50.0, 1e-10).unwrap();
        assert!(path.quality().max_clairaut_drift <= 1e-8);
        assert!((path.s_end() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn clairaut_constant_values() {
        let p = make_paraboloid(1.0).unwrap();
        let st = GeodesicState::from_heading(&p, 1.0, 0.0, std::f64::consts::FRAC_PI_6);
        assert!((clairaut_constant(&p, &st) - 0.5 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(clairaut_constant(&p, &GeodesicState::new(1.0, 0.0, -1.0, 0.0)), 0.0);
    }

    #[test]
    fn domain_exit_truncates() {
        let p = make_paraboloid(1.0).unwrap();
        let st = GeodesicState::from_heading(&p, 15.0, 0.0, 0.3);
        let path = integrate_h(&p, st, 50.0, 1e-10).unwrap();
        match path.termination() {
            Termination::DomainExit { s } => assert!(s < 50.0),
            t => panic!("{t:?}"),
        }
        assert!((path.end().r - 20.0).abs() < 1e-10);
    }

    #[test]
    fn turning_point_paraboloid() {
        let p = par();
        let grid = p.uniform_grid(1000);
        let t = turning_points(&p, 0.5, &grid);
        assert_eq!(t.len(), 1);
        assert!((t[0].r - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!(turning_points(&p, 0.0, &grid).is_empty());
    }

    #[test]
    fn quadrature_meridian_and_consistency() {
        let p = par();
        let q = quadrature_segment(&p, 0.5, 2.0, 0.0, 1.0).unwrap();
        assert_eq!((q.delta_theta, q.delta_s), (0.0, 1.5));
        let rt = 0.3 / (1.0 - 0.09f64).sqrt();
        let q = quadrature_segment(&p, rt, 2.0, 0.3, 1.0).unwrap();
        assert!((q.delta_p2 - q.delta_theta - q.delta_s).abs() < 1e-14);
        assert!(quadrature_segment(&p, 0.1, 2.0, 0.3, 1.0).is_err());
        assert!(quadrature_segment(&p, 2.0, 3.0, 0.3, -1.0).is_err());
    }

    #[test]
    fn hermite_reproduces_quintics() {
        let f = |s: f64| 1.0 + s * (0.5 + s * (-0.25 + s * (0.1 + s * (0.02 - 0.003 * s))));
        let df = |s: f64| 0.5 + s * (-0.5 + s * (0.3 + s * (0.08 - 0.015 * s)));
        let ddf = |s: f64| -0.5 + s * (0.6 + s * (0.24 - 0.06 * s));
        let mk = |s: f64| Sample {
            s,
            state: GeodesicState::new(f(s), 0.0, df(s), 0.0),
            accel: [ddf(s), 0.0],
        };
        let (a, b) = (mk(0.3), mk(1.1));
        for k in 0..=10 {
            let s = 0.3 + 0.08 * k as f64;
            let st = hermite(&a, &b, s);
            assert!((st.r - f(s)).abs() < 1e-14);
            assert!((st.dr - df(s)).abs() < 1e-13);
        }
    }

    #[test]
    fn crossing_counter() {
        let sq = [[0.0, 0.0], [2.0, 2.0], [2.0, 0.0], [0.0, 2.0]];
        assert_eq!(self_intersections(&sq), 1);
        let line: Vec<[f64; 2]> = (0..100).map(|k| [k as f64, 0.5 * k as f64]).collect();
        assert_eq!(self_intersections(&line), 0);
    }
}
