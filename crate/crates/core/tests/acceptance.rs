//! Acceptance run: thirteen criteria, one PASS/FAIL line each.
//!
//! Engine output is compared against oracles written here from scratch:
//! closed forms for the paraboloid, an Euler-Lagrange integrator built on
//! hyper-dual numbers, a fixed-step RK4 for the Jacobi equation and an
//! exact substitution for the turning-point quadrature.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use randers::conjugate::{certify_pole, cut_point, first_conjugate, shoot_minimizers, verify_cut_point};
use randers::embed::{certify_pullback, Embedding};
use randers::geodesics::{f_geodesic_residual, integrate_h, quadrature_segment_tol, twist};
use randers::measure::{loop_constant_report, meeting_point, parallel_lengths, shoot_from_vertex};
use randers::{Exec, GeodesicPath, GeodesicState, Profile, SurfacePoint, Tangent};

const SEED: u64 = 0x5eed_2024;

// ---------------------------------------------------------------------------
// paraboloid closed forms

fn m(mu: f64, r: f64) -> f64 {
    r / (mu * mu * r * r + 1.0).sqrt()
}

fn m1(mu: f64, r: f64) -> f64 {
    (mu * mu * r * r + 1.0).powf(-1.5)
}

/// `-m''/m`.
fn gauss(mu: f64, r: f64) -> f64 {
    3.0 * mu * mu / (mu * mu * r * r + 1.0).powi(2)
}

fn f_local(mu: f64, r: f64, y1: f64, y2: f64) -> f64 {
    let mm = m(mu, r);
    let lam = 1.0 - mu * mu * mm * mm;
    let alpha = (y1 * y1 / lam + mm * mm * y2 * y2 / (lam * lam)).sqrt();
    alpha - mu * mm * mm * y2 / lam
}

// ---------------------------------------------------------------------------
// hyper-dual numbers: f + a e1 + b e2 + c e1e2 with e1² = e2² = 0

#[derive(Clone, Copy)]
struct Hd(f64, f64, f64, f64);

impl Hd {
    fn c(v: f64) -> Self {
        Hd(v, 0.0, 0.0, 0.0)
    }
    fn mul(self, o: Hd) -> Hd {
        Hd(
            self.0 * o.0,
            self.1 * o.0 + self.0 * o.1,
            self.2 * o.0 + self.0 * o.2,
            self.3 * o.0 + self.1 * o.2 + self.2 * o.1 + self.0 * o.3,
        )
    }
    fn add(self, o: Hd) -> Hd {
        Hd(self.0 + o.0, self.1 + o.1, self.2 + o.2, self.3 + o.3)
    }
    fn sub(self, o: Hd) -> Hd {
        Hd(self.0 - o.0, self.1 - o.1, self.2 - o.2, self.3 - o.3)
    }
    fn scale(self, k: f64) -> Hd {
        Hd(self.0 * k, self.1 * k, self.2 * k, self.3 * k)
    }
    /// Applies a scalar function given its value and first two derivatives.
    fn chain(self, f: f64, d1: f64, d2: f64) -> Hd {
        Hd(f, d1 * self.1, d1 * self.2, d1 * self.3 + d2 * self.1 * self.2)
    }
    fn sqrt(self) -> Hd {
        let s = self.0.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.0))
    }
    fn recip(self) -> Hd {
        let v = 1.0 / self.0;
        self.chain(v, -v * v, 2.0 * v * v * v)
    }
}

/// `∂/∂y2 (F²/2)`, exact through the first dual slot.
fn momentum_local(mu: f64, r: f64, y1: f64, y2: f64) -> f64 {
    lagrangian(mu, Hd::c(r), Hd::c(y1), Hd(y2, 1.0, 0.0, 0.0)).1
}

fn lagrangian(mu: f64, r: Hd, y1: Hd, y2: Hd) -> Hd {
    let mm = r.mul(r.mul(r).scale(mu * mu).add(Hd::c(1.0)).sqrt().recip());
    let m2 = mm.mul(mm);
    let lam = Hd::c(1.0).sub(m2.scale(mu * mu));
    let il = lam.recip();
    let alpha = y1.mul(y1).mul(il).add(m2.mul(y2).mul(y2).mul(il).mul(il)).sqrt();
    let f = alpha.sub(m2.mul(y2).mul(il).scale(mu));
    f.mul(f).scale(0.5)
}

/// Derivatives of `F²/2` at `(r, y)`: gradient in `r`, gradient in `y`,
/// Hessian in `y` and the mixed block `∂²/∂y∂r`.
struct Jet {
    l_r: f64,
    l_yy: [[f64; 2]; 2],
    l_yr: [f64; 2],
}

fn jet(mu: f64, r: f64, y: [f64; 2]) -> Jet {
    // slot 0 = r, 1 = y1, 2 = y2
    let eval = |i: usize, j: usize| {
        let mut v = [Hd::c(r), Hd::c(y[0]), Hd::c(y[1])];
        v[i].1 = 1.0;
        v[j].2 = 1.0;
        lagrangian(mu, v[0], v[1], v[2])
    };
    let l_r = eval(0, 0).1;
    let mut l_yy = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            l_yy[a][b] = eval(a + 1, b + 1).3;
        }
    }
    let l_yr = [eval(1, 0).3, eval(2, 0).3];
    Jet { l_r, l_yy, l_yr }
}

/// Euler-Lagrange residual of `F²/2` for a curve with velocity `y` and
/// acceleration `a` at radius `r`.
fn el_residual(mu: f64, r: f64, y: [f64; 2], a: [f64; 2]) -> f64 {
    let j = jet(mu, r, y);
    let r1 = j.l_yr[0] * y[0] + j.l_yy[0][0] * a[0] + j.l_yy[0][1] * a[1] - j.l_r;
    let r2 = j.l_yr[1] * y[0] + j.l_yy[1][0] * a[0] + j.l_yy[1][1] * a[1];
    r1.hypot(r2)
}

/// Acceleration of an F-geodesic from the Euler-Lagrange equations.
fn el_accel(mu: f64, r: f64, y: [f64; 2]) -> [f64; 2] {
    let j = jet(mu, r, y);
    let b1 = j.l_r - j.l_yr[0] * y[0];
    let b2 = -j.l_yr[1] * y[0];
    let [[a, b], [c, d]] = j.l_yy;
    let det = a * d - b * c;
    [(d * b1 - b * b2) / det, (a * b2 - c * b1) / det]
}

fn rk4<const N: usize>(mut x: [f64; N], len: f64, steps: usize, f: impl Fn(&[f64; N]) -> [f64; N]) -> [f64; N] {
    let h = len / steps as f64;
    let lin = |x: &[f64; N], k: &[f64; N], c: f64| {
        let mut o = *x;
        for i in 0..N {
            o[i] += c * k[i];
        }
        o
    };
    for _ in 0..steps {
        let k1 = f(&x);
        let k2 = f(&lin(&x, &k1, h / 2.0));
        let k3 = f(&lin(&x, &k2, h / 2.0));
        let k4 = f(&lin(&x, &k3, h));
        for i in 0..N {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    x
}

/// F-geodesic `(r, θ, ṙ, θ̇)` after `len` by RK4 on the Euler-Lagrange system.
fn el_geodesic(mu: f64, start: [f64; 4], len: f64, steps: usize) -> [f64; 4] {
    rk4(start, len, steps, |x| {
        let a = el_accel(mu, x[0], [x[2], x[3]]);
        [x[2], x[3], a[0], a[1]]
    })
}

/// h-geodesic `(r, θ, ṙ, θ̇)` by RK4 on the warped-product equations.
fn h_geodesic(mu: f64, start: [f64; 4], len: f64, steps: usize) -> [f64; 4] {
    rk4(start, len, steps, |x| h_rhs(mu, x))
}

fn h_rhs(mu: f64, x: &[f64; 4]) -> [f64; 4] {
    let (mm, d) = (m(mu, x[0]), m1(mu, x[0]));
    [x[2], x[3], mm * d * x[3] * x[3], -2.0 * d / mm * x[2] * x[3]]
}

// Gauss-Legendre, 8 nodes on [-1, 1]
const GL_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_W: [f64; 4] = [
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

fn gl_composite(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for k in 0..panels {
        let c = a + (k as f64 + 0.5) * h;
        for i in 0..4 {
            let dx = 0.5 * h * GL_X[i];
            sum += GL_W[i] * (f(c - dx) + f(c + dx));
        }
    }
    0.5 * h * sum
}

fn wrap(a: f64) -> f64 {
    let t = a.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

// ---------------------------------------------------------------------------

struct Verdict {
    passed: bool,
    summary: String,
}

fn verdict(passed: bool, summary: String) -> Result<Verdict, String> {
    Ok(Verdict { passed, summary })
}

type Outcome = Result<Verdict, String>;

fn para(mu: f64, r_max: f64) -> Result<Profile, String> {
    Profile::paraboloid(mu, r_max).map_err(|e| e.to_string())
}

fn rng(salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(SEED.wrapping_add(salt))
}

/// Twenty h-geodesics on the paraboloid with `μ = 1` and their twists.
fn random_pairs(p: &Profile) -> Result<Vec<(GeodesicPath, GeodesicPath)>, String> {
    let mut g = rng(1);
    (0..20)
        .map(|_| {
            let (r0, phi, len) = (g.gen_range(0.5..5.0), g.gen_range(-PI..PI), g.gen_range(10.0..50.0));
            let h = integrate_h(p, GeodesicState::from_heading(p, r0, 0.0, phi), len, 1e-10)
                .map_err(|e| e.to_string())?;
            let f = twist(&h, 1.0).map_err(|e| e.to_string())?;
            Ok((h, f))
        })
        .collect()
}

fn c1_clairaut_h(pairs: &[(GeodesicPath, GeodesicPath)]) -> Outcome {
    let mut worst: f64 = 0.0;
    for (h, _) in pairs {
        let st = h.start();
        let nu = m(1.0, st.r).powi(2) * st.dtheta;
        for x in h.samples() {
            worst = worst.max((m(1.0, x.state.r).powi(2) * x.state.dtheta - nu).abs());
        }
    }
    // the engine trajectory itself against an independent RK4 at s = 10
    let mut track: f64 = 0.0;
    for (h, _) in pairs.iter().take(3) {
        let s = h.start();
        let x = h_geodesic(1.0, [s.r, s.theta, s.dr, s.dtheta], 10.0, 20_000);
        let e = h.state_at(10.0);
        track = track.max((x[0] - e.r).abs()).max((x[1] - e.theta).abs());
    }
    verdict(
        worst <= 1e-7 && track <= 1e-6,
        format!("max |m²θ' - ν| = {worst:.3e} (tol 1e-7); RK4 track deviation {track:.3e}"),
    )
}

fn c2_clairaut_finsler(pairs: &[(GeodesicPath, GeodesicPath)]) -> Outcome {
    let mu = 1.0;
    let mut worst: f64 = 0.0;
    for (_, f) in pairs {
        let st = f.start();
        let nu = m(mu, st.r).powi(2) * (st.dtheta - mu);
        for x in f.samples() {
            let s = x.state;
            if s.r < 1e-9 {
                continue;
            }
            let mm = m(mu, s.r);
            let phi = (mm * (s.dtheta - mu)).atan2(s.dr);
            let psi = (mm * s.dtheta).atan2(s.dr);
            let k = (1.0 + 2.0 * mu * nu + mu * mu * mm * mm).sqrt();
            let a = (k * (psi - phi).cos() - (1.0 + mu * nu)).abs();
            let b = (mm * psi.sin() - (nu + mu * mm * mm) / k).abs();
            worst = worst.max(a).max(b);
        }
    }
    verdict(worst <= 1e-7, format!("max residual {worst:.3e} (tol 1e-7)"))
}

fn c3_momentum(pairs: &[(GeodesicPath, GeodesicPath)]) -> Outcome {
    let mu = 1.0;
    let mut worst: f64 = 0.0;
    for (_, f) in pairs {
        let st = f.start();
        let nu = m(mu, st.r).powi(2) * (st.dtheta - mu);
        let target = nu / (1.0 + mu * nu);
        for x in f.samples() {
            let s = x.state;
            if s.r < 1e-9 {
                continue;
            }
            worst = worst.max((momentum_local(mu, s.r, s.dr, s.dtheta) - target).abs());
        }
    }
    verdict(worst <= 1e-8, format!("max |p2 - ν/(1+μν)| = {worst:.3e} (tol 1e-8)"))
}

fn c4_unit_speed(pairs: &[(GeodesicPath, GeodesicPath)]) -> Outcome {
    let mut worst: f64 = 0.0;
    for (_, f) in pairs {
        for x in f.samples() {
            let s = x.state;
            worst = worst.max((f_local(1.0, s.r, s.dr, s.dtheta) - 1.0).abs());
        }
    }
    verdict(worst <= 1e-8, format!("max |F(P') - 1| = {worst:.3e} (tol 1e-8)"))
}

fn c5_meeting_point() -> Outcome {
    let mu = 1.0;
    let p = para(mu, 20.0)?;
    let mut g = rng(5);
    let mut worst: f64 = 0.0;
    let mut radii: Vec<f64> = (0..10).map(|_| g.gen_range(0.1..10.0)).collect();
    radii.push(1.0 / 3f64.sqrt());
    let mut half_len = f64::NAN;
    for &r0 in &radii {
        let mm = m(mu, r0);
        let closed = [PI * (1.0 + mu * mm), PI * (1.0 - mu * mm), PI * mu * mm];
        // equal arrival: F-length along +θ for angle a equals F-length along -θ for 2π - a
        let (kp, km) = (f_local(mu, r0, 0.0, 1.0), f_local(mu, r0, 0.0, -1.0));
        let (mut lo, mut hi) = (0.0, 2.0 * PI);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if kp * mid < km * (2.0 * PI - mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let a = 0.5 * (lo + hi);
        let oracle = [a, 2.0 * PI - a, mu * kp * a];
        let mp = meeting_point(&p, r0).map_err(|e| e.to_string())?;
        for i in 0..3 {
            worst = worst
                .max((mp.numeric[i] - closed[i]).abs())
                .max((oracle[i] - closed[i]).abs())
                .max((mp.closed_form[i] - closed[i]).abs());
        }
        if (mm - 0.5).abs() < 1e-15 {
            half_len = mp.numeric[2];
        }
    }
    let half_dev = (half_len - PI / 2.0).abs();
    verdict(
        worst <= 1e-10 && half_dev <= 1e-10,
        format!("max deviation {worst:.3e} over 10 radii; m0 = 1/2 gives {half_len:.15} (tol 1e-10)"),
    )
}

fn c6_ordering() -> Outcome {
    let mu = 1.0;
    let p = para(mu, 20.0)?;
    let mut margin = f64::INFINITY;
    let mut drift: f64 = 0.0;
    for k in 0..10 {
        let r0 = 0.5 + 0.5 * k as f64;
        let l = parallel_lengths(&p, r0).map_err(|e| e.to_string())?;
        let mm = m(mu, r0);
        let exact = [2.0 * PI * mm / (1.0 + mu * mm), 2.0 * PI * mm, 2.0 * PI * mm / (1.0 - mu * mm)];
        drift = drift
            .max((l.plus - exact[0]).abs())
            .max((l.h - exact[1]).abs())
            .max((l.minus - exact[2]).abs());
        margin = margin.min(l.h - l.plus).min(l.minus - l.h);
    }
    verdict(
        margin >= 1e-6 && drift <= 1e-9,
        format!("smallest gap {margin:.3e} (need >= 1e-6); quadrature vs closed form {drift:.3e}"),
    )
}

fn c7_vertex() -> Outcome {
    let mu = 1.0;
    let p = para(mu, 20.0)?;
    let mut g = rng(7);
    let mut worst: f64 = 0.0;
    let mut angle: f64 = 0.0;
    let mut f_len: f64 = 0.0;
    for _ in 0..10 {
        let q = SurfacePoint::new(g.gen_range(0.5..10.0), g.gen_range(-PI..PI));
        let shot = shoot_from_vertex(&p, q, 1e-10).map_err(|e| e.to_string())?;
        worst = worst.max((shot.length - q.r).abs()).max(shot.miss.abs());
        // the twisted meridian through q leaves the vertex at θ - μ r
        angle = angle.max(wrap(shot.theta0 - (q.theta - mu * q.r)).abs());
        let len = gl_composite(|s| f_local(mu, s, 1.0, mu), 0.0, q.r, 64);
        f_len = f_len.max((len - q.r).abs());
    }
    verdict(
        worst <= 1e-7 && angle <= 1e-7 && f_len <= 1e-12,
        format!("max |L - r0| = {worst:.3e} (tol 1e-7); launch angle error {angle:.3e}; F-length check {f_len:.3e}"),
    )
}

/// Exact `(Δθ, Δs)` from the turning point to `rb` on the paraboloid with
/// `μ = 1`, after `r = lo + u²` removes the endpoint singularity.
fn exact_segment(nu: f64, rb: f64) -> (f64, f64) {
    let lo = nu / (1.0 - nu * nu).sqrt();
    let w = (lo * lo + 1.0).sqrt();
    let umax = (rb - lo).sqrt();
    let ds = gl_composite(
        |u| {
            let r = lo + u * u;
            2.0 * r * w / (2.0 * lo + u * u).sqrt()
        },
        0.0,
        umax,
        200,
    );
    let dth = gl_composite(
        |u| {
            let r = lo + u * u;
            2.0 * nu * (r * r + 1.0) * w / (r * (2.0 * lo + u * u).sqrt())
        },
        0.0,
        umax,
        200,
    );
    (dth, ds)
}

fn c8_ode_vs_quadrature() -> Outcome {
    let p = para(1.0, 20.0)?;
    let mut g = rng(8);
    let mut worst: f64 = 0.0;
    let mut against_exact: f64 = 0.0;
    for _ in 0..10 {
        let nu: f64 = g.gen_range(0.1..0.8);
        let lo = nu / (1.0 - nu * nu).sqrt();
        let rb = lo + g.gen_range(0.5..3.0);
        let (dth_x, ds_x) = exact_segment(nu, rb);

        let st = GeodesicState::new(lo, 0.0, 0.0, nu / (lo * lo / (lo * lo + 1.0)));
        let path = integrate_h(&p, st, 3.0 * (rb - lo) + 10.0, 1e-11).map_err(|e| e.to_string())?;
        let hit = path
            .samples()
            .iter()
            .find(|x| x.state.r >= rb)
            .map(|x| x.s)
            .ok_or("ODE never reached the outer radius")?;
        let (mut a, mut b) = (0.0, hit);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if path.state_at(mid).r < rb {
                a = mid;
            } else {
                b = mid;
            }
        }
        let s_ode = 0.5 * (a + b);
        let th_ode = path.state_at(s_ode).theta;
        let q = quadrature_segment_tol(&p, lo, rb, nu, 1.0, 1e-12).map_err(|e| e.to_string())?;

        worst = worst.max((th_ode - q.delta_theta).abs()).max((s_ode - q.delta_s).abs());
        against_exact = against_exact
            .max((th_ode - dth_x).abs())
            .max((s_ode - ds_x).abs())
            .max((q.delta_theta - dth_x).abs())
            .max((q.delta_s - ds_x).abs());
    }
    verdict(
        worst <= 1e-6 && against_exact <= 1e-6,
        format!("ODE vs quadrature {worst:.3e}; both vs exact substitution {against_exact:.3e} (tol 1e-6)"),
    )
}

fn c9_pole() -> Outcome {
    let mu = 1.0;
    let p = para(mu, 20.0)?;
    let cert = certify_pole(&p, 20.0).map_err(|e| e.to_string())?;
    // Jacobi equation y'' = -G y along the meridian from the vertex, where s = r
    let mut dev_local: f64 = 0.0;
    let mut x = [0.0, 0.0, 1.0]; // (s, y, y')
    for _ in 0..2000 {
        x = rk4(x, 0.01, 10, |v| [1.0, v[2], -gauss(mu, v[0]) * v[1]]);
        dev_local = dev_local.max((x[1] - m(mu, x[0])).abs());
    }
    verdict(
        cert.jacobi_max_dev <= 1e-9 && dev_local <= 1e-9 && cert.certified,
        format!(
            "engine |y - m| = {:.3e}, local RK4 {dev_local:.3e} (tol 1e-9); integral {:.6} >= bound {:.6}",
            cert.jacobi_max_dev, cert.integral, cert.closed_form_bound
        ),
    )
}

/// Reference first conjugate parameter for `q = (1, 0)`, `μ = 1`, from an
/// offline high-precision Jacobi solve.
const CONJUGATE_REF: f64 = 2.0;

fn c10_cut_locus() -> Outcome {
    let mu = 1.0;
    let p = para(mu, 100.0)?;
    let q = SurfacePoint::new(1.0, 0.0);
    let c = first_conjugate(&p, q).map_err(|e| e.to_string())?;
    let cs = cut_point(&p, q, c + 1.0, 360).map_err(|e| e.to_string())?;
    let y = SurfacePoint::new(cs.r, cs.theta);
    let chk = verify_cut_point(&p, q, y, 1e-6).map_err(|e| e.to_string())?;
    let gap = (chk.minimizers[0].length - chk.minimizers[1].length).abs();

    // land both minimisers with the Euler-Lagrange integrator
    let mut landing: f64 = 0.0;
    for s in &chk.minimizers[..2] {
        let mq = m(mu, q.r);
        let start = [q.r, q.theta, s.heading.cos(), s.heading.sin() / mq + mu];
        let e = el_geodesic(mu, start, s.length, 8000);
        let miss = (e[0] - y.r).hypot(m(mu, y.r) * wrap(e[1] - y.theta));
        landing = landing.max(miss);
    }
    let control = shoot_minimizers(&p, q, SurfacePoint::new(cs.r, cs.theta_literal), 1e-6)
        .map_err(|e| e.to_string())?;
    let one = control.minimizers.len() == 1;
    verdict(
        c > q.r && (c - CONJUGATE_REF).abs() <= 1e-8 && gap <= 1e-5 && landing <= 1e-6 && one,
        format!(
            "c = {c:.12} > 1; |L1 - L2| = {gap:.3e} (tol 1e-5); EL landing {landing:.3e}; control has {} minimiser(s)",
            control.minimizers.len()
        ),
    )
}

/// `F̃` on the Minkowski cylinder, written out componentwise.
fn f_tilde_local(mu: f64, x: [f64; 3], v: [f64; 3]) -> f64 {
    let lt = 1.0 - mu * mu * (x[0] * x[0] + x[1] * x[1]);
    let a = [
        [1.0 - mu * mu * x[0] * x[0], -mu * mu * x[0] * x[1], 0.0],
        [-mu * mu * x[0] * x[1], 1.0 - mu * mu * x[1] * x[1], 0.0],
        [0.0, 0.0, lt],
    ];
    let mut q = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            q += a[i][j] * v[i] * v[j];
        }
    }
    q.sqrt() / lt + (mu * x[1] * v[0] - mu * x[0] * v[1]) / lt
}

fn c11_embedding() -> Outcome {
    let mut worst_engine: f64 = 0.0;
    let mut worst_local: f64 = 0.0;
    for (k, mu) in [0.3, 1.0].into_iter().enumerate() {
        let emb = Embedding::new(&para(mu, 20.0)?).map_err(|e| e.to_string())?;
        let rep = certify_pullback(&emb, 1000, SEED + k as u64, [0.1, 5.0], Exec::default())
            .map_err(|e| e.to_string())?;
        worst_engine = worst_engine.max(rep.max_residual);

        let mut g = rng(11 + k as u64);
        for _ in 0..1000 {
            let (r, th) = (g.gen_range(0.1..5.0), g.gen_range(-PI..PI));
            let (y1, y2) = (g.gen_range(-2.0..2.0), g.gen_range(-2.0..2.0));
            let (mm, d) = (m(mu, r), m1(mu, r));
            let x = [mm * th.cos(), mm * th.sin(), 0.0];
            let v = [
                d * y1 * th.cos() - mm * th.sin() * y2,
                d * y1 * th.sin() + mm * th.cos() * y2,
                (1.0 - d * d).sqrt() * y1,
            ];
            let want = f_local(mu, r, y1, y2);
            worst_local = worst_local.max((f_tilde_local(mu, x, v) - want).abs() / want.max(1.0));
        }
    }
    let emb = Embedding::new(&para(1.0, 20.0)?).map_err(|e| e.to_string())?;
    let q = SurfacePoint::new(1.0, 0.0);
    let radial = emb.f_tilde(q, Tangent::new(1.0, 0.0)).map_err(|e| e.to_string())?;
    let around = emb.f_tilde(q, Tangent::new(0.0, 1.0)).map_err(|e| e.to_string())?;
    let spot = (radial - 2f64.sqrt()).abs().max((around - (2f64.sqrt() - 1.0)).abs());
    verdict(
        worst_engine <= 1e-9 && worst_local <= 1e-9 && spot <= 1e-12,
        format!(
            "engine residual {worst_engine:.3e}, local {worst_local:.3e} (tol 1e-9); spot values off by {spot:.3e} (tol 1e-12)"
        ),
    )
}

fn c12_non_geodesy() -> Outcome {
    let mu = 1.0;
    let p = para(mu, 20.0)?;
    let map = |e: randers::Error| e.to_string();
    let meridian = integrate_h(&p, GeodesicState::new(1.0, 0.0, 1.0, 0.0), 1.0, 1e-12).map_err(map)?;
    let generic = integrate_h(&p, GeodesicState::from_heading(&p, 1.0, 0.0, 1.0), 1.0, 1e-12).map_err(map)?;
    let twisted = twist(&meridian, mu).map_err(map)?;
    let rm = f_geodesic_residual(&p, &meridian).map_err(map)?;
    let rg = f_geodesic_residual(&p, &generic).map_err(map)?;
    let rt = f_geodesic_residual(&p, &twisted).map_err(map)?;

    let (mut el_m, mut el_g, mut el_t) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..=50 {
        let s = k as f64 / 50.0;
        el_m = el_m.max(el_residual(mu, 1.0 + s, [1.0, 0.0], [0.0, 0.0]));
        el_t = el_t.max(el_residual(mu, 1.0 + s, [1.0, mu], [0.0, 0.0]));
        let st = generic.state_at(s);
        let x = [st.r, st.theta, st.dr, st.dtheta];
        let acc = h_rhs(mu, &x);
        el_g = el_g.max(el_residual(mu, st.r, [st.dr, st.dtheta], [acc[2], acc[3]]));
    }
    verdict(
        rm >= 1e-3 && rg >= 1e-3 && rt <= 1e-7 && el_m >= 1e-3 && el_g >= 1e-3 && el_t <= 1e-7,
        format!(
            "meridian {rm:.3e} / EL {el_m:.3e}, generic {rg:.3e} / EL {el_g:.3e} (need >= 1e-3); twisted {rt:.3e} / EL {el_t:.3e} (tol 1e-7)"
        ),
    )
}

fn c13_loop_constant() -> Outcome {
    let mu = 1.0;
    let p = para(mu, 20.0)?;
    let r0 = 1.0 / 3f64.sqrt();
    let rep = loop_constant_report(&p, r0).map_err(|e| e.to_string())?;
    let mm = m(mu, r0);
    // one full turn along +θ at constant F-speed
    let loop_len = 2.0 * PI * f_local(mu, r0, 0.0, 1.0);
    let stated = PI * mm / (1.0 + mu * mm);
    let dev = (rep.full_turn_quadrature - loop_len)
        .abs()
        .max((rep.stated_constant - stated).abs());
    let ratio = loop_len / stated;
    verdict(
        !rep.consistent && dev <= 1e-10 && (rep.ratio_turn_to_stated - ratio).abs() <= 1e-10,
        format!(
            "closed loop {:.12}, stated constant {:.12}, ratio {:.12}; flagged inconsistent: {}",
            rep.full_turn_quadrature, rep.stated_constant, rep.ratio_turn_to_stated, !rep.consistent
        ),
    )
}

fn main() -> ExitCode {
    let t0 = Instant::now();
    let p = match para(1.0, 60.0) {
        Ok(p) => p,
        Err(e) => {
            println!("cannot build the paraboloid: {e}");
            return ExitCode::FAILURE;
        }
    };
    let pairs = random_pairs(&p);
    let with_pairs = |f: fn(&[(GeodesicPath, GeodesicPath)]) -> Outcome| match &pairs {
        Ok(v) => f(v),
        Err(e) => Err(e.clone()),
    };

    let runs: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("clairaut conservation (h)", Box::new(|| with_pairs(c1_clairaut_h))),
        ("finslerian clairaut", Box::new(|| with_pairs(c2_clairaut_finsler))),
        ("momentum law", Box::new(|| with_pairs(c3_momentum))),
        ("navigation unit speed", Box::new(|| with_pairs(c4_unit_speed))),
        ("meeting point", Box::new(c5_meeting_point)),
        ("parallel length ordering", Box::new(c6_ordering)),
        ("vertex distance", Box::new(c7_vertex)),
        ("ode / quadrature agreement", Box::new(c8_ode_vs_quadrature)),
        ("pole jacobi field", Box::new(c9_pole)),
        ("cut locus", Box::new(c10_cut_locus)),
        ("embedding isometry", Box::new(c11_embedding)),
        ("non-geodesy", Box::new(c12_non_geodesy)),
        ("loop constant discrepancy flagged", Box::new(c13_loop_constant)),
    ];

    let mut failed = 0;
    for (i, (name, run)) in runs.iter().enumerate() {
        let t = Instant::now();
        let (ok, msg) = match run() {
            Ok(v) => (v.passed, v.summary),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {msg} [{:.2}s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        runs.len() - failed,
        t0.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
