//! Self-verification suite: thirteen numerical checks of the engine on the
//! paraboloid with `mu = 1`, each with a fixed tolerance.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::conjugate::{certify_pole, cut_point, first_conjugate, shoot_minimizers, verify_cut_point};
use crate::embed::{certify_pullback, Embedding};
use crate::error::{Error, Result};
use crate::geodesics::{
    integrate_h, quadrature_segment_tol, turning_points, twist, f_geodesic_residual, GeodesicPath,
    GeodesicState,
};
use crate::measure::{clairaut_verify, loop_constant_report, meeting_point, parallel_lengths, shoot_from_vertex};
use crate::par::Exec;
use crate::profile::{Profile, SurfacePoint};
use crate::quad;
use crate::zermelo::Tangent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub tol_ode: f64,
    pub tol_quad: f64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 20240611,
            tol_ode: 1e-10,
            tol_quad: 1e-12,
            exec: Exec::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

const NAMES: [&str; 13] = [
    "clairaut-h",
    "clairaut-finsler",
    "momentum",
    "navigation-unit-speed",
    "meeting-point",
    "parallel-length-ordering",
    "vertex-distance",
    "ode-quadrature-agreement",
    "pole-jacobi",
    "cut-locus",
    "embedding-isometry",
    "non-geodesy",
    "loop-constant-discrepancy",
];

pub fn run_suite(cfg: &SuiteConfig) -> SuiteReport {
    let checks = cfg.exec.map_range(NAMES.len(), |i| run_check(i + 1, cfg));
    let passed = checks.iter().all(|c| c.passed);
    SuiteReport {
        config: *cfg,
        checks,
        passed,
    }
}

/// One check by its 1-based id.
pub fn run_check(id: usize, cfg: &SuiteConfig) -> CheckResult {
    let t0 = Instant::now();
    let out = match id {
        1..=4 => check_conservation(id, cfg),
        5 => check_meeting(cfg),
        6 => check_ordering(),
        7 => check_vertex(cfg),
        8 => check_ode_vs_quadrature(cfg),
        9 => check_pole(),
        10 => check_cut_locus(),
        11 => check_embedding(cfg),
        12 => check_non_geodesy(cfg),
        13 => check_loop_constant(),
        _ => Err(Error::InvalidParameter(format!("no check with id {id}"))),
    };
    let name = NAMES.get(id.wrapping_sub(1)).copied().unwrap_or("unknown");
    let seconds = t0.elapsed().as_secs_f64();
    match out {
        Ok((value, tolerance, passed, detail)) => CheckResult {
            id,
            name,
            passed,
            value,
            tolerance,
            detail,
            seconds,
        },
        Err(e) => CheckResult {
            id,
            name,
            passed: false,
            value: f64::NAN,
            tolerance: f64::NAN,
            detail: format!("error: {e}"),
            seconds,
        },
    }
}

type Outcome = Result<(f64, f64, bool, String)>;

fn le(value: f64, tol: f64, detail: String) -> Outcome {
    Ok((value, tol, value <= tol, detail))
}

fn paraboloid(r_max: f64) -> Result<Profile> {
    Profile::paraboloid(1.0, r_max)
}

fn rng(cfg: &SuiteConfig, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Twenty seeded h-geodesics with lengths up to 50 and their twists.
pub fn random_geodesics(p: &Profile, cfg: &SuiteConfig, n: usize) -> Result<Vec<(GeodesicPath, GeodesicPath)>> {
    let mut g = rng(cfg, 1);
    let starts: Vec<(f64, f64, f64)> = (0..n)
        .map(|_| (g.gen_range(0.5..5.0), g.gen_range(-PI..PI), g.gen_range(10.0..50.0)))
        .collect();
    cfg.exec
        .map(&starts, |&(r0, phi, len)| {
            let h = integrate_h(p, GeodesicState::from_heading(p, r0, 0.0, phi), len, cfg.tol_ode)?;
            let f = twist(&h, p.mu())?;
            Ok((h, f))
        })
        .into_iter()
        .collect()
}

fn check_conservation(id: usize, cfg: &SuiteConfig) -> Outcome {
    let p = paraboloid(60.0)?;
    let paths = random_geodesics(&p, cfg, 20)?;
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    for (h, f) in &paths {
        match id {
            1 => {
                for x in h.samples() {
                    let m = p.m(x.state.r);
                    worst = worst.max((m * m * x.state.dtheta - h.nu()).abs());
                    samples += 1;
                }
            }
            _ => {
                let rep = clairaut_verify(&p, f)?;
                samples += rep.samples;
                let v = match id {
                    2 => rep.max_f1_residual.max(rep.max_f2_residual).max(rep.max_h_residual),
                    3 => rep.max_momentum_residual,
                    _ => rep.max_unit_residual,
                };
                worst = worst.max(v);
            }
        }
    }
    let tol = if id <= 2 { 1e-7 } else { 1e-8 };
    le(worst, tol, format!("20 geodesics, {samples} samples"))
}

fn check_meeting(cfg: &SuiteConfig) -> Outcome {
    let p = paraboloid(20.0)?;
    let mut g = rng(cfg, 5);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        worst = worst.max(meeting_point(&p, g.gen_range(0.1..10.0))?.max_dev);
    }
    let half = meeting_point(&p, 1.0 / 3f64.sqrt())?;
    let dev = (half.numeric[2] - PI / 2.0).abs();
    le(
        worst.max(dev),
        1e-10,
        format!("10 radii; common length at m0 = 1/2 is {:.16e}", half.numeric[2]),
    )
}

fn check_ordering() -> Outcome {
    let p = paraboloid(20.0)?;
    let mut margin = f64::INFINITY;
    for k in 0..10 {
        let l = parallel_lengths(&p, 0.5 + 0.5 * k as f64)?;
        margin = margin.min(l.h - l.plus).min(l.minus - l.h);
    }
    Ok((margin, 1e-6, margin >= 1e-6, "smallest gap over 10 parallels".into()))
}

fn check_vertex(cfg: &SuiteConfig) -> Outcome {
    let p = paraboloid(20.0)?;
    let mut g = rng(cfg, 7);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let q = SurfacePoint::new(g.gen_range(0.5..10.0), g.gen_range(-PI..PI));
        let shot = shoot_from_vertex(&p, q, cfg.tol_ode)?;
        worst = worst.max((shot.length - q.r).abs()).max(shot.miss.abs());
    }
    le(worst, 1e-7, "10 random targets".into())
}

fn check_ode_vs_quadrature(cfg: &SuiteConfig) -> Outcome {
    let p = paraboloid(20.0)?;
    let grid = p.uniform_grid(4000);
    let mut g = rng(cfg, 8);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let nu = g.gen_range(0.1..0.8);
        let lo = turning_points(&p, nu, &grid)
            .first()
            .map(|t| t.r)
            .ok_or_else(|| Error::VerificationFailed(format!("no turning point for nu = {nu}")))?;
        let rb = lo + g.gen_range(0.5..3.0);
        let (dth, ds) = ode_segment(&p, lo, rb, nu, cfg.tol_ode.min(1e-11))?;
        let q = quadrature_segment_tol(&p, lo, rb, nu, 1.0, cfg.tol_quad)?;
        worst = worst.max((dth - q.delta_theta).abs()).max((ds - q.delta_s).abs());
    }
    le(worst, 1e-6, "10 (nu, bracket) cases".into())
}

/// `(Δθ, Δs)` from the ODE started at the turning point `lo` until `r = rb`.
fn ode_segment(p: &Profile, lo: f64, rb: f64, nu: f64, tol: f64) -> Result<(f64, f64)> {
    let m = p.m(lo);
    let st = GeodesicState::new(lo, 0.0, 0.0, nu / (m * m));
    let path = integrate_h(p, st, 3.0 * (rb - lo) + 10.0, tol)?;
    let s_hit = path
        .samples()
        .iter()
        .find(|x| x.state.r >= rb)
        .map(|x| x.s)
        .ok_or_else(|| Error::VerificationFailed("ODE never reached the outer radius".into()))?;
    let s = quad::bisect(|s| path.state_at(s).r - rb, 0.0, s_hit, 1e-15)?;
    Ok((path.state_at(s).theta, s))
}

fn check_pole() -> Outcome {
    let p = paraboloid(20.0)?;
    let cert = certify_pole(&p, 20.0)?;
    Ok((
        cert.jacobi_max_dev,
        1e-9,
        cert.jacobi_max_dev <= 1e-9 && cert.certified,
        format!(
            "integral {:.6e} >= bound {:.6e}; {}",
            cert.integral, cert.closed_form_bound, cert.message
        ),
    ))
}

fn check_cut_locus() -> Outcome {
    let p = paraboloid(100.0)?;
    let q = SurfacePoint::new(1.0, 0.0);
    let c = first_conjugate(&p, q)?;
    let cs = cut_point(&p, q, c + 1.0, 360)?;
    let inside = verify_cut_point(&p, q, SurfacePoint::new(cs.r, cs.theta), 1e-6)?;
    let l = &inside.minimizers;
    let gap = (l[0].length - l[1].length).abs();
    let control = shoot_minimizers(&p, q, SurfacePoint::new(cs.r, cs.theta_literal), 1e-6)?;
    let one = control.minimizers.len() == 1;
    Ok((
        gap,
        1e-5,
        c > q.r && gap <= 1e-5 && one,
        format!(
            "c = {c:.12}; two segments of length {:.12}; control has {} minimiser(s)",
            l[0].length,
            control.minimizers.len()
        ),
    ))
}

fn check_embedding(cfg: &SuiteConfig) -> Outcome {
    let mut worst: f64 = 0.0;
    for (k, mu) in [0.3, 1.0].into_iter().enumerate() {
        let emb = Embedding::new(&Profile::paraboloid(mu, 20.0)?)?;
        let rep = certify_pullback(&emb, 1000, cfg.seed + k as u64, [0.1, 5.0], cfg.exec)?;
        worst = worst.max(rep.max_residual);
    }
    let emb = Embedding::new(&paraboloid(20.0)?)?;
    let q = SurfacePoint::new(1.0, 0.0);
    let a = (emb.f_tilde(q, Tangent::new(1.0, 0.0))? - 2f64.sqrt()).abs();
    let b = (emb.f_tilde(q, Tangent::new(0.0, 1.0))? - (2f64.sqrt() - 1.0)).abs();
    let spot = a.max(b);
    Ok((
        worst,
        1e-9,
        worst <= 1e-9 && spot <= 1e-12,
        format!("2 x 1000 samples; spot value deviation {spot:.3e}"),
    ))
}

fn check_non_geodesy(cfg: &SuiteConfig) -> Outcome {
    let p = paraboloid(20.0)?;
    let tol = cfg.tol_ode.min(1e-12);
    let meridian = integrate_h(&p, GeodesicState::new(1.0, 0.0, 1.0, 0.0), 1.0, tol)?;
    let generic = integrate_h(&p, GeodesicState::from_heading(&p, 1.0, 0.0, 1.0), 1.0, tol)?;
    let twisted = twist(&meridian, p.mu())?;
    let rm = f_geodesic_residual(&p, &meridian)?;
    let rg = f_geodesic_residual(&p, &generic)?;
    let rt = f_geodesic_residual(&p, &twisted)?;
    let passed = rm >= 1e-3 && rg >= 1e-3 && rt <= 1e-7;
    Ok((
        rt,
        1e-7,
        passed,
        format!("meridian {rm:.3e}, generic {rg:.3e}, twisted meridian {rt:.3e}"),
    ))
}

fn check_loop_constant() -> Outcome {
    let p = paraboloid(20.0)?;
    let rep = loop_constant_report(&p, 1.0 / 3f64.sqrt())?;
    let flagged = !rep.consistent;
    Ok((
        rep.ratio_turn_to_stated,
        1.0,
        flagged,
        format!(
            "closed loop {:.16e}, stated constant {:.16e}, ratio {:.12} (flagged {})",
            rep.full_turn_quadrature, rep.stated_constant, rep.ratio_turn_to_stated, flagged
        ),
    ))
}
