use std::f64::consts::PI;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use randers::conjugate::{cut_locus, shoot_minimizers, verify_cut_point};
use randers::embed::{Embedding, MinkowskiPoint};
use randers::export;
use randers::geodesics::{
    f_geodesic_residual, integrate_f, integrate_h, polar_polyline, self_intersections, two_sided_polyline,
    GeodesicPath,
};
use randers::measure::{distance_f_with, default_horizon, f_length};
use randers::profile::SurfaceSpec;
use randers::suite::{run_check, run_suite, SuiteConfig, SuiteReport};
use randers::zermelo::f_norm;
use randers::{Error, GeodesicState, Profile, SurfacePoint, Tangent, VERSION};

const EXIT_USAGE: u8 = 1;
const EXIT_DOMAIN: u8 = 2;
const EXIT_VERIFY: u8 = 3;

/// Geodesics, distances and cut loci on rotational Randers surfaces.
#[derive(Debug, Parser, Serialize)]
#[command(name = "randers", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Serialize)]
struct Global {
    /// Surface definition (JSON). Defaults to the paraboloid with mu = 1.
    #[arg(long, global = true, value_name = "FILE")]
    surface: Option<PathBuf>,
    /// Override the wind strength.
    #[arg(long, global = true)]
    mu: Option<f64>,
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol_ode: f64,
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol_quad: f64,
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol_root: f64,
    #[arg(long, global = true, default_value_t = 20240611)]
    seed: u64,
    /// Output directory; without it results go to stdout.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
    Obj,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase", tag = "command")]
enum Command {
    /// Profile, curvature, von Mangoldt verdict and boundedness margin.
    Info,
    /// Integrate an F-geodesic and its h pre-image.
    Geodesic(GeodesicArgs),
    /// Forward and backward F-distance between two points.
    Distance(DistanceArgs),
    /// Cut locus of a point plus verification of one interior point.
    Cutlocus(CutArgs),
    /// Run the verification suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Serialize)]
struct GeodesicArgs {
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    /// Angle of the initial direction from ∂r, in an h-orthonormal frame.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    heading: f64,
    #[arg(long, default_value_t = 5.0)]
    length: f64,
    /// Instead of one geodesic: the meridian θ = 0 plus N twisted meridians
    /// leaving the vertex.
    #[arg(long, value_name = "N")]
    fan: Option<usize>,
    #[arg(long, default_value_t = PI / 4.0)]
    spacing: f64,
    /// Also trace the geodesic backwards for this long and count
    /// self-intersections of the two-sided curve.
    #[arg(long, value_name = "LEN")]
    two_sided: Option<f64>,
    /// Polyline spacing in the curve parameter.
    #[arg(long, default_value_t = 0.02)]
    ds: f64,
    /// Also export 3D polylines in the Minkowski cylinder.
    #[arg(long)]
    embed: bool,
}

#[derive(Debug, Args, Serialize)]
struct DistanceArgs {
    /// Start point `r,theta`.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    from: SurfacePoint,
    /// End point `r,theta`.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    to: SurfacePoint,
    #[arg(long, default_value_t = 360)]
    headings: usize,
}

#[derive(Debug, Args, Serialize)]
struct CutArgs {
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long, default_value_t = 41)]
    samples: usize,
    /// Last meridian parameter exported.
    #[arg(long)]
    s_max: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct VerifyArgs {
    /// Run only these checks (1-13); repeatable.
    #[arg(long = "check", value_parser = clap::value_parser!(u8).range(1..=13))]
    checks: Vec<u8>,
    /// Run checks one after another.
    #[arg(long)]
    sequential: bool,
}

fn parse_point(s: &str) -> std::result::Result<SurfacePoint, String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `r,theta`, got `{s}`"))?;
    let r: f64 = a.trim().parse().map_err(|e| format!("radius: {e}"))?;
    let t: f64 = b.trim().parse().map_err(|e| format!("angle: {e}"))?;
    if !(r >= 0.0) {
        return Err(format!("radius must be non-negative, got {r}"));
    }
    Ok(SurfacePoint::new(r, t))
}

/// Raised when a computed certificate does not hold.
#[derive(Debug)]
struct VerificationFailure(String);

impl std::fmt::Display for VerificationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for VerificationFailure {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let verification = e.chain().any(|c| {
                c.is::<VerificationFailure>() || matches!(c.downcast_ref::<Error>(), Some(Error::VerificationFailed(_)))
            });
            ExitCode::from(if verification { EXIT_VERIFY } else { EXIT_DOMAIN })
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    for (name, t) in [("tol-ode", g.tol_ode), ("tol-quad", g.tol_quad), ("tol-root", g.tol_root)] {
        if !(t > 0.0) {
            bail!("--{name} must be positive, got {t}");
        }
    }
    let spec = load_surface(g)?;
    let profile = spec.build().context("building the surface")?;
    let out = Output::new(g, cli, &spec)?;
    match &cli.command {
        Command::Info => cmd_info(&profile, &out),
        Command::Geodesic(a) => cmd_geodesic(&profile, a, g, &out),
        Command::Distance(a) => cmd_distance(&profile, a, g, &out),
        Command::Cutlocus(a) => cmd_cutlocus(&profile, a, &out),
        Command::Verify(a) => cmd_verify(a, g, &out),
    }
}

fn load_surface(g: &Global) -> Result<SurfaceSpec> {
    let spec = match &g.surface {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            SurfaceSpec::from_json(&text)?
        }
        None => SurfaceSpec::Paraboloid { mu: 1.0, r_max: 20.0 },
    };
    Ok(match g.mu {
        Some(mu) => spec.with_mu(mu),
        None => spec,
    })
}

/// Destination of results plus the config echo attached to every artifact.
struct Output {
    dir: Option<PathBuf>,
    format: Format,
    echo: serde_json::Value,
}

impl Output {
    fn new(g: &Global, cli: &Cli, surface: &SurfaceSpec) -> Result<Self> {
        if let Some(d) = &g.out {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Self {
            dir: g.out.clone(),
            format: g.format,
            echo: json!({
                "version": VERSION,
                "seed": g.seed,
                "surface": surface,
                "config": cli,
            }),
        })
    }

    fn envelope(&self, result: impl Serialize) -> Result<serde_json::Value> {
        let mut doc = self.echo.clone();
        doc["result"] = serde_json::to_value(result)?;
        Ok(doc)
    }

    /// Writes `content` to `name` under the output directory, or to stdout.
    fn emit(&self, name: &str, content: &str) -> Result<()> {
        match &self.dir {
            Some(d) => write_file(&d.join(name), content),
            None => {
                let mut stdout = io::stdout().lock();
                let res = stdout.write_all(content.as_bytes()).and_then(|_| {
                    if content.ends_with('\n') {
                        Ok(())
                    } else {
                        stdout.write_all(b"\n")
                    }
                });
                match res {
                    Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
                    _ => Ok(()),
                }
            }
        }
    }

    fn emit_json(&self, name: &str, result: impl Serialize) -> Result<()> {
        let doc = self.envelope(result)?;
        self.emit(name, &export::to_json(&doc))
    }

    /// Non-JSON artifacts get a `run.json` sidecar carrying the echo.
    fn emit_sidecar(&self) -> Result<()> {
        if let Some(d) = &self.dir {
            write_file(&d.join("run.json"), &export::to_json(&self.echo))?;
        }
        Ok(())
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct InfoRow {
    r: f64,
    m: f64,
    m1: f64,
    m2: f64,
    curvature: f64,
    margin: f64,
}

fn cmd_info(p: &Profile, out: &Output) -> Result<()> {
    let grid = p.uniform_grid(4000);
    let verdict = p.is_von_mangoldt(&grid)?;
    let parallels = p.geodesic_parallels(&grid);
    let rows: Vec<InfoRow> = (0..=20)
        .map(|k| {
            let r = p.r_max() * k as f64 / 20.0;
            InfoRow {
                r,
                m: p.m(r),
                m1: p.m1(r),
                m2: p.m2(r),
                curvature: p.gauss_curvature(r),
                margin: 1.0 - p.mu() * p.m(r),
            }
        })
        .collect();
    match out.format {
        Format::Json => out.emit_json(
            "info.json",
            json!({
                "kind": p.kind(),
                "mu": p.mu(),
                "r_max": p.r_max(),
                "von_mangoldt": verdict,
                "geodesic_parallels": parallels,
                "boundedness_margin": p.boundedness_margin(),
                "profile": rows,
            }),
        ),
        Format::Csv => {
            let mut s = String::from("r,m,m1,m2,curvature,margin\n");
            for r in &rows {
                s += &[r.r, r.m, r.m1, r.m2, r.curvature, r.margin]
                    .map(export::fmt_f64)
                    .join(",");
                s.push('\n');
            }
            out.emit_sidecar()?;
            out.emit("info.csv", &s)
        }
        Format::Obj => {
            let emb = Embedding::new(p)?;
            let scene = export::surface_mesh(&emb, emb.limit().min(p.r_max()), 60, 72)?;
            out.emit_sidecar()?;
            out.emit("surface.obj", &scene.to_obj())
        }
    }
}

/// One exported curve: an F-geodesic, its h pre-image and diagnostics.
#[derive(Serialize)]
struct CurveReport {
    label: String,
    start: SurfacePoint,
    f_length: f64,
    f_geodesic_residual: Option<f64>,
    self_intersections: usize,
    two_sided_self_intersections: Option<usize>,
    h: export::PathJson,
    f: export::PathJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    embedded_f: Option<Vec<MinkowskiPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    embedded_h: Option<Vec<MinkowskiPoint>>,
}

struct Curve {
    label: String,
    start: SurfacePoint,
    h: GeodesicPath,
    f: GeodesicPath,
    two_sided: Option<usize>,
}

fn f_unit_heading(p: &Profile, r: f64, heading: f64) -> Tangent {
    if r == 0.0 {
        return Tangent::new(1.0, 0.0);
    }
    let u = Tangent::new(heading.cos(), heading.sin() / p.m(r));
    u.scale(1.0 / f_norm(p, r, u.y1, u.y2))
}

fn cmd_geodesic(p: &Profile, a: &GeodesicArgs, g: &Global, out: &Output) -> Result<()> {
    let tol = g.tol_ode;
    if !(a.length > 0.0) || !(a.ds > 0.0) {
        bail!(Error::InvalidParameter("length and ds must be positive".into()));
    }
    let mut curves = Vec::new();
    match a.fan {
        Some(n) => {
            let h = integrate_h(p, GeodesicState::new(0.0, 0.0, 1.0, 0.0), a.length, tol)?;
            curves.push(Curve {
                label: "meridian".into(),
                start: SurfacePoint::vertex(),
                f: h.clone(),
                h,
                two_sided: None,
            });
            for k in 0..n {
                let q = SurfacePoint::new(0.0, k as f64 * a.spacing);
                let f = integrate_f(p, q, Tangent::new(1.0, 0.0), a.length, tol)?;
                curves.push(Curve {
                    label: format!("twisted_{k}"),
                    start: q,
                    h: f.preimage(),
                    f,
                    two_sided: None,
                });
            }
        }
        None => {
            let q = SurfacePoint::new(a.r, a.theta);
            let y = f_unit_heading(p, a.r, a.heading);
            let f = integrate_f(p, q, y, a.length, tol)?;
            let two_sided = match a.two_sided {
                Some(back) => Some(self_intersections(&two_sided_polyline(
                    p, q, y, back, a.length, tol, a.ds,
                )?)),
                None => None,
            };
            curves.push(Curve {
                label: "geodesic".into(),
                start: q,
                h: f.preimage(),
                f,
                two_sided,
            });
        }
    }
    let emb = if a.embed || out.format == Format::Obj {
        Some(Embedding::new(p)?)
    } else {
        None
    };
    match out.format {
        Format::Json => {
            let mut reports = Vec::new();
            for c in &curves {
                let embedded = |path: &GeodesicPath| -> Result<Option<Vec<MinkowskiPoint>>> {
                    Ok(match (&emb, a.embed) {
                        (Some(e), true) => Some(e.polyline(path, a.ds)?),
                        _ => None,
                    })
                };
                reports.push(CurveReport {
                    label: c.label.clone(),
                    start: c.start,
                    f_length: f_length(p, &c.f)?,
                    f_geodesic_residual: f_geodesic_residual(p, &c.f).ok(),
                    self_intersections: self_intersections(&polar_polyline(&c.f, a.ds)),
                    two_sided_self_intersections: c.two_sided,
                    h: export::path_json(&c.h),
                    f: export::path_json(&c.f),
                    embedded_f: embedded(&c.f)?,
                    embedded_h: embedded(&c.h)?,
                });
            }
            out.emit_json("geodesic.json", reports)
        }
        Format::Csv => {
            out.emit_sidecar()?;
            if out.dir.is_none() {
                return out.emit("geodesic.csv", &export::path_csv(&curves[0].f));
            }
            for c in &curves {
                out.emit(&format!("{}_h.csv", c.label), &export::path_csv(&c.h))?;
                out.emit(&format!("{}_f.csv", c.label), &export::path_csv(&c.f))?;
                if let Some(e) = emb.as_ref().filter(|_| a.embed) {
                    let mut s = String::from("x,y,z\n");
                    for pt in e.polyline(&c.f, a.ds)? {
                        s += &pt.as_array().map(export::fmt_f64).join(",");
                        s.push('\n');
                    }
                    out.emit(&format!("{}_f_embedded.csv", c.label), &s)?;
                }
            }
            Ok(())
        }
        Format::Obj => {
            let e = emb.expect("embedding built for obj output");
            let r_hi = curves
                .iter()
                .flat_map(|c| c.f.samples().iter().map(|x| x.state.r))
                .fold(1.0_f64, f64::max)
                .min(e.limit());
            let mut scene = export::surface_mesh(&e, r_hi, 48, 96)?;
            for c in &curves {
                scene.add_polyline(&e.polyline(&c.f, a.ds)?);
            }
            out.emit_sidecar()?;
            out.emit("geodesic.obj", &scene.to_obj())
        }
    }
}

fn cmd_distance(p: &Profile, a: &DistanceArgs, g: &Global, out: &Output) -> Result<()> {
    let tol = g.tol_root;
    let there = distance_f_with(p, a.from, a.to, tol, default_horizon(p, a.from, a.to), a.headings)?;
    let back = distance_f_with(p, a.to, a.from, tol, default_horizon(p, a.to, a.from), a.headings)?;
    match out.format {
        Format::Json => out.emit_json(
            "distance.json",
            json!({
                "forward": there,
                "backward": back,
                "asymmetry": there.distance - back.distance,
            }),
        ),
        Format::Csv => {
            out.emit_sidecar()?;
            let row = [
                a.from.r,
                a.from.theta,
                a.to.r,
                a.to.theta,
                there.distance,
                back.distance,
                there.h_distance,
            ]
            .map(export::fmt_f64)
            .join(",");
            out.emit("distance.csv", &format!("r1,theta1,r2,theta2,forward,backward,h\n{row}\n"))
        }
        Format::Obj => bail!(Error::InvalidParameter("distance has no OBJ output".into())),
    }
}

fn cmd_cutlocus(p: &Profile, a: &CutArgs, out: &Output) -> Result<()> {
    let q = SurfacePoint::new(a.r, a.theta);
    let arc = cut_locus(p, q, a.s_max, a.samples.max(3))?;
    let mid = arc.samples[arc.samples.len() / 2];
    let target = SurfacePoint::new(mid.r, mid.theta);
    let control = shoot_minimizers(p, q, SurfacePoint::new(mid.r, mid.theta_literal), 1e-6)?;
    let check = verify_cut_point(p, q, target, 1e-6);
    match out.format {
        Format::Json => {
            let verification = match &check {
                Ok(c) => json!({
                    "passed": true,
                    "point": target,
                    "minimizers": c.minimizers,
                    "gap": c.gap,
                    "landing_error": c.landing_error,
                }),
                Err(e) => json!({"passed": false, "point": target, "error": e.to_string()}),
            };
            out.emit_json(
                "cutlocus.json",
                json!({
                    "arc": arc,
                    "verification": verification,
                    "control": {
                        "point": control.target,
                        "minimizers": control.minimizers.len(),
                        "gap": control.gap,
                    },
                }),
            )?;
        }
        Format::Csv => {
            out.emit_sidecar()?;
            out.emit("cutlocus.csv", &export::cut_arc_csv(&arc))?;
        }
        Format::Obj => {
            let e = Embedding::new(p)?;
            let r_hi = arc.samples.last().map_or(1.0, |c| c.r).min(e.limit());
            let mut scene = export::surface_mesh(&e, r_hi, 48, 96)?;
            let pts = arc
                .samples
                .iter()
                .map(|c| e.embed_point(SurfacePoint::new(c.r, c.theta)))
                .collect::<randers::Result<Vec<_>>>()?;
            scene.add_polyline(&pts);
            out.emit_sidecar()?;
            out.emit("cutlocus.obj", &scene.to_obj())?;
        }
    }
    check.context("interior cut point")?;
    if control.minimizers.len() != 1 {
        bail!(VerificationFailure(format!(
            "control point has {} minimisers, expected 1",
            control.minimizers.len()
        )));
    }
    Ok(())
}

fn cmd_verify(a: &VerifyArgs, g: &Global, out: &Output) -> Result<()> {
    let cfg = SuiteConfig {
        seed: g.seed,
        tol_ode: g.tol_ode,
        tol_quad: g.tol_quad,
        exec: if a.sequential {
            randers::Exec::Sequential
        } else {
            randers::Exec::Parallel
        },
    };
    let report = if a.checks.is_empty() {
        run_suite(&cfg)
    } else {
        let checks: Vec<_> = a.checks.iter().map(|&i| run_check(i as usize, &cfg)).collect();
        SuiteReport {
            config: cfg,
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    };
    for c in &report.checks {
        eprintln!(
            "{} {:>2} {:<26} {:>10.3e} (tol {:.0e})  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            c.value,
            c.tolerance,
            c.detail
        );
    }
    match out.format {
        Format::Json => out.emit_json("verify.json", &report)?,
        Format::Csv => {
            out.emit_sidecar()?;
            let mut s = String::from("id,name,passed,value,tolerance\n");
            for c in &report.checks {
                s += &format!(
                    "{},{},{},{},{}\n",
                    c.id,
                    c.name,
                    c.passed,
                    export::fmt_f64(c.value),
                    export::fmt_f64(c.tolerance)
                );
            }
            out.emit("verify.csv", &s)?;
        }
        Format::Obj => bail!(Error::InvalidParameter("verify has no OBJ output".into())),
    }
    if !report.passed {
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| c.id).collect();
        bail!(VerificationFailure(format!("checks {failed:?} failed")));
    }
    Ok(())
}
