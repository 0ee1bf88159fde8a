//! Serialisation: JSON and CSV with 17 significant digits, OBJ meshes.

use std::fmt::Write as _;
use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::conjugate::CutArc;
use crate::embed::{Embedding, MinkowskiPoint};
use crate::error::Result;
use crate::geodesics::GeodesicPath;
use crate::profile::SurfacePoint;

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Pretty JSON whose floats always carry 17 significant digits.
struct Digits17<'a>(PrettyFormatter<'a>);

impl Formatter for Digits17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty-printed JSON with round-trip float precision. Non-finite floats
/// become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("serialising plain data into memory cannot fail");
    String::from_utf8(buf).expect("serde_json writes utf-8")
}

/// `s,r,theta,dr,dtheta` at every stored sample.
pub fn path_csv(path: &GeodesicPath) -> String {
    let mut out = String::from("s,r,theta,dr,dtheta\n");
    for x in path.samples() {
        let st = x.state;
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(x.s),
            fmt_f64(st.r),
            fmt_f64(st.theta),
            fmt_f64(st.dr),
            fmt_f64(st.dtheta)
        );
    }
    out
}

#[derive(Serialize)]
struct PathSampleRow {
    s: f64,
    r: f64,
    theta: f64,
    dr: f64,
    dtheta: f64,
}

#[derive(Serialize)]
pub struct PathJson {
    pub metric: crate::geodesics::MetricTag,
    pub kind: crate::geodesics::PathKind,
    pub nu: f64,
    pub twist_mu: f64,
    pub termination: crate::geodesics::Termination,
    pub quality: crate::geodesics::PathQuality,
    samples: Vec<PathSampleRow>,
}

pub fn path_json(path: &GeodesicPath) -> PathJson {
    PathJson {
        metric: path.metric_tag(),
        kind: path.kind(),
        nu: path.nu(),
        twist_mu: path.twist_mu(),
        termination: path.termination(),
        quality: path.quality(),
        samples: path
            .samples()
            .iter()
            .map(|x| PathSampleRow {
                s: x.s,
                r: x.state.r,
                theta: x.state.theta,
                dr: x.state.dr,
                dtheta: x.state.dtheta,
            })
            .collect(),
    }
}

/// `s,r,theta,ell` rows of the cut arc.
pub fn cut_arc_csv(arc: &CutArc) -> String {
    let mut out = String::from("s,r,theta,ell\n");
    for c in &arc.samples {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(c.s),
            fmt_f64(c.r),
            fmt_f64(c.theta),
            fmt_f64(c.ell)
        );
    }
    out
}

/// Triangulated surface plus polylines, written as Wavefront OBJ.
#[derive(Debug, Clone, Default)]
pub struct ObjScene {
    pub vertices: Vec<[f64; 3]>,
    /// 0-based vertex indices.
    pub faces: Vec<[usize; 3]>,
    pub lines: Vec<Vec<usize>>,
}

impl ObjScene {
    pub fn add_polyline(&mut self, pts: &[MinkowskiPoint]) {
        let base = self.vertices.len();
        self.vertices.extend(pts.iter().map(|p| p.as_array()));
        self.lines.push((base..base + pts.len()).collect());
    }

    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", fmt_f64(v[0]), fmt_f64(v[1]), fmt_f64(v[2]));
        }
        for f in &self.faces {
            let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        for l in &self.lines {
            if l.len() < 2 {
                continue;
            }
            out.push('l');
            for i in l {
                let _ = write!(out, " {}", i + 1);
            }
            out.push('\n');
        }
        out
    }
}

/// Embedded surface over `0 <= r <= r_hi` on an `nr x ntheta` grid. Triangles
/// are wound so their normals point away from the axis.
pub fn surface_mesh(emb: &Embedding, r_hi: f64, nr: usize, ntheta: usize) -> Result<ObjScene> {
    let nr = nr.max(1);
    let ntheta = ntheta.max(3);
    let mut scene = ObjScene::default();
    scene.vertices.push(emb.embed_point(SurfacePoint::vertex())?.as_array());
    let ring = |i: usize, j: usize| 1 + (i - 1) * ntheta + (j % ntheta);
    for i in 1..=nr {
        let r = r_hi * i as f64 / nr as f64;
        for j in 0..ntheta {
            let th = std::f64::consts::TAU * j as f64 / ntheta as f64;
            scene.vertices.push(emb.embed_point(SurfacePoint::new(r, th))?.as_array());
        }
    }
    // (v0, v0 + dθ, v0 + dr) gives ∂θ × ∂r, which points outward
    for j in 0..ntheta {
        scene.faces.push([0, ring(1, j + 1), ring(1, j)]);
    }
    for i in 1..nr {
        for j in 0..ntheta {
            let (a, b) = (ring(i, j), ring(i, j + 1));
            let (c, d) = (ring(i + 1, j), ring(i + 1, j + 1));
            scene.faces.push([a, b, c]);
            scene.faces.push([b, d, c]);
        }
    }
    Ok(scene)
}
