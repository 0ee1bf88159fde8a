//! Numerical engine for rotational Randers surfaces built by Zermelo
//! navigation on a surface of revolution `dr^2 + m(r)^2 dθ^2` under the
//! rotational wind `W = mu ∂θ`.

pub mod conjugate;
pub mod embed;
pub mod error;
pub mod export;
pub mod expr;
pub mod geodesics;
pub mod measure;
pub mod ode;
pub mod par;
pub mod profile;
pub mod quad;
pub mod shooting;
pub mod suite;
pub mod zermelo;

pub use error::{Error, Result};
pub use geodesics::{GeodesicPath, GeodesicState, MetricTag, PathKind};
pub use par::Exec;
pub use profile::{make_paraboloid, Profile, SurfacePoint, SurfaceSpec};
pub use zermelo::{RandersData, Tangent};

/// Engine version recorded in every exported artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
