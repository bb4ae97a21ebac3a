//! Finite element schemes for the evolution of closed and open polygonal
//! curves under curvature flow, curve diffusion and elastic flow in
//! two-dimensional conformally flat Riemannian metrics.
//!
//! The chart domain is an open set `H` in the plane carrying a metric
//! `g(z) * (Euclidean inner product)`. Supported metric families include the
//! Poincare half-plane and its power-law generalisations, the hyperbolic
//! disk / elliptic plane family, and conformal charts of the sphere,
//! catenoid and torus. Curves are piecewise linear, curvature unknowns are
//! nodal, inner products are mass lumped, and each time step solves one
//! sparse linear system (plus a fixed-point loop for the energy-stable
//! split variants).

pub mod assembly;
pub mod curve;
pub mod flows;
pub mod harness;
pub mod metric;
pub mod oracle;
pub mod surface;
pub mod vec2;
pub mod weakforms;

pub use curve::{Curve, Topology};
pub use flows::{CurvatureField, SchemeKind, StepParams, StepReport};
pub use metric::MetricSpec;
pub use vec2::Vec2;

/// Errors shared across the crate.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("point ({0}, {1}) lies outside the metric domain")]
    Domain(f64, f64),
    #[error("no convex-concave splitting available for mu = {0} in (-1, 0)")]
    UnsupportedSplit(f64),
    #[error("operation requires a closed curve")]
    Topology,
    #[error("degenerate edge {index} (length {length:.3e})")]
    DegenerateEdge { index: usize, length: f64 },
    #[error("vertex normal vanishes at node {0}")]
    VanishingVertexNormal(usize),
    #[error("singular linear system at step {step}")]
    SingularSystem { step: usize },
    #[error("fixed-point iteration did not converge within {0} iterations")]
    PicardDivergence(usize),
    #[error("node {node} left the metric domain during a step")]
    DomainExit { node: usize },
    #[error("time {t} is at or past the extinction time {t0}")]
    PastExtinction { t: f64, t0: f64 },
    #[error("initial state lies outside the solvable branch")]
    Branch,
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
