//! Conformal metric families and the pointwise calculus the schemes need:
//! `g`, `g^{1/2}`, `grad g^{1/2}`, `(1/2) nu . grad ln g`, the convex-concave
//! splitting gradients, the sectional curvature `S0` and an area potential
//! `phi_g` with `div phi_g = g`.

use crate::vec2::{Vec2, E1, E2};
use crate::{Error, Result};

/// A conformal metric `g(z) * (Euclidean)` on its chart domain `H`.
///
/// * `Euclidean`: `g = 1` on the whole plane.
/// * `Mu(mu)`: `g(z) = (z.e2)^(-2 mu)` on the upper half plane; `mu = 1` is
///   the Poincare half-plane, `mu = 0` the Euclidean metric restricted to it.
/// * `Alpha(alpha)`: `g(z) = 4 / (1 - alpha |z|^2)^2`; `alpha = 1` models the
///   hyperbolic disk, `alpha = -1` the elliptic plane.
/// * `Mercator`, `Catenoid`, `Torus(s)`: charts of embedded surfaces.
/// * `Axisymmetric(d)`: `g(z) = [sigma(d-1)]^2 (z.e2)^(2(d-2))` on the upper
///   half plane, where `sigma(n)` is the surface area of the unit n-sphere;
///   it reuses the `Mu` machinery with `mu = -(d-2)` and a constant factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricSpec {
    Euclidean,
    Mu(f64),
    Alpha(f64),
    Mercator,
    Catenoid,
    Torus(f64),
    Axisymmetric(u32),
}

/// Surface area of the unit n-sphere in R^{n+1}: `2 pi^{n/2} / Gamma(n/2)`
/// for the n-dimensional measure, n >= 1.
fn unit_sphere_area(n: u32) -> f64 {
    use std::f64::consts::PI;
    // Gamma(n/2) for integer n via the recurrence from Gamma(1/2), Gamma(1).
    let mut x = if n % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut arg = if n % 2 == 0 { 1.0 } else { 0.5 };
    while arg + 1e-9 < n as f64 / 2.0 {
        x *= arg;
        arg += 1.0;
    }
    2.0 * PI.powf(n as f64 / 2.0) / x
}

impl MetricSpec {
    /// `(mu_effective, constant factor p)` such that `g = p^2 (z.e2)^(-2 mu)`
    /// for the half-plane families.
    fn mu_form(&self) -> Option<(f64, f64)> {
        match *self {
            MetricSpec::Mu(mu) => Some((mu, 1.0)),
            MetricSpec::Axisymmetric(d) => {
                Some((-(d as f64 - 2.0), unit_sphere_area(d - 1)))
            }
            _ => None,
        }
    }

    /// Validates stored parameters (torus radius positive, dimension >= 3).
    pub fn validate(&self) -> Result<()> {
        match *self {
            MetricSpec::Torus(s) if !(s > 0.0) => {
                Err(Error::Config(format!("torus parameter must be positive, got {s}")))
            }
            MetricSpec::Axisymmetric(d) if d < 3 => {
                Err(Error::Config(format!("axisym dimension must be >= 3, got {d}")))
            }
            _ => Ok(()),
        }
    }

    /// Whether `z` lies in the chart domain `H`.
    pub fn domain_contains(&self, z: Vec2) -> bool {
        match *self {
            MetricSpec::Euclidean
            | MetricSpec::Mercator
            | MetricSpec::Catenoid
            | MetricSpec::Torus(_) => true,
            MetricSpec::Mu(_) | MetricSpec::Axisymmetric(_) => z.y > 0.0,
            MetricSpec::Alpha(alpha) => alpha <= 0.0 || z.norm_sq() < 1.0 / alpha,
        }
    }

    fn check(&self, z: Vec2) -> Result<()> {
        if self.domain_contains(z) {
            Ok(())
        } else {
            Err(Error::Domain(z.x, z.y))
        }
    }

    /// The conformal factor `g(z) > 0`.
    pub fn eval_g(&self, z: Vec2) -> Result<f64> {
        self.check(z)?;
        Ok(match *self {
            MetricSpec::Euclidean => 1.0,
            MetricSpec::Mu(mu) => z.y.powf(-2.0 * mu),
            MetricSpec::Alpha(alpha) => {
                let d = 1.0 - alpha * z.norm_sq();
                4.0 / (d * d)
            }
            MetricSpec::Mercator => z.x.cosh().powi(-2),
            MetricSpec::Catenoid => z.x.cosh().powi(2),
            MetricSpec::Torus(s) => {
                let d = (s * s + 1.0).sqrt() - z.y.cos();
                s * s / (d * d)
            }
            MetricSpec::Axisymmetric(_) => {
                let (mu, p) = self.mu_form().unwrap();
                p * p * z.y.powf(-2.0 * mu)
            }
        })
    }

    pub fn sqrt_g(&self, z: Vec2) -> Result<f64> {
        Ok(self.eval_g(z)?.sqrt())
    }

    /// `grad g^{1/2}(z)`.
    pub fn grad_sqrt_g(&self, z: Vec2) -> Result<Vec2> {
        self.check(z)?;
        Ok(match *self {
            MetricSpec::Euclidean => Vec2::ZERO,
            MetricSpec::Mu(mu) => E2 * (-mu * z.y.powf(-(mu + 1.0))),
            MetricSpec::Alpha(alpha) => {
                let d = 1.0 - alpha * z.norm_sq();
                z * (4.0 * alpha / (d * d))
            }
            MetricSpec::Mercator => E1 * (-z.x.tanh() / z.x.cosh()),
            MetricSpec::Catenoid => E1 * z.x.sinh(),
            MetricSpec::Torus(s) => {
                let d = (s * s + 1.0).sqrt() - z.y.cos();
                E2 * (-s * z.y.sin() / (d * d))
            }
            MetricSpec::Axisymmetric(_) => {
                let (mu, p) = self.mu_form().unwrap();
                E2 * (-p * mu * z.y.powf(-(mu + 1.0)))
            }
        })
    }

    /// `(1/2) nu . grad ln g(z)` for a unit vector `nu`.
    pub fn half_nu_grad_ln_g(&self, z: Vec2, nu: Vec2) -> Result<f64> {
        debug_assert!((nu.norm() - 1.0).abs() < 1e-12);
        self.check(z)?;
        Ok(match *self {
            MetricSpec::Euclidean => 0.0,
            MetricSpec::Mu(mu) => -mu * nu.y / z.y,
            MetricSpec::Alpha(alpha) => 2.0 * alpha * z.dot(nu) / (1.0 - alpha * z.norm_sq()),
            MetricSpec::Mercator => -z.x.tanh() * nu.x,
            MetricSpec::Catenoid => z.x.tanh() * nu.x,
            MetricSpec::Torus(s) => {
                -z.y.sin() * nu.y / ((s * s + 1.0).sqrt() - z.y.cos())
            }
            MetricSpec::Axisymmetric(_) => {
                let (mu, _) = self.mu_form().unwrap();
                -mu * nu.y / z.y
            }
        })
    }

    /// `grad ln g = 2 grad g^{1/2} / g^{1/2}`.
    pub fn grad_ln_g(&self, z: Vec2) -> Result<Vec2> {
        Ok(self.grad_sqrt_g(z)? * (2.0 / self.sqrt_g(z)?))
    }

    /// The convex-concave splitting `g^{1/2} = g^{1/2}_+ + g^{1/2}_-`.
    ///
    /// Fails for `Mu(mu)` with `mu` strictly inside `(-1, 0)`, where
    /// `g^{1/2}` is neither convex nor semi-convex on the half plane.
    pub fn split_gradients(&self) -> Result<SplitGradients> {
        if let MetricSpec::Mu(mu) = *self {
            if mu > -1.0 && mu < 0.0 {
                return Err(Error::UnsupportedSplit(mu));
            }
        }
        Ok(SplitGradients { spec: *self })
    }

    /// Sectional (Gaussian) curvature `S0(z) = -lap ln g / (2 g)`.
    pub fn sectional_curvature(&self, z: Vec2) -> Result<f64> {
        self.check(z)?;
        Ok(match *self {
            MetricSpec::Euclidean => 0.0,
            MetricSpec::Mu(mu) => -mu * z.y.powf(2.0 * (mu - 1.0)),
            MetricSpec::Alpha(alpha) => -alpha,
            MetricSpec::Mercator => 1.0,
            MetricSpec::Catenoid => -z.x.cosh().powi(-4),
            MetricSpec::Torus(s) => {
                ((s * s + 1.0).sqrt() * z.y.cos() - 1.0) / (s * s)
            }
            MetricSpec::Axisymmetric(_) => {
                let (mu, p) = self.mu_form().unwrap();
                -mu * z.y.powf(2.0 * (mu - 1.0)) / (p * p)
            }
        })
    }

    /// A vector potential with `div phi_g = g`, used for the discrete area.
    ///
    /// For `Alpha(alpha)` with `alpha != 0` the potential is singular at the
    /// origin; enclosed areas of curves winding around the origin then carry
    /// a constant offset, which cancels in area-drift monitoring.
    pub fn area_potential(&self, z: Vec2) -> Result<Vec2> {
        self.check(z)?;
        Ok(match *self {
            MetricSpec::Euclidean => E2 * z.y,
            MetricSpec::Mu(mu) => E2 * mu_area_potential(mu, z.y),
            MetricSpec::Alpha(alpha) => {
                if alpha == 0.0 {
                    z * 2.0
                } else {
                    let r2 = z.norm_sq();
                    z * (2.0 / (alpha * r2 * (1.0 - alpha * r2)))
                }
            }
            MetricSpec::Mercator => E1 * z.x.tanh(),
            MetricSpec::Catenoid => E1 * (0.5 * (z.x + z.x.sinh() * z.x.cosh())),
            MetricSpec::Torus(s) => E2 * torus_area_potential(s, z.y),
            MetricSpec::Axisymmetric(_) => {
                let (mu, p) = self.mu_form().unwrap();
                E2 * (p * p * mu_area_potential(mu, z.y))
            }
        })
    }

    /// String tag used in config files.
    pub fn tag(&self) -> String {
        match *self {
            MetricSpec::Euclidean => "euclidean".into(),
            MetricSpec::Mu(mu) => format!("mu:{mu}"),
            MetricSpec::Alpha(a) => format!("alpha:{a}"),
            MetricSpec::Mercator => "mercator".into(),
            MetricSpec::Catenoid => "catenoid".into(),
            MetricSpec::Torus(s) => format!("torus:{s}"),
            MetricSpec::Axisymmetric(d) => format!("axisym:{d}"),
        }
    }

    /// Parses a metric tag: `euclidean`, `mu:<f>`, `alpha:<f>`, `mercator`,
    /// `catenoid`, `torus:<f>`, `axisym:<int>`.
    pub fn parse(tag: &str) -> Result<MetricSpec> {
        let t = tag.trim();
        let bad = || Error::Config(format!("unknown metric tag '{t}'"));
        let spec = match t {
            "euclidean" => MetricSpec::Euclidean,
            "mercator" => MetricSpec::Mercator,
            "catenoid" => MetricSpec::Catenoid,
            _ => {
                let (name, arg) = t.split_once(':').ok_or_else(bad)?;
                match name {
                    "mu" => MetricSpec::Mu(arg.parse().map_err(|_| bad())?),
                    "alpha" => MetricSpec::Alpha(arg.parse().map_err(|_| bad())?),
                    "torus" => MetricSpec::Torus(arg.parse().map_err(|_| bad())?),
                    "axisym" => MetricSpec::Axisymmetric(arg.parse().map_err(|_| bad())?),
                    _ => return Err(bad()),
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn mu_area_potential(mu: f64, y: f64) -> f64 {
    if mu == 0.5 {
        y.ln()
    } else {
        y.powf(1.0 - 2.0 * mu) / (1.0 - 2.0 * mu)
    }
}

/// e2-component of the torus area potential, with the arctan branch
/// unwrapped so the potential is continuous in y.
fn torus_area_potential(s: f64, y: f64) -> f64 {
    use std::f64::consts::PI;
    let c = (s * s + 1.0).sqrt();
    let k = (c + 1.0) / s;
    let m = (y / (2.0 * PI)).round();
    let yr = y - 2.0 * PI * m;
    let atan = (k * (0.5 * yr).sin()).atan2((0.5 * yr).cos());
    2.0 * c / s * (atan + PI * m) + y.sin() / (c - y.cos())
}

/// Gradients of the convex and concave parts of `g^{1/2}`.
///
/// The minus parts follow the per-family choices: zero for the half-plane
/// powers and the catenoid, `4 min(alpha, 0) z` for the disk family,
/// `-(z.e1) e1` for the Mercator chart and a quadratic-in-`z.e2` part for
/// the torus chart.
#[derive(Debug, Clone, Copy)]
pub struct SplitGradients {
    spec: MetricSpec,
}

impl SplitGradients {
    pub fn grad_minus(&self, z: Vec2) -> Result<Vec2> {
        self.spec.check(z)?;
        Ok(match self.spec {
            MetricSpec::Euclidean
            | MetricSpec::Mu(_)
            | MetricSpec::Catenoid
            | MetricSpec::Axisymmetric(_) => Vec2::ZERO,
            MetricSpec::Alpha(alpha) => z * (4.0 * alpha.min(0.0)),
            MetricSpec::Mercator => E1 * (-z.x),
            MetricSpec::Torus(s) => {
                let c = (s * s + 1.0).sqrt();
                E2 * (-s * z.y / ((c - 1.0) * (c - 1.0)))
            }
        })
    }

    pub fn grad_plus(&self, z: Vec2) -> Result<Vec2> {
        Ok(self.spec.grad_sqrt_g(z)? - self.grad_minus(z)?)
    }
}
