//! Conformal parameterizations of embedded surfaces, used to lift chart
//! curves onto the surfaces they evolve on and to cross-check the metric
//! calculus against surface geometry.

use crate::curve::Curve;
use crate::metric::MetricSpec;
use crate::vec2::Vec2;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChartMap {
    /// stereographic projection of the unit sphere (north pole removed)
    SphereStereographic,
    /// Mercator chart of the unit sphere (both poles removed)
    SphereMercator,
    Catenoid,
    /// torus with small radius 1 and large radius `sqrt(s^2 + 1)`
    Torus(f64),
}

impl ChartMap {
    /// The conformal factor of this chart as a metric family.
    pub fn paired_metric(&self) -> MetricSpec {
        match *self {
            ChartMap::SphereStereographic => MetricSpec::Alpha(-1.0),
            ChartMap::SphereMercator => MetricSpec::Mercator,
            ChartMap::Catenoid => MetricSpec::Catenoid,
            ChartMap::Torus(s) => MetricSpec::Torus(s),
        }
    }

    /// Evaluates the parameterization at a chart point.
    pub fn phi(&self, z: Vec2) -> [f64; 3] {
        match *self {
            ChartMap::SphereStereographic => {
                let d = 1.0 + z.norm_sq();
                [2.0 * z.x / d, 2.0 * z.y / d, (z.norm_sq() - 1.0) / d]
            }
            ChartMap::SphereMercator => {
                let c = z.x.cosh();
                [z.y.cos() / c, z.y.sin() / c, z.x.sinh() / c]
            }
            ChartMap::Catenoid => [z.x.cosh() * z.y.cos(), z.x.cosh() * z.y.sin(), z.x],
            ChartMap::Torus(s) => {
                let big_r = (s * s + 1.0).sqrt();
                let d = s / (big_r - z.y.cos());
                [d * s * (z.x / s).cos(), d * s * (z.x / s).sin(), d * z.y.sin()]
            }
        }
    }

    /// Distance of a lifted point from the surface (zero on the surface).
    pub fn surface_residual(&self, p: [f64; 3]) -> f64 {
        match *self {
            ChartMap::SphereStereographic | ChartMap::SphereMercator => {
                ((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - 1.0).abs()
            }
            ChartMap::Catenoid => {
                // x^2 + y^2 = cosh^2(z)
                let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
                (rho - p[2].cosh()).abs()
            }
            ChartMap::Torus(s) => {
                let big_r = (s * s + 1.0).sqrt();
                let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
                ((rho - big_r) * (rho - big_r) + p[2] * p[2] - 1.0).abs()
            }
        }
    }

    pub fn tag(&self) -> String {
        match *self {
            ChartMap::SphereStereographic => "stereo".into(),
            ChartMap::SphereMercator => "mercator".into(),
            ChartMap::Catenoid => "catenoid".into(),
            ChartMap::Torus(s) => format!("torus:{s}"),
        }
    }

    pub fn parse(tag: &str) -> Result<ChartMap> {
        let t = tag.trim();
        Ok(match t {
            "stereo" => ChartMap::SphereStereographic,
            "mercator" => ChartMap::SphereMercator,
            "catenoid" => ChartMap::Catenoid,
            _ => {
                if let Some(arg) = t.strip_prefix("torus:") {
                    let s: f64 = arg
                        .parse()
                        .map_err(|_| Error::Config(format!("bad torus parameter in '{tag}'")))?;
                    if !(s > 0.0) {
                        return Err(Error::Config("torus parameter must be positive".into()));
                    }
                    ChartMap::Torus(s)
                } else {
                    return Err(Error::Config(format!("unknown chart tag '{tag}'")));
                }
            }
        })
    }
}

/// Lifts the curve's nodes onto the surface.
pub fn lift_curve(chart: &ChartMap, c: &Curve) -> Vec<[f64; 3]> {
    c.nodes().iter().map(|&z| chart.phi(z)).collect()
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Compares the chart metric's sectional curvature against the surface
/// Gaussian curvature computed from the embedding by finite differences.
/// Returns the largest absolute discrepancy over the samples.
pub fn gauss_curvature_check(chart: &ChartMap, samples: &[Vec2]) -> Result<f64> {
    let m = chart.paired_metric();
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for &z in samples {
        let f = |dz: Vec2| chart.phi(z + dz);
        let p0 = f(Vec2::ZERO);
        let xu = sub3(f(Vec2::new(h, 0.0)), f(Vec2::new(-h, 0.0))).map(|v| v / (2.0 * h));
        let xv = sub3(f(Vec2::new(0.0, h)), f(Vec2::new(0.0, -h))).map(|v| v / (2.0 * h));
        let xuu = {
            let a = f(Vec2::new(h, 0.0));
            let b = f(Vec2::new(-h, 0.0));
            [0, 1, 2].map(|i| (a[i] - 2.0 * p0[i] + b[i]) / (h * h))
        };
        let xvv = {
            let a = f(Vec2::new(0.0, h));
            let b = f(Vec2::new(0.0, -h));
            [0, 1, 2].map(|i| (a[i] - 2.0 * p0[i] + b[i]) / (h * h))
        };
        let xuv = {
            let pp = f(Vec2::new(h, h));
            let pm = f(Vec2::new(h, -h));
            let mp = f(Vec2::new(-h, h));
            let mm = f(Vec2::new(-h, -h));
            [0, 1, 2].map(|i| (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * h * h))
        };
        let e = dot3(xu, xu);
        let ff = dot3(xu, xv);
        let g2 = dot3(xv, xv);
        let nraw = cross3(xu, xv);
        let nn = dot3(nraw, nraw).sqrt();
        let n = nraw.map(|v| v / nn);
        let l = dot3(xuu, n);
        let mm = dot3(xuv, n);
        let nn2 = dot3(xvv, n);
        let k = (l * nn2 - mm * mm) / (e * g2 - ff * ff);
        let s0 = m.sectional_curvature(z)?;
        worst = worst.max((k - s0).abs());
    }
    Ok(worst)
}

/// Writes lifted nodes as `x y z` lines.
pub fn lifted_polyline_string(points: &[[f64; 3]], closed: bool) -> String {
    let mut s = String::new();
    for p in points {
        s.push_str(&format!("{:.16e} {:.16e} {:.16e}\n", p[0], p[1], p[2]));
    }
    if closed {
        if let Some(p) = points.first() {
            s.push_str(&format!("{:.16e} {:.16e} {:.16e}\n", p[0], p[1], p[2]));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve;

    const CHARTS: &[ChartMap] = &[
        ChartMap::SphereStereographic,
        ChartMap::SphereMercator,
        ChartMap::Catenoid,
        ChartMap::Torus(1.0),
        ChartMap::Torus(2.0),
    ];

    fn samples() -> Vec<Vec2> {
        let mut pts = Vec::new();
        for i in -3..=3 {
            for j in -3..=3 {
                pts.push(Vec2::new(i as f64 * 0.37, j as f64 * 0.41));
            }
        }
        pts
    }

    #[test]
    fn stereographic_examples() {
        let c = ChartMap::SphereStereographic;
        let p = c.phi(Vec2::ZERO);
        assert_eq!(p, [0.0, 0.0, -1.0]);
        for z in samples() {
            assert!(c.surface_residual(c.phi(z)) < 1e-12);
        }
    }

    #[test]
    fn all_lifts_stay_on_surface() {
        for chart in CHARTS {
            let c = curve::initial_circle(2.0, 1.0, 32).unwrap();
            for p in lift_curve(chart, &c) {
                assert!(chart.surface_residual(p) < 1e-12, "{chart:?}");
            }
        }
    }

    #[test]
    fn torus_node_matches_formula() {
        let s = 1.0f64;
        let chart = ChartMap::Torus(s);
        let p = chart.phi(Vec2::ZERO);
        let expect = s * s / ((s * s + 1.0).sqrt() - 1.0);
        assert!((p[0] - expect).abs() < 1e-14);
        assert!(p[1].abs() < 1e-14 && p[2].abs() < 1e-14);
    }

    /// conformality: the differential's columns are orthogonal with common
    /// squared norm equal to the paired conformal factor
    #[test]
    fn charts_are_conformal() {
        let h = 1e-5;
        for chart in CHARTS {
            let m = chart.paired_metric();
            for z in samples() {
                let xu = sub3(chart.phi(z + Vec2::new(h, 0.0)), chart.phi(z - Vec2::new(h, 0.0)))
                    .map(|v| v / (2.0 * h));
                let xv = sub3(chart.phi(z + Vec2::new(0.0, h)), chart.phi(z - Vec2::new(0.0, h)))
                    .map(|v| v / (2.0 * h));
                let g = m.eval_g(z).unwrap();
                assert!((dot3(xu, xu) - g).abs() < 1e-8 * g.max(1.0), "{chart:?}");
                assert!((dot3(xv, xv) - g).abs() < 1e-8 * g.max(1.0), "{chart:?}");
                assert!(dot3(xu, xv).abs() < 1e-8 * g.max(1.0), "{chart:?}");
            }
        }
    }

    #[test]
    fn gauss_curvature_matches_chart_s0() {
        for chart in CHARTS {
            let worst = gauss_curvature_check(chart, &samples()).unwrap();
            assert!(worst < 1e-3, "{chart:?}: {worst}");
        }
    }

    /// lifted chord lengths converge to the metric-weighted chart lengths
    #[test]
    fn lifted_lengths_converge_to_metric_length() {
        let chart = ChartMap::SphereStereographic;
        let m = chart.paired_metric();
        let mut errs = Vec::new();
        for j in [64usize, 128, 256] {
            let c = curve::initial_circle(0.3, 0.4, j).unwrap();
            let lifted = lift_curve(&chart, &c);
            let mut len3 = 0.0;
            for e in 0..c.num_elements() {
                let (a, b) = c.element(e);
                let d = sub3(lifted[b], lifted[a]);
                len3 += dot3(d, d).sqrt();
            }
            let lg = curve::discrete_length(&m, &c).unwrap();
            errs.push((len3 - lg).abs());
        }
        // first-order (in fact quadratic) agreement under refinement
        assert!(errs[1] < 0.6 * errs[0] && errs[2] < 0.6 * errs[1], "{errs:?}");
    }
}
