//! Polygonal curves and the discrete geometric quantities built on them:
//! element frames, mass-lumped vertex data, discrete length / area / elastic
//! energies, mesh ratio, initial data and the rank condition.

use crate::metric::MetricSpec;
use crate::vec2::Vec2;
use crate::{Error, Result};

pub const DEGENERATE_EDGE_FACTOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Closed,
    OpenFixedEnds,
}

/// A polygonal curve. Closed curves store each node once (node 0 follows
/// node J-1); open curves store both endpoints.
#[derive(Debug, Clone)]
pub struct Curve {
    topology: Topology,
    nodes: Vec<Vec2>,
}

/// Per-element unit tangent, unit normal `nu = -tangent^perp` and length.
#[derive(Debug, Clone, Copy)]
pub struct ElementFrame {
    pub tangent: Vec2,
    pub normal: Vec2,
    pub length: f64,
}

/// Mass-lumped L^2 projection of the element normals onto the nodes.
#[derive(Debug, Clone)]
pub struct VertexNormals {
    pub omega: Vec<Vec2>,
}

/// Nodal curvature unknowns paired with a curve.
#[derive(Debug, Clone)]
pub enum CurvatureField {
    /// Euclidean scalar curvature `kappa`.
    Kappa(Vec<f64>),
    /// Geodesic scalar curvature `kappa_g`.
    KappaG(Vec<f64>),
    /// Euclidean curvature vector.
    KappaVec(Vec<Vec2>),
    /// Geodesic curvature vector.
    KappaGVec(Vec<Vec2>),
}

/// Per-curve scalar diagnostics.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub length: f64,
    pub area: Option<f64>,
    pub elastic_energy: Option<f64>,
    pub ratio: f64,
    pub min_edge: f64,
    pub max_edge: f64,
}

impl Curve {
    pub fn closed(nodes: Vec<Vec2>) -> Result<Curve> {
        if nodes.len() < 3 {
            return Err(Error::Config(format!(
                "closed curve needs at least 3 nodes, got {}",
                nodes.len()
            )));
        }
        let c = Curve { topology: Topology::Closed, nodes };
        c.check_edges()?;
        Ok(c)
    }

    pub fn open(nodes: Vec<Vec2>) -> Result<Curve> {
        if nodes.len() < 2 {
            return Err(Error::Config("open curve needs at least 2 nodes".into()));
        }
        let c = Curve { topology: Topology::OpenFixedEnds, nodes };
        c.check_edges()?;
        Ok(c)
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn is_closed(&self) -> bool {
        self.topology == Topology::Closed
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        match self.topology {
            Topology::Closed => self.nodes.len(),
            Topology::OpenFixedEnds => self.nodes.len() - 1,
        }
    }

    /// Node indices `(start, end)` of element `e`.
    pub fn element(&self, e: usize) -> (usize, usize) {
        let n = self.nodes.len();
        match self.topology {
            Topology::Closed => (e, (e + 1) % n),
            Topology::OpenFixedEnds => (e, e + 1),
        }
    }

    /// Element preceding node `i` (ending there), if any.
    pub fn prev_element(&self, i: usize) -> Option<usize> {
        match self.topology {
            Topology::Closed => Some((i + self.nodes.len() - 1) % self.nodes.len()),
            Topology::OpenFixedEnds => (i > 0).then(|| i - 1),
        }
    }

    /// Element following node `i` (starting there), if any.
    pub fn next_element(&self, i: usize) -> Option<usize> {
        match self.topology {
            Topology::Closed => Some(i),
            Topology::OpenFixedEnds => (i + 1 < self.nodes.len()).then_some(i),
        }
    }

    pub fn diameter(&self) -> f64 {
        let mut lo = self.nodes[0];
        let mut hi = self.nodes[0];
        for p in &self.nodes {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (hi - lo).norm()
    }

    fn check_edges(&self) -> Result<()> {
        let tol = DEGENERATE_EDGE_FACTOR * self.diameter();
        for e in 0..self.num_elements() {
            let (a, b) = self.element(e);
            let len = (self.nodes[b] - self.nodes[a]).norm();
            if len <= tol {
                return Err(Error::DegenerateEdge { index: e, length: len });
            }
        }
        Ok(())
    }

    /// Per-element frames; errors on degenerate edges.
    pub fn element_frames(&self) -> Result<Vec<ElementFrame>> {
        self.check_edges()?;
        let mut out = Vec::with_capacity(self.num_elements());
        for e in 0..self.num_elements() {
            let (a, b) = self.element(e);
            let d = self.nodes[b] - self.nodes[a];
            let length = d.norm();
            let tangent = d / length;
            out.push(ElementFrame { tangent, normal: -tangent.perp(), length });
        }
        Ok(out)
    }

    /// Lumped vertex masses `m_i = (sum of adjacent edge lengths) / 2`.
    pub fn vertex_masses(&self, frames: &[ElementFrame]) -> Vec<f64> {
        (0..self.num_nodes())
            .map(|i| {
                let mut m = 0.0;
                if let Some(e) = self.prev_element(i) {
                    m += 0.5 * frames[e].length;
                }
                if let Some(e) = self.next_element(i) {
                    m += 0.5 * frames[e].length;
                }
                m
            })
            .collect()
    }

    /// Edge-length weighted vertex normals `w_i = (1/2) sum_e l_e nu_e`
    /// over the elements adjacent to node `i` (not normalised).
    pub fn weighted_vertex_normals(&self, frames: &[ElementFrame]) -> Vec<Vec2> {
        (0..self.num_nodes())
            .map(|i| {
                let mut w = Vec2::ZERO;
                if let Some(e) = self.prev_element(i) {
                    w += frames[e].normal * (0.5 * frames[e].length);
                }
                if let Some(e) = self.next_element(i) {
                    w += frames[e].normal * (0.5 * frames[e].length);
                }
                w
            })
            .collect()
    }

    /// Mass-lumped L^2 projection of the element normals: `omega_i = w_i / m_i`.
    pub fn vertex_normals(&self, frames: &[ElementFrame]) -> VertexNormals {
        let m = self.vertex_masses(frames);
        let w = self.weighted_vertex_normals(frames);
        VertexNormals {
            omega: w.iter().zip(&m).map(|(wi, mi)| *wi / *mi).collect(),
        }
    }
}

/// Mass-lumped product `(a, b)^h` with per-element weights: each element
/// contributes `w_e * (a b at its end + a b at its start) / 2`. Data is
/// given per element endpoint, allowing jumps at nodes: `a[e] = [start, end]`.
pub fn lumped_product(a: &[[f64; 2]], b: &[[f64; 2]], weights: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() != weights.len() {
        return Err(Error::Config("lumped_product: length mismatch".into()));
    }
    let mut s = 0.0;
    for e in 0..a.len() {
        s += 0.5 * weights[e] * (a[e][1] * b[e][1] + a[e][0] * b[e][0]);
    }
    Ok(s)
}

/// Discrete metric length `L_g^h = (g^{1/2}(X), |X_rho|)^h`.
pub fn discrete_length(m: &MetricSpec, c: &Curve) -> Result<f64> {
    let frames = c.element_frames()?;
    let sg: Vec<f64> = c.nodes().iter().map(|&z| m.sqrt_g(z)).collect::<Result<_>>()?;
    let mut s = 0.0;
    for e in 0..c.num_elements() {
        let (a, b) = c.element(e);
        s += 0.5 * frames[e].length * (sg[a] + sg[b]);
    }
    Ok(s)
}

/// Discrete enclosed metric area `A_g^h = (phi_g(X) . nu, |X_rho|)^h`.
/// Positive for clockwise parameterisations (outer normal convention).
pub fn discrete_area(m: &MetricSpec, c: &Curve) -> Result<f64> {
    if !c.is_closed() {
        return Err(Error::Topology);
    }
    let frames = c.element_frames()?;
    let phi: Vec<Vec2> = c.nodes().iter().map(|&z| m.area_potential(z)).collect::<Result<_>>()?;
    let mut s = 0.0;
    for e in 0..c.num_elements() {
        let (a, b) = c.element(e);
        s += 0.5 * frames[e].length * (phi[b] + phi[a]).dot(frames[e].normal);
    }
    Ok(s)
}

/// Ratio of longest to shortest element.
pub fn mesh_ratio(c: &Curve) -> Result<f64> {
    let frames = c.element_frames()?;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for f in &frames {
        lo = lo.min(f.length);
        hi = hi.max(f.length);
    }
    Ok(hi / lo)
}

/// Discrete elastic energy for a scalar Euclidean curvature field
/// (`(1/2) (g^{-1/2} [kappa - (1/2) nu . grad ln g]^2, |X_rho|)^h`).
fn elastic_energy_kappa(m: &MetricSpec, c: &Curve, kappa: &[f64]) -> Result<f64> {
    let frames = c.element_frames()?;
    let mut s = 0.0;
    for e in 0..c.num_elements() {
        let (a, b) = c.element(e);
        for i in [a, b] {
            let z = c.nodes()[i];
            let t = kappa[i] - m.half_nu_grad_ln_g(z, frames[e].normal)?;
            s += 0.25 * frames[e].length * t * t / m.sqrt_g(z)?;
        }
    }
    Ok(s)
}

/// Discrete elastic energy for a geodesic curvature field
/// (`(1/2) (g^{1/2} kappa_g^2, |X_rho|)^h`).
fn elastic_energy_kappa_g(m: &MetricSpec, c: &Curve, kappa_g: &[f64]) -> Result<f64> {
    let frames = c.element_frames()?;
    let masses = c.vertex_masses(&frames);
    let mut s = 0.0;
    for i in 0..c.num_nodes() {
        s += 0.5 * masses[i] * m.sqrt_g(c.nodes()[i])? * kappa_g[i] * kappa_g[i];
    }
    Ok(s)
}

/// Scalar diagnostics for a curve; the elastic energy is computed when a
/// scalar curvature field is supplied.
pub fn diagnostics(
    m: &MetricSpec,
    c: &Curve,
    curvature: Option<&CurvatureField>,
) -> Result<Diagnostics> {
    let frames = c.element_frames()?;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for f in &frames {
        lo = lo.min(f.length);
        hi = hi.max(f.length);
    }
    let area = if c.is_closed() { Some(discrete_area(m, c)?) } else { None };
    let elastic_energy = match curvature {
        Some(CurvatureField::Kappa(k)) => Some(elastic_energy_kappa(m, c, k)?),
        Some(CurvatureField::KappaG(k)) => Some(elastic_energy_kappa_g(m, c, k)?),
        _ => None,
    };
    Ok(Diagnostics {
        length: discrete_length(m, c)?,
        area,
        elastic_energy,
        ratio: hi / lo,
        min_edge: lo,
        max_edge: hi,
    })
}

/// Nonuniformly partitioned circle of radius `r0` centred at `a0 e2`,
/// parameterised anti-clockwise: `theta_j = 2 pi q_j + 0.1 sin(2 pi q_j)`.
pub fn initial_circle(a0: f64, r0: f64, j: usize) -> Result<Curve> {
    use std::f64::consts::TAU;
    if j < 3 {
        return Err(Error::Config(format!("circle needs J >= 3, got {j}")));
    }
    let nodes = (0..j)
        .map(|k| {
            let q = k as f64 / j as f64;
            let th = TAU * q + 0.1 * (TAU * q).sin();
            Vec2::new(r0 * th.cos(), a0 + r0 * th.sin())
        })
        .collect();
    Curve::closed(nodes)
}

/// Straight open segment with `j` elements between fixed endpoints.
pub fn initial_segment(p: Vec2, q: Vec2, j: usize) -> Result<Curve> {
    if j < 1 {
        return Err(Error::Config("segment needs at least one element".into()));
    }
    let nodes = (0..=j)
        .map(|k| {
            let t = k as f64 / j as f64;
            p + (q - p) * t
        })
        .collect();
    Curve::open(nodes)
}

/// Cigar-shaped closed curve: a stadium with straight sides of length
/// `2 half_straight` and semicircular caps of radius `cap_r`, sampled at
/// equal arc length, anti-clockwise. `vertical` rotates it by 90 degrees.
pub fn initial_cigar(center: Vec2, half_straight: f64, cap_r: f64, vertical: bool, j: usize) -> Result<Curve> {
    use std::f64::consts::PI;
    let total = 4.0 * half_straight + 2.0 * PI * cap_r;
    let nodes = (0..j)
        .map(|k| {
            let mut s = k as f64 / j as f64 * total;
            // anti-clockwise, starting at the midpoint of the lower side
            let p;
            if s < half_straight {
                p = Vec2::new(s, -cap_r);
            } else if s < half_straight + PI * cap_r {
                let phi = (s - half_straight) / cap_r;
                p = Vec2::new(half_straight + cap_r * phi.sin(), -cap_r * phi.cos());
            } else if s < 3.0 * half_straight + PI * cap_r {
                s -= half_straight + PI * cap_r;
                p = Vec2::new(half_straight - s, cap_r);
            } else if s < 3.0 * half_straight + 2.0 * PI * cap_r {
                let phi = (s - 3.0 * half_straight - PI * cap_r) / cap_r;
                p = Vec2::new(-half_straight - cap_r * phi.sin(), cap_r * phi.cos());
            } else {
                s -= 3.0 * half_straight + 2.0 * PI * cap_r;
                p = Vec2::new(-half_straight + s, -cap_r);
            }
            let q = if vertical { Vec2::new(-p.y, p.x) } else { p };
            center + q
        })
        .collect();
    Curve::closed(nodes)
}

/// Initial discrete curvatures: the lumped curvature vector, the scalar
/// `kappa^0` (projected on the unit vertex normal) and the geodesic
/// `kappa_g^0`.
pub struct InitialCurvature {
    pub kappa_vec: Vec<Vec2>,
    pub kappa: Vec<f64>,
    pub kappa_g: Vec<f64>,
}

/// Computes `kappa_vec^0` from the lumped weak identity, then
/// `kappa^0 = kappa_vec^0 . omega / |omega|` and
/// `kappa_g^0 = g^{-1/2} (kappa^0 - (1/2) omega . grad ln g)`.
pub fn initial_curvature(m: &MetricSpec, c: &Curve) -> Result<InitialCurvature> {
    let frames = c.element_frames()?;
    let masses = c.vertex_masses(&frames);
    let omega = c.vertex_normals(&frames).omega;
    let n = c.num_nodes();
    let mut kappa_vec = vec![Vec2::ZERO; n];
    for i in 0..n {
        let mut stiff = Vec2::ZERO;
        if let Some(e) = c.prev_element(i) {
            let (a, _) = c.element(e);
            stiff += (c.nodes()[i] - c.nodes()[a]) / frames[e].length;
        }
        if let Some(e) = c.next_element(i) {
            let (_, b) = c.element(e);
            stiff += (c.nodes()[i] - c.nodes()[b]) / frames[e].length;
        }
        kappa_vec[i] = -stiff / masses[i];
    }
    let mut kappa = vec![0.0; n];
    let mut kappa_g = vec![0.0; n];
    for i in 0..n {
        let norm = omega[i].norm();
        if norm < 1e-12 {
            return Err(Error::VanishingVertexNormal(i));
        }
        kappa[i] = kappa_vec[i].dot(omega[i]) / norm;
        let z = c.nodes()[i];
        kappa_g[i] =
            (kappa[i] - 0.5 * omega[i].dot(m.grad_ln_g(z)?)) / m.sqrt_g(z)?;
    }
    Ok(InitialCurvature { kappa_vec, kappa, kappa_g })
}

/// Checks the rank assumption: the vectors
/// `z_i = (g(X) nu, chi_i |X_rho|)^h = g(X_i) w_i` must span the plane.
pub fn rank_condition(m: &MetricSpec, c: &Curve) -> Result<bool> {
    let frames = c.element_frames()?;
    let w = c.weighted_vertex_normals(&frames);
    // Gram matrix of the J vectors; its eigenvalues are the squared
    // singular values of the J x 2 matrix.
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..c.num_nodes() {
        let zi = w[i] * m.eval_g(c.nodes()[i])?;
        sxx += zi.x * zi.x;
        sxy += zi.x * zi.y;
        syy += zi.y * zi.y;
    }
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let smax = (tr / 2.0 + disc).max(0.0).sqrt();
    let smin = (tr / 2.0 - disc).max(0.0).sqrt();
    Ok(smin > 1e-12 * smax)
}

/// Writes a polyline snapshot: one `x y` pair per line, closed curves
/// repeat the first node.
pub fn polyline_string(c: &Curve) -> String {
    let mut s = String::new();
    for p in c.nodes() {
        s.push_str(&format!("{:.16e} {:.16e}\n", p.x, p.y));
    }
    if c.is_closed() {
        let p = c.nodes()[0];
        s.push_str(&format!("{:.16e} {:.16e}\n", p.x, p.y));
    }
    s
}

/// Parses a polyline snapshot; a repeated first node marks a closed curve.
pub fn parse_polyline(text: &str) -> Result<Curve> {
    let mut nodes = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let bad = || Error::Config(format!("polyline line {}: expected 'x y'", ln + 1));
        let x: f64 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let y: f64 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        nodes.push(Vec2::new(x, y));
    }
    if nodes.len() >= 4 && nodes.first() == nodes.last() {
        nodes.pop();
        Curve::closed(nodes)
    } else {
        Curve::open(nodes)
    }
}

/// Bounding-box midpoint height and half-height, used as the measured
/// `(a^m, r^m)` of nearly circular curves.
pub fn bounding_heights(c: &Curve) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in c.nodes() {
        lo = lo.min(p.y);
        hi = hi.max(p.y);
    }
    (0.5 * (hi + lo), 0.5 * (hi - lo))
}

/// Bounding-box width and height.
pub fn bounding_box(c: &Curve) -> (f64, f64) {
    let (mut xlo, mut xhi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in c.nodes() {
        xlo = xlo.min(p.x);
        xhi = xhi.max(p.x);
        ylo = ylo.min(p.y);
        yhi = yhi.max(p.y);
    }
    (xhi - xlo, yhi - ylo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn unit_square_clockwise() -> Curve {
        Curve::closed(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
        ])
        .unwrap()
    }

    fn regular_polygon(j: usize) -> Curve {
        // anti-clockwise, inscribed in the unit circle centred at (0, 2)
        Curve::closed(
            (0..j)
                .map(|k| {
                    let th = TAU * k as f64 / j as f64;
                    Vec2::new(th.cos(), 2.0 + th.sin())
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn frames_orthogonal_to_edges() {
        let c = initial_circle(2.0, 1.0, 17).unwrap();
        let frames = c.element_frames().unwrap();
        for e in 0..c.num_elements() {
            let (a, b) = c.element(e);
            let d = c.nodes()[b] - c.nodes()[a];
            assert!(frames[e].normal.dot(d).abs() < 1e-14);
            assert!((frames[e].normal.norm() - 1.0).abs() < 1e-14);
            assert!((frames[e].tangent.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn lumped_product_examples() {
        // constant one against edge lengths gives the polygon length
        let c = unit_square_clockwise();
        let frames = c.element_frames().unwrap();
        let ones = vec![[1.0, 1.0]; 4];
        let w: Vec<f64> = frames.iter().map(|f| f.length).collect();
        assert!((lumped_product(&ones, &ones, &w).unwrap() - 4.0).abs() < 1e-14);
        let zeros = vec![[0.0, 0.0]; 4];
        assert_eq!(lumped_product(&zeros, &ones, &w).unwrap(), 0.0);
        // hat at one vertex of the unit square: 1/2 + 1/2 over adjacent edges
        let hat = vec![[0.0, 1.0], [1.0, 0.0], [0.0, 0.0], [0.0, 0.0]];
        assert!((lumped_product(&hat, &hat, &w).unwrap() - 1.0).abs() < 1e-14);
        assert!(lumped_product(&hat, &ones, &w[..3]).is_err());
    }

    #[test]
    fn discrete_length_examples() {
        let e = MetricSpec::Euclidean;
        assert!((discrete_length(&e, &unit_square_clockwise()).unwrap() - 4.0).abs() < 1e-14);

        // horizontal unit segment at height 1 under the Poincare metric
        let seg = initial_segment(Vec2::new(0.0, 1.0), Vec2::new(1.0, 1.0), 1).unwrap();
        assert!((discrete_length(&MetricSpec::Mu(1.0), &seg).unwrap() - 1.0).abs() < 1e-14);

        // fine circle converges to the quadrature value of the smooth length
        let m = MetricSpec::Mu(1.0);
        let c = initial_circle(2.0, 1.0, 4096).unwrap();
        // 1-D quadrature oracle for L_g = int g^(1/2)(x) |x_rho| d rho
        let n = 200_000;
        let mut quad = 0.0;
        for k in 0..n {
            let th = TAU * (k as f64 + 0.5) / n as f64;
            quad += TAU / n as f64 / (2.0 + th.sin());
        }
        let lh = discrete_length(&m, &c).unwrap();
        assert!((lh - quad).abs() < 1e-5 * quad, "{lh} vs {quad}");
    }

    #[test]
    fn discrete_area_examples() {
        // clockwise unit square: exactly 1 (linear potential, exact quadrature)
        let e = MetricSpec::Euclidean;
        assert!((discrete_area(&e, &unit_square_clockwise()).unwrap() - 1.0).abs() < 1e-14);

        // MuFamily(0) agrees with Euclidean
        let c = initial_circle(2.0, 1.0, 64).unwrap();
        let a0 = discrete_area(&MetricSpec::Mu(0.0), &c).unwrap();
        let a1 = discrete_area(&e, &c).unwrap();
        assert!((a0 - a1).abs() < 1e-14);

        // open curves are rejected
        let seg = initial_segment(Vec2::new(0.0, 1.0), Vec2::new(1.0, 1.0), 4).unwrap();
        assert!(matches!(discrete_area(&e, &seg), Err(Error::Topology)));

        // fine circle vs 2-D quadrature of the metric area over the disk
        let m = MetricSpec::Mu(1.0);
        let c = initial_circle(2.0, 1.0, 512).unwrap();
        let n = 1200;
        let mut quad = 0.0;
        for i in 0..n {
            for k in 0..n {
                let r = (i as f64 + 0.5) / n as f64;
                let th = TAU * (k as f64 + 0.5) / n as f64;
                let y: f64 = 2.0 + r * th.sin();
                quad += r * (TAU / n as f64) * (1.0 / n as f64) * y.powi(-2);
            }
        }
        // anti-clockwise parameterisation gives the inner normal, so the
        // signed discrete area is the negative enclosed area
        let ah = -discrete_area(&m, &c).unwrap();
        assert!((ah - quad).abs() < 1e-3 * quad, "{ah} vs {quad}");
    }

    #[test]
    fn area_sign_flips_under_reversal_and_rotation_invariance() {
        let m = MetricSpec::Mu(1.0);
        let c = initial_circle(2.0, 1.0, 40).unwrap();
        let a = discrete_area(&m, &c).unwrap();
        let l = discrete_length(&m, &c).unwrap();

        let mut rev: Vec<Vec2> = c.nodes().to_vec();
        rev.reverse();
        let cr = Curve::closed(rev).unwrap();
        assert!((discrete_area(&m, &cr).unwrap() + a).abs() < 1e-13);

        let mut rot: Vec<Vec2> = c.nodes().to_vec();
        rot.rotate_left(11);
        let crot = Curve::closed(rot).unwrap();
        assert!((discrete_area(&m, &crot).unwrap() - a).abs() < 1e-13);
        assert!((discrete_length(&m, &crot).unwrap() - l).abs() < 1e-13);
    }

    #[test]
    fn mesh_ratio_examples() {
        let c = regular_polygon(16);
        assert!((mesh_ratio(&c).unwrap() - 1.0).abs() < 1e-12);
        let c = Curve::open(vec![Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(3.0, 0.0)]).unwrap();
        assert!((mesh_ratio(&c).unwrap() - 2.0).abs() < 1e-14);
        // brute force over the initial circle's chords
        let c = initial_circle(2.0, 1.0, 32).unwrap();
        let frames = c.element_frames().unwrap();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for f in &frames {
            lo = lo.min(f.length);
            hi = hi.max(f.length);
        }
        assert!(mesh_ratio(&c).unwrap() > 1.0);
        assert_eq!(mesh_ratio(&c).unwrap(), hi / lo);
    }

    #[test]
    fn initial_circle_chords_match_reported_values() {
        for (j, h) in [(32usize, 2.1544e-1), (64, 1.0792e-1), (128, 5.3988e-2), (512, 1.3499e-2)] {
            let c = initial_circle(2.0, 1.0, j).unwrap();
            let frames = c.element_frames().unwrap();
            let hmax = frames.iter().map(|f| f.length).fold(0.0f64, f64::max);
            assert!((hmax - h).abs() < 5e-5 * h, "J={j}: {hmax} vs {h}");
        }
        let c = initial_circle(2.0, 1.0, 4).unwrap();
        assert!((c.nodes()[0] - Vec2::new(1.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn initial_curvature_examples() {
        // regular polygon inscribed in the unit circle: kappa = 1 exactly
        for j in [8usize, 64, 512] {
            let c = regular_polygon(j);
            let ic = initial_curvature(&MetricSpec::Euclidean, &c).unwrap();
            for k in &ic.kappa {
                assert!((k - 1.0).abs() < 1e-4, "J={j}: kappa {k}");
            }
        }
        // positive for anti-clockwise parameterisation (inner normal)
        let ic = initial_curvature(&MetricSpec::Euclidean, &initial_circle(2.0, 1.0, 64).unwrap())
            .unwrap();
        assert!(ic.kappa.iter().all(|&k| k > 0.0));

        // straight open segment: interior curvature vectors vanish
        let seg = initial_segment(Vec2::new(0.0, 1.0), Vec2::new(2.0, 1.0), 8).unwrap();
        let ic = initial_curvature(&MetricSpec::Euclidean, &seg).unwrap();
        for i in 1..seg.num_nodes() - 1 {
            assert!(ic.kappa_vec[i].norm() < 1e-13);
        }

        // hyperbolic circle: kappa_g approaches a / r = 2
        let ic = initial_curvature(&MetricSpec::Mu(1.0), &initial_circle(2.0, 1.0, 512).unwrap())
            .unwrap();
        for k in &ic.kappa_g {
            assert!((k - 2.0).abs() < 5e-4, "kappa_g {k}");
        }
    }

    #[test]
    fn rank_condition_examples() {
        let m = MetricSpec::Mu(1.0);
        assert!(rank_condition(&m, &initial_circle(2.0, 1.0, 32).unwrap()).unwrap());
        // collinear nodes: all normals parallel
        let line = Curve::open(
            (0..6).map(|k| Vec2::new(k as f64, 1.0)).collect(),
        )
        .unwrap();
        assert!(!rank_condition(&MetricSpec::Euclidean, &line).unwrap());
    }

    #[test]
    fn degenerate_edges_rejected() {
        let r = Curve::closed(vec![
            Vec2::new(0.0, 1.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
        ]);
        assert!(matches!(r, Err(Error::DegenerateEdge { .. })));
    }

    #[test]
    fn polyline_round_trip() {
        let c = initial_circle(2.0, 1.0, 9).unwrap();
        let s = polyline_string(&c);
        assert_eq!(s.lines().count(), 10); // closed repeats the first node
        let back = parse_polyline(&s).unwrap();
        assert!(back.is_closed());
        for (a, b) in back.nodes().iter().zip(c.nodes()) {
            assert_eq!(a, b);
        }
        let seg = initial_segment(Vec2::new(0.0, 1.0), Vec2::new(1.0, 2.0), 3).unwrap();
        let back = parse_polyline(&polyline_string(&seg)).unwrap();
        assert!(!back.is_closed());
        assert_eq!(back.num_nodes(), 4);
    }

    #[test]
    fn cigar_is_closed_and_equidistributed() {
        let c = initial_cigar(Vec2::new(0.0, 1.0), 1.5, 0.5, false, 128).unwrap();
        assert!((mesh_ratio(&c).unwrap() - 1.0).abs() < 0.02);
        let (w, h) = bounding_box(&c);
        assert!((w - 4.0).abs() < 1e-2 && (h - 1.0).abs() < 1e-2);
        // anti-clockwise: positive Euclidean curvature
        let ic = initial_curvature(&MetricSpec::Euclidean, &c).unwrap();
        assert!(ic.kappa.iter().sum::<f64>() > 0.0);
    }
}
