//! Exact circular solutions used as reference trajectories: hyperbolic
//! circles under curvature and elastic flow, and origin-centred circles of
//! the disk family under curvature and elastic flow, together with their
//! spherical counterparts.
//!
//! Implicit-equation solutions are obtained by bisection on analytically
//! bracketed monotone branches; every one of them is cross-checked against
//! adaptive Runge-Kutta integration of the underlying ODE.

use crate::{Error, Result};

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;

// --- adaptive Dormand-Prince 5(4) integrator ------------------------------

/// Integrates `y' = f(t, y)` from `t0` to `t1` with local tolerance `tol`
/// (used both absolutely and relatively).
pub fn integrate<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    t1: f64,
    tol: f64,
) -> [f64; N] {
    const A21: f64 = 1.0 / 5.0;
    const A31: f64 = 3.0 / 40.0;
    const A32: f64 = 9.0 / 40.0;
    const A41: f64 = 44.0 / 45.0;
    const A42: f64 = -56.0 / 15.0;
    const A43: f64 = 32.0 / 9.0;
    const A51: f64 = 19372.0 / 6561.0;
    const A52: f64 = -25360.0 / 2187.0;
    const A53: f64 = 64448.0 / 6561.0;
    const A54: f64 = -212.0 / 729.0;
    const A61: f64 = 9017.0 / 3168.0;
    const A62: f64 = -355.0 / 33.0;
    const A63: f64 = 46732.0 / 5247.0;
    const A64: f64 = 49.0 / 176.0;
    const A65: f64 = -5103.0 / 18656.0;
    const B1: f64 = 35.0 / 384.0;
    const B3: f64 = 500.0 / 1113.0;
    const B4: f64 = 125.0 / 192.0;
    const B5: f64 = -2187.0 / 6784.0;
    const B6: f64 = 11.0 / 84.0;
    const E1: f64 = 71.0 / 57600.0;
    const E3: f64 = -71.0 / 16695.0;
    const E4: f64 = 71.0 / 1920.0;
    const E5: f64 = -17253.0 / 339200.0;
    const E6: f64 = 22.0 / 525.0;
    const E7: f64 = -1.0 / 40.0;

    if t1 == t0 {
        return y0;
    }
    let dir = (t1 - t0).signum();
    let mut t = t0;
    let mut y = y0;
    let mut h = (t1 - t0).abs().min(1e-3).max(1e-12) * dir;
    let mut steps = 0usize;
    while (t1 - t) * dir > 0.0 {
        steps += 1;
        assert!(steps < 10_000_000, "integrator step limit reached");
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        let add = |y: &[f64; N], ks: &[(&[f64; N], f64)]| {
            let mut out = *y;
            for i in 0..N {
                for (k, c) in ks {
                    out[i] += h * c * k[i];
                }
            }
            out
        };
        let k1 = f(t, &y);
        let k2 = f(t + 0.2 * h, &add(&y, &[(&k1, A21)]));
        let k3 = f(t + 0.3 * h, &add(&y, &[(&k1, A31), (&k2, A32)]));
        let k4 = f(t + 0.8 * h, &add(&y, &[(&k1, A41), (&k2, A42), (&k3, A43)]));
        let k5 = f(
            t + 8.0 / 9.0 * h,
            &add(&y, &[(&k1, A51), (&k2, A52), (&k3, A53), (&k4, A54)]),
        );
        let ynew_pre = add(&y, &[(&k1, A61), (&k2, A62), (&k3, A63), (&k4, A64), (&k5, A65)]);
        let k6 = f(t + h, &ynew_pre);
        let ynew = add(&y, &[(&k1, B1), (&k3, B3), (&k4, B4), (&k5, B5), (&k6, B6)]);
        let k7 = f(t + h, &ynew);
        let mut err: f64 = 0.0;
        for i in 0..N {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol + tol * y[i].abs().max(ynew[i].abs());
            err = err.max((e / sc).abs());
        }
        if err <= 1.0 {
            t += h;
            y = ynew;
        }
        let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
        h *= fac;
        if h.abs() < 1e-16 * (1.0 + t.abs()) {
            h = 1e-16 * (1.0 + t.abs()) * dir;
        }
    }
    y
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        if (fm >= 0.0) == (flo >= 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= 1e-13 * (1.0 + lo.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

// --- hyperbolic plane ------------------------------------------------------

/// Extinction time of the hyperbolic circle under curvature flow.
pub fn hyperbolic_cf_extinction(a0: f64, r0: f64) -> f64 {
    -0.5 * (1.0 - (r0 / a0) * (r0 / a0)).ln()
}

/// Shrinking hyperbolic circle under curvature flow:
/// `a = e^{-t} a0`, `r = (r0^2 - a0^2 (1 - e^{-2t}))^{1/2}`.
pub fn hyperbolic_cf_circle(a0: f64, r0: f64, t: f64) -> Result<(f64, f64)> {
    if !(a0 > r0 && r0 > 0.0) {
        return Err(Error::Branch);
    }
    let t0 = hyperbolic_cf_extinction(a0, r0);
    if t >= t0 {
        return Err(Error::PastExtinction { t, t0 });
    }
    let a = (-t).exp() * a0;
    let r = (r0 * r0 - a0 * a0 * (1.0 - (-2.0 * t).exp())).sqrt();
    Ok((a, r))
}

/// `F(y) = (y^2 - 1) / (y |1 - y^2/2|^{1/2})`, monotone on each sigma branch.
fn elastic_f(y: f64) -> f64 {
    (y * y - 1.0) / (y * (1.0 - 0.5 * y * y).abs().sqrt())
}

/// Hyperbolic circle under elastic flow. Integrates the coupled
/// `(a, r)` system and cross-checks `sigma = a/r` against the bisection
/// solution of `F(sigma(t)) = F(sigma(0)) e^t` on the invariant branch.
pub fn hyperbolic_elastic_circle(a0: f64, r0: f64, t: f64) -> Result<(f64, f64, f64)> {
    if !(a0 > r0 && r0 > 0.0) {
        return Err(Error::Branch);
    }
    let sigma0 = a0 / r0;
    if sigma0 <= 1.0 {
        return Err(Error::Branch);
    }
    if sigma0 == SQRT_2 {
        return Ok((a0, r0, sigma0));
    }
    let rhs = |_t: f64, y: &[f64; 2]| {
        let (a, r) = (y[0], y[1]);
        let fac = a / r - a * a * a / (2.0 * r * r * r);
        [-r * fac, -a * fac]
    };
    let y = integrate(rhs, 0.0, [a0, r0], t, 1e-12);
    let (a, r) = (y[0], y[1]);
    let sigma = a / r;

    // cross-check on the invariant branch containing sigma0
    let target = elastic_f(sigma0) * t.exp();
    let sigma_bis = if sigma0 < SQRT_2 {
        bisect(|y| elastic_f(y) - target, sigma0.min(sigma) * (1.0 - 1e-9), SQRT_2)
    } else {
        bisect(|y| target - elastic_f(y), SQRT_2, sigma0.max(sigma) * (1.0 + 1e-9))
    };
    assert!(
        (sigma - sigma_bis).abs() <= 1e-8 * (1.0 + sigma.abs()),
        "elastic sigma mismatch: ode {sigma} vs bisection {sigma_bis}"
    );
    Ok((a, r, sigma))
}

// --- disk family (alpha) ---------------------------------------------------

/// `G(y) = |(1 - alpha y^2)/(1 + alpha y^2)|^{1/alpha}`.
fn cf_g(alpha: f64, y: f64) -> f64 {
    ((1.0 - alpha * y * y) / (1.0 + alpha * y * y))
        .abs()
        .powf(1.0 / alpha)
}

/// Origin-centred circle under curvature flow for the metric family with
/// parameter `alpha`. For `alpha = -1` the result is cross-checked against
/// the closed form of geodesic curvature flow on the unit sphere.
pub fn alpha_cf_circle(alpha: f64, r0: f64, t: f64) -> Result<f64> {
    if r0 <= 0.0 {
        return Err(Error::Branch);
    }
    if t == 0.0 {
        return Ok(r0);
    }
    if alpha == 0.0 {
        let v = r0 * r0 - 0.5 * t;
        if v <= 0.0 {
            return Err(Error::PastExtinction { t, t0: 2.0 * r0 * r0 });
        }
        return Ok(v.sqrt());
    }
    let crit = alpha.abs().powf(-0.5);
    if alpha > 0.0 && r0 >= crit {
        return Err(Error::Domain(r0, 0.0));
    }
    if r0 == crit {
        return Ok(r0);
    }
    let target = cf_g(alpha, r0) * t.exp();
    let r = if r0 < crit {
        // shrinking branch: G decreases from 1 at the origin
        if target > 1.0 {
            let t0 = -cf_g(alpha, r0).ln();
            return Err(Error::PastExtinction { t, t0 });
        }
        bisect(|y| cf_g(alpha, y) - target, 1e-300, r0)
    } else {
        // expanding branch (alpha < 0): G increases towards 1
        if target >= 1.0 {
            let t0 = -cf_g(alpha, r0).ln();
            return Err(Error::PastExtinction { t, t0 });
        }
        let mut hi = r0 * 2.0;
        while cf_g(alpha, hi) < target {
            hi *= 2.0;
        }
        bisect(|y| target - cf_g(alpha, y), r0, hi)
    };
    if alpha == -1.0 {
        // spherical closed form: R = 2r/(1+r^2), R(t) = [1-(1-R0^2)e^{2t}]^{1/2}
        let rr0 = 2.0 * r0 / (1.0 + r0 * r0);
        let inner = 1.0 - (1.0 - rr0 * rr0) * (2.0 * t).exp();
        if inner > 0.0 {
            let rr = inner.sqrt();
            let rchk = if r0 < 1.0 {
                (1.0 - (1.0 - rr * rr).max(0.0).sqrt()) / rr
            } else {
                (1.0 + (1.0 - rr * rr).max(0.0).sqrt()) / rr
            };
            assert!(
                (r - rchk).abs() <= 1e-8 * (1.0 + r.abs()),
                "spherical cross-check failed: {r} vs {rchk}"
            );
        }
    }
    Ok(r)
}

/// `Q(y) = (1 - y^2)^2 / ((1 + y^2) |1 - 6 y^2 + y^4|^{1/2})` for `alpha = 1`.
fn elastic_q(y: f64) -> f64 {
    let y2 = y * y;
    (1.0 - y2) * (1.0 - y2) / ((1.0 + y2) * (1.0 - 6.0 * y2 + y2 * y2).abs().sqrt())
}

/// Origin-centred circle under elastic flow for `alpha` in `{-1, +1}`.
pub fn alpha_elastic_circle(alpha: f64, r0: f64, t: f64) -> Result<f64> {
    let ode = |_t: f64, y: &[f64; 1]| {
        let r = y[0];
        let r2 = r * r;
        let r4 = r2 * r2;
        // d/dt r^4 = (1/8)(1 - alpha^2 r^4)(1 - 6 alpha r^2 + alpha^2 r^4)
        [(1.0 - alpha * alpha * r4) * (1.0 - 6.0 * alpha * r2 + alpha * alpha * r4)
            / (32.0 * r2 * r)]
    };
    if alpha == -1.0 {
        if r0 <= 0.0 {
            return Err(Error::Branch);
        }
        let rr0 = 2.0 * r0 / (1.0 + r0 * r0);
        let rr = (1.0 - (1.0 - rr0.powi(4)) * (-2.0 * t).exp()).powf(0.25);
        let r = if (rr - 1.0).abs() < 1e-15 {
            1.0
        } else if r0 >= 1.0 {
            (1.0 + (1.0 - rr * rr).sqrt()) / rr
        } else {
            (1.0 - (1.0 - rr * rr).sqrt()) / rr
        };
        let rode = integrate(ode, 0.0, [r0], t, 1e-12)[0];
        assert!(
            (r - rode).abs() <= 1e-8 * (1.0 + r.abs()),
            "elliptic elastic cross-check failed: {r} vs {rode}"
        );
        Ok(r)
    } else if alpha == 1.0 {
        let stat = SQRT_2 - 1.0;
        if !(r0 > 0.0 && r0 < 1.0) {
            return Err(Error::Branch);
        }
        if r0 == stat || t == 0.0 {
            return Ok(r0);
        }
        let target = elastic_q(r0) * t.exp();
        let r = if r0 < stat {
            // Q increasing from 1 towards +inf; r grows to the stationary radius
            bisect(|y| elastic_q(y) - target, r0 * (1.0 - 1e-12), stat)
        } else {
            // Q decreasing from +inf to 0; r shrinks to the stationary radius
            bisect(|y| target - elastic_q(y), stat, r0 * (1.0 + 1e-12))
        };
        let rode = integrate(ode, 0.0, [r0], t, 1e-12)[0];
        assert!(
            (r - rode).abs() <= 1e-8 * (1.0 + r.abs()),
            "disk elastic cross-check failed: {r} vs {rode}"
        );
        Ok(r)
    } else {
        Err(Error::Branch)
    }
}

/// Incrementally advanced hyperbolic elastic reference, for per-step error
/// evaluation along a discrete evolution.
pub struct ElasticCircleOracle {
    t: f64,
    a: f64,
    r: f64,
}

impl ElasticCircleOracle {
    pub fn new(a0: f64, r0: f64) -> Result<ElasticCircleOracle> {
        if !(a0 > r0 && r0 > 0.0) {
            return Err(Error::Branch);
        }
        Ok(ElasticCircleOracle { t: 0.0, a: a0, r: r0 })
    }

    pub fn advance_to(&mut self, t: f64) -> (f64, f64) {
        let rhs = |_t: f64, y: &[f64; 2]| {
            let (a, r) = (y[0], y[1]);
            let fac = a / r - a * a * a / (2.0 * r * r * r);
            [-r * fac, -a * fac]
        };
        let y = integrate(rhs, self.t, [self.a, self.r], t, 1e-12);
        self.t = t;
        self.a = y[0];
        self.r = y[1];
        (self.a, self.r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cf_circle_values() {
        let (a, r) = hyperbolic_cf_circle(2.0, 1.0, 0.0).unwrap();
        assert_eq!((a, r), (2.0, 1.0));
        let t0 = hyperbolic_cf_extinction(2.0, 1.0);
        assert!((t0 - 0.14384103622589045).abs() < 1e-15);
        let (a, r) = hyperbolic_cf_circle(2.0, 1.0, 0.1).unwrap();
        assert!((a - 1.809674836071919).abs() < 1e-12);
        assert!((r - 0.5243310140664267).abs() < 1e-12);
        assert!(matches!(
            hyperbolic_cf_circle(2.0, 1.0, 0.2),
            Err(Error::PastExtinction { .. })
        ));
    }

    #[test]
    fn cf_circle_satisfies_its_ode() {
        // d(a)/dt = -a, d(r)/dt = -a^2/r by finite differences in t
        let h = 1e-6;
        for t in [0.02, 0.05, 0.1, 0.13] {
            let (a, r) = hyperbolic_cf_circle(2.0, 1.0, t).unwrap();
            let (ap, rp) = hyperbolic_cf_circle(2.0, 1.0, t + h).unwrap();
            let (am, rm) = hyperbolic_cf_circle(2.0, 1.0, t - h).unwrap();
            let da = (ap - am) / (2.0 * h);
            let dr = (rp - rm) / (2.0 * h);
            assert!((da + a).abs() < 1e-8);
            assert!((dr + a * a / r).abs() < 1e-6 / r);
        }
    }

    #[test]
    fn elastic_circle_paper_values() {
        // stationary ratio
        let (a, r, s) = hyperbolic_elastic_circle(SQRT_2, 1.0, 3.0).unwrap();
        assert_eq!((a, r, s), (SQRT_2, 1.0, SQRT_2));
        // sinking and shrinking
        let (a, r, s) = hyperbolic_elastic_circle(1.1, 1.0, 1.0).unwrap();
        assert!((r - 0.645).abs() < 1e-3, "r = {r}");
        assert!((a - 0.792).abs() < 1e-3, "a = {a}");
        assert!(s < SQRT_2 && s > 1.1);
        // rising and expanding
        let (a, r, _) = hyperbolic_elastic_circle(2.0, 1.0, 1.0).unwrap();
        assert!((r - 1.677).abs() < 1e-3, "r = {r}");
        assert!((a - 2.411).abs() < 1e-3, "a = {a}");
        assert!(matches!(hyperbolic_elastic_circle(1.0, 1.0, 0.5), Err(Error::Branch)));
    }

    #[test]
    fn sigma_never_crosses_stationary_value() {
        for t in [0.2, 0.5, 1.0, 2.0] {
            let (_, _, s) = hyperbolic_elastic_circle(1.1, 1.0, t).unwrap();
            assert!(s > 1.0 && s < SQRT_2);
            let (_, _, s) = hyperbolic_elastic_circle(2.0, 1.0, t).unwrap();
            assert!(s > SQRT_2);
        }
    }

    #[test]
    fn alpha_cf_values() {
        assert!((alpha_cf_circle(0.0, 1.0, 1.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-14);
        assert_eq!(alpha_cf_circle(0.7, 0.3, 0.0).unwrap(), 0.3);
        // spherical extinction time for R0 = 0.6: r0 solves 2r/(1+r^2)=0.6 -> r0 = 1/3
        let t0 = 0.5 * (1.0f64 / (1.0 - 0.36)).ln();
        assert!((t0 - 0.22314355131420976).abs() < 1e-15);
        assert!(alpha_cf_circle(-1.0, 1.0 / 3.0, t0 * 0.999).is_ok());
        assert!(matches!(
            alpha_cf_circle(-1.0, 1.0 / 3.0, t0 + 1e-6),
            Err(Error::PastExtinction { .. })
        ));
        // expanding branch for alpha = -1, r0 > 1
        let r = alpha_cf_circle(-1.0, 3.0, 0.2).unwrap();
        assert!(r > 3.0);
    }

    #[test]
    fn alpha_cf_matches_ode() {
        for (alpha, r0, t) in [(1.0, 0.5, 0.3), (-1.0, 0.5, 0.4), (-0.5, 0.8, 0.3), (2.0, 0.4, 0.2)]
        {
            let ode = |_t: f64, y: &[f64; 1]| {
                let r = y[0];
                [0.25 * (alpha * alpha * r.powi(4) - 1.0) / r]
            };
            let direct = integrate(ode, 0.0, [r0], t, 1e-12)[0];
            let ours = alpha_cf_circle(alpha, r0, t).unwrap();
            assert!((direct - ours).abs() < 1e-8, "alpha={alpha}: {ours} vs {direct}");
        }
    }

    #[test]
    fn alpha_elastic_values() {
        // stationary radius in the hyperbolic disk
        let stat = SQRT_2 - 1.0;
        assert_eq!(alpha_elastic_circle(1.0, stat, 5.0).unwrap(), stat);
        // great circle fixed point
        assert_eq!(alpha_elastic_circle(-1.0, 1.0, 2.0).unwrap(), 1.0);
        // frozen value from the closed form with R0 = 0.8 (lower branch)
        let r = alpha_elastic_circle(-1.0, 0.5, 1.0).unwrap();
        let rr = (1.0f64 - (1.0 - 0.8f64.powi(4)) * (-2.0f64).exp()).powf(0.25);
        let expect = (1.0 - (1.0 - rr * rr).sqrt()) / rr;
        assert!((r - expect).abs() < 1e-12);
        // branch monotonicity: r never crosses the stationary radius
        for t in [0.5, 1.0, 4.0] {
            let r = alpha_elastic_circle(1.0, 0.3, t).unwrap();
            assert!(r > 0.3 && r < stat);
            let r = alpha_elastic_circle(1.0, 0.6, t).unwrap();
            assert!(r < 0.6 && r > stat);
        }
        assert!(alpha_elastic_circle(0.5, 0.5, 1.0).is_err());
    }

    #[test]
    fn incremental_oracle_matches_direct() {
        let mut orc = ElasticCircleOracle::new(1.1, 1.0).unwrap();
        let mut last = (0.0, 0.0);
        for k in 1..=50 {
            last = orc.advance_to(k as f64 * 0.02);
        }
        let (a, r, _) = hyperbolic_elastic_circle(1.1, 1.0, 1.0).unwrap();
        assert!((last.0 - a).abs() < 1e-9);
        assert!((last.1 - r).abs() < 1e-9);
    }

    #[test]
    fn integrator_on_known_solution() {
        // y' = y, y(0) = 1
        let y = integrate(|_t, y: &[f64; 1]| [y[0]], 0.0, [1.0], 1.0, 1e-12);
        assert!((y[0] - std::f64::consts::E).abs() < 1e-10);
    }
}
