//! Direct evaluation of the discrete weak forms from their definitions.
//!
//! Everything here works in parameter space: the interval is split into
//! `n_e` pieces of length `h = 1/n_e`, fields are evaluated at both element
//! endpoints, and the mass-lumped product is the literal sum
//! `(u, v)^h = (h/2) sum_e [(u v)(end) + (u v)(start)]`. This module shares
//! no code with the assembly path; it exists so that solved steps can be
//! checked against the defining equations.

use crate::curve::{Curve, CurvatureField};
use crate::flows::SchemeKind;
use crate::metric::MetricSpec;
use crate::vec2::Vec2;
use crate::Result;

/// Endpoint-indexed evaluation context for one curve.
struct Ctx<'a> {
    c: &'a Curve,
    h: f64,
    /// `X_rho` per element (constant)
    xr: Vec<Vec2>,
    /// `|X_rho|` per element
    xr_norm: Vec<f64>,
    /// element normal `nu = -X_rho^perp / |X_rho|`
    nu: Vec<Vec2>,
}

impl<'a> Ctx<'a> {
    fn new(c: &'a Curve) -> Ctx<'a> {
        let ne = c.num_elements();
        let h = 1.0 / ne as f64;
        let mut xr = Vec::with_capacity(ne);
        let mut xr_norm = Vec::with_capacity(ne);
        let mut nu = Vec::with_capacity(ne);
        for e in 0..ne {
            let (a, b) = c.element(e);
            let d = (c.nodes()[b] - c.nodes()[a]) / h;
            xr.push(d);
            xr_norm.push(d.norm());
            nu.push(-(d / d.norm()).perp());
        }
        Ctx { c, h, xr, xr_norm, nu }
    }

    /// node index of (element, endpoint 0 = start / 1 = end)
    fn node(&self, e: usize, end: usize) -> usize {
        let (a, b) = self.c.element(e);
        if end == 0 {
            a
        } else {
            b
        }
    }

    /// mass-lumped integral of an endpoint-evaluated integrand
    fn ip(&self, f: impl Fn(usize, usize) -> f64) -> f64 {
        let mut s = 0.0;
        for e in 0..self.xr.len() {
            s += 0.5 * self.h * (f(e, 1) + f(e, 0));
        }
        s
    }

    /// exact integral of an element-wise constant integrand
    fn ip_const(&self, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.xr.len()).map(|e| self.h * f(e)).sum()
    }

    /// derivative of the hat at node `i` on element `e`
    fn hat_rho(&self, i: usize, e: usize) -> f64 {
        let (a, b) = self.c.element(e);
        if b == i {
            1.0 / self.h
        } else if a == i {
            -1.0 / self.h
        } else {
            0.0
        }
    }

    fn hat(&self, i: usize, e: usize, end: usize) -> f64 {
        if self.node(e, end) == i {
            1.0
        } else {
            0.0
        }
    }
}

/// Tracks the largest row-relative residual.
struct Worst {
    value: f64,
}

impl Worst {
    fn new() -> Worst {
        Worst { value: 0.0 }
    }

    /// `terms` are the separately evaluated integrals of one equation row;
    /// their sum should vanish.
    fn row(&mut self, terms: &[f64]) {
        let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs())).max(1e-300);
        let resid = terms.iter().sum::<f64>().abs();
        if std::env::var("CURVEFLOW_DEBUG_RESID").is_ok() && resid / scale.max(1e-12) > 1e-6 {
            eprintln!("bad row: terms {terms:?} resid {resid:.3e} scale {scale:.3e}");
        }
        self.value = self.value.max(resid / scale.max(1e-12));
    }

    fn abs_row(&mut self, resid: f64, scale: f64) {
        self.value = self.value.max(resid.abs() / scale.max(1.0));
    }
}

fn kappa_scalar(field: &CurvatureField) -> Option<&[f64]> {
    match field {
        CurvatureField::Kappa(k) | CurvatureField::KappaG(k) => Some(k),
        _ => None,
    }
}

fn kappa_vector(field: &CurvatureField) -> Option<&[Vec2]> {
    match field {
        CurvatureField::KappaVec(k) | CurvatureField::KappaGVec(k) => Some(k),
        _ => None,
    }
}

/// Evaluates all defining lumped-product equations of one accepted step and
/// returns the largest row-relative residual.
///
/// `new` must be the accepted curve, `curvature` the returned field, and
/// `prev` the curvature that entered the step (elastic schemes only).
pub fn step_residual(
    kind: SchemeKind,
    m: &MetricSpec,
    old: &Curve,
    new: &Curve,
    curvature: &CurvatureField,
    prev: Option<&CurvatureField>,
    dt: f64,
) -> Result<f64> {
    let cx = Ctx::new(old);
    let nn = old.num_nodes();
    let ne = old.num_elements();
    let open = !old.is_closed();
    let mut worst = Worst::new();

    // nodal metric data on the old curve
    let mut g = vec![0.0; nn];
    let mut sg = vec![0.0; nn];
    let mut gl = vec![Vec2::ZERO; nn];
    let mut gsq = vec![Vec2::ZERO; nn];
    let mut s0 = vec![0.0; nn];
    for i in 0..nn {
        let z = old.nodes()[i];
        g[i] = m.eval_g(z)?;
        sg[i] = g[i].sqrt();
        gl[i] = m.grad_ln_g(z)?;
        gsq[i] = m.grad_sqrt_g(z)?;
        s0[i] = m.sectional_curvature(z)?;
    }
    let vel: Vec<Vec2> = (0..nn).map(|i| (new.nodes()[i] - old.nodes()[i]) / dt).collect();
    let xr_new: Vec<Vec2> = (0..ne)
        .map(|e| {
            let (a, b) = new.element(e);
            (new.nodes()[b] - new.nodes()[a]) / cx.h
        })
        .collect();

    // interior test filter for the open-curve side constraint
    let constraint_test = |i: usize| !(open && (i == 0 || i + 1 == nn));

    // --- side constraints -------------------------------------------------
    let euclid_constraint = |worst: &mut Worst, kap_nu: &dyn Fn(usize, usize) -> Vec2| {
        for i in 0..nn {
            if !constraint_test(i) {
                continue;
            }
            for comp in 0..2 {
                let ec = if comp == 0 { Vec2::new(1.0, 0.0) } else { Vec2::new(0.0, 1.0) };
                let mass = cx.ip(|e, end| {
                    kap_nu(e, cx.node(e, end)).dot(ec)
                        * cx.hat(i, e, end)
                        * cx.xr_norm[e]
                });
                let stiff =
                    cx.ip_const(|e| xr_new[e].dot(ec) * cx.hat_rho(i, e) / cx.xr_norm[e]);
                worst.row(&[mass, stiff]);
            }
        }
    };

    let metric_constraint = |worst: &mut Worst,
                             kap_term: &dyn Fn(usize, usize) -> Vec2|
     -> Result<()> {
        // gradient source: linear for the plain schemes, frozen at the
        // accepted curve for the split ones (fixed point reached)
        for i in 0..nn {
            if !constraint_test(i) {
                continue;
            }
            for comp in 0..2 {
                let ec = if comp == 0 { Vec2::new(1.0, 0.0) } else { Vec2::new(0.0, 1.0) };
                let mass = cx.ip(|e, end| {
                    kap_term(e, cx.node(e, end)).dot(ec) * cx.hat(i, e, end) * cx.xr_norm[e]
                });
                let grad = if kind.is_split() {
                    let split = m.split_gradients()?;
                    let cxn = Ctx::new(new);
                    cxn.ip(|e, end| {
                        let j = cxn.node(e, end);
                        let gp = split.grad_plus(new.nodes()[j]).unwrap();
                        let gm = split.grad_minus(old.nodes()[j]).unwrap();
                        (gp + gm).dot(ec) * cxn.hat(i, e, end) * cxn.xr_norm[e]
                    })
                } else {
                    cx.ip(|e, end| {
                        gsq[cx.node(e, end)].dot(ec) * cx.hat(i, e, end) * cx.xr_norm[e]
                    })
                };
                let stiff = cx.ip(|e, end| {
                    sg[cx.node(e, end)] * xr_new[e].dot(ec) * cx.hat_rho(i, e)
                        / cx.xr_norm[e]
                });
                worst.row(&[mass, grad, stiff]);
            }
        }
        Ok(())
    };

    // --- motion equations --------------------------------------------------
    let scalar_motion =
        |worst: &mut Worst, rhs_terms: &dyn Fn(usize) -> Vec<f64>| {
            for i in 0..nn {
                let lhs = cx.ip(|e, end| {
                    let j = cx.node(e, end);
                    g[j] * vel[j].dot(cx.nu[e]) * cx.hat(i, e, end) * cx.xr_norm[e]
                });
                let mut terms = vec![lhs];
                terms.extend(rhs_terms(i));
                worst.row(&terms);
            }
        };

    // nodal Z from its lumped definition
    let z_of = |cx: &Ctx| -> Vec<f64> {
        (0..nn)
            .map(|i| {
                let num = 0.5
                    * cx.ip(|e, end| {
                        let j = cx.node(e, end);
                        cx.nu[e].dot(gl[j]) * cx.hat(i, e, end) * cx.xr_norm[e]
                    });
                let den = cx.ip(|e, end| {
                    let j = cx.node(e, end);
                    sg[j] * cx.hat(i, e, end) * cx.hat(i, e, end) * cx.xr_norm[e]
                });
                num / den
            })
            .collect()
    };

    // scalar Laplacian-type right-hand side: (g^{-1/2} [u]_rho, chi_rho |X_rho|^{-1})^h
    let grad_grad = |u: &[f64], i: usize| -> f64 {
        cx.ip(|e, end| {
            let (a, b) = old.element(e);
            let urho = (u[b] - u[a]) / cx.h;
            (1.0 / sg[cx.node(e, end)]) * urho * cx.hat_rho(i, e) / cx.xr_norm[e]
        })
    };

    match kind {
        SchemeKind::CfA | SchemeKind::CfAOpen => {
            let k = kappa_scalar(curvature).unwrap();
            scalar_motion(&mut worst, &|i| {
                vec![-cx.ip(|e, end| {
                    let j = cx.node(e, end);
                    (k[j] - 0.5 * cx.nu[e].dot(gl[j])) * cx.hat(i, e, end) * cx.xr_norm[e]
                })]
            });
            euclid_constraint(&mut worst, &|e, j| cx.nu[e] * k[j]);
            if open {
                for i in [0, nn - 1] {
                    let d = (new.nodes()[i] - old.nodes()[i]).norm();
                    worst.abs_row(d, old.nodes()[i].norm());
                }
            }
        }
        SchemeKind::CfB => {
            let kv = kappa_vector(curvature).unwrap();
            for i in 0..nn {
                for comp in 0..2 {
                    let ec = if comp == 0 { Vec2::new(1.0, 0.0) } else { Vec2::new(0.0, 1.0) };
                    let lhs = cx.ip(|e, end| {
                        let j = cx.node(e, end);
                        g[j] * vel[j].dot(ec) * cx.hat(i, e, end) * cx.xr_norm[e]
                    });
                    let rhs = -cx.ip(|e, end| {
                        let j = cx.node(e, end);
                        (kv[j] - cx.nu[e] * (0.5 * cx.nu[e].dot(gl[j]))).dot(ec)
                            * cx.hat(i, e, end)
                            * cx.xr_norm[e]
                    });
                    worst.row(&[lhs, rhs]);
                }
            }
            euclid_constraint(&mut worst, &|_, j| kv[j]);
        }
        SchemeKind::CfC | SchemeKind::CfCStar => {
            let k = kappa_scalar(curvature).unwrap();
            scalar_motion(&mut worst, &|i| {
                vec![-cx.ip(|e, end| {
                    let j = cx.node(e, end);
                    sg[j] * k[j] * cx.hat(i, e, end) * cx.xr_norm[e]
                })]
            });
            metric_constraint(&mut worst, &|e, j| cx.nu[e] * (g[j] * k[j]))?;
        }
        SchemeKind::CfD | SchemeKind::CfDStar => {
            let kv = kappa_vector(curvature).unwrap();
            for i in 0..nn {
                for comp in 0..2 {
                    let ec = if comp == 0 { Vec2::new(1.0, 0.0) } else { Vec2::new(0.0, 1.0) };
                    let lhs = cx.ip(|e, end| {
                        let j = cx.node(e, end);
                        g[j] * vel[j].dot(ec) * cx.hat(i, e, end) * cx.xr_norm[e]
                    });
                    let rhs = -cx.ip(|e, end| {
                        let j = cx.node(e, end);
                        g[j] * kv[j].dot(ec) * cx.hat(i, e, end) * cx.xr_norm[e]
                    });
                    worst.row(&[lhs, rhs]);
                }
            }
            metric_constraint(&mut worst, &|_, j| kv[j] * (g[j] * sg[j]))?;
        }
        SchemeKind::CfReducedNu => {
            // reduced motion rows tested with vector hats
            let split = m.split_gradients()?;
            let cxn = Ctx::new(new);
            for i in 0..nn {
                for comp in 0..2 {
                    let ec = if comp == 0 { Vec2::new(1.0, 0.0) } else { Vec2::new(0.0, 1.0) };
                    let mass = cx.ip(|e, end| {
                        let j = cx.node(e, end);
                        g[j] * sg[j]
                            * vel[j].dot(cx.nu[e])
                            * ec.dot(cx.nu[e])
                            * cx.hat(i, e, end)
                            * cx.xr_norm[e]
                    });
                    let grad = cxn.ip(|e, end| {
                        let j = cxn.node(e, end);
                        let gp = split.grad_plus(new.nodes()[j]).unwrap();
                        let gm = split.grad_minus(old.nodes()[j]).unwrap();
                        (gp + gm).dot(ec) * cxn.hat(i, e, end) * cxn.xr_norm[e]
                    });
                    let stiff = cx.ip(|e, end| {
                        sg[cx.node(e, end)] * xr_new[e].dot(ec) * cx.hat_rho(i, e)
                            / cx.xr_norm[e]
                    });
                    worst.row(&[mass, grad, stiff]);
                }
            }
        }
        SchemeKind::CdE => {
            let k = kappa_scalar(curvature).unwrap();
            let z = z_of(&cx);
            let kk: Vec<f64> = (0..nn).map(|i| k[i] / sg[i] - z[i]).collect();
            scalar_motion(&mut worst, &|i| vec![-grad_grad(&kk, i)]);
            euclid_constraint(&mut worst, &|e, j| cx.nu[e] * k[j]);
        }
        SchemeKind::CdF | SchemeKind::CdFStar => {
            let k = kappa_scalar(curvature).unwrap();
            scalar_motion(&mut worst, &|i| vec![-grad_grad(k, i)]);
            metric_constraint(&mut worst, &|e, j| cx.nu[e] * (g[j] * k[j]))?;
        }
        SchemeKind::ElU => {
            let k = kappa_scalar(curvature).unwrap();
            let kp = kappa_scalar(prev.expect("elastic step needs prev")).unwrap();
            let z = z_of(&cx);
            let kk: Vec<f64> = (0..nn).map(|i| k[i] / sg[i] - z[i]).collect();
            scalar_motion(&mut worst, &|i| {
                let lap = -grad_grad(&kk, i);
                let cubic = 0.5
                    * cx.ip(|e, end| {
                        let j = cx.node(e, end);
                        let t = kp[j] - 0.5 * cx.nu[e].dot(gl[j]);
                        (t * t * t / g[j]) * cx.hat(i, e, end) * cx.xr_norm[e]
                    });
                let lin = cx.ip(|e, end| {
                    let j = cx.node(e, end);
                    let t = kp[j] - 0.5 * cx.nu[e].dot(gl[j]);
                    s0[j] * t * cx.hat(i, e, end) * cx.xr_norm[e]
                });
                vec![lap, cubic, lin]
            });
            euclid_constraint(&mut worst, &|e, j| cx.nu[e] * k[j]);
        }
        SchemeKind::ElW | SchemeKind::ElWLambda(_) => {
            let k = kappa_scalar(curvature).unwrap();
            let kp = kappa_scalar(prev.expect("elastic step needs prev")).unwrap();
            let lambda = if let SchemeKind::ElWLambda(l) = kind { l } else { 0.0 };
            scalar_motion(&mut worst, &|i| {
                let lap = -grad_grad(k, i);
                let cubic = 0.5
                    * cx.ip(|e, end| {
                        let j = cx.node(e, end);
                        sg[j] * kp[j] * kp[j] * kp[j] * cx.hat(i, e, end) * cx.xr_norm[e]
                    });
                let lin = cx.ip(|e, end| {
                    let j = cx.node(e, end);
                    s0[j] * sg[j] * kp[j] * cx.hat(i, e, end) * cx.xr_norm[e]
                });
                let pen = -lambda
                    * cx.ip(|e, end| {
                        let j = cx.node(e, end);
                        sg[j] * k[j] * cx.hat(i, e, end) * cx.xr_norm[e]
                    });
                vec![lap, cubic, lin, pen]
            });
            metric_constraint(&mut worst, &|e, j| cx.nu[e] * (g[j] * k[j]))?;
        }
    }
    Ok(worst.value)
}
