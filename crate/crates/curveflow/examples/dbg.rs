use curveflow::*;
use curveflow::flows::{step, StepParams, SchemeKind};
use curveflow::curve::initial_circle;

fn main() {
    for m in [MetricSpec::Euclidean, MetricSpec::Mu(1.0)] {
        let c = initial_circle(2.0, 1.0, 24).unwrap();
        let p = StepParams::new(2e-4);
        let rep = step(SchemeKind::CfA, &m, &c, None, &p, 0).unwrap();
        let resid = weakforms::step_residual(SchemeKind::CfA, &m, &c, &rep.curve, &rep.curvature, None, p.dt).unwrap();
        println!("{m:?}: brute-force residual {resid:.3e}");
        // B scheme too
        let rep = step(SchemeKind::CfB, &m, &c, None, &p, 0).unwrap();
        let resid = weakforms::step_residual(SchemeKind::CfB, &m, &c, &rep.curve, &rep.curvature, None, p.dt).unwrap();
        println!("{m:?} B: brute-force residual {resid:.3e}");
    }
}
