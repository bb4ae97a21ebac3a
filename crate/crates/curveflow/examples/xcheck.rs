use curveflow::{harness, metric::MetricSpec, flows::SchemeKind};

fn main() {
    let paper: &[(&str, SchemeKind, f64, f64, &[f64])] = &[
        ("A", SchemeKind::CfA, 2.0, 0.1, &[2.7956e-2, 7.6597e-3, 1.9572e-3, 4.9196e-4, 1.2315e-4]),
        ("B", SchemeKind::CfB, 2.0, 0.1, &[4.7884e-2, 1.3493e-2, 3.4819e-3, 8.7754e-4, 2.1982e-4]),
        ("C", SchemeKind::CfC, 2.0, 0.1, &[3.4212e-2, 9.3803e-3, 2.3970e-3, 6.0251e-4, 1.5082e-4]),
        ("D", SchemeKind::CfD, 2.0, 0.1, &[5.2395e-2, 1.4744e-2, 3.8047e-3, 9.5887e-4, 2.4019e-4]),
        ("C*", SchemeKind::CfCStar, 2.0, 0.1, &[2.7155e-2, 7.5112e-3, 1.9237e-3, 4.8381e-4, 1.2112e-4]),
        ("D*", SchemeKind::CfDStar, 2.0, 0.1, &[4.9299e-2, 1.3918e-2, 3.5945e-3, 9.0613e-4, 2.2699e-4]),
        ("U11", SchemeKind::ElU, 1.1, 1.0, &[3.5987e-2, 8.7266e-3, 2.1624e-3, 5.3929e-4, 1.3474e-4]),
        ("W11", SchemeKind::ElW, 1.1, 1.0, &[3.1536e-2, 7.9745e-3, 1.9958e-3, 4.9957e-4, 1.2489e-4]),
        ("U2", SchemeKind::ElU, 2.0, 1.0, &[1.8228e-1, 4.3289e-2, 1.0699e-2, 2.6668e-3, 6.6621e-4]),
        ("W2", SchemeKind::ElW, 2.0, 1.0, &[4.0407e-2, 1.0436e-2, 2.6286e-3, 6.5835e-4, 1.6467e-4]),
    ];
    let js = [32usize, 64, 128];
    for (tag, kind, a0, t, pap) in paper {
        let rows = harness::convergence_study(
            *kind, &MetricSpec::Mu(1.0), *a0, 1.0, *t, &js, 1e-10, 50,
        ).unwrap();
        for (r, p) in rows.iter().zip(pap.iter()) {
            println!("{tag:4} J={:3} mine={:.4e} paper={:.4e} ratio={:.4} eoc={}",
                r.j, r.error, p, p / r.error,
                r.eoc.map(|e| format!("{e:.3}")).unwrap_or_default());
        }
    }
}
