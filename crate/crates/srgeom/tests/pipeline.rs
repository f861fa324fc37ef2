//! End-to-end use of the public API: expressions in, verdicts out.

use srgeom::connection::IDENTITY_TOL;
use srgeom::contact::{extract_contact_data, ContactGrading, ContactOptions, WFormula};
use srgeom::g235::{flatness_235, horizontal_pair, morimoto_235, MorimotoFormula, MORIMOTO_ORDER};
use srgeom::lie::{heisenberg_normal_form, CarnotAlgebra};
use srgeom::manifold::{sample_points, FramedManifold, StructureClass};

fn heisenberg_like(metric: &str) -> FramedManifold {
    FramedManifold::parse(
        &["x", "y", "z"],
        &[vec!["1", "0", "-y/2"], vec!["0", "1", "x/2"], vec!["0", "0", "1"]],
        2,
        Some(&[vec![metric, "0"], vec!["0", metric]]),
        StructureClass::Contact,
    )
    .unwrap()
}

#[test]
fn contact_pipeline() {
    let opts = ContactOptions { order: 6, ..Default::default() };
    for (metric, flat) in [("1", true), ("exp(2*x)", false)] {
        let m = heisenberg_like(metric);
        for p in sample_points(&[(-0.5, 0.5); 3], 3, 1) {
            assert_eq!(m.growth_flag(&p, 3).unwrap(), vec![2, 3]);
            let sym = m.symbol_at(&p).unwrap();
            let lambda = heisenberg_normal_form(&sym).unwrap();
            assert!((lambda[0] - 1.0).abs() < 1e-12);
            let g = ContactGrading::morimoto(extract_contact_data(&m, &p, &opts).unwrap(), WFormula::Corrected).unwrap();
            let conn = g.morimoto_connection().unwrap();
            let mo = conn.check_morimoto().unwrap();
            assert!(mo.rcond < IDENTITY_TOL && mo.tcond < IDENTITY_TOL);
            let f = conn.flatness().unwrap();
            assert_eq!(f.torsion.max(f.curvature) < IDENTITY_TOL, flat, "{metric} {f:?}");
        }
    }
}

#[test]
fn two_three_five_pipeline() {
    let frames = [
        vec!["1", "0", "0", "0", "0"],
        vec!["0", "1", "x1", "x1^2/2", "x1*x2"],
        vec!["0", "0", "1", "0", "0"],
        vec!["0", "0", "0", "1", "0"],
        vec!["0", "0", "0", "0", "1"],
    ];
    let coords = ["x1", "x2", "x3", "x4", "x5"];
    let metric = [vec!["1", "0"], vec!["0", "1 + x4^2/10"]];
    let m = FramedManifold::parse(&coords, &frames, 2, Some(&metric), StructureClass::TwoThreeFive).unwrap();
    let p = [0.1, -0.2, 0.3, 0.25, 0.0];
    assert_eq!(m.growth_flag(&p, 3).unwrap(), vec![2, 3, 5]);
    assert!(!flatness_235(&m, &p, IDENTITY_TOL).unwrap().flat);
    let mm = morimoto_235(&horizontal_pair(&m, &p, MORIMOTO_ORDER).unwrap(), MorimotoFormula::Solved).unwrap();
    let mo = mm.connection.check_morimoto().unwrap();
    assert!(mo.rcond < 1e-6 && mo.tcond < 1e-6, "{mo:?}");
    let c = mm.connection.check_compatible().unwrap();
    assert!(c.layers < IDENTITY_TOL && c.metric < IDENTITY_TOL && c.strong < IDENTITY_TOL, "{c:?}");
}

#[test]
fn symbol_documents_round_trip() {
    let m = heisenberg_like("exp(x)");
    let sym = m.symbol_at(&[0.2, 0.1, 0.0]).unwrap();
    let text = serde_json::to_string(&sym.to_doc()).unwrap();
    let back = CarnotAlgebra::from_doc(&serde_json::from_str(&text).unwrap()).unwrap();
    assert_eq!(back.algebra.layer_dims(), sym.algebra.layer_dims());
    assert!((back.metric() - sym.metric()).amax() < 1e-15);
}
