use super::*;
use crate::manifold::{sample_points, FramedManifold, StructureClass};

fn heisenberg(metric: Option<&str>) -> FramedManifold {
    let m: Option<Vec<Vec<&str>>> = metric.map(|s| vec![vec![s, "0"], vec!["0", s]]);
    FramedManifold::parse(
        &["x", "y", "z"],
        &[vec!["1", "0", "-y/2"], vec!["0", "1", "x/2"], vec!["0", "0", "1"]],
        2,
        m.as_deref(),
        StructureClass::Contact,
    )
    .unwrap()
}

fn cartan_group() -> FramedManifold {
    FramedManifold::parse(
        &["a", "b", "c", "d", "e"],
        &[
            vec!["1", "0", "0", "0", "0"],
            vec!["0", "1", "a", "a^2/2", "a*b"],
            vec!["0", "0", "1", "a", "b"],
            vec!["0", "0", "0", "1", "0"],
            vec!["0", "0", "0", "0", "1"],
        ],
        2,
        None,
        StructureClass::TwoThreeFive,
    )
    .unwrap()
}

fn graded(m: &FramedManifold, p: &[f64], dims: Vec<usize>, order: usize) -> GradedFrame {
    let (x, fields) = m.frame_components(p, order).unwrap();
    let g = m.metric_jets(&x).unwrap();
    GradedFrame::orthonormalize(&Frame::new(fields).unwrap(), dims, &g).unwrap()
}

fn horizontal(m: &FramedManifold, p: &[f64], dims: Vec<usize>) -> GradedFrame {
    GradedFrame::new(m.adapted_frame(p, 1).unwrap(), dims).unwrap()
}

#[test]
fn left_invariant_heisenberg_connection() {
    let m = heisenberg(None);
    let gf = graded(&m, &[0.3, -0.4, 1.1], vec![2, 1], 4);
    let conn = Connection::frame_parallel(gf);
    let t = vals3(&conn.torsion());
    assert!((t[0][1][2] + 1.0).abs() < 1e-14);
    let r = conn.curvature().unwrap();
    assert!(r.iter().flatten().flatten().flatten().all(|x| x.value().abs() < 1e-14));
    let c = conn.check_compatible().unwrap();
    assert!(c.layers < 1e-14 && c.metric < 1e-14 && c.strong < 1e-14, "{c:?}");
    let f = conn.flatness().unwrap();
    assert!(f.torsion < 1e-14 && f.curvature < 1e-14);
    let mo = conn.check_morimoto().unwrap();
    assert!(mo.rcond < 1e-12 && mo.tcond < 1e-12, "{mo:?}");
    assert!(conn.torsion_identity_residual() < 1e-14);
    assert!(conn.curvature_in_isometries_residual().unwrap() < 1e-12);
}

#[test]
fn levi_civita_is_torsion_free_but_mixes_layers() {
    let m = heisenberg(None);
    let conn = Connection::levi_civita(graded(&m, &[0.1, 0.2, 0.3], vec![2, 1], 3));
    let t = vals3(&conn.torsion());
    assert!(t.iter().flatten().flatten().all(|x| x.abs() < 1e-14));
    let c = conn.check_compatible().unwrap();
    assert!(c.layers > SEPARATION_TOL);
    // Γ_{12}^3 = c_{12}^3 / 2 in an orthonormal frame.
    assert!((conn.gamma[0][1][2].value() - 0.5).abs() < 1e-14);
}

#[test]
fn perturbed_connection_fails_morimoto() {
    let m = heisenberg(None);
    let gf = graded(&m, &[0.0, 0.5, 0.0], vec![2, 1], 3);
    let basis = gf.isometry_basis().unwrap();
    assert_eq!(basis.len(), 1);
    let mut conn = Connection::frame_parallel(gf);
    let d = &basis[0];
    for b in 0..3 {
        for k in 0..3 {
            conn.gamma[0][b][k] = conn.gamma[0][b][k].add_scalar(0.1 * d[(k, b)]);
        }
    }
    let c = conn.check_compatible().unwrap();
    assert!(c.layers < 1e-14 && c.metric < 1e-14 && c.strong < 1e-12);
    let mo = conn.check_morimoto().unwrap();
    assert!(mo.rcond > SEPARATION_TOL, "{mo:?}");
    // T_{e1} moves by 0.1 D except on e1 itself; D is a unit rotation of the
    // first layer, so ⟨ΔT_{e1}, D⟩ = 0.1 (1 - |D e1|²) = 0.05.
    assert!((mo.rcond - 0.05).abs() < 1e-12, "{mo:?}");
}

#[test]
fn cartan_group_is_flat() {
    let m = cartan_group();
    for p in sample_points(&[(-1.0, 1.0); 5], 3, 42) {
        let gf = graded(&m, &p, vec![2, 1, 2], 4);
        let (support, anti_lie) = gf.selector_axiom_residuals();
        assert!(support < 1e-14 && anti_lie < 1e-12, "{support} {anti_lie}");
        let conn = Connection::frame_parallel(gf);
        let f = conn.flatness().unwrap();
        assert!(f.torsion < IDENTITY_TOL && f.curvature < IDENTITY_TOL);
        let mo = conn.check_morimoto().unwrap();
        assert!(mo.rcond < IDENTITY_TOL && mo.tcond < IDENTITY_TOL, "{mo:?}");
    }
}

#[test]
fn conformal_heisenberg_is_not_flat() {
    let m = heisenberg(Some("exp(2*x)"));
    let gf = graded(&m, &[0.2, 0.1, 0.0], vec![2, 1], 4);
    // Orthonormal horizontal fields are e^{-x} X_a.
    let x1 = frame::values(&gf.frame.fields);
    assert!((x1[(0, 0)] - (-0.2f64).exp()).abs() < 1e-14);
    let conn = Connection::frame_parallel(gf);
    let f = conn.flatness().unwrap();
    assert!(f.torsion.max(f.curvature) > SEPARATION_TOL);
}

#[test]
fn wedge_orthonormalization_of_a_scaled_frame() {
    // Replace Z by 3Z: the wedge-orthonormal third field is Z again.
    let m = FramedManifold::parse(
        &["x", "y", "z"],
        &[vec!["1", "0", "-y/2"], vec!["0", "1", "x/2"], vec!["0", "0", "3"]],
        2,
        None,
        StructureClass::Contact,
    )
    .unwrap();
    let gf = graded(&m, &[0.5, 0.5, 0.5], vec![2, 1], 3);
    let f = frame::values(&gf.frame.fields);
    assert!((f[(2, 2)] - 1.0).abs() < 1e-14);
    assert!((gf.frame.c[0][1][2].value() - 1.0).abs() < 1e-14);
}

#[test]
fn gram_selector_matches_normalizations() {
    let h = lie::heisenberg(&[1.0]).unwrap();
    let wedge = symbol_selector(&h, Normalization::Wedge).unwrap();
    let free = symbol_selector(&h, Normalization::Free).unwrap();
    assert!((wedge[2][(0, 1)] - 1.0).abs() < 1e-12);
    assert!((free[2][(0, 1)] - 0.5).abs() < 1e-12);
    assert!(wedge[0].iter().chain(wedge[1].iter()).all(|x| *x == 0.0));
    // Anti-Lie on a non-orthonormal basis: Σ χ_pq [e_p, e_q] = e_k.
    let h2 = lie::heisenberg(&[1.0, 2.0]).unwrap();
    let chi = symbol_selector(&h2, Normalization::Wedge).unwrap();
    let n = 5;
    let mut s = 0.0;
    for p in 0..n {
        for q in p + 1..n {
            s += chi[4][(p, q)] * h2.algebra.constant(p, q, 4);
        }
    }
    assert!((s - 1.0).abs() < 1e-12);
}

#[test]
fn cartan_selector_agrees_with_symbol_selector() {
    let gf = graded(&cartan_group(), &[0.1, 0.2, 0.3, 0.4, 0.5], vec![2, 1, 2], 3);
    let sym = gf.symbol().unwrap();
    let chi = symbol_selector(&sym, Normalization::Wedge).unwrap();
    let fr = gf.selector();
    for k in 0..5 {
        for p in 0..5 {
            for q in 0..5 {
                assert!((chi[k][(p, q)] - fr[k][p][q].value()).abs() < 1e-12);
            }
        }
    }
}

fn heisenberg_hamiltonian(x0: [f64; 3], p0: [f64; 3], t: f64, h: f64) -> [f64; 6] {
    // H = ½((px - y pz/2)² + (py + x pz/2)²)
    let f = |s: [f64; 6]| -> [f64; 6] {
        let (x, y, px, py, pz) = (s[0], s[1], s[3], s[4], s[5]);
        let u = px - y * pz / 2.0;
        let v = py + x * pz / 2.0;
        [u, v, -y / 2.0 * u + x / 2.0 * v, -v * pz / 2.0, u * pz / 2.0, 0.0]
    };
    let mut s = [x0[0], x0[1], x0[2], p0[0], p0[1], p0[2]];
    let steps = (t / h).round() as usize;
    for _ in 0..steps {
        let k1 = f(s);
        let k2 = f(std::array::from_fn(|i| s[i] + h / 2.0 * k1[i]));
        let k3 = f(std::array::from_fn(|i| s[i] + h / 2.0 * k2[i]));
        let k4 = f(std::array::from_fn(|i| s[i] + h * k3[i]));
        s = std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    s
}

#[test]
fn heisenberg_geodesic_matches_hamiltonian_flow() {
    let m = heisenberg(None);
    let at = |x: &[f64]| Ok(Connection::frame_parallel(horizontal(&m, x, vec![2, 1])));
    let p0 = [0.3, 0.8, 2.0];
    let traj = normal_geodesic(at, &[0.0; 3], &p0, 1.0, 1e-2, None).unwrap();
    let end = traj.last().unwrap();
    let oracle = heisenberg_hamiltonian([0.0; 3], p0, 1.0, 1e-3);
    for i in 0..3 {
        assert!((end.point[i] - oracle[i]).abs() < 1e-7, "{:?} {:?}", end.point, oracle);
        assert!((end.covector[i] - oracle[3 + i]).abs() < 1e-7);
    }
    // Levi-Civita is not compatible, but the left-invariant Morimoto-type
    // connection with a rotation term is; it gives the same curve.
    let at_rot = |x: &[f64]| {
        let gf = horizontal(&m, x, vec![2, 1]);
        let mut c = Connection::frame_parallel(gf);
        for i in 0..3 {
            c.gamma[i][0][1] = c.gamma[i][0][1].add_scalar(0.7 * (i as f64 + 1.0));
            c.gamma[i][1][0] = c.gamma[i][1][0].add_scalar(-0.7 * (i as f64 + 1.0));
        }
        Ok(c)
    };
    let traj2 = normal_geodesic(at_rot, &[0.0; 3], &p0, 1.0, 1e-2, None).unwrap();
    let end2 = traj2.last().unwrap();
    for i in 0..3 {
        assert!((end2.point[i] - oracle[i]).abs() < 1e-7);
    }
}

#[test]
fn geodesic_energy_is_conserved_and_horizontal() {
    let m = heisenberg(Some("exp(2*x)"));
    let at = |x: &[f64]| Ok(Connection::frame_parallel(horizontal(&m, x, vec![2, 1])));
    let traj = normal_geodesic(at, &[0.1, 0.0, 0.0], &[1.0, 0.5, 0.3], 1.0, 1e-3, None).unwrap();
    let energy = |s: &GeodesicSample| {
        let gf = horizontal(&m, &s.point, vec![2, 1]);
        let f = frame::values(&gf.frame.fields);
        (0..2).map(|a| (0..3).map(|k| s.covector[k] * f[(a, k)]).sum::<f64>().powi(2)).sum::<f64>()
    };
    let e0 = energy(&traj[0]);
    for s in traj.iter().step_by(100) {
        assert!((energy(s) - e0).abs() < 1e-6);
    }
    // From the origin along X1 the curve is the x-axis.
    let m0 = heisenberg(None);
    let at0 = |x: &[f64]| Ok(Connection::frame_parallel(horizontal(&m0, x, vec![2, 1])));
    let traj = normal_geodesic(at0, &[0.0; 3], &[1.0, 0.0, 0.0], 1.0, 1e-2, None).unwrap();
    for s in &traj {
        assert!(s.point[1].abs() < 1e-12 && s.point[2].abs() < 1e-12);
        assert!((s.point[0] - s.t).abs() < 1e-12);
    }
}

#[test]
fn euclidean_geodesics_are_lines() {
    let m = FramedManifold::parse(&["x", "y"], &[vec!["1", "0"], vec!["0", "1"]], 2, None, StructureClass::Generic)
        .unwrap();
    let at = |x: &[f64]| Ok(Connection::levi_civita(horizontal(&m, x, vec![2])));
    let traj = normal_geodesic(at, &[1.0, 2.0], &[0.6, -0.8], 2.0, 0.1, None).unwrap();
    let end = traj.last().unwrap();
    assert!((end.point[0] - 2.2).abs() < 1e-12 && (end.point[1] - 0.4).abs() < 1e-12);
    let r = normal_geodesic(at, &[1.0, 2.0], &[0.6, -0.8], 2.0, 0.1, Some(&[(0.0, 1.5), (0.0, 3.0)]));
    assert!(matches!(r, Err(GeomError::OutOfChart(_))));
}

#[test]
fn insufficient_order_is_an_error() {
    let m = heisenberg(None);
    let gf = horizontal(&m, &[0.0; 3], vec![2, 1]);
    let conn = Connection::frame_parallel(gf);
    assert!(matches!(conn.curvature(), Err(GeomError::OrderExhausted(_))));
}
