use super::*;
use crate::connection::IDENTITY_TOL;
use crate::jet::coordinate_jets;
use crate::manifold::{sample_points, StructureClass};

const COORDS: [&str; 5] = ["x1", "x2", "x3", "x4", "x5"];

fn manifold(x1: [&str; 5], x2: [&str; 5], rest: [[&str; 5]; 3], metric: Option<[[&str; 2]; 2]>) -> FramedManifold {
    let mut frames: Vec<Vec<&str>> = vec![x1.to_vec(), x2.to_vec()];
    frames.extend(rest.iter().map(|r| r.to_vec()));
    let metric: Option<Vec<Vec<&str>>> = metric.map(|m| m.iter().map(|r| r.to_vec()).collect());
    FramedManifold::parse(&COORDS, &frames, 2, metric.as_deref(), StructureClass::TwoThreeFive).unwrap()
}

const UNIT: [[&str; 5]; 3] =
    [["0", "0", "1", "0", "0"], ["0", "0", "0", "1", "0"], ["0", "0", "0", "0", "1"]];

/// The Cartan group: `[X_1,X_2] = X_3`, `[X_j,X_3] = X_{3+j}`.
pub(crate) fn cartan(metric: Option<[[&str; 2]; 2]>) -> FramedManifold {
    manifold(["1", "0", "0", "0", "0"], ["0", "1", "x1", "x1^2/2", "x1*x2"], UNIT, metric)
}

/// The Hilbert-Cartan distribution `X_1 = ∂_1 + x3 ∂_2 + x4 ∂_3 + x4² ∂_5`, `X_2 = ∂_4`.
fn hilbert(metric: Option<[[&str; 2]; 2]>) -> FramedManifold {
    manifold(
        ["1", "x3", "x4", "0", "x4^2"],
        ["0", "0", "0", "1", "0"],
        [["0", "1", "0", "0", "0"], ["0", "0", "1", "0", "0"], ["0", "0", "0", "0", "1"]],
        metric,
    )
}

const PERTURBED: [[&str; 2]; 2] = [["1 + x4^2/10", "0"], ["0", "1"]];
const GENERIC: [[&str; 2]; 2] = [["exp(x1*x3/3)", "x2/5"], ["x2/5", "1 + x5^2/5"]];

fn pt(n: usize, seed: u64) -> Vec<Vec<f64>> {
    sample_points(&[(-0.5, 0.5); 5], n, seed)
}

fn vals(v: &[Jet]) -> Vec<f64> {
    v.iter().map(|x| x.value()).collect()
}

#[test]
fn carnot_frame_is_the_bracket_frame() {
    let m = cartan(None);
    for p in pt(3, 1) {
        let pair = horizontal_pair(&m, &p, 6).unwrap();
        let f = canonical_frame_235(&pair, Y2Reading::Corrected).unwrap();
        let e = |i: usize| -> Vec<f64> { (0..5).map(|k| if k == i { 1.0 } else { 0.0 }).collect() };
        assert_eq!(vals(&f.z), e(2));
        assert_eq!(vals(&f.y[0]), e(3));
        assert_eq!(vals(&f.y[1]), e(4));
        let conn = connection_235(&f);
        for x in conn.gamma.iter().flatten().flatten() {
            assert!(x.coeffs().iter().all(|&c| c.abs() < 1e-14));
        }
        let fl = flatness_235(&m, &p, IDENTITY_TOL).unwrap();
        assert!(fl.flat && fl.residuals.torsion < 1e-13 && fl.residuals.curvature < 1e-13, "{fl:?}");
    }
}

#[test]
fn connection_is_strongly_compatible() {
    for m in [cartan(Some(PERTURBED)), hilbert(Some(GENERIC))] {
        for p in pt(2, 2) {
            let pair = horizontal_pair(&m, &p, 7).unwrap();
            let f = canonical_frame_235(&pair, Y2Reading::Corrected).unwrap();
            let r = connection_235(&f).check_compatible().unwrap();
            assert!(r.layers < 1e-12 && r.metric < 1e-12 && r.strong < 1e-9, "{r:?}");
        }
    }
}

#[test]
fn perturbed_metric_is_not_flat() {
    let m = cartan(Some(PERTURBED));
    let worst = pt(5, 3)
        .iter()
        .map(|p| {
            let r = flatness_235(&m, p, IDENTITY_TOL).unwrap();
            assert!(!r.flat);
            r.residuals.torsion.max(r.residuals.curvature)
        })
        .fold(0.0, f64::max);
    assert!(worst > 1e-3, "{worst}");
}

fn frame_data(pair: &[Vec<Jet>; 2], reading: Y2Reading) -> (Vec<f64>, [Vec<f64>; 2], nalgebra::DMatrix<f64>) {
    let f = canonical_frame_235(pair, reading).unwrap();
    let fl = &f.fields();
    (vals(&fl[2]), [vals(&fl[3]), vals(&fl[4])], f.metric_values())
}

fn rotation_defect(m: &FramedManifold, p: &[f64], alpha: &str, reading: Y2Reading) -> f64 {
    let order = 6;
    let pair = horizontal_pair(m, p, order).unwrap();
    let x = coordinate_jets(p, order);
    let a = crate::expr::parse(alpha, &COORDS.map(String::from)).unwrap().eval_jet(&COORDS.map(String::from), &x).unwrap();
    let rot = rotate_pair(&pair, &a);
    let (z0, y0, g0) = frame_data(&pair, reading);
    let (z1, y1, g1) = frame_data(&rot, reading);
    let dz = z0.iter().zip(&z1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let dy = y1.iter().map(|v| span_distance(v, &y0)).fold(0.0, f64::max);
    let dg = (&g0 - &g1).abs().max();
    dz.max(dy).max(dg)
}

#[test]
fn frame_is_independent_of_the_horizontal_basis() {
    for m in [cartan(Some(GENERIC)), hilbert(Some(PERTURBED))] {
        for p in pt(3, 4) {
            for alpha in ["0.7", "x1", "x1*x4 + sin(x2 - x5)"] {
                let d = rotation_defect(&m, &p, alpha, Y2Reading::Corrected);
                assert!(d < 1e-8, "{alpha}: {d}");
            }
        }
    }
}

#[test]
fn stated_y2_reading_breaks_frame_independence() {
    let m = hilbert(Some(GENERIC));
    let worst = pt(3, 5).iter().map(|p| rotation_defect(&m, p, "x1*x4 + x2", Y2Reading::Stated)).fold(0.0, f64::max);
    assert!(worst > 1e-3, "{worst}");
}

#[test]
fn flatness_is_chart_invariant() {
    // The Cartan group pushed forward by u = A x + b with
    // u1 = x1 + x2, u2 = x2, u3 = x3 - x1, u4 = x4 + 1/2, u5 = x5 + x3.
    let x1 = "(x1 - x2)";
    let x2 = "x2";
    let x2f = [
        "1".to_string(),
        "1".to_string(),
        x1.to_string(),
        format!("{x1}^2/2"),
        format!("{x1}*{x2} + {x1}"),
    ];
    let frames: Vec<Vec<String>> = vec![
        vec!["1", "0", "-1", "0", "0"].into_iter().map(String::from).collect(),
        x2f.to_vec(),
        UNIT[0].iter().map(|s| s.to_string()).collect(),
        UNIT[1].iter().map(|s| s.to_string()).collect(),
        UNIT[2].iter().map(|s| s.to_string()).collect(),
    ];
    let coords = COORDS.map(String::from);
    let m = FramedManifold::parse(&coords, &frames, 2, None, StructureClass::TwoThreeFive).unwrap();
    for p in pt(4, 6) {
        let r = flatness_235(&m, &p, IDENTITY_TOL).unwrap();
        assert!(r.flat, "{r:?}");
    }
}

#[test]
fn intrinsic_grading_matches_the_canonical_frame() {
    for m in [cartan(None), cartan(Some(GENERIC)), hilbert(Some(PERTURBED)), hilbert(Some(GENERIC))] {
        for p in pt(3, 7) {
            let pair = horizontal_pair(&m, &p, 7).unwrap();
            let ig = intrinsic_grading_235(&pair).unwrap();
            assert!(ig.dpsi_residual() < 1e-10, "{}", ig.dpsi_residual());
            // a_1 = -(c_14^4 + c_15^5), a_2 = -(c_24^4 + c_25^5).
            let c = &ig.base.c;
            assert!((ig.a[0].value() + c[0][3][3].value() + c[0][4][4].value()).abs() < 1e-10);
            assert!((ig.a[1].value() + c[1][3][3].value() + c[1][4][4].value()).abs() < 1e-10);
            let f = canonical_frame_235(&pair, Y2Reading::Corrected).unwrap();
            let dz = vals(&ig.z).iter().zip(vals(&f.z)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(dz < 1e-10, "{dz}");
            let y0 = [vals(&f.y[0]), vals(&f.y[1])];
            for y in &ig.y {
                assert!(span_distance(&vals(y), &y0) < 1e-10);
            }
        }
    }
}

#[test]
fn intrinsic_grading_ignores_orientation() {
    let m = hilbert(Some(GENERIC));
    for p in pt(2, 8) {
        let pair = horizontal_pair(&m, &p, 7).unwrap();
        let swapped = [pair[1].clone(), pair[0].clone()];
        let a = intrinsic_grading_235(&pair).unwrap();
        let b = intrinsic_grading_235(&swapped).unwrap();
        let za = coords_at(&a.base, &a.z);
        let zb = coords_at(&b.base, &b.z);
        assert!(span_distance(&zb, &[za]) < 1e-10);
        let ya: Vec<Vec<f64>> = a.y.iter().map(|v| coords_at(&a.base, v)).collect();
        for v in &b.y {
            assert!(span_distance(&coords_at(&b.base, v), &ya) < 1e-10);
        }
    }
}

#[test]
fn wrong_growth_is_rejected() {
    // Engel-type: X_5 = [X_2,[X_1,X_2]] vanishes.
    let m = manifold(["1", "0", "0", "0", "0"], ["0", "1", "x1", "x1^2/2", "0"], UNIT, None);
    let pair = horizontal_pair(&m, &[0.1, 0.2, 0.3, 0.4, 0.5], 4).unwrap();
    assert!(matches!(canonical_frame_235(&pair, Y2Reading::Corrected), Err(GeomError::NonEquiregular(_))));
}


fn morimoto_at(m: &FramedManifold, p: &[f64], formula: MorimotoFormula) -> Morimoto235 {
    let pair = horizontal_pair(m, p, MORIMOTO_ORDER).unwrap();
    morimoto_235(&pair, formula).unwrap()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

#[test]
fn morimoto_is_trivial_on_the_carnot_group() {
    let m = cartan(None);
    for p in pt(2, 10) {
        let mm = morimoto_at(&m, &p, MorimotoFormula::Solved);
        assert!(max_abs(&vals(&mm.upsilon)) < 1e-14);
        let mut params = vals(&mm.params.w1);
        params.extend(vals(&mm.params.w2));
        params.extend(mm.params.a.iter().flatten().map(|x| x.value()));
        assert!(max_abs(&params) < 1e-14);
        assert!(max_abs(&vals(&mm.mu)) < 1e-14);
        let r = mm.connection.check_morimoto().unwrap();
        assert!(r.rcond < 1e-8 && r.tcond < 1e-8, "{r:?}");
        let fl = mm.connection.flatness().unwrap();
        assert!(fl.torsion < 1e-8 && fl.curvature < 1e-8, "{fl:?}");
    }
}

#[test]
fn morimoto_conditions_hold_on_curved_examples() {
    for m in [cartan(Some(PERTURBED)), hilbert(Some(GENERIC))] {
        for p in pt(2, 11) {
            let mm = morimoto_at(&m, &p, MorimotoFormula::Solved);
            let r = mm.connection.check_morimoto().unwrap();
            assert!(r.rcond < 1e-6 && r.tcond < 1e-6, "{r:?}");
            let c = mm.connection.check_compatible().unwrap();
            assert!(c.layers < 1e-12 && c.metric < 1e-12 && c.strong < 1e-9, "{c:?}");
        }
    }
}

#[test]
fn solved_grading_relations() {
    for m in [cartan(Some(PERTURBED)), hilbert(Some(GENERIC))] {
        for p in pt(2, 12) {
            let mm = morimoto_at(&m, &p, MorimotoFormula::Solved);
            let ups = vals(&mm.upsilon);
            assert!(max_abs(&ups) > 1e-4);
            let w1 = vals(&mm.params.w1);
            let w2 = vals(&mm.params.w2);
            for k in 0..2 {
                assert!((w1[k] - ups[k]).abs() < 1e-10, "{w1:?} {ups:?}");
                assert!((w2[k] - 0.75 * ups[k]).abs() < 1e-10, "{w2:?} {ups:?}");
            }
            // Tcond(Z, X) reduces to μ(X) = ⟨[Z, JX], Z⟩, and that bracket
            // component is ⟨J(W_1 - W_2), X⟩.
            let g = &mm.connection.graded.frame;
            let mu = vals(&mm.mu);
            assert!((mu[0] - g.c[2][1][2].value()).abs() < 1e-10);
            assert!((mu[1] + g.c[2][0][2].value()).abs() < 1e-10);
            let jd = vals(&j_e(&sub(&mm.params.w1, &mm.params.w2)));
            assert!((mu[0] - jd[0]).abs() < 1e-10 && (mu[1] - jd[1]).abs() < 1e-10, "{mu:?} {jd:?}");
            // Rcond(Z): 8μ(Z) = 4dμ_{-1}(X_1, X_2) + ⟨R^0(X_1, X_2) - T^0_Z, D⟩.
            let r0 = mm.base.curvature().unwrap();
            let t0 = mm.base.torsion();
            let d = generator();
            let mut pair_d = 0.0;
            for k in 0..5 {
                for l in 0..5 {
                    pair_d += d[(l, k)] * (r0[0][1][k][l].value() - t0[2][k][l].value());
                }
            }
            let dmu = g.apply(0, &mm.mu[1]).value()
                - g.apply(1, &mm.mu[0]).value()
                - (g.c[0][1][0].value() * mu[0] + g.c[0][1][1].value() * mu[1]);
            assert!((8.0 * mu[2] - 4.0 * dmu - pair_d).abs() < 1e-9, "{} {}", 8.0 * mu[2], 4.0 * dmu + pair_d);
        }
    }
}

#[test]
fn stated_formulas_fail_the_normalization() {
    for m in [cartan(Some(PERTURBED)), hilbert(Some(GENERIC))] {
        let p = &pt(1, 13)[0];
        let mm = morimoto_at(&m, p, MorimotoFormula::Stated);
        let r = mm.connection.check_morimoto().unwrap();
        assert!(r.rcond.max(r.tcond) > 1e-3, "{r:?}");
    }
    let mm = morimoto_at(&cartan(None), &pt(1, 13)[0], MorimotoFormula::Stated);
    let r = mm.connection.check_morimoto().unwrap();
    assert!(r.rcond < 1e-12 && r.tcond < 1e-12);
}

#[test]
fn offset_mu_fails_the_normalization() {
    for m in [cartan(None), hilbert(Some(GENERIC))] {
        let p = &pt(1, 14)[0];
        let mm = morimoto_at(&m, p, MorimotoFormula::Solved);
        let mu: Vec<Jet> = mm.mu.iter().map(|x| x.add_scalar(0.1)).collect();
        let r = add_mu(&mm.base, &mu).check_morimoto().unwrap();
        assert!(r.rcond.max(r.tcond) > 1e-3, "{r:?}");
    }
}

/// Coordinate components at the base point of the Morimoto grading data:
/// `W_1`, `W_2`, `𝒜X_1`, `𝒜X_2` for the fields of the original pair.
fn grading_data(mm: &Morimoto235, swapped: bool) -> Vec<Vec<f64>> {
    let ig = &mm.intrinsic;
    let e = |u: &[Jet]| coords_at(&ig.base, &embed(u));
    let a = &mm.params.a;
    let col = |b: usize| -> Vec<Jet> { vec![a[0][b].clone(), a[1][b].clone()] };
    let (c0, c1) = if swapped { (col(1), col(0)) } else { (col(0), col(1)) };
    vec![e(&mm.params.w1), e(&mm.params.w2), e(&c0), e(&c1)]
}

fn vec_dist(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs())).fold(0.0, f64::max)
}

#[test]
fn morimoto_grading_ignores_orientation() {
    let m = hilbert(Some(GENERIC));
    let p = &pt(1, 15)[0];
    let pair = horizontal_pair(&m, p, MORIMOTO_ORDER).unwrap();
    let swapped = [pair[1].clone(), pair[0].clone()];
    let a = morimoto_235(&pair, MorimotoFormula::Solved).unwrap();
    let b = morimoto_235(&swapped, MorimotoFormula::Solved).unwrap();
    let d = vec_dist(&grading_data(&a, false), &grading_data(&b, true));
    assert!(d < 1e-10, "{d}");
    // μD is unchanged: μ flips with D on the horizontal part.
    let (ma, mb) = (vals(&a.mu), vals(&b.mu));
    assert!((ma[0] + mb[1]).abs() < 1e-10 && (ma[1] + mb[0]).abs() < 1e-10, "{ma:?} {mb:?}");
    assert!((ma[2] - mb[2]).abs() < 1e-10, "{ma:?} {mb:?}");
}

#[test]
fn morimoto_grading_is_frame_independent() {
    let m = cartan(Some(GENERIC));
    let p = &pt(1, 16)[0];
    let pair = horizontal_pair(&m, p, MORIMOTO_ORDER).unwrap();
    let x = coordinate_jets(p, MORIMOTO_ORDER);
    let coords = COORDS.map(String::from);
    let alpha = crate::expr::parse("x1*x4 + sin(x2 - x5)", &coords).unwrap().eval_jet(&coords, &x).unwrap();
    let rot = rotate_pair(&pair, &alpha);
    let a = morimoto_235(&pair, MorimotoFormula::Solved).unwrap();
    let b = morimoto_235(&rot, MorimotoFormula::Solved).unwrap();
    let fields = |mm: &Morimoto235| -> Vec<Vec<f64>> {
        let g = &mm.connection.graded.frame;
        (2..5).map(|i| g.fields[i].iter().map(|x| x.value()).collect::<Vec<f64>>()).collect()
    };
    let (fa, fb) = (fields(&a), fields(&b));
    let dz = fa[0].iter().zip(&fb[0]).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    assert!(dz < 1e-8, "{dz}");
    for v in &fb[1..] {
        assert!(span_distance(v, &fa[1..]) < 1e-8);
    }
    let e = |mm: &Morimoto235, w: &[Jet]| coords_at(&mm.intrinsic.base, &embed(w));
    let dw = vec_dist(&[e(&a, &a.params.w1), e(&a, &a.params.w2)], &[e(&b, &b.params.w1), e(&b, &b.params.w2)]);
    assert!(dw < 1e-8, "{dw}");
}

#[test]
fn flat_inputs_agree_with_the_canonical_frame() {
    let m = cartan(None);
    let p = &pt(1, 17)[0];
    let pair = horizontal_pair(&m, p, MORIMOTO_ORDER).unwrap();
    let x = coordinate_jets(p, MORIMOTO_ORDER);
    let rot = rotate_pair(&pair, &x[0]);
    let mm = morimoto_235(&rot, MorimotoFormula::Solved).unwrap();
    let f = canonical_frame_235(&rot, Y2Reading::Corrected).unwrap();
    let th = connection_235(&f);
    for i in 0..5 {
        let (u, v) = (mm.connection.graded.frame.fields[i].iter().map(|x| x.value()).collect::<Vec<f64>>(), th.graded.frame.fields[i].iter().map(|x| x.value()).collect::<Vec<f64>>());
        let d = u.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < 1e-10, "field {i}: {d}");
    }
    let mut d = 0.0f64;
    for (a, b) in mm.connection.gamma.iter().flatten().flatten().zip(th.gamma.iter().flatten().flatten()) {
        d = d.max((a.value() - b.value()).abs());
    }
    assert!(d < 1e-10, "{d}");
}

fn q_values(ig: &IntrinsicGrading, params: &GradingParams) -> [[[f64; 2]; 2]; 2] {
    let q = q_map(ig, params).unwrap();
    let mut out = [[[0.0; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for k in 0..2 {
                out[a][b][k] = q[a][b][k].value();
            }
        }
    }
    out
}

/// `q_X Y` for arbitrary constant-coefficient `X, Y`.
fn q_apply(q: &[[[f64; 2]; 2]; 2], x: [f64; 2], y: [f64; 2]) -> [f64; 2] {
    let mut r = [0.0; 2];
    for a in 0..2 {
        for b in 0..2 {
            for k in 0..2 {
                r[k] += x[a] * y[b] * q[a][b][k];
            }
        }
    }
    r
}

fn jv(x: [f64; 2]) -> [f64; 2] {
    [-x[1], x[0]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[test]
fn q_map_identities() {
    let e = [[1.0, 0.0], [0.0, 1.0]];
    for m in [cartan(Some(PERTURBED)), hilbert(Some(GENERIC))] {
        for p in pt(2, 18) {
            let pair = horizontal_pair(&m, &p, 8).unwrap();
            let ig = intrinsic_grading_235(&pair).unwrap();
            let ups = vals(&ig.upsilon());
            let jups = jv([ups[0], ups[1]]);
            let q = q_values(&ig, &GradingParams::zero(ig.like()));
            let mut worst = 0.0f64;
            let mut check = |v: f64| worst = worst.max(v.abs());
            let mut tr = [0.0; 2];
            for x in e {
                // q1 and q3.
                check(e.iter().map(|&b| dot(q_apply(&q, x, b), b)).sum::<f64>());
                check(e.iter().map(|&b| dot(q_apply(&q, x, b), jv(b))).sum::<f64>() - 2.0 * dot(jups, x));
                let qx = q_apply(&q, x, x);
                tr = [tr[0] + qx[0], tr[1] + qx[1]];
                for y in e {
                    // q2 and the symmetry rule.
                    let lhs = q_apply(&q, x, y);
                    let flip = q_apply(&q, jv(y), jv(x));
                    let sym = q_apply(&q, y, x);
                    let jxy = dot(jv(x), y);
                    for k in 0..2 {
                        check(lhs[k] + flip[k]);
                        check(lhs[k] - sym[k] + 2.0 * jxy * jups[k]);
                    }
                    // q5.
                    let a = q_apply(&q, x, jv(y));
                    let b = jv(lhs);
                    for k in 0..2 {
                        check(a[k] + b[k] + 2.0 * dot(jups, x) * y[k]);
                    }
                    // q4, with ⟨q_X Y_2, Y_1⟩ in the second term.
                    for z in e {
                        check(dot(q_apply(&q, x, y), z) - dot(q_apply(&q, x, z), y) - 2.0 * dot(jups, x) * dot(jv(y), z));
                    }
                }
            }
            check(tr[0]);
            check(tr[1]);
            assert!(worst < 1e-8, "{worst}");
        }
    }
}

#[test]
fn tau_is_tensorial_and_base_torsion_matches() {
    let m = hilbert(Some(GENERIC));
    let coords = COORDS.map(String::from);
    for p in pt(2, 19) {
        let mm = morimoto_at(&m, &p, MorimotoFormula::Solved);
        let g = &mm.base.graded;
        let x = coordinate_jets(&p, g.frame.order());
        let f = crate::expr::parse("exp(x1 - x3*x5) + x2", &coords).unwrap().eval_jet(&coords, &x).unwrap();
        let t0 = mm.base.torsion();
        for i in 2..5 {
            let v = basis_vec(&f, 5, i);
            let t = tau(g, &v);
            let tf = tau(g, &scal(&f, &v));
            for k in 0..2 {
                for j in 0..2 {
                    assert!((tf[k][j].value() - f.value() * t[k][j].value()).abs() < 1e-12);
                    // ⟨T^0(V, X_j), X_k⟩ = ⟨τ_V X_j, X_k⟩.
                    assert!((t0[i][j][k].value() - t[k][j].value()).abs() < 1e-10);
                }
            }
        }
        // T^0(X_1, X_2) is normal to E and Y, with Z component -⟨JX_1, X_2⟩ = -1.
        for k in 0..5 {
            let want = if k == 2 { -1.0 } else { 0.0 };
            assert!((t0[0][1][k].value() - want).abs() < 1e-10, "{k}: {}", t0[0][1][k].value());
        }
    }
}


#[test]
fn low_order_is_an_error() {
    let pair = horizontal_pair(&cartan(None), &[0.1; 5], MORIMOTO_ORDER - 1).unwrap();
    assert!(matches!(morimoto_235(&pair, MorimotoFormula::Solved), Err(GeomError::OrderExhausted(_))));
}
