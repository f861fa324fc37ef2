use super::*;
use proptest::prelude::*;

const XYZ: [&str; 3] = ["x", "y", "z"];

fn p(x: f64, y: f64, z: f64) -> Point {
    Point::new(&XYZ, &[x, y, z])
}

#[test]
fn parse_and_evaluate_difference() {
    let e = parse("x*y - z^2", &XYZ).unwrap();
    assert_eq!(e.evaluate(&p(1.0, 2.0, 3.0)).unwrap(), -7.0);
}

#[test]
fn syntax_error_reports_offset() {
    match parse("x +", &XYZ) {
        Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 3),
        other => panic!("unexpected {:?}", other),
    }
}

#[test]
fn unknown_identifier_and_bad_exponent() {
    assert!(matches!(parse("x + w", &XYZ), Err(ExprError::UnknownIdentifier { offset: 4, .. })));
    assert!(matches!(parse("x^1.5", &XYZ), Err(ExprError::NonIntegerExponent { .. })));
    assert!(matches!(parse("x^y", &XYZ), Err(ExprError::NonIntegerExponent { .. })));
    assert!(parse("x", &["x", "x"]).is_err());
}

#[test]
fn sin_over_two_vanishes_at_origin() {
    let e = parse("sin(x)/2", &["x"]).unwrap();
    assert_eq!(e.evaluate(&Point::new(&["x"], &[0.0])).unwrap(), 0.0);
}

#[test]
fn constants_fold_exactly() {
    let e = parse("1/2", &["x"]).unwrap();
    assert_eq!(e.evaluate(&Point::new(&["x"], &[7.0])).unwrap(), 0.5);
    let s = parse("1/3 + 1/6 - 0.5", &["x"]).unwrap().simplify();
    assert!(s.is_zero());
    let e = parse("exp(0)+1", &["x"]).unwrap();
    assert_eq!(e.evaluate(&Point::new(&["x"], &[0.3])).unwrap(), 2.0);
    assert_eq!(parse("exp(0)+1", &["x"]).unwrap().simplify(), Expr::int(2));
}

#[test]
fn evaluation_errors() {
    let e = parse("x/y", &XYZ).unwrap();
    assert_eq!(e.evaluate(&p(1.0, 0.0, 0.0)), Err(ExprError::DivisionByZero));
    assert!(matches!(parse("log(x)", &XYZ).unwrap().evaluate(&p(-1.0, 0.0, 0.0)), Err(ExprError::Domain { .. })));
    assert!(matches!(parse("sqrt(x)", &XYZ).unwrap().evaluate(&p(-1.0, 0.0, 0.0)), Err(ExprError::Domain { .. })));
    let e = parse("x + z", &XYZ).unwrap();
    assert!(matches!(e.evaluate(&Point::new(&["x", "y"], &[1.0, 2.0])), Err(ExprError::MissingCoordinate(_))));
}

#[test]
fn derivative_of_product_is_other_factor() {
    let e = parse("x*y", &XYZ).unwrap();
    assert_eq!(e.differentiate("x"), Expr::var(1, "y"));
    let s = parse("sin(x)", &XYZ).unwrap().differentiate("x");
    assert_eq!(s.evaluate(&p(0.0, 0.0, 0.0)).unwrap(), 1.0);
    assert!(parse("y*z + 3", &XYZ).unwrap().differentiate("x").is_zero());
}

#[test]
fn identical_subtrees_are_shared() {
    let a = parse("sin(x*y) + 1", &XYZ).unwrap();
    let b = parse("sin(x*y) + 1", &XYZ).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.ptr_id(), b.ptr_id());
}

#[test]
fn identical_terms_collect() {
    let e = parse("x*y + 2*y*x - 3*x*y", &XYZ).unwrap().simplify();
    assert!(e.is_zero());
    let e = parse("x*x*x/x", &XYZ).unwrap().simplify();
    assert_eq!(e, Expr::pow(Expr::var(0, "x"), 2));
}

#[test]
fn float_literals_round_trip() {
    let e = Expr::add(vec![Expr::float(0.1), Expr::mul(vec![Expr::float(-2.5e-7), Expr::var(0, "x")])]);
    let back = parse(&e.to_string(), &XYZ).unwrap();
    let pt = p(0.7, 0.0, 0.0);
    assert_eq!(back.evaluate(&pt).unwrap(), e.evaluate(&pt).unwrap());
}

#[test]
fn jet_evaluation_matches_symbolic_derivatives() {
    let e = parse("exp(x*y)/(1 + z^2) + sqrt(2 + sin(z))", &XYZ).unwrap();
    let names: Vec<String> = XYZ.iter().map(|s| s.to_string()).collect();
    let pt = [0.3, -0.2, 0.5];
    let jets = crate::jet::coordinate_jets(&pt, 3);
    let j = e.eval_jet(&names, &jets).unwrap();
    let point = p(pt[0], pt[1], pt[2]);
    assert!((j.value() - e.evaluate(&point).unwrap()).abs() < 1e-14);
    let dxz = e.differentiate("x").differentiate("z").evaluate(&point).unwrap();
    assert!((j.deriv(0).deriv(2).value() - dxz).abs() < 1e-12);
}

/// Random expression trees over x, y, z with a safe evaluation domain.
fn arb_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        Just("z".to_string()),
        (1i64..9).prop_map(|n| n.to_string()),
        (1i64..9, 2i64..7).prop_map(|(a, b)| format!("{}/{}", a, b)),
    ];
    leaf.prop_recursive(4, 32, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({}) + ({})", a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({}) - ({})", a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({})*({})", a, b)),
            (inner.clone(), 0u32..4).prop_map(|(a, n)| format!("({})^{}", a, n)),
            inner.clone().prop_map(|a| format!("sin({})", a)),
            inner.clone().prop_map(|a| format!("exp(({})/8)", a)),
            inner.clone().prop_map(|a| format!("({})/(2 + cos({}))", a, a)),
            inner.prop_map(|a| format!("sqrt(1 + ({})^2)", a)),
        ]
    })
}

fn arb_point() -> impl Strategy<Value = (f64, f64, f64)> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn simplify_preserves_value(src in arb_expr(), pts in proptest::collection::vec(arb_point(), 5)) {
        let e = parse(&src, &XYZ).unwrap();
        let s = e.simplify();
        for (x, y, z) in pts {
            let pt = p(x, y, z);
            let a = e.evaluate(&pt).unwrap();
            let b = s.evaluate(&pt).unwrap();
            prop_assert!(close(b, a, 1e-12), "{} vs {} for {}", a, b, src);
        }
    }

    #[test]
    fn simplify_is_idempotent(src in arb_expr()) {
        let s = parse(&src, &XYZ).unwrap().simplify();
        prop_assert_eq!(s.simplify(), s);
    }

    #[test]
    fn printed_form_reparses(src in arb_expr(), pts in proptest::collection::vec(arb_point(), 5)) {
        for e in [parse(&src, &XYZ).unwrap(), parse(&src, &XYZ).unwrap().simplify()] {
            let back = parse(&e.to_string(), &XYZ).unwrap();
            for &(x, y, z) in &pts {
                let pt = p(x, y, z);
                prop_assert!(close(back.evaluate(&pt).unwrap(), e.evaluate(&pt).unwrap(), 1e-12));
            }
        }
    }

    #[test]
    fn derivative_matches_centered_difference(src in arb_expr(), (x, y, z) in arb_point()) {
        let e = parse(&src, &XYZ).unwrap();
        let d = e.differentiate("x");
        let h = 1e-5;
        let fd = (e.evaluate(&p(x + h, y, z)).unwrap() - e.evaluate(&p(x - h, y, z)).unwrap()) / (2.0 * h);
        let exact = d.evaluate(&p(x, y, z)).unwrap();
        prop_assert!((exact - fd).abs() <= 1e-6 * (1.0 + exact.abs()), "{} vs {} for {}", exact, fd, src);
    }

    #[test]
    fn differentiate_is_linear(a in arb_expr(), b in arb_expr(), c in -5i64..5) {
        let ea = parse(&a, &XYZ).unwrap();
        let eb = parse(&b, &XYZ).unwrap();
        let combo = Expr::add(vec![ea.clone(), Expr::mul(vec![Expr::int(c), eb.clone()])]);
        let lhs = combo.differentiate("y").simplify();
        let rhs = Expr::add(vec![ea.differentiate("y"), Expr::mul(vec![Expr::int(c), eb.differentiate("y")])]).simplify();
        prop_assert_eq!(lhs, rhs);
    }
}
