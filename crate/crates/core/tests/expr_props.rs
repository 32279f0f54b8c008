use hardbc_core::expr::{parse, BinOp, Bindings, Expr, Func, Var};
use proptest::prelude::*;

// Well-conditioned random expressions on [-1, 1]^2: bounded magnitudes, no poles.
fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-2.0f64..2.0).prop_map(Expr::Num),
        Just(Expr::Var(Var::X)),
        Just(Expr::Var(Var::Y)),
        Just(Expr::Pi),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::bin(BinOp::Add, a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::bin(BinOp::Sub, a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::bin(BinOp::Mul, a, b)),
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            inner.clone().prop_map(|a| Expr::call(Func::Sin, a)),
            inner.clone().prop_map(|a| Expr::call(Func::Cos, a)),
            // exp and sqrt of bounded, positive arguments
            inner.clone().prop_map(|a| Expr::call(Func::Exp, Expr::call(Func::Sin, a))),
            inner.clone().prop_map(|a| {
                let sq = Expr::bin(BinOp::Mul, a.clone(), a);
                Expr::call(Func::Sqrt, Expr::bin(BinOp::Add, Expr::Num(1.0), sq))
            }),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| {
                let den = Expr::bin(BinOp::Add, Expr::Num(2.0), Expr::call(Func::Cos, b));
                Expr::bin(BinOp::Div, a, den)
            }),
            inner.clone().prop_map(|a| Expr::bin(BinOp::Pow, a, Expr::Num(2.0))),
            inner.prop_map(|a| {
                let base = Expr::bin(BinOp::Add, Expr::Num(2.0), Expr::call(Func::Sin, a));
                Expr::bin(BinOp::Pow, base, Expr::Var(Var::Y))
            }),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn diff_matches_central_differences(e in arb_expr(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        for var in [Var::X, Var::Y] {
            let d = e.diff(var);
            let step = 1e-6;
            let at = |dx: f64, dy: f64| e.eval(&Bindings::xy(x + dx, y + dy)).unwrap();
            let (dx, dy) = if var == Var::X { (step, 0.0) } else { (0.0, step) };
            let fd = (at(dx, dy) - at(-dx, -dy)) / (2.0 * step);
            let exact = d.eval(&Bindings::xy(x, y)).unwrap();
            let scale = 1.0 + exact.abs() + at(0.0, 0.0).abs();
            prop_assert!((exact - fd).abs() <= 1e-6 * scale,
                "{var}: d/d{var} of {e} = {exact}, fd {fd}");
        }
    }

    #[test]
    fn print_parse_round_trip(e in arb_expr(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let back = parse(&e.to_string()).unwrap();
        let b = Bindings::xy(x, y);
        prop_assert_eq!(back.eval(&b).unwrap().to_bits(), e.eval(&b).unwrap().to_bits());
    }

    #[test]
    fn parser_never_panics(s in "[-+*/^()xyalphbetsincoqrp0-9. eE$,]{0,24}") {
        let _ = parse(&s);
    }
}

#[test]
fn malformed_corpus_is_rejected() {
    let corpus = [
        "", " ", "(", ")", "()", "x +", "+", "* x", "x * * y", "2^", "^2", "sin", "sin()",
        "sin(x", "sin x", "cos(x))", "x y", "1 2", "1..2", ".", "1e", "1e+", "e5", "x(2)",
        "alpha(x)", "pi(1)", "foo", "sinh(x)", "tan(x)", "log(x)", "z", "x $ y", "x,y",
        "x = 1", "[x]", "{x}", "2 ^ ^ 3", "((x)", "x)", "√x", "x²", "1/", "/1", "--", "- ",
        "sqrt(x,y)", "exp(", "pi x", "alpha beta",
    ];
    for s in corpus {
        assert!(parse(s).is_err(), "accepted malformed input {s:?}");
    }
}

#[test]
fn derived_darcy_source_matches_closed_form() {
    // -div(a grad u) derived symbolically, against the closed form.
    let u = parse("sin(alpha*x)*cos(beta*y)").unwrap();
    let a = parse("sin(alpha*x)*sin(beta*y)").unwrap();
    let flux_x = Expr::bin(BinOp::Mul, a.clone(), u.diff(Var::X));
    let flux_y = Expr::bin(BinOp::Mul, a, u.diff(Var::Y));
    let div = Expr::bin(BinOp::Add, flux_x.diff(Var::X), flux_y.diff(Var::Y));
    let f = Expr::Neg(Box::new(div));
    let closed = parse(
        "-0.5*sin(2*beta*y)*(alpha^2*cos(2*alpha*x) + beta^2*cos(2*alpha*x) - beta^2)",
    )
    .unwrap();
    for i in 0..10 {
        for j in 0..10 {
            for &(al, be) in &[(1.0, 1.0), (2.0, 3.0), (5.5, 1.25), (9.9, 7.0), (3.0, 3.0)] {
                let b = Bindings::xy(i as f64 / 9.0, j as f64 / 9.0)
                    .with(Var::Alpha, al)
                    .with(Var::Beta, be);
                let got = f.eval(&b).unwrap();
                let want = closed.eval(&b).unwrap();
                assert!((got - want).abs() <= 1e-10 * (1.0 + want.abs()), "{got} vs {want}");
            }
        }
    }
}
