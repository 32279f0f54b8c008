use super::{BinOp, Expr, Func, Var};

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(n) if *n == v)
}

// Constructors with light folding so derivatives stay readable.

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if a.is_zero() => b,
        _ if b.is_zero() => a,
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
        _ => Expr::bin(BinOp::Add, a, b),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if b.is_zero() => a,
        _ if a.is_zero() => neg(b),
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
        _ => Expr::bin(BinOp::Sub, a, b),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if a.is_zero() || b.is_zero() => Expr::Num(0.0),
        _ if is_num(&a, 1.0) => b,
        _ if is_num(&b, 1.0) => a,
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
        _ => Expr::bin(BinOp::Mul, a, b),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if a.is_zero() {
        return Expr::Num(0.0);
    }
    if is_num(&b, 1.0) {
        return a;
    }
    Expr::bin(BinOp::Div, a, b)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    if is_num(&b, 1.0) {
        return a;
    }
    if b.is_zero() {
        return Expr::Num(1.0);
    }
    Expr::bin(BinOp::Pow, a, b)
}

impl Expr {
    /// Exact symbolic derivative with respect to `var`.
    pub fn diff(&self, var: Var) -> Expr {
        match self {
            Expr::Num(_) | Expr::Pi => Expr::Num(0.0),
            Expr::Var(v) => Expr::Num(if *v == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(var)),
            Expr::Call(f, a) => {
                let da = a.diff(var);
                if da.is_zero() {
                    return Expr::Num(0.0);
                }
                let a = (**a).clone();
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, a),
                    Func::Cos => neg(Expr::call(Func::Sin, a)),
                    Func::Exp => Expr::call(Func::Exp, a),
                    Func::Sqrt => div(Expr::Num(0.5), Expr::call(Func::Sqrt, a)),
                    Func::Ln => div(Expr::Num(1.0), a),
                };
                mul(outer, da)
            }
            Expr::Bin(op, l, r) => {
                let (dl, dr) = (l.diff(var), r.diff(var));
                let (l, r) = ((**l).clone(), (**r).clone());
                match op {
                    BinOp::Add => add(dl, dr),
                    BinOp::Sub => sub(dl, dr),
                    BinOp::Mul => add(mul(dl, r.clone()), mul(l, dr)),
                    BinOp::Div => {
                        // (l/r)' = l'/r - l r'/r^2
                        let first = div(dl, r.clone());
                        if dr.is_zero() {
                            first
                        } else {
                            sub(first, div(mul(l, dr), pow(r, Expr::Num(2.0))))
                        }
                    }
                    BinOp::Pow => {
                        if !r.depends_on(var) {
                            // r l^(r-1) l'
                            let lowered = pow(l, sub(r.clone(), Expr::Num(1.0)));
                            mul(mul(r, lowered), dl)
                        } else {
                            // l^r (r' ln l + r l'/l)
                            let this = pow(l.clone(), r.clone());
                            let inner = add(
                                mul(dr, Expr::call(Func::Ln, l.clone())),
                                div(mul(r, dl), l),
                            );
                            mul(this, inner)
                        }
                    }
                }
            }
        }
    }
}
