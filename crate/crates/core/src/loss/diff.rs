use super::LossExpr;

fn constant(e: &LossExpr) -> Option<f64> {
    match e {
        LossExpr::Const(c) => Some(*c),
        _ => None,
    }
}

fn add(a: LossExpr, b: LossExpr) -> LossExpr {
    match (constant(&a), constant(&b)) {
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        (Some(x), Some(y)) => LossExpr::Const(x + y),
        _ => LossExpr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: LossExpr, b: LossExpr) -> LossExpr {
    match (constant(&a), constant(&b)) {
        (_, Some(0.0)) => a,
        (Some(0.0), _) => neg(b),
        (Some(x), Some(y)) => LossExpr::Const(x - y),
        _ => LossExpr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: LossExpr, b: LossExpr) -> LossExpr {
    match (constant(&a), constant(&b)) {
        (Some(x), _) | (_, Some(x)) if x == 0.0 => LossExpr::Const(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        (Some(x), Some(y)) => LossExpr::Const(x * y),
        _ => LossExpr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: LossExpr, b: LossExpr) -> LossExpr {
    match (constant(&a), constant(&b)) {
        (Some(0.0), _) => LossExpr::Const(0.0),
        (_, Some(1.0)) => a,
        _ => LossExpr::Div(Box::new(a), Box::new(b)),
    }
}

fn neg(a: LossExpr) -> LossExpr {
    match a {
        LossExpr::Const(c) => LossExpr::Const(-c),
        LossExpr::Neg(inner) => *inner,
        other => LossExpr::Neg(Box::new(other)),
    }
}

fn pow(a: LossExpr, e: f64) -> LossExpr {
    if e == 1.0 {
        a
    } else if e == 0.0 {
        LossExpr::Const(1.0)
    } else {
        LossExpr::Pow(Box::new(a), e)
    }
}

/// Symbolic derivative with respect to `p`, lightly simplified. Any subtree
/// that does not mention `p` differentiates to exactly `Const(0)`.
pub fn differentiate(expr: &LossExpr) -> LossExpr {
    if !expr.contains_p() {
        return LossExpr::Const(0.0);
    }
    match expr {
        LossExpr::VarP => LossExpr::Const(1.0),
        LossExpr::Const(_) | LossExpr::VarY | LossExpr::Sign(_) => LossExpr::Const(0.0),
        LossExpr::Add(a, b) => add(differentiate(a), differentiate(b)),
        LossExpr::Sub(a, b) => sub(differentiate(a), differentiate(b)),
        LossExpr::Mul(a, b) => add(
            mul(differentiate(a), (**b).clone()),
            mul((**a).clone(), differentiate(b)),
        ),
        LossExpr::Div(a, b) => {
            // (a'b - ab') / b^2
            let numerator = sub(
                mul(differentiate(a), (**b).clone()),
                mul((**a).clone(), differentiate(b)),
            );
            div(numerator, pow((**b).clone(), 2.0))
        }
        LossExpr::Neg(a) => neg(differentiate(a)),
        LossExpr::Pow(a, e) => {
            if *e == 0.0 {
                return LossExpr::Const(0.0);
            }
            mul(
                mul(LossExpr::Const(*e), pow((**a).clone(), e - 1.0)),
                differentiate(a),
            )
        }
        LossExpr::Log(a) => div(differentiate(a), (**a).clone()),
        LossExpr::Exp(a) => mul(expr.clone(), differentiate(a)),
        LossExpr::Abs(a) => mul(LossExpr::Sign(a.clone()), differentiate(a)),
    }
}
