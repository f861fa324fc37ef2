//! Infix printing whose output re-parses to an equal-valued expression.

use num_traits::{One, Signed};

use super::{Expr, Kind};

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const ATOM: u8 = 4;

pub fn to_string(e: &Expr) -> String {
    let mut out = String::new();
    write(e, 0, &mut out);
    out
}

fn precedence(e: &Expr) -> u8 {
    match e.kind() {
        Kind::Rational(r) => {
            if r.is_negative() || !r.denom().is_one() {
                PRODUCT
            } else {
                ATOM
            }
        }
        Kind::Float(_) | Kind::Var { .. } | Kind::Func(..) => ATOM,
        Kind::Neg(_) => UNARY,
        Kind::Add(_) => SUM,
        Kind::Mul(_) | Kind::Div(..) => PRODUCT,
        Kind::Pow(..) => UNARY,
    }
}

fn write(e: &Expr, min: u8, out: &mut String) {
    if precedence(e) < min {
        out.push('(');
        write(e, 0, out);
        out.push(')');
        return;
    }
    match e.kind() {
        Kind::Rational(r) => {
            if r.denom().is_one() {
                out.push_str(&r.numer().to_string());
            } else {
                out.push_str(&format!("{}/{}", r.numer(), r.denom()));
            }
        }
        Kind::Float(b) => {
            let v = f64::from_bits(*b);
            let s = format!("{:e}", v.abs());
            if v.is_sign_negative() {
                out.push_str(&format!("(-{})", s));
            } else {
                out.push_str(&s);
            }
        }
        Kind::Var { name, .. } => out.push_str(name),
        Kind::Neg(a) => {
            out.push('-');
            write(a, UNARY, out);
        }
        Kind::Add(xs) => {
            for (i, x) in xs.iter().enumerate() {
                if i == 0 {
                    write(x, SUM, out);
                    continue;
                }
                match negated(x) {
                    Some(pos) => {
                        out.push_str(" - ");
                        write(&pos, PRODUCT, out);
                    }
                    None => {
                        out.push_str(" + ");
                        write(x, PRODUCT, out);
                    }
                }
            }
        }
        Kind::Mul(xs) => {
            let mut first = true;
            for x in xs {
                if let Kind::Pow(b, n) = x.kind() {
                    if *n < 0 && !first {
                        out.push_str(" / ");
                        if *n == -1 {
                            write(b, ATOM, out);
                        } else {
                            write(b, ATOM, out);
                            out.push_str(&format!("^{}", -n));
                        }
                        continue;
                    }
                }
                if !first {
                    out.push('*');
                }
                write(x, UNARY, out);
                first = false;
            }
        }
        Kind::Div(a, b) => {
            write(a, PRODUCT, out);
            out.push_str(" / ");
            write(b, UNARY, out);
        }
        Kind::Pow(a, n) => {
            write(a, ATOM, out);
            if *n < 0 {
                out.push_str(&format!("^(-{})", -n));
            } else {
                out.push_str(&format!("^{}", n));
            }
        }
        Kind::Func(f, a) => {
            out.push_str(f.name());
            out.push('(');
            write(a, 0, out);
            out.push(')');
        }
    }
}

/// For a product with a negative leading rational, returns the product
/// with the sign flipped.
fn negated(e: &Expr) -> Option<Expr> {
    match e.kind() {
        Kind::Mul(xs) => {
            let r = xs[0].as_rational()?;
            if !r.is_negative() {
                return None;
            }
            let mut fs = xs.clone();
            fs[0] = Expr::rational(-r.clone());
            Some(Expr::mul(fs))
        }
        Kind::Rational(r) if r.is_negative() => Some(Expr::rational(-r.clone())),
        _ => None,
    }
}
