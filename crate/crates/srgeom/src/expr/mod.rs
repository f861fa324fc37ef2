//! Symbolic scalar expressions over named chart coordinates.
//!
//! Nodes are hash-consed: structurally equal expressions share one
//! allocation, so equality is a pointer comparison and memoized passes
//! (differentiation, evaluation) visit each distinct subtree once.

mod parse;
mod print;

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex, OnceLock, Weak};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::jet::{Jet, JetSpace};

pub use parse::parse;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("non-integer exponent at offset {offset}")]
    NonIntegerExponent { offset: usize },
    #[error("invalid coordinate list: {0}")]
    Coordinates(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("{func} of negative argument {value}")]
    Domain { func: &'static str, value: f64 },
    #[error("missing coordinate `{0}`")]
    MissingCoordinate(String),
}

/// Elementary functions accepted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
    Tan,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub enum Kind {
    Rational(BigRational),
    /// Stored as raw bits so that hashing and equality are exact.
    Float(u64),
    Var { index: usize, name: Arc<str> },
    Neg(Expr),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Div(Expr, Expr),
    Pow(Expr, i64),
    Func(Func, Expr),
}

#[derive(Debug)]
pub struct Node {
    kind: Kind,
    hash: u64,
}

/// Shared handle to an interned expression node.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}
impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({})", self)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print::to_string(self))
    }
}

fn shallow_eq(a: &Kind, b: &Kind) -> bool {
    match (a, b) {
        (Kind::Rational(x), Kind::Rational(y)) => x == y,
        (Kind::Float(x), Kind::Float(y)) => x == y,
        (Kind::Var { index: i, name: n }, Kind::Var { index: j, name: m }) => i == j && n == m,
        (Kind::Neg(x), Kind::Neg(y)) => x == y,
        (Kind::Add(x), Kind::Add(y)) | (Kind::Mul(x), Kind::Mul(y)) => x == y,
        (Kind::Div(a1, b1), Kind::Div(a2, b2)) => a1 == a2 && b1 == b2,
        (Kind::Pow(x, n), Kind::Pow(y, m)) => x == y && n == m,
        (Kind::Func(f, x), Kind::Func(g, y)) => f == g && x == y,
        _ => false,
    }
}

fn structural_hash(kind: &Kind) -> u64 {
    // FNV-1a over a tag plus child hashes; stable across runs.
    let mut h: u64 = 0xcbf29ce484222325;
    let mut mix = |v: u64| {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    match kind {
        Kind::Rational(r) => {
            mix(1);
            for d in r.numer().to_signed_bytes_le() {
                mix(d as u64);
            }
            mix(0xff);
            for d in r.denom().to_signed_bytes_le() {
                mix(d as u64);
            }
        }
        Kind::Float(bits) => {
            mix(2);
            mix(*bits);
        }
        Kind::Var { index, name } => {
            mix(3);
            mix(*index as u64);
            for b in name.bytes() {
                mix(b as u64);
            }
        }
        Kind::Neg(x) => {
            mix(4);
            mix(x.0.hash);
        }
        Kind::Add(xs) => {
            mix(5);
            xs.iter().for_each(|x| mix(x.0.hash));
        }
        Kind::Mul(xs) => {
            mix(6);
            xs.iter().for_each(|x| mix(x.0.hash));
        }
        Kind::Div(a, b) => {
            mix(7);
            mix(a.0.hash);
            mix(b.0.hash);
        }
        Kind::Pow(x, n) => {
            mix(8);
            mix(x.0.hash);
            mix(*n as u64);
        }
        Kind::Func(f, x) => {
            mix(9);
            mix(*f as u64);
            mix(x.0.hash);
        }
    }
    h
}

type Table = HashMap<u64, Vec<Weak<Node>>>;

fn table() -> &'static Mutex<Table> {
    static TABLE: OnceLock<Mutex<Table>> = OnceLock::new();
    TABLE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn intern(kind: Kind) -> Expr {
    let hash = structural_hash(&kind);
    let mut t = table().lock().unwrap_or_else(|e| e.into_inner());
    let bucket = t.entry(hash).or_default();
    bucket.retain(|w| w.strong_count() > 0);
    for w in bucket.iter() {
        if let Some(node) = w.upgrade() {
            if shallow_eq(&node.kind, &kind) {
                return Expr(node);
            }
        }
    }
    let node = Arc::new(Node { kind, hash });
    bucket.push(Arc::downgrade(&node));
    Expr(node)
}

/// Named coordinate values at which expressions are evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    names: Vec<String>,
    values: Vec<f64>,
}

impl Point {
    pub fn new<S: AsRef<str>>(names: &[S], values: &[f64]) -> Point {
        assert_eq!(names.len(), values.len(), "point names and values differ in length");
        Point {
            names: names.iter().map(|s| s.as_ref().to_string()).collect(),
            values: values.to_vec(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    fn lookup(&self, index: usize, name: &str) -> Result<f64, ExprError> {
        if self.names.get(index).map(|n| n == name).unwrap_or(false) {
            return Ok(self.values[index]);
        }
        self.get(name).ok_or_else(|| ExprError::MissingCoordinate(name.to_string()))
    }
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn rat_pow(r: &BigRational, n: i64) -> Option<BigRational> {
    if n < 0 && r.is_zero() {
        return None;
    }
    let base = if n < 0 { r.recip() } else { r.clone() };
    let mut acc = BigRational::one();
    for _ in 0..n.unsigned_abs() {
        acc *= &base;
    }
    Some(acc)
}

fn rat_sqrt(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    if &(&n * &n) == r.numer() && &(&d * &d) == r.denom() {
        Some(BigRational::new(n, d))
    } else {
        None
    }
}

impl Expr {
    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub fn structural_hash(&self) -> u64 {
        self.0.hash
    }

    pub fn ptr_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn rational(r: BigRational) -> Expr {
        intern(Kind::Rational(r))
    }

    pub fn int(n: i64) -> Expr {
        Expr::rational(rat(n))
    }

    pub fn frac(n: i64, d: i64) -> Expr {
        Expr::rational(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn float(x: f64) -> Expr {
        intern(Kind::Float(x.to_bits()))
    }

    pub fn var(index: usize, name: &str) -> Expr {
        intern(Kind::Var { index, name: Arc::from(name) })
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self.kind() {
            Kind::Rational(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_rational().map(|r| r.is_zero()).unwrap_or(false)
    }

    pub fn is_one(&self) -> bool {
        self.as_rational().map(|r| r.is_one()).unwrap_or(false)
    }

    // Raw constructors keep the tree exactly as written.

    pub fn raw_neg(a: Expr) -> Expr {
        intern(Kind::Neg(a))
    }

    pub fn raw_add(terms: Vec<Expr>) -> Expr {
        intern(Kind::Add(terms))
    }

    pub fn raw_mul(factors: Vec<Expr>) -> Expr {
        intern(Kind::Mul(factors))
    }

    pub fn raw_div(a: Expr, b: Expr) -> Expr {
        intern(Kind::Div(a, b))
    }

    pub fn raw_pow(a: Expr, n: i64) -> Expr {
        intern(Kind::Pow(a, n))
    }

    pub fn raw_func(f: Func, a: Expr) -> Expr {
        intern(Kind::Func(f, a))
    }

    // Simplifying constructors.

    pub fn add(terms: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(terms.len());
        for t in terms {
            match t.kind() {
                Kind::Add(xs) => flat.extend(xs.iter().cloned()),
                _ => flat.push(t),
            }
        }
        let mut constant = BigRational::zero();
        let mut float = 0.0f64;
        let mut has_float = false;
        let mut order: Vec<Expr> = Vec::new();
        let mut coeffs: HashMap<Expr, BigRational> = HashMap::new();
        for t in flat {
            match t.kind() {
                Kind::Rational(r) => constant += r,
                Kind::Float(b) => {
                    float += f64::from_bits(*b);
                    has_float = true;
                }
                _ => {
                    let (c, rest) = t.split_coefficient();
                    match coeffs.get_mut(&rest) {
                        Some(acc) => *acc += c,
                        None => {
                            order.push(rest.clone());
                            coeffs.insert(rest, c);
                        }
                    }
                }
            }
        }
        let mut out: Vec<Expr> = Vec::new();
        for rest in order {
            let c = coeffs.remove(&rest).unwrap();
            if c.is_zero() {
                continue;
            }
            out.push(if c.is_one() { rest } else { Expr::mul(vec![Expr::rational(c), rest]) });
        }
        sort_canonical(&mut out);
        if has_float && float != 0.0 {
            out.insert(0, Expr::float(float));
        }
        if !constant.is_zero() {
            out.insert(0, Expr::rational(constant));
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => intern(Kind::Add(out)),
        }
    }

    pub fn mul(factors: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(factors.len());
        for f in factors {
            match f.kind() {
                Kind::Mul(xs) => flat.extend(xs.iter().cloned()),
                _ => flat.push(f),
            }
        }
        let mut constant = BigRational::one();
        let mut float = 1.0f64;
        let mut has_float = false;
        let mut order: Vec<Expr> = Vec::new();
        let mut powers: HashMap<Expr, i64> = HashMap::new();
        for f in flat {
            match f.kind() {
                Kind::Rational(r) => constant *= r,
                Kind::Float(b) => {
                    float *= f64::from_bits(*b);
                    has_float = true;
                }
                _ => {
                    let (base, n) = match f.kind() {
                        Kind::Pow(b, n) => (b.clone(), *n),
                        _ => (f.clone(), 1),
                    };
                    match powers.get_mut(&base) {
                        Some(acc) => *acc += n,
                        None => {
                            order.push(base.clone());
                            powers.insert(base, n);
                        }
                    }
                }
            }
        }
        if constant.is_zero() {
            return Expr::zero();
        }
        let mut out: Vec<Expr> = Vec::new();
        for base in order {
            let n = powers[&base];
            if n != 0 {
                out.push(Expr::pow(base, n));
            }
        }
        // Powers can fold back to constants (e.g. sqrt(2)^2).
        let mut rest = Vec::with_capacity(out.len());
        for f in out {
            match f.kind() {
                Kind::Rational(r) => constant *= r,
                _ => rest.push(f),
            }
        }
        if constant.is_zero() {
            return Expr::zero();
        }
        let mut out = rest;
        // A rational multiple of a single sum distributes over the sum.
        if !has_float && out.len() == 1 && !constant.is_one() {
            if let Kind::Add(ts) = out[0].kind() {
                let c = Expr::rational(constant);
                return Expr::add(ts.iter().map(|t| Expr::mul(vec![c.clone(), t.clone()])).collect());
            }
        }
        sort_canonical(&mut out);
        if has_float && float != 1.0 {
            out.insert(0, Expr::float(float));
        }
        if !constant.is_one() {
            out.insert(0, Expr::rational(constant));
        }
        match out.len() {
            0 => Expr::one(),
            1 => out.pop().unwrap(),
            _ => intern(Kind::Mul(out)),
        }
    }

    pub fn pow(base: Expr, n: i64) -> Expr {
        if n == 0 {
            return Expr::one();
        }
        if n == 1 {
            return base;
        }
        match base.kind() {
            Kind::Rational(r) => match rat_pow(r, n) {
                Some(v) => Expr::rational(v),
                None => intern(Kind::Pow(base.clone(), n)),
            },
            Kind::Float(b) => Expr::float(f64::from_bits(*b).powi(n as i32)),
            Kind::Pow(b, m) => Expr::pow(b.clone(), m * n),
            Kind::Mul(xs) => Expr::mul(xs.iter().map(|x| Expr::pow(x.clone(), n)).collect()),
            Kind::Func(Func::Sqrt, a) if n % 2 == 0 => Expr::pow(a.clone(), n / 2),
            _ => intern(Kind::Pow(base, n)),
        }
    }

    pub fn func(f: Func, a: Expr) -> Expr {
        if let Kind::Float(b) = a.kind() {
            let x = f64::from_bits(*b);
            let v = match f {
                Func::Sqrt => x.sqrt(),
                Func::Exp => x.exp(),
                Func::Log => x.ln(),
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tan => x.tan(),
            };
            if v.is_finite() {
                return Expr::float(v);
            }
        }
        if let Some(r) = a.as_rational() {
            let folded = match f {
                Func::Sqrt => rat_sqrt(r).map(Expr::rational),
                Func::Exp if r.is_zero() => Some(Expr::one()),
                Func::Log if r.is_one() => Some(Expr::zero()),
                Func::Sin | Func::Tan if r.is_zero() => Some(Expr::zero()),
                Func::Cos if r.is_zero() => Some(Expr::one()),
                _ => None,
            };
            if let Some(e) = folded {
                return e;
            }
        }
        intern(Kind::Func(f, a))
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::mul(vec![Expr::int(-1), a])
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::add(vec![a, Expr::neg(b)])
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::mul(vec![a, Expr::pow(b, -1)])
    }

    pub fn scale(&self, r: BigRational) -> Expr {
        Expr::mul(vec![Expr::rational(r), self.clone()])
    }

    /// Splits a leading rational coefficient off a product.
    fn split_coefficient(&self) -> (BigRational, Expr) {
        if let Kind::Mul(xs) = self.kind() {
            if let Some(r) = xs[0].as_rational() {
                let rest: Vec<Expr> = xs[1..].to_vec();
                let rest = if rest.len() == 1 { rest[0].clone() } else { intern(Kind::Mul(rest)) };
                return (r.clone(), rest);
            }
        }
        (BigRational::one(), self.clone())
    }

    /// Rebuilds the tree bottom-up through the simplifying constructors.
    pub fn simplify(&self) -> Expr {
        let mut memo = HashMap::new();
        self.simplify_memo(&mut memo)
    }

    fn simplify_memo(&self, memo: &mut HashMap<usize, Expr>) -> Expr {
        if let Some(e) = memo.get(&self.ptr_id()) {
            return e.clone();
        }
        let out = match self.kind() {
            Kind::Rational(_) | Kind::Float(_) | Kind::Var { .. } => self.clone(),
            Kind::Neg(a) => Expr::neg(a.simplify_memo(memo)),
            Kind::Add(xs) => Expr::add(xs.iter().map(|x| x.simplify_memo(memo)).collect()),
            Kind::Mul(xs) => Expr::mul(xs.iter().map(|x| x.simplify_memo(memo)).collect()),
            Kind::Div(a, b) => Expr::div(a.simplify_memo(memo), b.simplify_memo(memo)),
            Kind::Pow(a, n) => Expr::pow(a.simplify_memo(memo), *n),
            Kind::Func(f, a) => Expr::func(*f, a.simplify_memo(memo)),
        };
        memo.insert(self.ptr_id(), out.clone());
        out
    }

    /// Exact symbolic partial derivative with respect to the named coordinate.
    pub fn differentiate(&self, var: &str) -> Expr {
        let mut memo = HashMap::new();
        self.diff_memo(var, &mut memo)
    }

    fn diff_memo(&self, var: &str, memo: &mut HashMap<usize, Expr>) -> Expr {
        if let Some(e) = memo.get(&self.ptr_id()) {
            return e.clone();
        }
        let out = match self.kind() {
            Kind::Rational(_) | Kind::Float(_) => Expr::zero(),
            Kind::Var { name, .. } => {
                if &**name == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Kind::Neg(a) => Expr::neg(a.diff_memo(var, memo)),
            Kind::Add(xs) => Expr::add(xs.iter().map(|x| x.diff_memo(var, memo)).collect()),
            Kind::Mul(xs) => {
                let mut terms = Vec::new();
                for i in 0..xs.len() {
                    let d = xs[i].diff_memo(var, memo);
                    if d.is_zero() {
                        continue;
                    }
                    let mut fs: Vec<Expr> = Vec::with_capacity(xs.len());
                    for (j, x) in xs.iter().enumerate() {
                        fs.push(if i == j { d.clone() } else { x.clone() });
                    }
                    terms.push(Expr::mul(fs));
                }
                Expr::add(terms)
            }
            Kind::Div(a, b) => {
                let da = a.diff_memo(var, memo);
                let db = b.diff_memo(var, memo);
                Expr::div(
                    Expr::sub(Expr::mul(vec![da, b.clone()]), Expr::mul(vec![a.clone(), db])),
                    Expr::pow(b.clone(), 2),
                )
            }
            Kind::Pow(a, n) => {
                let da = a.diff_memo(var, memo);
                Expr::mul(vec![Expr::int(*n), Expr::pow(a.clone(), n - 1), da])
            }
            Kind::Func(f, a) => {
                let da = a.diff_memo(var, memo);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    let outer = match f {
                        Func::Sqrt => Expr::div(Expr::frac(1, 2), self.clone()),
                        Func::Exp => self.clone(),
                        Func::Log => Expr::pow(a.clone(), -1),
                        Func::Sin => Expr::func(Func::Cos, a.clone()),
                        Func::Cos => Expr::neg(Expr::func(Func::Sin, a.clone())),
                        Func::Tan => Expr::add(vec![Expr::one(), Expr::pow(self.clone(), 2)]),
                    };
                    Expr::mul(vec![outer, da])
                }
            }
        };
        memo.insert(self.ptr_id(), out.clone());
        out
    }

    /// Substitutes expressions for variables, keyed by variable name.
    pub fn substitute(&self, map: &HashMap<String, Expr>) -> Expr {
        let mut memo = HashMap::new();
        self.subst_memo(map, &mut memo)
    }

    fn subst_memo(&self, map: &HashMap<String, Expr>, memo: &mut HashMap<usize, Expr>) -> Expr {
        if let Some(e) = memo.get(&self.ptr_id()) {
            return e.clone();
        }
        let out = match self.kind() {
            Kind::Rational(_) | Kind::Float(_) => self.clone(),
            Kind::Var { name, .. } => map.get(&**name).cloned().unwrap_or_else(|| self.clone()),
            Kind::Neg(a) => Expr::neg(a.subst_memo(map, memo)),
            Kind::Add(xs) => Expr::add(xs.iter().map(|x| x.subst_memo(map, memo)).collect()),
            Kind::Mul(xs) => Expr::mul(xs.iter().map(|x| x.subst_memo(map, memo)).collect()),
            Kind::Div(a, b) => Expr::div(a.subst_memo(map, memo), b.subst_memo(map, memo)),
            Kind::Pow(a, n) => Expr::pow(a.subst_memo(map, memo), *n),
            Kind::Func(f, a) => Expr::func(*f, a.subst_memo(map, memo)),
        };
        memo.insert(self.ptr_id(), out.clone());
        out
    }

    /// Names of the variables occurring in the expression, sorted.
    pub fn variables(&self) -> Vec<String> {
        let mut seen = std::collections::BTreeSet::new();
        let mut visited = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !visited.insert(e.ptr_id()) {
                continue;
            }
            match e.kind() {
                Kind::Var { name, .. } => {
                    seen.insert(name.to_string());
                }
                Kind::Rational(_) | Kind::Float(_) => {}
                Kind::Neg(a) | Kind::Pow(a, _) | Kind::Func(_, a) => stack.push(a.clone()),
                Kind::Div(a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
                Kind::Add(xs) | Kind::Mul(xs) => stack.extend(xs.iter().cloned()),
            }
        }
        seen.into_iter().collect()
    }

    /// Number of distinct nodes reachable from this one.
    pub fn dag_size(&self) -> usize {
        let mut visited = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !visited.insert(e.ptr_id()) {
                continue;
            }
            match e.kind() {
                Kind::Neg(a) | Kind::Pow(a, _) | Kind::Func(_, a) => stack.push(a.clone()),
                Kind::Div(a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
                Kind::Add(xs) | Kind::Mul(xs) => stack.extend(xs.iter().cloned()),
                _ => {}
            }
        }
        visited.len()
    }

    pub fn evaluate(&self, p: &Point) -> Result<f64, ExprError> {
        let mut memo = HashMap::new();
        self.eval_memo(p, &mut memo)
    }

    fn eval_memo(&self, p: &Point, memo: &mut HashMap<usize, f64>) -> Result<f64, ExprError> {
        if let Some(v) = memo.get(&self.ptr_id()) {
            return Ok(*v);
        }
        let v = match self.kind() {
            Kind::Rational(r) => r.to_f64().unwrap_or(f64::NAN),
            Kind::Float(b) => f64::from_bits(*b),
            Kind::Var { index, name } => p.lookup(*index, name)?,
            Kind::Neg(a) => -a.eval_memo(p, memo)?,
            Kind::Add(xs) => {
                let mut s = 0.0;
                for x in xs {
                    s += x.eval_memo(p, memo)?;
                }
                s
            }
            Kind::Mul(xs) => {
                let mut s = 1.0;
                for x in xs {
                    s *= x.eval_memo(p, memo)?;
                }
                s
            }
            Kind::Div(a, b) => {
                let d = b.eval_memo(p, memo)?;
                if d == 0.0 {
                    return Err(ExprError::DivisionByZero);
                }
                a.eval_memo(p, memo)? / d
            }
            Kind::Pow(a, n) => {
                let x = a.eval_memo(p, memo)?;
                if *n < 0 && x == 0.0 {
                    return Err(ExprError::DivisionByZero);
                }
                x.powi(*n as i32)
            }
            Kind::Func(f, a) => {
                let x = a.eval_memo(p, memo)?;
                match f {
                    Func::Sqrt if x < 0.0 => return Err(ExprError::Domain { func: "sqrt", value: x }),
                    Func::Log if x <= 0.0 => return Err(ExprError::Domain { func: "log", value: x }),
                    Func::Sqrt => x.sqrt(),
                    Func::Exp => x.exp(),
                    Func::Log => x.ln(),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Tan => x.tan(),
                }
            }
        };
        memo.insert(self.ptr_id(), v);
        Ok(v)
    }

    /// Taylor jet of the expression, given jets of the coordinates
    /// (`coords[i]` is the jet of the variable with index `i`).
    pub fn eval_jet(&self, names: &[String], coords: &[Jet]) -> Result<Jet, ExprError> {
        let mut memo = HashMap::new();
        let space = coords
            .first()
            .map(|c| c.space().clone())
            .ok_or_else(|| ExprError::Coordinates("no coordinates".into()))?;
        let order = coords.iter().map(|c| c.order()).min().unwrap_or(0);
        self.jet_memo(names, coords, &space, order, &mut memo)
    }

    fn jet_memo(
        &self,
        names: &[String],
        coords: &[Jet],
        space: &Arc<JetSpace>,
        order: usize,
        memo: &mut HashMap<usize, Jet>,
    ) -> Result<Jet, ExprError> {
        if let Some(v) = memo.get(&self.ptr_id()) {
            return Ok(v.clone());
        }
        let v = match self.kind() {
            Kind::Rational(r) => Jet::constant(space, order, r.to_f64().unwrap_or(f64::NAN)),
            Kind::Float(b) => Jet::constant(space, order, f64::from_bits(*b)),
            Kind::Var { index, name } => {
                let i = if names.get(*index).map(|n| **n == **name).unwrap_or(false) {
                    *index
                } else {
                    names
                        .iter()
                        .position(|n| **n == **name)
                        .ok_or_else(|| ExprError::MissingCoordinate(name.to_string()))?
                };
                coords[i].clone()
            }
            Kind::Neg(a) => -&a.jet_memo(names, coords, space, order, memo)?,
            Kind::Add(xs) => {
                let mut s = Jet::constant(space, order, 0.0);
                for x in xs {
                    s = &s + &x.jet_memo(names, coords, space, order, memo)?;
                }
                s
            }
            Kind::Mul(xs) => {
                let mut s = Jet::constant(space, order, 1.0);
                for x in xs {
                    s = &s * &x.jet_memo(names, coords, space, order, memo)?;
                }
                s
            }
            Kind::Div(a, b) => {
                let d = b.jet_memo(names, coords, space, order, memo)?;
                if d.value() == 0.0 {
                    return Err(ExprError::DivisionByZero);
                }
                &a.jet_memo(names, coords, space, order, memo)? * &d.recip()
            }
            Kind::Pow(a, n) => {
                let x = a.jet_memo(names, coords, space, order, memo)?;
                if *n < 0 && x.value() == 0.0 {
                    return Err(ExprError::DivisionByZero);
                }
                x.powi(*n)
            }
            Kind::Func(f, a) => {
                let x = a.jet_memo(names, coords, space, order, memo)?;
                let c = x.value();
                match f {
                    Func::Sqrt if c <= 0.0 => return Err(ExprError::Domain { func: "sqrt", value: c }),
                    Func::Log if c <= 0.0 => return Err(ExprError::Domain { func: "log", value: c }),
                    Func::Sqrt => x.sqrt(),
                    Func::Exp => x.exp(),
                    Func::Log => x.ln(),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Tan => x.tan(),
                }
            }
        };
        memo.insert(self.ptr_id(), v.clone());
        Ok(v)
    }
}

fn sort_canonical(xs: &mut [Expr]) {
    xs.sort_by(|a, b| {
        a.structural_hash()
            .cmp(&b.structural_hash())
            .then_with(|| a.to_string().cmp(&b.to_string()))
    });
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(vec![self, rhs])
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(vec![self, rhs])
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::div(self, rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

#[cfg(test)]
mod tests;
