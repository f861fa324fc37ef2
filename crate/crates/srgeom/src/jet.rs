//! Truncated multivariate Taylor jets at a base point.
//!
//! A jet of order `k` stores the Taylor coefficients of a function up to
//! total degree `k` in a graded monomial order, so a lower-order jet is a
//! prefix of a higher-order one. Products truncate to the smaller order and
//! each derivative drops the order by one, which is how the geometric
//! constructions keep track of how many derivatives remain trustworthy.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

/// Monomial tables shared by all jets in `n` variables up to a maximal order.
pub struct JetSpace {
    nvars: usize,
    max_order: usize,
    exponents: Vec<Vec<u8>>,
    /// `len[d]` is the number of monomials of degree `< d`.
    len: Vec<usize>,
    triples: Vec<(u32, u32, u32)>,
    /// `tri_end[o]` is the number of triples whose product has degree `<= o`.
    tri_end: Vec<usize>,
    /// `deriv[a][t]` is the source index and factor for `∂_a` landing on `t`.
    deriv: Vec<Vec<(u32, f64)>>,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "JetSpace(n={}, order={})", self.nvars, self.max_order)
    }
}

impl JetSpace {
    /// Shared space for `nvars` variables up to `max_order`; cached.
    pub fn get(nvars: usize, max_order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut c = cache.lock().unwrap_or_else(|e| e.into_inner());
        c.entry((nvars, max_order))
            .or_insert_with(|| Arc::new(JetSpace::build(nvars, max_order)))
            .clone()
    }

    fn build(nvars: usize, max_order: usize) -> JetSpace {
        let mut exponents: Vec<Vec<u8>> = Vec::new();
        let mut len = vec![0usize];
        for d in 0..=max_order {
            let mut cur = vec![0u8; nvars];
            monomials_of_degree(nvars, d, 0, &mut cur, &mut exponents);
            len.push(exponents.len());
        }
        let index: HashMap<Vec<u8>, u32> =
            exponents.iter().enumerate().map(|(i, e)| (e.clone(), i as u32)).collect();
        let degree = |e: &[u8]| e.iter().map(|&x| x as usize).sum::<usize>();

        let mut triples = Vec::new();
        let mut tri_end = Vec::with_capacity(max_order + 1);
        // Enumerate by result degree so that truncation is a prefix.
        for o in 0..=max_order {
            for i in 0..exponents.len() {
                let di = degree(&exponents[i]);
                if di > o {
                    break;
                }
                let dj = o - di;
                for j in len[dj]..len[dj + 1] {
                    let sum: Vec<u8> =
                        exponents[i].iter().zip(&exponents[j]).map(|(a, b)| a + b).collect();
                    triples.push((i as u32, j as u32, index[&sum]));
                }
            }
            tri_end.push(triples.len());
        }

        let mut deriv = vec![Vec::new(); nvars];
        if max_order > 0 {
            for (a, table) in deriv.iter_mut().enumerate() {
                for t in 0..len[max_order] {
                    let mut src = exponents[t].clone();
                    src[a] += 1;
                    table.push((index[&src], src[a] as f64));
                }
            }
        }

        JetSpace { nvars, max_order, exponents, len, triples, tri_end, deriv }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Number of coefficients of a jet of the given order.
    pub fn size(&self, order: usize) -> usize {
        self.len[order + 1]
    }

    pub fn exponents(&self, i: usize) -> &[u8] {
        &self.exponents[i]
    }
}

fn monomials_of_degree(n: usize, d: usize, pos: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if n == 0 {
        if d == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if pos == n - 1 {
        cur[pos] = d as u8;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    for k in (0..=d).rev() {
        cur[pos] = k as u8;
        monomials_of_degree(n, d - k, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    order: usize,
    c: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet(order={}, value={})", self.order, self.value())
    }
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, order: usize, v: f64) -> Jet {
        assert!(order <= space.max_order, "jet order exceeds space");
        let mut c = vec![0.0; space.size(order)];
        c[0] = v;
        Jet { space: space.clone(), order, c }
    }

    /// The coordinate function `x_i` expanded at `x_i = x0`.
    pub fn variable(space: &Arc<JetSpace>, order: usize, i: usize, x0: f64) -> Jet {
        let mut j = Jet::constant(space, order, x0);
        if order > 0 {
            // Degree-one monomials follow the constant in graded order,
            // with variable 0 first.
            j.c[1 + i] = 1.0;
        }
        j
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet { space: self.space.clone(), order, c: self.c[..self.space.size(order)].to_vec() }
    }

    /// Raises the order, filling the new coefficients with zeros.
    pub fn pad(&self, order: usize) -> Jet {
        if order <= self.order {
            return self.clone();
        }
        let mut c = self.c.clone();
        c.resize(self.space.size(order), 0.0);
        Jet { space: self.space.clone(), order, c }
    }

    pub fn zero_like(&self) -> Jet {
        Jet::constant(&self.space, self.order, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|x| x.is_finite())
    }

    /// Partial derivative with respect to coordinate `a`.
    pub fn deriv(&self, a: usize) -> Jet {
        assert!(self.order > 0, "derivative of an order-0 jet");
        let order = self.order - 1;
        let n = self.space.size(order);
        let table = &self.space.deriv[a];
        let c = (0..n).map(|t| {
            let (s, f) = table[t];
            f * self.c[s as usize]
        });
        Jet { space: self.space.clone(), order, c: c.collect() }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { space: self.space.clone(), order: self.order, c: self.c.iter().map(|x| x * s).collect() }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.c[0] += s;
        out
    }

    /// `self + s * other`, truncated to the smaller order.
    pub fn axpy(&self, s: f64, other: &Jet) -> Jet {
        let order = self.order.min(other.order);
        let n = self.space.size(order);
        let c = (0..n).map(|i| self.c[i] + s * other.c[i]).collect();
        Jet { space: self.space.clone(), order, c }
    }

    fn binary(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let order = self.order.min(other.order);
        let n = self.space.size(order);
        let c = (0..n).map(|i| f(self.c[i], other.c[i])).collect();
        Jet { space: self.space.clone(), order, c }
    }

    fn product(&self, other: &Jet) -> Jet {
        let order = self.order.min(other.order);
        // Constant factors are common in frames built from polynomial data.
        if other.c[1..self.space.size(order)].iter().all(|&x| x == 0.0) {
            return self.truncate(order).scale(other.c[0]);
        }
        if self.c[1..self.space.size(order)].iter().all(|&x| x == 0.0) {
            return other.truncate(order).scale(self.c[0]);
        }
        let mut c = vec![0.0; self.space.size(order)];
        let end = self.space.tri_end[order];
        for &(i, j, k) in &self.space.triples[..end] {
            c[k as usize] += self.c[i as usize] * other.c[j as usize];
        }
        Jet { space: self.space.clone(), order, c }
    }

    /// Evaluates `Σ a_m h^m` where `h` is `self` minus its constant term.
    fn compose(&self, a: &[f64]) -> Jet {
        let mut h = self.clone();
        h.c[0] = 0.0;
        let k = a.len() - 1;
        let mut acc = Jet::constant(&self.space, self.order, a[k]);
        for m in (0..k).rev() {
            acc = acc.product(&h);
            acc.c[0] += a[m];
        }
        acc
    }

    pub fn recip(&self) -> Jet {
        let x = self.c[0];
        let a: Vec<f64> = (0..=self.order)
            .map(|m| {
                let s = if m % 2 == 0 { 1.0 } else { -1.0 };
                s / x.powi(m as i32 + 1)
            })
            .collect();
        self.compose(&a)
    }

    pub fn sqrt(&self) -> Jet {
        let x = self.c[0];
        let mut a = Vec::with_capacity(self.order + 1);
        let mut binom = 1.0;
        for m in 0..=self.order {
            a.push(binom * x.powf(0.5 - m as f64));
            binom *= (0.5 - m as f64) / (m as f64 + 1.0);
        }
        self.compose(&a)
    }

    pub fn exp(&self) -> Jet {
        let e = self.c[0].exp();
        let mut a = Vec::with_capacity(self.order + 1);
        let mut fact = 1.0;
        for m in 0..=self.order {
            if m > 0 {
                fact *= m as f64;
            }
            a.push(e / fact);
        }
        self.compose(&a)
    }

    pub fn ln(&self) -> Jet {
        let x = self.c[0];
        let mut a = vec![x.ln()];
        for m in 1..=self.order {
            let s = if m % 2 == 1 { 1.0 } else { -1.0 };
            a.push(s / (m as f64 * x.powi(m as i32)));
        }
        self.compose(&a)
    }

    fn trig(&self, shift: usize) -> Jet {
        let (s, c) = self.c[0].sin_cos();
        let cycle = [s, c, -s, -c];
        let mut a = Vec::with_capacity(self.order + 1);
        let mut fact = 1.0;
        for m in 0..=self.order {
            if m > 0 {
                fact *= m as f64;
            }
            a.push(cycle[(m + shift) % 4] / fact);
        }
        self.compose(&a)
    }

    pub fn sin(&self) -> Jet {
        self.trig(0)
    }

    pub fn cos(&self) -> Jet {
        self.trig(1)
    }

    pub fn tan(&self) -> Jet {
        &self.sin() * &self.cos().recip()
    }

    pub fn powi(&self, n: i64) -> Jet {
        if n < 0 {
            return self.recip().powi(-n);
        }
        let mut result = Jet::constant(&self.space, self.order, 1.0);
        let mut base = self.clone();
        let mut k = n as u64;
        while k > 0 {
            if k & 1 == 1 {
                result = result.product(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.product(&base);
            }
        }
        result
    }

    /// Value of the Taylor polynomial at displacement `dx` from the base point.
    pub fn eval_taylor(&self, dx: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, c) in self.c.iter().enumerate() {
            let e = &self.space.exponents[i];
            let mut term = *c;
            for (a, &k) in e.iter().enumerate() {
                term *= dx[a].powi(k as i32);
            }
            s += term;
        }
        s
    }
}

impl<'a> std::ops::Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.binary(rhs, |a, b| a + b)
    }
}

impl<'a> std::ops::Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.binary(rhs, |a, b| a - b)
    }
}

impl<'a> std::ops::Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.product(rhs)
    }
}

impl<'a> std::ops::Div<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self.product(&rhs.recip())
    }
}

impl std::ops::Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl std::ops::Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl std::ops::Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl std::ops::Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

impl std::ops::Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Jets of all coordinate functions at `point`.
pub fn coordinate_jets(point: &[f64], order: usize) -> Vec<Jet> {
    let space = JetSpace::get(point.len(), order);
    point.iter().enumerate().map(|(i, &x)| Jet::variable(&space, order, i, x)).collect()
}
