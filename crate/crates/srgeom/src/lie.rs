//! Stratified (Carnot) Lie algebras, their induced inner products and
//! isometry algebras, and the model algebras used by the geometric modules.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LieError {
    #[error("invalid algebra: {0}")]
    Invalid(String),
    #[error("dimension {dim} exceeds the cap {cap}")]
    TooLarge { dim: usize, cap: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("degenerate bracket form")]
    Degenerate,
}

/// How the inner product on the first layer is extended to higher layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Normalization {
    /// Submetry from the free algebra with tensor words weighted by
    /// `2^{j/2}`: layer `k` is the image of `g_{-1} ⊗ g_{-(k-1)}` under the
    /// bracket, with ordered pairs of orthonormal vectors.
    #[default]
    Free,
    /// The bracket `Λ²(lower layers) → g_{-k}` is a submetry for the wedge
    /// inner product in which `e_a ∧ e_b` (a < b) is orthonormal.
    Wedge,
}

/// Graded nilpotent Lie algebra with exact (or, for numerically extracted
/// symbols, floating-point) structure constants.
#[derive(Debug, Clone)]
pub struct StratifiedAlgebra {
    layer_dims: Vec<usize>,
    labels: Vec<String>,
    degree: Vec<usize>,
    /// Dense `c[a][b][c]` as floats.
    c: Vec<f64>,
    /// Nonzero constants `(a, b, c)` with `a < b`, when known exactly.
    exact: Option<BTreeMap<(usize, usize, usize), BigRational>>,
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn rat_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

impl StratifiedAlgebra {
    /// Builds an algebra from exact constants `[e_a, e_b] = Σ coeff e_c`
    /// listed for `a < b`, and validates it.
    pub fn new(
        layer_dims: Vec<usize>,
        labels: Vec<String>,
        constants: Vec<(usize, usize, usize, BigRational)>,
    ) -> Result<StratifiedAlgebra, LieError> {
        let n: usize = layer_dims.iter().sum();
        if labels.len() != n {
            return Err(LieError::Invalid("label count differs from dimension".into()));
        }
        let degree = degrees(&layer_dims);
        let mut exact = BTreeMap::new();
        for (a, b, c, v) in constants {
            if a >= n || b >= n || c >= n {
                return Err(LieError::Invalid("basis index out of range".into()));
            }
            if a == b {
                if !v.is_zero() {
                    return Err(LieError::Invalid("[e_a, e_a] must vanish".into()));
                }
                continue;
            }
            let (a, b, v) = if a < b { (a, b, v) } else { (b, a, -v) };
            if v.is_zero() {
                continue;
            }
            *exact.entry((a, b, c)).or_insert_with(BigRational::zero) += v;
        }
        exact.retain(|_, v| !v.is_zero());
        let mut dense = vec![0.0; n * n * n];
        for ((a, b, c), v) in &exact {
            let f = rat_to_f64(v);
            dense[(a * n + b) * n + c] = f;
            dense[(b * n + a) * n + c] = -f;
        }
        let alg = StratifiedAlgebra { layer_dims, labels, degree, c: dense, exact: Some(exact) };
        alg.validate(0.0)?;
        Ok(alg)
    }

    /// Builds an algebra from a dense float array `c[a][b][c]`, validating
    /// antisymmetry, grading, Jacobi and generation to tolerance `tol`.
    pub fn from_dense(
        layer_dims: Vec<usize>,
        labels: Vec<String>,
        c: Vec<f64>,
        tol: f64,
    ) -> Result<StratifiedAlgebra, LieError> {
        let n: usize = layer_dims.iter().sum();
        if labels.len() != n || c.len() != n * n * n {
            return Err(LieError::Invalid("dimension mismatch".into()));
        }
        let degree = degrees(&layer_dims);
        let alg = StratifiedAlgebra { layer_dims, labels, degree, c, exact: None };
        alg.validate(tol)?;
        Ok(alg)
    }

    fn validate(&self, tol: f64) -> Result<(), LieError> {
        let n = self.dim();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let v = self.constant(a, b, c);
                    if (v + self.constant(b, a, c)).abs() > tol {
                        return Err(LieError::Invalid("structure constants not antisymmetric".into()));
                    }
                    if v.abs() > tol && self.degree[a] + self.degree[b] != self.degree[c] {
                        return Err(LieError::Invalid(format!(
                            "bracket [{}, {}] leaves the grading",
                            self.labels[a], self.labels[b]
                        )));
                    }
                }
            }
        }
        let jac = self.jacobi_residual();
        if jac > 10.0 * tol {
            return Err(LieError::Invalid(format!("Jacobi identity fails (residual {jac:e})")));
        }
        if !self.is_generated_by_first_layer() {
            return Err(LieError::Invalid("first layer does not generate".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn step(&self) -> usize {
        self.layer_dims.len()
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Layer (1-based) of each basis element.
    pub fn degrees(&self) -> &[usize] {
        &self.degree
    }

    /// Index range of layer `k` (1-based).
    pub fn layer_range(&self, k: usize) -> std::ops::Range<usize> {
        let start: usize = self.layer_dims[..k - 1].iter().sum();
        start..start + self.layer_dims[k - 1]
    }

    pub fn constant(&self, a: usize, b: usize, c: usize) -> f64 {
        let n = self.dim();
        self.c[(a * n + b) * n + c]
    }

    pub fn dense_constants(&self) -> &[f64] {
        &self.c
    }

    pub fn exact_constants(&self) -> Option<&BTreeMap<(usize, usize, usize), BigRational>> {
        self.exact.as_ref()
    }

    pub fn bracket(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for a in 0..n {
            if u[a] == 0.0 {
                continue;
            }
            for b in 0..n {
                let s = u[a] * v[b];
                if s == 0.0 {
                    continue;
                }
                for (c, o) in out.iter_mut().enumerate() {
                    *o += s * self.c[(a * n + b) * n + c];
                }
            }
        }
        out
    }

    /// Largest Jacobi-identity violation over basis triples. Exactly zero
    /// for algebras with exact constants that satisfy it.
    pub fn jacobi_residual(&self) -> f64 {
        let n = self.dim();
        if let Some(ex) = &self.exact {
            // Sparse rows: br[a][b] = [(c, coeff)] for both orders.
            let mut br: HashMap<(usize, usize), Vec<(usize, BigRational)>> = HashMap::new();
            for ((a, b, c), v) in ex {
                br.entry((*a, *b)).or_default().push((*c, v.clone()));
                br.entry((*b, *a)).or_default().push((*c, -v.clone()));
            }
            let nested = |x: usize, y: usize, z: usize, acc: &mut BTreeMap<usize, BigRational>| {
                // [x, [y, z]]
                if let Some(inner) = br.get(&(y, z)) {
                    for (e, v) in inner {
                        if let Some(outer) = br.get(&(x, *e)) {
                            for (d, w) in outer {
                                *acc.entry(*d).or_insert_with(BigRational::zero) += v * w;
                            }
                        }
                    }
                }
            };
            let mut worst = BigRational::zero();
            for a in 0..n {
                for b in a + 1..n {
                    for c in b + 1..n {
                        let mut acc = BTreeMap::new();
                        nested(a, b, c, &mut acc);
                        nested(b, c, a, &mut acc);
                        nested(c, a, b, &mut acc);
                        for v in acc.values() {
                            if v.abs() > worst {
                                worst = v.abs();
                            }
                        }
                    }
                }
            }
            return rat_to_f64(&worst);
        }
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    for d in 0..n {
                        let mut s = 0.0;
                        for e in 0..n {
                            s += self.constant(b, c, e) * self.constant(a, e, d);
                            s += self.constant(c, a, e) * self.constant(b, e, d);
                            s += self.constant(a, b, e) * self.constant(c, e, d);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    /// Checks `[g_{-1}, g_{-k}] = g_{-k-1}` by rank.
    pub fn is_generated_by_first_layer(&self) -> bool {
        let n = self.dim();
        for k in 1..self.step() {
            let target = self.layer_range(k + 1);
            let mut cols = Vec::new();
            for a in self.layer_range(1) {
                for b in self.layer_range(k) {
                    let v: Vec<f64> = target.clone().map(|c| self.c[(a * n + b) * n + c]).collect();
                    cols.push(DVector::from_vec(v));
                }
            }
            let m = DMatrix::from_columns(&cols);
            if linalg::rank(&m, linalg::REL_TOL) != target.len() {
                return false;
            }
        }
        true
    }

    /// Cumulative dimensions `(dim E^{-1}, dim E^{-2}, …)`.
    pub fn growth_vector(&self) -> Vec<usize> {
        self.layer_dims
            .iter()
            .scan(0, |acc, d| {
                *acc += d;
                Some(*acc)
            })
            .collect()
    }
}

fn degrees(layer_dims: &[usize]) -> Vec<usize> {
    layer_dims
        .iter()
        .enumerate()
        .flat_map(|(k, &d)| std::iter::repeat_n(k + 1, d))
        .collect()
}

/// Stratified algebra with an inner product on its first layer.
#[derive(Debug, Clone)]
pub struct CarnotAlgebra {
    pub algebra: StratifiedAlgebra,
    metric: DMatrix<f64>,
}

impl CarnotAlgebra {
    pub fn new(algebra: StratifiedAlgebra, metric: DMatrix<f64>) -> Result<CarnotAlgebra, LieError> {
        let d1 = algebra.layer_dims[0];
        if metric.nrows() != d1 || metric.ncols() != d1 {
            return Err(LieError::Invalid("metric size differs from first layer".into()));
        }
        if (&metric - metric.transpose()).amax() > 1e-12 * (1.0 + metric.amax()) {
            return Err(LieError::Invalid("metric not symmetric".into()));
        }
        if !linalg::is_positive_definite(&metric) {
            return Err(LieError::Invalid("metric not positive definite".into()));
        }
        Ok(CarnotAlgebra { algebra, metric })
    }

    /// Inner product on the first layer.
    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }
}

/// Gram matrix on all of `g_-` extending the first-layer metric, block
/// diagonal by layer, under the [`Normalization::Free`] convention.
pub fn induced_inner_product(g: &CarnotAlgebra) -> DMatrix<f64> {
    induced_inner_product_with(g, Normalization::Free)
}

pub fn induced_inner_product_with(g: &CarnotAlgebra, norm: Normalization) -> DMatrix<f64> {
    let alg = &g.algebra;
    let n = alg.dim();
    let mut gram = DMatrix::zeros(n, n);
    let r1 = alg.layer_range(1);
    gram.view_mut((r1.start, r1.start), (r1.len(), r1.len())).copy_from(&g.metric);
    // Orthonormal vectors of each layer, as full coordinate vectors.
    let mut onb: Vec<Vec<DVector<f64>>> = Vec::new();
    let embed = |range: &std::ops::Range<usize>, b: &DMatrix<f64>| -> Vec<DVector<f64>> {
        (0..b.ncols())
            .map(|j| {
                let mut v = DVector::zeros(n);
                for (i, r) in range.clone().enumerate() {
                    v[r] = b[(i, j)];
                }
                v
            })
            .collect()
    };
    onb.push(embed(&r1, &linalg::orthonormal_basis(&g.metric).expect("metric is positive definite")));
    for k in 2..=alg.step() {
        let rk = alg.layer_range(k);
        let mut ginv = DMatrix::<f64>::zeros(rk.len(), rk.len());
        let mut add = |u: &DVector<f64>, v: &DVector<f64>| {
            let w = alg.bracket(u.as_slice(), v.as_slice());
            let w = DVector::from_iterator(rk.len(), rk.clone().map(|c| w[c]));
            ginv += &w * w.transpose();
        };
        match norm {
            Normalization::Free => {
                for u in &onb[0] {
                    for v in &onb[k - 2] {
                        add(u, v);
                    }
                }
            }
            Normalization::Wedge => {
                for i in 1..k {
                    let j = k - i;
                    if i > j {
                        break;
                    }
                    for (p, u) in onb[i - 1].iter().enumerate() {
                        for (q, v) in onb[j - 1].iter().enumerate() {
                            if i == j && q <= p {
                                continue;
                            }
                            add(u, v);
                        }
                    }
                }
            }
        }
        let gk = ginv.try_inverse().expect("generated algebra has invertible layer Gram");
        let gk = (&gk + gk.transpose()) * 0.5;
        gram.view_mut((rk.start, rk.start), (rk.len(), rk.len())).copy_from(&gk);
        onb.push(embed(&rk, &linalg::orthonormal_basis(&gk).expect("layer Gram is positive definite")));
    }
    gram
}

/// Basis of the isometry algebra `g_0`: degree-zero derivations of `g_-`
/// that are skew on the first layer. Matrices act on coordinate columns.
#[derive(Debug, Clone)]
pub struct IsometryAlgebraBasis {
    pub generators: Vec<DMatrix<f64>>,
}

impl IsometryAlgebraBasis {
    pub fn dim(&self) -> usize {
        self.generators.len()
    }
}

pub fn isometry_algebra(g: &CarnotAlgebra) -> IsometryAlgebraBasis {
    let alg = &g.algebra;
    let n = alg.dim();
    // Unknowns: entries D[i][j] with i, j in the same layer.
    let mut unknowns = Vec::new();
    let mut index = HashMap::new();
    for k in 1..=alg.step() {
        for i in alg.layer_range(k) {
            for j in alg.layer_range(k) {
                index.insert((i, j), unknowns.len());
                unknowns.push((i, j));
            }
        }
    }
    let m = unknowns.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    // Derivation: D[a,b] - [Da,b] - [a,Db] = 0, component c.
    for a in 0..n {
        for b in a + 1..n {
            for c in 0..n {
                let mut row = vec![0.0; m];
                for e in 0..n {
                    if let Some(&u) = index.get(&(c, e)) {
                        row[u] += alg.constant(a, b, e);
                    }
                    if let Some(&u) = index.get(&(e, a)) {
                        row[u] -= alg.constant(e, b, c);
                    }
                    if let Some(&u) = index.get(&(e, b)) {
                        row[u] -= alg.constant(a, e, c);
                    }
                }
                if row.iter().any(|&x| x != 0.0) {
                    rows.push(row);
                }
            }
        }
    }
    // Skew on the first layer: G D + (G D)^T = 0.
    let r1 = alg.layer_range(1);
    for (ii, i) in r1.clone().enumerate() {
        for (jj, j) in r1.clone().enumerate() {
            if jj < ii {
                continue;
            }
            let mut row = vec![0.0; m];
            for (ee, e) in r1.clone().enumerate() {
                row[index[&(e, j)]] += g.metric[(ii, ee)];
                row[index[&(e, i)]] += g.metric[(jj, ee)];
            }
            rows.push(row);
        }
    }
    let a = DMatrix::from_fn(rows.len(), m, |r, c| rows[r][c]);
    let ns = linalg::null_space(&a, linalg::REL_TOL);
    let generators = (0..ns.ncols())
        .map(|col| {
            let mut d = DMatrix::zeros(n, n);
            for (u, &(i, j)) in unknowns.iter().enumerate() {
                d[(i, j)] = ns[(u, col)];
            }
            d
        })
        .collect();
    IsometryAlgebraBasis { generators }
}

/// `h_n(λ)`: basis `A_1..A_n, B_1..B_n, C` with `[A_j, B_j] = C` and
/// `⟨A_j, A_j⟩ = ⟨B_j, B_j⟩ = λ_j²`.
pub fn heisenberg(lambda: &[f64]) -> Result<CarnotAlgebra, LieError> {
    let n = lambda.len();
    if n == 0 {
        return Err(LieError::Precondition("λ is empty".into()));
    }
    if (lambda[0] - 1.0).abs() > 1e-12 {
        return Err(LieError::Precondition("λ_1 must equal 1".into()));
    }
    if lambda.windows(2).any(|w| w[1] < w[0]) || lambda.iter().any(|x| !x.is_finite()) {
        return Err(LieError::Precondition("λ must be non-decreasing".into()));
    }
    let mut labels: Vec<String> = (1..=n).map(|j| format!("A{j}")).collect();
    labels.extend((1..=n).map(|j| format!("B{j}")));
    labels.push("C".into());
    let constants = (0..n).map(|j| (j, n + j, 2 * n, BigRational::one())).collect();
    let alg = StratifiedAlgebra::new(vec![2 * n, 1], labels, constants)?;
    let metric = DMatrix::from_fn(2 * n, 2 * n, |i, j| if i == j { lambda[i % n].powi(2) } else { 0.0 });
    CarnotAlgebra::new(alg, metric)
}

/// The (2,3,5) algebra: `[A_1, A_2] = B`, `[A_j, B] = C_j`, with `A_1, A_2`
/// orthonormal.
pub fn cartan_nilpotent() -> CarnotAlgebra {
    let labels = ["A1", "A2", "B", "C1", "C2"].iter().map(|s| s.to_string()).collect();
    let one = BigRational::one;
    let alg = StratifiedAlgebra::new(vec![2, 1, 2], labels, vec![(0, 1, 2, one()), (0, 2, 3, one()), (1, 2, 4, one())])
        .expect("the (2,3,5) algebra is valid");
    CarnotAlgebra::new(alg, DMatrix::identity(2, 2)).expect("identity metric")
}

/// Default cap on the total dimension of free nilpotent algebras.
pub const FREE_DIM_CAP: usize = 64;

type Word = Vec<u8>;
type Poly = BTreeMap<Word, BigRational>;

fn poly_bracket(u: &Poly, v: &Poly) -> Poly {
    let mut out: Poly = BTreeMap::new();
    for (wu, cu) in u {
        for (wv, cv) in v {
            let mut w1 = wu.clone();
            w1.extend_from_slice(wv);
            *out.entry(w1).or_insert_with(BigRational::zero) += cu * cv;
            let mut w2 = wv.clone();
            w2.extend_from_slice(wu);
            *out.entry(w2).or_insert_with(BigRational::zero) -= cu * cv;
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

/// Coefficients expressing `target` in the span of `basis`, exactly.
fn solve_in_span(basis: &[Poly], target: &Poly) -> Option<Vec<BigRational>> {
    let mut words: Vec<Word> = Vec::new();
    for p in basis.iter().chain(std::iter::once(target)) {
        for w in p.keys() {
            if !words.contains(w) {
                words.push(w.clone());
            }
        }
    }
    let m = basis.len();
    // Rows are words; columns are basis elements plus the target.
    let mut a: Vec<Vec<BigRational>> = words
        .iter()
        .map(|w| {
            let mut row: Vec<BigRational> =
                basis.iter().map(|p| p.get(w).cloned().unwrap_or_else(BigRational::zero)).collect();
            row.push(target.get(w).cloned().unwrap_or_else(BigRational::zero));
            row
        })
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..m {
        let Some(p) = (r..a.len()).find(|&i| !a[i][col].is_zero()) else { continue };
        a.swap(r, p);
        let inv = a[r][col].recip();
        for x in a[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..a.len() {
            if i != r && !a[i][col].is_zero() {
                let f = a[i][col].clone();
                let pivot_row = a[r].clone();
                for (x, y) in a[i].iter_mut().zip(pivot_row.iter()) {
                    *x -= &f * y;
                }
            }
        }
        pivots.push(col);
        r += 1;
    }
    if a[r..].iter().any(|row| !row[m].is_zero()) {
        return None;
    }
    let mut x = vec![BigRational::zero(); m];
    for (i, &col) in pivots.iter().enumerate() {
        x[col] = a[i][m].clone();
    }
    Some(x)
}

/// Free nilpotent Lie algebra of step `s` on `n` generators, realized on a
/// Hall basis. Brackets are reduced to the basis by expanding both sides as
/// commutator polynomials in the tensor algebra and solving exactly.
pub fn free_nilpotent(n: usize, s: usize, metric: Option<DMatrix<f64>>) -> Result<CarnotAlgebra, LieError> {
    free_nilpotent_capped(n, s, metric, FREE_DIM_CAP)
}

pub fn free_nilpotent_capped(
    n: usize,
    s: usize,
    metric: Option<DMatrix<f64>>,
    cap: usize,
) -> Result<CarnotAlgebra, LieError> {
    if n < 2 || s < 1 {
        return Err(LieError::Precondition("need n >= 2 and s >= 1".into()));
    }
    // Hall basis: (left, right) children for brackets, None for generators.
    let mut children: Vec<Option<(usize, usize)>> = Vec::new();
    let mut deg: Vec<usize> = Vec::new();
    let mut polys: Vec<Poly> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    for i in 0..n {
        children.push(None);
        deg.push(1);
        let mut p = BTreeMap::new();
        p.insert(vec![i as u8], BigRational::one());
        polys.push(p);
        labels.push(format!("X{}", i + 1));
    }
    let mut layer_dims = vec![n];
    for k in 2..=s {
        let existing = children.len();
        let mut added = 0;
        for u in 0..existing {
            for v in 0..u {
                if deg[u] + deg[v] != k {
                    continue;
                }
                if let Some((_, y)) = children[u] {
                    if y > v {
                        continue;
                    }
                }
                children.push(Some((u, v)));
                deg.push(k);
                polys.push(poly_bracket(&polys[u], &polys[v]));
                labels.push(format!("[{},{}]", labels[u], labels[v]));
                added += 1;
                if children.len() > cap {
                    return Err(LieError::TooLarge { dim: children.len(), cap });
                }
            }
        }
        layer_dims.push(added);
    }
    let total = children.len();
    let start: Vec<usize> = layer_dims
        .iter()
        .scan(0, |acc, d| {
            let s0 = *acc;
            *acc += d;
            Some(s0)
        })
        .collect();
    let mut constants = Vec::new();
    for a in 0..total {
        for b in a + 1..total {
            let k = deg[a] + deg[b];
            if k > s {
                continue;
            }
            let p = poly_bracket(&polys[a], &polys[b]);
            if p.is_empty() {
                continue;
            }
            let range = start[k - 1]..start[k - 1] + layer_dims[k - 1];
            let basis: Vec<Poly> = range.clone().map(|i| polys[i].clone()).collect();
            let coeffs = solve_in_span(&basis, &p)
                .ok_or_else(|| LieError::Invalid("bracket outside the Hall span".into()))?;
            for (i, c) in range.zip(coeffs) {
                if !c.is_zero() {
                    constants.push((a, b, i, c));
                }
            }
        }
    }
    let alg = StratifiedAlgebra::new(layer_dims, labels, constants)?;
    let metric = metric.unwrap_or_else(|| DMatrix::identity(n, n));
    CarnotAlgebra::new(alg, metric)
}

/// The λ-invariants of a Heisenberg-type algebra with layer dims `(2n, 1)`,
/// sorted increasing with `λ_1 = 1`.
pub fn heisenberg_normal_form(g: &CarnotAlgebra) -> Result<Vec<f64>, LieError> {
    let alg = &g.algebra;
    if alg.step() != 2 || alg.layer_dims[1] != 1 || alg.layer_dims[0] % 2 != 0 {
        return Err(LieError::Precondition("layer dims must be (2n, 1)".into()));
    }
    let d = alg.layer_dims[0];
    let z = alg.layer_range(2).start;
    let omega = DMatrix::from_fn(d, d, |a, b| alg.constant(a, b, z));
    let b = linalg::orthonormal_basis(&g.metric).ok_or(LieError::Degenerate)?;
    let w = b.transpose() * omega * &b;
    let s = w.transpose() * &w;
    let ev = linalg::sym_eigenvalues_desc(&s);
    let top = ev[0];
    if top <= 0.0 || ev[d - 1] <= 1e-12 * top {
        return Err(LieError::Degenerate);
    }
    // Eigenvalues of -(J^θ)² are λ_j^{-4} up to scale, each twice.
    let mut lambda: Vec<f64> = ev.iter().step_by(2).map(|mu| (top / mu).powf(0.25)).collect();
    lambda.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(lambda)
}

/// Plain-data form of a Carnot algebra for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraDoc {
    pub layer_dims: Vec<usize>,
    pub labels: Vec<String>,
    /// Nonzero brackets `[a, b] = coeff * c` with `a` before `b`.
    pub brackets: Vec<BracketEntry>,
    pub metric: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketEntry {
    pub a: String,
    pub b: String,
    pub c: String,
    /// Exact rational `p/q`, or a decimal for float algebras.
    pub coeff: String,
}

impl CarnotAlgebra {
    pub fn to_doc(&self) -> AlgebraDoc {
        let alg = &self.algebra;
        let n = alg.dim();
        let mut brackets = Vec::new();
        match &alg.exact {
            Some(ex) => {
                for ((a, b, c), v) in ex {
                    brackets.push(BracketEntry {
                        a: alg.labels[*a].clone(),
                        b: alg.labels[*b].clone(),
                        c: alg.labels[*c].clone(),
                        coeff: v.to_string(),
                    });
                }
            }
            None => {
                for a in 0..n {
                    for b in a + 1..n {
                        for c in 0..n {
                            let v = alg.constant(a, b, c);
                            if v != 0.0 {
                                brackets.push(BracketEntry {
                                    a: alg.labels[a].clone(),
                                    b: alg.labels[b].clone(),
                                    c: alg.labels[c].clone(),
                                    coeff: format!("{v:e}"),
                                });
                            }
                        }
                    }
                }
            }
        }
        let d = self.metric.nrows();
        let metric = (0..d).map(|i| (0..d).map(|j| self.metric[(i, j)]).collect()).collect();
        AlgebraDoc { layer_dims: alg.layer_dims.clone(), labels: alg.labels.clone(), brackets, metric }
    }

    pub fn from_doc(doc: &AlgebraDoc) -> Result<CarnotAlgebra, LieError> {
        let pos = |l: &str| {
            doc.labels
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| LieError::Invalid(format!("unknown label {l}")))
        };
        let exact = doc.brackets.iter().all(|e| !e.coeff.contains(['e', '.']));
        let alg = if exact {
            let mut constants = Vec::new();
            for e in &doc.brackets {
                let v: BigRational =
                    e.coeff.parse().map_err(|_| LieError::Invalid(format!("bad rational {}", e.coeff)))?;
                constants.push((pos(&e.a)?, pos(&e.b)?, pos(&e.c)?, v));
            }
            StratifiedAlgebra::new(doc.layer_dims.clone(), doc.labels.clone(), constants)?
        } else {
            let n = doc.labels.len();
            let mut c = vec![0.0; n * n * n];
            for e in &doc.brackets {
                let v: f64 = e.coeff.parse().map_err(|_| LieError::Invalid(format!("bad number {}", e.coeff)))?;
                let (a, b, k) = (pos(&e.a)?, pos(&e.b)?, pos(&e.c)?);
                c[(a * n + b) * n + k] += v;
                c[(b * n + a) * n + k] -= v;
            }
            StratifiedAlgebra::from_dense(doc.layer_dims.clone(), doc.labels.clone(), c, 1e-9)?
        };
        let d = doc.metric.len();
        let metric = DMatrix::from_fn(d, d, |i, j| doc.metric[i][j]);
        CarnotAlgebra::new(alg, metric)
    }
}

/// Exact rational `n/d`, for building constants in tests and callers.
pub fn q(n: i64, d: i64) -> BigRational {
    rat(n, d)
}
