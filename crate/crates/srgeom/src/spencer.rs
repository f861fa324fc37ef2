//! Spencer cochains `Λ^k g_-^* ⊗ g` over `g = g_- ⊕ g_0`, the Spencer
//! differential and its adjoint, in orthonormal bases.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::lie::{self, CarnotAlgebra, Normalization};
use crate::linalg;

/// `g_- ⊕ g_0` in orthonormal coordinates together with cochain indexing.
#[derive(Debug, Clone)]
pub struct SpencerComplex {
    n: usize,
    m: usize,
    /// `[f_a, f_b]` in orthonormal coordinates of `g_-`.
    bracket: Vec<DVector<f64>>,
    /// Orthonormal basis of `g_0` acting on orthonormal coordinates of `g_-`.
    d: Vec<DMatrix<f64>>,
    /// `[D_s, D_t]` in the orthonormal basis of `g_0`.
    d_bracket: Vec<DVector<f64>>,
}

/// Element of `Λ^k g_-^* ⊗ g`: coefficients over (increasing index tuple,
/// output basis vector), tuples in lexicographic order, outputs `g_-`
/// first then `g_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cochain {
    pub degree: usize,
    pub coeffs: DVector<f64>,
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Sorts `idx` in place and returns the permutation sign, or 0 if an index repeats.
fn sort_sign(idx: &mut [usize]) -> f64 {
    let mut sign = 1.0;
    for i in 0..idx.len() {
        for j in 0..idx.len() - 1 - i {
            if idx[j] > idx[j + 1] {
                idx.swap(j, j + 1);
                sign = -sign;
            } else if idx[j] == idx[j + 1] {
                return 0.0;
            }
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        return 0.0;
    }
    sign
}

impl SpencerComplex {
    pub fn new(g: &CarnotAlgebra) -> SpencerComplex {
        SpencerComplex::with_normalization(g, Normalization::Free)
    }

    pub fn with_normalization(g: &CarnotAlgebra, norm: Normalization) -> SpencerComplex {
        let alg = &g.algebra;
        let n = alg.dim();
        let gram = lie::induced_inner_product_with(g, norm);
        let b = linalg::orthonormal_basis(&gram).expect("induced Gram is positive definite");
        let binv = b.clone().try_inverse().expect("basis is invertible");
        let mut bracket = Vec::with_capacity(n * n);
        for a in 0..n {
            for c in 0..n {
                let u: Vec<f64> = b.column(a).iter().cloned().collect();
                let v: Vec<f64> = b.column(c).iter().cloned().collect();
                bracket.push(&binv * DVector::from_vec(alg.bracket(&u, &v)));
            }
        }
        let iso = lie::isometry_algebra(g);
        let local: Vec<DVector<f64>> = iso
            .generators
            .iter()
            .map(|d| {
                let dl = &binv * d * &b;
                DVector::from_column_slice(dl.as_slice())
            })
            .collect();
        let onb = linalg::gram_schmidt(&local, |x, y| x.dot(y), 1e-10);
        let d: Vec<DMatrix<f64>> = onb.iter().map(|v| DMatrix::from_column_slice(n, n, v.as_slice())).collect();
        let m = d.len();
        let mut d_bracket = Vec::with_capacity(m * m);
        for s in 0..m {
            for t in 0..m {
                let c = &d[s] * &d[t] - &d[t] * &d[s];
                d_bracket.push(DVector::from_iterator(m, d.iter().map(|e| e.dot(&c))));
            }
        }
        SpencerComplex { n, m, bracket, d, d_bracket }
    }

    pub fn dim_minus(&self) -> usize {
        self.n
    }

    pub fn dim_zero(&self) -> usize {
        self.m
    }

    /// Orthonormal basis of `g_0` as matrices on orthonormal coordinates.
    pub fn g0_basis(&self) -> &[DMatrix<f64>] {
        &self.d
    }

    pub fn dim_cochains(&self, k: usize) -> usize {
        subsets(self.n, k).len() * (self.n + self.m)
    }

    pub fn zero(&self, k: usize) -> Cochain {
        Cochain { degree: k, coeffs: DVector::zeros(self.dim_cochains(k)) }
    }

    pub fn random<R: Rng>(&self, k: usize, rng: &mut R) -> Cochain {
        let dim = self.dim_cochains(k);
        Cochain { degree: k, coeffs: DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0)) }
    }

    /// Bracket in `g`: `[D1 + A, D2 + B] = [D1,D2] + D1 B - D2 A + [A,B]`.
    pub fn bracket_g(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let (n, m) = (self.n, self.m);
        let a = x.rows(0, n);
        let b = y.rows(0, n);
        let mut out = DVector::zeros(n + m);
        for i in 0..n {
            for j in 0..n {
                let s = a[i] * b[j];
                if s != 0.0 {
                    out.rows_mut(0, n).axpy(s, &self.bracket[i * n + j], 1.0);
                }
            }
        }
        for s in 0..m {
            let xs = x[n + s];
            let ys = y[n + s];
            if xs != 0.0 {
                let v = &self.d[s] * b;
                out.rows_mut(0, n).axpy(xs, &v, 1.0);
            }
            if ys != 0.0 {
                let v = &self.d[s] * a;
                out.rows_mut(0, n).axpy(-ys, &v, 1.0);
            }
            for t in 0..m {
                let w = xs * y[n + t];
                if w != 0.0 {
                    out.rows_mut(n, m).axpy(w, &self.d_bracket[s * m + t], 1.0);
                }
            }
        }
        out
    }

    /// Matrix of `∂: C^k → C^{k+1}` in the orthonormal cochain bases.
    pub fn d_matrix(&self, k: usize) -> DMatrix<f64> {
        let (n, m) = (self.n, self.m);
        let w = n + m;
        let src = subsets(n, k);
        let dst = subsets(n, k + 1);
        let mut mat = DMatrix::zeros(dst.len() * w, src.len() * w);
        let unit = |a: usize| {
            let mut v = DVector::zeros(w);
            v[a] = 1.0;
            v
        };
        for (col_s, s) in src.iter().enumerate() {
            for r in 0..w {
                let col = col_s * w + r;
                // α = f^{s} ⊗ e_r; α(tuple) for a sorted-or-not tuple of basis indices.
                let alpha = |tuple: &[usize]| -> f64 {
                    let mut t = tuple.to_vec();
                    let sign = sort_sign(&mut t);
                    if sign != 0.0 && t == *s {
                        sign
                    } else {
                        0.0
                    }
                };
                for (row_t, t) in dst.iter().enumerate() {
                    let mut val = DVector::<f64>::zeros(w);
                    // Σ_i (-1)^i [A_i, α(…Â_i…)]
                    for i in 0..=k {
                        let rest: Vec<usize> = t.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).collect();
                        let c = alpha(&rest);
                        if c != 0.0 {
                            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                            val += self.bracket_g(&unit(t[i]), &unit(r)) * (sign * c);
                        }
                    }
                    // Σ_{i<j} (-1)^{i+j} α([A_i,A_j], …Â_i…Â_j…)
                    for i in 0..=k {
                        for j in i + 1..=k {
                            let rest: Vec<usize> =
                                t.iter().enumerate().filter(|&(l, _)| l != i && l != j).map(|(_, &x)| x).collect();
                            let br = &self.bracket[t[i] * n + t[j]];
                            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                            for (c, &bc) in br.iter().enumerate() {
                                if bc == 0.0 {
                                    continue;
                                }
                                let mut tuple = vec![c];
                                tuple.extend_from_slice(&rest);
                                let a = alpha(&tuple);
                                if a != 0.0 {
                                    val[r] += sign * bc * a;
                                }
                            }
                        }
                    }
                    for (o, &v) in val.iter().enumerate() {
                        if v != 0.0 {
                            mat[(row_t * w + o, col)] += v;
                        }
                    }
                }
            }
        }
        mat
    }

    pub fn spencer_d(&self, alpha: &Cochain) -> Cochain {
        let d = self.d_matrix(alpha.degree);
        Cochain { degree: alpha.degree + 1, coeffs: d * &alpha.coeffs }
    }

    /// Adjoint of `∂`, the transpose in orthonormal bases.
    pub fn spencer_dstar(&self, kappa: &Cochain) -> Cochain {
        assert!(kappa.degree >= 1, "∂* needs degree at least 1");
        let d = self.d_matrix(kappa.degree - 1);
        Cochain { degree: kappa.degree - 1, coeffs: d.transpose() * &kappa.coeffs }
    }

    /// Value `α(f_{i_0}, …)` on basis indices, as a vector in `g`.
    pub fn evaluate(&self, alpha: &Cochain, tuple: &[usize]) -> DVector<f64> {
        let w = self.n + self.m;
        let mut t = tuple.to_vec();
        let sign = sort_sign(&mut t);
        if sign == 0.0 {
            return DVector::zeros(w);
        }
        let pos = subsets(self.n, alpha.degree).iter().position(|s| *s == t).expect("valid tuple");
        alpha.coeffs.rows(pos * w, w).into_owned() * sign
    }

    /// Cochain `f^{tuple} ⊗ v`.
    pub fn basis_cochain(&self, tuple: &[usize], v: &DVector<f64>) -> Cochain {
        let k = tuple.len();
        let w = self.n + self.m;
        let mut c = self.zero(k);
        let mut t = tuple.to_vec();
        let sign = sort_sign(&mut t);
        let pos = subsets(self.n, k).iter().position(|s| *s == t).expect("valid tuple");
        c.coeffs.rows_mut(pos * w, w).copy_from(&(v * sign));
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{cartan_nilpotent, free_nilpotent, heisenberg};
    use rand::SeedableRng;

    fn algebras() -> Vec<CarnotAlgebra> {
        vec![
            heisenberg(&[1.0]).unwrap(),
            heisenberg(&[1.0, 1.0]).unwrap(),
            heisenberg(&[1.0, 2.0]).unwrap(),
            cartan_nilpotent(),
        ]
    }

    #[test]
    fn d_squared_vanishes() {
        for g in algebras() {
            let cx = SpencerComplex::new(&g);
            for k in 0..cx.dim_minus() {
                let dd = cx.d_matrix(k + 1) * cx.d_matrix(k);
                assert!(dd.amax() <= 1e-12, "k={k} residual {}", dd.amax());
                let ss = cx.d_matrix(k).transpose() * cx.d_matrix(k + 1).transpose();
                assert!(ss.amax() <= 1e-12);
            }
        }
    }

    #[test]
    fn zero_maps_to_zero() {
        let cx = SpencerComplex::new(&cartan_nilpotent());
        assert_eq!(cx.spencer_d(&cx.zero(2)).coeffs.amax(), 0.0);
        assert_eq!(cx.spencer_dstar(&cx.zero(2)).coeffs.amax(), 0.0);
    }

    #[test]
    fn adjointness_on_random_pairs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for g in algebras() {
            let cx = SpencerComplex::new(&g);
            for _ in 0..50 {
                let k = rng.random_range(0..3);
                let a = cx.random(k, &mut rng);
                let b = cx.random(k + 1, &mut rng);
                let lhs = cx.spencer_d(&a).coeffs.dot(&b.coeffs);
                let rhs = a.coeffs.dot(&cx.spencer_dstar(&b).coeffs);
                assert!((lhs - rhs).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn abelian_differential_of_rotation_cochain() {
        // Step one: g_- = R², g_0 = so(2); α = f^0 ⊗ D.
        let g = free_nilpotent(2, 1, None).unwrap();
        let cx = SpencerComplex::new(&g);
        assert_eq!(cx.dim_zero(), 1);
        let d = cx.g0_basis()[0].clone();
        let mut v = DVector::zeros(3);
        v[2] = 1.0;
        let alpha = cx.basis_cochain(&[0], &v);
        let da = cx.spencer_d(&alpha);
        // (∂α)(f_0, f_1) = [f_0, α(f_1)] - [f_1, α(f_0)] = -[f_1, D] = D f_1.
        let got = cx.evaluate(&da, &[0, 1]);
        let expected = d.column(1).into_owned();
        assert!((got.rows(0, 2) - expected).amax() < 1e-14);
        assert_eq!(got[2], 0.0);
    }

    #[test]
    fn gram_operator_is_positive_semidefinite() {
        let cx = SpencerComplex::new(&heisenberg(&[1.0]).unwrap());
        let d = cx.d_matrix(1);
        let q = d.transpose() * &d;
        assert!((&q - q.transpose()).amax() < 1e-14);
        let ev = linalg::sym_eigenvalues_desc(&q);
        assert!(ev.iter().all(|&x| x > -1e-12));
    }

    #[test]
    fn mixed_bracket_rule() {
        let cx = SpencerComplex::new(&heisenberg(&[1.0]).unwrap());
        let w = cx.dim_minus() + cx.dim_zero();
        let mut a = DVector::zeros(w);
        a[0] = 1.0;
        let mut dd = DVector::zeros(w);
        dd[3] = 1.0;
        // [A, D] = -D A
        let got = cx.bracket_g(&a, &dd);
        let expected = -(&cx.g0_basis()[0] * a.rows(0, 3));
        assert!((got.rows(0, 3) - expected).amax() < 1e-14);
    }
}
