//! Pointwise frame calculus on jets: a frame of vector fields around a base
//! point, its dual coframe and structure functions, and the operations the
//! connection constructions are written in.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::jet::{Jet, JetSpace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("frame is singular at the base point (|det| = {0:e})")]
    SingularFrame(f64),
    #[error("matrix is singular at the base point")]
    Singular,
    #[error("matrix is not positive definite at the base point")]
    NotPositiveDefinite,
    #[error("not enough derivatives: {0}")]
    OrderExhausted(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("distribution is not equiregular: {0}")]
    NonEquiregular(String),
    #[error("undecidable: {0}")]
    Undecidable(String),
    #[error("left the chart domain at {0}")]
    OutOfChart(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error(transparent)]
    Expr(#[from] crate::expr::ExprError),
    #[error(transparent)]
    Lie(#[from] crate::lie::LieError),
}

pub type JetMat = Vec<Vec<Jet>>;

pub fn jconst(like: &Jet, v: f64) -> Jet {
    Jet::constant(like.space(), like.order(), v)
}

pub fn zeros(like: &Jet, n: usize) -> Vec<Jet> {
    vec![jconst(like, 0.0); n]
}

pub fn identity(like: &Jet, n: usize) -> JetMat {
    (0..n).map(|i| (0..n).map(|j| jconst(like, if i == j { 1.0 } else { 0.0 })).collect()).collect()
}

pub fn dot(a: &[Jet], b: &[Jet]) -> Jet {
    let mut s = &a[0] * &b[0];
    for i in 1..a.len() {
        s = &s + &(&a[i] * &b[i]);
    }
    s
}

pub fn mat_vec(m: &JetMat, v: &[Jet]) -> Vec<Jet> {
    m.iter().map(|row| dot(row, v)).collect()
}

pub fn mat_mul(a: &JetMat, b: &JetMat) -> JetMat {
    let n = a.len();
    let k = b.len();
    let m = b[0].len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut s = &a[i][0] * &b[0][j];
                    for l in 1..k {
                        s = &s + &(&a[i][l] * &b[l][j]);
                    }
                    s
                })
                .collect()
        })
        .collect()
}

pub fn transpose(a: &JetMat) -> JetMat {
    let n = a.len();
    let m = a[0].len();
    (0..m).map(|j| (0..n).map(|i| a[i][j].clone()).collect()).collect()
}

pub fn mat_add(a: &JetMat, b: &JetMat, s: f64) -> JetMat {
    a.iter().zip(b).map(|(r, q)| r.iter().zip(q).map(|(x, y)| x.axpy(s, y)).collect()).collect()
}

pub fn values(m: &JetMat) -> DMatrix<f64> {
    DMatrix::from_fn(m.len(), m[0].len(), |i, j| m[i][j].value())
}

pub fn vec_axpy(a: &[Jet], s: &Jet, b: &[Jet]) -> Vec<Jet> {
    a.iter().zip(b).map(|(x, y)| x + &(s * y)).collect()
}

/// Solves `a x = b` for a square jet matrix, pivoting on base-point values.
pub fn solve(a: &JetMat, b: &JetMat) -> Result<JetMat, GeomError> {
    let n = a.len();
    let mut a = a.clone();
    let mut b = b.clone();
    let scale = a.iter().flatten().map(|x| x.value().abs()).fold(0.0, f64::max);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].value().abs().partial_cmp(&a[j][col].value().abs()).unwrap())
            .unwrap();
        if a[piv][col].value().abs() <= 1e-13 * scale.max(f64::MIN_POSITIVE) {
            return Err(GeomError::Singular);
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = a[col][col].recip();
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = &a[row][col] * &inv;
            if f.coeffs().iter().all(|&x| x == 0.0) {
                continue;
            }
            for k in col..n {
                a[row][k] = &a[row][k] - &(&f * &a[col][k]);
            }
            for k in 0..b[0].len() {
                b[row][k] = &b[row][k] - &(&f * &b[col][k]);
            }
        }
    }
    Ok((0..n).map(|i| {
        let inv = a[i][i].recip();
        b[i].iter().map(|x| x * &inv).collect()
    })
    .collect())
}

pub fn inverse(a: &JetMat) -> Result<JetMat, GeomError> {
    solve(a, &identity(&a[0][0], a.len()))
}

/// Lower-triangular `L` with `m = L Lᵀ`.
pub fn cholesky(m: &JetMat) -> Result<JetMat, GeomError> {
    let n = m.len();
    let mut l = vec![zeros(&m[0][0], n); n];
    for j in 0..n {
        let mut d = m[j][j].clone();
        for k in 0..j {
            d = &d - &(&l[j][k] * &l[j][k]);
        }
        if d.value() <= 0.0 {
            return Err(GeomError::NotPositiveDefinite);
        }
        l[j][j] = d.sqrt();
        let inv = l[j][j].recip();
        for i in j + 1..n {
            let mut s = m[i][j].clone();
            for k in 0..j {
                s = &s - &(&l[i][k] * &l[j][k]);
            }
            l[i][j] = &s * &inv;
        }
    }
    Ok(l)
}

/// A frame `e_1..e_n` near a base point, stored by coordinate components.
#[derive(Debug, Clone)]
pub struct Frame {
    /// `fields[i][m]`: component `m` of `e_i`.
    pub fields: JetMat,
    /// `coframe[k][m]`: dual coframe, `Σ_m coframe[k][m] fields[i][m] = δ_ik`.
    pub coframe: JetMat,
    /// `c[i][j][k]`: `[e_i, e_j] = Σ_k c[i][j][k] e_k`.
    pub c: Vec<JetMat>,
}

/// Coordinate components of the bracket of two coordinate-component fields.
pub fn coord_bracket(x: &[Jet], y: &[Jet]) -> Vec<Jet> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let mut s = jconst(&x[0], 0.0).truncate(x[0].order().min(y[0].order()).saturating_sub(1));
            for m in 0..n {
                s = &s + &(&x[m] * &y[k].deriv(m));
                s = &s - &(&y[m] * &x[k].deriv(m));
            }
            s
        })
        .collect()
}

impl Frame {
    pub fn new(fields: JetMat) -> Result<Frame, GeomError> {
        let n = fields.len();
        if fields.iter().flatten().any(|x| x.order() == 0) {
            return Err(GeomError::OrderExhausted("frame fields need first-order jets".into()));
        }
        let det = values(&fields).determinant();
        if det.abs() <= 1e-9 {
            return Err(GeomError::SingularFrame(det));
        }
        // fields as columns: F[m][i] = fields[i][m]; coframe = F^{-1}.
        let coframe = inverse(&transpose(&fields))?;
        let mut c = vec![vec![Vec::new(); n]; n];
        for i in 0..n {
            for j in 0..n {
                if j < i {
                    c[i][j] = c[j][i].iter().map(|x: &Jet| -x).collect();
                    continue;
                }
                if i == j {
                    let o = fields[i][0].order().saturating_sub(1);
                    c[i][j] = zeros(&fields[i][0].truncate(o), n);
                    continue;
                }
                let br = coord_bracket(&fields[i], &fields[j]);
                c[i][j] = mat_vec(&coframe, &br);
            }
        }
        Ok(Frame { fields, coframe, c })
    }

    pub fn dim(&self) -> usize {
        self.fields.len()
    }

    pub fn space(&self) -> &std::sync::Arc<JetSpace> {
        self.fields[0][0].space()
    }

    /// Lowest jet order among the structure functions.
    pub fn order(&self) -> usize {
        self.c.iter().flatten().flatten().map(|x| x.order()).min().unwrap_or(0)
    }

    /// `e_i(f)`.
    pub fn apply(&self, i: usize, f: &Jet) -> Jet {
        let mut s = &self.fields[i][0] * &f.deriv(0);
        for m in 1..self.dim() {
            s = &s + &(&self.fields[i][m] * &f.deriv(m));
        }
        s
    }

    /// `V(f)` for `V = Σ v_i e_i`.
    pub fn apply_vec(&self, v: &[Jet], f: &Jet) -> Jet {
        let comps = self.to_coords(v);
        let mut s = &comps[0] * &f.deriv(0);
        for m in 1..self.dim() {
            s = &s + &(&comps[m] * &f.deriv(m));
        }
        s
    }

    pub fn to_coords(&self, v: &[Jet]) -> Vec<Jet> {
        let n = self.dim();
        (0..n)
            .map(|m| {
                let mut s = &v[0] * &self.fields[0][m];
                for i in 1..n {
                    s = &s + &(&v[i] * &self.fields[i][m]);
                }
                s
            })
            .collect()
    }

    pub fn from_coords(&self, v: &[Jet]) -> Vec<Jet> {
        mat_vec(&self.coframe, v)
    }

    /// Frame components of `[U, V]` for frame-component fields `u`, `v`.
    pub fn bracket(&self, u: &[Jet], v: &[Jet]) -> Vec<Jet> {
        let n = self.dim();
        (0..n)
            .map(|k| {
                let mut s = &self.apply_vec(u, &v[k]) - &self.apply_vec(v, &u[k]);
                for i in 0..n {
                    if u[i].coeffs().iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    for j in 0..n {
                        if i != j {
                            s = &s + &(&(&u[i] * &v[j]) * &self.c[i][j][k]);
                        }
                    }
                }
                s
            })
            .collect()
    }

    /// Frame `e'_a = Σ_i a[a][i] e_i`.
    pub fn recombine(&self, a: &JetMat) -> Result<Frame, GeomError> {
        let fields = a.iter().map(|row| self.to_coords(row)).collect();
        Frame::new(fields)
    }

    /// `dα(e_i, e_j)` for a one-form with frame components `alpha[k] = α(e_k)`.
    pub fn d_one_form(&self, alpha: &[Jet]) -> JetMat {
        let n = self.dim();
        let mut out = vec![Vec::with_capacity(n); n];
        for i in 0..n {
            for j in 0..n {
                let mut s = &self.apply(i, &alpha[j]) - &self.apply(j, &alpha[i]);
                for k in 0..n {
                    s = &s - &(&self.c[i][j][k] * &alpha[k]);
                }
                out[i].push(s);
            }
        }
        out
    }

    /// `dω(e_i, e_j, e_k)` for a two-form `omega[i][j] = ω(e_i, e_j)`.
    pub fn d_two_form(&self, omega: &JetMat) -> Vec<JetMat> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut plane = Vec::with_capacity(n);
            for j in 0..n {
                let mut row = Vec::with_capacity(n);
                for k in 0..n {
                    let mut s = &(&self.apply(i, &omega[j][k]) - &self.apply(j, &omega[i][k])) + &self.apply(k, &omega[i][j]);
                    for l in 0..n {
                        s = &s - &(&self.c[i][j][l] * &omega[l][k]);
                        s = &s + &(&self.c[i][k][l] * &omega[l][j]);
                        s = &s - &(&self.c[j][k][l] * &omega[l][i]);
                    }
                    row.push(s);
                }
                plane.push(row);
            }
            out.push(plane);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::coordinate_jets;

    fn heisenberg_frame(p: &[f64], order: usize) -> Frame {
        let x = coordinate_jets(p, order);
        let one = jconst(&x[0], 1.0);
        let zero = jconst(&x[0], 0.0);
        let f1 = vec![one.clone(), zero.clone(), x[1].scale(-0.5)];
        let f2 = vec![zero.clone(), one.clone(), x[0].scale(0.5)];
        let f3 = vec![zero.clone(), zero, one];
        Frame::new(vec![f1, f2, f3]).unwrap()
    }

    #[test]
    fn heisenberg_structure_functions() {
        let f = heisenberg_frame(&[0.3, -0.7, 1.1], 3);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let expect = match (i, j, k) {
                        (0, 1, 2) => 1.0,
                        (1, 0, 2) => -1.0,
                        _ => 0.0,
                    };
                    assert!((f.c[i][j][k].value() - expect).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn solve_and_cholesky_on_jets() {
        let x = coordinate_jets(&[0.4, 0.2], 4);
        let two = jconst(&x[0], 2.0);
        let a = vec![vec![&two + &x[0], x[1].clone()], vec![x[1].clone(), &two + &(&x[0] * &x[1])]];
        let inv = inverse(&a).unwrap();
        let id = mat_mul(&a, &inv);
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[i][j].value() - e).abs() < 1e-13);
                assert!(id[i][j].coeffs()[1..].iter().all(|c| c.abs() < 1e-12));
            }
        }
        let l = cholesky(&a).unwrap();
        let llt = mat_mul(&l, &transpose(&l));
        for i in 0..2 {
            for j in 0..2 {
                let d = &llt[i][j] - &a[i][j];
                assert!(d.coeffs().iter().all(|c| c.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn exterior_derivative_squares_to_zero() {
        // A non-constant frame and a generic one-form.
        let x = coordinate_jets(&[0.2, 0.5, -0.3], 5);
        let one = jconst(&x[0], 1.0);
        let zero = jconst(&x[0], 0.0);
        let f1 = vec![one.clone(), x[2].clone(), &x[1] * &x[1]];
        let f2 = vec![zero.clone(), &one + &x[0].scale(0.1), x[0].sin()];
        let f3 = vec![x[1].scale(0.3), zero, one.clone()];
        let f = Frame::new(vec![f1, f2, f3]).unwrap();
        let alpha = vec![x[0].exp(), &x[1] * &x[2], x[0].cos()];
        let da = f.d_one_form(&alpha);
        let dda = f.d_two_form(&da);
        for plane in &dda {
            for row in plane {
                for v in row {
                    assert!(v.value().abs() < 1e-12, "{}", v.value());
                }
            }
        }
    }

    #[test]
    fn bracket_agrees_with_coordinates() {
        let x = coordinate_jets(&[0.2, 0.5, -0.3], 4);
        let f = heisenberg_frame(&[0.2, 0.5, -0.3], 4);
        let u = vec![x[0].clone(), jconst(&x[0], 1.0), &x[1] * &x[2]];
        let v = vec![x[2].sin(), x[0].clone(), jconst(&x[0], 0.5)];
        let in_frame = f.to_coords(&f.bracket(&u, &v));
        let direct = coord_bracket(&f.to_coords(&u), &f.to_coords(&v));
        for (a, b) in in_frame.iter().zip(&direct) {
            assert!((a - b).coeffs().iter().all(|c| c.abs() < 1e-12));
        }
    }
}
