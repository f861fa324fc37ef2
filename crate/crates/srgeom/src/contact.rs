//! Contact sub-Riemannian manifolds of constant symbol `h_n(λ)`: the
//! normalized contact form, `J`, the eigenbundles of `-(J^θ)²`, the Reeb
//! field, the Morimoto grading and the connections `∇′`, `∇″` and `∇`.
//!
//! Everything is computed as jets at one point. The input frame must list
//! the horizontal fields first; its last field is only used as a transverse
//! direction, and fixes the orientation of `Ann(E)` by `θ(T) > 0`.

use serde::{Deserialize, Serialize};

use crate::connection::{Connection, GradedFrame, Tensor3};
use crate::frame::{self, jconst, Frame, GeomError, JetMat};
use crate::jet::Jet;
use crate::linalg;
use crate::manifold::FramedManifold;

/// Eigenvalues of `-(J^θ)²` closer than this are one cluster.
pub const CLUSTER_TOL: f64 = 1e-6;

/// Coefficients in `W = (2 / tr Λ^{-2}) Σ_{i≠j} a_{ij} Υ_{ij}`. `Stated` is
/// `a_{ij} = λ[i]² / λ[j]`; `Corrected` is `a_{ij} = 1 / λ[j]`, which is the
/// one that satisfies the torsion normalization (the two agree when `k = 1`,
/// where `W = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WFormula {
    Stated,
    #[default]
    Corrected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactOptions {
    /// Jet order of the input frame. The Morimoto connection keeps order
    /// `order - 4`; its curvature needs one more.
    pub order: usize,
    pub formula: WFormula,
    /// Use the opposite orientation of `Ann(E)`.
    pub flip: bool,
}

impl Default for ContactOptions {
    fn default() -> Self {
        ContactOptions { order: 5, formula: WFormula::default(), flip: false }
    }
}

/// Contact data at a point, in the frame `(X_1..X_{2n}, T)` with `X`
/// `g`-orthonormal.
#[derive(Debug, Clone)]
pub struct ContactData {
    pub frame: Frame,
    /// `θ = f · θ_T`, where `θ_T` is the dual of `T` vanishing on `E`.
    pub f: Jet,
    /// `J^θ[a][b] = ⟨X_a, J^θ X_b⟩ = dθ(X_a, X_b)`.
    pub j_theta: JetMat,
    /// Distinct `λ[1] = 1 < … < λ[k]`.
    pub lambda: Vec<f64>,
    pub multiplicity: Vec<usize>,
    /// Orthogonal projections onto `E[j]`.
    pub proj: Vec<JetMat>,
    /// `Λ` and `J = Λ J^θ` on `E`.
    pub big_lambda: JetMat,
    pub j: JetMat,
    /// Reeb field in frame components.
    pub reeb: Vec<Jet>,
}

impl ContactData {
    pub fn rank(&self) -> usize {
        self.j.len()
    }

    /// `λ_x` with repetitions (one entry per pair of dimensions).
    pub fn lambda_vector(&self) -> Vec<f64> {
        self.lambda.iter().zip(&self.multiplicity).flat_map(|(&l, &m)| std::iter::repeat_n(l, m / 2)).collect()
    }

    /// `tr Λ^{-2}`.
    pub fn trace_lambda_inv2(&self) -> f64 {
        self.lambda.iter().zip(&self.multiplicity).map(|(l, &m)| m as f64 / (l * l)).sum()
    }

    fn zero(&self) -> Jet {
        self.f.zero_like()
    }

    /// Horizontal projection along the Reeb line of a frame-component vector.
    fn horizontal_reeb(&self, v: &[Jet]) -> Vec<Jet> {
        let r = self.rank();
        let th = &self.f * &v[r];
        (0..r).map(|a| &v[a] - &(&th * &self.reeb[a])).collect()
    }

    /// `Υ_{ij} = ½ J tr_E pr[i][pr[j]×, pr[j]J×]` (horizontal components) for
    /// `i ≠ j`, brackets projected to `E` along the Reeb line.
    pub fn upsilon(&self) -> Vec<Vec<Option<Vec<Jet>>>> {
        let r = self.rank();
        let k = self.lambda.len();
        let n = r + 1;
        let ext = |v: Vec<Jet>| -> Vec<Jet> {
            let mut v = v;
            v.push(self.zero());
            v
        };
        let mut ups = vec![vec![None; k]; k];
        for jj in 0..k {
            // Trace over the orthonormal X_a.
            let mut acc = vec![self.zero(); n];
            for a in 0..r {
                let pa: Vec<Jet> = (0..r).map(|c| self.proj[jj][c][a].clone()).collect();
                let ja: Vec<Jet> = (0..r).map(|c| self.j[c][a].clone()).collect();
                let pja = frame::mat_vec(&self.proj[jj], &ja);
                let br = self.frame.bracket(&ext(pa), &ext(pja));
                for c in 0..n {
                    acc[c] = &acc[c] + &br[c];
                }
            }
            let h = self.horizontal_reeb(&acc);
            for ii in 0..k {
                if ii == jj {
                    continue;
                }
                let v = frame::mat_vec(&self.j, &frame::mat_vec(&self.proj[ii], &h));
                ups[ii][jj] = Some(v.iter().map(|x| x.scale(0.5)).collect());
            }
        }
        ups
    }

    /// The Morimoto field `W`.
    pub fn morimoto_w(&self, formula: WFormula) -> Vec<Jet> {
        let r = self.rank();
        let k = self.lambda.len();
        let c = 2.0 / self.trace_lambda_inv2();
        let ups = self.upsilon();
        let mut w = vec![self.zero(); r];
        for i in 0..k {
            for j in 0..k {
                if let Some(u) = &ups[i][j] {
                    let num = match formula {
                        WFormula::Stated => self.lambda[i].powi(2),
                        WFormula::Corrected => 1.0,
                    };
                    for a in 0..r {
                        w[a] = w[a].axpy(c * num / self.lambda[j], &u[a]);
                    }
                }
            }
        }
        w
    }
}

/// Extracts the contact data at `p`.
pub fn extract_contact_data(m: &FramedManifold, p: &[f64], opts: &ContactOptions) -> Result<ContactData, GeomError> {
    let n = m.dim();
    let r = m.rank();
    if r + 1 != n || r % 2 != 0 {
        return Err(GeomError::Precondition(format!("rank {r} in dimension {n} is not a contact distribution")));
    }
    let frame = m.adapted_frame(p, opts.order)?;
    let sign = if opts.flip { -1.0 } else { 1.0 };
    let omega: JetMat = (0..r).map(|a| (0..r).map(|b| frame.c[a][b][r].clone()).collect()).collect();
    let om = frame::values(&omega);
    let ev0 = linalg::sym_eigenvalues_desc(&(-(&om * &om)));
    let top = ev0[0];
    if top <= 0.0 || ev0[r - 1] <= 1e-10 * top {
        return Err(GeomError::Precondition("dθ is degenerate on E: not a contact distribution".into()));
    }
    // Cluster the normalized eigenvalues ν (largest first, so λ increasing).
    let mut nu: Vec<f64> = Vec::new();
    let mut mult: Vec<usize> = Vec::new();
    for &e in &ev0 {
        let v = e / top;
        match nu.last() {
            Some(&last) if (last - v).abs() <= CLUSTER_TOL => *mult.last_mut().unwrap() += 1,
            _ => {
                nu.push(v);
                mult.push(1);
            }
        }
    }
    if mult.iter().any(|m| m % 2 != 0) {
        return Err(GeomError::Precondition(format!("odd eigenvalue multiplicity {mult:?}")));
    }
    // Constant eigenvalues: tr(-f²Ω²) = Σ ν mult fixes f as a jet.
    let mut sum_sq = jconst(&omega[0][0], 0.0);
    for row in &omega {
        for x in row {
            sum_sq = &sum_sq + &(x * x);
        }
    }
    let total: f64 = nu.iter().zip(&mult).map(|(v, &m)| v * m as f64).sum();
    let f = (&sum_sq.recip().scale(total)).sqrt().scale(sign);
    let j_theta: JetMat = omega.iter().map(|row| row.iter().map(|x| -&(&f * x)).collect()).collect();
    let jt2 = frame::mat_mul(&j_theta, &j_theta);
    let mmat: JetMat = jt2.iter().map(|row| row.iter().map(|x| -x).collect()).collect();
    let like = &mmat[0][0];
    let id = frame::identity(like, r);
    // The eigenvalues of M must be constant to the working order, otherwise
    // the interpolated projections are not projections off the base point.
    let mut minpoly = id.clone();
    for &v in &nu {
        minpoly = frame::mat_mul(&minpoly, &frame::mat_add(&mmat, &id, -v));
    }
    let defect = minpoly.iter().flatten().flat_map(|x| x.coeffs().iter().map(|c| c.abs())).fold(0.0, f64::max);
    if defect > CLUSTER_TOL {
        return Err(GeomError::Precondition(format!("symbol is not constant near the base point (defect {defect:.3e})")));
    }
    let proj: Vec<JetMat> = (0..nu.len())
        .map(|j| {
            let mut pj = id.clone();
            for l in 0..nu.len() {
                if l == j {
                    continue;
                }
                let shifted = frame::mat_add(&mmat, &id, -nu[l]);
                let prod = frame::mat_mul(&pj, &shifted);
                pj = prod.iter().map(|row| row.iter().map(|x| x.scale(1.0 / (nu[j] - nu[l]))).collect()).collect();
            }
            pj
        })
        .collect();
    let lambda: Vec<f64> = nu.iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut big_lambda = frame::identity(like, r).iter().map(|row| row.iter().map(|x| x.scale(0.0)).collect()).collect::<JetMat>();
    for (j, pj) in proj.iter().enumerate() {
        big_lambda = frame::mat_add(&big_lambda, pj, lambda[j]);
    }
    let j = frame::mat_mul(&big_lambda, &j_theta);
    // Reeb field: θ(Z) = 1 and dθ(Z, X_b) = 0.
    let mut theta = frame::zeros(&f, n);
    theta[r] = f.clone();
    let dtheta = frame.d_one_form(&theta);
    let zt = f.recip();
    let a: JetMat = (0..r).map(|b| (0..r).map(|c| dtheta[c][b].clone()).collect()).collect();
    let rhs: JetMat = (0..r).map(|b| vec![-&(&zt * &dtheta[r][b])]).collect();
    let sol = frame::solve(&a, &rhs)?;
    let mut reeb: Vec<Jet> = sol.into_iter().map(|mut v| v.remove(0)).collect();
    reeb.push(zt);
    Ok(ContactData { frame, f, j_theta, lambda, multiplicity: mult, proj, big_lambda, j, reeb })
}

/// The grading `ker pr_{-1} = V^W` with its `g_I`-orthonormal frame
/// `(X_1..X_{2n}, e_Z)`, and the tensors the connections are built from,
/// extended by zero on `V^W`.
#[derive(Debug, Clone)]
pub struct ContactGrading {
    pub data: ContactData,
    pub w: Vec<Jet>,
    /// `Z^W = Z^0 - JW` in the components of `data.frame`.
    pub z_w: Vec<Jet>,
    pub graded: GradedFrame,
    pub proj: Vec<JetMat>,
    pub j: JetMat,
    pub big_lambda: JetMat,
}

fn extend(m: &JetMat, zero: &Jet) -> JetMat {
    let r = m.len();
    (0..=r).map(|a| (0..=r).map(|b| if a < r && b < r { m[a][b].clone() } else { zero.clone() }).collect()).collect()
}

impl ContactGrading {
    pub fn new(data: ContactData, w: Vec<Jet>) -> Result<ContactGrading, GeomError> {
        let r = data.rank();
        let jw = frame::mat_vec(&data.j, &w);
        let mut z_w: Vec<Jet> = (0..r).map(|a| &data.reeb[a] - &jw[a]).collect();
        z_w.push(data.reeb[r].clone());
        // Wedge normalization: |Z^W|² = 2 / tr Λ^{-2}.
        let s = (data.trace_lambda_inv2() / 2.0).sqrt();
        let ez: Vec<Jet> = z_w.iter().map(|x| x.scale(s)).collect();
        let mut fields: JetMat = data.frame.fields[..r].to_vec();
        fields.push(data.frame.to_coords(&ez));
        let graded = GradedFrame::new(Frame::new(fields)?, vec![r, 1])?;
        let zero = graded.frame.c[0][0][0].zero_like();
        let proj = data.proj.iter().map(|p| extend(p, &zero)).collect();
        let j = extend(&data.j, &zero);
        let big_lambda = extend(&data.big_lambda, &zero);
        Ok(ContactGrading { data, w, z_w, graded, proj, j, big_lambda })
    }

    pub fn morimoto(data: ContactData, formula: WFormula) -> Result<ContactGrading, GeomError> {
        let w = data.morimoto_w(formula);
        ContactGrading::new(data, w)
    }

    pub fn dim(&self) -> usize {
        self.graded.dim()
    }

    fn zero(&self) -> Jet {
        self.graded.frame.c[0][0][0].zero_like()
    }

    fn unit(&self, i: usize) -> Vec<Jet> {
        let z = self.zero();
        (0..self.dim()).map(|k| if k == i { jconst(&z, 1.0) } else { z.clone() }).collect()
    }

    fn column(m: &JetMat, b: usize) -> Vec<Jet> {
        m.iter().map(|row| row[b].clone()).collect()
    }

    /// `(L_V g_I)(A, B)` in the orthonormal frame.
    fn lie_metric(&self, v: &[Jet], a: &[Jet], b: &[Jet]) -> Jet {
        let f = &self.graded.frame;
        let mut s = f.apply_vec(v, &frame::dot(a, b));
        s = &s - &frame::dot(&f.bracket(v, a), b);
        s = &s - &frame::dot(a, &f.bracket(v, b));
        s
    }

    /// `∇′`: `E[j]` and `V^W` parallel, `∇′Z^W = 0`, and for horizontal `X`
    /// `∇′_Y X = Σ pr[j]∇^I_{pr[j]Y} pr[j]X + Σ pr[j][Y - pr[j]Y, pr[j]X] + τ_Y X`.
    pub fn connection_prime(&self) -> Connection {
        let n = self.dim();
        let r = n - 1;
        let lc = Connection::levi_civita(self.graded.clone());
        let f = &self.graded.frame;
        let mut gamma: Tensor3 = vec![vec![vec![self.zero(); n]; n]; n];
        for i in 0..n {
            let y = self.unit(i);
            for b in 0..r {
                let mut total = vec![self.zero(); n];
                for p in &self.proj {
                    let py = Self::column(p, i);
                    let px = Self::column(p, b);
                    let t1 = frame::mat_vec(p, &lc.covariant(&py, &px));
                    let rest: Vec<Jet> = y.iter().zip(&py).map(|(a, b)| a - b).collect();
                    let t2 = frame::mat_vec(p, &f.bracket(&rest, &px));
                    for k in 0..n {
                        total[k] = &(&total[k] + &t1[k]) + &t2[k];
                    }
                }
                // τ_Y X, horizontal.
                for k in 0..r {
                    let mut t = self.zero();
                    for p in &self.proj {
                        let py = Self::column(p, i);
                        let rest: Vec<Jet> = y.iter().zip(&py).map(|(a, b)| a - b).collect();
                        t = &t + &self.lie_metric(&rest, &Self::column(p, b), &Self::column(p, k));
                    }
                    total[k] = &total[k] + &t.scale(0.5);
                }
                for k in 0..n {
                    gamma[i][b][k] = total[k].clone();
                }
            }
        }
        Connection::new(self.graded.clone(), gamma)
    }

    /// `(∇_{e_i} J)` as a matrix.
    pub fn nabla_j(&self, conn: &Connection, i: usize) -> JetMat {
        let n = self.dim();
        let a = conn.matrix(i);
        let aj = frame::mat_mul(&a, &self.j);
        let ja = frame::mat_mul(&self.j, &a);
        (0..n)
            .map(|k| (0..n).map(|b| &(&conn.frame().apply(i, &self.j[k][b]) + &aj[k][b]) - &ja[k][b]).collect())
            .collect()
    }

    /// `∇″_{Y1} Y2 = ∇′_{Y1} Y2 + ½ (∇′_{Y1} J) J Y2`.
    pub fn connection_double_prime(&self, prime: &Connection) -> Connection {
        let n = self.dim();
        let mut gamma = prime.gamma.clone();
        for i in 0..n {
            let corr = frame::mat_mul(&self.nabla_j(prime, i), &self.j);
            for b in 0..n {
                for k in 0..n {
                    gamma[i][b][k] = gamma[i][b][k].axpy(0.5, &corr[k][b]);
                }
            }
        }
        Connection::new(self.graded.clone(), gamma)
    }

    /// `∇_{Y1} Y2 = ∇″_{Y1} Y2 + ½ R″(χ(Y1)) Y2`.
    pub fn morimoto_connection(&self) -> Result<Connection, GeomError> {
        let dp = self.connection_double_prime(&self.connection_prime());
        add_selector_curvature(&dp, 0.5)
    }
}

/// `Γ + s R(χ(·))` for a connection on a graded frame.
pub fn add_selector_curvature(conn: &Connection, s: f64) -> Result<Connection, GeomError> {
    let n = conn.dim();
    let r = conn.curvature()?;
    let chi = conn.graded.selector();
    let mut gamma: Tensor3 = conn.gamma.iter().map(|a| a.iter().map(|b| b.iter().map(|x| x.truncate(r[0][1][0][0].order())).collect()).collect()).collect();
    for i in 0..n {
        for p in 0..n {
            for q in p + 1..n {
                let w = &chi[i][p][q];
                if w.coeffs().iter().all(|&x| x == 0.0) {
                    continue;
                }
                for b in 0..n {
                    for k in 0..n {
                        gamma[i][b][k] = &gamma[i][b][k] + &(w * &r[p][q][b][k]).scale(s);
                    }
                }
            }
        }
    }
    Ok(Connection::new(conn.graded.clone(), gamma))
}
