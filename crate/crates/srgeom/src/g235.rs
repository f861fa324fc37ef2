//! Sub-Riemannian manifolds with growth vector (2,3,5).
//!
//! Everything is evaluated pointwise on jets. The inputs are an orthonormal
//! horizontal pair `X_1, X_2` in coordinate components; from it we build
//! the bracket frame `X_3 = [X_1,X_2]`, `X_4 = [X_1,X_3]`, `X_5 = [X_2,X_3]`
//! and, on top of that, the canonical flat-model frame `(X_1, X_2, Z, Y_1, Y_2)`,
//! the intrinsic grading, and the Morimoto grading and connection.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::connection::{Connection, FlatnessResiduals, GradedFrame, Tensor3};
use crate::frame::{self, jconst, Frame, GeomError, JetMat};
use crate::jet::Jet;
use crate::manifold::FramedManifold;

/// Which index sum is differentiated in the `X_1`, `X_2` coefficients of `Y_2`.
///
/// `Stated` differentiates `c_{25}^4 + c_{25}^5`; `Corrected` differentiates
/// `c_{24}^4 + c_{25}^5`, the coefficient of `Z` in `Y_2`, mirroring `Y_1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Y2Reading {
    Stated,
    #[default]
    Corrected,
}

/// Layer sizes of the (2,3,5) grading.
pub const LAYERS: [usize; 3] = [2, 1, 2];

/// Orthonormal horizontal pair of `m` at `p` in coordinate components.
pub fn horizontal_pair(m: &FramedManifold, p: &[f64], order: usize) -> Result<[Vec<Jet>; 2], GeomError> {
    if m.rank() != 2 || m.dim() != 5 {
        return Err(GeomError::Precondition(format!(
            "rank {} in dimension {} cannot have growth (2,3,5)",
            m.rank(),
            m.dim()
        )));
    }
    let f = m.adapted_frame(p, order)?;
    Ok([f.fields[0].clone(), f.fields[1].clone()])
}

/// `(cos α X_1 + sin α X_2, -sin α X_1 + cos α X_2)`.
pub fn rotate_pair(pair: &[Vec<Jet>; 2], alpha: &Jet) -> [Vec<Jet>; 2] {
    let (c, s) = (alpha.cos(), alpha.sin());
    let [x1, x2] = pair;
    let a = x1.iter().zip(x2).map(|(u, v)| &(&c * u) + &(&s * v)).collect();
    let b = x1.iter().zip(x2).map(|(u, v)| &(&c * v) - &(&s * u)).collect();
    [a, b]
}

/// The bracket frame `X_1, X_2, [X_1,X_2], [X_1,[X_1,X_2]], [X_2,[X_1,X_2]]`.
pub fn bracket_frame(pair: &[Vec<Jet>; 2]) -> Result<Frame, GeomError> {
    let [x1, x2] = pair;
    let x3 = frame::coord_bracket(x1, x2);
    let x4 = frame::coord_bracket(x1, &x3);
    let x5 = frame::coord_bracket(x2, &x3);
    Frame::new(vec![x1.clone(), x2.clone(), x3, x4, x5]).map_err(|e| match e {
        GeomError::SingularFrame(d) => GeomError::NonEquiregular(format!("growth is not (2,3,5): det {d:.3e}")),
        e => e,
    })
}

fn basis_vec(like: &Jet, n: usize, i: usize) -> Vec<Jet> {
    (0..n).map(|k| jconst(like, if k == i { 1.0 } else { 0.0 })).collect()
}

/// The canonical frame `X_1, X_2, Z, Y_1, Y_2`.
#[derive(Debug, Clone)]
pub struct Frame235 {
    /// `X_1..X_5`.
    pub base: Frame,
    /// Components of `Z`, `Y_1`, `Y_2` in `X_1..X_5`.
    pub z: Vec<Jet>,
    pub y: [Vec<Jet>; 2],
    /// `(X_1, X_2, Z, Y_1, Y_2)` as a graded, `ḡ`-orthonormal frame.
    pub graded: GradedFrame,
}

/// Builds `Z`, `Y_1`, `Y_2` from the structure functions of the bracket frame.
pub fn canonical_frame_235(pair: &[Vec<Jet>; 2], reading: Y2Reading) -> Result<Frame235, GeomError> {
    let base = bracket_frame(pair)?;
    let c = |i: usize, j: usize, k: usize| base.c[i - 1][j - 1][k - 1].clone();
    let like = c(1, 2, 3);
    let s1 = &c(1, 4, 4) + &c(1, 5, 5);
    let s2 = &c(2, 4, 4) + &c(2, 5, 5);
    let z = {
        let mut v = basis_vec(&like, 5, 2);
        v[0] = &c(2, 3, 3) + &s2;
        v[1] = -&(&c(1, 3, 3) + &s1);
        v
    };
    let d2 = match reading {
        Y2Reading::Stated => &c(2, 5, 4) + &c(2, 5, 5),
        Y2Reading::Corrected => s2.clone(),
    };
    let y_field = |top: usize, s: &Jet, ds: &Jet, j: usize| -> Vec<Jet> {
        // Y_j = X_{3+j} - s Z + (c_{2,3+j}^3 - X_2(s) + c_{2,3+j}^4 s1 + c_{2,3+j}^5 s2) X_1
        //       - (c_{1,3+j}^3 - X_1(s) + c_{1,3+j}^4 s1 + c_{1,3+j}^5 s2) X_2
        let k = 3 + j;
        let mut v: Vec<Jet> = z.iter().map(|x| -&(s * x)).collect();
        v[top] = &v[top] + &jconst(&like, 1.0);
        let a1 = &(&(&c(2, k, 3) - &base.apply(1, ds)) + &(&c(2, k, 4) * &s1)) + &(&c(2, k, 5) * &s2);
        let a2 = &(&(&c(1, k, 3) - &base.apply(0, ds)) + &(&c(1, k, 4) * &s1)) + &(&c(1, k, 5) * &s2);
        v[0] = &v[0] + &a1;
        v[1] = &v[1] - &a2;
        v
    };
    let y1 = y_field(3, &s1, &s1, 1);
    let y2 = y_field(4, &s2, &d2, 2);
    let rows = vec![basis_vec(&like, 5, 0), basis_vec(&like, 5, 1), z.clone(), y1.clone(), y2.clone()];
    let graded = GradedFrame::new(base.recombine(&rows)?, LAYERS.to_vec())?;
    Ok(Frame235 { base, z, y: [y1, y2], graded })
}

impl Frame235 {
    /// Coordinate components of `X_1, X_2, Z, Y_1, Y_2`.
    pub fn fields(&self) -> &JetMat {
        &self.graded.frame.fields
    }

    /// `ḡ` in coordinates at the base point.
    pub fn metric_values(&self) -> nalgebra::DMatrix<f64> {
        let co = frame::values(&self.graded.frame.coframe);
        co.transpose() * co
    }
}

/// The connection making `E`, `span{Z}`, `span{Y_1,Y_2}` parallel with
/// `∇Z = 0`, Levi-Civita of `ḡ` along `E`, and the bracket-plus-Lie-derivative
/// rule along `Z` and `Y_i`; the `Y`-block copies the `E`-block.
pub fn connection_235(f: &Frame235) -> Connection {
    base_connection(&f.graded)
}

/// Flatness verdict of the canonical connection at one point.
#[derive(Debug, Clone, Serialize)]
pub struct Flatness235 {
    pub flat: bool,
    pub residuals: FlatnessResiduals,
}

/// `R = 0` and `T = 𝕋` (i.e. `T(X_2,X_1) = Z`, `T(Z,X_j) = Y_j`, all else zero).
pub fn flatness_235(m: &FramedManifold, p: &[f64], tol: f64) -> Result<Flatness235, GeomError> {
    let pair = horizontal_pair(m, p, 6)?;
    let f = canonical_frame_235(&pair, Y2Reading::default())?;
    let residuals = connection_235(&f).flatness()?;
    Ok(Flatness235 { flat: residuals.torsion <= tol && residuals.curvature <= tol, residuals })
}

/// The intrinsic grading: `ker θ = (TM)'_{-1} ⊕ (TM)'_{-3}` from `dΨ`, and
/// `(TM)'_{-2} ⊕ (TM)'_{-3} = ker β_1 ∩ ker β_2` from `dθ`.
#[derive(Debug, Clone)]
pub struct IntrinsicGrading {
    pub base: Frame,
    /// `a_1, a_2, a_3` with `dΨ = θ ∧ (α_1∧α_5 - α_2∧α_4 + a_3 Ψ)`.
    pub a: [Jet; 3],
    /// `θ` in the coframe `α_1..α_5`.
    pub theta: Vec<Jet>,
    /// `dθ(X_i, X_j)`.
    pub dtheta: JetMat,
    /// `Z'` with `θ(Z') = 1`, spanning `(TM)'_{-2}`, in `X_1..X_5`.
    pub z: Vec<Jet>,
    /// `Y'_j ≡ X_{3+j} mod E^{-2}` spanning `(TM)'_{-3}`, in `X_1..X_5`.
    pub y: [Vec<Jet>; 2],
    /// Maps `X_1..X_5` components to components in `(X_1, X_2, Z', Y'_1, Y'_2)`.
    pub to_primed: JetMat,
}

pub fn intrinsic_grading_235(pair: &[Vec<Jet>; 2]) -> Result<IntrinsicGrading, GeomError> {
    let base = bracket_frame(pair)?;
    let like = base.c[0][1][2].clone();
    let zero = like.zero_like();
    let one = jconst(&like, 1.0);
    let mut psi: JetMat = vec![vec![zero.clone(); 5]; 5];
    psi[3][4] = one.clone();
    psi[4][3] = -&one;
    let dpsi = base.d_two_form(&psi);
    let a = [dpsi[0][3][4].clone(), dpsi[1][3][4].clone(), dpsi[2][3][4].clone()];
    let theta = vec![zero.clone(), zero.clone(), one.clone(), -&a[0], -&a[1]];
    let dtheta = base.d_one_form(&theta);
    // β_1 = dθ(X_2, ·), β_2 = -dθ(X_1, ·); β_1(X_1) = β_2(X_2) = dθ(X_2, X_1) = 1.
    let beta = |i: usize, v: usize| -> Jet {
        if i == 0 {
            dtheta[1][v].clone()
        } else {
            -&dtheta[0][v]
        }
    };
    // Solve for the X_1, X_2 parts of w = x_1 X_1 + x_2 X_2 + rest with β(w) = 0.
    let b2: JetMat = (0..2).map(|i| (0..2).map(|k| beta(i, k)).collect()).collect();
    let kernel_fix = |rest: &[Jet]| -> Result<Vec<Jet>, GeomError> {
        let rhs: JetMat = (0..2)
            .map(|i| {
                let mut s = zero.clone();
                for (v, r) in rest.iter().enumerate().skip(2) {
                    s = &s + &(&beta(i, v) * r);
                }
                vec![-&s]
            })
            .collect();
        let sol = frame::solve(&b2, &rhs)?;
        let mut w = rest.to_vec();
        w[0] = sol[0][0].clone();
        w[1] = sol[1][0].clone();
        Ok(w)
    };
    let z = kernel_fix(&basis_vec(&like, 5, 2))?;
    // θ(Y') = 0 with Y' = X_{3+j} + t X_3 + ...: t = a_j.
    let mut y = Vec::new();
    for j in 0..2 {
        let mut rest = basis_vec(&like, 5, 3 + j);
        rest[2] = a[j].clone();
        y.push(kernel_fix(&rest)?);
    }
    let y: [Vec<Jet>; 2] = [y[0].clone(), y[1].clone()];
    let rows = vec![basis_vec(&like, 5, 0), basis_vec(&like, 5, 1), z.clone(), y[0].clone(), y[1].clone()];
    let to_primed = frame::inverse(&frame::transpose(&rows))?;
    Ok(IntrinsicGrading { base, a, theta, dtheta, z, y, to_primed })
}

impl IntrinsicGrading {
    /// Residual of `dΨ = θ ∧ (α_1∧α_5 - α_2∧α_4 + a_3 Ψ)` at the base point.
    pub fn dpsi_residual(&self) -> f64 {
        let like = &self.a[0];
        let zero = like.zero_like();
        let one = jconst(like, 1.0);
        let mut psi: JetMat = vec![vec![zero.clone(); 5]; 5];
        psi[3][4] = one.clone();
        psi[4][3] = -&one;
        let dpsi = self.base.d_two_form(&psi);
        // σ = α_1∧α_5 - α_2∧α_4 + a_3 α_4∧α_5; e.g. dΨ(X_3, X_2, X_4) = c_{32}^5 = -1.
        let mut sigma = vec![vec![0.0; 5]; 5];
        let a3 = self.a[2].value();
        for (i, j, v) in [(0, 4, 1.0), (1, 3, -1.0), (3, 4, a3)] {
            sigma[i][j] += v;
            sigma[j][i] -= v;
        }
        let th: Vec<f64> = self.theta.iter().map(|x| x.value()).collect();
        let mut out: f64 = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    let wedge = th[i] * sigma[j][k] + th[j] * sigma[k][i] + th[k] * sigma[i][j];
                    out = out.max((dpsi[i][j][k].value() - wedge).abs());
                }
            }
        }
        out
    }
}

/// `φ` in components: kills `E^{-2}`, `φ(X_4) = X_2`, `φ(X_5) = -X_1`.
pub fn phi(v: &[Jet]) -> Vec<Jet> {
    vec![-&v[4], v[3].clone()]
}

/// `J` on `E` components: `J X_1 = X_2`, `J X_2 = -X_1`.
pub fn j_e(u: &[Jet]) -> Vec<Jet> {
    vec![-&u[1], u[0].clone()]
}

/// An `E` vector as `X_1..X_5` components.
fn embed(u: &[Jet]) -> Vec<Jet> {
    let z = u[0].zero_like();
    vec![u[0].clone(), u[1].clone(), z.clone(), z.clone(), z]
}

fn add(a: &[Jet], b: &[Jet]) -> Vec<Jet> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub(a: &[Jet], b: &[Jet]) -> Vec<Jet> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn scal(s: &Jet, a: &[Jet]) -> Vec<Jet> {
    a.iter().map(|x| s * x).collect()
}

/// Parameters `W_1, W_2, 𝒜` of a grading relative to the intrinsic one:
/// `Z = Z' + J W_1` and `ℓX = ℓ'X + ⟨J W_2, X⟩ Z' + 𝒜 X`.
#[derive(Debug, Clone)]
pub struct GradingParams {
    pub w1: Vec<Jet>,
    pub w2: Vec<Jet>,
    /// `𝒜 X_b = Σ_k a[k][b] X_k`.
    pub a: JetMat,
}

impl GradingParams {
    pub fn zero(like: &Jet) -> GradingParams {
        let z = like.zero_like();
        GradingParams { w1: vec![z.clone(); 2], w2: vec![z.clone(); 2], a: vec![vec![z; 2]; 2] }
    }
}

/// How the Morimoto grading and `μ` are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MorimotoFormula {
    /// `W_1 = W_2 = Υ`, `𝒜` from its closed form and `μ_{-1} = ⟨Υ, ·⟩`;
    /// `μ_{-2}, μ_{-3}` from the curvature condition. Fails the normalization.
    Stated,
    /// Grading and `μ` solved from the normalization conditions.
    #[default]
    Solved,
}

impl IntrinsicGrading {
    pub(crate) fn like(&self) -> &Jet {
        &self.a[0]
    }

    /// Components of `v` in `(X_1, X_2, Z', Y'_1, Y'_2)`.
    pub fn primed_coords(&self, v: &[Jet]) -> Vec<Jet> {
        frame::mat_vec(&self.to_primed, v)
    }

    /// `ℓ'` on `E` components: `ℓ'X_1 = -Y'_2`, `ℓ'X_2 = Y'_1`.
    pub fn ell_prime(&self, u: &[Jet]) -> Vec<Jet> {
        sub(&scal(&u[1], &self.y[0]), &scal(&u[0], &self.y[1]))
    }

    /// `ℓ'` on any vector, through its `(TM)'_{-1}` part.
    pub fn ell_prime_full(&self, v: &[Jet]) -> Vec<Jet> {
        let c = self.primed_coords(v);
        self.ell_prime(&c[..2])
    }

    pub(crate) fn unit(&self, b: usize) -> Vec<Jet> {
        basis_vec(self.like(), 5, b)
    }

    /// `Υ` from `JΥ = ¼ tr_E φ(ℓ'[×, J×] - [×, ℓ'J×] - [ℓ'×, J×])`, as `E` components.
    pub fn upsilon(&self) -> Vec<Jet> {
        let b = &self.base;
        let mut acc = vec![self.like().zero_like(); 5];
        for a in 0..2 {
            let x = self.unit(a);
            let ex: Vec<Jet> = x[..2].to_vec();
            let jx = embed(&j_e(&ex));
            let t1 = self.ell_prime_full(&b.bracket(&x, &jx));
            let t2 = b.bracket(&x, &self.ell_prime(&j_e(&ex)));
            let t3 = b.bracket(&self.ell_prime(&ex), &jx);
            acc = add(&acc, &sub(&sub(&t1, &t2), &t3));
        }
        let jups: Vec<Jet> = phi(&acc).iter().map(|x| x.scale(0.25)).collect();
        // Υ = -J(JΥ).
        j_e(&jups).iter().map(|x| -x).collect()
    }

    /// `E`-part of `v` along the grading with parameters `p`:
    /// `v = e + z Z' + ℓ'u` gives `e - 𝒜u - (z - ⟨JW_2, u⟩) J W_1`.
    pub fn pr1(&self, p: &GradingParams, v: &[Jet]) -> Vec<Jet> {
        let c = self.primed_coords(v);
        let u = [-&c[4], c[3].clone()];
        let au = frame::mat_vec(&p.a, &u);
        let jw2 = j_e(&p.w2);
        let coef = &c[2] - &(&(&jw2[0] * &u[0]) + &(&jw2[1] * &u[1]));
        let jw1 = j_e(&p.w1);
        (0..2).map(|k| &(&c[k] - &au[k]) - &(&coef * &jw1[k])).collect()
    }

    /// The `g_I`-orthonormal graded frame `(X_1, X_2, Z, ℓX_2, -ℓX_1)`.
    pub fn graded_frame(&self, p: &GradingParams) -> Result<GradedFrame, GeomError> {
        let like = self.like();
        let z = add(&self.z, &embed(&j_e(&p.w1)));
        let jw2 = j_e(&p.w2);
        let ell = |b: usize| -> Vec<Jet> {
            let u: Vec<Jet> = (0..2).map(|k| jconst(like, if k == b { 1.0 } else { 0.0 })).collect();
            let a_col: Vec<Jet> = (0..2).map(|k| p.a[k][b].clone()).collect();
            add(&add(&self.ell_prime(&u), &scal(&jw2[b], &self.z)), &embed(&a_col))
        };
        let y1 = ell(1);
        let y2: Vec<Jet> = ell(0).iter().map(|x| -x).collect();
        let rows = vec![self.unit(0), self.unit(1), z, y1, y2];
        GradedFrame::new(self.base.recombine(&rows)?, LAYERS.to_vec())
    }

    /// `dμ_{-1}(X_b, X_k)` for `μ_{-1} = ⟨Υ, pr_{-1} ·⟩`.
    fn d_mu1(&self, p: &GradingParams, ups: &[Jet], b: usize, k: usize) -> Jet {
        let br = self.base.bracket(&self.unit(b), &self.unit(k));
        let pr = self.pr1(p, &br);
        let mu_br = &(&ups[0] * &pr[0]) + &(&ups[1] * &pr[1]);
        &(&self.base.apply(b, &ups[k]) - &self.base.apply(k, &ups[b])) - &mu_br
    }

    /// `W_1 = W_2 = Υ` and `𝒜` from
    /// `2⟨𝒜X_1, X_2⟩ = dμ_{-1}(X_1, X_2) + 2⟨JΥ, X_1⟩⟨JΥ, X_2⟩ - ⟨Jφ([Z', ℓ'X_1]) - [Z', JX_1], X_2⟩`,
    /// with the inner products and `dμ_{-1}` taken along the grading being built.
    pub fn stated_params(&self) -> Result<GradingParams, GeomError> {
        let ups = self.upsilon();
        self.params_with(&ups, &ups)
    }

    /// `W_1`, `W_2` as given, `𝒜` from the closed form of [`Self::stated_params`].
    pub fn params_with(&self, w1: &[Jet], w2: &[Jet]) -> Result<GradingParams, GeomError> {
        let ups = self.upsilon();
        let like = ups[0].clone();
        let mut p = GradingParams::zero(&like);
        p.w1 = w1.to_vec();
        p.w2 = w2.to_vec();
        let jups = j_e(&ups);
        // rhs[k][b] and u_b = φ([Z', J X_b]).
        let mut rhs: JetMat = vec![vec![like.zero_like(); 2]; 2];
        let mut umat: JetMat = vec![vec![like.zero_like(); 2]; 2];
        for b in 0..2 {
            let xb: Vec<Jet> = (0..2).map(|k| jconst(&like, if k == b { 1.0 } else { 0.0 })).collect();
            let t1 = j_e(&phi(&self.base.bracket(&self.z, &self.ell_prime(&xb))));
            let br = self.base.bracket(&self.z, &embed(&j_e(&xb)));
            // pr1 with 𝒜 = 0; the 𝒜 part is moved to the left-hand side.
            let e = self.pr1(&p, &br);
            let u = phi(&br);
            for k in 0..2 {
                let dm = self.d_mu1(&p, &ups, b, k);
                let quad = (&jups[b] * &jups[k]).scale(2.0);
                rhs[k][b] = &(&(&dm + &quad) - &t1[k]) + &e[k];
                umat[k][b] = u[k].clone();
            }
        }
        // 2 a[k][b] + (𝒜 u_b)_k = rhs[k][b], i.e. a (2I + U) = rhs.
        let two = frame::identity(&like, 2).iter().map(|r| r.iter().map(|x| x.scale(2.0)).collect()).collect::<JetMat>();
        let m = frame::mat_add(&two, &umat, 1.0);
        // a = rhs m^{-1}: solve m^T a^T = rhs^T.
        let at = frame::solve(&frame::transpose(&m), &frame::transpose(&rhs))?;
        p.a = frame::transpose(&at);
        Ok(p)
    }
}

/// The strongly compatible connection with `∇Z = 0`, `∇ℓX = ℓ∇X`,
/// `∇_X = pr_{-1} ∇^I_X` on `E` for horizontal `X`, and
/// `∇_V X = pr_{-1}[V, X] + τ_V X` for `V` in `(TM)_{-2} ⊕ (TM)_{-3}`.
pub fn base_connection(g: &GradedFrame) -> Connection {
    let c = &g.frame.c;
    let n = 5;
    let zero = c[0][0][0].zero_like();
    let mut gamma: Tensor3 = vec![vec![vec![zero; n]; n]; n];
    for i in 0..n {
        for j in 0..2 {
            for k in 0..2 {
                let w = if i < 2 {
                    (&(&c[i][j][k] - &c[j][k][i]) + &c[k][i][j]).scale(0.5)
                } else {
                    (&c[i][j][k] - &c[i][k][j]).scale(0.5)
                };
                gamma[i][3 + j][3 + k] = w.clone();
                gamma[i][j][k] = w;
            }
        }
    }
    Connection::new(g.clone(), gamma)
}

/// The generator `D` of `𝔰_I` in the graded frame: `DX_1 = X_2`, `DY_1 = Y_2`.
pub fn generator() -> DMatrix<f64> {
    let mut d = DMatrix::zeros(5, 5);
    d[(1, 0)] = 1.0;
    d[(0, 1)] = -1.0;
    d[(4, 3)] = 1.0;
    d[(3, 4)] = -1.0;
    d
}

/// `∇ + μ(·) D`.
pub fn add_mu(conn: &Connection, mu: &[Jet]) -> Connection {
    let d = generator();
    let mut gamma = conn.gamma.clone();
    for (i, m) in mu.iter().enumerate() {
        for b in 0..5 {
            for k in 0..5 {
                if d[(k, b)] != 0.0 {
                    gamma[i][b][k] = gamma[i][b][k].axpy(d[(k, b)], m);
                }
            }
        }
    }
    Connection::new(conn.graded.clone(), gamma)
}

/// `⟨R(χ(e_a)) - T_{e_a}, D⟩` (Frobenius) as a jet, for each `a` in `rows`.
fn rcond_jets(conn: &Connection, rows: std::ops::Range<usize>) -> Result<Vec<Jet>, GeomError> {
    let n = 5;
    let d = generator();
    let chi = conn.graded.selector();
    let t = conn.torsion();
    let need_r = rows.clone().any(|a| chi[a].iter().flatten().any(|x| x.value() != 0.0 || x.coeffs().iter().any(|&c| c != 0.0)));
    let r = if need_r { Some(conn.curvature()?) } else { None };
    let mut out = Vec::new();
    for a in rows {
        let mut s = t[0][0][0].zero_like();
        for l in 0..n {
            for k in 0..n {
                if d[(l, k)] == 0.0 {
                    continue;
                }
                let mut m = -&t[a][k][l];
                if let Some(r) = &r {
                    for p in 0..n {
                        for q in p + 1..n {
                            m = &m + &(&chi[a][p][q] * &r[p][q][k][l]);
                        }
                    }
                }
                s = s.axpy(d[(l, k)], &m);
            }
        }
        out.push(s);
    }
    Ok(out)
}

/// Solves `⟨R(χ(e_a)), D⟩ = ⟨T_{e_a}, D⟩` for `∇ = ∇^0 + μD`, one layer at a
/// time: in layer `k` the condition is affine in the layer-`k` values of `μ`
/// once the lower layers are known.
pub fn solve_mu(base: &Connection) -> Result<Vec<Jet>, GeomError> {
    let zero = base.gamma[0][0][0].zero_like();
    solve_mu_layers(base, vec![zero; 5], 1)
}

/// As [`solve_mu`], keeping the given values of `μ` below layer `from`.
fn solve_mu_layers(base: &Connection, mut mu: Vec<Jet>, from: usize) -> Result<Vec<Jet>, GeomError> {
    for layer in from..=3 {
        let idx = base.graded.layer_range(layer);
        let r0 = rcond_jets(&add_mu(base, &mu), idx.clone())?;
        let mut coef: JetMat = vec![Vec::new(); idx.len()];
        for u in idx.clone() {
            let mut trial = mu.clone();
            trial[u] = trial[u].add_scalar(1.0);
            let r1 = rcond_jets(&add_mu(base, &trial), idx.clone())?;
            for (row, (x1, x0)) in r1.iter().zip(&r0).enumerate() {
                coef[row].push(x1 - x0);
            }
        }
        let rhs: JetMat = r0.iter().map(|x| vec![-x]).collect();
        let sol = frame::solve(&coef, &rhs)?;
        for (u, v) in idx.zip(sol) {
            mu[u] = v[0].clone();
        }
    }
    Ok(mu)
}

/// Left-hand sides `Σ_{p<q} χ_a^{pq} T_{pq}^b + ⟨T_{e_a}, 𝕋_{e_b}⟩` of the torsion condition as jets.
fn tcond_jets(conn: &Connection, pairs: &[(usize, usize)]) -> Vec<Jet> {
    let n = 5;
    let chi = conn.graded.selector();
    let t = conn.torsion();
    let tz = conn.graded.t_zero();
    pairs
        .iter()
        .map(|&(a, b)| {
            let mut s = t[0][0][0].zero_like();
            for p in 0..n {
                for q in p + 1..n {
                    if chi[a][p][q].coeffs().iter().any(|&x| x != 0.0) {
                        s = &s + &(&chi[a][p][q] * &t[p][q][b]);
                    }
                }
            }
            for k in 0..n {
                for m in 0..n {
                    if tz[b][k][m].coeffs().iter().any(|&x| x != 0.0) {
                        s = &s + &(&t[a][k][m] * &tz[b][k][m]);
                    }
                }
            }
            s
        })
        .collect()
}

/// Newton iteration on jets for `f(x) = 0`, with a central-difference Jacobian.
///
/// `f` may lose orders through derivative terms that cancel in exact
/// arithmetic, so updates are padded back to the order of `x` and the
/// result is truncated to the order of `f(x)`.
fn jet_newton<F>(mut x: Vec<Jet>, f: F) -> Result<Vec<Jet>, GeomError>
where
    F: Fn(&[Jet]) -> Result<Vec<Jet>, GeomError>,
{
    const H: f64 = 1e-4;
    let max_abs = |v: &[Jet]| v.iter().flat_map(|j| j.coeffs().iter().map(|c| c.abs())).fold(0.0, f64::max);
    // Outputs are compared at their common order.
    let common = |v: Vec<Jet>| -> Vec<Jet> {
        let o = v.iter().map(Jet::order).min().unwrap_or(0);
        v.iter().map(|j| j.truncate(o)).collect()
    };
    let mut fx = common(f(&x)?);
    for _ in 0..12 {
        if max_abs(&fx) < 1e-14 {
            break;
        }
        let mut jac: JetMat = vec![Vec::with_capacity(x.len()); fx.len()];
        for u in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[u] = xp[u].add_scalar(H);
            xm[u] = xm[u].add_scalar(-H);
            let (fp, fm) = (common(f(&xp)?), common(f(&xm)?));
            for (row, (a, b)) in fp.iter().zip(&fm).enumerate() {
                jac[row].push((a - b).scale(0.5 / H));
            }
        }
        let rhs: JetMat = fx.iter().map(|v| vec![v.clone()]).collect();
        let dx = frame::solve(&jac, &rhs)?;
        x = x.iter().zip(&dx).map(|(a, d)| a - &d[0].pad(a.order())).collect();
        fx = common(f(&x)?);
    }
    let res = max_abs(&fx);
    if !res.is_finite() || res > 1e-9 {
        return Err(GeomError::Undecidable(format!("normalization solve did not converge (residual {res:.3e})")));
    }
    let order = fx.first().map_or(0, Jet::order);
    let x: Vec<Jet> = x.iter().map(|a| a.truncate(order)).collect();
    Ok(x)
}

fn jets_to_params(like: &Jet, w: &[Jet], a: Option<&[Jet]>) -> GradingParams {
    let mut p = GradingParams::zero(like);
    p.w1 = w[0..2].to_vec();
    p.w2 = w[2..4].to_vec();
    if let Some(a) = a {
        p.a = vec![vec![a[0].clone(), a[1].clone()], vec![a[2].clone(), a[3].clone()]];
    }
    p
}

/// Morimoto grading and `μ`, solved directly from the normalization.
///
/// Stage 1: `W_1, W_2, μ_{-1}` from the torsion condition on `(Z, E)` and
/// `(Y, Z)` and the curvature condition on `E`. Stage 2: `𝒜, μ_{-2}` from
/// the torsion condition on `(Y, E)` and the curvature condition on `Z`.
/// Stage 3: `μ_{-3}`. Each stage is algebraic in its unknowns.
pub fn solve_morimoto(ig: &IntrinsicGrading) -> Result<(GradingParams, Vec<Jet>), GeomError> {
    let like = ig.like().clone();
    let zero = like.zero_like();
    let eval = |p: &GradingParams, mu: &[Jet], tpairs: &[(usize, usize)], rrows: std::ops::Range<usize>| -> Result<Vec<Jet>, GeomError> {
        let g = ig.graded_frame(p)?;
        let conn = add_mu(&base_connection(&g), mu);
        let mut out = tcond_jets(&conn, tpairs);
        out.extend(rcond_jets(&conn, rrows)?);
        Ok(out)
    };
    // Stage 1: x = (W_1, W_2, μ_1, μ_2).
    let x1 = jet_newton(vec![zero.clone(); 6], |x| {
        let p = jets_to_params(&like, &x[..4], None);
        let mut mu = vec![zero.clone(); 5];
        mu[0] = x[4].clone();
        mu[1] = x[5].clone();
        eval(&p, &mu, &[(2, 0), (2, 1), (3, 2), (4, 2)], 0..2)
    })?;
    // Stage 2: x = (𝒜, μ_Z).
    let x2 = jet_newton(vec![zero.clone(); 5], |x| {
        let p = jets_to_params(&like, &x1[..4], Some(&x[..4]));
        let mut mu = vec![zero.clone(); 5];
        mu[0] = x1[4].clone();
        mu[1] = x1[5].clone();
        mu[2] = x[4].clone();
        eval(&p, &mu, &[(3, 0), (3, 1), (4, 0), (4, 1)], 2..3)
    })?;
    let p = jets_to_params(&like, &x1[..4], Some(&x2[..4]));
    let base = base_connection(&ig.graded_frame(&p)?);
    let mu = vec![x1[4].clone(), x1[5].clone(), x2[4].clone(), zero.clone(), zero];
    let mu = solve_mu_layers(&base, mu, 3)?;
    Ok((p, mu))
}

/// The Morimoto grading and connection of a (2,3,5) manifold at a point.
#[derive(Debug, Clone)]
pub struct Morimoto235 {
    pub intrinsic: IntrinsicGrading,
    pub upsilon: Vec<Jet>,
    pub params: GradingParams,
    /// `∇^0` on the Morimoto grading.
    pub base: Connection,
    /// `μ` on the graded frame `(X_1, X_2, Z, Y_1, Y_2)`.
    pub mu: Vec<Jet>,
    pub connection: Connection,
}

/// Smallest jet order of the horizontal pair for which the Morimoto
/// connection keeps first derivatives (enough for its curvature).
pub const MORIMOTO_ORDER: usize = 10;

pub fn morimoto_235(pair: &[Vec<Jet>; 2], formula: MorimotoFormula) -> Result<Morimoto235, GeomError> {
    let order = pair.iter().flatten().map(Jet::order).min().unwrap_or(0);
    if order < MORIMOTO_ORDER {
        return Err(GeomError::OrderExhausted(format!("the (2,3,5) Morimoto connection needs order {MORIMOTO_ORDER}, got {order}")));
    }
    let intrinsic = intrinsic_grading_235(pair)?;
    let upsilon = intrinsic.upsilon();
    let (params, base, mu) = match formula {
        MorimotoFormula::Solved => {
            let (params, mu) = solve_morimoto(&intrinsic)?;
            let base = base_connection(&intrinsic.graded_frame(&params)?);
            (params, base, mu)
        }
        MorimotoFormula::Stated => {
            let params = intrinsic.stated_params()?;
            let base = base_connection(&intrinsic.graded_frame(&params)?);
            let zero = upsilon[0].zero_like();
            let mu = vec![upsilon[0].clone(), upsilon[1].clone(), zero.clone(), zero.clone(), zero];
            let mu = solve_mu_layers(&base, mu, 2)?;
            (params, base, mu)
        }
    };
    let connection = add_mu(&base, &mu);
    Ok(Morimoto235 { intrinsic, upsilon, params, base, mu, connection })
}

/// `q_X Y = φ([X, ℓ'Y]) - ∇^0_X Y` on horizontal basis fields: `q[a][b]` holds
/// the `E` components of `q_{X_a} X_b`, with `∇^0` built on the grading `params`.
pub fn q_map(ig: &IntrinsicGrading, params: &GradingParams) -> Result<Vec<Vec<Vec<Jet>>>, GeomError> {
    let base = base_connection(&ig.graded_frame(params)?);
    let like = ig.like();
    let e = |b: usize| -> Vec<Jet> { (0..2).map(|k| jconst(like, if k == b { 1.0 } else { 0.0 })).collect() };
    let mut q = vec![vec![Vec::new(); 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let br = phi(&ig.base.bracket(&ig.unit(a), &ig.ell_prime(&e(b))));
            q[a][b] = (0..2).map(|k| &br[k] - &base.gamma[a][b][k]).collect();
        }
    }
    Ok(q)
}

/// `τ_V` on `E` for the vertical part of `v` (graded-frame components):
/// `⟨τ_V X_j, X_k⟩ = ½(L_V g_I)(X_j, X_k)`, returned as `t[k][j]`.
pub fn tau(g: &GradedFrame, v: &[Jet]) -> JetMat {
    let zero = v[0].zero_like();
    let mut vert = v.to_vec();
    vert[0] = zero.clone();
    vert[1] = zero.clone();
    let e = |j: usize| basis_vec(&zero, 5, j);
    let br: Vec<Vec<Jet>> = (0..2).map(|j| g.frame.bracket(&vert, &e(j))).collect();
    (0..2).map(|k| (0..2).map(|j| (&br[j][k] + &br[k][j]).scale(-0.5)).collect()).collect()
}

/// Largest distance, at the base point, of `v` from `span(basis)` (all in
/// coordinate components), relative to `|v|`.
pub fn span_distance(v: &[f64], basis: &[Vec<f64>]) -> f64 {
    let n = v.len();
    let a = nalgebra::DMatrix::from_fn(n, basis.len(), |i, j| basis[j][i]);
    let b = nalgebra::DVector::from_column_slice(v);
    let x = a.clone().svd(true, true).solve(&b, 1e-12).expect("svd solve");
    (&a * x - &b).norm() / b.norm().max(1e-300)
}

/// Coordinate components of a field given in the frame `f`, at the base point.
pub fn coords_at(f: &Frame, v: &[Jet]) -> Vec<f64> {
    f.to_coords(v).iter().map(|x| x.value()).collect()
}

#[cfg(test)]
mod tests;
