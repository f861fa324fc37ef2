//! Gradings, selectors and affine connections on a graded frame, evaluated
//! pointwise on jets.
//!
//! A [`GradedFrame`] is a frame `e_1..e_n` whose blocks of sizes
//! `d_1..d_s` span the layers `(TM)_{-1}..(TM)_{-s}` of a grading `I`, and
//! which is orthonormal for the taming metric `g_I`. In such a frame `I` is
//! the identity onto the symbol, so the symbol's structure constants are the
//! degree-matching structure functions, and `g_I`, `χ_I`, `𝕋` and `𝔰_I` all
//! have plain component formulas.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::frame::{self, Frame, GeomError, JetMat};
use crate::jet::Jet;
use crate::lie::{self, CarnotAlgebra, Normalization, StratifiedAlgebra};
use crate::linalg;

/// Tolerance for identities.
pub const IDENTITY_TOL: f64 = 1e-8;
/// Threshold for "bounded away from zero".
pub const SEPARATION_TOL: f64 = 1e-3;

/// `t[i][j][k]`: the `e_k` component of a bilinear map on `(e_i, e_j)`.
pub type Tensor3 = Vec<Vec<Vec<Jet>>>;
/// `r[i][j][k][l]`: the `e_l` component of `R(e_i, e_j) e_k`.
pub type Tensor4 = Vec<Vec<Vec<Vec<Jet>>>>;

fn order_check(j: &Jet, need: usize, what: &str) -> Result<(), GeomError> {
    if j.order() < need {
        return Err(GeomError::OrderExhausted(format!("{what} needs jet order {need}, have {}", j.order())));
    }
    Ok(())
}

fn frob(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub struct GradedFrame {
    pub frame: Frame,
    layer_dims: Vec<usize>,
    degrees: Vec<usize>,
}

impl GradedFrame {
    /// Wraps a frame that is already adapted and `g_I`-orthonormal. Checks
    /// the filtration `[E^{-i}, E^{-j}] ⊆ E^{-i-j}` at the base point.
    pub fn new(frame: Frame, layer_dims: Vec<usize>) -> Result<GradedFrame, GeomError> {
        let n = frame.dim();
        if layer_dims.iter().sum::<usize>() != n || layer_dims.contains(&0) {
            return Err(GeomError::Invalid(format!("layer dims {layer_dims:?} do not partition {n}")));
        }
        let degrees: Vec<usize> =
            layer_dims.iter().enumerate().flat_map(|(k, &d)| std::iter::repeat_n(k + 1, d)).collect();
        let scale = frame.c.iter().flatten().flatten().map(|x| x.value().abs()).fold(1.0, f64::max);
        for a in 0..n {
            for b in 0..n {
                for k in 0..n {
                    if degrees[k] > degrees[a] + degrees[b] && frame.c[a][b][k].value().abs() > 1e-8 * scale {
                        return Err(GeomError::Precondition(format!(
                            "frame is not adapted: [e{}, e{}] has an e{} component",
                            a + 1,
                            b + 1,
                            k + 1
                        )));
                    }
                }
            }
        }
        Ok(GradedFrame { frame, layer_dims, degrees })
    }

    /// Builds the `g_I`-orthonormal graded frame from an adapted frame whose
    /// first layer carries the metric `g` (components in that layer). The
    /// first layer is orthonormalized by Cholesky; each higher layer gets the
    /// basis that is orthonormal for the wedge-normalized induced metric,
    /// i.e. the graded bracket `Λ²(lower) → layer` is a submetry.
    pub fn orthonormalize(frame: &Frame, layer_dims: Vec<usize>, g: &JetMat) -> Result<GradedFrame, GeomError> {
        let n = frame.dim();
        let probe = GradedFrame::new(frame.clone(), layer_dims.clone())?;
        let deg = probe.degrees.clone();
        let like = &frame.c[0][0][0];
        let zero = frame::jconst(like, 0.0);
        // a[t][i]: new field t = Σ_i a[t][i] e_i.
        let mut a: JetMat = vec![vec![zero.clone(); n]; n];
        let r1 = probe.layer_range(1);
        let l = frame::cholesky(g)?;
        let linv = frame::inverse(&l)?;
        for (ta, t) in r1.clone().enumerate() {
            for (ib, i) in r1.clone().enumerate() {
                a[t][i] = linv[ta][ib].clone();
            }
        }
        for k in 2..=layer_dims.len() {
            let rk = probe.layer_range(k);
            let dk = rk.len();
            // Graded brackets of the finished lower fields, in the original layer-k fields.
            let mut ginv: JetMat = vec![vec![zero.clone(); dk]; dk];
            for p in 0..n {
                for q in p + 1..n {
                    if deg[p] + deg[q] != k {
                        continue;
                    }
                    let w: Vec<Jet> = rk
                        .clone()
                        .map(|m| {
                            let mut s = zero.clone();
                            for i in 0..n {
                                if deg[i] != deg[p] {
                                    continue;
                                }
                                for j in 0..n {
                                    if deg[j] != deg[q] {
                                        continue;
                                    }
                                    s = &s + &(&(&a[p][i] * &a[q][j]) * &frame.c[i][j][m]);
                                }
                            }
                            s
                        })
                        .collect();
                    for u in 0..dk {
                        for v in 0..dk {
                            ginv[u][v] = &ginv[u][v] + &(&w[u] * &w[v]);
                        }
                    }
                }
            }
            let l = frame::cholesky(&ginv)?;
            for (tt, t) in rk.clone().enumerate() {
                for (mm, m) in rk.clone().enumerate() {
                    a[t][m] = l[mm][tt].clone();
                }
            }
        }
        GradedFrame::new(frame.recombine(&a)?, layer_dims)
    }

    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn step(&self) -> usize {
        self.layer_dims.len()
    }

    pub fn rank(&self) -> usize {
        self.layer_dims[0]
    }

    /// Indices of layer `k` (1-based).
    pub fn layer_range(&self, k: usize) -> std::ops::Range<usize> {
        let start: usize = self.layer_dims[..k - 1].iter().sum();
        start..start + self.layer_dims[k - 1]
    }

    fn zero(&self) -> Jet {
        self.frame.c[0][0][0].zero_like()
    }

    /// Symbol bracket `⟦e_a, e_b⟧` component along `e_k`.
    pub fn graded_constant(&self, a: usize, b: usize, k: usize) -> Jet {
        if self.degrees[k] == self.degrees[a] + self.degrees[b] {
            self.frame.c[a][b][k].clone()
        } else {
            self.zero()
        }
    }

    /// Degree-zero torsion `𝕋(e_a, e_b) = -⟦e_a, e_b⟧`.
    pub fn t_zero(&self) -> Tensor3 {
        let n = self.dim();
        (0..n)
            .map(|a| (0..n).map(|b| (0..n).map(|k| -&self.graded_constant(a, b, k)).collect()).collect())
            .collect()
    }

    /// The symbol at the base point, with its basis identified with the frame.
    pub fn symbol(&self) -> Result<CarnotAlgebra, GeomError> {
        let n = self.dim();
        let mut c = vec![0.0; n * n * n];
        for a in 0..n {
            for b in 0..n {
                for k in 0..n {
                    c[(a * n + b) * n + k] = self.graded_constant(a, b, k).value();
                }
            }
        }
        let labels = (0..n).map(|i| format!("e{}", i + 1)).collect();
        let alg = StratifiedAlgebra::from_dense(self.layer_dims.clone(), labels, c, 1e-7)?;
        let r = self.rank();
        Ok(CarnotAlgebra::new(alg, DMatrix::identity(r, r))?)
    }

    /// `χ_I(e_k) = Σ_{p<q} chi[k][p][q] e_p ∧ e_q`, with `chi[k]` antisymmetric.
    pub fn selector(&self) -> Vec<JetMat> {
        let n = self.dim();
        (0..n)
            .map(|k| (0..n).map(|p| (0..n).map(|q| self.graded_constant(p, q, k)).collect()).collect())
            .collect()
    }

    /// Residuals of the two selector axioms at the base point: the part of
    /// `χ(E^{-k})` outside `Λ²E^{-k+1}`, and the anti-Lie defect
    /// `Σ[X_j, Y_j] - Z mod E^{-k+1}` for `Z` outside the first layer.
    pub fn selector_axiom_residuals(&self) -> (f64, f64) {
        let n = self.dim();
        let chi = self.selector();
        let mut support: f64 = 0.0;
        let mut anti_lie: f64 = 0.0;
        for k in 0..n {
            for p in 0..n {
                for q in 0..n {
                    if self.degrees[p] >= self.degrees[k] || self.degrees[q] >= self.degrees[k] {
                        support = support.max(chi[k][p][q].value().abs());
                    }
                }
            }
            for m in 0..n {
                if self.degrees[k] == 1 || self.degrees[m] < self.degrees[k] {
                    continue;
                }
                let mut s = if m == k { -1.0 } else { 0.0 };
                for p in 0..n {
                    for q in p + 1..n {
                        s += chi[k][p][q].value() * self.frame.c[p][q][m].value();
                    }
                }
                anti_lie = anti_lie.max(s.abs());
            }
        }
        (support, anti_lie)
    }

    /// Basis of `𝔰_I` at the base point, orthonormal for the trace inner product.
    pub fn isometry_basis(&self) -> Result<Vec<DMatrix<f64>>, GeomError> {
        let sym = self.symbol()?;
        let gens = lie::isometry_algebra(&sym).generators;
        let n = self.dim();
        let vs: Vec<DVector<f64>> = gens.iter().map(|d| DVector::from_column_slice(d.as_slice())).collect();
        Ok(linalg::gram_schmidt(&vs, |a, b| a.dot(b), 1e-9)
            .into_iter()
            .map(|v| DMatrix::from_column_slice(n, n, v.as_slice()))
            .collect())
    }
}

/// Selector of a Carnot algebra in its own basis, from the Gram system
/// `⟨⟦A,B⟧, C⟩ = ⟨A∧B, χ_0(C)⟩` for the induced inner product. Returns
/// `chi[k]` antisymmetric with `χ_0(e_k) = Σ_{p<q} chi[k][p][q] e_p ∧ e_q`.
pub fn symbol_selector(g: &CarnotAlgebra, norm: Normalization) -> Result<Vec<DMatrix<f64>>, GeomError> {
    let alg = &g.algebra;
    let n = alg.dim();
    let gram = lie::induced_inner_product_with(g, norm);
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|p| (p + 1..n).map(move |q| (p, q))).collect();
    let m = pairs.len();
    let g2 = DMatrix::from_fn(m, m, |u, v| {
        let (p, q) = pairs[u];
        let (r, s) = pairs[v];
        gram[(p, r)] * gram[(q, s)] - gram[(p, s)] * gram[(q, r)]
    });
    let lu = g2.lu();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut ek = DVector::zeros(n);
        ek[k] = 1.0;
        let gk = &gram * ek;
        let rhs = DVector::from_fn(m, |u, _| {
            let (p, q) = pairs[u];
            let mut s = 0.0;
            for c in 0..n {
                s += alg.constant(p, q, c) * gk[c];
            }
            s
        });
        let x = lu.solve(&rhs).ok_or(GeomError::Singular)?;
        let mut chi = DMatrix::zeros(n, n);
        for (u, &(p, q)) in pairs.iter().enumerate() {
            chi[(p, q)] = x[u];
            chi[(q, p)] = -x[u];
        }
        out.push(chi);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Connection {
    pub graded: GradedFrame,
    /// `∇_{e_i} e_j = Σ_k gamma[i][j][k] e_k`.
    pub gamma: Tensor3,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CompatibilityResiduals {
    /// Components of `∇` mixing layers.
    pub layers: f64,
    /// Failure of `∇g = 0` on the first layer.
    pub metric: f64,
    /// `‖∇𝕋‖`.
    pub strong: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MorimotoResiduals {
    pub rcond: f64,
    pub tcond: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FlatnessResiduals {
    /// `‖T - 𝕋‖`.
    pub torsion: f64,
    /// `‖R‖`.
    pub curvature: f64,
}

impl Connection {
    pub fn new(graded: GradedFrame, gamma: Tensor3) -> Connection {
        Connection { graded, gamma }
    }

    /// All frame fields parallel (`Γ = 0`).
    pub fn frame_parallel(graded: GradedFrame) -> Connection {
        let n = graded.dim();
        let z = graded.zero();
        Connection { graded, gamma: vec![vec![vec![z; n]; n]; n] }
    }

    /// Levi-Civita connection of `g_I` (the frame is `g_I`-orthonormal).
    pub fn levi_civita(graded: GradedFrame) -> Connection {
        let n = graded.dim();
        let c = &graded.frame.c;
        let gamma = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| (&(&c[i][j][k] - &c[j][k][i]) + &c[k][i][j]).scale(0.5)).collect())
                    .collect()
            })
            .collect();
        Connection { graded, gamma }
    }

    pub fn dim(&self) -> usize {
        self.graded.dim()
    }

    pub fn frame(&self) -> &Frame {
        &self.graded.frame
    }

    /// Lowest jet order among the coefficients.
    pub fn order(&self) -> usize {
        self.gamma.iter().flatten().flatten().map(|x| x.order()).min().unwrap_or(0)
    }

    /// `∇_{e_i}` as a matrix: `a[k][b] = Γ_{ib}^k`.
    pub fn matrix(&self, i: usize) -> JetMat {
        let n = self.dim();
        (0..n).map(|k| (0..n).map(|b| self.gamma[i][b][k].clone()).collect()).collect()
    }

    /// Frame components of `∇_U V` for frame-component fields.
    pub fn covariant(&self, u: &[Jet], v: &[Jet]) -> Vec<Jet> {
        let n = self.dim();
        (0..n)
            .map(|k| {
                let mut s = self.frame().apply_vec(u, &v[k]);
                for i in 0..n {
                    for j in 0..n {
                        s = &s + &(&(&u[i] * &v[j]) * &self.gamma[i][j][k]);
                    }
                }
                s
            })
            .collect()
    }

    /// `T_{ij}^k = Γ_{ij}^k - Γ_{ji}^k - c_{ij}^k`.
    pub fn torsion(&self) -> Tensor3 {
        let n = self.dim();
        let c = &self.frame().c;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| &(&self.gamma[i][j][k] - &self.gamma[j][i][k]) - &c[i][j][k]).collect())
                    .collect()
            })
            .collect()
    }

    /// `R(e_i, e_j) e_k = ∇_i ∇_j e_k - ∇_j ∇_i e_k - ∇_{[e_i,e_j]} e_k`.
    pub fn curvature(&self) -> Result<Tensor4, GeomError> {
        let n = self.dim();
        order_check(&self.gamma[0][0][0], 1, "curvature")?;
        let f = self.frame();
        let g = &self.gamma;
        let z = g[0][0][0].truncate(self.order().saturating_sub(1)).zero_like();
        let mut r: Tensor4 = vec![vec![vec![vec![z.clone(); n]; n]; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut s = &f.apply(i, &g[j][k][l]) - &f.apply(j, &g[i][k][l]);
                        for m in 0..n {
                            s = &s + &(&g[j][k][m] * &g[i][m][l]);
                            s = &s - &(&g[i][k][m] * &g[j][m][l]);
                            s = &s - &(&f.c[i][j][m] * &g[m][k][l]);
                        }
                        r[j][i][k][l] = -&s;
                        r[i][j][k][l] = s;
                    }
                }
            }
        }
        Ok(r)
    }

    /// `(∇_{e_i} t)(e_a, e_b)` for a tensor `t` of type (2,1).
    pub fn covariant_derivative3(&self, t: &Tensor3) -> Result<Vec<Tensor3>, GeomError> {
        let n = self.dim();
        order_check(&t[0][0][0], 1, "covariant derivative")?;
        let f = self.frame();
        let g = &self.gamma;
        Ok((0..n)
            .map(|i| {
                (0..n)
                    .map(|a| {
                        (0..n)
                            .map(|b| {
                                (0..n)
                                    .map(|k| {
                                        let mut s = f.apply(i, &t[a][b][k]);
                                        for m in 0..n {
                                            s = &s + &(&g[i][m][k] * &t[a][b][m]);
                                            s = &s - &(&g[i][a][m] * &t[m][b][k]);
                                            s = &s - &(&g[i][b][m] * &t[a][m][k]);
                                        }
                                        s
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect())
    }

    pub fn check_compatible(&self) -> Result<CompatibilityResiduals, GeomError> {
        let n = self.dim();
        let deg = self.graded.degrees();
        let mut layers: f64 = 0.0;
        let mut metric: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if deg[j] != deg[k] {
                        layers = layers.max(self.gamma[i][j][k].value().abs());
                    }
                }
            }
            for a in self.graded.layer_range(1) {
                for b in self.graded.layer_range(1) {
                    let s = self.gamma[i][a][b].value() + self.gamma[i][b][a].value();
                    metric = metric.max(s.abs());
                }
            }
        }
        let dt = self.covariant_derivative3(&self.graded.t_zero())?;
        let strong = dt.iter().flatten().flatten().flatten().map(|x| x.value().abs()).fold(0.0, f64::max);
        Ok(CompatibilityResiduals { layers, metric, strong })
    }

    /// Residuals of the Morimoto conditions at the base point:
    /// `⟨R(χ(v)), D⟩ = ⟨T_v, D⟩` for `D ∈ 𝔰_I`, and
    /// `⟨T(χ(v)), w⟩ + ⟨T_v, 𝕋_w⟩ = 0` for `v ∈ E^{-i}`, `w ∈ E^{-j}`, `j < i`.
    pub fn check_morimoto(&self) -> Result<MorimotoResiduals, GeomError> {
        let basis = self.graded.isometry_basis()?;
        self.check_morimoto_with(&basis)
    }

    pub fn check_morimoto_with(&self, basis: &[DMatrix<f64>]) -> Result<MorimotoResiduals, GeomError> {
        let n = self.dim();
        let chi = self.graded.selector();
        let t = vals3(&self.torsion());
        let r = self.curvature()?;
        let tz = vals3(&self.graded.t_zero());
        let mut rcond: f64 = 0.0;
        for a in 0..n {
            // R(χ(e_a)) and T_{e_a} as matrices [l][k].
            let mut rchi = DMatrix::zeros(n, n);
            for p in 0..n {
                for q in p + 1..n {
                    let w = chi[a][p][q].value();
                    if w == 0.0 {
                        continue;
                    }
                    for k in 0..n {
                        for l in 0..n {
                            rchi[(l, k)] += w * r[p][q][k][l].value();
                        }
                    }
                }
            }
            let tv = DMatrix::from_fn(n, n, |l, k| t[a][k][l]);
            for d in basis {
                let s = rchi.dot(d) - tv.dot(d);
                rcond = rcond.max(s.abs());
            }
        }
        let tcond = self.tcond_terms(&t, &tz, &chi).iter().map(|x| x.2.abs()).fold(0.0, f64::max);
        Ok(MorimotoResiduals { rcond, tcond })
    }

    /// Signed left-hand sides of the torsion condition, `(a, b, value)`.
    pub fn tcond_values(&self) -> Vec<(usize, usize, f64)> {
        let t = vals3(&self.torsion());
        let tz = vals3(&self.graded.t_zero());
        self.tcond_terms(&t, &tz, &self.graded.selector())
    }

    fn tcond_terms(&self, t: &[Vec<Vec<f64>>], tz: &[Vec<Vec<f64>>], chi: &[JetMat]) -> Vec<(usize, usize, f64)> {
        let n = self.dim();
        let deg = self.graded.degrees();
        let mut out = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if deg[b] >= deg[a] {
                    continue;
                }
                let mut s = 0.0;
                for p in 0..n {
                    for q in p + 1..n {
                        s += chi[a][p][q].value() * t[p][q][b];
                    }
                }
                for k in 0..n {
                    for m in 0..n {
                        s += t[a][k][m] * tz[b][k][m];
                    }
                }
                out.push((a, b, s));
            }
        }
        out
    }

    /// `max ‖T(e_i,e_j) - 𝕋(e_i,e_j)‖` and `max ‖R(e_i,e_j)‖` at the base point.
    pub fn flatness(&self) -> Result<FlatnessResiduals, GeomError> {
        let n = self.dim();
        let t = vals3(&self.torsion());
        let tz = vals3(&self.graded.t_zero());
        let r = self.curvature()?;
        let mut torsion: f64 = 0.0;
        let mut curvature: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let dt: f64 = (0..n).map(|k| (t[i][j][k] - tz[i][j][k]).powi(2)).sum::<f64>().sqrt();
                torsion = torsion.max(dt);
                let m = DMatrix::from_fn(n, n, |l, k| r[i][j][k][l].value());
                curvature = curvature.max(frob(&m));
            }
        }
        Ok(FlatnessResiduals { torsion, curvature })
    }

    /// Failure of `I_{-i-j} T(X, Y) = -⟦I X, I Y⟧` on frame pairs, together
    /// with the components of `T(E^{-i}, E^{-j})` outside `E^{-i-j}`.
    pub fn torsion_identity_residual(&self) -> f64 {
        let n = self.dim();
        let deg = self.graded.degrees();
        let t = vals3(&self.torsion());
        let mut out: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for k in 0..n {
                    let s = if deg[k] == deg[a] + deg[b] {
                        t[a][b][k] + self.graded.graded_constant(a, b, k).value()
                    } else if deg[k] > deg[a] + deg[b] {
                        t[a][b][k]
                    } else {
                        continue;
                    };
                    out = out.max(s.abs());
                }
            }
        }
        out
    }

    /// Largest distance of a curvature endomorphism `R(e_i, e_j)` from `𝔰_I`,
    /// relative to `max(1, ‖R‖)`.
    pub fn curvature_in_isometries_residual(&self) -> Result<f64, GeomError> {
        let n = self.dim();
        let basis = self.graded.isometry_basis()?;
        let r = self.curvature()?;
        let mut out: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let mut m = DMatrix::from_fn(n, n, |l, k| r[i][j][k][l].value());
                let norm = frob(&m);
                for d in &basis {
                    let c = m.dot(d);
                    m -= d * c;
                }
                out = out.max(frob(&m) / norm.max(1.0));
            }
        }
        Ok(out)
    }
}

pub fn vals3(t: &Tensor3) -> Vec<Vec<Vec<f64>>> {
    t.iter().map(|a| a.iter().map(|b| b.iter().map(|x| x.value()).collect()).collect()).collect()
}

/// One sample of a normal geodesic: time, coordinates, and the covector in
/// coordinate components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicSample {
    pub t: f64,
    pub point: Vec<f64>,
    pub covector: Vec<f64>,
}

/// Integrates the normal geodesic equations
/// `γ̇ = Σ_a λ(e_a) e_a` (first layer orthonormal) and
/// `(∇_γ̇ λ)(w) = -λ(T(γ̇, w))` with fixed-step RK4.
///
/// `conn_at` must return a connection compatible with the sub-Riemannian
/// structure at any point, with frame jets of order at least 1. The
/// covector is given and returned in coordinate components.
pub fn normal_geodesic<F>(
    conn_at: F,
    x0: &[f64],
    p0: &[f64],
    t_end: f64,
    h: f64,
    domain: Option<&[(f64, f64)]>,
) -> Result<Vec<GeodesicSample>, GeomError>
where
    F: Fn(&[f64]) -> Result<Connection, GeomError>,
{
    let n = x0.len();
    if p0.len() != n {
        return Err(GeomError::Invalid("covector and point dimensions differ".into()));
    }
    if !(h > 0.0) || !(t_end >= 0.0) {
        return Err(GeomError::Invalid("step and final time must be positive".into()));
    }
    let inside = |x: &[f64]| -> Result<(), GeomError> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GeomError::NonFinite("geodesic state".into()));
        }
        if let Some(dom) = domain {
            if x.iter().zip(dom).any(|(v, &(a, b))| *v < a || *v > b) {
                return Err(GeomError::OutOfChart(format!("{x:?}")));
            }
        }
        Ok(())
    };
    // State: coordinates, then covector in coordinate components.
    let rhs = |s: &[f64]| -> Result<Vec<f64>, GeomError> {
        let (x, p) = s.split_at(n);
        inside(x)?;
        let conn = conn_at(x)?;
        let f = conn.frame();
        if f.coframe[0][0].order() == 0 {
            return Err(GeomError::OrderExhausted("geodesic needs first-order frame jets".into()));
        }
        let fields = frame::values(&f.fields);
        let lam: Vec<f64> = (0..n).map(|i| (0..n).map(|m| p[m] * fields[(i, m)]).sum()).collect();
        let r = conn.graded.rank();
        let g = &conn.gamma;
        let c = &f.c;
        let mut dx = vec![0.0; n];
        for a in 0..r {
            for m in 0..n {
                dx[m] += lam[a] * fields[(a, m)];
            }
        }
        // dλ_i/dt in frame components.
        let mut dl = vec![0.0; n];
        for (i, dli) in dl.iter_mut().enumerate() {
            let mut s = 0.0;
            for j in 0..r {
                for k in 0..n {
                    let t = g[j][i][k].value() - g[i][j][k].value() - c[j][i][k].value();
                    s += -lam[k] * lam[j] * t + lam[j] * g[j][i][k].value() * lam[k];
                }
            }
            *dli = s;
        }
        // p_m = Σ_i λ_i θ^i_m; differentiate along the curve.
        let cof = frame::values(&f.coframe);
        let mut dp = vec![0.0; n];
        for m in 0..n {
            for i in 0..n {
                dp[m] += dl[i] * cof[(i, m)];
                let mut dtheta = 0.0;
                for q in 0..n {
                    if let Some(d) = f.coframe[i][m].coeffs().get(1 + q) {
                        dtheta += d * dx[q];
                    }
                }
                dp[m] += lam[i] * dtheta;
            }
        }
        let mut out = dx;
        out.extend(dp);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(GeomError::NonFinite("geodesic derivative".into()));
        }
        Ok(out)
    };
    let steps = (t_end / h).round() as usize;
    let mut s: Vec<f64> = x0.iter().chain(p0).cloned().collect();
    let mut out = vec![GeodesicSample { t: 0.0, point: x0.to_vec(), covector: p0.to_vec() }];
    let add = |s: &[f64], k: &[f64], w: f64| -> Vec<f64> { s.iter().zip(k).map(|(a, b)| a + w * b).collect() };
    for step in 1..=steps {
        let k1 = rhs(&s)?;
        let k2 = rhs(&add(&s, &k1, h / 2.0))?;
        let k3 = rhs(&add(&s, &k2, h / 2.0))?;
        let k4 = rhs(&add(&s, &k3, h))?;
        for i in 0..2 * n {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        inside(&s[..n])?;
        if s.iter().any(|v| !v.is_finite()) {
            return Err(GeomError::NonFinite("geodesic state".into()));
        }
        out.push(GeodesicSample { t: step as f64 * h, point: s[..n].to_vec(), covector: s[n..].to_vec() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
