//! Sub-Riemannian manifolds given by a global frame on one chart.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::expr::{self, Expr, Point};
use crate::frame::{self, Frame, GeomError, JetMat};
use crate::jet::{coordinate_jets, Jet};
use crate::lie::{self, CarnotAlgebra, StratifiedAlgebra};
use crate::linalg;

/// Relative singular-value threshold for flag ranks.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StructureClass {
    #[default]
    Generic,
    Contact,
    TwoThreeFive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorField {
    pub comps: Vec<Expr>,
}

impl VectorField {
    pub fn new(comps: Vec<Expr>) -> VectorField {
        VectorField { comps }
    }

    pub fn simplify(&self) -> VectorField {
        VectorField { comps: self.comps.iter().map(|c| c.simplify()).collect() }
    }

    pub fn evaluate(&self, p: &Point) -> Result<Vec<f64>, GeomError> {
        Ok(self.comps.iter().map(|c| c.evaluate(p)).collect::<Result<_, _>>()?)
    }

    pub fn neg(&self) -> VectorField {
        VectorField { comps: self.comps.iter().map(|c| Expr::neg(c.clone())).collect() }
    }
}

#[derive(Debug, Clone)]
pub struct FramedManifold {
    coords: Vec<String>,
    frames: Vec<VectorField>,
    rank: usize,
    metric: Option<Vec<Vec<Expr>>>,
    class: StructureClass,
}

impl FramedManifold {
    pub fn new(
        coords: Vec<String>,
        frames: Vec<VectorField>,
        rank: usize,
        metric: Option<Vec<Vec<Expr>>>,
        class: StructureClass,
    ) -> Result<FramedManifold, GeomError> {
        let n = coords.len();
        if n == 0 {
            return Err(GeomError::Invalid("no coordinates".into()));
        }
        if frames.len() != n {
            return Err(GeomError::Invalid(format!("{} frame fields for a {n}-dimensional chart", frames.len())));
        }
        if let Some(bad) = frames.iter().position(|f| f.comps.len() != n) {
            return Err(GeomError::Invalid(format!("frame field {} does not have {n} components", bad + 1)));
        }
        if rank == 0 || rank > n {
            return Err(GeomError::Invalid(format!("horizontal rank {rank} outside 1..={n}")));
        }
        if let Some(m) = &metric {
            if m.len() != rank || m.iter().any(|r| r.len() != rank) {
                return Err(GeomError::Invalid(format!("metric must be {rank}x{rank}")));
            }
            for i in 0..rank {
                for j in 0..i {
                    if m[i][j].simplify() != m[j][i].simplify() {
                        return Err(GeomError::Invalid("metric is not symmetric".into()));
                    }
                }
            }
        }
        let frames = frames.iter().map(|f| f.simplify()).collect();
        let metric = metric.map(|m| m.iter().map(|r| r.iter().map(|e| e.simplify()).collect()).collect());
        Ok(FramedManifold { coords, frames, rank, metric, class })
    }

    /// Builds a manifold from expression strings.
    pub fn parse<S: AsRef<str>>(
        coords: &[S],
        frames: &[Vec<S>],
        rank: usize,
        metric: Option<&[Vec<S>]>,
        class: StructureClass,
    ) -> Result<FramedManifold, GeomError> {
        let names: Vec<String> = coords.iter().map(|c| c.as_ref().to_string()).collect();
        let parse = |s: &S| expr::parse(s.as_ref(), &names);
        let fields = frames
            .iter()
            .map(|f| Ok(VectorField::new(f.iter().map(parse).collect::<Result<_, _>>()?)))
            .collect::<Result<Vec<_>, GeomError>>()?;
        let metric = match metric {
            Some(m) => Some(
                m.iter().map(|r| r.iter().map(parse).collect::<Result<Vec<_>, _>>()).collect::<Result<Vec<_>, _>>()?,
            ),
            None => None,
        };
        FramedManifold::new(names, fields, rank, metric, class)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn class(&self) -> StructureClass {
        self.class
    }

    pub fn frame(&self) -> &[VectorField] {
        &self.frames
    }

    pub fn metric(&self) -> Option<&Vec<Vec<Expr>>> {
        self.metric.as_ref()
    }

    pub fn point(&self, p: &[f64]) -> Point {
        Point::new(&self.coords, p)
    }

    /// Same manifold with a different frame (horizontal rank and metric kept).
    pub fn with_frame(&self, frames: Vec<VectorField>) -> Result<FramedManifold, GeomError> {
        FramedManifold::new(self.coords.clone(), frames, self.rank, self.metric.clone(), self.class)
    }

    /// Symbolic `[X,Y]^k = Σ_m (X^m ∂_m Y^k − Y^m ∂_m X^k)`, simplified.
    pub fn bracket(&self, x: &VectorField, y: &VectorField) -> VectorField {
        let n = self.dim();
        let comps = (0..n)
            .map(|k| {
                let mut terms = Vec::new();
                for m in 0..n {
                    let name = &self.coords[m];
                    terms.push(Expr::mul(vec![x.comps[m].clone(), y.comps[k].differentiate(name)]));
                    terms.push(Expr::neg(Expr::mul(vec![y.comps[m].clone(), x.comps[k].differentiate(name)])));
                }
                Expr::add(terms).simplify()
            })
            .collect();
        VectorField { comps }
    }

    /// Symbolic structure functions `c[i][j][k]`, by exact elimination on the
    /// frame matrix. Fails if no structurally nonzero pivot is found; use
    /// [`FramedManifold::structure_functions_at`] then.
    pub fn structure_functions(&self) -> Result<Vec<Vec<Vec<Expr>>>, GeomError> {
        let n = self.dim();
        // Solve F c = [X_i, X_j] with F having the frame fields as columns.
        let mut pairs = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                pairs.push((i, j));
                rhs.push(self.bracket(&self.frames[i], &self.frames[j]).comps);
            }
        }
        let mut a: Vec<Vec<Expr>> = (0..n).map(|m| (0..n).map(|i| self.frames[i].comps[m].clone()).collect()).collect();
        let mut b: Vec<Vec<Expr>> = (0..n).map(|m| rhs.iter().map(|r| r[m].clone()).collect()).collect();
        let probe = self.point(&vec![0.37; n]);
        let nonzero = |e: &Expr| !e.is_zero() && e.evaluate(&probe).map(|v| v.abs() > 1e-12).unwrap_or(true);
        for col in 0..n {
            let piv = (col..n).find(|&r| nonzero(&a[r][col])).ok_or(GeomError::Singular)?;
            a.swap(col, piv);
            b.swap(col, piv);
            let p = a[col][col].clone();
            for k in 0..n {
                a[col][k] = Expr::div(a[col][k].clone(), p.clone()).simplify();
            }
            for k in 0..b[col].len() {
                b[col][k] = Expr::div(b[col][k].clone(), p.clone()).simplify();
            }
            for r in 0..n {
                if r == col || a[r][col].is_zero() {
                    continue;
                }
                let f = a[r][col].clone();
                for k in 0..n {
                    a[r][k] = Expr::sub(a[r][k].clone(), Expr::mul(vec![f.clone(), a[col][k].clone()])).simplify();
                }
                for k in 0..b[r].len() {
                    b[r][k] = Expr::sub(b[r][k].clone(), Expr::mul(vec![f.clone(), b[col][k].clone()])).simplify();
                }
            }
        }
        let mut c = vec![vec![vec![Expr::zero(); n]; n]; n];
        for (t, &(i, j)) in pairs.iter().enumerate() {
            for k in 0..n {
                c[i][j][k] = b[k][t].clone();
                c[j][i][k] = Expr::neg(b[k][t].clone()).simplify();
            }
        }
        Ok(c)
    }

    /// Structure functions evaluated at `p` by a pointwise solve.
    pub fn structure_functions_at(&self, p: &[f64]) -> Result<Vec<Vec<Vec<f64>>>, GeomError> {
        let f = self.frame_jets(p, 1)?;
        Ok(f.c.iter().map(|m| m.iter().map(|v| v.iter().map(|x| x.value()).collect()).collect()).collect())
    }

    /// Coordinate jets at `p` and the jets of all frame components.
    pub fn frame_components(&self, p: &[f64], order: usize) -> Result<(Vec<Jet>, JetMat), GeomError> {
        if p.len() != self.dim() {
            return Err(GeomError::Invalid(format!("point has {} coordinates, expected {}", p.len(), self.dim())));
        }
        let x = coordinate_jets(p, order);
        let fields = self
            .frames
            .iter()
            .map(|f| f.comps.iter().map(|c| c.eval_jet(&self.coords, &x)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        Ok((x, fields))
    }

    /// The input frame as jets of the given order at `p`.
    pub fn frame_jets(&self, p: &[f64], order: usize) -> Result<Frame, GeomError> {
        let (_, fields) = self.frame_components(p, order)?;
        Frame::new(fields)
    }

    pub fn metric_jets(&self, x: &[Jet]) -> Result<JetMat, GeomError> {
        let r = self.rank;
        match &self.metric {
            None => Ok(frame::identity(&x[0], r)),
            Some(m) => Ok(m
                .iter()
                .map(|row| row.iter().map(|e| e.eval_jet(&self.coords, x)).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()?),
        }
    }

    pub fn metric_at(&self, p: &[f64]) -> Result<DMatrix<f64>, GeomError> {
        let x = coordinate_jets(p, 0);
        Ok(frame::values(&self.metric_jets(&x)?))
    }

    /// Frame whose first `rank` fields are `g`-orthonormal (Cholesky on the
    /// input horizontal fields); the remaining input fields are kept.
    pub fn adapted_frame(&self, p: &[f64], order: usize) -> Result<Frame, GeomError> {
        let (x, fields) = self.frame_components(p, order)?;
        let r = self.rank;
        let g = self.metric_jets(&x)?;
        let l = frame::cholesky(&g)?;
        let linv = frame::inverse(&l)?;
        let mut out = Vec::with_capacity(self.dim());
        for a in 0..r {
            let comps = (0..self.dim())
                .map(|m| {
                    let mut s = &linv[a][0] * &fields[0][m];
                    for b in 1..r {
                        s = &s + &(&linv[a][b] * &fields[b][m]);
                    }
                    s
                })
                .collect();
            out.push(comps);
        }
        out.extend(fields.into_iter().skip(r));
        Frame::new(out)
    }

    /// Ranks of `E^{-1} ⊆ E^{-2} ⊆ …` at `p`, stopping at full rank or `max_step`.
    pub fn growth_flag(&self, p: &[f64], max_step: usize) -> Result<Vec<usize>, GeomError> {
        Ok(self.flag(p, max_step.max(1))?.ranks)
    }

    fn flag(&self, p: &[f64], max_step: usize) -> Result<Flag, GeomError> {
        let n = self.dim();
        let order = max_step + 1;
        let (_, fields) = self.frame_components(p, order)?;
        let coframe = frame::inverse(&frame::transpose(&fields))?;
        let cof = frame::values(&coframe);
        let in_frame = |v: &[Jet]| -> DVector<f64> { &cof * DVector::from_iterator(n, v.iter().map(|x| x.value())) };
        let horizontal: Vec<Vec<Jet>> = fields[..self.rank].to_vec();
        let mut layers: Vec<Vec<Vec<Jet>>> = vec![horizontal.clone()];
        let mut cols: Vec<DVector<f64>> = horizontal.iter().map(|v| in_frame(v)).collect();
        let mut ranks = vec![linalg::rank(&DMatrix::from_columns(&cols), RANK_TOL)];
        while *ranks.last().unwrap() < n && ranks.len() < max_step {
            let prev = layers.last().unwrap();
            let mut new = Vec::new();
            for h in &horizontal {
                for v in prev {
                    new.push(frame::coord_bracket(h, v));
                }
            }
            cols.extend(new.iter().map(|v| in_frame(v)));
            ranks.push(linalg::rank(&DMatrix::from_columns(&cols), RANK_TOL));
            layers.push(new);
        }
        Ok(Flag { ranks, layers, cof })
    }

    /// Numeric symbol `gr_p` with layer bases chosen as orthogonal
    /// complements in the Euclidean structure making the input frame
    /// orthonormal.
    pub fn symbol_at(&self, p: &[f64]) -> Result<CarnotAlgebra, GeomError> {
        let n = self.dim();
        let flag = self.flag(p, n)?;
        if *flag.ranks.last().unwrap() < n {
            return Err(GeomError::Precondition("distribution is not bracket generating".into()));
        }
        if flag.ranks.windows(2).any(|w| w[1] == w[0]) {
            return Err(GeomError::NonEquiregular(format!("flag ranks {:?} stall", flag.ranks)));
        }
        let vals = |v: &Vec<Jet>| -> DVector<f64> {
            &flag.cof * DVector::from_iterator(n, v.iter().map(|x| x.value()))
        };
        let s = flag.ranks.len();
        // Orthonormal complement bases, and coefficient vectors expressing
        // each basis vector through the spanning fields of its layer.
        let mut bases: Vec<Vec<DVector<f64>>> = Vec::new();
        let mut coeffs: Vec<Vec<DVector<f64>>> = Vec::new();
        let mut lower: Vec<DVector<f64>> = Vec::new();
        for k in 0..s {
            let span: Vec<DVector<f64>> = flag.layers[k].iter().map(vals).collect();
            let (basis, coef) = if k == 0 {
                let b: Vec<DVector<f64>> = (0..self.rank)
                    .map(|a| {
                        let mut v = DVector::zeros(n);
                        v[a] = 1.0;
                        v
                    })
                    .collect();
                let c: Vec<DVector<f64>> = b.iter().map(|v| v.rows(0, self.rank).into_owned()).collect();
                (b, c)
            } else {
                let mut all = lower.clone();
                all.extend(span.iter().cloned());
                // Orthonormal basis of the part of E^{-k} orthogonal to E^{-k+1}.
                let q = if lower.is_empty() {
                    DMatrix::zeros(n, 0)
                } else {
                    let prev = DMatrix::from_columns(&lower);
                    let r = linalg::rank(&prev, RANK_TOL);
                    prev.svd(true, false).u.unwrap().columns(0, r).into_owned()
                };
                let proj_out = |v: &DVector<f64>| -> DVector<f64> { v - &q * (q.transpose() * v) };
                let comp: Vec<DVector<f64>> = span.iter().map(proj_out).collect();
                let dim = flag.ranks[k] - flag.ranks[k - 1];
                let svd = DMatrix::from_columns(&comp).svd(true, false);
                let u = svd.u.unwrap();
                let mut order_idx: Vec<usize> = (0..svd.singular_values.len()).collect();
                order_idx.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
                let b: Vec<DVector<f64>> = order_idx[..dim].iter().map(|&i| u.column(i).into_owned()).collect();
                // b ≡ Σ a_u span_u mod E^{-k+1}: least squares against [span | lower].
                let m = DMatrix::from_columns(&all);
                let c: Vec<DVector<f64>> = b
                    .iter()
                    .map(|v| {
                        let (x, _) = linalg::lstsq(&m, v);
                        x.rows(lower.len(), span.len()).into_owned()
                    })
                    .collect();
                (b, c)
            };
            lower.extend(basis.iter().cloned());
            bases.push(basis);
            coeffs.push(coef);
        }
        let layer_dims: Vec<usize> = bases.iter().map(|b| b.len()).collect();
        let offsets: Vec<usize> = layer_dims.iter().scan(0, |acc, &d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
        let mut c = vec![0.0; n * n * n];
        for i in 0..s {
            for j in 0..s {
                let k = i + j + 1;
                if k >= s {
                    continue;
                }
                // Brackets of the spanning fields of layers i and j.
                let br: Vec<Vec<DVector<f64>>> = flag.layers[i]
                    .iter()
                    .map(|u| flag.layers[j].iter().map(|v| vals(&frame::coord_bracket(u, v))).collect())
                    .collect();
                for (a, ca) in coeffs[i].iter().enumerate() {
                    for (b, cb) in coeffs[j].iter().enumerate() {
                        let mut w = DVector::zeros(n);
                        for (u, &x) in ca.iter().enumerate() {
                            for (v, &y) in cb.iter().enumerate() {
                                if x != 0.0 && y != 0.0 {
                                    w += &br[u][v] * (x * y);
                                }
                            }
                        }
                        for (t, e) in bases[k].iter().enumerate() {
                            let ia = offsets[i] + a;
                            let ib = offsets[j] + b;
                            c[(ia * n + ib) * n + offsets[k] + t] = e.dot(&w);
                        }
                    }
                }
            }
        }
        let labels = (0..n).map(|i| format!("e{}", i + 1)).collect();
        let alg = StratifiedAlgebra::from_dense(layer_dims, labels, c, 1e-8)?;
        let g = self.metric_at(p)?;
        Ok(CarnotAlgebra::new(alg, g)?)
    }

    /// Decides constancy of the symbol on the samples for the supported classes.
    pub fn check_constant_symbol(&self, samples: &[Vec<f64>]) -> Result<SymbolVerdict, GeomError> {
        match self.class {
            StructureClass::Generic => Err(GeomError::Undecidable(
                "constancy of the symbol is undecidable here for the generic class".into(),
            )),
            StructureClass::Contact => {
                let mut lambdas = Vec::new();
                for p in samples {
                    let sym = self.symbol_at(p)?;
                    lambdas.push(lie::heisenberg_normal_form(&sym)?);
                }
                let mut dev: f64 = 0.0;
                for a in &lambdas {
                    for b in &lambdas {
                        if a.len() != b.len() {
                            dev = f64::INFINITY;
                            continue;
                        }
                        for (x, y) in a.iter().zip(b) {
                            dev = dev.max((x - y).abs());
                        }
                    }
                }
                Ok(SymbolVerdict::Contact { constant: dev <= 1e-6, max_deviation: dev, lambdas })
            }
            StructureClass::TwoThreeFive => {
                let growth =
                    samples.iter().map(|p| self.growth_flag(p, 3)).collect::<Result<Vec<_>, _>>()?;
                let constant = growth.iter().all(|g| g == &[2, 3, 5]);
                Ok(SymbolVerdict::TwoThreeFive { constant, growth })
            }
        }
    }
}

struct Flag {
    ranks: Vec<usize>,
    layers: Vec<Vec<Vec<Jet>>>,
    cof: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum SymbolVerdict {
    Contact { constant: bool, max_deviation: f64, lambdas: Vec<Vec<f64>> },
    TwoThreeFive { constant: bool, growth: Vec<Vec<usize>> },
}

impl SymbolVerdict {
    pub fn constant(&self) -> bool {
        match self {
            SymbolVerdict::Contact { constant, .. } | SymbolVerdict::TwoThreeFive { constant, .. } => *constant,
        }
    }
}

/// Seeded pseudorandom points in a coordinate box.
pub fn sample_points(chart_box: &[(f64, f64)], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| chart_box.iter().map(|&(a, b)| rng.random_range(a..=b)).collect()).collect()
}
