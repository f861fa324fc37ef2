//! The analyses behind each subcommand. Every report is a plain serializable
//! struct so that output is deterministic for a fixed file and seed.

use std::collections::BTreeMap;

use serde::Serialize;
use srgeom::connection::{Connection, GradedFrame};
use srgeom::contact::{extract_contact_data, ContactGrading, ContactOptions, WFormula};
use srgeom::frame::{self, GeomError, Frame};
use srgeom::g235::{self, MorimotoFormula};
use srgeom::jet::Jet;
use srgeom::manifold::{sample_points, FramedManifold, StructureClass, SymbolVerdict};

use crate::input::{InputError, ManifoldFile};

/// Entries below this magnitude are left out of component tables.
pub const TABLE_CUTOFF: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error("{0}")]
    Unsupported(String),
}

/// Settings shared by all commands, after flag overrides.
#[derive(Debug, Clone)]
pub struct Run {
    pub file: ManifoldFile,
    pub manifold: FramedManifold,
    pub seed: u64,
    pub samples: usize,
    pub tolerance: f64,
    pub chart_box: Vec<(f64, f64)>,
}

impl Run {
    pub fn new(file: ManifoldFile, seed: Option<u64>, samples: Option<usize>, tolerance: f64) -> Result<Run, CommandError> {
        let manifold = file.manifold()?;
        let chart_box = file.chart_box()?;
        Ok(Run {
            seed: seed.unwrap_or(file.seed),
            samples: samples.unwrap_or(file.sample_count),
            file,
            manifold,
            tolerance,
            chart_box,
        })
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        sample_points(&self.chart_box, self.samples, self.seed)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub command: &'static str,
    pub seed: u64,
    pub sample_count: usize,
    pub class: StructureClass,
    pub coords: Vec<String>,
    pub horizontal_rank: usize,
}

impl Header {
    fn new(command: &'static str, run: &Run) -> Header {
        Header {
            command,
            seed: run.seed,
            sample_count: run.samples,
            class: run.manifold.class(),
            coords: run.manifold.coords().to_vec(),
            horizontal_rank: run.manifold.rank(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthSample {
    pub point: Vec<f64>,
    pub growth: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SymbolSummary {
    /// Normal form `h_n(λ)` with `λ_1 = 1`, at the first sample.
    Heisenberg { lambda: Vec<f64> },
    /// The (2,3,5) Cartan algebra; there is only one.
    CartanNilpotent,
    /// Only the layer dimensions are reported for the generic class.
    Layers { dims: Vec<usize> },
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    #[serde(flatten)]
    pub header: Header,
    pub samples: Vec<GrowthSample>,
    pub bracket_generating: bool,
    pub equiregular: bool,
    pub symbol: Option<SymbolSummary>,
    /// `None` when undecidable (generic class) or not computed.
    pub constant_symbol: Option<bool>,
    pub diagnostics: Vec<String>,
    pub residuals: BTreeMap<String, f64>,
}

pub fn analyze(run: &Run) -> Result<AnalyzeReport, CommandError> {
    let m = &run.manifold;
    let n = m.dim();
    let points = run.points();
    let mut samples = Vec::with_capacity(points.len());
    for p in &points {
        samples.push(GrowthSample { point: p.clone(), growth: m.growth_flag(p, n)? });
    }
    let mut diagnostics = Vec::new();
    let bracket_generating = samples.iter().all(|s| s.growth.last() == Some(&n));
    if !bracket_generating {
        diagnostics.push("the distribution is not bracket generating at some samples".to_string());
    }
    let first = samples.first().map(|s| s.growth.clone()).unwrap_or_default();
    let mut equiregular = bracket_generating;
    for s in &samples {
        if s.growth != first {
            equiregular = false;
            diagnostics.push(format!("rank jump: growth {:?} at {:?} differs from {:?}", s.growth, s.point, first));
        }
    }
    let mut residuals = BTreeMap::new();
    let (symbol, constant_symbol) = if !equiregular || points.is_empty() {
        (None, None)
    } else {
        match m.class() {
            StructureClass::Generic => {
                diagnostics.push("constancy of the symbol is not decided for the generic class".to_string());
                let dims = first.iter().scan(0, |prev, &r| {
                    let d = r - *prev;
                    *prev = r;
                    Some(d)
                });
                (Some(SymbolSummary::Layers { dims: dims.collect() }), None)
            }
            _ => match m.check_constant_symbol(&points)? {
                SymbolVerdict::Contact { constant, max_deviation, lambdas } => {
                    residuals.insert("lambda_deviation".to_string(), max_deviation);
                    (Some(SymbolSummary::Heisenberg { lambda: lambdas[0].clone() }), Some(constant))
                }
                SymbolVerdict::TwoThreeFive { constant, .. } => {
                    if !constant {
                        diagnostics.push("growth differs from (2,3,5)".to_string());
                    }
                    (constant.then_some(SymbolSummary::CartanNilpotent), Some(constant))
                }
            },
        }
    };
    Ok(AnalyzeReport {
        header: Header::new("analyze", run),
        samples,
        bracket_generating,
        equiregular,
        symbol,
        constant_symbol,
        diagnostics,
        residuals,
    })
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GradingSummary {
    /// `W` in the orthonormal horizontal frame.
    Contact { lambda: Vec<f64>, multiplicity: Vec<usize>, w: Vec<f64> },
    /// `Υ, W_1, W_2` in `(X_1, X_2)`, `𝒜` as a matrix, `μ` on the graded frame.
    TwoThreeFive { upsilon: Vec<f64>, w1: Vec<f64>, w2: Vec<f64>, a: Vec<Vec<f64>>, mu: Vec<f64> },
}

#[derive(Debug, Clone, Serialize)]
pub struct Component {
    pub index: Vec<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConnectionSample {
    pub point: Vec<f64>,
    /// `T(e_i, e_j)^k`, `i < j`.
    pub torsion: Vec<Component>,
    /// `R(e_i, e_j)^k_l` (`R(e_i,e_j) e_l = Σ_k R^k_l e_k`), `i < j`.
    pub curvature: Vec<Component>,
    pub residuals: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConnectionReport {
    #[serde(flatten)]
    pub header: Header,
    pub base_point: Vec<f64>,
    pub grading: GradingSummary,
    /// Coordinate components of the graded orthonormal frame at the base point.
    pub frame: Vec<Vec<f64>>,
    /// `∇_{e_i} e_j = Σ_k Γ_{ij}^k e_k` at the base point.
    pub christoffel: Vec<Component>,
    pub samples: Vec<ConnectionSample>,
    pub flat: bool,
    pub residuals: BTreeMap<String, f64>,
}

/// The Morimoto connection of a contact or (2,3,5) manifold at `p`.
pub fn morimoto_connection(m: &FramedManifold, p: &[f64]) -> Result<(Connection, GradingSummary), CommandError> {
    match m.class() {
        StructureClass::Contact => {
            let data = extract_contact_data(m, p, &ContactOptions::default())?;
            let (lambda, multiplicity) = (data.lambda.clone(), data.multiplicity.clone());
            let g = ContactGrading::morimoto(data, WFormula::Corrected)?;
            let conn = g.morimoto_connection()?;
            Ok((conn, GradingSummary::Contact { lambda, multiplicity, w: values(&g.w) }))
        }
        StructureClass::TwoThreeFive => {
            let pair = g235::horizontal_pair(m, p, g235::MORIMOTO_ORDER)?;
            let mm = g235::morimoto_235(&pair, MorimotoFormula::Solved)?;
            let summary = GradingSummary::TwoThreeFive {
                upsilon: values(&mm.upsilon),
                w1: values(&mm.params.w1),
                w2: values(&mm.params.w2),
                a: mm.params.a.iter().map(|r| values(r)).collect(),
                mu: values(&mm.mu),
            };
            Ok((mm.connection, summary))
        }
        StructureClass::Generic => {
            Err(CommandError::Unsupported("the connection command needs class `contact` or `two-three-five`".into()))
        }
    }
}

fn values(v: &[Jet]) -> Vec<f64> {
    v.iter().map(Jet::value).collect()
}

fn push_max(map: &mut BTreeMap<String, f64>, key: &str, v: f64) {
    let e = map.entry(key.to_string()).or_insert(0.0);
    // NaN propagates so that a broken sample is visible.
    *e = if v.is_nan() || e.is_nan() { f64::NAN } else { e.max(v) };
}

fn connection_sample(conn: &Connection, p: &[f64]) -> Result<ConnectionSample, CommandError> {
    let n = conn.dim();
    let t = conn.torsion();
    let r = conn.curvature()?;
    let mut torsion = Vec::new();
    let mut curvature = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in 0..n {
                let v = t[i][j][k].value();
                if v.abs() > TABLE_CUTOFF {
                    torsion.push(Component { index: vec![i, j, k], value: v });
                }
                for l in 0..n {
                    let v = r[i][j][k][l].value();
                    if v.abs() > TABLE_CUTOFF {
                        curvature.push(Component { index: vec![i, j, k, l], value: v });
                    }
                }
            }
        }
    }
    let mut residuals = BTreeMap::new();
    let mo = conn.check_morimoto()?;
    let co = conn.check_compatible()?;
    let fl = conn.flatness()?;
    for (k, v) in [
        ("rcond", mo.rcond),
        ("tcond", mo.tcond),
        ("layers", co.layers),
        ("metric", co.metric),
        ("strong", co.strong),
        ("torsion", fl.torsion),
        ("curvature", fl.curvature),
    ] {
        residuals.insert(k.to_string(), v);
    }
    Ok(ConnectionSample { point: p.to_vec(), torsion, curvature, residuals })
}

pub fn connection(run: &Run, base_point: &[f64]) -> Result<ConnectionReport, CommandError> {
    let m = &run.manifold;
    let (conn, grading) = morimoto_connection(m, base_point)?;
    let n = conn.dim();
    let frame = (0..n).map(|i| values(&conn.frame().fields[i])).collect();
    let mut christoffel = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = conn.gamma[i][j][k].value();
                if v.abs() > TABLE_CUTOFF {
                    christoffel.push(Component { index: vec![i, j, k], value: v });
                }
            }
        }
    }
    let mut samples = Vec::new();
    let mut residuals = BTreeMap::new();
    for p in run.points() {
        let (c, _) = morimoto_connection(m, &p)?;
        let s = connection_sample(&c, &p)?;
        for (k, v) in &s.residuals {
            push_max(&mut residuals, k, *v);
        }
        samples.push(s);
    }
    let flat = flat_within(&residuals, run.tolerance);
    Ok(ConnectionReport {
        header: Header::new("connection", run),
        base_point: base_point.to_vec(),
        grading,
        frame,
        christoffel,
        samples,
        flat,
        residuals,
    })
}

fn flat_within(residuals: &BTreeMap<String, f64>, tol: f64) -> bool {
    ["torsion", "curvature"].iter().all(|k| residuals.get(*k).is_some_and(|v| *v <= tol))
}

#[derive(Debug, Clone, Serialize)]
pub struct FlatSample {
    pub point: Vec<f64>,
    pub torsion: f64,
    pub curvature: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlatReport {
    #[serde(flatten)]
    pub header: Header,
    /// Which connection decides: `morimoto`, `canonical-235` or `levi-civita`.
    pub method: &'static str,
    pub tolerance: f64,
    pub samples: Vec<FlatSample>,
    pub flat: bool,
    pub residuals: BTreeMap<String, f64>,
}

pub fn flat(run: &Run) -> Result<FlatReport, CommandError> {
    let m = &run.manifold;
    let method = match m.class() {
        StructureClass::Contact => "morimoto",
        StructureClass::TwoThreeFive => "canonical-235",
        StructureClass::Generic if m.rank() == m.dim() => "levi-civita",
        StructureClass::Generic => {
            return Err(CommandError::Unsupported(
                "flatness of a proper sub-Riemannian structure needs class `contact` or `two-three-five`".into(),
            ))
        }
    };
    let mut samples = Vec::new();
    let mut residuals = BTreeMap::new();
    for p in run.points() {
        let r = match m.class() {
            StructureClass::Contact => morimoto_connection(m, &p)?.0.flatness()?,
            StructureClass::TwoThreeFive => g235::flatness_235(m, &p, run.tolerance)?.residuals,
            StructureClass::Generic => riemannian(m, &p, 3)?.flatness()?,
        };
        push_max(&mut residuals, "torsion", r.torsion);
        push_max(&mut residuals, "curvature", r.curvature);
        samples.push(FlatSample { point: p, torsion: r.torsion, curvature: r.curvature });
    }
    let flat = flat_within(&residuals, run.tolerance);
    Ok(FlatReport { header: Header::new("flat", run), method, tolerance: run.tolerance, samples, flat, residuals })
}

/// Levi-Civita connection of a Riemannian metric given by a full-rank frame.
fn riemannian(m: &FramedManifold, p: &[f64], order: usize) -> Result<Connection, GeomError> {
    let (x, fields) = m.frame_components(p, order)?;
    let g = m.metric_jets(&x)?;
    let gf = GradedFrame::orthonormalize(&Frame::new(fields)?, vec![m.dim()], &g)?;
    Ok(Connection::levi_civita(gf))
}

/// A connection compatible with `(E, g)` near `p`: the horizontal part of the
/// orthonormalized frame is parallel. Normal geodesics do not depend on the
/// choice of compatible connection.
pub fn compatible_connection(m: &FramedManifold, p: &[f64]) -> Result<Connection, GeomError> {
    let f = m.adapted_frame(p, 1)?;
    let (r, n) = (m.rank(), m.dim());
    let dims = if r == n { vec![n] } else { vec![r, n - r] };
    Ok(Connection::frame_parallel(GradedFrame::new(f, dims)?))
}

/// One geodesic row: `t`, coordinates, covector and speed `|γ̇|_g`.
#[derive(Debug, Clone, Serialize)]
pub struct GeodesicRow {
    pub t: f64,
    pub point: Vec<f64>,
    pub covector: Vec<f64>,
    pub speed: f64,
}

pub fn geodesic(run: &Run, x0: &[f64], p0: &[f64], t_max: f64, step: f64) -> Result<Vec<GeodesicRow>, CommandError> {
    let m = &run.manifold;
    if p0.len() != m.dim() {
        return Err(InputError::Invalid(format!("covector has {} components, expected {}", p0.len(), m.dim())).into());
    }
    let traj = srgeom::connection::normal_geodesic(
        |x| compatible_connection(m, x),
        x0,
        p0,
        t_max,
        step,
        Some(&run.chart_box),
    )?;
    let r = m.rank();
    traj.into_iter()
        .map(|s| {
            let f = frame::values(&m.adapted_frame(&s.point, 1)?.fields);
            let speed = (0..r)
                .map(|a| (0..m.dim()).map(|k| s.covector[k] * f[(a, k)]).sum::<f64>().powi(2))
                .sum::<f64>()
                .sqrt();
            Ok(GeodesicRow { t: s.t, point: s.point, covector: s.covector, speed })
        })
        .collect()
}

/// Header row, then one comma-separated row per sample.
pub fn geodesic_csv(coords: &[String], rows: &[GeodesicRow]) -> String {
    let mut out = String::from("t");
    for c in coords {
        out.push_str(&format!(",{c}"));
    }
    for c in coords {
        out.push_str(&format!(",p_{c}"));
    }
    out.push_str(",speed\n");
    for row in rows {
        out.push_str(&row.t.to_string());
        for v in row.point.iter().chain(&row.covector) {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{}\n", row.speed));
    }
    out
}
