//! Manifold description files.

use serde::Deserialize;
use srgeom::expr::{self, Expr};
use srgeom::manifold::{FramedManifold, StructureClass, VectorField};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid manifold file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{location}: {source}")]
    Expr { location: String, source: expr::ExprError },
    #[error("invalid manifold: {0}")]
    Geometry(#[from] srgeom::frame::GeomError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldFile {
    pub coords: Vec<String>,
    pub frames: Vec<Vec<String>>,
    pub horizontal_rank: usize,
    #[serde(default)]
    pub metric: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub class: StructureClass,
    /// Sampling interval per coordinate; `[-1, 1]` for each when absent.
    #[serde(default)]
    pub chart_box: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub sample_count: usize,
}

fn default_seed() -> u64 {
    42
}

fn default_samples() -> usize {
    10
}

impl ManifoldFile {
    pub fn load(path: &str) -> Result<ManifoldFile, InputError> {
        let text = std::fs::read_to_string(path).map_err(|source| InputError::Io { path: path.into(), source })?;
        ManifoldFile::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<ManifoldFile, InputError> {
        Ok(toml::from_str(text)?)
    }

    pub fn chart_box(&self) -> Result<Vec<(f64, f64)>, InputError> {
        let n = self.coords.len();
        match &self.chart_box {
            None => Ok(vec![(-1.0, 1.0); n]),
            Some(b) if b.len() != n => {
                Err(InputError::Invalid(format!("chart_box has {} intervals for {n} coordinates", b.len())))
            }
            Some(b) => {
                if let Some(i) = b.iter().position(|[lo, hi]| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
                    return Err(InputError::Invalid(format!("chart_box[{i}] is not an interval")));
                }
                Ok(b.iter().map(|&[lo, hi]| (lo, hi)).collect())
            }
        }
    }

    /// Parses every expression, reporting the failing entry.
    pub fn manifold(&self) -> Result<FramedManifold, InputError> {
        let parse = |s: &str, location: String| {
            expr::parse(s, &self.coords).map_err(|source| InputError::Expr { location, source })
        };
        let mut frames = Vec::with_capacity(self.frames.len());
        for (i, f) in self.frames.iter().enumerate() {
            let comps: Vec<Expr> =
                f.iter().enumerate().map(|(k, s)| parse(s, format!("frames[{i}][{k}]"))).collect::<Result<_, _>>()?;
            frames.push(VectorField::new(comps));
        }
        let metric = match &self.metric {
            None => None,
            Some(m) => Some(
                m.iter()
                    .enumerate()
                    .map(|(i, row)| {
                        row.iter().enumerate().map(|(j, s)| parse(s, format!("metric[{i}][{j}]"))).collect()
                    })
                    .collect::<Result<Vec<Vec<Expr>>, _>>()?,
            ),
        };
        Ok(FramedManifold::new(self.coords.clone(), frames, self.horizontal_rank, metric, self.class)?)
    }

    /// `"x=0.1,y=-2"`; coordinates not named take the centre of the chart box.
    pub fn base_point(&self, spec: Option<&str>) -> Result<Vec<f64>, InputError> {
        let chart = self.chart_box()?;
        let mut p: Vec<f64> = chart.iter().map(|(a, b)| 0.5 * (a + b)).collect();
        let Some(spec) = spec else { return Ok(p) };
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, value) =
                item.split_once('=').ok_or_else(|| InputError::Invalid(format!("base point entry `{item}` is not name=value")))?;
            let i = self
                .coords
                .iter()
                .position(|c| c == name.trim())
                .ok_or_else(|| InputError::Invalid(format!("unknown coordinate `{}` in base point", name.trim())))?;
            p[i] = value
                .trim()
                .parse()
                .map_err(|_| InputError::Invalid(format!("base point value `{}` is not a number", value.trim())))?;
        }
        Ok(p)
    }
}

/// A comma-separated list of numbers.
pub fn parse_numbers(s: &str, what: &str) -> Result<Vec<f64>, InputError> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| InputError::Invalid(format!("{what}: `{}` is not a number", x.trim()))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEIS: &str = r#"
coords = ["x", "y", "z"]
frames = [["1", "0", "-y/2"], ["0", "1", "x/2"], ["0", "0", "1"]]
horizontal_rank = 2
class = "contact"
"#;

    #[test]
    fn defaults() {
        let f = ManifoldFile::from_toml(HEIS).unwrap();
        assert_eq!(f.seed, 42);
        assert_eq!(f.sample_count, 10);
        assert_eq!(f.chart_box().unwrap(), vec![(-1.0, 1.0); 3]);
        assert_eq!(f.manifold().unwrap().dim(), 3);
        assert_eq!(f.base_point(None).unwrap(), vec![0.0; 3]);
        assert_eq!(f.base_point(Some("z=0.5, x=-1")).unwrap(), vec![-1.0, 0.0, 0.5]);
    }

    #[test]
    fn errors_name_the_entry() {
        let f = ManifoldFile::from_toml(&HEIS.replace("x/2", "x/*2")).unwrap();
        let e = f.manifold().unwrap_err().to_string();
        assert!(e.starts_with("frames[1][2]: syntax error"), "{e}");
        let f = ManifoldFile::from_toml(&HEIS.replace("\"-y/2\"", "\"-w/2\"")).unwrap();
        assert!(f.manifold().unwrap_err().to_string().contains("unknown identifier `w`"));
        let f = ManifoldFile::from_toml(&HEIS.replace("horizontal_rank = 2", "horizontal_rank = 4")).unwrap();
        assert!(matches!(f.manifold(), Err(InputError::Geometry(_))));
        assert!(f.base_point(Some("q=1")).is_err());
        assert!(ManifoldFile::from_toml(&format!("{HEIS}\nextra = 1")).is_err());
        let f = ManifoldFile::from_toml(&format!("{HEIS}\nchart_box = [[0, 1], [1, 0], [0, 1]]")).unwrap();
        assert!(f.chart_box().is_err());
    }
}
