//! JSON problem files and measure files.
//!
//! A problem file holds the ambient dimension, the maps `Pᵢ` (row-major), the
//! weights and the marginals. Marginals are externally tagged:
//!
//! ```json
//! {"discrete": {"points": [[0.0], [1.0]], "weights": [0.5, 0.5]}}
//! {"discrete": {"points_csv": "nu1.csv"}}
//! {"gaussian": {"mean": [0.5], "cov": [[0.06]]}}
//! {"gmm": {"components": [{"mean": [0.0], "cov": [[1.0]]}], "weights": [1.0]}}
//! ```
//!
//! `points_csv` is resolved relative to the problem file. Missing discrete
//! weights mean uniform weights.

use std::fs;
use std::path::{Path, PathBuf};

use gwb_core::linalg::ProjectionFamily;
use gwb_core::measures::{DiscreteMeasure, GaussianMeasure, GaussianMixture, Measure, ProblemSpec};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: u32,
    pub d: usize,
    pub projections: Vec<MatrixSpec>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub marginals: Vec<MeasureSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub matrix: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureSpec {
    Discrete(DiscreteSpec),
    Gaussian(GaussianSpec),
    Gmm(GmmSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmSpec {
    pub components: Vec<GaussianSpec>,
    pub weights: Vec<f64>,
}

fn invalid(field: impl Into<String>, message: impl ToString) -> CliError {
    CliError::Invalid {
        field: field.into(),
        message: message.to_string(),
    }
}

/// Reads a JSON file, reporting syntax errors with line and column.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let file: ProblemFile = read_json(path)?;
        if file.version != FORMAT_VERSION {
            return Err(invalid(
                "version",
                format!("unsupported version {}, expected {FORMAT_VERSION}", file.version),
            ));
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }

    pub fn family(&self) -> Result<ProjectionFamily, CliError> {
        if self.projections.len() != self.weights.len() {
            return Err(invalid(
                "weights",
                format!("{} weights for {} projections", self.weights.len(), self.projections.len()),
            ));
        }
        let maps = self
            .projections
            .iter()
            .enumerate()
            .map(|(i, m)| m.to_matrix(&format!("projections[{i}]"), self.d))
            .collect::<Result<Vec<_>, _>>()?;
        ProjectionFamily::new(self.d, maps, self.weights.clone()).map_err(|e| invalid("projections/weights", e))
    }

    /// Builds the solver input. `base` is the directory CSV paths are
    /// resolved against.
    pub fn to_spec(&self, base: &Path) -> Result<ProblemSpec, CliError> {
        let family = self.family()?;
        if self.marginals.len() != family.len() {
            return Err(invalid(
                "marginals",
                format!("{} marginals for {} projections", self.marginals.len(), family.len()),
            ));
        }
        let marginals = self
            .marginals
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let field = format!("marginals[{i}]");
                let measure = m.to_measure(&field, base)?;
                if measure.dim() != family.target_dim(i) {
                    return Err(invalid(
                        field,
                        format!(
                            "dimension {} does not match the {} rows of projections[{i}]",
                            measure.dim(),
                            family.target_dim(i)
                        ),
                    ));
                }
                Ok(measure)
            })
            .collect::<Result<Vec<_>, _>>()?;
        ProblemSpec::new(family, marginals).map_err(|e| invalid("marginals", e))
    }
}

impl MatrixSpec {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            matrix: m.transpose().iter().copied().collect(),
        }
    }

    fn to_matrix(&self, field: &str, d: usize) -> Result<DMatrix<f64>, CliError> {
        if self.cols != d {
            return Err(invalid(format!("{field}.cols"), format!("expected d = {d}, found {}", self.cols)));
        }
        if self.matrix.len() != self.rows * self.cols {
            return Err(invalid(
                format!("{field}.matrix"),
                format!("expected {} entries, found {}", self.rows * self.cols, self.matrix.len()),
            ));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.matrix))
    }
}

fn rows_to_matrix(field: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if let Some((k, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
        return Err(invalid(format!("{field}[{k}]"), format!("expected {d} entries, found {}", r.len())));
    }
    Ok(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
}

impl GaussianSpec {
    pub fn from_measure(g: &GaussianMeasure) -> Self {
        let cov = g.cov();
        Self {
            mean: g.mean().iter().copied().collect(),
            cov: (0..cov.nrows()).map(|i| cov.row(i).iter().copied().collect()).collect(),
        }
    }

    fn to_measure(&self, field: &str) -> Result<GaussianMeasure, CliError> {
        let cov = rows_to_matrix(&format!("{field}.cov"), &self.cov)?;
        if cov.nrows() != self.mean.len() || cov.ncols() != self.mean.len() {
            return Err(invalid(
                format!("{field}.cov"),
                format!("expected {0}x{0}, found {1}x{2}", self.mean.len(), cov.nrows(), cov.ncols()),
            ));
        }
        GaussianMeasure::new(DVector::from_column_slice(&self.mean), cov).map_err(|e| invalid(field, e))
    }
}

impl MeasureSpec {
    pub fn from_measure(m: &Measure) -> Self {
        match m {
            Measure::Discrete(d) => {
                let p = d.points();
                MeasureSpec::Discrete(DiscreteSpec {
                    points: Some((0..p.nrows()).map(|i| p.row(i).iter().copied().collect()).collect()),
                    points_csv: None,
                    weights: Some(d.weights().iter().copied().collect()),
                })
            }
            Measure::Gaussian(g) => MeasureSpec::Gaussian(GaussianSpec::from_measure(g)),
            Measure::Mixture(g) => MeasureSpec::Gmm(GmmSpec {
                components: g.components().iter().map(GaussianSpec::from_measure).collect(),
                weights: g.weights().to_vec(),
            }),
        }
    }

    pub fn to_measure(&self, field: &str, base: &Path) -> Result<Measure, CliError> {
        match self {
            MeasureSpec::Discrete(spec) => {
                let field = format!("{field}.discrete");
                let points = match (&spec.points, &spec.points_csv) {
                    (Some(rows), None) => rows_to_matrix(&format!("{field}.points"), rows)?,
                    (None, Some(path)) => read_points_csv(&base.join(path))?,
                    _ => {
                        return Err(invalid(field, "give exactly one of `points` and `points_csv`"));
                    }
                };
                if points.nrows() == 0 {
                    return Err(invalid(field, "no atoms"));
                }
                let weights = match &spec.weights {
                    Some(w) if w.len() != points.nrows() => {
                        return Err(invalid(
                            format!("{field}.weights"),
                            format!("{} weights for {} atoms", w.len(), points.nrows()),
                        ));
                    }
                    Some(w) => DVector::from_column_slice(w),
                    None => DVector::from_element(points.nrows(), 1.0 / points.nrows() as f64),
                };
                DiscreteMeasure::new(points, weights)
                    .map(Measure::Discrete)
                    .map_err(|e| invalid(field, e))
            }
            MeasureSpec::Gaussian(spec) => spec.to_measure(&format!("{field}.gaussian")).map(Measure::Gaussian),
            MeasureSpec::Gmm(spec) => {
                let field = format!("{field}.gmm");
                let components = spec
                    .components
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c.to_measure(&format!("{field}.components[{k}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                GaussianMixture::new(components, spec.weights.clone())
                    .map(Measure::Mixture)
                    .map_err(|e| invalid(field, e))
            }
        }
    }
}

/// Reads one point per row. A first row that does not parse as numbers is
/// taken as a header.
pub fn read_points_csv(path: &PathBuf) -> Result<DMatrix<f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| invalid(path.display().to_string(), e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| invalid(path.display().to_string(), e))?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if line == 0 => continue,
            Err(e) => return Err(invalid(format!("{}:{}", path.display(), line + 1), e)),
        }
    }
    rows_to_matrix(&path.display().to_string(), &rows)
}

/// A measure on its own, or the `measure` field of a result file.
pub fn load_measure(path: &Path) -> Result<Measure, CliError> {
    let value: serde_json::Value = read_json(path)?;
    let value = match value.get("measure") {
        Some(inner) => inner.clone(),
        None => value,
    };
    let spec: MeasureSpec =
        serde_json::from_value(value).map_err(|e| invalid(path.display().to_string(), e))?;
    spec.to_measure("measure", path.parent().unwrap_or(Path::new(".")))
}
