//! JSON documents read and written by the CLI, and tabular output.
//!
//! Schemas live in `docs/schema/`. Every document written by the CLI carries
//! a `schema` tag naming its schema and version.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use wmmse::dual::ProblemInstance;
use wmmse::estimator::NashSolution;
use wmmse::gelbrich::MomentPair;
use wmmse::linalg::PsdMatrix;

pub const SOLUTION_SCHEMA: &str = "wmmse.solution/1";
pub const CHECK_SCHEMA: &str = "wmmse.check/1";
pub const REGRET_SUMMARY_SCHEMA: &str = "wmmse.regret-summary/1";

type Rows = Vec<Vec<f64>>;

/// Instance file: `y = H x + w` with nominal moments and radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    #[serde(rename = "H")]
    pub h: Rows,
    pub mu_x: Vec<f64>,
    pub mu_w: Vec<f64>,
    pub sigma_x: Rows,
    pub sigma_w: Rows,
    pub rho_x: f64,
    pub rho_w: f64,
}

impl InstanceDoc {
    pub fn from_instance(inst: &ProblemInstance) -> Self {
        Self {
            h: to_rows(inst.h()),
            mu_x: inst.nominal_x().mean().iter().copied().collect(),
            mu_w: inst.nominal_w().mean().iter().copied().collect(),
            sigma_x: to_rows(inst.nominal_x().cov().as_matrix()),
            sigma_w: to_rows(inst.nominal_w().cov().as_matrix()),
            rho_x: inst.rho_x(),
            rho_w: inst.rho_w(),
        }
    }

    pub fn to_instance(&self) -> Result<ProblemInstance> {
        let h = from_rows(&self.h).context("H")?;
        let sx = psd(&self.sigma_x).context("sigma_x")?;
        let sw = psd(&self.sigma_w).context("sigma_w")?;
        let px = MomentPair::new(DVector::from_vec(self.mu_x.clone()), sx).context("mu_x")?;
        let pw = MomentPair::new(DVector::from_vec(self.mu_w.clone()), sw).context("mu_w")?;
        Ok(ProblemInstance::new(h, px, pw, self.rho_x, self.rho_w)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorDoc {
    #[serde(rename = "A")]
    pub a: Rows,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorDoc {
    pub mu_x: Vec<f64>,
    pub mu_w: Vec<f64>,
    pub sigma_x: Rows,
    pub sigma_w: Rows,
}

/// Output of `solve`, input of `check`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionDoc {
    pub schema: String,
    pub instance_sha256: String,
    pub instance: InstanceDoc,
    pub estimator: EstimatorDoc,
    pub least_favorable: PriorDoc,
    /// Bayes risk of the least favorable prior.
    pub value: f64,
    /// Worst-case risk of the estimator.
    pub worst_case: f64,
    pub gap: f64,
    pub surrogate_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

impl SolutionDoc {
    pub fn new(inst: &ProblemInstance, sol: &NashSolution, timing: bool) -> Self {
        Self {
            schema: SOLUTION_SCHEMA.into(),
            instance_sha256: inst.fingerprint(),
            instance: InstanceDoc::from_instance(inst),
            estimator: EstimatorDoc {
                a: to_rows(sol.estimator.a()),
                b: sol.estimator.b().iter().copied().collect(),
            },
            least_favorable: PriorDoc {
                mu_x: sol.prior_means.0.iter().copied().collect(),
                mu_w: sol.prior_means.1.iter().copied().collect(),
                sigma_x: to_rows(sol.least_favorable.sigma_x.as_matrix()),
                sigma_w: to_rows(sol.least_favorable.sigma_w.as_matrix()),
            },
            value: sol.value,
            worst_case: sol.worst_case,
            gap: sol.gap,
            surrogate_gap: sol.report.gap,
            iterations: sol.report.iterations,
            converged: sol.report.converged,
            variant: sol.report.variant.name().into(),
            seconds: timing.then_some(sol.report.elapsed),
        }
    }
}

pub fn to_rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &Rows) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    if nrows == 0 {
        bail!("matrix has no rows");
    }
    let ncols = rows[0].len();
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        bail!("row {i} has {} entries, expected {ncols}", rows[i].len());
    }
    Ok(DMatrix::from_row_iterator(nrows, ncols, rows.iter().flatten().copied()))
}

pub fn psd(rows: &Rows) -> Result<PsdMatrix> {
    Ok(PsdMatrix::new(from_rows(rows)?)?)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn pretty_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Rows of named cells, rendered as CSV with a header row or as JSON lines.
pub struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.columns)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(cell_text))?;
                }
                Ok(w.into_inner()?)
            }
            Format::Json => {
                let mut out = Vec::new();
                for row in &self.rows {
                    let obj: serde_json::Map<String, Value> = self
                        .columns
                        .iter()
                        .map(|c| c.to_string())
                        .zip(row.iter().cloned())
                        .collect();
                    serde_json::to_writer(&mut out, &obj)?;
                    out.push(b'\n');
                }
                Ok(out)
            }
        }
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}
