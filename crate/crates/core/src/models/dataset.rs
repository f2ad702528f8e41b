use std::path::Path;

use crate::distributions::ln_factorial;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Name given to the all-ones design column.
pub const INTERCEPT: &str = "(intercept)";

/// Count outcomes with a design of `[intercept, treatment, covariates...]`.
///
/// The intercept-only design (`p == 1`) is also accepted so single-mean fits
/// can be expressed; every other design must carry a 0/1 treatment column in
/// position 1.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: Vec<u64>,
    ln_fact: Vec<f64>,
    /// Row-major copy of the design for the likelihood loops.
    rows: Vec<f64>,
    design: Matrix,
    column_names: Vec<String>,
}

impl Dataset {
    pub fn new(y: Vec<u64>, design: Matrix, column_names: Vec<String>) -> Result<Self> {
        let n = y.len();
        let p = design.ncols();
        if design.nrows() != n {
            return Err(Error::Domain(format!(
                "design has {} rows but there are {n} outcomes",
                design.nrows()
            )));
        }
        if column_names.len() != p {
            return Err(Error::Domain(format!(
                "{} column names for {p} design columns",
                column_names.len()
            )));
        }
        if p == 0 || n < p {
            return Err(Error::Domain(format!("need n >= p >= 1, got n={n}, p={p}")));
        }
        if design.column(0).iter().any(|&v| v != 1.0) {
            return Err(Error::Domain("first design column must be all ones".into()));
        }
        if p > 1 && design.column(1).iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Domain("treatment column must be 0/1".into()));
        }
        if design.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("design has non-finite entries".into()));
        }
        let mut rows = Vec::with_capacity(n * p);
        for i in 0..n {
            rows.extend(design.row(i).iter());
        }
        let ln_fact = y.iter().map(|&v| ln_factorial(v)).collect();
        Ok(Self { y, ln_fact, rows, design, column_names })
    }

    pub fn intercept_only(y: Vec<u64>) -> Result<Self> {
        let n = y.len();
        Self::new(y, Matrix::from_element(n, 1, 1.0), vec![INTERCEPT.to_string()])
    }

    /// Design `[1, treatment]`.
    pub fn with_treatment(y: Vec<u64>, treatment: &[u8]) -> Result<Self> {
        Self::with_covariates(y, treatment, &[], &[])
    }

    /// Design `[1, treatment, covariates...]`; `covariates[j]` is one column.
    pub fn with_covariates(
        y: Vec<u64>,
        treatment: &[u8],
        covariates: &[Vec<f64>],
        names: &[&str],
    ) -> Result<Self> {
        let n = y.len();
        if treatment.len() != n || covariates.iter().any(|c| c.len() != n) {
            return Err(Error::Domain("column lengths differ from the outcome length".into()));
        }
        let p = 2 + covariates.len();
        let design = Matrix::from_fn(n, p, |i, j| match j {
            0 => 1.0,
            1 => f64::from(treatment[i]),
            _ => covariates[j - 2][i],
        });
        let mut column_names = vec![INTERCEPT.to_string(), "treatment".to_string()];
        for j in 0..covariates.len() {
            column_names.push(names.get(j).map_or_else(|| format!("x{}", j + 1), |s| s.to_string()));
        }
        Self::new(y, design, column_names)
    }

    /// Reads a headered CSV. Column roles are picked by name.
    pub fn from_csv(
        path: &Path,
        outcome: &str,
        treatment: Option<&str>,
        covariates: &[String],
    ) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let headers = reader.headers()?.clone();
        let locate = |name: &str| {
            headers.iter().position(|h| h == name).ok_or_else(|| Error::Input {
                row: 1,
                column: name.to_string(),
                message: format!(
                    "no such column; available: {}",
                    headers.iter().collect::<Vec<_>>().join(", ")
                ),
            })
        };
        let outcome_idx = locate(outcome)?;
        let treatment_idx = treatment.map(locate).transpose()?;
        let covariate_idx = covariates.iter().map(|c| locate(c)).collect::<Result<Vec<_>>>()?;

        let mut y = Vec::new();
        let mut arms = Vec::new();
        let mut covs: Vec<Vec<f64>> = vec![Vec::new(); covariates.len()];
        for (i, record) in reader.records().enumerate() {
            // Header is line 1.
            let line = i + 2;
            let record = record?;
            let field = |idx: usize, name: &str| -> Result<f64> {
                let raw = record.get(idx).unwrap_or("");
                raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Input {
                    row: line,
                    column: name.to_string(),
                    message: format!("'{raw}' is not a finite number"),
                })
            };
            let value = field(outcome_idx, outcome)?;
            if value < 0.0 || value.fract() != 0.0 {
                return Err(Error::Input {
                    row: line,
                    column: outcome.to_string(),
                    message: format!("outcome must be a nonnegative integer, got {value}"),
                });
            }
            y.push(value as u64);
            if let (Some(idx), Some(name)) = (treatment_idx, treatment) {
                let a = field(idx, name)?;
                if a != 0.0 && a != 1.0 {
                    return Err(Error::Input {
                        row: line,
                        column: name.to_string(),
                        message: format!("treatment must be 0 or 1, got {a}"),
                    });
                }
                arms.push(a as u8);
            }
            for (j, (&idx, name)) in covariate_idx.iter().zip(covariates).enumerate() {
                covs[j].push(field(idx, name)?);
            }
        }
        if y.is_empty() {
            return Err(Error::Input { row: 2, column: outcome.to_string(), message: "no data rows".into() });
        }

        let n = y.len();
        let mut names = vec![INTERCEPT.to_string()];
        let mut columns: Vec<Vec<f64>> = Vec::new();
        if let Some(name) = treatment {
            names.push(name.to_string());
            columns.push(arms.iter().map(|&a| f64::from(a)).collect());
        } else if !covariates.is_empty() {
            return Err(Error::Input {
                row: 1,
                column: covariates[0].clone(),
                message: "covariates require a treatment column".into(),
            });
        }
        names.extend(covariates.iter().cloned());
        columns.extend(covs);
        let design = Matrix::from_fn(n, names.len(), |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] });
        Self::new(y, design, names)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of design columns.
    pub fn p(&self) -> usize {
        self.design.ncols()
    }

    pub fn y(&self) -> &[u64] {
        &self.y
    }

    pub fn design(&self) -> &Matrix {
        &self.design
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.rows[i * p..(i + 1) * p]
    }

    #[inline]
    pub(crate) fn ln_factorial(&self, i: usize) -> f64 {
        self.ln_fact[i]
    }

    pub fn zero_count(&self) -> usize {
        self.y.iter().filter(|&&v| v == 0).count()
    }

    pub fn mean_outcome(&self) -> f64 {
        self.y.iter().map(|&v| v as f64).sum::<f64>() / self.n() as f64
    }

    /// Rows where `keep(y_i)` holds, or `None` if fewer than `p` remain.
    pub(crate) fn filter_rows(&self, keep: impl Fn(u64) -> bool) -> Option<Self> {
        let idx: Vec<usize> = (0..self.n()).filter(|&i| keep(self.y[i])).collect();
        if idx.len() < self.p() {
            return None;
        }
        let design = self.design.select_rows(idx.iter());
        let y = idx.iter().map(|&i| self.y[i]).collect();
        Self::new(y, design, self.column_names.clone()).ok()
    }
}
