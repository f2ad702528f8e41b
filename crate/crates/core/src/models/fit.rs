use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::link::{dot, logistic};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, OptimControls, OptimResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    LinearRaw,
    LinearLog,
    Poisson,
    #[serde(rename = "nb")]
    NB,
    #[serde(rename = "zip")]
    ZIP,
    #[serde(rename = "mzip")]
    MZIP,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::LinearRaw,
        ModelKind::LinearLog,
        ModelKind::Poisson,
        ModelKind::NB,
        ModelKind::ZIP,
        ModelKind::MZIP,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::LinearRaw => "linear-raw",
            ModelKind::LinearLog => "linear-log",
            ModelKind::Poisson => "poisson",
            ModelKind::NB => "nb",
            ModelKind::ZIP => "zip",
            ModelKind::MZIP => "mzip",
        }
    }

    pub fn has_zero_part(self) -> bool {
        matches!(self, ModelKind::ZIP | ModelKind::MZIP)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model '{s}'")))
    }
}

/// Diagnostics attached to a fit that hit a parameter-space boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitFlag {
    /// NB2 dispersion reached the `ln k` bound: the data look Poisson.
    DispersionAtBound,
    /// No zeros observed: the zero-part intercept diverges to minus infinity.
    BoundaryZeroPart,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub model_kind: ModelKind,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Row-major, `n_params x n_params`.
    #[serde(serialize_with = "serialize_matrix")]
    pub covariance: Matrix,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub n_params: usize,
    pub n_obs: usize,
    /// Number of design columns.
    pub design_width: usize,
    pub flags: Vec<FitFlag>,
}

fn serialize_matrix<S: serde::Serializer>(m: &Matrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for i in 0..m.nrows() {
        let row: Vec<f64> = m.row(i).iter().copied().collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

/// Means implied by a fit at one covariate row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelPrediction {
    pub overall_mean: f64,
    pub poisson_mean: Option<f64>,
    pub structural_zero_prob: Option<f64>,
}

impl FitResult {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.coefficients[i])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.covariance[(i, i)].sqrt())
    }

    pub fn has_flag(&self, flag: FitFlag) -> bool {
        self.flags.contains(&flag)
    }

    /// Name of the mean-block treatment coefficient, if the design has one.
    pub fn treatment_name(&self) -> Option<&str> {
        (self.design_width > 1).then(|| self.names[1].as_str())
    }

    /// Name of the zero-part treatment coefficient (ZIP/MZIP only).
    pub fn zero_treatment_name(&self) -> Option<&str> {
        (self.model_kind.has_zero_part() && self.design_width > 1)
            .then(|| self.names[self.design_width + 1].as_str())
    }

    pub fn mean_block(&self) -> &[f64] {
        &self.coefficients[..self.design_width]
    }

    pub fn zero_block(&self) -> Option<&[f64]> {
        self.model_kind
            .has_zero_part()
            .then(|| &self.coefficients[self.design_width..2 * self.design_width])
    }

    /// Whether a parameter's estimate can be used for inference.
    ///
    /// A converged fit qualifies entirely. A fit that stopped at the
    /// zero-part boundary still has a usable mean block.
    pub fn is_usable(&self, index: usize) -> bool {
        self.converged
            || (self.has_flag(FitFlag::BoundaryZeroPart)
                && index < self.design_width
                && self.covariance[(index, index)].is_finite())
    }

    pub fn predict(&self, row: &[f64]) -> Result<ModelPrediction> {
        if row.len() != self.design_width {
            return Err(Error::Domain(format!(
                "prediction row has {} entries, design has {}",
                row.len(),
                self.design_width
            )));
        }
        let eta = dot(row, self.mean_block());
        let pred = match self.model_kind {
            ModelKind::LinearRaw => ModelPrediction { overall_mean: eta, poisson_mean: None, structural_zero_prob: None },
            ModelKind::LinearLog => ModelPrediction {
                overall_mean: eta.exp() - 1.0,
                poisson_mean: None,
                structural_zero_prob: None,
            },
            ModelKind::Poisson | ModelKind::NB => {
                ModelPrediction { overall_mean: eta.exp(), poisson_mean: None, structural_zero_prob: None }
            }
            ModelKind::ZIP | ModelKind::MZIP => {
                let zeta = dot(row, self.zero_block().unwrap_or_default());
                let pi = logistic(zeta);
                let (overall, mu) = if self.model_kind == ModelKind::ZIP {
                    let mu = eta.exp();
                    ((1.0 - pi) * mu, mu)
                } else {
                    let v = eta.exp();
                    (v, v * (1.0 + zeta.exp()))
                };
                ModelPrediction { overall_mean: overall, poisson_mean: Some(mu), structural_zero_prob: Some(pi) }
            }
        };
        Ok(pred)
    }
}

pub(crate) fn mean_names(d: &Dataset) -> Vec<String> {
    d.column_names().to_vec()
}

pub(crate) fn zero_names(d: &Dataset) -> Vec<String> {
    d.column_names().iter().map(|c| format!("{}{c}", super::ZERO_PREFIX)).collect()
}

/// Maximizes `objective` from `start`, then attaches the Wald covariance.
pub(crate) fn fit_by_maximization<F>(
    kind: ModelKind,
    d: &Dataset,
    names: Vec<String>,
    mut objective: F,
    start: &[f64],
) -> Result<FitResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let opt = linalg::maximize(&mut objective, start, &OptimControls::default())?;
    finish(kind, d, names, objective, opt, Vec::new())
}

pub(crate) fn finish<F>(
    kind: ModelKind,
    d: &Dataset,
    names: Vec<String>,
    objective: F,
    opt: OptimResult,
    flags: Vec<FitFlag>,
) -> Result<FitResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let (opt, covariance) = polish(objective, opt)?;
    let n_params = opt.argmax.len();
    Ok(FitResult {
        model_kind: kind,
        names,
        coefficients: opt.argmax,
        covariance,
        loglik: opt.max_value,
        converged: opt.converged,
        iterations: opt.iterations,
        gradient_norm: opt.gradient_norm,
        n_params,
        n_obs: d.n(),
        design_width: d.p(),
        flags,
    })
}

/// One Newton step with the observed information, then the covariance.
///
/// The step is kept only if it does not lower the objective or raise the
/// gradient norm. A polished point meeting the gradient tolerance counts as
/// converged.
pub(crate) fn polish<F>(mut objective: F, opt: OptimResult) -> Result<(OptimResult, Matrix)>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let controls = OptimControls::default();
    let info = linalg::observed_information(&mut objective, &opt.argmax, linalg::INFORMATION_STEP)?;
    let covariance = linalg::invert_spd(&info)?;
    let dim = opt.argmax.len();
    let mut grad = vec![0.0; dim];
    objective(&opt.argmax, &mut grad);
    let step = &covariance * nalgebra::DVector::from_column_slice(&grad);
    let trial: Vec<f64> = opt.argmax.iter().zip(step.iter()).map(|(x, s)| x + s).collect();
    let mut trial_grad = vec![0.0; dim];
    let value = objective(&trial, &mut trial_grad);
    let norm = trial_grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
    let improves = value.is_finite()
        && trial_grad.iter().all(|g| g.is_finite())
        && value >= opt.max_value - 1e-12 * opt.max_value.abs().max(1.0)
        && norm <= opt.gradient_norm;
    if !improves {
        return Ok((opt, covariance));
    }
    let info = linalg::observed_information(&mut objective, &trial, linalg::INFORMATION_STEP)?;
    let covariance = linalg::invert_spd(&info)?;
    let polished = OptimResult {
        converged: opt.converged || norm <= controls.gradient_tol,
        argmax: trial,
        max_value: value.max(opt.max_value),
        gradient_norm: norm,
        iterations: opt.iterations,
    };
    Ok((polished, covariance))
}
