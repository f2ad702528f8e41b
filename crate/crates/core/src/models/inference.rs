use serde::Serialize;

use super::fit::{FitResult, ModelKind};
use super::link::dot;
use crate::distributions::{normal_two_sided_p, student_t_two_sided_p};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaldReport {
    pub parameter_name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
    pub reject: bool,
}

/// Single-coefficient Wald test of `H0: parameter = 0`.
///
/// Normal reference for likelihood fits, Student t with `n - p` degrees of
/// freedom for the linear models. Rejection is strict: `p < alpha`.
pub fn wald_test(fit: &FitResult, parameter_name: &str, alpha: f64) -> Result<WaldReport> {
    let idx = fit
        .index_of(parameter_name)
        .ok_or_else(|| Error::Domain(format!("no parameter named '{parameter_name}'")))?;
    if !fit.is_usable(idx) {
        return Err(Error::NonConvergence(format!(
            "{} fit did not converge; '{parameter_name}' cannot be tested",
            fit.model_kind
        )));
    }
    let variance = fit.covariance[(idx, idx)];
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::SingularInformation(format!(
            "variance of '{parameter_name}' is {variance}"
        )));
    }
    let estimate = fit.coefficients[idx];
    let std_error = variance.sqrt();
    let z = estimate / std_error;
    let p_value = match fit.model_kind {
        ModelKind::LinearRaw | ModelKind::LinearLog => {
            student_t_two_sided_p(z, (fit.n_obs - fit.design_width) as f64)
        }
        _ => normal_two_sided_p(z),
    };
    Ok(WaldReport {
        parameter_name: parameter_name.to_string(),
        estimate,
        std_error,
        z,
        p_value,
        reject: p_value < alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EffectKind {
    /// Rate ratio of the count part.
    RR,
    /// Odds ratio of the structural-zero part.
    OR,
    /// Ratio of overall means between arms at fixed covariates (ZIP).
    IRR,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectSummary {
    pub kind: EffectKind,
    pub value: f64,
    pub covariate_profile: Vec<f64>,
}

/// Overall-mean ratio, treated over control, implied by a ZIP fit.
///
/// `exp(b1) (1 + exp(g0 + x'z)) / (1 + exp(g0 + g1 + x'z))`, where `x` is the
/// covariate profile (design columns after the treatment indicator).
pub fn zip_overall_irr(fit: &FitResult, covariate_profile: &[f64]) -> Result<EffectSummary> {
    if fit.model_kind != ModelKind::ZIP {
        return Err(Error::Domain(format!("overall IRR needs a ZIP fit, got {}", fit.model_kind)));
    }
    let p = fit.design_width;
    if p < 2 || covariate_profile.len() != p - 2 {
        return Err(Error::Domain(format!(
            "covariate profile needs {} entries, got {}",
            p.saturating_sub(2),
            covariate_profile.len()
        )));
    }
    let beta = fit.mean_block();
    let gamma = fit.zero_block().unwrap_or_default();
    let shift = gamma[0] + dot(covariate_profile, &gamma[2..]);
    let value = beta[1].exp() * (1.0 + shift.exp()) / (1.0 + (shift + gamma[1]).exp());
    Ok(EffectSummary { kind: EffectKind::IRR, value, covariate_profile: covariate_profile.to_vec() })
}

/// RR for every count model, plus OR for ZIP/MZIP.
pub fn effect_summaries(fit: &FitResult) -> Vec<EffectSummary> {
    let mut out = Vec::new();
    if fit.design_width < 2 {
        return out;
    }
    if matches!(fit.model_kind, ModelKind::Poisson | ModelKind::NB | ModelKind::ZIP | ModelKind::MZIP) {
        out.push(EffectSummary { kind: EffectKind::RR, value: fit.mean_block()[1].exp(), covariate_profile: Vec::new() });
    }
    if let Some(gamma) = fit.zero_block() {
        if gamma[1].is_finite() {
            out.push(EffectSummary { kind: EffectKind::OR, value: gamma[1].exp(), covariate_profile: Vec::new() });
        }
    }
    out
}
