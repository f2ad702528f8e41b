use super::dataset::Dataset;
use super::fit::{fit_by_maximization, mean_names, FitResult, ModelKind};
use super::link::{dot, MAX_ETA};
use crate::error::{Error, Result};
use crate::linalg::{self, OptimControls, OptimResult};

/// Poisson log-likelihood with log link; writes `X'(y - v)` into `grad`.
///
/// Returns NaN when a linear predictor would overflow.
pub(crate) fn poisson_objective(d: &Dataset, beta: &[f64], grad: &mut [f64]) -> f64 {
    grad.fill(0.0);
    let mut ll = 0.0;
    for i in 0..d.n() {
        let row = d.row(i);
        let eta = dot(row, beta);
        if eta > MAX_ETA {
            return f64::NAN;
        }
        let v = eta.exp();
        let y = d.y()[i] as f64;
        ll += y * eta - v - d.ln_factorial(i);
        let r = y - v;
        for (g, x) in grad.iter_mut().zip(row) {
            *g += r * x;
        }
    }
    ll
}

pub fn loglik_poisson(theta: &[f64], d: &Dataset) -> Result<(f64, Vec<f64>)> {
    if theta.len() != d.p() {
        return Err(Error::Domain(format!("expected {} coefficients, got {}", d.p(), theta.len())));
    }
    let mut grad = vec![0.0; d.p()];
    let ll = poisson_objective(d, theta, &mut grad);
    if !ll.is_finite() {
        return Err(Error::NonFiniteObjective("Poisson mean overflowed".into()));
    }
    Ok((ll, grad))
}

/// `ln(ybar + 0.1)` intercept, zeros elsewhere.
pub(crate) fn default_start(d: &Dataset) -> Vec<f64> {
    let mut start = vec![0.0; d.p()];
    start[0] = (d.mean_outcome() + 0.1).ln();
    start
}

/// MLE only, no covariance; used for starting values.
pub(crate) fn poisson_mle(d: &Dataset) -> Result<OptimResult> {
    linalg::maximize(|b, g| poisson_objective(d, b, g), &default_start(d), &OptimControls::default())
}

pub fn fit_poisson(d: &Dataset) -> Result<FitResult> {
    fit_poisson_from(d, &default_start(d))
}

pub fn fit_poisson_from(d: &Dataset, start: &[f64]) -> Result<FitResult> {
    if start.len() != d.p() {
        return Err(Error::Domain(format!("expected {} start values, got {}", d.p(), start.len())));
    }
    fit_by_maximization(ModelKind::Poisson, d, mean_names(d), |b, g| poisson_objective(d, b, g), start)
}
