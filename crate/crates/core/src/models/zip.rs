//! Zero-inflated Poisson in its standard and marginalized parameterizations.
//!
//! Both share `logit(pi_i) = x_i' gamma` for the structural-zero probability.
//! ZIP puts `x_i' beta` on the Poisson-part mean `mu_i`; MZIP puts it on the
//! overall mean `v_i = (1 - pi_i) mu_i`, so `mu_i = v_i (1 + exp(x_i' gamma))`.
//! Parameters are `theta = (beta, gamma)`.

use super::dataset::Dataset;
use super::fit::{fit_by_maximization, mean_names, zero_names, FitFlag, FitResult, ModelKind};
use super::link::{dot, log_add_exp, logistic, softplus, MAX_ETA};
use super::poisson::{self, poisson_mle};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, OptimControls};

#[derive(Clone, Copy, PartialEq, Eq)]
enum MeanMap {
    /// `ln mu = x' beta`.
    Poisson,
    /// `ln v = x' beta`.
    Overall,
}

fn mixture_objective(d: &Dataset, theta: &[f64], grad: &mut [f64], map: MeanMap) -> f64 {
    let p = d.p();
    let (beta, gamma) = theta.split_at(p);
    grad.fill(0.0);
    let mut ll = 0.0;
    for i in 0..d.n() {
        let row = d.row(i);
        let eta_b = dot(row, beta);
        let eta_g = dot(row, gamma);
        let a = softplus(eta_g);
        let pi = logistic(eta_g);
        let ln_mu = match map {
            MeanMap::Poisson => eta_b,
            MeanMap::Overall => eta_b + a,
        };
        if ln_mu > MAX_ETA {
            return f64::NAN;
        }
        let mu = ln_mu.exp();
        // d mu / d eta_g = mu * pi under the overall-mean map, 0 otherwise.
        let dmu_dg = if map == MeanMap::Overall { mu * pi } else { 0.0 };
        let y = d.y()[i];
        let (gb, gg) = if y == 0 {
            let log_zero = log_add_exp(eta_g, -mu);
            ll += log_zero - a;
            // Posterior probability that this zero came from the Poisson part.
            let w = (-mu - log_zero).exp();
            (-mu * w, (1.0 - w) - dmu_dg * w - pi)
        } else {
            let yf = y as f64;
            ll += -a + yf * ln_mu - mu - d.ln_factorial(i);
            let gg = match map {
                MeanMap::Poisson => -pi,
                MeanMap::Overall => pi * (yf - 1.0 - mu),
            };
            (yf - mu, gg)
        };
        for (j, x) in row.iter().enumerate() {
            grad[j] += gb * x;
            grad[p + j] += gg * x;
        }
    }
    ll
}

fn checked(d: &Dataset, theta: &[f64], map: MeanMap) -> Result<(f64, Vec<f64>)> {
    if theta.len() != 2 * d.p() {
        return Err(Error::Domain(format!("expected {} parameters, got {}", 2 * d.p(), theta.len())));
    }
    let mut grad = vec![0.0; theta.len()];
    let ll = mixture_objective(d, theta, &mut grad, map);
    if !ll.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteObjective("Poisson-part mean overflowed".into()));
    }
    Ok((ll, grad))
}

pub fn loglik_zip(theta: &[f64], d: &Dataset) -> Result<(f64, Vec<f64>)> {
    checked(d, theta, MeanMap::Poisson)
}

pub fn loglik_mzip(theta: &[f64], d: &Dataset) -> Result<(f64, Vec<f64>)> {
    checked(d, theta, MeanMap::Overall)
}

fn logistic_objective(d: &Dataset, gamma: &[f64], grad: &mut [f64]) -> f64 {
    grad.fill(0.0);
    let mut ll = 0.0;
    for i in 0..d.n() {
        let row = d.row(i);
        let eta = dot(row, gamma);
        let z = if d.y()[i] == 0 { 1.0 } else { 0.0 };
        ll += z * eta - softplus(eta);
        let r = z - logistic(eta);
        for (g, x) in grad.iter_mut().zip(row) {
            *g += r * x;
        }
    }
    ll
}

/// Logistic regression of `1{y = 0}` on the design, started at zero.
///
/// Falls back to zeros if the regression fails outright.
pub fn zero_block_start(d: &Dataset) -> Vec<f64> {
    let zeros = vec![0.0; d.p()];
    linalg::maximize(|g, gr| logistic_objective(d, g, gr), &zeros, &OptimControls::default())
        .map(|r| r.argmax)
        .unwrap_or(zeros)
}

fn count_block_start(d: &Dataset) -> Vec<f64> {
    poisson_mle(d).map(|r| r.argmax).unwrap_or_else(|_| poisson::default_start(d))
}

/// Poisson fit on the positive rows for `beta`, logistic start for `gamma`.
pub(crate) fn zip_default_start(d: &Dataset) -> Vec<f64> {
    let mut start = d
        .filter_rows(|y| y > 0)
        .map(|pos| count_block_start(&pos))
        .unwrap_or_else(|| poisson::default_start(d));
    start.extend(zero_block_start(d));
    start
}

/// Poisson fit on all rows for `beta`, logistic start for `gamma`.
pub(crate) fn mzip_default_start(d: &Dataset) -> Vec<f64> {
    let mut start = count_block_start(d);
    start.extend(zero_block_start(d));
    start
}

fn names(d: &Dataset) -> Vec<String> {
    let mut names = mean_names(d);
    names.extend(zero_names(d));
    names
}

/// No zeros: the zero-part intercept runs off to minus infinity and the count
/// block reduces to a Poisson fit under either mean map.
fn boundary_fit(kind: ModelKind, d: &Dataset) -> Result<FitResult> {
    let p = d.p();
    let pois = poisson::fit_poisson(d)?;
    let mut coefficients = pois.coefficients.clone();
    coefficients.extend(std::iter::repeat_n(f64::NAN, p));
    let mut covariance = Matrix::from_element(2 * p, 2 * p, f64::NAN);
    covariance.view_mut((0, 0), (p, p)).copy_from(&pois.covariance);
    Ok(FitResult {
        model_kind: kind,
        names: names(d),
        coefficients,
        covariance,
        loglik: pois.loglik,
        converged: false,
        iterations: pois.iterations,
        gradient_norm: pois.gradient_norm,
        n_params: 2 * p,
        n_obs: d.n(),
        design_width: p,
        flags: vec![FitFlag::BoundaryZeroPart],
    })
}

fn fit_mixture(kind: ModelKind, d: &Dataset, start: &[f64]) -> Result<FitResult> {
    if start.len() != 2 * d.p() {
        return Err(Error::Domain(format!("expected {} start values, got {}", 2 * d.p(), start.len())));
    }
    if d.zero_count() == 0 {
        return boundary_fit(kind, d);
    }
    let map = if kind == ModelKind::ZIP { MeanMap::Poisson } else { MeanMap::Overall };
    fit_by_maximization(kind, d, names(d), |t, g| mixture_objective(d, t, g, map), start)
}

pub fn fit_zip(d: &Dataset) -> Result<FitResult> {
    fit_mixture(ModelKind::ZIP, d, &zip_default_start(d))
}

pub fn fit_zip_from(d: &Dataset, start: &[f64]) -> Result<FitResult> {
    fit_mixture(ModelKind::ZIP, d, start)
}

pub fn fit_mzip(d: &Dataset) -> Result<FitResult> {
    fit_mixture(ModelKind::MZIP, d, &mzip_default_start(d))
}

pub fn fit_mzip_from(d: &Dataset, start: &[f64]) -> Result<FitResult> {
    fit_mixture(ModelKind::MZIP, d, start)
}
