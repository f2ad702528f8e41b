use super::dataset::Dataset;
use super::fit::{finish, mean_names, polish, FitFlag, FitResult, ModelKind};
use super::link::{dot, MAX_ETA};
use super::LN_K;
use crate::distributions::{nb2_kernel, nb2_kernel_dk};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, OptimControls};

/// `ln k` is clamped to `[-LN_K_BOUND, LN_K_BOUND]`.
pub const LN_K_BOUND: f64 = 30.0;

/// NB2 log-likelihood over `theta = (beta, ln k)`.
///
/// Outside the clamp the likelihood is flat in `ln k` and its gradient there
/// is zero.
pub(crate) fn nb_objective(d: &Dataset, theta: &[f64], grad: &mut [f64]) -> f64 {
    let p = d.p();
    let ln_k = theta[p];
    let k = ln_k.clamp(-LN_K_BOUND, LN_K_BOUND).exp();
    let (ll, dk) = nb_terms(d, &theta[..p], k, &mut grad[..p], true);
    grad[p] = if ln_k.abs() < LN_K_BOUND { k * dk } else { 0.0 };
    ll
}

/// Log-likelihood and `beta` gradient at dispersion `k`, plus `d ll / d k`
/// when asked for.
fn nb_terms(d: &Dataset, beta: &[f64], k: f64, grad: &mut [f64], with_dk: bool) -> (f64, f64) {
    grad.fill(0.0);
    let mut ll = 0.0;
    let mut dk = 0.0;
    for i in 0..d.n() {
        let row = d.row(i);
        let eta = dot(row, beta);
        if eta > MAX_ETA {
            return (f64::NAN, f64::NAN);
        }
        let v = eta.exp();
        let y = d.y()[i];
        ll += nb2_kernel(y, eta, v, k) - d.ln_factorial(i);
        if with_dk {
            dk += nb2_kernel_dk(y, v, k);
        }
        let r = k * (y as f64 - v) / (k + v);
        for (g, x) in grad.iter_mut().zip(row) {
            *g += r * x;
        }
    }
    (ll, dk)
}

pub fn loglik_nb(theta: &[f64], d: &Dataset) -> Result<(f64, Vec<f64>)> {
    if theta.len() != d.p() + 1 {
        return Err(Error::Domain(format!("expected {} parameters, got {}", d.p() + 1, theta.len())));
    }
    let mut grad = vec![0.0; theta.len()];
    let ll = nb_objective(d, theta, &mut grad);
    if !ll.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteObjective("NB mean overflowed".into()));
    }
    Ok((ll, grad))
}

pub(crate) fn default_start(d: &Dataset) -> Vec<f64> {
    let mut start = super::poisson::default_start(d);
    start.push(0.0);
    start
}

pub fn fit_nb(d: &Dataset) -> Result<FitResult> {
    fit_nb_from(d, &default_start(d))
}

/// Joint MLE over `(beta, ln k)`.
///
/// Underdispersed data push `k` to infinity. When the large-`k` score
/// `sum((y - v)^2 - y)` is negative, or the search already reached the clamp,
/// the fit is repeated with `ln k` pinned at the bound and the better of the two
/// is kept; a pinned result carries [`FitFlag::DispersionAtBound`] and a zero
/// variance for `ln k`.
pub fn fit_nb_from(d: &Dataset, start: &[f64]) -> Result<FitResult> {
    let p = d.p();
    if start.len() != p + 1 {
        return Err(Error::Domain(format!("expected {} start values, got {}", p + 1, start.len())));
    }
    let mut names = mean_names(d);
    names.push(LN_K.to_string());
    let controls = OptimControls::default();
    let objective = |t: &[f64], g: &mut [f64]| nb_objective(d, t, g);
    let opt = linalg::maximize(objective, start, &controls)?;

    let beta = &opt.argmax[..p];
    let score: f64 = (0..d.n())
        .map(|i| {
            let v = dot(d.row(i), beta).exp();
            let y = d.y()[i] as f64;
            (y - v).powi(2) - y
        })
        .sum();
    if opt.argmax[p] < LN_K_BOUND && score >= 0.0 {
        return finish(ModelKind::NB, d, names, objective, opt, Vec::new());
    }

    let k = LN_K_BOUND.exp();
    let pinned = |b: &[f64], g: &mut [f64]| nb_terms(d, b, k, g, false).0;
    let bound = linalg::maximize(pinned, beta, &controls)?;
    if opt.argmax[p] < LN_K_BOUND && bound.max_value < opt.max_value {
        return finish(ModelKind::NB, d, names, objective, opt, Vec::new());
    }

    let (bound, beta_cov) = polish(pinned, bound)?;
    let mut covariance = Matrix::zeros(p + 1, p + 1);
    covariance.view_mut((0, 0), (p, p)).copy_from(&beta_cov);
    let mut coefficients = bound.argmax;
    coefficients.push(LN_K_BOUND);
    Ok(FitResult {
        model_kind: ModelKind::NB,
        names,
        coefficients,
        covariance,
        loglik: bound.max_value,
        converged: bound.converged,
        iterations: opt.iterations + bound.iterations,
        gradient_norm: bound.gradient_norm,
        n_params: p + 1,
        n_obs: d.n(),
        design_width: p,
        flags: vec![FitFlag::DispersionAtBound],
    })
}
