//! Dense linear algebra and an unconstrained quasi-Newton maximizer.
//!
//! Every model fit goes through [`maximize`] and then [`observed_information`]
//! plus [`invert_spd`] for its Wald covariance. Dimensions in this crate stay
//! below ten, so everything is dense.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Default base step for the finite-difference information matrix.
pub const INFORMATION_STEP: f64 = 1e-5;

/// Stopping rules for [`maximize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimControls {
    /// Convergence requires the gradient infinity-norm at or below this.
    pub gradient_tol: f64,
    /// ... and a relative objective change at or below this.
    pub relative_tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Armijo sufficient-increase constant.
    pub armijo: f64,
}

impl Default for OptimControls {
    fn default() -> Self {
        Self {
            gradient_tol: 1e-7,
            relative_tol: 1e-10,
            max_iterations: 500,
            max_halvings: 40,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub argmax: Vec<f64>,
    pub max_value: f64,
    /// Infinity-norm of the gradient at `argmax`.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Relative value change treated as rounding noise by the line search.
const FLAT_VALUE: f64 = 1e-12;

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

fn all_finite(value: f64, grad: &[f64]) -> bool {
    value.is_finite() && grad.iter().all(|g| g.is_finite())
}

/// Maximizes `objective` from `start` with BFGS and Armijo backtracking.
///
/// The objective writes its gradient into the second argument and returns the
/// value. A non-finite value or gradient makes the line search halve the step;
/// running out of halvings without a single finite probe is an error. Hitting
/// the iteration cap is not an error and comes back with `converged == false`.
pub fn maximize<F>(mut objective: F, start: &[f64], controls: &OptimControls) -> Result<OptimResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let dim = start.len();
    let mut x = start.to_vec();
    let mut grad = vec![0.0; dim];
    let mut value = objective(&x, &mut grad);
    if !all_finite(value, &grad) {
        return Err(Error::NonFiniteObjective(
            "objective is not finite at the starting point".into(),
        ));
    }

    // Approximates the inverse of the negative Hessian.
    let mut inv_hess = DMatrix::<f64>::identity(dim, dim);
    let mut fresh_metric = true;
    let mut trial = vec![0.0; dim];
    let mut trial_grad = vec![0.0; dim];
    let mut iterations = 0;
    let mut converged = inf_norm(&grad) <= controls.gradient_tol;

    while !converged && iterations < controls.max_iterations {
        iterations += 1;
        let g = DVector::from_column_slice(&grad);
        let mut dir = &inv_hess * &g;
        if !(g.dot(&dir) > 0.0) {
            inv_hess.fill_with_identity();
            fresh_metric = true;
            dir = g.clone();
        }
        if fresh_metric {
            // Unscaled steepest ascent: keep the first probe within unit distance.
            dir /= inf_norm(dir.as_slice()).max(1.0);
        }
        let slope = g.dot(&dir);

        let mut step = 1.0;
        let mut trial_value = f64::NAN;
        let mut accepted = false;
        let mut saw_finite = false;
        for _ in 0..=controls.max_halvings {
            for j in 0..dim {
                trial[j] = x[j] + step * dir[j];
            }
            trial_value = objective(&trial, &mut trial_grad);
            if all_finite(trial_value, &trial_grad) {
                saw_finite = true;
                // Close to the optimum the value change drowns in rounding;
                // there a falling gradient is the only usable signal.
                let flat = (trial_value - value).abs() <= FLAT_VALUE * value.abs().max(1.0)
                    && inf_norm(&trial_grad) < inf_norm(&grad);
                if trial_value >= value + controls.armijo * step * slope || flat {
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }

        if !accepted {
            if !saw_finite {
                return Err(Error::NonFiniteObjective(format!(
                    "no finite objective along the search direction after {} halvings",
                    controls.max_halvings
                )));
            }
            if fresh_metric {
                // Steepest ascent failed too: numerically flat at this point.
                converged = inf_norm(&grad) <= controls.gradient_tol;
                break;
            }
            inv_hess.fill_with_identity();
            fresh_metric = true;
            continue;
        }

        let s = DVector::from_iterator(dim, trial.iter().zip(&x).map(|(a, b)| a - b));
        // Curvature pair for the minimization of -objective.
        let y = DVector::from_iterator(dim, grad.iter().zip(&trial_grad).map(|(a, b)| a - b));
        let change = (trial_value - value).abs();
        let scale = value.abs().max(1.0);

        if s.iter().zip(&x).all(|(d, b)| d.abs() <= f64::EPSILON * b.abs()) {
            // The step no longer moves the iterate, so the value is settled.
            converged = inf_norm(&grad) <= controls.gradient_tol;
            break;
        }
        x.copy_from_slice(&trial);
        grad.copy_from_slice(&trial_grad);
        value = trial_value;

        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh_metric {
                let yy = y.dot(&y);
                inv_hess.fill_with_identity();
                inv_hess *= sy / yy;
                fresh_metric = false;
            }
            let rho = 1.0 / sy;
            let hy = &inv_hess * &y;
            let yhy = y.dot(&hy);
            // H <- (I - rho s y')H(I - rho y s') + rho s s'
            inv_hess -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            inv_hess += (&s * s.transpose()) * (rho * rho * yhy + rho);
        }

        converged =
            inf_norm(&grad) <= controls.gradient_tol && change <= controls.relative_tol * scale;
    }

    let gradient_norm = inf_norm(&grad);
    Ok(OptimResult {
        converged,
        argmax: x,
        max_value: value,
        gradient_norm,
        iterations,
    })
}

/// Negative numerical Jacobian of `gradient` at `theta`, symmetrized.
///
/// Central differences with per-coordinate step `step * max(1, |theta_j|)`.
pub fn observed_information<F>(mut gradient: F, theta: &[f64], step: f64) -> Result<Matrix>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    if !(step > 0.0) {
        return Err(Error::Domain(format!("finite-difference step must be positive, got {step}")));
    }
    let dim = theta.len();
    let mut jac = DMatrix::<f64>::zeros(dim, dim);
    let mut probe = theta.to_vec();
    let mut up = vec![0.0; dim];
    let mut down = vec![0.0; dim];
    for j in 0..dim {
        let h = step * theta[j].abs().max(1.0);
        probe[j] = theta[j] + h;
        let v_up = gradient(&probe, &mut up);
        probe[j] = theta[j] - h;
        let v_down = gradient(&probe, &mut down);
        probe[j] = theta[j];
        if !all_finite(v_up, &up) || !all_finite(v_down, &down) {
            return Err(Error::NonFiniteObjective(format!(
                "gradient not finite while probing coordinate {j}"
            )));
        }
        for i in 0..dim {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    Ok(-(&jac + jac.transpose()) * 0.5)
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn invert_spd(m: &Matrix) -> Result<Matrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::Domain(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularInformation("matrix has non-finite entries".into()));
    }
    let chol = Cholesky::new(m.clone()).ok_or_else(|| {
        Error::SingularInformation("Cholesky factorization hit a non-positive pivot".into())
    })?;
    let inv = chol.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}
