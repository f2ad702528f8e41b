use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::fit::{mean_names, FitResult, ModelKind};
use super::SIGMA2;
use crate::error::{Error, Result};
use crate::linalg::{invert_spd, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearTransform {
    Raw,
    /// `ln(y + 1)`.
    Log1p,
}

/// Ordinary least squares on `y` or `ln(y + 1)`.
///
/// The parameter vector is the coefficients followed by the unbiased residual
/// variance `RSS / (n - p)`. Its variance entry is `2 sigma^4 / (n - p)`; the
/// cross-covariances with the coefficients are zero.
pub fn fit_linear(d: &Dataset, transform: LinearTransform) -> Result<FitResult> {
    let x = d.design();
    let (n, p) = (d.n(), d.p());
    let response = DVector::from_iterator(
        n,
        d.y().iter().map(|&v| match transform {
            LinearTransform::Raw => v as f64,
            LinearTransform::Log1p => (v as f64).ln_1p(),
        }),
    );
    let xtx = x.tr_mul(x);
    let xtx_inv = invert_spd(&xtx)
        .map_err(|_| Error::SingularInformation("X'X is singular; the design is rank deficient".into()))?;
    let beta = &xtx_inv * x.tr_mul(&response);
    let residuals = &response - x * &beta;
    let rss = residuals.norm_squared();
    let df = (n - p) as f64;
    let sigma2 = if n > p { rss / df } else { 0.0 };

    let mut covariance = Matrix::zeros(p + 1, p + 1);
    covariance.view_mut((0, 0), (p, p)).copy_from(&(&xtx_inv * sigma2));
    covariance[(p, p)] = if n > p { 2.0 * sigma2 * sigma2 / df } else { 0.0 };

    let nf = n as f64;
    let sigma2_ml = rss / nf;
    let loglik = -0.5 * nf * ((2.0 * std::f64::consts::PI * sigma2_ml).ln() + 1.0);

    let mut names = mean_names(d);
    names.push(SIGMA2.to_string());
    let mut coefficients: Vec<f64> = beta.iter().copied().collect();
    coefficients.push(sigma2);
    Ok(FitResult {
        model_kind: match transform {
            LinearTransform::Raw => ModelKind::LinearRaw,
            LinearTransform::Log1p => ModelKind::LinearLog,
        },
        names,
        coefficients,
        covariance,
        loglik,
        converged: true,
        iterations: 0,
        gradient_norm: 0.0,
        n_params: p + 1,
        n_obs: n,
        design_width: p,
        flags: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_only_raw() {
        let d = Dataset::intercept_only(vec![1, 2, 3]).unwrap();
        let fit = fit_linear(&d, LinearTransform::Raw).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-14);
        assert!((fit.estimate(SIGMA2).unwrap() - 1.0).abs() < 1e-14);
        // Var(mean) = sigma^2 / n.
        assert!((fit.covariance[(0, 0)] - 1.0 / 3.0).abs() < 1e-14);
        assert!(fit.converged);
    }

    #[test]
    fn intercept_only_log() {
        let d = Dataset::intercept_only(vec![0, 0]).unwrap();
        let fit = fit_linear(&d, LinearTransform::Log1p).unwrap();
        assert_eq!(fit.coefficients[0], 0.0);
        assert_eq!(fit.model_kind, ModelKind::LinearLog);
    }

    #[test]
    fn interpolates_when_saturated() {
        let d = Dataset::with_treatment(vec![0, 3], &[0, 1]).unwrap();
        let fit = fit_linear(&d, LinearTransform::Raw).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-12);
        assert!((fit.coefficients[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_loglik_at_the_solution() {
        let d = Dataset::with_treatment(vec![1, 2, 4, 7], &[0, 0, 1, 1]).unwrap();
        let fit = fit_linear(&d, LinearTransform::Raw).unwrap();
        // Group means 1.5 and 5.5; RSS = 0.25*2 + 2.25*2 = 5.
        let s2 = 5.0 / 4.0;
        let expected = -2.0 * ((2.0 * std::f64::consts::PI * s2).ln() + 1.0);
        assert!((fit.loglik - expected).abs() < 1e-12);
        assert!((fit.coefficients[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn singular_design() {
        let x = Matrix::from_row_slice(3, 3, &[1.0, 0.0, 2.0, 1.0, 1.0, 2.0, 1.0, 0.0, 2.0]);
        let d = Dataset::new(vec![1, 2, 3], x, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        assert!(matches!(fit_linear(&d, LinearTransform::Raw), Err(Error::SingularInformation(_))));
    }
}
