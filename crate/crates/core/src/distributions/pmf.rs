use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Outcomes above this use log-gamma differences instead of exact sums.
const EXACT_SUM_LIMIT: u64 = 1000;

pub fn ln_factorial(y: u64) -> f64 {
    match y {
        0 | 1 => 0.0,
        _ => ln_gamma(y as f64 + 1.0),
    }
}

pub fn log_poisson_pmf(y: i64, mean: f64) -> Result<f64> {
    if y < 0 {
        return Err(Error::Domain(format!("count must be nonnegative, got {y}")));
    }
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::Domain(format!("Poisson mean must be positive, got {mean}")));
    }
    let y = y as u64;
    Ok(poisson_kernel(y, mean) - ln_factorial(y))
}

/// `y ln(mean) - mean`, without the factorial.
#[inline]
pub(crate) fn poisson_kernel(y: u64, mean: f64) -> f64 {
    if y == 0 {
        -mean
    } else {
        y as f64 * mean.ln() - mean
    }
}

pub fn log_nb2_pmf(y: i64, mean: f64, k: f64) -> Result<f64> {
    if y < 0 {
        return Err(Error::Domain(format!("count must be nonnegative, got {y}")));
    }
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::Domain(format!("NB mean must be positive, got {mean}")));
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Domain(format!("NB dispersion must be positive, got {k}")));
    }
    let y = y as u64;
    Ok(nb2_kernel(y, mean.ln(), mean, k) - ln_factorial(y))
}

/// NB2 log-pmf without `-ln y!`, stable as `k` grows toward the Poisson limit.
///
/// Takes `ln(mean)` as well to avoid recomputing it in the likelihood loops.
pub(crate) fn nb2_kernel(y: u64, ln_mean: f64, mean: f64, k: f64) -> f64 {
    let tail = -k * (mean / k).ln_1p();
    if y == 0 {
        return tail;
    }
    let yf = y as f64;
    // lnG(y+k) - lnG(k) - y ln(k+mean)
    let ratio = if y <= EXACT_SUM_LIMIT {
        let denom = k + mean;
        (0..y).map(|j| ((j as f64 - mean) / denom).ln_1p()).sum::<f64>()
    } else {
        ln_gamma(yf + k) - ln_gamma(k) - yf * (k + mean).ln()
    };
    ratio + yf * ln_mean + tail
}

/// `d/dk` of [`nb2_kernel`].
pub(crate) fn nb2_kernel_dk(y: u64, mean: f64, k: f64) -> f64 {
    let yf = y as f64;
    let digamma_diff = if y <= EXACT_SUM_LIMIT {
        (0..y).map(|j| 1.0 / (k + j as f64)).sum::<f64>()
    } else {
        statrs::function::gamma::digamma(yf + k) - statrs::function::gamma::digamma(k)
    };
    digamma_diff - (mean / k).ln_1p() + (mean - yf) / (k + mean)
}

/// `2 (1 - Phi(|z|))`.
pub fn normal_two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    match StudentsT::new(0.0, 1.0, df) {
        Ok(dist) => (2.0 * dist.sf(t.abs())).min(1.0),
        Err(_) => f64::NAN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_pmf_values() {
        assert!((log_poisson_pmf(0, 1.0).unwrap() + 1.0).abs() < 1e-15);
        let expected = 3.0 * 2f64.ln() - 2.0 - 6f64.ln();
        assert!((log_poisson_pmf(3, 2.0).unwrap() - expected).abs() < 1e-13);
        assert!((expected - -1.712317).abs() < 1e-6);
        assert!(log_poisson_pmf(0, 2.0).unwrap() < log_poisson_pmf(0, 1.0).unwrap());
    }

    #[test]
    fn poisson_pmf_domain() {
        assert!(matches!(log_poisson_pmf(1, 0.0), Err(Error::Domain(_))));
        assert!(matches!(log_poisson_pmf(1, -1.0), Err(Error::Domain(_))));
        assert!(matches!(log_poisson_pmf(-1, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn poisson_pmf_sums_to_one() {
        for mu in [0.1, 1.0, 5.0, 20.0] {
            let top = (mu + 40.0 * f64::sqrt(mu) + 40.0).ceil() as i64;
            let total: f64 = (0..=top).map(|y| log_poisson_pmf(y, mu).unwrap().exp()).sum();
            assert!((total - 1.0).abs() < 1e-10, "mu={mu}: {total}");
        }
    }

    #[test]
    fn nb2_pmf_values() {
        assert!((log_nb2_pmf(0, 1.0, 1e8).unwrap() + 1.0).abs() < 1e-6);
        let geometric = log_nb2_pmf(0, 2.0, 1.0).unwrap();
        assert!((geometric - (1.0f64 / 3.0).ln()).abs() < 1e-14);
        assert!((geometric - -1.098612).abs() < 1e-6);
    }

    #[test]
    fn nb2_pmf_matches_gamma_form() {
        for &(y, mu, k) in &[(0, 1.5, 0.3), (4, 2.0, 0.5), (17, 6.0, 3.0), (2, 0.2, 40.0)] {
            let yf = y as f64;
            let direct = ln_gamma(yf + k) - ln_gamma(k) - ln_gamma(yf + 1.0)
                + k * (k / (k + mu)).ln()
                + yf * (mu / (k + mu)).ln();
            assert!((log_nb2_pmf(y, mu, k).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn nb2_pmf_domain() {
        assert!(log_nb2_pmf(1, 0.0, 1.0).is_err());
        assert!(log_nb2_pmf(1, 1.0, 0.0).is_err());
        assert!(log_nb2_pmf(1, 1.0, -2.0).is_err());
    }

    #[test]
    fn nb2_pmf_sums_to_one() {
        for mu in [1.0, 5.0] {
            for k in [0.5, 2.0, 10.0] {
                let total: f64 = (0..20_000).map(|y| log_nb2_pmf(y, mu, k).unwrap().exp()).sum();
                assert!((total - 1.0).abs() < 1e-8, "mu={mu} k={k}: {total}");
            }
        }
    }

    #[test]
    fn nb2_dk_matches_finite_difference() {
        for &(y, mu, k) in &[(0u64, 1.5f64, 0.3f64), (4, 2.0, 0.5), (17, 6.0, 3.0), (2, 0.2, 40.0)] {
            let h = 1e-6 * k;
            let fd = (nb2_kernel(y, mu.ln(), mu, k + h) - nb2_kernel(y, mu.ln(), mu, k - h)) / (2.0 * h);
            let an = nb2_kernel_dk(y, mu, k);
            assert!((fd - an).abs() < 1e-7 * an.abs().max(1.0), "{fd} vs {an}");
        }
    }

    #[test]
    fn two_sided_normal_p() {
        assert_eq!(normal_two_sided_p(0.0), 1.0);
        assert!((normal_two_sided_p(1.959964) - 0.05).abs() < 1e-6);
        assert!((normal_two_sided_p(-3.0) - 0.0026998).abs() < 1e-6);
        assert_eq!(normal_two_sided_p(2.5), normal_two_sided_p(-2.5));
    }

    #[test]
    fn two_sided_t_p_approaches_normal() {
        let t = student_t_two_sided_p(1.959964, 1e7);
        assert!((t - 0.05).abs() < 1e-6);
        // t with 1 df is Cauchy: P(|T| > 1) = 1/2.
        assert!((student_t_two_sided_p(1.0, 1.0) - 0.5).abs() < 1e-12);
    }
}
