use statrs::function::gamma::ln_gamma;

use super::rng::RngStream;
use crate::error::{Error, Result};

/// Inversion below this mean, transformed rejection at or above it.
const INVERSION_LIMIT: f64 = 10.0;

pub fn sample_poisson(rng: &mut RngStream, mean: f64) -> Result<u64> {
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::Domain(format!("Poisson mean must be positive, got {mean}")));
    }
    if mean < INVERSION_LIMIT {
        Ok(poisson_inversion(rng, mean))
    } else {
        Ok(poisson_ptrs(rng, mean))
    }
}

/// Sequential search from zero.
fn poisson_inversion(rng: &mut RngStream, mean: f64) -> u64 {
    let u = rng.uniform();
    let mut k = 0u64;
    let mut prob = (-mean).exp();
    let mut cdf = prob;
    while u > cdf {
        k += 1;
        prob *= mean / k as f64;
        let next = cdf + prob;
        if next == cdf {
            // Tail mass below f64 resolution.
            break;
        }
        cdf = next;
    }
    k
}

/// Hörmann's transformed rejection with squeeze (PTRS).
fn poisson_ptrs(rng: &mut RngStream, mean: f64) -> u64 {
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.uniform() - 0.5;
        let v = rng.uniform();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln() <= -mean + k * loglam - ln_gamma(k + 1.0) {
            return k as u64;
        }
    }
}

pub fn sample_bernoulli(rng: &mut RngStream, p: f64) -> Result<bool> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("Bernoulli probability must be in [0, 1], got {p}")));
    }
    Ok(rng.uniform() < p)
}

/// Marsaglia polar method; the second variate of each pair is discarded.
pub fn sample_std_normal(rng: &mut RngStream) -> f64 {
    loop {
        let u = 2.0 * rng.uniform() - 1.0;
        let v = 2.0 * rng.uniform() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}
