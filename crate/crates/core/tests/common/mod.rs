//! Checks shared by the integration tests and the acceptance report.
#![allow(dead_code)]

use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use zicount::calibration::{marginal_zero_rate, solve_gamma2, GeneratorParams};
use zicount::distributions::{sample_bernoulli, sample_poisson, sample_std_normal, QuadratureRule, RngStream};
use zicount::harness::{generate_dataset, Condition, TABLE_ZERO_RATES};
use zicount::models::{
    fit_linear, fit_model, fit_nb, fit_poisson, loglik_mzip, loglik_nb, loglik_poisson, loglik_zip, Dataset,
    FitResult, LinearTransform, ModelKind,
};

pub const TEST_KEY: u64 = 0x5eed_cafe;

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn poisson_pmf(y: u64, mu: f64) -> f64 {
    (y as f64 * mu.ln() - mu - ln_gamma(y as f64 + 1.0)).exp()
}

/// Random covariates for `n` rows: arm, covariate.
fn draw_design(n: usize, s: &mut RngStream) -> (Vec<u8>, Vec<f64>) {
    let mut arm = Vec::with_capacity(n);
    let mut cov = Vec::with_capacity(n);
    for _ in 0..n {
        arm.push(u8::from(sample_bernoulli(s, 0.5).unwrap()));
        cov.push(sample_std_normal(s));
    }
    (arm, cov)
}

fn build(y: Vec<u64>, arm: &[u8], cov: Vec<f64>) -> Dataset {
    Dataset::with_covariates(y, arm, &[cov], &["cov"]).unwrap()
}

/// ZIP outcomes with `ln mu = x'beta`, `logit pi = x'gamma`, design `[1, A, C]`.
pub fn zip_data(n: usize, beta: &[f64; 3], gamma: &[f64; 3], s: &mut RngStream) -> Dataset {
    let (arm, cov) = draw_design(n, s);
    let y = (0..n)
        .map(|i| {
            let x = [1.0, f64::from(arm[i]), cov[i]];
            let mu = (beta[0] + beta[1] * x[1] + beta[2] * x[2]).exp();
            let pi = logistic(gamma[0] + gamma[1] * x[1] + gamma[2] * x[2]);
            if sample_bernoulli(s, pi).unwrap() { 0 } else { sample_poisson(s, mu).unwrap() }
        })
        .collect();
    build(y, &arm, cov)
}

/// MZIP outcomes: `ln v = x'beta` is the overall mean, `mu = v / (1 - pi)`.
pub fn mzip_data(n: usize, beta: &[f64; 3], gamma: &[f64; 3], s: &mut RngStream) -> Dataset {
    let (arm, cov) = draw_design(n, s);
    let y = (0..n)
        .map(|i| {
            let x = [1.0, f64::from(arm[i]), cov[i]];
            let v = (beta[0] + beta[1] * x[1] + beta[2] * x[2]).exp();
            let pi = logistic(gamma[0] + gamma[1] * x[1] + gamma[2] * x[2]);
            if sample_bernoulli(s, pi).unwrap() { 0 } else { sample_poisson(s, v / (1.0 - pi)).unwrap() }
        })
        .collect();
    build(y, &arm, cov)
}

pub fn poisson_data(n: usize, beta: &[f64; 3], s: &mut RngStream) -> Dataset {
    let (arm, cov) = draw_design(n, s);
    let y = (0..n)
        .map(|i| sample_poisson(s, (beta[0] + beta[1] * f64::from(arm[i]) + beta[2] * cov[i]).exp()).unwrap())
        .collect();
    build(y, &arm, cov)
}

/// NB2 outcomes as a gamma mixture of Poissons with shape `k`.
pub fn nb_data(n: usize, beta: &[f64; 3], k: f64, s: &mut RngStream) -> Dataset {
    let (arm, cov) = draw_design(n, s);
    let y = (0..n)
        .map(|i| {
            let mean = (beta[0] + beta[1] * f64::from(arm[i]) + beta[2] * cov[i]).exp();
            let rate = Gamma::new(k, mean / k).unwrap().sample(s);
            sample_poisson(s, rate).unwrap()
        })
        .collect();
    build(y, &arm, cov)
}

fn uniform(s: &mut RngStream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * s.uniform()
}

/// Largest `|analytic - numeric| / max(1, |analytic|)` over 20 random
/// datasets and parameter points for `kind`.
pub fn gradient_check(kind: ModelKind) -> f64 {
    let mut worst = 0.0_f64;
    for inst in 0..20 {
        let mut s = RngStream::new(TEST_KEY, 1, inst);
        let d = zip_data(40, &[0.6, -0.3, 0.2], &[-0.4, 0.5, -0.3], &mut s);
        let dim = match kind {
            ModelKind::Poisson => 3,
            ModelKind::NB => 4,
            _ => 6,
        };
        let mut theta: Vec<f64> = (0..dim).map(|_| uniform(&mut s, -1.0, 1.0)).collect();
        if kind == ModelKind::NB {
            theta[3] = uniform(&mut s, -1.0, 3.0);
        }
        let f = |t: &[f64]| -> (f64, Vec<f64>) {
            match kind {
                ModelKind::Poisson => loglik_poisson(t, &d),
                ModelKind::NB => loglik_nb(t, &d),
                ModelKind::ZIP => loglik_zip(t, &d),
                ModelKind::MZIP => loglik_mzip(t, &d),
                _ => unreachable!(),
            }
            .unwrap()
        };
        let (_, analytic) = f(&theta);
        for j in 0..dim {
            let h = 1e-6 * theta[j].abs().max(1.0);
            let mut up = theta.clone();
            up[j] += h;
            let mut down = theta.clone();
            down[j] -= h;
            let numeric = (f(&up).0 - f(&down).0) / (2.0 * h);
            worst = worst.max((analytic[j] - numeric).abs() / analytic[j].abs().max(1.0));
        }
    }
    worst
}

/// Largest gap between the library likelihoods and the mixture written out
/// term by term, over 20 random instances per parameterization.
pub fn naive_mixture_gap() -> f64 {
    let mut worst = 0.0_f64;
    for inst in 0..20 {
        let mut s = RngStream::new(TEST_KEY, 2, inst);
        let d = zip_data(60, &[0.6, -0.3, 0.2], &[-0.4, 0.5, -0.3], &mut s);
        let theta: Vec<f64> = (0..6).map(|_| uniform(&mut s, -1.0, 1.0)).collect();
        for overall in [false, true] {
            let mut naive = 0.0;
            for i in 0..d.n() {
                let x = d.row(i);
                let eb: f64 = (0..3).map(|j| x[j] * theta[j]).sum();
                let eg: f64 = (0..3).map(|j| x[j] * theta[3 + j]).sum();
                let pi = logistic(eg);
                let mu = if overall { eb.exp() / (1.0 - pi) } else { eb.exp() };
                let y = d.y()[i];
                let zero = if y == 0 { pi } else { 0.0 };
                naive += (zero + (1.0 - pi) * poisson_pmf(y, mu)).ln();
            }
            let lib = if overall { loglik_mzip(&theta, &d) } else { loglik_zip(&theta, &d) }.unwrap().0;
            worst = worst.max((lib - naive).abs());
        }
    }
    worst
}

/// `|max loglik ZIP - max loglik MZIP|` for intercept-only data.
pub fn intercept_only_zip_mzip_gap() -> f64 {
    let d = Dataset::intercept_only(vec![0, 0, 0, 0, 1, 2, 3, 0, 5, 1, 0, 2]).unwrap();
    let z = fit_model(ModelKind::ZIP, &d).unwrap();
    let m = fit_model(ModelKind::MZIP, &d).unwrap();
    (z.loglik - m.loglik).abs()
}

/// `|intercept - ln(ybar)|` for an intercept-only Poisson fit.
pub fn poisson_intercept_gap() -> f64 {
    let y = vec![0, 3, 1, 4, 2, 2, 7, 0, 1, 5];
    let mean = y.iter().sum::<u64>() as f64 / y.len() as f64;
    let fit = fit_poisson(&Dataset::intercept_only(y).unwrap()).unwrap();
    (fit.coefficients[0] - mean.ln()).abs()
}

/// Dense grid maximizer with step `1e-3` over a box.
fn dense_argmax(f: impl Fn(f64, f64) -> f64, lo: [f64; 2], hi: [f64; 2]) -> [f64; 2] {
    const STEP: f64 = 1e-3;
    let na = ((hi[0] - lo[0]) / STEP).round() as usize;
    let nb = ((hi[1] - lo[1]) / STEP).round() as usize;
    let (mut best, mut best_val) = ([lo[0], lo[1]], f64::NEG_INFINITY);
    for i in 0..=na {
        let a = lo[0] + i as f64 * STEP;
        for j in 0..=nb {
            let b = lo[1] + j as f64 * STEP;
            let v = f(a, b);
            if v > best_val {
                best_val = v;
                best = [a, b];
            }
        }
    }
    best
}

/// Largest coordinate gap between the NB fit of `y = [0, 0, 5, 5]` and a
/// dense grid over `b0 in [0, 2]`, `ln k in [-4, 4]` on the lgamma form of
/// the likelihood.
pub fn nb_grid_oracle_gap() -> f64 {
    let y = [0u64, 0, 5, 5];
    let fit = fit_nb(&Dataset::intercept_only(y.to_vec()).unwrap()).unwrap();
    // Parts depending on k only, indexed like the ln k grid.
    let ks: Vec<(f64, f64)> = (0..=8000)
        .map(|j| {
            let k = (-4.0 + j as f64 * 1e-3).exp();
            let lg: f64 = y.iter().map(|&v| ln_gamma(v as f64 + k) - ln_gamma(k) - ln_gamma(v as f64 + 1.0)).sum();
            (k, lg)
        })
        .collect();
    let total: f64 = y.iter().map(|&v| v as f64).sum();
    let ll = |b0: f64, ln_k: f64| {
        let (k, lg) = ks[((ln_k + 4.0) / 1e-3).round() as usize];
        let m = b0.exp();
        lg + y.len() as f64 * k * (k / (k + m)).ln() + total * (m / (k + m)).ln()
    };
    let best = dense_argmax(ll, [0.0, -4.0], [2.0, 4.0]);
    (fit.coefficients[0] - best[0]).abs().max((fit.coefficients[1] - best[1]).abs())
}

/// Same for a two-group Poisson fit on a fixed 20-row dataset against a
/// dense grid on `[-3, 3]^2`.
pub fn poisson_grid_oracle_gap() -> f64 {
    let y = vec![0, 1, 3, 2, 4, 1, 0, 2, 1, 1, 5, 2, 3, 4, 1, 6, 2, 3, 0, 4];
    let arm: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
    let fit = fit_poisson(&Dataset::with_treatment(y.clone(), &arm).unwrap()).unwrap();
    let s0: f64 = y[..10].iter().sum::<u64>() as f64;
    let s1: f64 = y[10..].iter().sum::<u64>() as f64;
    let ll = |a: f64, b: f64| s0 * a - 10.0 * a.exp() + s1 * (a + b) - 10.0 * (a + b).exp();
    let best = dense_argmax(ll, [-3.0, -3.0], [3.0, 3.0]);
    (fit.coefficients[0] - best[0]).abs().max((fit.coefficients[1] - best[1]).abs())
}

/// The eight `(b1, g1)` pairs of the simulation grid.
pub fn condition_pairs() -> Vec<(f64, f64)> {
    Condition::ALL
        .iter()
        .flat_map(|c| c.beta1_values().iter().map(move |&b| (b, c.gamma1())))
        .collect()
}

/// Worst calibration round-trip error over the full grid.
pub fn calibration_round_trip_error() -> f64 {
    let rule = QuadratureRule::default();
    let mut worst = 0.0_f64;
    for (b1, g1) in condition_pairs() {
        for r in TABLE_ZERO_RATES {
            let g = solve_gamma2(r, b1, g1, &rule).unwrap();
            worst = worst.max((marginal_zero_rate(&g, &rule) - r).abs());
        }
    }
    worst
}

/// Empirical zero fraction over `rows` generated rows.
pub fn empirical_zero_fraction(g: &GeneratorParams, rows: usize, stream_id: u64) -> f64 {
    let d = generate_dataset(g, rows, &mut RngStream::new(TEST_KEY, stream_id, 0));
    d.zero_count() as f64 / rows as f64
}

/// Whether every coefficient in `which` is within `3 SE` of `truth`.
pub fn within_three_se(fit: &FitResult, truth: &[f64], which: usize) -> bool {
    (0..which).all(|j| {
        let se = fit.covariance[(j, j)].sqrt();
        fit.converged && se.is_finite() && (fit.coefficients[j] - truth[j]).abs() <= 3.0 * se
    })
}

pub const RECOVERY_N: usize = 100_000;
pub const RECOVERY_SEEDS: u64 = 20;

const ZIP_BETA: [f64; 3] = [0.8, -0.3, 0.2];
const ZIP_GAMMA: [f64; 3] = [-0.5, 0.5, -0.3];

/// `E[h(y) | A = a]` under the ZIP generator with `(ZIP_BETA, ZIP_GAMMA)`.
fn zip_arm_expectation(a: f64, h: impl Fn(u64) -> f64) -> f64 {
    let rule = QuadratureRule::default();
    rule.expect_std_normal(|c| {
        let mu = (ZIP_BETA[0] + ZIP_BETA[1] * a + ZIP_BETA[2] * c).exp();
        let pi = logistic(ZIP_GAMMA[0] + ZIP_GAMMA[1] * a + ZIP_GAMMA[2] * c);
        let mut total = pi * h(0);
        for y in 0..200 {
            total += (1.0 - pi) * poisson_pmf(y, mu) * h(y);
        }
        total
    })
}

/// Seeds (out of 20) whose fit at `n = 100,000` puts every checked
/// coefficient within 3 SE of the truth.
///
/// The linear models are checked on treatment-only designs fitted to ZIP
/// data, where the true intercept and arm contrast are the arm means of
/// `y` (raw) or `ln(1 + y)` (log); their variance parameter is left out
/// because its Wald variance assumes normal errors.
pub fn recovery_successes(kind: ModelKind) -> usize {
    (0..RECOVERY_SEEDS)
        .filter(|&seed| {
            let mut s = RngStream::new(TEST_KEY, 100 + kind as u64, seed);
            match kind {
                ModelKind::Poisson => {
                    let beta = [0.5, -0.3, 0.2];
                    let d = poisson_data(RECOVERY_N, &beta, &mut s);
                    within_three_se(&fit_model(kind, &d).unwrap(), &beta, 3)
                }
                ModelKind::NB => {
                    let beta = [0.5, -0.3, 0.2];
                    let d = nb_data(RECOVERY_N, &beta, 2.0, &mut s);
                    let truth = [beta[0], beta[1], beta[2], 2f64.ln()];
                    within_three_se(&fit_model(kind, &d).unwrap(), &truth, 4)
                }
                ModelKind::ZIP => {
                    let d = zip_data(RECOVERY_N, &ZIP_BETA, &ZIP_GAMMA, &mut s);
                    let truth: Vec<f64> = ZIP_BETA.iter().chain(&ZIP_GAMMA).copied().collect();
                    within_three_se(&fit_model(kind, &d).unwrap(), &truth, 6)
                }
                ModelKind::MZIP => {
                    let beta = [0.5, -0.3, 0.2];
                    let d = mzip_data(RECOVERY_N, &beta, &ZIP_GAMMA, &mut s);
                    let truth: Vec<f64> = beta.iter().chain(&ZIP_GAMMA).copied().collect();
                    within_three_se(&fit_model(kind, &d).unwrap(), &truth, 6)
                }
                ModelKind::LinearRaw | ModelKind::LinearLog => {
                    let full = zip_data(RECOVERY_N, &ZIP_BETA, &ZIP_GAMMA, &mut s);
                    let arm: Vec<u8> = (0..full.n()).map(|i| full.row(i)[1] as u8).collect();
                    let d = Dataset::with_treatment(full.y().to_vec(), &arm).unwrap();
                    let (transform, h): (LinearTransform, fn(u64) -> f64) = if kind == ModelKind::LinearRaw {
                        (LinearTransform::Raw, |y| y as f64)
                    } else {
                        (LinearTransform::Log1p, |y| (y as f64).ln_1p())
                    };
                    let m0 = zip_arm_expectation(0.0, h);
                    let m1 = zip_arm_expectation(1.0, h);
                    within_three_se(&fit_linear(&d, transform).unwrap(), &[m0, m1 - m0], 2)
                }
            }
        })
        .count()
}

/// Seeds (out of 20) for which NB2 on Poisson(2) data of size 5000 hits the
/// dispersion bound.
pub fn nb_bound_flag_count() -> usize {
    (0..20)
        .filter(|&seed| {
            let mut s = RngStream::new(TEST_KEY, 5, seed);
            let y: Vec<u64> = (0..5000).map(|_| sample_poisson(&mut s, 2.0).unwrap()).collect();
            fit_nb(&Dataset::intercept_only(y).unwrap())
                .unwrap()
                .has_flag(zicount::models::FitFlag::DispersionAtBound)
        })
        .count()
}
