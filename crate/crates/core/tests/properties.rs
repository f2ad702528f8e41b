mod common;

use proptest::prelude::*;
use rand_distr::{Distribution, Gamma};

use common::*;
use zicount::distributions::{sample_poisson, RngStream};
use zicount::linalg::{invert_spd, Matrix};
use zicount::models::{
    fit_model, fit_nb, loglik_mzip, loglik_nb, loglik_poisson, loglik_zip, Dataset, FitFlag, ModelKind,
};

#[test]
fn analytic_gradients_match_finite_differences() {
    for kind in [ModelKind::Poisson, ModelKind::NB, ModelKind::ZIP, ModelKind::MZIP] {
        let worst = gradient_check(kind);
        assert!(worst <= 1e-6, "{kind}: relative gradient error {worst:e}");
    }
}

#[test]
fn mixture_likelihood_matches_term_by_term_form() {
    let gap = naive_mixture_gap();
    assert!(gap <= 1e-10, "gap {gap:e}");
}

#[test]
fn intercept_only_zip_and_mzip_reach_the_same_maximum() {
    assert!(intercept_only_zip_mzip_gap() <= 1e-6);
}

#[test]
fn intercept_only_poisson_is_log_mean() {
    assert!(poisson_intercept_gap() <= 1e-9);
}

#[test]
fn nb_fit_matches_grid_search() {
    let gap = nb_grid_oracle_gap();
    assert!(gap <= 2e-3, "gap {gap}");
}

#[test]
fn poisson_fit_matches_grid_search() {
    let gap = poisson_grid_oracle_gap();
    assert!(gap <= 2e-3, "gap {gap}");
}

#[test]
fn fits_beat_the_generating_parameters() {
    // 25 datasets of 200 rows per count model, 100 in all.
    let beta = [0.5, -0.3, 0.2];
    let gamma = [-0.5, 0.5, -0.3];
    let mut wins = 0;
    for r in 0..25 {
        let mut s = RngStream::new(TEST_KEY, 3, r);
        let d = poisson_data(200, &beta, &mut s);
        let truth = loglik_poisson(&beta, &d).unwrap().0;
        wins += usize::from(fit_model(ModelKind::Poisson, &d).unwrap().loglik >= truth);

        let d = nb_data(200, &beta, 2.0, &mut s);
        let theta = [beta[0], beta[1], beta[2], 2f64.ln()];
        let truth = loglik_nb(&theta, &d).unwrap().0;
        wins += usize::from(fit_model(ModelKind::NB, &d).unwrap().loglik >= truth);

        let theta: Vec<f64> = beta.iter().chain(&gamma).copied().collect();
        let d = zip_data(200, &beta, &gamma, &mut s);
        let truth = loglik_zip(&theta, &d).unwrap().0;
        wins += usize::from(fit_model(ModelKind::ZIP, &d).unwrap().loglik >= truth);

        let d = mzip_data(200, &beta, &gamma, &mut s);
        let truth = loglik_mzip(&theta, &d).unwrap().0;
        wins += usize::from(fit_model(ModelKind::MZIP, &d).unwrap().loglik >= truth);
    }
    assert_eq!(wins, 100);
}

#[test]
fn zip_nests_poisson() {
    for r in 0..20 {
        let mut s = RngStream::new(TEST_KEY, 4, r);
        let d = zip_data(150, &[0.6, -0.2, 0.2], &[-1.0, 0.5, 0.0], &mut s);
        let pois = fit_model(ModelKind::Poisson, &d).unwrap();
        let zip = fit_model(ModelKind::ZIP, &d).unwrap();
        assert!(zip.loglik >= pois.loglik - 1e-9);
    }
}

#[test]
fn dispersion_bound_flag_tracks_underdispersion() {
    // For Poisson data the NB2 likelihood peaks at the k bound exactly when
    // the sample is not overdispersed, which happens about half the time.
    for seed in 0..20 {
        let mut s = RngStream::new(TEST_KEY, 5, seed);
        let y: Vec<u64> = (0..5000).map(|_| sample_poisson(&mut s, 2.0).unwrap()).collect();
        let mean = y.iter().sum::<u64>() as f64 / y.len() as f64;
        let score: f64 = y.iter().map(|&v| (v as f64 - mean).powi(2) - v as f64).sum();
        let fit = fit_nb(&Dataset::intercept_only(y).unwrap()).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.has_flag(FitFlag::DispersionAtBound), score <= 0.0, "seed {seed}");
    }
}

#[test]
fn nb_variance_formula() {
    let (mean, k) = (2.0, 0.5);
    let mut s = RngStream::new(TEST_KEY, 6, 0);
    let gamma = Gamma::new(k, mean / k).unwrap();
    let n = 1_000_000;
    let draws: Vec<f64> = (0..n)
        .map(|_| {
            let rate = gamma.sample(&mut s);
            sample_poisson(&mut s, rate).unwrap() as f64
        })
        .collect();
    let m = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((var - 10.0).abs() <= 0.1, "variance {var}");
}

fn spd(dim: usize, entries: &[f64]) -> Matrix {
    let a = Matrix::from_fn(dim, dim, |i, j| entries[i * dim + j]);
    &a * a.transpose() + Matrix::identity(dim, dim) * 0.5
}

proptest! {
    #[test]
    fn inverse_of_random_spd_is_an_inverse(
        dim in 1usize..=6,
        entries in proptest::collection::vec(-2.0f64..2.0, 36),
    ) {
        let m = spd(dim, &entries);
        let inv = invert_spd(&m).unwrap();
        let err = (&m * &inv - Matrix::identity(dim, dim)).abs().max();
        prop_assert!(err < 1e-9, "residual {}", err);
        prop_assert!((&inv - inv.transpose()).abs().max() < 1e-12);
    }

    #[test]
    fn poisson_loglik_is_concave_along_lines(
        b in proptest::collection::vec(-1.0f64..1.0, 3),
        dir in proptest::collection::vec(-1.0f64..1.0, 3),
        seed in 0u64..1000,
    ) {
        let mut s = RngStream::new(TEST_KEY, 7, seed);
        let d = poisson_data(30, &[0.5, -0.3, 0.2], &mut s);
        let at = |t: f64| {
            let theta: Vec<f64> = b.iter().zip(&dir).map(|(x, v)| x + t * v).collect();
            loglik_poisson(&theta, &d).unwrap().0
        };
        prop_assert!(at(0.0) >= 0.5 * (at(-0.1) + at(0.1)) - 1e-9);
    }
}
