//! Likelihoods, fitting and Wald inference for the count and linear models.
//!
//! Parameter vectors are laid out as the mean block (one coefficient per
//! design column) followed by, depending on the model, the zero-part block
//! (`zero:<column>`), `ln_k` for NB2, or `sigma2` for the linear models.

mod dataset;
mod fit;
mod inference;
mod linear;
mod link;
mod nb;
mod poisson;
mod zip;

pub use dataset::{Dataset, INTERCEPT};
pub use fit::{FitFlag, FitResult, ModelKind, ModelPrediction};
pub use inference::{effect_summaries, wald_test, zip_overall_irr, EffectKind, EffectSummary, WaldReport};
pub use linear::{fit_linear, LinearTransform};
pub use nb::{fit_nb, fit_nb_from, loglik_nb, LN_K_BOUND};
pub use poisson::{fit_poisson, fit_poisson_from, loglik_poisson};
pub use zip::{fit_mzip, fit_mzip_from, fit_zip, fit_zip_from, loglik_mzip, loglik_zip, zero_block_start};

/// Prefix of the zero-part coefficient names.
pub const ZERO_PREFIX: &str = "zero:";
/// Name of the NB2 log-dispersion parameter.
pub const LN_K: &str = "ln_k";
/// Name of the linear models' residual variance.
pub const SIGMA2: &str = "sigma2";

/// Fits `kind` with its default starting values.
pub fn fit_model(kind: ModelKind, d: &Dataset) -> crate::Result<FitResult> {
    match kind {
        ModelKind::LinearRaw => fit_linear(d, LinearTransform::Raw),
        ModelKind::LinearLog => fit_linear(d, LinearTransform::Log1p),
        ModelKind::Poisson => fit_poisson(d),
        ModelKind::NB => fit_nb(d),
        ModelKind::ZIP => fit_zip(d),
        ModelKind::MZIP => fit_mzip(d),
    }
}

/// Default starting vector for the likelihood-based models; `None` for OLS.
pub fn default_start(kind: ModelKind, d: &Dataset) -> Option<Vec<f64>> {
    match kind {
        ModelKind::LinearRaw | ModelKind::LinearLog => None,
        ModelKind::Poisson => Some(poisson::default_start(d)),
        ModelKind::NB => Some(nb::default_start(d)),
        ModelKind::ZIP => Some(zip::zip_default_start(d)),
        ModelKind::MZIP => Some(zip::mzip_default_start(d)),
    }
}

/// Fits `kind` from an explicit start; OLS ignores the start.
pub fn fit_model_from(kind: ModelKind, d: &Dataset, start: &[f64]) -> crate::Result<FitResult> {
    match kind {
        ModelKind::LinearRaw | ModelKind::LinearLog => fit_model(kind, d),
        ModelKind::Poisson => fit_poisson_from(d, start),
        ModelKind::NB => fit_nb_from(d, start),
        ModelKind::ZIP => fit_zip_from(d, start),
        ModelKind::MZIP => fit_mzip_from(d, start),
    }
}
