//! Zero-rate calibration of the ZIP data generator.
//!
//! The generator is
//! `logit(pi) = g0 + g1 A + g2 C` and `ln(mu) = b0 + b1 A + b2 C`, with
//! `A ~ Bernoulli(1/2)`, `C ~ N(0, 1)`, `b0 = 0.8 - b1`, `b2 = 0.2` and
//! `g0 = 2 g2`. Given the treatment effects `(b1, g1)`, [`solve_gamma2`]
//! picks `g2` so that `P(y = 0)` hits a target.

use serde::{Deserialize, Serialize};

use crate::distributions::QuadratureRule;
use crate::error::{Error, Result};
use crate::models::ModelPrediction;

/// `b0 + b1` is held at this value so the count-part mean of the treated arm
/// matches the control arm at `b1 = 0`.
pub const COUNT_INTERCEPT_ANCHOR: f64 = 0.8;
/// Covariate effect on the count part.
pub const COVARIATE_COUNT_EFFECT: f64 = 0.2;

const INITIAL_BRACKET: f64 = 20.0;
const EXPANDED_BRACKET: f64 = 50.0;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl GeneratorParams {
    /// Parameters obeying `b0 = 0.8 - b1`, `b2 = 0.2`, `g0 = 2 g2`.
    pub fn constrained(beta1: f64, gamma1: f64, gamma2: f64) -> Self {
        Self {
            beta0: COUNT_INTERCEPT_ANCHOR - beta1,
            beta1,
            beta2: COVARIATE_COUNT_EFFECT,
            gamma0: 2.0 * gamma2,
            gamma1,
            gamma2,
        }
    }

    pub fn satisfies_constraints(&self) -> bool {
        (self.beta0 - (COUNT_INTERCEPT_ANCHOR - self.beta1)).abs() <= 1e-12
            && (self.gamma0 - 2.0 * self.gamma2).abs() <= 1e-12
    }

    /// Structural-zero probability and Poisson mean at arm `a`, covariate `c`.
    pub fn at(&self, a: f64, c: f64) -> ModelPrediction {
        let logit = self.gamma0 + self.gamma1 * a + self.gamma2 * c;
        let pi = 1.0 / (1.0 + (-logit).exp());
        let mu = (self.beta0 + self.beta1 * a + self.beta2 * c).exp();
        ModelPrediction { overall_mean: (1.0 - pi) * mu, poisson_mean: Some(mu), structural_zero_prob: Some(pi) }
    }

    /// `P(y = 0 | A = a, C = c)`.
    pub fn zero_probability(&self, a: f64, c: f64) -> f64 {
        let logit = self.gamma0 + self.gamma1 * a + self.gamma2 * c;
        let mu = (self.beta0 + self.beta1 * a + self.beta2 * c).exp();
        // pi + (1 - pi) e^-mu, written to stay accurate when pi is near 0 or 1.
        let (pi, one_minus_pi) = if logit >= 0.0 {
            let e = (-logit).exp();
            (1.0 / (1.0 + e), e / (1.0 + e))
        } else {
            let e = logit.exp();
            (e / (1.0 + e), 1.0 / (1.0 + e))
        };
        pi + one_minus_pi * (-mu).exp()
    }
}

/// Population over which the target zero rate is defined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroRateReference {
    /// Averaged over both arms, half each.
    #[default]
    Marginal,
    /// Control arm only.
    Control,
}

/// `P(y = 0)` averaged over the arms (exactly half each) and over the
/// covariate by Gauss–Hermite quadrature.
pub fn marginal_zero_rate(g: &GeneratorParams, rule: &QuadratureRule) -> f64 {
    zero_rate(g, rule, ZeroRateReference::Marginal)
}

pub fn zero_rate(g: &GeneratorParams, rule: &QuadratureRule, reference: ZeroRateReference) -> f64 {
    let control = rule.expect_std_normal(|c| g.zero_probability(0.0, c));
    match reference {
        ZeroRateReference::Control => control,
        ZeroRateReference::Marginal => {
            let treated = rule.expect_std_normal(|c| g.zero_probability(1.0, c));
            0.5 * (control + treated)
        }
    }
}

/// Marginal-reference version of [`solve_gamma2_with`].
pub fn solve_gamma2(target: f64, beta1: f64, gamma1: f64, rule: &QuadratureRule) -> Result<GeneratorParams> {
    solve_gamma2_with(target, beta1, gamma1, rule, ZeroRateReference::Marginal)
}

/// Finds `g2` (with `g0 = 2 g2`) reproducing `target` to 1e-8 by bisection.
///
/// The search starts on `[-20, 20]` and widens once to `[-50, 50]` if the
/// target lies outside the rates at the endpoints.
pub fn solve_gamma2_with(
    target: f64,
    beta1: f64,
    gamma1: f64,
    rule: &QuadratureRule,
    reference: ZeroRateReference,
) -> Result<GeneratorParams> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Domain(format!("zero rate must lie in (0, 1), got {target}")));
    }
    if !beta1.is_finite() || !gamma1.is_finite() {
        return Err(Error::Domain("treatment effects must be finite".into()));
    }
    let rate = |gamma2: f64| zero_rate(&GeneratorParams::constrained(beta1, gamma1, gamma2), rule, reference);

    let mut half_width = INITIAL_BRACKET;
    let (mut lo_rate, mut hi_rate) = (rate(-half_width), rate(half_width));
    if !(lo_rate <= target && target <= hi_rate) {
        half_width = EXPANDED_BRACKET;
        lo_rate = rate(-half_width);
        hi_rate = rate(half_width);
    }
    if !(lo_rate <= hi_rate) {
        return Err(Error::Domain(format!(
            "zero rate is not increasing across the bracket: {lo_rate} at -{half_width}, {hi_rate} at {half_width}"
        )));
    }
    if target < lo_rate || target > hi_rate {
        return Err(Error::UnreachableZeroRate { target, floor: lo_rate, ceiling: hi_rate });
    }

    let (mut lo, mut hi) = (-half_width, half_width);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let r = rate(mid);
        if r == target {
            lo = mid;
            hi = mid;
            break;
        }
        if r < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    // Whichever endpoint is closer.
    let gamma2 = if (rate(lo) - target).abs() <= (rate(hi) - target).abs() { lo } else { hi };
    Ok(GeneratorParams::constrained(beta1, gamma1, gamma2))
}
