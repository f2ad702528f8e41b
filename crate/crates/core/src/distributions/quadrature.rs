use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

pub const DEFAULT_QUADRATURE_ORDER: usize = 32;

const MAX_ORDER: usize = 64;
const PI_QUARTER_INV: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)

/// Gauss–Hermite rule for the weight `exp(-x^2)` (physicists' convention).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `E[g(Z)]` for `Z ~ N(0, 1)`.
    pub fn expect_std_normal<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        let total: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(SQRT_2 * x))
            .sum();
        total / PI.sqrt()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        gauss_hermite(DEFAULT_QUADRATURE_ORDER).expect("default order is in range")
    }
}

/// Nodes and weights by Newton iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> Result<QuadratureRule> {
    if n == 0 || n > MAX_ORDER {
        return Err(Error::Domain(format!(
            "quadrature order must be in 1..={MAX_ORDER}, got {n}"
        )));
    }
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut z = 0.0_f64;
    for i in 0..n.div_ceil(2) {
        // Initial guesses for the largest roots, then extrapolation inward.
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut deriv = 0.0;
        for _ in 0..100 {
            let (p_n, p_prev) = hermite_pair(n, z);
            deriv = (2.0 * nf).sqrt() * p_prev;
            let step = p_n / deriv;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, p_prev) = hermite_pair(n, z);
        deriv = if p_prev != 0.0 { (2.0 * nf).sqrt() * p_prev } else { deriv };
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (deriv * deriv);
        weights[n - 1 - i] = weights[i];
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Orthonormal Hermite functions of degree `n` and `n - 1` at `z`.
fn hermite_pair(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = PI_QUARTER_INV;
    let mut p2 = 0.0;
    for j in 1..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, p2)
}
