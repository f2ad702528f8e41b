//! Count regression and simulation toolkit for zero-inflated outcomes.
//!
//! Fits Poisson, NB2, zero-inflated Poisson (ZIP), marginalized ZIP (MZIP) and
//! linear models by maximum likelihood with Wald inference, and runs a Monte
//! Carlo harness that estimates rejection rates of the treatment test for each
//! model on data generated from a ZIP process.

pub mod calibration;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod models;

pub use error::{Error, Result};
