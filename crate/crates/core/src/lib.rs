//! Bayesian nonparametric estimation of the time-varying power spectral
//! density of a locally stationary time series.
//!
//! The pipeline is: [`periodogram::moving_periodograms`] turns a series into
//! moving periodogram ordinates, [`likelihood::build_grid`] selects which
//! ordinates enter the (optionally thinned) dynamic Whittle likelihood,
//! [`sampler::run_chain`] draws from the posterior under a bivariate
//! Bernstein-Dirichlet prior, and [`inference::summarize`] reduces the draws
//! to pointwise surfaces together with a Savage-Dickey Bayes factor for
//! stationarity.

pub mod config;
pub mod error;
pub mod inference;
pub mod io;
pub mod likelihood;
pub mod periodogram;
pub mod pipeline;
pub mod prior;
pub mod sampler;
pub mod signal;
pub mod surface;

pub use error::{Error, Result};

/// Anything that can be evaluated as a tv-PSD on the unit square of
/// (rescaled time, rescaled frequency).
pub trait SpectralSurface {
    fn value(&self, u: f64, lambda: f64) -> f64;
}

impl<F> SpectralSurface for F
where
    F: Fn(f64, f64) -> f64,
{
    fn value(&self, u: f64, lambda: f64) -> f64 {
        self(u, lambda)
    }
}
