//! Moving periodogram ordinates.
//!
//! Each internal time point `t = 1..T` gets one ordinate: the local
//! periodogram of the window of width `2m + 1` starting at observed sample
//! `t` (1-based), evaluated at the single Fourier frequency `lambda_mod(t)`.
//! The frequency cycles through `lambda_1, ..., lambda_m` as `t` advances.
//! The observed record of length `N` plays the role of the padded series,
//! so `T = N - 2m` and internal time `t` corresponds to observed sample
//! `t + m`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::signal::TimeSeries;
use crate::{Error, Result};

/// Half-window size `m`; the window has `2m + 1` samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub m: usize,
}

impl WindowConfig {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("half-window size m must be at least 1"));
        }
        Ok(Self { m })
    }

    pub fn width(&self) -> usize {
        2 * self.m + 1
    }

    /// Shortest series yielding at least one ordinate.
    pub fn min_len(&self) -> usize {
        2 * self.m + 2
    }
}

/// `lambda_j = 2j / (2m + 1)` for `j = 1..m`.
pub fn fourier_frequencies(m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::invalid("half-window size m must be at least 1"));
    }
    let w = (2 * m + 1) as f64;
    Ok((1..=m).map(|j| 2.0 * j as f64 / w).collect())
}

/// Frequency index of internal time `t`: `1 + ((t - 1) mod m)`.
pub fn mod_index(t: usize, m: usize) -> usize {
    debug_assert!(t >= 1 && m >= 1);
    1 + (t - 1) % m
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovingPeriodogramSet {
    m: usize,
    ordinates: Vec<f64>,
    frequencies: Vec<f64>,
}

impl MovingPeriodogramSet {
    /// Assemble a set from precomputed ordinates (`ordinates[t - 1]` is
    /// `MI_t`). Ordinates must be finite and nonnegative.
    pub fn from_ordinates(m: usize, ordinates: Vec<f64>) -> Result<Self> {
        let frequencies = fourier_frequencies(m)?;
        if ordinates.is_empty() {
            return Err(Error::invalid("at least one ordinate is required"));
        }
        if let Some(i) = ordinates.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(format!(
                "ordinate at t = {} is {}, expected finite and nonnegative",
                i + 1,
                ordinates[i]
            )));
        }
        Ok(Self {
            m,
            ordinates,
            frequencies,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Effective length `T`.
    pub fn len(&self) -> usize {
        self.ordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordinates.is_empty()
    }

    pub fn ordinates(&self) -> &[f64] {
        &self.ordinates
    }

    /// `MI_t` for `t` in `1..=T`.
    pub fn ordinate(&self, t: usize) -> f64 {
        self.ordinates[t - 1]
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Frequency index `j` (1-based) paired with internal time `t`.
    pub fn frequency_index(&self, t: usize) -> usize {
        mod_index(t, self.m)
    }

    pub fn frequency(&self, t: usize) -> f64 {
        self.frequencies[self.frequency_index(t) - 1]
    }

    /// Mean ordinate, a moment estimate of the total power.
    pub fn mean(&self) -> f64 {
        self.ordinates.iter().sum::<f64>() / self.ordinates.len() as f64
    }
}

/// Compute `MI_t` for `t = 1..N-2m` by direct complex summation.
pub fn moving_periodograms(x: &TimeSeries, cfg: WindowConfig) -> Result<MovingPeriodogramSet> {
    let m = cfg.m;
    if m == 0 {
        return Err(Error::invalid("half-window size m must be at least 1"));
    }
    let n = x.len();
    if n < cfg.min_len() {
        return Err(Error::SeriesTooShort {
            required: cfg.min_len(),
            actual: n,
        });
    }
    let width = cfg.width();
    let big_t = n - 2 * m;

    // twiddles[j - 1][nu] = exp(-i * pi * nu * lambda_j)
    let twiddles: Vec<Vec<(f64, f64)>> = (1..=m)
        .map(|j| {
            (0..width)
                .map(|nu| {
                    // reduce the phase exactly on the integer lattice
                    let k = (nu * j) % width;
                    let phase = 2.0 * PI * k as f64 / width as f64;
                    (phase.cos(), -phase.sin())
                })
                .collect()
        })
        .collect();

    let norm = 2.0 * PI * width as f64;
    let values = x.values();
    let ordinates = (1..=big_t)
        .map(|t| {
            let tw = &twiddles[mod_index(t, m) - 1];
            let window = &values[t - 1..t - 1 + width];
            let (mut re, mut im) = (0.0, 0.0);
            for (xv, (c, s)) in window.iter().zip(tw) {
                re += xv * c;
                im += xv * s;
            }
            (re * re + im * im) / norm
        })
        .collect();

    Ok(MovingPeriodogramSet {
        m,
        ordinates,
        frequencies: fourier_frequencies(m)?,
    })
}
