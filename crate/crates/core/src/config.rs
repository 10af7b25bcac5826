//! Run configuration shared by the library pipeline and the command line.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::prior::PriorConfig;
use crate::sampler::SamplerConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Half-window size of the moving periodogram.
    pub m: usize,
    /// Likelihood thinning factor `i` in `{1, 2, 3}`.
    pub thinning: usize,
    /// Number of rescaled times in the output surface.
    pub time_grid: usize,
    /// Number of rescaled frequencies in the output surface.
    pub freq_grid: usize,
    pub chains: usize,
    pub save_draws: bool,
    pub prior: PriorConfig,
    pub sampler: SamplerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            output_dir: None,
            m: 50,
            thinning: 2,
            time_grid: 201,
            freq_grid: 101,
            chains: 1,
            save_draws: false,
            prior: PriorConfig::default(),
            sampler: SamplerConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid("m must be at least 1"));
        }
        if !(1..=3).contains(&self.thinning) {
            return Err(Error::invalid(format!(
                "thinning must be 1, 2 or 3, got {}",
                self.thinning
            )));
        }
        if self.time_grid < 2 || self.freq_grid < 2 {
            return Err(Error::invalid("output grids need at least 2 points per axis"));
        }
        if self.chains == 0 {
            return Err(Error::invalid("chains must be at least 1"));
        }
        self.prior.validate()?;
        self.sampler.validate()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
