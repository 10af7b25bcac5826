//! End-to-end estimation: periodograms, grid, chain(s), summaries and the
//! files written for each run.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::inference::{linspace, summarize, PosteriorMean, PosteriorSummary};
use crate::io::{write_json, write_surface};
use crate::likelihood::build_grid;
use crate::periodogram::{moving_periodograms, WindowConfig};
use crate::prior::prior_prob_k1_equals_1;
use crate::sampler::{
    run_chain, AcceptanceRates, ChainOutput, Progress, ADAPTIVE_SCALE, COVARIANCE_RIDGE, SAFE_SCALE,
    TAU_WIDTH_DECAY,
};
use crate::signal::TimeSeries;
use crate::{Error, Result};

/// Result of one chain on one series.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub original_len: usize,
    pub effective_len: usize,
    pub m: usize,
    pub grid_entries: usize,
    pub nominal_blocks: usize,
    pub chain: ChainOutput,
    pub summary: PosteriorSummary,
}

impl Estimate {
    pub fn posterior_mean(&self) -> Result<PosteriorMean> {
        PosteriorMean::new(&self.chain.draws)
    }
}

/// Run one chain with `cfg.sampler` as given and summarize it.
pub fn estimate(
    series: &TimeSeries,
    cfg: &RunConfig,
    progress: Option<&mut dyn FnMut(&Progress)>,
) -> Result<Estimate> {
    cfg.validate()?;
    let window = WindowConfig::new(cfg.m)?;
    let mi = moving_periodograms(series, window)?;
    let grid = build_grid(mi.len(), cfg.m, cfg.thinning)?;
    let chain = run_chain(&mi, &grid, &cfg.prior, &cfg.sampler, progress)?;
    let summary = summarize(
        &chain.draws,
        &linspace(cfg.time_grid),
        &linspace(cfg.freq_grid),
        series.len(),
        cfg.m,
        &cfg.prior,
    )?;
    Ok(Estimate {
        original_len: series.len(),
        effective_len: mi.len(),
        m: cfg.m,
        grid_entries: grid.len_entries(),
        nominal_blocks: grid.nominal_blocks,
        chain,
        summary,
    })
}

/// Run `cfg.chains` independent chains concurrently. Chain `c` uses the
/// configured seed with ChaCha stream `c`.
pub fn estimate_chains(series: &TimeSeries, cfg: &RunConfig) -> Result<Vec<Estimate>> {
    cfg.validate()?;
    (0..cfg.chains as u64)
        .into_par_iter()
        .map(|c| {
            let mut one = cfg.clone();
            one.sampler.stream = c;
            estimate(series, &one, None)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub last: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptationConstants {
    pub adaptive_scale: f64,
    pub safe_scale: f64,
    pub covariance_ridge: f64,
    pub tau_width_decay: f64,
    pub final_tau_width: f64,
}

/// Everything needed to reproduce and interpret a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub software: String,
    pub version: String,
    pub config: RunConfig,
    pub seed: u64,
    pub chain: u64,
    pub original_len: usize,
    pub effective_len: usize,
    pub likelihood_entries: usize,
    pub nominal_blocks: usize,
    pub truncation_level: usize,
    pub truncation_overridden: bool,
    pub retained_draws: usize,
    pub bayes_factor_01: f64,
    pub bayes_factor_ceiling: f64,
    pub k1_pmf: Vec<f64>,
    pub k2_pmf: Vec<f64>,
    pub acceptance: AcceptanceRates,
    pub burn_in_acceptance: AcceptanceRates,
    pub adaptation: AdaptationConstants,
    pub log_posterior: TraceSummary,
    pub quantiles: String,
    pub time_axis: String,
    pub runtime_seconds: f64,
}

pub fn metadata(est: &Estimate, cfg: &RunConfig) -> Result<Metadata> {
    let lp: Vec<f64> = est.chain.draws.iter().map(|d| d.log_posterior).collect();
    let last = *lp.last().ok_or_else(|| Error::invalid("chain retained no draws"))?;
    Ok(Metadata {
        software: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        seed: cfg.sampler.seed,
        chain: cfg.sampler.stream,
        original_len: est.original_len,
        effective_len: est.effective_len,
        likelihood_entries: est.grid_entries,
        nominal_blocks: est.nominal_blocks,
        truncation_level: est.chain.truncation_level,
        truncation_overridden: cfg.prior.truncation.is_some(),
        retained_draws: lp.len(),
        bayes_factor_01: est.summary.bayes_factor_01,
        bayes_factor_ceiling: 1.0 / prior_prob_k1_equals_1(&cfg.prior)?,
        k1_pmf: est.summary.k1_pmf.clone(),
        k2_pmf: est.summary.k2_pmf.clone(),
        acceptance: est.chain.acceptance,
        burn_in_acceptance: est.chain.burn_in_acceptance,
        adaptation: AdaptationConstants {
            adaptive_scale: ADAPTIVE_SCALE,
            safe_scale: SAFE_SCALE,
            covariance_ridge: COVARIANCE_RIDGE,
            tau_width_decay: TAU_WIDTH_DECAY,
            final_tau_width: est.chain.tau_width,
        },
        log_posterior: TraceSummary {
            min: lp.iter().copied().fold(f64::INFINITY, f64::min),
            mean: lp.iter().sum::<f64>() / lp.len() as f64,
            max: lp.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            last,
        },
        quantiles: "median averages the two middle draws for an even count; q05 and q95 \
                    are nearest-rank (the ceil(p n)-th smallest draw)"
            .to_string(),
        time_axis: "u is rescaled time on the observed series; values within m samples of \
                    either end repeat the boundary estimate"
            .to_string(),
        runtime_seconds: est.chain.runtime_seconds,
    })
}

pub const SURFACE_FILE: &str = "surface.csv";
pub const METADATA_FILE: &str = "metadata.json";
pub const DRAWS_FILE: &str = "draws.json";

/// Write `surface.csv`, `metadata.json` and optionally `draws.json` into
/// `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, est: &Estimate, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_surface(&dir.join(SURFACE_FILE), &est.summary)?;
    write_json(&dir.join(METADATA_FILE), &metadata(est, cfg)?)?;
    if cfg.save_draws {
        write_json(&dir.join(DRAWS_FILE), &est.chain.draws)?;
    }
    Ok(())
}

/// Output directory of chain `c`: `dir` itself for a single chain, otherwise
/// `dir/chain_<c>`.
pub fn chain_dir(dir: &Path, chains: usize, c: usize) -> PathBuf {
    if chains == 1 {
        dir.to_path_buf()
    } else {
        dir.join(format!("chain_{c}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{simulate_dgp, Dgp, DgpSpec, Innovation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> RunConfig {
        let mut c = RunConfig {
            m: 10,
            thinning: 1,
            time_grid: 11,
            freq_grid: 6,
            ..Default::default()
        };
        c.sampler.n_iter = 400;
        c.sampler.burn_in = 200;
        c.sampler.mcmc_thin = 2;
        c.sampler.seed = 21;
        c
    }

    fn series() -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        simulate_dgp(
            &DgpSpec {
                model: Dgp::S1,
                innovation: Innovation::Gaussian,
                len: 300,
            },
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn small_run_writes_outputs() {
        let cfg = RunConfig {
            save_draws: true,
            ..small_config()
        };
        let est = estimate(&series(), &cfg, None).unwrap();
        assert_eq!(est.effective_len, 280);
        assert_eq!(est.chain.draws.len(), 100);
        assert!(est.summary.mean.iter().all(|v| *v > 0.0));
        let dir = tempfile::tempdir().unwrap();
        write_outputs(dir.path(), &est, &cfg).unwrap();
        let meta: Metadata = crate::io::read_json(&dir.path().join(METADATA_FILE)).unwrap();
        assert_eq!(meta.config, cfg);
        assert_eq!(meta.retained_draws, 100);
        assert_eq!(meta.truncation_level, 20);
        assert!(meta.log_posterior.mean.is_finite());
        assert!(dir.path().join(DRAWS_FILE).exists());
    }

    #[test]
    fn chains_differ_by_stream() {
        let cfg = RunConfig {
            chains: 2,
            ..small_config()
        };
        let out = estimate_chains(&series(), &cfg).unwrap();
        assert_eq!(out.len(), 2);
        assert_ne!(out[0].chain.draws, out[1].chain.draws);
        let single = estimate(&series(), &small_config(), None).unwrap();
        assert_eq!(single.chain.draws, out[0].chain.draws);
        assert_eq!(chain_dir(Path::new("o"), 2, 1), Path::new("o/chain_1"));
        assert_eq!(chain_dir(Path::new("o"), 1, 0), Path::new("o"));
    }
}
