//! Blocked adaptive Metropolis-Hastings sampler.
//!
//! One sweep updates, in order: `k1`, `k2`, the time atoms, the frequency
//! atoms, the sticks, and `ln tau`. Atoms and sticks move on the logit scale
//! with adaptive Gaussian random walks, degrees with symmetrized Poisson
//! increments, and `ln tau` with a uniform random walk whose width is tuned
//! during burn-in.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::likelihood::{LikelihoodGrid, WhittleEvaluator, WhittleStats};
use crate::periodogram::MovingPeriodogramSet;
use crate::prior::{log_prior, DegreePrior, PriorConfig};
use crate::surface::{bin_index, stick_weights_unchecked, StickBreakingMeasure, SurfaceParams};
use crate::{Error, Result};

/// Scale of the adaptive proposal covariance, `2.38^2 / d`.
pub const ADAPTIVE_SCALE: f64 = 2.38;
/// Standard deviation scale of the fixed safe component, `0.01^2 / d`.
pub const SAFE_SCALE: f64 = 0.01;
/// Ridge added to the empirical covariance.
pub const COVARIANCE_RIDGE: f64 = 1e-10;
/// Robbins-Monro step size exponent for the `ln tau` width.
pub const TAU_WIDTH_DECAY: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub mcmc_thin: usize,
    pub k_poisson_rate: f64,
    pub adapt_start: usize,
    pub adapt_mix_weight: f64,
    pub tau_width_init: f64,
    pub tau_target_accept: f64,
    /// Starting value of both degrees, capped at `k_max`.
    pub init_degree: usize,
    pub seed: u64,
    /// ChaCha stream; independent chains share a seed and differ here.
    pub stream: u64,
    /// When false the target is the prior alone.
    pub use_likelihood: bool,
    /// Sweeps between progress callbacks.
    pub progress_every: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_iter: 110_000,
            burn_in: 60_000,
            mcmc_thin: 5,
            k_poisson_rate: 2.0,
            adapt_start: 200,
            adapt_mix_weight: 0.05,
            tau_width_init: 1.0,
            tau_target_accept: 0.44,
            init_degree: 20,
            seed: 0,
            stream: 0,
            use_likelihood: true,
            progress_every: 1000,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iter {
            return Err(Error::invalid(format!(
                "burn-in ({}) must be smaller than the number of iterations ({})",
                self.burn_in, self.n_iter
            )));
        }
        if self.mcmc_thin == 0 {
            return Err(Error::invalid("MCMC thinning must be at least 1"));
        }
        if !(self.k_poisson_rate > 0.0 && self.k_poisson_rate.is_finite()) {
            return Err(Error::invalid("k_poisson_rate must be positive"));
        }
        if !(0.0..=1.0).contains(&self.adapt_mix_weight) {
            return Err(Error::invalid("adapt_mix_weight must lie in [0, 1]"));
        }
        if !(self.tau_width_init > 0.0 && self.tau_width_init.is_finite()) {
            return Err(Error::invalid("tau_width_init must be positive"));
        }
        if !(self.tau_target_accept > 0.0 && self.tau_target_accept < 1.0) {
            return Err(Error::invalid("tau_target_accept must lie in (0, 1)"));
        }
        if self.init_degree == 0 {
            return Err(Error::invalid("init_degree must be at least 1"));
        }
        Ok(())
    }

    /// Number of retained draws.
    pub fn retained(&self) -> usize {
        (self.n_iter - self.burn_in) / self.mcmc_thin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degree {
    Time,
    Frequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    TimeAtoms,
    FrequencyAtoms,
    Sticks,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln sigma(z) + ln(1 - sigma(z))`, the log Jacobian of the logistic map.
pub fn logit_jacobian(z: f64) -> f64 {
    -softplus(-z) - softplus(z)
}

/// Adaptive random-walk proposal for one block: a mixture of a Gaussian
/// scaled by the running covariance and a small fixed Gaussian.
#[derive(Debug, Clone)]
pub struct AdaptiveProposal {
    dim: usize,
    mix_weight: f64,
    adapt_start: usize,
    count: usize,
    mean: DVector<f64>,
    scatter: DMatrix<f64>,
    chol: Option<DMatrix<f64>>,
    dirty: bool,
    frozen: bool,
}

impl AdaptiveProposal {
    pub fn new(dim: usize, mix_weight: f64, adapt_start: usize) -> Self {
        Self {
            dim,
            mix_weight,
            adapt_start,
            count: 0,
            mean: DVector::zeros(dim),
            scatter: DMatrix::zeros(dim, dim),
            chol: None,
            dirty: false,
            frozen: false,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Fold a visited state into the running mean and covariance.
    pub fn observe(&mut self, z: &[f64]) {
        if self.frozen {
            return;
        }
        self.count += 1;
        let x = DVector::from_column_slice(z);
        let delta = &x - &self.mean;
        self.mean += &delta / self.count as f64;
        let delta2 = &x - &self.mean;
        self.scatter += &delta * delta2.transpose();
        self.dirty = true;
    }

    pub fn freeze(&mut self) {
        self.refresh();
        self.frozen = true;
    }

    /// Empirical covariance, if at least two states have been observed.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        (self.count >= 2).then(|| &self.scatter / (self.count - 1) as f64)
    }

    fn refresh(&mut self) {
        if !self.dirty {
            return;
        }
        self.dirty = false;
        self.chol = self.covariance().and_then(|c| {
            let d = self.dim as f64;
            let s = (c + DMatrix::identity(self.dim, self.dim) * COVARIANCE_RIDGE)
                * (ADAPTIVE_SCALE * ADAPTIVE_SCALE / d);
            s.cholesky().map(|ch| ch.l())
        });
    }

    /// Write `z + increment` into `out`. `iteration` is the 1-based sweep.
    pub fn propose<R: Rng + ?Sized>(
        &mut self,
        z: &[f64],
        iteration: usize,
        rng: &mut R,
        out: &mut Vec<f64>,
    ) {
        let pick: f64 = rng.random();
        let eps: DVector<f64> = DVector::from_fn(self.dim, |_, _| StandardNormal.sample(rng));
        let use_adaptive = iteration > self.adapt_start && pick >= self.mix_weight;
        if use_adaptive {
            self.refresh();
        }
        let step = match (&self.chol, use_adaptive) {
            (Some(l), true) => l * eps,
            _ => eps * (SAFE_SCALE / (self.dim as f64).sqrt()),
        };
        out.clear();
        out.extend(z.iter().zip(step.iter()).map(|(a, b)| a + b));
    }
}

/// Acceptance rates per update, `NaN` when no move was attempted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub k1: f64,
    pub k2: f64,
    pub time_atoms: f64,
    pub frequency_atoms: f64,
    pub sticks: f64,
    pub tau: f64,
}

impl AcceptanceRates {
    pub fn all(&self) -> [(&'static str, f64); 6] {
        [
            ("k1", self.k1),
            ("k2", self.k2),
            ("time_atoms", self.time_atoms),
            ("frequency_atoms", self.frequency_atoms),
            ("sticks", self.sticks),
            ("tau", self.tau),
        ]
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Counter {
    tried: [u64; 6],
    accepted: [u64; 6],
}

impl Counter {
    fn record(&mut self, slot: usize, ok: bool) {
        self.tried[slot] += 1;
        self.accepted[slot] += ok as u64;
    }

    fn rates(&self) -> AcceptanceRates {
        let r = |i: usize| self.accepted[i] as f64 / self.tried[i] as f64;
        AcceptanceRates {
            k1: r(0),
            k2: r(1),
            time_atoms: r(2),
            frequency_atoms: r(3),
            sticks: r(4),
            tau: r(5),
        }
    }
}

fn block_slot(block: Block) -> usize {
    match block {
        Block::TimeAtoms => 2,
        Block::FrequencyAtoms => 3,
        Block::Sticks => 4,
    }
}

fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// Current position of one chain together with everything needed to score
/// proposals without recomputing unchanged parts.
pub struct ChainState {
    evaluator: Option<WhittleEvaluator>,
    prior: PriorConfig,
    rho: DegreePrior,
    k1: usize,
    k2: usize,
    z_time: Vec<f64>,
    z_freq: Vec<f64>,
    z_sticks: Vec<f64>,
    log_tau: f64,
    weights: Vec<f64>,
    bins: Vec<(usize, usize)>,
    stats: WhittleStats,
    proposals: [AdaptiveProposal; 3],
    ln_tau_width: f64,
    poisson: Poisson<f64>,
    counter: Counter,
    scratch_z: Vec<f64>,
    scratch_b: Vec<f64>,
    scratch_bins: Vec<(usize, usize)>,
    scratch_weights: Vec<f64>,
}

const NO_DATA: WhittleStats = WhittleStats {
    n: 0,
    sum_ln_b: 0.0,
    sum_ratio: 0.0,
};

impl ChainState {
    /// Start a chain at `k1 = k2 = init_degree`, `tau = mean(MI)`, all sticks
    /// at 0.5 and atoms drawn from the uniform base measure.
    pub fn initialize<R: Rng + ?Sized>(
        periodograms: &MovingPeriodogramSet,
        grid: &LikelihoodGrid,
        prior: &PriorConfig,
        cfg: &SamplerConfig,
        rng: &mut R,
    ) -> Result<Self> {
        prior.validate()?;
        cfg.validate()?;
        let evaluator = if cfg.use_likelihood {
            Some(WhittleEvaluator::new(periodograms, grid, prior.basis)?)
        } else {
            None
        };
        let level = prior.truncation_level(grid.m, grid.nominal_blocks);
        let k = cfg.init_degree.min(prior.k_max);
        let z_time: Vec<f64> = (0..=level).map(|_| logit(rng.random::<f64>())).collect();
        let z_freq: Vec<f64> = (0..=level).map(|_| logit(rng.random::<f64>())).collect();
        let z_sticks = vec![0.0; level];
        let log_tau = periodograms.mean().ln();
        if !log_tau.is_finite() {
            return Err(Error::Initialization(format!(
                "tau: mean periodogram ordinate is {}, so ln tau is not finite",
                periodograms.mean()
            )));
        }
        let poisson = Poisson::new(cfg.k_poisson_rate)
            .map_err(|e| Error::invalid(format!("k_poisson_rate: {e}")))?;
        let mut state = Self {
            evaluator,
            prior: prior.clone(),
            rho: prior.degree_prior(),
            k1: k,
            k2: k,
            z_time,
            z_freq,
            z_sticks,
            log_tau,
            weights: Vec::new(),
            bins: Vec::new(),
            stats: NO_DATA,
            proposals: [
                AdaptiveProposal::new(level + 1, cfg.adapt_mix_weight, cfg.adapt_start),
                AdaptiveProposal::new(level + 1, cfg.adapt_mix_weight, cfg.adapt_start),
                AdaptiveProposal::new(level, cfg.adapt_mix_weight, cfg.adapt_start),
            ],
            ln_tau_width: cfg.tau_width_init.ln(),
            poisson,
            counter: Counter::default(),
            scratch_z: Vec::new(),
            scratch_b: Vec::new(),
            scratch_bins: Vec::new(),
            scratch_weights: Vec::new(),
        };
        state.weights = sticks_to_weights(&state.z_sticks);
        state.bins = bins_for(k, k, &state.z_time, &state.z_freq);
        let (w, b) = (state.weights.clone(), state.bins.clone());
        state.stats = state
            .surface_stats(k, k, &w, &b)
            .map_err(|e| Error::Initialization(format!("likelihood: {e}")))?;
        let lp = state.log_posterior();
        if !lp.is_finite() {
            return Err(Error::Initialization(format!(
                "log-posterior is {lp} (log-likelihood {}, ln tau {})",
                state.log_likelihood(),
                state.log_tau
            )));
        }
        Ok(state)
    }

    fn surface_stats(
        &mut self,
        k1: usize,
        k2: usize,
        weights: &[f64],
        bins: &[(usize, usize)],
    ) -> Result<WhittleStats> {
        match self.evaluator.as_mut() {
            None => Ok(NO_DATA),
            Some(ev) => {
                let mut b = std::mem::take(&mut self.scratch_b);
                ev.fill_surface(k1, k2, weights, bins, &mut b);
                let s = ev.stats(&b);
                self.scratch_b = b;
                s
            }
        }
    }

    pub fn level(&self) -> usize {
        self.z_sticks.len()
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.k1, self.k2)
    }

    pub fn log_tau(&self) -> f64 {
        self.log_tau
    }

    pub fn tau_width(&self) -> f64 {
        self.ln_tau_width.exp()
    }

    pub fn proposal(&self, block: Block) -> &AdaptiveProposal {
        &self.proposals[block_slot(block) - 2]
    }

    pub fn log_likelihood(&self) -> f64 {
        if self.evaluator.is_none() {
            0.0
        } else {
            self.stats.log_likelihood(self.log_tau)
        }
    }

    fn sticks_term(&self, z: &[f64]) -> f64 {
        let m = self.prior.dp_mass;
        z.iter().map(|&v| -(m - 1.0) * softplus(v)).sum::<f64>() + z.len() as f64 * m.ln()
    }

    /// Unnormalized log posterior on the natural parameter scale.
    pub fn log_posterior(&self) -> f64 {
        self.log_likelihood()
            + self.rho.ln_pmf(self.k1)
            + self.rho.ln_pmf(self.k2)
            + self.sticks_term(&self.z_sticks)
            + self.prior.ln_tau_density(self.log_tau)
    }

    /// Log target density over the transformed coordinates: the natural
    /// posterior plus the logit and log Jacobians.
    pub fn log_target(&self) -> f64 {
        let jac: f64 = self
            .z_time
            .iter()
            .chain(&self.z_freq)
            .chain(&self.z_sticks)
            .map(|&z| logit_jacobian(z))
            .sum();
        self.log_posterior() + jac + self.log_tau
    }

    pub fn params(&self) -> SurfaceParams {
        let sticks: Vec<f64> = self.z_sticks.iter().map(|&z| sigmoid(z)).collect();
        let atoms: Vec<[f64; 2]> = self
            .z_time
            .iter()
            .zip(&self.z_freq)
            .map(|(&a, &b)| [sigmoid(a), sigmoid(b)])
            .collect();
        SurfaceParams {
            log_tau: self.log_tau,
            k1: self.k1,
            k2: self.k2,
            measure: StickBreakingMeasure::from_parts_unchecked(sticks, atoms),
            basis: self.prior.basis,
        }
    }

    /// Log posterior of the current parameters computed from scratch.
    pub fn recompute_log_posterior(&mut self) -> Result<f64> {
        let params = self.params();
        let ll = match self.evaluator.as_mut() {
            Some(ev) => ev.log_likelihood(&params)?,
            None => 0.0,
        };
        Ok(ll + log_prior(&params, &self.prior)?)
    }

    pub fn step_degree<R: Rng + ?Sized>(&mut self, which: Degree, rng: &mut R) -> bool {
        let sign = if rng.random::<bool>() { 1i64 } else { -1 };
        let jump = self.poisson.sample(rng) as i64;
        let slot = match which {
            Degree::Time => 0,
            Degree::Frequency => 1,
        };
        let current = match which {
            Degree::Time => self.k1,
            Degree::Frequency => self.k2,
        };
        let ok = self.try_degree(which, current as i64 + sign * jump, rng);
        self.counter.record(slot, ok);
        ok
    }

    fn try_degree<R: Rng + ?Sized>(&mut self, which: Degree, proposal: i64, rng: &mut R) -> bool {
        let current = match which {
            Degree::Time => self.k1,
            Degree::Frequency => self.k2,
        };
        if proposal < 1 || proposal as usize > self.prior.k_max {
            return false;
        }
        let k = proposal as usize;
        if k == current {
            return true;
        }
        let (k1, k2) = match which {
            Degree::Time => (k, self.k2),
            Degree::Frequency => (self.k1, k),
        };
        let bins = bins_for(k1, k2, &self.z_time, &self.z_freq);
        let weights = std::mem::take(&mut self.weights);
        let stats = self.surface_stats(k1, k2, &weights, &bins);
        self.weights = weights;
        let Ok(stats) = stats else { return false };
        let old = self.log_likelihood() + self.rho.ln_pmf(current);
        let new = self.lik(&stats, self.log_tau) + self.rho.ln_pmf(k);
        if accept(new - old, rng) {
            match which {
                Degree::Time => self.k1 = k,
                Degree::Frequency => self.k2 = k,
            }
            self.bins = bins;
            self.stats = stats;
            true
        } else {
            false
        }
    }

    fn lik(&self, stats: &WhittleStats, ln_tau: f64) -> f64 {
        if self.evaluator.is_none() {
            0.0
        } else {
            stats.log_likelihood(ln_tau)
        }
    }

    fn block_coords(&self, block: Block) -> &[f64] {
        match block {
            Block::TimeAtoms => &self.z_time,
            Block::FrequencyAtoms => &self.z_freq,
            Block::Sticks => &self.z_sticks,
        }
    }

    /// Log target terms that depend on the block's own coordinates.
    fn block_prior(&self, block: Block, z: &[f64]) -> f64 {
        let jac: f64 = z.iter().map(|&v| logit_jacobian(v)).sum();
        match block {
            Block::Sticks => jac + self.sticks_term(z),
            _ => jac,
        }
    }

    /// Adaptive random-walk update of one block; `iteration` is the 1-based
    /// sweep index used by the adaptation schedule.
    pub fn step_block<R: Rng + ?Sized>(&mut self, block: Block, iteration: usize, rng: &mut R) -> bool {
        let i = block_slot(block) - 2;
        let mut z = std::mem::take(&mut self.scratch_z);
        let current = self.block_coords(block).to_vec();
        self.proposals[i].propose(&current, iteration, rng, &mut z);
        let ok = self.try_block(block, &z, rng);
        self.scratch_z = z;
        self.counter.record(block_slot(block), ok);
        let coords = self.block_coords(block).to_vec();
        self.proposals[i].observe(&coords);
        ok
    }

    /// Metropolis-Hastings decision for moving `block` to logit coordinates `z`.
    pub fn try_block<R: Rng + ?Sized>(&mut self, block: Block, z: &[f64], rng: &mut R) -> bool {
        let (k1, k2) = (self.k1, self.k2);
        let mut bins = std::mem::take(&mut self.scratch_bins);
        let mut weights = std::mem::take(&mut self.scratch_weights);
        bins.clear();
        weights.clear();
        match block {
            Block::TimeAtoms => {
                bins.extend(z.iter().zip(&self.bins).map(|(&a, &(_, j2))| (bin_index(k1, sigmoid(a)), j2)));
                weights.extend_from_slice(&self.weights);
            }
            Block::FrequencyAtoms => {
                bins.extend(z.iter().zip(&self.bins).map(|(&b, &(j1, _))| (j1, bin_index(k2, sigmoid(b)))));
                weights.extend_from_slice(&self.weights);
            }
            Block::Sticks => {
                bins.extend_from_slice(&self.bins);
                weights.extend(sticks_to_weights(z));
            }
        }
        let unchanged_surface = bins == self.bins && weights == self.weights;
        let stats = if unchanged_surface {
            Ok(self.stats)
        } else {
            self.surface_stats(k1, k2, &weights, &bins)
        };
        let ok = match stats {
            Ok(stats) => {
                let old = self.log_likelihood() + self.block_prior(block, self.block_coords(block));
                let new = self.lik(&stats, self.log_tau) + self.block_prior(block, z);
                if accept(new - old, rng) {
                    match block {
                        Block::TimeAtoms => self.z_time.copy_from_slice(z),
                        Block::FrequencyAtoms => self.z_freq.copy_from_slice(z),
                        Block::Sticks => self.z_sticks.copy_from_slice(z),
                    }
                    std::mem::swap(&mut self.bins, &mut bins);
                    std::mem::swap(&mut self.weights, &mut weights);
                    self.stats = stats;
                    true
                } else {
                    false
                }
            }
            Err(_) => false,
        };
        self.scratch_bins = bins;
        self.scratch_weights = weights;
        ok
    }

    /// Uniform random walk on `ln tau` with the current width.
    pub fn step_tau<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let u: f64 = rng.random();
        let proposal = self.log_tau + (u - 0.5) * self.tau_width();
        let ok = self.try_tau(proposal, rng);
        self.counter.record(5, ok);
        ok
    }

    fn try_tau<R: Rng + ?Sized>(&mut self, ln_tau: f64, rng: &mut R) -> bool {
        let target = |s: &Self, l: f64| s.lik(&s.stats, l) + s.prior.ln_tau_density(l) + l;
        let ratio = target(self, ln_tau) - target(self, self.log_tau);
        if accept(ratio, rng) {
            self.log_tau = ln_tau;
            true
        } else {
            false
        }
    }

    /// One Robbins-Monro update of the `ln tau` width after sweep `iteration`.
    fn adapt_tau_width(&mut self, iteration: usize, accepted: bool, target: f64) {
        let gamma = (iteration as f64).powf(-TAU_WIDTH_DECAY);
        self.ln_tau_width += gamma * (accepted as u8 as f64 - target);
    }

    fn freeze(&mut self) {
        for p in &mut self.proposals {
            p.freeze();
        }
    }

    pub fn acceptance_rates(&self) -> AcceptanceRates {
        self.counter.rates()
    }

    fn reset_counters(&mut self) {
        self.counter = Counter::default();
    }
}

fn sticks_to_weights(z: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = z.iter().map(|&x| sigmoid(x)).collect();
    stick_weights_unchecked(&v)
}

fn bins_for(k1: usize, k2: usize, z_time: &[f64], z_freq: &[f64]) -> Vec<(usize, usize)> {
    z_time
        .iter()
        .zip(z_freq)
        .map(|(&a, &b)| (bin_index(k1, sigmoid(a)), bin_index(k2, sigmoid(b))))
        .collect()
}

/// One retained posterior draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub params: SurfaceParams,
    pub log_posterior: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub iteration: usize,
    pub n_iter: usize,
    pub log_posterior: f64,
    pub acceptance: AcceptanceRates,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub draws: Vec<Draw>,
    /// Acceptance rates over the post-burn-in sweeps.
    pub acceptance: AcceptanceRates,
    /// Acceptance rates during burn-in.
    pub burn_in_acceptance: AcceptanceRates,
    pub tau_width: f64,
    pub truncation_level: usize,
    pub runtime_seconds: f64,
}

/// Run one chain for `cfg.n_iter` sweeps, seeded from `cfg.seed` and
/// `cfg.stream`. Adaptation stops after burn-in.
pub fn run_chain(
    periodograms: &MovingPeriodogramSet,
    grid: &LikelihoodGrid,
    prior: &PriorConfig,
    cfg: &SamplerConfig,
    mut progress: Option<&mut dyn FnMut(&Progress)>,
) -> Result<ChainOutput> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(cfg.stream);
    let mut state = ChainState::initialize(periodograms, grid, prior, cfg, &mut rng)?;
    let mut draws = Vec::with_capacity(cfg.retained());
    let mut burn_in_acceptance = state.acceptance_rates();
    if cfg.burn_in == 0 {
        state.freeze();
    }
    for it in 1..=cfg.n_iter {
        state.step_degree(Degree::Time, &mut rng);
        state.step_degree(Degree::Frequency, &mut rng);
        state.step_block(Block::TimeAtoms, it, &mut rng);
        state.step_block(Block::FrequencyAtoms, it, &mut rng);
        state.step_block(Block::Sticks, it, &mut rng);
        let tau_ok = state.step_tau(&mut rng);
        if it <= cfg.burn_in {
            state.adapt_tau_width(it, tau_ok, cfg.tau_target_accept);
        }
        if it == cfg.burn_in {
            state.freeze();
            burn_in_acceptance = state.acceptance_rates();
            state.reset_counters();
        }
        if it > cfg.burn_in && (it - cfg.burn_in).is_multiple_of(cfg.mcmc_thin) {
            draws.push(Draw {
                params: state.params(),
                log_posterior: state.log_posterior(),
            });
        }
        if let Some(hook) = progress.as_mut() {
            if cfg.progress_every > 0 && (it % cfg.progress_every == 0 || it == cfg.n_iter) {
                hook(&Progress {
                    iteration: it,
                    n_iter: cfg.n_iter,
                    log_posterior: state.log_posterior(),
                    acceptance: state.acceptance_rates(),
                });
            }
        }
    }
    Ok(ChainOutput {
        draws,
        acceptance: state.acceptance_rates(),
        burn_in_acceptance,
        tau_width: state.tau_width(),
        truncation_level: state.level(),
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}
