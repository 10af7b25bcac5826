//! Bernstein-Dirichlet prior hierarchy: degree pmf, stick-breaking measure
//! and an Inverse-Gamma scale.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::surface::{BetaBasisConfig, StickBreakingMeasure, SurfaceParams, MAX_DEGREE};
use crate::{Error, Result};

/// Support over which `P(k1 = 1)` is normalized for the Bayes factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DegreeNormalization {
    /// `rho` normalized over all positive integers. With the default decay
    /// this gives the ceiling 27.2808 reported for the method.
    #[default]
    Untruncated,
    /// `rho` normalized over `1..=k_max`, matching the sampled prior.
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    pub k_max: usize,
    /// `c` in `rho(k) ∝ exp(-c k ln k)`.
    pub degree_decay: f64,
    /// Dirichlet-process mass `M`; the base measure is uniform on the unit square.
    pub dp_mass: f64,
    /// Inverse-Gamma shape `alpha` of `tau`.
    pub tau_shape: f64,
    /// Inverse-Gamma scale `beta`, density `∝ tau^(-alpha-1) exp(-beta / tau)`.
    pub tau_rate: f64,
    pub basis: BetaBasisConfig,
    /// Overrides the truncation rule for `L` when set.
    pub truncation: Option<usize>,
    pub bayes_factor_normalization: DegreeNormalization,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            k_max: 100,
            degree_decay: 0.01,
            dp_mass: 1.0,
            tau_shape: 0.001,
            tau_rate: 0.001,
            basis: BetaBasisConfig::default(),
            truncation: None,
            bayes_factor_normalization: DegreeNormalization::Untruncated,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DEGREE).contains(&self.k_max) {
            return Err(Error::invalid(format!(
                "k_max must be in 1..={MAX_DEGREE}, got {}",
                self.k_max
            )));
        }
        for (name, v) in [
            ("degree_decay", self.degree_decay),
            ("dp_mass", self.dp_mass),
            ("tau_shape", self.tau_shape),
            ("tau_rate", self.tau_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.truncation == Some(0) {
            return Err(Error::invalid("truncation level L must be at least 1"));
        }
        self.basis.validate()
    }

    /// Unnormalized `ln rho(k) = -c k ln k`.
    pub fn ln_rho_unnormalized(&self, k: usize) -> f64 {
        let k = k as f64;
        -self.degree_decay * k * k.ln()
    }

    pub fn degree_prior(&self) -> DegreePrior {
        DegreePrior::new(self)
    }

    /// Dirichlet-process truncation level for a grid with `m` and
    /// `nominal_blocks` complete blocks: `max(20, ceil((m B)^(1/3)))`, unless
    /// overridden.
    pub fn truncation_level(&self, m: usize, nominal_blocks: usize) -> usize {
        self.truncation
            .unwrap_or_else(|| truncation_rule(m, nominal_blocks))
    }

    /// Inverse-Gamma log density of `tau`, written in `ln tau`.
    pub fn ln_tau_density(&self, ln_tau: f64) -> f64 {
        let (a, b) = (self.tau_shape, self.tau_rate);
        -(a + 1.0) * ln_tau - b * (-ln_tau).exp() + a * b.ln() - ln_gamma(a)
    }
}

pub fn truncation_rule(m: usize, nominal_blocks: usize) -> usize {
    let root = ((m * nominal_blocks) as f64).cbrt();
    // cbrt of a perfect cube can land a hair above the integer
    let rounded = root.round();
    let ceil = if (root - rounded).abs() < 1e-9 {
        rounded
    } else {
        root.ceil()
    };
    20.max(ceil as usize)
}

/// Normalized degree pmf on `1..=k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreePrior {
    ln_pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl DegreePrior {
    fn new(cfg: &PriorConfig) -> Self {
        let raw: Vec<f64> = (1..=cfg.k_max).map(|k| cfg.ln_rho_unnormalized(k)).collect();
        let ln_z = log_sum_exp(&raw);
        let ln_pmf: Vec<f64> = raw.iter().map(|r| r - ln_z).collect();
        let mut acc = 0.0;
        let cdf = ln_pmf
            .iter()
            .map(|l| {
                acc += l.exp();
                acc
            })
            .collect();
        Self { ln_pmf, cdf }
    }

    pub fn k_max(&self) -> usize {
        self.ln_pmf.len()
    }

    /// `ln rho(k)`, `-inf` outside the support.
    pub fn ln_pmf(&self, k: usize) -> f64 {
        if k == 0 || k > self.ln_pmf.len() {
            f64::NEG_INFINITY
        } else {
            self.ln_pmf[k - 1]
        }
    }

    pub fn pmf(&self) -> Vec<f64> {
        self.ln_pmf.iter().map(|l| l.exp()).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().expect("nonempty");
        let u: f64 = rng.random::<f64>() * total;
        self.cdf.partition_point(|c| *c <= u).min(self.cdf.len() - 1) + 1
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Upper bound on the number of terms when summing `rho` over all integers.
const MAX_SERIES_TERMS: usize = 100_000_000;

/// Prior probability of the stationary model `{k1 = 1}`; its reciprocal is
/// the largest attainable Savage-Dickey Bayes factor.
pub fn prior_prob_k1_equals_1(cfg: &PriorConfig) -> Result<f64> {
    cfg.validate()?;
    let z = match cfg.bayes_factor_normalization {
        DegreeNormalization::Truncated => (1..=cfg.k_max)
            .map(|k| cfg.ln_rho_unnormalized(k).exp())
            .sum::<f64>(),
        DegreeNormalization::Untruncated => {
            let mut z = 0.0;
            let mut k = 1;
            loop {
                let term = cfg.ln_rho_unnormalized(k).exp();
                z += term;
                if term < 1e-18 * z {
                    break z;
                }
                k += 1;
                if k > MAX_SERIES_TERMS {
                    return Err(Error::invalid(format!(
                        "degree prior with decay {} does not converge within {MAX_SERIES_TERMS} terms",
                        cfg.degree_decay
                    )));
                }
            }
        }
    };
    Ok(1.0 / z)
}

/// Log prior density of a parameter set on the natural scale:
/// `(M - 1) sum ln(1 - V_l) + L ln M + ln rho(k1) + ln rho(k2) + ln pi(tau)`.
/// The uniform base measure contributes zero.
pub fn log_prior(params: &SurfaceParams, cfg: &PriorConfig) -> Result<f64> {
    cfg.validate()?;
    let rho = cfg.degree_prior();
    for k in [params.k1, params.k2] {
        if k > cfg.k_max {
            return Err(Error::invalid(format!(
                "degree {k} exceeds k_max = {}",
                cfg.k_max
            )));
        }
    }
    let m = cfg.dp_mass;
    let sticks = params.measure.sticks();
    let dp = (m - 1.0) * sticks.iter().map(|v| (-v).ln_1p()).sum::<f64>()
        + sticks.len() as f64 * m.ln();
    Ok(dp + rho.ln_pmf(params.k1) + rho.ln_pmf(params.k2) + cfg.ln_tau_density(params.log_tau))
}

/// Draw `ln tau` from the Inverse-Gamma prior. Works in log space because
/// small shapes put most of the mass far outside the `f64` range.
pub fn sample_ln_tau<R: Rng + ?Sized>(cfg: &PriorConfig, rng: &mut R) -> f64 {
    // G ~ Gamma(a, 1) as Gamma(a + 1, 1) * U^(1/a); tau = beta / G
    let g1: f64 = Gamma::new(cfg.tau_shape + 1.0, 1.0)
        .expect("valid gamma")
        .sample(rng);
    let u: f64 = rng.random::<f64>();
    let ln_g = g1.ln() + (1.0 - u).ln() / cfg.tau_shape;
    cfg.tau_rate.ln() - ln_g
}

/// Draw a full parameter set from the prior. `L` follows the truncation rule
/// for `(m, nominal_blocks)` unless overridden in `cfg`.
pub fn sample_prior<R: Rng + ?Sized>(
    cfg: &PriorConfig,
    m: usize,
    nominal_blocks: usize,
    rng: &mut R,
) -> Result<SurfaceParams> {
    cfg.validate()?;
    let rho = cfg.degree_prior();
    let k1 = rho.sample(rng);
    let k2 = rho.sample(rng);
    let level = cfg.truncation_level(m, nominal_blocks);
    let stick = Beta::new(1.0, cfg.dp_mass).expect("valid beta");
    let sticks: Vec<f64> = (0..level)
        .map(|_| stick.sample(rng).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
        .collect();
    let atoms: Vec<[f64; 2]> = (0..=level)
        .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
        .collect();
    let measure = StickBreakingMeasure::new(sticks, atoms)?;
    SurfaceParams::from_log_tau(sample_ln_tau(cfg, rng), k1, k2, measure, cfg.basis)
}
