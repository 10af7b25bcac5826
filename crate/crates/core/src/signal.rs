//! Time-series containers, the simulation models used for validation and
//! their closed-form time-varying spectral densities.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Pareto, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, SpectralSurface};

/// An ordered sequence of finite real observations, `N >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("time series must contain at least one value"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data {
                row: i + 1,
                message: format!("non-finite value {}", values[i]),
            });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.values
    }
}

/// Innovation families. Every family is standardized to zero mean and unit
/// variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Innovation {
    /// (a) standard normal.
    Gaussian,
    /// (b) Student's t with 3 degrees of freedom, divided by sqrt(3).
    StudentT3,
    /// (c) Pareto with scale 1 and shape 4, centred and scaled.
    Pareto,
}

const PARETO_SHAPE: f64 = 4.0;
const PARETO_SCALE: f64 = 1.0;

/// Mean of Pareto(scale 1, shape 4): `shape * scale / (shape - 1)`.
pub const PARETO_MEAN: f64 = PARETO_SHAPE * PARETO_SCALE / (PARETO_SHAPE - 1.0);

/// Standard deviation of Pareto(scale 1, shape 4).
pub fn pareto_sd() -> f64 {
    let a = PARETO_SHAPE;
    (PARETO_SCALE * PARETO_SCALE * a / ((a - 1.0) * (a - 1.0) * (a - 2.0))).sqrt()
}

/// Divisor that standardizes a t_3 draw (variance nu / (nu - 2) = 3).
pub fn student_t3_sd() -> f64 {
    3f64.sqrt()
}

impl Innovation {
    /// Short code used on the command line: `a`, `b` or `c`.
    pub fn code(self) -> char {
        match self {
            Innovation::Gaussian => 'a',
            Innovation::StudentT3 => 'b',
            Innovation::Pareto => 'c',
        }
    }

    /// Fourth moment `E[eps^4]`, infinite for the heavy-tailed families.
    pub fn fourth_moment(self) -> f64 {
        match self {
            Innovation::Gaussian => 3.0,
            Innovation::StudentT3 | Innovation::Pareto => f64::INFINITY,
        }
    }
}

impl FromStr for Innovation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" | "gaussian" | "normal" => Ok(Innovation::Gaussian),
            "b" | "t3" | "student-t3" | "student-t3-standardized" => Ok(Innovation::StudentT3),
            "c" | "pareto" | "pareto-standardized" => Ok(Innovation::Pareto),
            other => Err(Error::invalid(format!(
                "unknown innovation '{other}', expected one of a, b, c"
            ))),
        }
    }
}

/// Draw one standardized innovation.
pub fn sample_innovation<R: Rng + ?Sized>(kind: Innovation, rng: &mut R) -> f64 {
    match kind {
        Innovation::Gaussian => StandardNormal.sample(rng),
        Innovation::StudentT3 => {
            let t: f64 = StudentT::new(3.0).expect("valid dof").sample(rng);
            t / student_t3_sd()
        }
        Innovation::Pareto => {
            let x: f64 = Pareto::new(PARETO_SCALE, PARETO_SHAPE)
                .expect("valid pareto")
                .sample(rng);
            (x - PARETO_MEAN) / pareto_sd()
        }
    }
}

/// The simulation models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dgp {
    /// tvMA(2), slowly varying first coefficient.
    LS1,
    /// tvMA(1), fast oscillating coefficient.
    LS2,
    /// tvAR(1) with linear coefficient.
    LS3,
    /// Piecewise stationary AR(1).
    PS1,
    /// Stationary ARMA(1,1).
    S1,
    /// Stationary MA(2).
    S2,
}

impl Dgp {
    pub const ALL: [Dgp; 6] = [Dgp::LS1, Dgp::LS2, Dgp::LS3, Dgp::PS1, Dgp::S1, Dgp::S2];

    pub fn name(self) -> &'static str {
        match self {
            Dgp::LS1 => "LS1",
            Dgp::LS2 => "LS2",
            Dgp::LS3 => "LS3",
            Dgp::PS1 => "PS1",
            Dgp::S1 => "S1",
            Dgp::S2 => "S2",
        }
    }

    pub fn is_stationary(self) -> bool {
        matches!(self, Dgp::S1 | Dgp::S2)
    }

    /// Filter coefficients at rescaled time `u`.
    pub fn coefficients(self, u: f64) -> Arma {
        match self {
            Dgp::LS1 => Arma {
                ar: 0.0,
                ma: [1.122 * (1.0 - 1.718 * (PI / 2.0 * u).sin()), -0.81],
            },
            Dgp::LS2 => Arma {
                ar: 0.0,
                ma: [1.1 * (1.5 - (4.0 * PI * u).cos()).cos(), 0.0],
            },
            Dgp::LS3 => Arma {
                ar: 1.2 * u - 0.6,
                ma: [0.0, 0.0],
            },
            Dgp::PS1 => Arma {
                ar: if u <= 0.5 { -0.5 } else { 0.5 },
                ma: [0.0, 0.0],
            },
            Dgp::S1 => Arma {
                ar: 0.75,
                ma: [0.8, 0.0],
            },
            Dgp::S2 => Arma {
                ar: 0.0,
                ma: [-0.36, 0.85],
            },
        }
    }
}

impl fmt::Display for Dgp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dgp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        // accept the innovation-suffixed names too, e.g. "LS1a"
        let upper = s.to_ascii_uppercase();
        let base = upper.trim_end_matches(['A', 'B', 'C']);
        let base = if base.is_empty() { upper.as_str() } else { base };
        Dgp::ALL
            .into_iter()
            .find(|d| d.name() == base || d.name() == upper)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown DGP '{s}', expected one of LS1, LS2, LS3, PS1, S1, S2"
                ))
            })
    }
}

/// ARMA(1, 2) filter `X_t = ar X_{t-1} + w_t + ma[0] w_{t-1} + ma[1] w_{t-2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arma {
    pub ar: f64,
    pub ma: [f64; 2],
}

impl Arma {
    /// Spectral density of the filter driven by unit-variance white noise,
    /// at angular frequency `pi * lambda`.
    pub fn spectral_density(&self, lambda: f64) -> f64 {
        let z = Complex64::from_polar(1.0, -PI * lambda);
        let ma = Complex64::new(1.0, 0.0) + z * self.ma[0] + z * z * self.ma[1];
        let ar = Complex64::new(1.0, 0.0) - z * self.ar;
        ma.norm_sqr() / ar.norm_sqr() / (2.0 * PI)
    }
}

/// A simulation request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub model: Dgp,
    pub innovation: Innovation,
    pub len: usize,
}

/// Number of innovations drawn before `t = 1` so that MA terms are defined.
pub const PRE_PERIOD: usize = 2;

/// Simulate `spec.len` observations with fresh innovations.
pub fn simulate_dgp<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> Result<TimeSeries> {
    if spec.len == 0 {
        return Err(Error::invalid("series length must be at least 1"));
    }
    let w: Vec<f64> = (0..spec.len + PRE_PERIOD)
        .map(|_| sample_innovation(spec.innovation, rng))
        .collect();
    simulate_with_innovations(spec.model, &w)
}

/// Run the recursion of `model` on a given innovation stream. `w[0]` and
/// `w[1]` are the pre-period innovations `w_{-1}`, `w_0`; the output has
/// `w.len() - 2` samples. The AR part starts from `X_0 = 0`.
pub fn simulate_with_innovations(model: Dgp, w: &[f64]) -> Result<TimeSeries> {
    if w.len() <= PRE_PERIOD {
        return Err(Error::invalid(format!(
            "need more than {PRE_PERIOD} innovations, got {}",
            w.len()
        )));
    }
    let n = w.len() - PRE_PERIOD;
    let half = n / 2;
    let mut out = Vec::with_capacity(n);
    let mut prev = 0.0;
    for t in 1..=n {
        let u = t as f64 / n as f64;
        let mut c = model.coefficients(u);
        if model == Dgp::PS1 {
            // indicator on the integer index, t <= floor(T/2)
            c.ar = if t <= half { -0.5 } else { 0.5 };
        }
        let i = t + PRE_PERIOD - 1;
        let x = c.ar * prev + w[i] + c.ma[0] * w[i - 1] + c.ma[1] * w[i - 2];
        out.push(x);
        prev = x;
    }
    TimeSeries::new(out)
}

/// Closed-form tv-PSD `f(u, lambda)` of `model` with unit-variance innovations.
pub fn true_tv_psd(model: Dgp, u: f64, lambda: f64) -> f64 {
    model.coefficients(u).spectral_density(lambda)
}

/// The true tv-PSD of a model as an evaluable surface.
#[derive(Debug, Clone, Copy)]
pub struct TrueSurface(pub Dgp);

impl SpectralSurface for TrueSurface {
    fn value(&self, u: f64, lambda: f64) -> f64 {
        true_tv_psd(self.0, u, lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn innovations_are_standardized() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g: Vec<f64> = (0..1_000_000)
            .map(|_| sample_innovation(Innovation::Gaussian, &mut rng))
            .collect();
        let (m, v) = moments(&g);
        assert!(m.abs() < 0.01 && (v - 1.0).abs() < 0.02, "{m} {v}");

        // heavy tails: variance converges slowly, use a looser band
        for kind in [Innovation::StudentT3, Innovation::Pareto] {
            let xs: Vec<f64> = (0..1_000_000).map(|_| sample_innovation(kind, &mut rng)).collect();
            let (m, v) = moments(&xs);
            assert!(m.abs() < 0.02, "{kind:?} mean {m}");
            assert!((v - 1.0).abs() < 0.15, "{kind:?} var {v}");
        }
    }

    #[test]
    fn pareto_constants_match_monte_carlo() {
        assert!((PARETO_MEAN - 4.0 / 3.0).abs() < 1e-15);
        assert!((pareto_sd() - (2.0f64 / 9.0).sqrt()).abs() < 1e-15);
        assert!((pareto_sd() - 0.4714).abs() < 1e-4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dist = Pareto::new(1.0, 4.0).unwrap();
        let raw: Vec<f64> = (0..2_000_000).map(|_| dist.sample(&mut rng)).collect();
        let (m, v) = moments(&raw);
        assert!((m - PARETO_MEAN).abs() < 2e-3, "{m}");
        assert!((v.sqrt() - pareto_sd()).abs() < 0.02, "{}", v.sqrt());
    }

    #[test]
    fn t3_divisor_matches_monte_carlo() {
        assert!((student_t3_sd() - 1.7321).abs() < 1e-4);
        // variance of t_nu is nu / (nu - 2); check with nu = 5 where the
        // Monte Carlo estimate is stable, then the formula at nu = 3
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t5 = StudentT::new(5.0).unwrap();
        let xs: Vec<f64> = (0..2_000_000).map(|_| t5.sample(&mut rng)).collect();
        let (_, v) = moments(&xs);
        assert!((v - 5.0 / 3.0).abs() < 0.05, "{v}");
        assert_eq!(3.0 / (3.0 - 2.0), student_t3_sd().powi(2).round());
    }

    #[test]
    fn ls3_with_zero_innovations_is_zero() {
        let s = simulate_with_innovations(Dgp::LS3, &vec![0.0; 102]).unwrap();
        assert_eq!(s.len(), 100);
        assert!(s.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn ls1_unit_innovations_at_end() {
        let n = 40;
        let s = simulate_with_innovations(Dgp::LS1, &vec![1.0; n + 2]).unwrap();
        let last = *s.values().last().unwrap();
        assert!((last - -0.615596).abs() < 1e-12, "{last}");
    }

    #[test]
    fn s2_lag3_autocovariance_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let spec = DgpSpec {
            model: Dgp::S2,
            innovation: Innovation::Gaussian,
            len: 1_000_000,
        };
        let x = simulate_dgp(&spec, &mut rng).unwrap();
        let v = x.values();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let acov = v
            .windows(4)
            .map(|w| (w[0] - mean) * (w[3] - mean))
            .sum::<f64>()
            / v.len() as f64;
        assert!(acov.abs() < 0.01, "{acov}");
    }

    #[test]
    fn simulation_is_reproducible() {
        let spec = DgpSpec {
            model: Dgp::LS2,
            innovation: Innovation::Pareto,
            len: 500,
        };
        let a = simulate_dgp(&spec, &mut ChaCha8Rng::seed_from_u64(200)).unwrap();
        let b = simulate_dgp(&spec, &mut ChaCha8Rng::seed_from_u64(200)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 500);
    }

    #[test]
    fn ps1_switches_at_floor_half() {
        // unit impulse at t = 1 only; AR sign flips after floor(T/2)
        let n = 7;
        let mut w = vec![0.0; n + 2];
        w[2] = 1.0;
        let x = simulate_with_innovations(Dgp::PS1, &w).unwrap();
        let v = x.values();
        // t = 2, 3 use -0.5; t = 4.. use +0.5
        assert_eq!(v[1], -0.5);
        assert_eq!(v[2], 0.25);
        assert_eq!(v[3], 0.125);
    }

    #[test]
    fn white_noise_density() {
        let white = Arma { ar: 0.0, ma: [0.0, 0.0] };
        for l in [0.0, 0.3, 1.0] {
            assert!((white.spectral_density(l) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        }
        for l in [0.0, 0.17, 0.5, 0.99] {
            let f = true_tv_psd(Dgp::LS3, 0.5, l);
            assert!((f - 0.159155).abs() < 1e-6, "{f}");
        }
    }

    #[test]
    fn true_psd_positive_and_stationary_models_flat_in_time() {
        for d in Dgp::ALL {
            for i in 0..=100 {
                for j in 0..=100 {
                    let (u, l) = (i as f64 / 100.0, j as f64 / 100.0);
                    let f = true_tv_psd(d, u, l);
                    assert!(f > f64::MIN_POSITIVE && f.is_finite(), "{d} {u} {l} {f}");
                    if d.is_stationary() {
                        assert_eq!(f, true_tv_psd(d, 0.0, l));
                    }
                }
            }
        }
    }

    #[test]
    fn ls2_at_origin_matches_long_run_periodogram() {
        // stationary MA(1) frozen at u = 0; average the raw periodogram at
        // the lowest Fourier frequencies over many replicates
        let theta = 1.1 * 0.5f64.cos();
        let exact = (1.0 + theta).powi(2) / (2.0 * PI);
        assert!((exact - true_tv_psd(Dgp::LS2, 0.0, 0.0)).abs() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 401;
        let reps = 400;
        let mut acc = 0.0;
        let mut count = 0.0;
        for _ in 0..reps {
            let w: Vec<f64> = (0..n + 1)
                .map(|_| sample_innovation(Innovation::Gaussian, &mut rng))
                .collect();
            let x: Vec<f64> = (0..n).map(|t| w[t + 1] + theta * w[t]).collect();
            for j in 1..=2 {
                let om = 2.0 * PI * j as f64 / n as f64;
                let (mut re, mut im) = (0.0, 0.0);
                for (t, xt) in x.iter().enumerate() {
                    re += xt * (om * t as f64).cos();
                    im -= xt * (om * t as f64).sin();
                }
                acc += (re * re + im * im) / (2.0 * PI * n as f64);
                count += 1.0;
            }
        }
        let est = acc / count;
        assert!((est / exact - 1.0).abs() < 0.1, "{est} vs {exact}");
    }

    #[test]
    fn ls3_mid_variance_is_one() {
        // at u = 0.5 the AR coefficient vanishes; coefficients near the
        // midpoint are O(1/T) so the variance is the innovation variance
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let spec = DgpSpec {
            model: Dgp::LS3,
            innovation: Innovation::Gaussian,
            len: 1000,
        };
        let reps = 20_000;
        let xs: Vec<f64> = (0..reps)
            .map(|_| simulate_dgp(&spec, &mut rng).unwrap().values()[499])
            .collect();
        let (_, v) = moments(&xs);
        let se = (2.0 / reps as f64).sqrt();
        assert!((v - 1.0).abs() < 3.0 * se, "{v}");
    }

    #[test]
    fn dgp_names_parse() {
        assert_eq!("ls1a".parse::<Dgp>().unwrap(), Dgp::LS1);
        assert_eq!("S2".parse::<Dgp>().unwrap(), Dgp::S2);
        assert_eq!("PS1".parse::<Dgp>().unwrap(), Dgp::PS1);
        assert!("XX".parse::<Dgp>().is_err());
        assert_eq!("c".parse::<Innovation>().unwrap(), Innovation::Pareto);
    }
}
