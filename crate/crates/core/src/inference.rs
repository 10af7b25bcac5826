//! Posterior summaries, the Savage-Dickey Bayes factor and the ASE metric.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::prior::{prior_prob_k1_equals_1, PriorConfig};
use crate::sampler::Draw;
use crate::surface::{truncated_beta_density, BasisTable, BetaBasisConfig, SurfaceParams};
use crate::{Error, Result, SpectralSurface};

/// `n` equally spaced points on `[0, 1]` including both ends.
pub fn linspace(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Internal rescaled time for an original-axis rescaled time `v`:
/// `clamp((v N - m) / T, 0, 1)` with `T = N - 2m`. Times within `m` samples
/// of either end share the boundary value.
pub fn boundary_map(v: f64, original_len: usize, m: usize) -> f64 {
    let t_eff = (original_len - 2 * m) as f64;
    ((v * original_len as f64 - m as f64) / t_eff).clamp(0.0, 1.0)
}

/// Median, averaging the two middle values for an even count. Reorders `xs`.
pub fn median(xs: &mut [f64]) -> f64 {
    let n = xs.len();
    assert!(n > 0, "median of an empty sample");
    let (_, hi, _) = xs.select_nth_unstable_by(n / 2, f64::total_cmp);
    let hi = *hi;
    if n % 2 == 1 {
        hi
    } else {
        let lo = xs[..n / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Nearest-rank quantile: the `ceil(p n)`-th smallest value (at least the
/// first). Reorders `xs`.
pub fn nearest_rank(xs: &mut [f64], p: f64) -> f64 {
    let n = xs.len();
    assert!(n > 0, "quantile of an empty sample");
    let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
    *xs.select_nth_unstable_by(rank - 1, f64::total_cmp).1
}

/// Pointwise summaries on a rectangular grid, stored row-major with time as
/// the row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub time_grid: Vec<f64>,
    pub freq_grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub q05: Vec<f64>,
    pub q95: Vec<f64>,
    pub k1_pmf: Vec<f64>,
    pub k2_pmf: Vec<f64>,
    pub bayes_factor_01: f64,
}

impl PosteriorSummary {
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.freq_grid.len() + j
    }
}

/// Basis tables for every degree present in the draws, on one point set.
struct DegreeTables {
    tables: BTreeMap<usize, BasisTable>,
}

impl DegreeTables {
    fn new(points: &[f64], degrees: impl IntoIterator<Item = usize>, basis: &BetaBasisConfig) -> Self {
        let tables = degrees
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(|k| (k, BasisTable::new(points, k, basis)))
            .collect();
        Self { tables }
    }

    fn get(&self, k: usize) -> &BasisTable {
        &self.tables[&k]
    }
}

fn check_draws(draws: &[Draw]) -> Result<&BetaBasisConfig> {
    let first = draws
        .first()
        .ok_or_else(|| Error::invalid("posterior summaries need at least one draw"))?;
    if draws.iter().any(|d| d.params.basis != first.params.basis) {
        return Err(Error::invalid("draws use different basis configurations"));
    }
    Ok(&first.params.basis)
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(format!("{name} grid is empty")));
    }
    if let Some(x) = grid.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::invalid(format!("{name} grid value {x} outside [0, 1]")));
    }
    Ok(())
}

/// Degree pmf over `1..=k_max` from the retained draws.
pub fn degree_pmf(draws: &[Draw], k_max: usize, which: impl Fn(&SurfaceParams) -> usize) -> Vec<f64> {
    let mut counts = vec![0.0; k_max];
    for d in draws {
        let k = which(&d.params);
        if (1..=k_max).contains(&k) {
            counts[k - 1] += 1.0;
        }
    }
    let n = draws.len() as f64;
    counts.iter().map(|c| c / n).collect()
}

/// Savage-Dickey estimate of the Bayes factor of `{k1 = 1}` against the
/// full model: posterior frequency of `k1 = 1` over its prior probability.
pub fn savage_dickey_bf(draws: &[Draw], prior: &PriorConfig) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::invalid("Bayes factor needs at least one draw"));
    }
    let hits = draws.iter().filter(|d| d.params.k1 == 1).count();
    Ok(hits as f64 / draws.len() as f64 / prior_prob_k1_equals_1(prior)?)
}

/// Evaluate every draw on the grid `(boundary_map(v), lambda)` and reduce
/// pointwise. Rows are processed in parallel; each row is reduced in a fixed
/// order, so results do not depend on the thread count.
pub fn summarize(
    draws: &[Draw],
    time_grid: &[f64],
    freq_grid: &[f64],
    original_len: usize,
    m: usize,
    prior: &PriorConfig,
) -> Result<PosteriorSummary> {
    let basis = check_draws(draws)?;
    check_grid("time", time_grid)?;
    check_grid("frequency", freq_grid)?;
    if original_len < 2 * m + 1 {
        return Err(Error::invalid(format!(
            "original length {original_len} too short for m = {m}"
        )));
    }
    let us: Vec<f64> = time_grid.iter().map(|&v| boundary_map(v, original_len, m)).collect();
    let time_tables = DegreeTables::new(&us, draws.iter().map(|d| d.params.k1), basis);
    let freq_tables = DegreeTables::new(freq_grid, draws.iter().map(|d| d.params.k2), basis);
    let nf = freq_grid.len();
    let nd = draws.len();

    let rows: Vec<[Vec<f64>; 4]> = (0..us.len())
        .into_par_iter()
        .map(|i| {
            // values[j * nd + d]: draw d at frequency j
            let mut values = vec![0.0; nf * nd];
            let mut coef = Vec::new();
            for (d, draw) in draws.iter().enumerate() {
                let p = &draw.params;
                let trow = time_tables.get(p.k1).row(i);
                let ft = freq_tables.get(p.k2);
                coef.clear();
                coef.resize(p.k2, 0.0);
                for ((j1, j2), w) in p.atom_bins().zip(p.measure.weights()) {
                    coef[j2 - 1] += w * trow[j1 - 1];
                }
                let tau = p.tau();
                for j in 0..nf {
                    let frow = ft.row(j);
                    let b: f64 = coef.iter().zip(frow).map(|(c, f)| c * f).sum();
                    values[j * nd + d] = tau * b;
                }
            }
            let mut out = [
                Vec::with_capacity(nf),
                Vec::with_capacity(nf),
                Vec::with_capacity(nf),
                Vec::with_capacity(nf),
            ];
            for col in values.chunks_mut(nd) {
                out[0].push(col.iter().sum::<f64>() / nd as f64);
                out[1].push(median(col));
                out[2].push(nearest_rank(col, 0.05));
                out[3].push(nearest_rank(col, 0.95));
            }
            out
        })
        .collect();

    let mut summary = PosteriorSummary {
        time_grid: time_grid.to_vec(),
        freq_grid: freq_grid.to_vec(),
        mean: Vec::with_capacity(us.len() * nf),
        median: Vec::with_capacity(us.len() * nf),
        q05: Vec::with_capacity(us.len() * nf),
        q95: Vec::with_capacity(us.len() * nf),
        k1_pmf: degree_pmf(draws, prior.k_max, |p| p.k1),
        k2_pmf: degree_pmf(draws, prior.k_max, |p| p.k2),
        bayes_factor_01: savage_dickey_bf(draws, prior)?,
    };
    for [mean, med, lo, hi] in rows {
        summary.mean.extend(mean);
        summary.median.extend(med);
        summary.q05.extend(lo);
        summary.q95.extend(hi);
    }
    Ok(summary)
}

/// Posterior mean surface on the internal time axis, stored as
/// `tau`-weighted bin masses averaged over draws for each degree pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMean {
    basis: BetaBasisConfig,
    terms: Vec<MeanTerm>,
}

#[derive(Debug, Clone, PartialEq)]
struct MeanTerm {
    k1: usize,
    k2: usize,
    /// Row-major `k1 x k2`.
    coef: Vec<f64>,
}

impl PosteriorMean {
    pub fn new(draws: &[Draw]) -> Result<Self> {
        let basis = *check_draws(draws)?;
        let n = draws.len() as f64;
        let mut map: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        for d in draws {
            let p = &d.params;
            let coef = map.entry((p.k1, p.k2)).or_insert_with(|| vec![0.0; p.k1 * p.k2]);
            let tau = p.tau();
            for ((j1, j2), w) in p.atom_bins().zip(p.measure.weights()) {
                coef[(j1 - 1) * p.k2 + (j2 - 1)] += tau * w / n;
            }
        }
        let terms = map
            .into_iter()
            .map(|((k1, k2), coef)| MeanTerm { k1, k2, coef })
            .collect();
        Ok(Self { basis, terms })
    }

    /// Values on the grid `us x lambdas`, row-major with time as the row.
    pub fn evaluate_grid(&self, us: &[f64], lambdas: &[f64]) -> Vec<f64> {
        let nf = lambdas.len();
        let mut out = vec![0.0; us.len() * nf];
        for term in &self.terms {
            let tt = BasisTable::new(us, term.k1, &self.basis);
            let ft = BasisTable::new(lambdas, term.k2, &self.basis);
            out.par_chunks_mut(nf.max(1)).enumerate().for_each(|(i, row)| {
                let trow = tt.row(i);
                let mut a = vec![0.0; term.k2];
                for (j1, t) in trow.iter().enumerate() {
                    let c = &term.coef[j1 * term.k2..(j1 + 1) * term.k2];
                    for (aj, cj) in a.iter_mut().zip(c) {
                        *aj += cj * t;
                    }
                }
                for (j, v) in row.iter_mut().enumerate() {
                    *v += a.iter().zip(ft.row(j)).map(|(x, y)| x * y).sum::<f64>();
                }
            });
        }
        out
    }
}

impl SpectralSurface for PosteriorMean {
    fn value(&self, u: f64, lambda: f64) -> f64 {
        let mut total = 0.0;
        for term in &self.terms {
            let (k1, k2) = (term.k1 as u32, term.k2 as u32);
            let fb: Vec<f64> = (1..=k2)
                .map(|j| truncated_beta_density(lambda, j, k2 - j + 1, &self.basis).unwrap_or(f64::NAN))
                .collect();
            for j1 in 1..=k1 {
                let tb = truncated_beta_density(u, j1, k1 - j1 + 1, &self.basis).unwrap_or(f64::NAN);
                let c = &term.coef[(j1 as usize - 1) * term.k2..j1 as usize * term.k2];
                total += tb * c.iter().zip(&fb).map(|(x, y)| x * y).sum::<f64>();
            }
        }
        total
    }
}

/// Points of the ASE grid: times `t / T` for `t = 1..=T` and frequencies
/// `j / K` for `j = 0..=K`.
pub fn ase_grid(len: usize, k: usize) -> (Vec<f64>, Vec<f64>) {
    let times = (1..=len).map(|t| t as f64 / len as f64).collect();
    let freqs = (0..=k).map(|j| j as f64 / k as f64).collect();
    (times, freqs)
}

/// Average squared log difference of two row-major value grids over
/// `times x freqs`.
pub fn ase_on_grid(times: &[f64], freqs: &[f64], estimate: &[f64], truth: &[f64]) -> Result<f64> {
    let n = times.len() * freqs.len();
    if estimate.len() != n || truth.len() != n || n == 0 {
        return Err(Error::GridMismatch(format!(
            "{} estimate and {} truth values for a {} x {} grid",
            estimate.len(),
            truth.len(),
            times.len(),
            freqs.len()
        )));
    }
    let mut total = 0.0;
    for (i, (&e, &t)) in estimate.iter().zip(truth).enumerate() {
        for value in [e, t] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveSurface {
                    u: times[i / freqs.len()],
                    lambda: freqs[i % freqs.len()],
                    value,
                });
            }
        }
        total += (e.ln() - t.ln()).powi(2);
    }
    Ok(total / n as f64)
}

/// `(1 / (T (K + 1))) sum_t sum_j (ln f_hat - ln f_0)^2` over `t / T`,
/// `t = 1..=T`, and `j / K`, `j = 0..=K`.
pub fn ase<E, F>(estimate: &E, truth: &F, len: usize, k: usize) -> Result<f64>
where
    E: SpectralSurface + ?Sized,
    F: SpectralSurface + ?Sized,
{
    if len == 0 || k == 0 {
        return Err(Error::invalid("ASE needs T >= 1 and K >= 1"));
    }
    let (times, freqs) = ase_grid(len, k);
    let mut total = 0.0;
    for &u in &times {
        for &lambda in &freqs {
            let (e, t) = (estimate.value(u, lambda), truth.value(u, lambda));
            for value in [e, t] {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(Error::NonPositiveSurface { u, lambda, value });
                }
            }
            total += (e.ln() - t.ln()).powi(2);
        }
    }
    Ok(total / (times.len() * freqs.len()) as f64)
}

/// ASE of a posterior mean against a truth on the original time axis, with
/// the estimate read through [`boundary_map`]. Returns the value over all
/// `t = 1..=N` and over the interior `t = m + 1..=N - m`.
pub fn posterior_ase<F: SpectralSurface + ?Sized>(
    mean: &PosteriorMean,
    truth: &F,
    original_len: usize,
    m: usize,
    k: usize,
) -> Result<(f64, f64)> {
    let (times, freqs) = ase_grid(original_len, k);
    let us: Vec<f64> = times.iter().map(|&v| boundary_map(v, original_len, m)).collect();
    let est = mean.evaluate_grid(&us, &freqs);
    let truth_vals: Vec<f64> = times
        .iter()
        .flat_map(|&v| freqs.iter().map(move |&l| (v, l)))
        .map(|(v, l)| truth.value(v, l))
        .collect();
    let full = ase_on_grid(&times, &freqs, &est, &truth_vals)?;
    let nf = freqs.len();
    let interior = (m * nf)..((original_len - m) * nf);
    let inner = ase_on_grid(
        &times[m..original_len - m],
        &freqs,
        &est[interior.clone()],
        &truth_vals[interior],
    )?;
    Ok((full, inner))
}
