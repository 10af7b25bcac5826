//! Dynamic Whittle likelihood over moving periodogram ordinates, with
//! optional block thinning.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::periodogram::{mod_index, MovingPeriodogramSet};
use crate::surface::{BasisCache, BasisTable, BetaBasisConfig, SurfaceParams};
use crate::{Error, Result, SpectralSurface};

/// One likelihood term: ordinate `MI_t` against `f(t / T, lambda_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub t: usize,
    pub u: f64,
    pub j: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodGrid {
    pub thinning: usize,
    pub len: usize,
    pub m: usize,
    /// `ceil((T - m) / (i m))`, the count of complete blocks in the
    /// thinned definition. Used for the truncation rule.
    pub nominal_blocks: usize,
    /// Blocks actually generated, including a trailing partial block.
    pub blocks: usize,
    pub entries: Vec<GridEntry>,
}

impl LikelihoodGrid {
    pub fn len_entries(&self) -> usize {
        self.entries.len()
    }
}

/// Enumerate likelihood terms. Block `l = 1, 2, ...` covers
/// `t = i (l - 1) m + j` for `j = 1..m`; terms past `T` are dropped and
/// generation stops at the first block starting beyond `T`, so the final
/// observations are never left out. For `i = 1` the entries are exactly
/// `t = 1..T`.
pub fn build_grid(len: usize, m: usize, thinning: usize) -> Result<LikelihoodGrid> {
    if m == 0 {
        return Err(Error::invalid("half-window size m must be at least 1"));
    }
    if len < m {
        return Err(Error::invalid(format!(
            "effective length T = {len} is smaller than m = {m}"
        )));
    }
    if !(1..=3).contains(&thinning) {
        return Err(Error::invalid(format!(
            "thinning factor must be 1, 2 or 3, got {thinning}"
        )));
    }
    let width = (2 * m + 1) as f64;
    let stride = thinning * m;
    let mut entries = Vec::with_capacity(len / thinning + m);
    let mut blocks = 0;
    let mut start = 0;
    while start < len {
        blocks += 1;
        for j in 1..=m {
            let t = start + j;
            if t > len {
                break;
            }
            debug_assert_eq!(mod_index(t, m), j);
            entries.push(GridEntry {
                t,
                u: t as f64 / len as f64,
                j,
                lambda: 2.0 * j as f64 / width,
            });
        }
        start += stride;
    }
    Ok(LikelihoodGrid {
        thinning,
        len,
        m,
        nominal_blocks: (len - m).div_ceil(stride),
        blocks,
        entries,
    })
}

fn check_compatible(periodograms: &MovingPeriodogramSet, grid: &LikelihoodGrid) -> Result<()> {
    if grid.len != periodograms.len() || grid.m != periodograms.m() {
        return Err(Error::invalid(format!(
            "grid (T = {}, m = {}) does not match periodograms (T = {}, m = {})",
            grid.len,
            grid.m,
            periodograms.len(),
            periodograms.m()
        )));
    }
    Ok(())
}

/// `sum over entries of [-ln f(u, lambda_j) - MI_t / f(u, lambda_j)]`.
pub fn log_dynamic_whittle<S: SpectralSurface + ?Sized>(
    surface: &S,
    periodograms: &MovingPeriodogramSet,
    grid: &LikelihoodGrid,
) -> Result<f64> {
    check_compatible(periodograms, grid)?;
    let mut total = 0.0;
    for e in &grid.entries {
        let f = surface.value(e.u, e.lambda);
        let mi = periodograms.ordinate(e.t);
        let term = -f.ln() - mi / f;
        if !(f > 0.0 && term.is_finite()) {
            return Err(Error::Evaluation { t: e.t, j: e.j, f, mi });
        }
        total += term;
    }
    Ok(total)
}

/// Sufficient statistics of the likelihood for a fixed normalized surface
/// `b`: with `f = tau b`, `loglik = -n ln tau - sum ln b - (sum MI / b) / tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhittleStats {
    pub n: usize,
    pub sum_ln_b: f64,
    pub sum_ratio: f64,
}

impl WhittleStats {
    pub fn log_likelihood(&self, ln_tau: f64) -> f64 {
        -(self.n as f64) * ln_tau - self.sum_ln_b - self.sum_ratio * (-ln_tau).exp()
    }
}

/// Likelihood evaluator with basis values cached on the fixed grid points.
#[derive(Debug)]
pub struct WhittleEvaluator {
    ordinates: Vec<f64>,
    freq_index: Vec<usize>,
    time_cache: BasisCache,
    freq_cache: BasisCache,
    ts: Vec<usize>,
}

/// Degrees remembered per axis by the evaluator.
pub const BASIS_CACHE_CAPACITY: usize = 8;

impl WhittleEvaluator {
    pub fn new(
        periodograms: &MovingPeriodogramSet,
        grid: &LikelihoodGrid,
        basis: BetaBasisConfig,
    ) -> Result<Self> {
        check_compatible(periodograms, grid)?;
        basis.validate()?;
        let ordinates = grid
            .entries
            .iter()
            .map(|e| periodograms.ordinate(e.t))
            .collect();
        let freq_index = grid.entries.iter().map(|e| e.j - 1).collect();
        let times = grid.entries.iter().map(|e| e.u).collect();
        let freqs = periodograms.frequencies().to_vec();
        Ok(Self {
            ordinates,
            freq_index,
            time_cache: BasisCache::new(times, basis, BASIS_CACHE_CAPACITY),
            freq_cache: BasisCache::new(freqs, basis, BASIS_CACHE_CAPACITY),
            ts: grid.entries.iter().map(|e| e.t).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.ordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordinates.is_empty()
    }

    pub fn tables(&mut self, k1: usize, k2: usize) -> (Arc<BasisTable>, Arc<BasisTable>) {
        (self.time_cache.get(k1), self.freq_cache.get(k2))
    }

    /// Normalized surface `b` (without `tau`) at every grid entry, written
    /// into `out`.
    pub fn fill_surface(
        &mut self,
        k1: usize,
        k2: usize,
        weights: &[f64],
        bins: &[(usize, usize)],
        out: &mut Vec<f64>,
    ) {
        let (tt, ft) = self.tables(k1, k2);
        out.clear();
        out.extend(self.freq_index.iter().enumerate().map(|(e, &fi)| {
            let trow = tt.row(e);
            let frow = ft.row(fi);
            bins.iter()
                .zip(weights)
                .map(|(&(j1, j2), p)| p * trow[j1 - 1] * frow[j2 - 1])
                .sum::<f64>()
        }));
    }

    /// Statistics of a normalized surface vector produced by
    /// [`Self::fill_surface`].
    pub fn stats(&self, b: &[f64]) -> Result<WhittleStats> {
        let mut sum_ln_b = 0.0;
        let mut sum_ratio = 0.0;
        for (e, (&bv, &mi)) in b.iter().zip(&self.ordinates).enumerate() {
            if !(bv > 0.0 && bv.is_finite()) {
                return Err(Error::Evaluation {
                    t: self.ts[e],
                    j: self.freq_index[e] + 1,
                    f: bv,
                    mi,
                });
            }
            sum_ln_b += bv.ln();
            sum_ratio += mi / bv;
        }
        Ok(WhittleStats {
            n: b.len(),
            sum_ln_b,
            sum_ratio,
        })
    }

    /// Log-likelihood of a full parameter set, bypassing any sampler state.
    pub fn log_likelihood(&mut self, params: &SurfaceParams) -> Result<f64> {
        let bins: Vec<(usize, usize)> = params.atom_bins().collect();
        let mut b = Vec::with_capacity(self.len());
        self.fill_surface(params.k1, params.k2, params.measure.weights(), &bins, &mut b);
        Ok(self.stats(&b)?.log_likelihood(params.log_tau))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::tests::random_params;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn random_periodograms(len: usize, m: usize, seed: u64) -> MovingPeriodogramSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MovingPeriodogramSet::from_ordinates(m, (0..len).map(|_| rng.random_range(0.0..3.0)).collect())
            .unwrap()
    }

    #[test]
    fn full_grid_is_all_times() {
        let g = build_grid(100, 10, 1).unwrap();
        assert_eq!(g.entries.len(), 100);
        for (i, e) in g.entries.iter().enumerate() {
            assert_eq!(e.t, i + 1);
            assert_eq!(e.j, mod_index(e.t, 10));
        }
    }

    #[test]
    fn thinned_grid_counts() {
        let g = build_grid(1500, 50, 2).unwrap();
        assert_eq!(g.nominal_blocks, 15);
        assert_eq!(g.entries.len(), 750);
        assert_eq!(g.blocks, 15);
        let ts: Vec<usize> = g.entries.iter().map(|e| e.t).collect();
        assert_eq!(ts[..50], (1..=50).collect::<Vec<_>>()[..]);
        assert_eq!(ts[50], 101);
        assert_eq!(*ts.last().unwrap(), 1450);
    }

    #[test]
    fn partial_final_block() {
        let g = build_grid(95, 10, 1).unwrap();
        assert_eq!(g.entries.len(), 95);
        let last: Vec<usize> = g.entries.iter().filter(|e| e.t > 90).map(|e| e.j).collect();
        assert_eq!(last, vec![1, 2, 3, 4, 5]);
        let set: BTreeSet<usize> = g.entries.iter().map(|e| e.t).collect();
        assert_eq!(set, (1..=95).collect());
    }

    #[test]
    fn grid_errors() {
        assert!(build_grid(5, 10, 1).is_err());
        assert!(build_grid(100, 10, 4).is_err());
        assert!(build_grid(100, 10, 0).is_err());
        assert!(build_grid(100, 0, 1).is_err());
    }

    #[test]
    fn thinning_reduces_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let m = rng.random_range(1..40);
            let len = rng.random_range(m..2000);
            let n1 = build_grid(len, m, 1).unwrap().entries.len() as f64;
            for i in [2usize, 3] {
                let g = build_grid(len, m, i).unwrap();
                let ts: BTreeSet<usize> = g.entries.iter().map(|e| e.t).collect();
                assert_eq!(ts.len(), g.entries.len());
                let ni = g.entries.len() as f64;
                assert!((ni - n1 / i as f64).abs() <= m as f64, "{len} {m} {i}");
            }
        }
    }

    #[test]
    fn constant_surface_closed_form() {
        let p = random_periodograms(60, 5, 2);
        let g = build_grid(60, 5, 1).unwrap();
        let sum: f64 = p.ordinates().iter().sum();
        let n = 60.0;
        let ll = |c: f64| log_dynamic_whittle(&move |_: f64, _: f64| c, &p, &g).unwrap();
        for c in [0.3, 1.0, 2.7] {
            let want = -n * f64::ln(c) - sum / c;
            assert!((ll(c) - want).abs() < 1e-10);
        }
        // maximized at the mean ordinate
        let best = p.mean();
        for c in (1..200).map(|i| i as f64 * 0.02) {
            assert!(ll(c) <= ll(best) + 1e-12);
        }
    }

    #[test]
    fn random_surface_matches_literal_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for thinning in 1..=3 {
            let g = build_grid(60, 5, thinning).unwrap();
            // rescale to geometric mean 1 on the grid and draw MI_t = f Exp(1)
            // so the literal product stays inside the f64 range
            let mut s = random_params(&mut rng);
            let mean_ln = g.entries.iter().map(|e| s.value(e.u, e.lambda).ln()).sum::<f64>()
                / g.entries.len() as f64;
            s.log_tau -= mean_ln;
            let mut mi = vec![0.0; 60];
            for e in &g.entries {
                mi[e.t - 1] = s.value(e.u, e.lambda) * -(1.0 - rng.random::<f64>()).ln();
            }
            let p = MovingPeriodogramSet::from_ordinates(5, mi).unwrap();
            let ll = log_dynamic_whittle(&s, &p, &g).unwrap();
            let product: f64 = g
                .entries
                .iter()
                .map(|e| {
                    let f = s.value(e.u, e.lambda);
                    (1.0 / f) * (-p.ordinate(e.t) / f).exp()
                })
                .product();
            assert!(product > 1e-200, "{product}");
            assert!((ll.exp() / product - 1.0).abs() < 1e-8, "{ll} {product}");
            assert!((ll - product.ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn data_sensitivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_periodograms(40, 4, 6);
        let g = build_grid(40, 4, 1).unwrap();
        let s = random_params(&mut rng);
        let base = log_dynamic_whittle(&s, &p, &g).unwrap();
        let mut ords = p.ordinates().to_vec();
        let delta = 0.7;
        ords[12] += delta;
        let q = MovingPeriodogramSet::from_ordinates(4, ords).unwrap();
        let bumped = log_dynamic_whittle(&s, &q, &g).unwrap();
        let e = g.entries[12];
        let f = s.value(e.u, e.lambda);
        assert!(((base - bumped) - delta / f).abs() < 1e-10);
    }

    #[test]
    fn nonpositive_surface_is_reported() {
        let p = random_periodograms(20, 2, 7);
        let g = build_grid(20, 2, 1).unwrap();
        let surface = |u: f64, _: f64| if u > 0.5 { 0.0 } else { 1.0 };
        match log_dynamic_whittle(&surface, &p, &g).unwrap_err() {
            Error::Evaluation { t, j, .. } => assert_eq!((t, j), (11, 1)),
            e => panic!("{e}"),
        }
        assert!(log_dynamic_whittle(&surface, &p, &build_grid(19, 2, 1).unwrap()).is_err());
    }

    #[test]
    fn cached_evaluator_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_periodograms(300, 12, 9);
        for thinning in 1..=3 {
            let g = build_grid(300, 12, thinning).unwrap();
            let mut ev = WhittleEvaluator::new(&p, &g, BetaBasisConfig::default()).unwrap();
            for _ in 0..5 {
                let s = random_params(&mut rng);
                let direct = log_dynamic_whittle(&s, &p, &g).unwrap();
                let cached = ev.log_likelihood(&s).unwrap();
                assert!((direct - cached).abs() < 1e-9 * direct.abs().max(1.0), "{direct} {cached}");
            }
        }
    }
}
