//! `tvspec`: simulate, estimate and score time-varying spectral densities.
//!
//! Exit codes: 0 on success, 2 for usage errors, 3 for data or runtime
//! errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tvspec::config::RunConfig;
use tvspec::inference::{ase_grid, ase_on_grid, linspace};
use tvspec::io::{self, SurfaceRow};
use tvspec::periodogram::{moving_periodograms, WindowConfig};
use tvspec::pipeline::{chain_dir, estimate, estimate_chains, write_outputs};
use tvspec::sampler::Progress;
use tvspec::signal::{simulate_dgp, true_tv_psd, Dgp, DgpSpec, Innovation};
use tvspec::{Error, Result};

const EXIT_DATA: u8 = 3;
const SEED_ENV: &str = "TVSPEC_SEED";
/// Tolerance when matching grid points read back from a surface CSV.
const GRID_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "tvspec", version, about = "Bayesian estimation of time-varying spectral densities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one of the test models as a single-column CSV.
    Simulate(SimulateArgs),
    /// Write the moving periodogram ordinates of a series.
    Periodogram(PeriodogramArgs),
    /// Estimate the tv-PSD of a series.
    Estimate(Box<EstimateArgs>),
    /// Average squared log error of a surface CSV against a model's truth.
    Ase(AseArgs),
    /// Write a model's true tv-PSD in the surface CSV format.
    Truth(TruthArgs),
}

#[derive(Clone)]
struct DgpArg {
    model: Dgp,
    suffix: Option<Innovation>,
}

fn parse_dgp(s: &str) -> std::result::Result<DgpArg, String> {
    let model = Dgp::from_str(s).map_err(|e| e.to_string())?;
    let suffix = if s.len() > model.name().len() {
        s.get(model.name().len()..).and_then(|c| Innovation::from_str(c).ok())
    } else {
        None
    };
    Ok(DgpArg { model, suffix })
}

fn parse_innovation(s: &str) -> std::result::Result<Innovation, String> {
    Innovation::from_str(s).map_err(|e| e.to_string())
}

#[derive(Args)]
struct SimulateArgs {
    /// LS1, LS2, LS3, PS1, S1 or S2; a trailing a/b/c selects the innovation.
    #[arg(long, value_parser = parse_dgp)]
    dgp: DgpArg,
    /// Innovation family: a (Gaussian), b (Student t3), c (Pareto).
    #[arg(long, value_parser = parse_innovation)]
    innov: Option<Innovation>,
    /// Number of samples.
    #[arg(long = "T", alias = "len", default_value_t = 1500)]
    len: usize,
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PeriodogramArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 50)]
    m: usize,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// JSON run configuration; flags given explicitly override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    thinning: Option<u8>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long = "xi-l")]
    xi_l: Option<f64>,
    #[arg(long = "xi-r")]
    xi_r: Option<f64>,
    #[arg(long = "truncation-L")]
    truncation_l: Option<usize>,
    #[arg(long = "time-grid")]
    time_grid: Option<usize>,
    #[arg(long = "freq-grid")]
    freq_grid: Option<usize>,
    #[arg(long = "output-dir")]
    output_dir: Option<PathBuf>,
    #[arg(long = "save-draws")]
    save_draws: bool,
    #[arg(long)]
    chains: Option<usize>,
    /// Sample from the prior only.
    #[arg(long = "prior-only")]
    prior_only: bool,
    /// Suppress progress output.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct AseArgs {
    /// Surface CSV with columns u, lambda, mean, median, q05, q95.
    #[arg(long)]
    surface: PathBuf,
    #[arg(long, value_parser = parse_dgp)]
    dgp: DgpArg,
    /// Time points t / T, t = 1..T; inferred from the CSV when omitted.
    #[arg(long = "T")]
    len: Option<usize>,
    /// Frequency points j / K, j = 0..K.
    #[arg(long = "K", default_value_t = 99)]
    k: usize,
    /// Column scored against the truth.
    #[arg(long, default_value = "mean", value_parser = ["mean", "median", "q05", "q95"])]
    column: String,
}

#[derive(Args)]
struct TruthArgs {
    #[arg(long, value_parser = parse_dgp)]
    dgp: DgpArg,
    #[arg(long = "time-grid", default_value_t = 201)]
    time_grid: usize,
    #[arg(long = "freq-grid", default_value_t = 101)]
    freq_grid: usize,
    #[arg(long, short)]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Periodogram(a) => periodogram(a),
        Command::Estimate(a) => run_estimate(*a),
        Command::Ase(a) => score(a),
        Command::Truth(a) => truth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    let seed = seed.unwrap_or_else(rand::random);
    eprintln!("seed: {seed}");
    seed
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let seed = resolve_seed(a.seed);
    let spec = DgpSpec {
        model: a.dgp.model,
        innovation: a.innov.or(a.dgp.suffix).unwrap_or(Innovation::Gaussian),
        len: a.len,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = simulate_dgp(&spec, &mut rng)?;
    match a.output {
        Some(p) => io::write_series(&p, x.values()),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            io::write_series_to(&mut lock, x.values()).map_err(|e| Error::Io {
                path: PathBuf::from("<stdout>"),
                source: e,
            })
        }
    }
}

fn periodogram(a: PeriodogramArgs) -> Result<()> {
    let x = io::read_series(&a.input)?;
    let mi = moving_periodograms(&x, WindowConfig::new(a.m)?)?;
    io::write_periodograms(&a.output, &mi)
}

fn build_config(a: &EstimateArgs) -> Result<RunConfig> {
    let mut c = match &a.config {
        Some(p) => io::read_json(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &a.input {
        c.input = Some(p.clone());
    }
    if let Some(p) = &a.output_dir {
        c.output_dir = Some(p.clone());
    }
    let set = |dst: &mut usize, src: Option<usize>| {
        if let Some(v) = src {
            *dst = v;
        }
    };
    set(&mut c.m, a.m);
    set(&mut c.thinning, a.thinning.map(usize::from));
    set(&mut c.sampler.n_iter, a.iters);
    set(&mut c.sampler.burn_in, a.burnin);
    set(&mut c.sampler.mcmc_thin, a.thin);
    set(&mut c.prior.k_max, a.kmax);
    set(&mut c.time_grid, a.time_grid);
    set(&mut c.freq_grid, a.freq_grid);
    set(&mut c.chains, a.chains);
    if let Some(v) = a.xi_l {
        c.prior.basis.xi_l = v;
    }
    if let Some(v) = a.xi_r {
        c.prior.basis.xi_r = v;
    }
    if a.truncation_l.is_some() {
        c.prior.truncation = a.truncation_l;
    }
    if a.save_draws {
        c.save_draws = true;
    }
    if a.prior_only {
        c.sampler.use_likelihood = false;
    }
    // a seed stored in the config wins over a random one
    c.sampler.seed = match (a.seed, &a.config) {
        (Some(s), _) => s,
        (None, Some(_)) => c.sampler.seed,
        (None, None) => rand::random(),
    };
    eprintln!("seed: {}", c.sampler.seed);
    c.validate()?;
    Ok(c)
}

fn run_estimate(a: EstimateArgs) -> Result<()> {
    let cfg = build_config(&a)?;
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| Error::InvalidArgument("--input is required".into()))?;
    let out = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("tvspec_out"));
    let series = io::read_series(&input)?;
    let estimates = if cfg.chains == 1 {
        let quiet = a.quiet;
        let mut report = |p: &Progress| {
            if !quiet {
                eprintln!(
                    "iter {}/{}  log-posterior {:.3}",
                    p.iteration, p.n_iter, p.log_posterior
                );
            }
        };
        vec![estimate(&series, &cfg, Some(&mut report))?]
    } else {
        estimate_chains(&series, &cfg)?
    };
    for (c, est) in estimates.iter().enumerate() {
        let mut chain_cfg = cfg.clone();
        chain_cfg.sampler.stream = c as u64;
        let dir = chain_dir(&out, cfg.chains, c);
        write_outputs(&dir, est, &chain_cfg)?;
        let mut stdout = std::io::stdout();
        writeln!(
            stdout,
            "{}: bayes_factor_01 = {}",
            dir.display(),
            est.summary.bayes_factor_01
        )
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    Ok(())
}

fn distinct_sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() <= GRID_TOL);
    xs
}

/// Index of `x` in sorted `xs` within the grid tolerance.
fn locate(xs: &[f64], x: f64) -> Option<usize> {
    let i = xs.partition_point(|v| *v < x - GRID_TOL);
    (i < xs.len() && (xs[i] - x).abs() <= GRID_TOL).then_some(i)
}

fn column(r: &SurfaceRow, name: &str) -> f64 {
    match name {
        "median" => r.median,
        "q05" => r.q05,
        "q95" => r.q95,
        _ => r.mean,
    }
}

/// Estimate values on the ASE grid, looked up in surface rows.
fn ase_values_from_rows(
    rows: &[SurfaceRow],
    times: &[f64],
    freqs: &[f64],
    name: &str,
    path: &Path,
) -> Result<Vec<f64>> {
    let us = distinct_sorted(rows.iter().map(|r| r.u).collect());
    let ls = distinct_sorted(rows.iter().map(|r| r.lambda).collect());
    let mut table = vec![f64::NAN; us.len() * ls.len()];
    for r in rows {
        let (i, j) = (locate(&us, r.u), locate(&ls, r.lambda));
        if let (Some(i), Some(j)) = (i, j) {
            table[i * ls.len() + j] = column(r, name);
        }
    }
    let mut out = Vec::with_capacity(times.len() * freqs.len());
    for &t in times {
        for &l in freqs {
            let v = match (locate(&us, t), locate(&ls, l)) {
                (Some(i), Some(j)) => table[i * ls.len() + j],
                _ => f64::NAN,
            };
            if v.is_nan() {
                return Err(Error::GridMismatch(format!(
                    "{} has no value at u = {t}, lambda = {l}",
                    path.display()
                )));
            }
            out.push(v);
        }
    }
    Ok(out)
}

fn score(a: AseArgs) -> Result<()> {
    let rows = io::read_surface(&a.surface)?;
    if rows.is_empty() {
        return Err(Error::GridMismatch(format!("{} has no rows", a.surface.display())));
    }
    let len = match a.len {
        Some(t) => t,
        None => distinct_sorted(rows.iter().map(|r| r.u).collect())
            .into_iter()
            .filter(|u| *u > GRID_TOL)
            .count(),
    };
    if len == 0 || a.k == 0 {
        return Err(Error::GridMismatch("empty ASE grid".into()));
    }
    let (times, freqs) = ase_grid(len, a.k);
    let est = ase_values_from_rows(&rows, &times, &freqs, &a.column, &a.surface)?;
    let truth: Vec<f64> = times
        .iter()
        .flat_map(|&u| freqs.iter().map(move |&l| true_tv_psd(a.dgp.model, u, l)))
        .collect();
    let value = ase_on_grid(&times, &freqs, &est, &truth)?;
    // printed to 12 decimal places
    println!("{:?}", (value * 1e12).round() / 1e12);
    Ok(())
}

fn truth(a: TruthArgs) -> Result<()> {
    if a.time_grid < 2 || a.freq_grid < 2 {
        return Err(Error::InvalidArgument("grids need at least 2 points".into()));
    }
    let ts = linspace(a.time_grid);
    let ls = linspace(a.freq_grid);
    let rows = ts.iter().flat_map(|&u| {
        ls.iter().map(move |&lambda| {
            let f = true_tv_psd(a.dgp.model, u, lambda);
            SurfaceRow {
                u,
                lambda,
                mean: f,
                median: f,
                q05: f,
                q95: f,
            }
        })
    });
    io::write_surface_rows(&a.output, rows)
}
