//! Monte Carlo convergence study of the reconstruction schemes.
//!
//! Spectrum i of a study is drawn from stream i of the seed and reused at
//! every (ρ, β) point, so leave-one-spectrum-out jackknife errors remove the
//! same draw from every mean.

use crate::ensembles::{sample_spectrum, RngStream, WishartConfig, RNG_ALGORITHM};
use crate::error::{domain, Error, Result};
use crate::reconstruction::{solve, Scheme, SolverConfig};
use crate::ruben::Spectrum;
use crate::truncation::truncate_spectrum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub v: usize,
    pub p: usize,
    pub n_samples: usize,
    pub rho_values: Vec<f64>,
    pub scheme: Scheme,
    pub beta_grid: Vec<f64>,
    pub eps_t: f64,
    pub epsilon: f64,
    pub warmup: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(v: usize, rho_values: Vec<f64>) -> Self {
        let solver = SolverConfig::default();
        ExperimentConfig {
            v,
            p: 2 * v,
            n_samples: 100,
            rho_values,
            scheme: Scheme::Gjor,
            beta_grid: vec![0.0],
            eps_t: solver.eps_t,
            epsilon: solver.epsilon,
            warmup: solver.warmup,
            max_iter: solver.max_iter,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        WishartConfig::new(self.v, self.p)?;
        if self.n_samples < 2 {
            return domain("a study needs at least two spectra per point");
        }
        if self.rho_values.is_empty() || self.rho_values.iter().any(|r| !(*r > 0.0)) {
            return domain("rho values must be a non-empty list of positive numbers");
        }
        if self.beta_grid.is_empty() {
            return domain("beta grid must not be empty");
        }
        self.solver(self.beta_grid[0]).validate()
    }

    pub fn solver(&self, beta: f64) -> SolverConfig {
        SolverConfig {
            scheme: self.scheme,
            omega: None,
            beta,
            eps_t: self.eps_t,
            max_iter: self.max_iter,
            warmup: self.warmup,
            epsilon: self.epsilon,
            record_history: false,
        }
    }

    fn wishart(&self) -> WishartConfig {
        WishartConfig { v: self.v, p: self.p }
    }
}

/// Default β grid, 0 to 2 in steps of 1/5.
pub fn default_beta_grid() -> Vec<f64> {
    (0..=10).map(|i| f64::from(i) / 5.0).collect()
}

/// One solver run, as written to the study CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub v: usize,
    pub p: usize,
    pub rho: f64,
    pub beta: f64,
    pub scheme: Scheme,
    pub stream_index: u64,
    /// converged, diverged, max_iter, or error
    pub status: String,
    pub n_it: usize,
    pub n_cond: f64,
    pub seed: u64,
}

impl RunRecord {
    pub fn converged(&self) -> bool {
        self.status == "converged"
    }
}

fn run_one(cfg: &ExperimentConfig, spectrum: &Spectrum, rho: f64, beta: f64, stream_index: u64) -> RunRecord {
    let outcome = truncate_spectrum(spectrum, rho, cfg.epsilon).and_then(|mu| solve(&mu, &cfg.solver(beta)));
    let (status, n_it) = match outcome {
        Ok(trace) => (trace.status.name().to_string(), trace.n_it),
        Err(_) => ("error".to_string(), 0),
    };
    RunRecord {
        v: cfg.v,
        p: cfg.p,
        rho,
        beta,
        scheme: cfg.scheme,
        stream_index,
        status,
        n_it,
        n_cond: spectrum.condition_number(),
        seed: cfg.seed,
    }
}

/// Runs the study, handing each finished (ρ, β) block to `sink` in grid
/// order. Rows within a block are ordered by stream index, so the output is
/// independent of the number of worker threads.
pub fn run_study_with<F>(cfg: &ExperimentConfig, threads: usize, mut sink: F) -> Result<()>
where
    F: FnMut(&[RunRecord]) -> Result<()>,
{
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("cannot build thread pool: {e}")))?;
    let spectra: Vec<Spectrum> = pool.install(|| {
        (0..cfg.n_samples as u64)
            .into_par_iter()
            .map(|i| sample_spectrum(cfg.wishart(), RngStream::new(cfg.seed, i)))
            .collect::<Result<_>>()
    })?;
    for &rho in &cfg.rho_values {
        for &beta in &cfg.beta_grid {
            let block: Vec<RunRecord> = pool.install(|| {
                spectra
                    .par_iter()
                    .enumerate()
                    .map(|(i, s)| run_one(cfg, s, rho, beta, i as u64))
                    .collect()
            });
            sink(&block)?;
        }
    }
    Ok(())
}

/// Runs the whole study and returns every record.
pub fn run_convergence_study(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<RunRecord>> {
    let mut all = Vec::new();
    run_study_with(cfg, threads, |block| {
        all.extend_from_slice(block);
        Ok(())
    })?;
    Ok(all)
}

const CSV_HEADER: [&str; 10] = ["v", "p", "rho", "beta", "scheme", "stream_index", "status", "n_it", "n_cond", "seed"];

pub struct StudyWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> StudyWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(CSV_HEADER)?;
        Ok(StudyWriter { inner })
    }

    pub fn write(&mut self, records: &[RunRecord]) -> Result<()> {
        for r in records {
            self.inner.write_record([
                r.v.to_string(),
                r.p.to_string(),
                r.rho.to_string(),
                r.beta.to_string(),
                r.scheme.name().to_string(),
                r.stream_index.to_string(),
                r.status.clone(),
                r.n_it.to_string(),
                r.n_cond.to_string(),
                r.seed.to_string(),
            ])?;
        }
        self.inner.flush()?;
        Ok(())
    }
}

/// Runs the study and streams it as CSV.
pub fn write_study_csv<W: Write>(cfg: &ExperimentConfig, threads: usize, out: W) -> Result<()> {
    let mut w = StudyWriter::new(out)?;
    run_study_with(cfg, threads, |block| w.write(block))
}

pub fn read_study_csv<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let field = |i: usize| row.get(i).ok_or_else(|| Error::Domain(format!("missing column {}", CSV_HEADER[i])));
        let num = |i: usize| -> Result<f64> {
            field(i)?.parse().map_err(|_| Error::Domain(format!("bad number in column {}", CSV_HEADER[i])))
        };
        out.push(RunRecord {
            v: num(0)? as usize,
            p: num(1)? as usize,
            rho: num(2)?,
            beta: num(3)?,
            scheme: field(4)?.parse()?,
            stream_index: num(5)? as u64,
            status: field(6)?.to_string(),
            n_it: num(7)? as usize,
            n_cond: num(8)?,
            seed: num(9)? as u64,
        });
    }
    Ok(out)
}

/// Outcome of all runs at one (ρ, β).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub rho: f64,
    pub beta: f64,
    /// (stream_index, n_it) of converged runs.
    pub converged: Vec<(u64, usize)>,
    pub failures: usize,
    /// Mean n_it over converged runs; NaN when none converged.
    pub n_bar: f64,
}

impl ExperimentRecord {
    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / (self.failures + self.converged.len()) as f64
    }
}

fn mean_n(items: impl Iterator<Item = usize>) -> f64 {
    let (sum, count) = items.fold((0.0, 0usize), |(s, c), n| (s + n as f64, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Groups runs by (ρ, β) in order of first appearance.
pub fn aggregate(records: &[RunRecord]) -> Vec<ExperimentRecord> {
    let mut order: Vec<(u64, u64)> = Vec::new();
    let mut groups: BTreeMap<(u64, u64), ExperimentRecord> = BTreeMap::new();
    for r in records {
        let key = (r.rho.to_bits(), r.beta.to_bits());
        let entry = groups.entry(key).or_insert_with(|| {
            order.push(key);
            ExperimentRecord { rho: r.rho, beta: r.beta, converged: Vec::new(), failures: 0, n_bar: f64::NAN }
        });
        if r.converged() {
            entry.converged.push((r.stream_index, r.n_it));
        } else {
            entry.failures += 1;
        }
    }
    order
        .into_iter()
        .map(|k| {
            let mut e = groups.remove(&k).unwrap();
            e.converged.sort_unstable();
            e.n_bar = mean_n(e.converged.iter().map(|c| c.1));
            e
        })
        .collect()
}

/// Least-squares line y = c0 + c1 x.
fn ols(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::Fit(format!("need at least two points, got {}", points.len())));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all abscissae coincide".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}

/// log n̄_it = a − b log ρ over the fit window, with jackknife errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub a: f64,
    pub b: f64,
    pub a_err: f64,
    pub b_err: f64,
    pub rho_max: f64,
    /// (ρ, n̄_it) used in the fit.
    pub points: Vec<(f64, f64)>,
    /// log n̄_it − (a − b log ρ) at each point.
    pub residuals: Vec<f64>,
}

fn line_through(records: &[&ExperimentRecord], skip: Option<u64>) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .map(|r| {
            let n = mean_n(r.converged.iter().filter(|c| Some(c.0) != skip).map(|c| c.1));
            (r.rho.ln(), n.ln())
        })
        .collect();
    if pts.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::Fit("a point in the window has no converged runs".into()));
    }
    let (intercept, slope) = ols(&pts)?;
    Ok((intercept, -slope))
}

/// Fits the scaling law to the records with ρ ≤ `rho_max`.
pub fn fit_scaling(records: &[ExperimentRecord], rho_max: f64) -> Result<ScalingFit> {
    let window: Vec<&ExperimentRecord> = records.iter().filter(|r| r.rho <= rho_max).collect();
    if window.len() < 2 {
        return Err(Error::Fit(format!("need at least two rho values <= {rho_max}, got {}", window.len())));
    }
    if let Some(r) = window.iter().find(|r| r.converged.len() < 2) {
        return Err(Error::Fit(format!("rho = {} has fewer than two converged runs", r.rho)));
    }
    let (a, b) = line_through(&window, None)?;

    let mut streams: Vec<u64> = window.iter().flat_map(|r| r.converged.iter().map(|c| c.0)).collect();
    streams.sort_unstable();
    streams.dedup();
    let fits: Vec<(f64, f64)> = streams.iter().map(|&s| line_through(&window, Some(s))).collect::<Result<_>>()?;
    let n = fits.len() as f64;
    let spread = |f: fn(&(f64, f64)) -> f64| {
        let mean = fits.iter().map(f).sum::<f64>() / n;
        ((n - 1.0) / n * fits.iter().map(|x| (f(x) - mean).powi(2)).sum::<f64>()).sqrt()
    };
    let a_err = spread(|x| x.0);
    let b_err = spread(|x| x.1);

    let points: Vec<(f64, f64)> = window.iter().map(|r| (r.rho, r.n_bar)).collect();
    let residuals = points.iter().map(|(rho, n)| n.ln() - (a - b * rho.ln())).collect();
    Ok(ScalingFit { a, b, a_err, b_err, rho_max, points, residuals })
}

/// a = a0 + κ v across dimensions, i.e. n̄_it ≈ C e^{κv}/ρ^b with C = e^{a0}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaFit {
    pub beta: f64,
    pub a0: f64,
    pub kappa: f64,
    pub c: f64,
}

/// Ordinary least squares of a on v; `points` holds (v, a).
pub fn fit_kappa(beta: f64, points: &[(usize, f64)]) -> Result<KappaFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!("need at least three dimensions, got {}", points.len())));
    }
    let pts: Vec<(f64, f64)> = points.iter().map(|&(v, a)| (v as f64, a)).collect();
    let (a0, kappa) = ols(&pts)?;
    Ok(KappaFit { beta, a0, kappa, c: a0.exp() })
}

/// Scaling fit of one (v, scheme, β) slice of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceFit {
    pub v: usize,
    pub scheme: Scheme,
    pub beta: f64,
    pub fit: std::result::Result<ScalingFit, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub rho_max: f64,
    pub slices: Vec<SliceFit>,
    pub kappa: Vec<KappaFit>,
}

/// Fits every (v, scheme, β) slice of a study, then κ per (scheme, β)
/// wherever at least three dimensions have a fit.
pub fn fit_study(records: &[RunRecord], rho_max: f64) -> FitReport {
    let mut slices: BTreeMap<(usize, &'static str, u64), Vec<RunRecord>> = BTreeMap::new();
    for r in records {
        slices.entry((r.v, r.scheme.name(), r.beta.to_bits())).or_default().push(r.clone());
    }
    let fits: Vec<SliceFit> = slices
        .into_values()
        .map(|rows| SliceFit {
            v: rows[0].v,
            scheme: rows[0].scheme,
            beta: rows[0].beta,
            fit: fit_scaling(&aggregate(&rows), rho_max).map_err(|e| e.to_string()),
        })
        .collect();
    let mut by_beta: BTreeMap<(&'static str, u64), Vec<(usize, f64)>> = BTreeMap::new();
    for f in &fits {
        if let Ok(fit) = &f.fit {
            by_beta.entry((f.scheme.name(), f.beta.to_bits())).or_default().push((f.v, fit.a));
        }
    }
    let kappa = by_beta
        .into_iter()
        .filter_map(|((_, bits), pts)| fit_kappa(f64::from_bits(bits), &pts).ok())
        .collect();
    FitReport { rho_max, slices: fits, kappa }
}

/// Provenance written next to a study CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyManifest {
    pub config: ExperimentConfig,
    pub rng: String,
}

impl StudyManifest {
    pub fn new(config: ExperimentConfig) -> Self {
        StudyManifest { config, rng: RNG_ALGORITHM.to_string() }
    }
}
