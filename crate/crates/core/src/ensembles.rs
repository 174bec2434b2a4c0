//! Random covariance spectra from the Wishart law W_v(p, p⁻¹I), Grenander
//! mode estimates of the ordered eigenvalues, and the ρ simulation grid.
//!
//! Every random draw comes from a ChaCha20 generator keyed by a 64-bit seed
//! and positioned on its own stream, so one sample is reproducible from
//! (seed, stream_index) alone regardless of how work is scheduled.

use crate::error::{domain, Error, Result};
use crate::linalg::{eigh, SymMatrix};
use crate::ruben::Spectrum;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Name of the generator, recorded with every experiment output.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha), seed_from_u64(seed), stream = stream_index";

/// Grenander exponent used when none is given.
pub const DEFAULT_GRENANDER_S: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WishartConfig {
    pub v: usize,
    pub p: usize,
}

impl WishartConfig {
    pub fn new(v: usize, p: usize) -> Result<Self> {
        if v == 0 {
            return domain("dimension must be at least 1");
        }
        if p < v {
            return domain(format!("Wishart degrees of freedom p = {p} must be at least v = {v}"));
        }
        Ok(WishartConfig { v, p })
    }

    /// p = 2v.
    pub fn standard(v: usize) -> Result<Self> {
        WishartConfig::new(v, 2 * v)
    }
}

/// Identifies one reproducible substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        RngStream { seed, stream_index }
    }

    pub fn rng(self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Σ = A Aᵀ / p with A lower-triangular, A_ii ~ χ_{p−i+1} (1-based i) and
/// standard normal entries below the diagonal.
pub fn bartlett_sample_with<R: rand::Rng + ?Sized>(cfg: WishartConfig, rng: &mut R) -> SymMatrix {
    let v = cfg.v;
    let mut a = vec![vec![0.0; v]; v];
    for (i, row) in a.iter_mut().enumerate() {
        let dof = (cfg.p - i) as f64;
        let chi2 = ChiSquared::new(dof).expect("positive degrees of freedom");
        row[i] = chi2.sample(rng).sqrt();
        for x in row.iter_mut().take(i) {
            *x = StandardNormal.sample(rng);
        }
    }
    let p = cfg.p as f64;
    let mut s = SymMatrix::zeros(v);
    for i in 0..v {
        for j in 0..=i {
            let dot: f64 = (0..=j).map(|m| a[i][m] * a[j][m]).sum();
            s.set(i, j, dot / p);
        }
    }
    s
}

pub fn bartlett_sample(cfg: WishartConfig, stream: RngStream) -> SymMatrix {
    bartlett_sample_with(cfg, &mut stream.rng())
}

/// Ascending eigenvalues of one Wishart draw.
pub fn sample_spectrum(cfg: WishartConfig, stream: RngStream) -> Result<Spectrum> {
    let eig = eigh(&bartlett_sample(cfg, stream))?;
    if eig.values[0] <= 0.0 {
        return Err(Error::Degenerate(format!("Wishart draw has eigenvalue {}", eig.values[0])));
    }
    Spectrum::new(eig.values)
}

/// Grenander's mode estimate from a sorted sample with lag r and exponent s:
///
/// ```text
/// ½ Σ_i (x_i + x_{i+r}) |x_{i+r} − x_i|^{−s} / Σ_i |x_{i+r} − x_i|^{−s}
/// ```
///
/// Pairs with a zero gap are skipped.
pub fn grenander_mode(sorted: &[f64], r: usize, s: f64) -> Result<f64> {
    if r == 0 || !(s > 0.0) {
        return domain(format!("Grenander parameters need r >= 1 and s > 0, got r={r}, s={s}"));
    }
    if sorted.len() <= r {
        return Err(Error::Degenerate(format!("sample of size {} too small for lag {r}", sorted.len())));
    }
    let terms: Vec<(f64, f64)> = sorted
        .iter()
        .zip(&sorted[r..])
        .filter_map(|(a, b)| {
            let gap = (b - a).abs();
            (gap > 0.0).then(|| (a + b, -s * gap.ln()))
        })
        .collect();
    if terms.is_empty() {
        return Err(Error::Degenerate(format!("every lag-{r} gap is zero")));
    }
    // Weights rescaled by the largest one to avoid overflow.
    let top = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for (sum, lw) in terms {
        let w = (lw - top).exp();
        num += sum * w;
        den += w;
    }
    Ok(0.5 * num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTable {
    pub v: usize,
    pub p: usize,
    pub n: usize,
    pub r: usize,
    pub s: f64,
    pub seed: u64,
    /// Mode of λ_k, ascending k.
    pub modes: Vec<f64>,
}

impl ModeTable {
    /// CSV with columns v,p,k,mode,r,s,N,seed; k is 1-based.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["v", "p", "k", "mode", "r", "s", "N", "seed"])?;
        for (k, m) in self.modes.iter().enumerate() {
            w.write_record([
                self.v.to_string(),
                self.p.to_string(),
                (k + 1).to_string(),
                m.to_string(),
                self.r.to_string(),
                self.s.to_string(),
                self.n.to_string(),
                self.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Default Grenander lag for a sample of size n.
pub fn default_lag(n: usize) -> usize {
    (n / 100).max(1)
}

/// Draws n spectra on streams 0..n and estimates the mode of each ordered
/// eigenvalue. `r` defaults to n/100 and `s` to [`DEFAULT_GRENANDER_S`].
pub fn mode_table(cfg: WishartConfig, n: usize, r: Option<usize>, s: Option<f64>, seed: u64) -> Result<ModeTable> {
    let r = r.unwrap_or_else(|| default_lag(n));
    let s = s.unwrap_or(DEFAULT_GRENANDER_S);
    let spectra: Vec<Spectrum> = (0..n as u64)
        .into_par_iter()
        .map(|i| sample_spectrum(cfg, RngStream::new(seed, i)))
        .collect::<Result<_>>()?;
    let mut modes = Vec::with_capacity(cfg.v);
    for k in 0..cfg.v {
        let mut column: Vec<f64> = spectra.iter().map(|l| l[k]).collect();
        column.sort_by(f64::total_cmp);
        modes.push(grenander_mode(&column, r, s)?);
    }
    Ok(ModeTable { v: cfg.v, p: cfg.p, n, r, s, seed, modes })
}

/// {½Mo[λ_1], Mo[λ_1], …, Mo[λ_v], 2Mo[λ_v]}, ascending.
pub fn rho_grid(modes: &[f64]) -> Result<Vec<f64>> {
    if modes.is_empty() {
        return domain("mode list must not be empty");
    }
    let mut grid = Vec::with_capacity(modes.len() + 2);
    let lo = modes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = modes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    grid.push(0.5 * lo);
    grid.extend_from_slice(modes);
    grid.push(2.0 * hi);
    grid.sort_by(f64::total_cmp);
    Ok(grid)
}

/// Sample mean and standard error of the mean.
#[cfg(test)]
fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
