//! The spherical truncation operator τ_ρ and its feasibility bounds.

use crate::error::{domain, Result};
use crate::linalg::{compose, eigh, SymMatrix};
use crate::ruben::{validate_positive, RubenExpansion, Spectrum, Want};
use crate::specfun::bound_ratio_r;
use serde::{Deserialize, Serialize};

/// Absolute slack used when checking bounds on ε-accurate quantities.
pub const BOUND_SLACK: f64 = 1e-12;

/// Eigenvalues of the second-moment matrix of a normal law restricted to
/// the ball xᵀx < ρ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSpectrum {
    pub mu: Vec<f64>,
    pub rho: f64,
}

impl TruncatedSpectrum {
    pub fn new(mu: Vec<f64>, rho: f64) -> Result<Self> {
        validate_positive(&mu)?;
        if !(rho > 0.0) || !rho.is_finite() {
            return domain(format!("ball radius squared must be positive, got {rho}"));
        }
        Ok(TruncatedSpectrum { mu, rho })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// τ_ρ applied to an arbitrary positive vector: μ_k = λ_k α_k/α.
pub fn truncate_values(lambda: &[f64], rho: f64, epsilon: f64) -> Result<Vec<f64>> {
    let out = RubenExpansion::new(lambda)?.integrals_relative(rho, epsilon, Want::AlphaAndK)?;
    Ok(lambda.iter().zip(&out.alpha_k).map(|(l, ak)| l * ak / out.alpha).collect())
}

/// τ_ρ on an ordered spectrum.
pub fn truncate_spectrum(lambda: &Spectrum, rho: f64, epsilon: f64) -> Result<TruncatedSpectrum> {
    let mu = truncate_values(lambda, rho, epsilon)?;
    Ok(TruncatedSpectrum { mu, rho })
}

/// Second-moment matrix of N(0, Σ) truncated to the ball, R·diag(μ)·Rᵀ.
pub fn truncate_matrix(sigma: &SymMatrix, rho: f64, epsilon: f64) -> Result<SymMatrix> {
    let eig = eigh(sigma)?;
    if let Some(l) = eig.values.iter().find(|&&l| !(l > 0.0)) {
        return domain(format!("covariance must be positive definite, found eigenvalue {l}"));
    }
    let spectrum = Spectrum::new(eig.values.clone())?;
    let t = truncate_spectrum(&spectrum, rho, epsilon)?;
    compose(&t.mu, &eig.vectors)
}

/// One of the inequalities defining H_v(ρ). Indices are zero-based positions
/// in ascending order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bound {
    /// Σ μ_k ≤ ρ
    Sum,
    /// μ_(k) ≤ ρ/(v − k)
    PerIndex(usize),
    /// μ_(k) ≤ ρ/3
    OneThird(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub in_h: bool,
    pub violated: Vec<Bound>,
}

/// Tests membership of μ in H_v(ρ). A vector outside it cannot be the
/// truncated spectrum of any covariance.
pub fn check_feasibility(mu: &[f64], rho: f64) -> FeasibilityReport {
    let mut violated = Vec::new();
    if mu.iter().sum::<f64>() > rho + BOUND_SLACK {
        violated.push(Bound::Sum);
    }
    let mut sorted = mu.to_vec();
    sorted.sort_by(f64::total_cmp);
    let v = sorted.len();
    for (k, &m) in sorted.iter().enumerate() {
        if m > rho / (v - k) as f64 + BOUND_SLACK {
            violated.push(Bound::PerIndex(k));
        }
        if m > rho / 3.0 + BOUND_SLACK {
            violated.push(Bound::OneThird(k));
        }
    }
    FeasibilityReport { in_h: violated.is_empty(), violated }
}

/// Per-index interval [ρ/r(v, ρ/2λ_k), min(ρ/3, ρ/(v−k+1))] that must contain μ_k.
pub fn mu_bounds(lambda: &Spectrum, rho: f64) -> Result<Vec<(f64, f64)>> {
    if !(rho > 0.0) {
        return domain(format!("ball radius squared must be positive, got {rho}"));
    }
    let v = lambda.dim();
    lambda
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let lower = rho / bound_ratio_r(v as u32, rho / (2.0 * l))?;
            let upper = (rho / 3.0).min(rho / (v - k) as f64);
            Ok((lower, upper))
        })
        .collect()
}
