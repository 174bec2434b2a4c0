//! Inversion of the truncation operator by fixed-point iteration.
//!
//! Starting from λ⁽⁰⁾ = μ, each scheme updates
//! `λ_k ← λ_k + ω_k (T_k(λ) − λ_k)` with `T_k(λ) = μ_k α(ρ;λ)/α_k(ρ;λ)`:
//! plain Gauss–Jacobi uses ω_k = 1, the over-relaxed variant a single ω,
//! and the boosted variant ω_k = (1 + βk) ω once the warmup is over.

use crate::error::{domain, Error, Result};
use crate::linalg::{eigh, inf_norm, Matrix, SymMatrix};
use crate::ruben::{validate_positive, RubenExpansion, Want};
use crate::truncation::{check_feasibility, TruncatedSpectrum};
use serde::{Deserialize, Serialize};

/// Iterates are declared divergent beyond this multiple of max μ.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Gj,
    Gjor,
    Boosted,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Gj => "gj",
            Scheme::Gjor => "gjor",
            Scheme::Boosted => "boosted",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gj" => Ok(Scheme::Gj),
            "gjor" => Ok(Scheme::Gjor),
            "boosted" => Ok(Scheme::Boosted),
            other => domain(format!("unknown scheme {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub scheme: Scheme,
    /// Relaxation factor. `None` means ω_opt from ‖J(μ)‖_∞. Ignored by GJ.
    pub omega: Option<f64>,
    /// Boost slope; used by the boosted scheme only.
    pub beta: f64,
    pub eps_t: f64,
    pub max_iter: usize,
    /// Iterations run at the unboosted ω before β takes effect.
    pub warmup: usize,
    /// Certified error of the ball integrals.
    pub epsilon: f64,
    pub record_history: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            scheme: Scheme::Gj,
            omega: None,
            beta: 0.0,
            eps_t: 1e-7,
            max_iter: 1_000_000,
            warmup: 40,
            epsilon: crate::ruben::DEFAULT_EPSILON,
            record_history: false,
        }
    }
}

impl SolverConfig {
    pub fn with_scheme(scheme: Scheme) -> Self {
        SolverConfig { scheme, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_t > 0.0) {
            return domain(format!("eps_t must be positive, got {}", self.eps_t));
        }
        if !(self.epsilon > 0.0) {
            return domain(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.beta >= 0.0) {
            return domain(format!("beta must be nonnegative, got {}", self.beta));
        }
        if let Some(w) = self.omega {
            if !(w > 0.0 && w < 2.0) {
                return domain(format!("omega must lie in (0, 2), got {w}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    Diverged,
    MaxIter,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::Diverged => "diverged",
            Status::MaxIter => "max_iter",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub status: Status,
    /// Index of the last iterate computed; for a converged run, the first n
    /// with relative step below ε_T.
    pub n_it: usize,
    pub lambda_hat: Vec<f64>,
    /// Base relaxation factor actually used (1 for GJ).
    pub omega: f64,
    /// λ⁽⁰⁾, λ⁽¹⁾, … when requested.
    pub iterates: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianInfo {
    /// J[k][ℓ] = ∂μ_ℓ/∂λ_k = [Λ⁻¹ΩΛ]_{kℓ}
    pub j: Matrix,
    pub omega: SymMatrix,
    /// ∞-norm of the Jacobian of τ with rows indexing the components μ_ℓ,
    /// i.e. the largest column sum of `j`. This is the orientation in which
    /// the norm stays below one.
    pub inf_norm_j: f64,
}

/// T_k(λ) = μ_k α/α_k at λ.
pub fn fixed_point_map(lambda: &[f64], mu: &TruncatedSpectrum, epsilon: f64) -> Result<Vec<f64>> {
    if lambda.len() != mu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), got: lambda.len() });
    }
    let mut exp = RubenExpansion::new(lambda)?;
    map_with(&mut exp, mu, epsilon)
}

fn map_with(exp: &mut RubenExpansion, mu: &TruncatedSpectrum, epsilon: f64) -> Result<Vec<f64>> {
    let out = exp.integrals_relative(mu.rho, epsilon, Want::AlphaAndK)?;
    Ok(mu.mu.iter().zip(&out.alpha_k).map(|(m, ak)| m * out.alpha / ak).collect())
}

/// J and Ω at λ from a single evaluation of all ball integrals.
pub fn jacobian(lambda: &[f64], rho: f64, epsilon: f64) -> Result<JacobianInfo> {
    validate_positive(lambda)?;
    let out = RubenExpansion::new(lambda)?.integrals_relative(rho, epsilon, Want::All)?;
    let v = lambda.len();
    let a = out.alpha;
    let ajk = out.alpha_jk.expect("requested all integrals");
    let mut omega = SymMatrix::zeros(v);
    for k in 0..v {
        for l in k..v {
            let w = 0.5 * (ajk.get(k, l) / a - out.alpha_k[k] * out.alpha_k[l] / (a * a));
            omega.set(k, l, w);
        }
    }
    let rows: Vec<Vec<f64>> = (0..v)
        .map(|k| (0..v).map(|l| lambda[l] / lambda[k] * omega.get(k, l)).collect())
        .collect();
    let j = Matrix::from_rows(&rows)?;
    let inf_norm_j = inf_norm(&j.transpose());
    Ok(JacobianInfo { j, omega, inf_norm_j })
}

/// Smallest eigenvalue of Ω, useful for checking positive definiteness.
pub fn omega_min_eigenvalue(info: &JacobianInfo) -> Result<f64> {
    Ok(eigh(&info.omega)?.values[0])
}

/// ω_opt = 2/(1 + √(1 − σ²)).
pub fn omega_opt(sigma: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&sigma) {
        return domain(format!("spectral radius surrogate must lie in [0, 1), got {sigma}"));
    }
    Ok(2.0 / (1.0 + (1.0 - sigma * sigma).sqrt()))
}

fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Reconstructs λ from a feasible truncated spectrum.
pub fn solve(mu: &TruncatedSpectrum, config: &SolverConfig) -> Result<SolverTrace> {
    config.validate()?;
    validate_positive(&mu.mu)?;
    let report = check_feasibility(&mu.mu, mu.rho);
    if !report.in_h {
        return domain(format!("truncated spectrum lies outside H_v(rho): {:?}", report.violated));
    }

    let base_omega = match (config.scheme, config.omega) {
        (Scheme::Gj, _) => 1.0,
        (_, Some(w)) => w,
        (_, None) => omega_opt(jacobian(&mu.mu, mu.rho, config.epsilon)?.inf_norm_j)?,
    };
    let v = mu.dim();
    let boosted: Vec<f64> = (1..=v)
        .map(|k| match config.scheme {
            Scheme::Boosted => (1.0 + config.beta * k as f64) * base_omega,
            _ => base_omega,
        })
        .collect();
    let ceiling = DIVERGENCE_FACTOR * sup_norm(&mu.mu);

    let mut lambda = mu.mu.clone();
    let mut history = config.record_history.then(|| vec![lambda.clone()]);
    let mut status = Status::MaxIter;
    let mut n_it = 0;
    for n in 1..=config.max_iter {
        n_it = n;
        let t = match RubenExpansion::new(&lambda).and_then(|mut exp| map_with(&mut exp, mu, config.epsilon)) {
            Ok(t) => t,
            Err(_) => {
                status = Status::Diverged;
                break;
            }
        };
        let boost = n > config.warmup;
        let next: Vec<f64> = lambda
            .iter()
            .zip(&t)
            .zip(&boosted)
            .map(|((l, t), w)| l + if boost { *w } else { base_omega } * (t - l))
            .collect();
        if next.iter().any(|x| !x.is_finite() || *x <= 0.0 || *x > ceiling) {
            if let Some(h) = history.as_mut() {
                h.push(next.clone());
            }
            lambda = next;
            status = Status::Diverged;
            break;
        }
        let step = lambda.iter().zip(&next).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        let rel = step / sup_norm(&lambda);
        lambda = next;
        if let Some(h) = history.as_mut() {
            h.push(lambda.clone());
        }
        if rel < config.eps_t {
            status = Status::Converged;
            break;
        }
    }
    Ok(SolverTrace { status, n_it, lambda_hat: lambda, omega: base_omega, iterates: history })
}
