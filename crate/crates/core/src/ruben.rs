//! Chi-square series for Gaussian integrals over the centered ball B_v(ρ).
//!
//! For a diagonal covariance with eigenvalues λ the integrals
//!
//! ```text
//! α      = Σ_m c_m      F_{v+2m}(ρ/s)
//! α_k    = Σ_m c_{k;m}  F_{v+2(m+1)}(ρ/s)
//! α_jk   = Σ_m c_{jk;m} F_{v+2(m+2)}(ρ/s)
//! ```
//!
//! hold for any scale s > 0. The coefficients follow the recursion
//! `c_n = (1/2n) Σ_{r<n} g_{n−r} c_r` with `g_m = Σ_i e_i (1 − s/λ_i)^m`, where
//! the weights `e_i` are 1 for α, 3 on the marked index for α_k, 5 for α_kk,
//! and 3 on both marked indices for α_jk (j ≠ k). Every series is truncated at
//! the first order whose rigorous tail bound drops below ε.

use crate::error::{domain, Error, Result};
use crate::linalg::SymMatrix;
use crate::specfun::{chi_square_cdf_ladder, log_gamma, Dof};
use serde::{Deserialize, Serialize};

/// Default certified absolute error of every evaluated integral.
pub const DEFAULT_EPSILON: f64 = 1e-14;

/// Longest series the evaluator will ever build.
pub const MAX_TERMS: usize = 100_000;

/// Refinement passes allowed when tightening to a relative tolerance.
const RELATIVE_PASSES: usize = 4;

/// Ordered positive eigenvalue spectrum of a covariance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    /// Accepts a non-empty, positive, finite and ascending vector.
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        validate_positive(&lambda)?;
        if lambda.windows(2).any(|w| w[0] > w[1]) {
            return domain("spectrum must be sorted ascending");
        }
        Ok(Spectrum(lambda))
    }

    /// Sorts the values ascending before validating them.
    pub fn from_unsorted(mut lambda: Vec<f64>) -> Result<Self> {
        validate_positive(&lambda)?;
        lambda.sort_by(f64::total_cmp);
        Ok(Spectrum(lambda))
    }

    pub fn isotropic(level: f64, dim: usize) -> Result<Self> {
        Spectrum::new(vec![level; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// λ_v / λ_1.
    pub fn condition_number(&self) -> f64 {
        self.0[self.0.len() - 1] / self.0[0]
    }
}

impl std::ops::Deref for Spectrum {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Spectrum {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Spectrum::new(v)
    }
}

impl From<Spectrum> for Vec<f64> {
    fn from(s: Spectrum) -> Vec<f64> {
        s.0
    }
}

pub(crate) fn validate_positive(lambda: &[f64]) -> Result<()> {
    if lambda.is_empty() {
        return domain("spectrum must not be empty");
    }
    if let Some(x) = lambda.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return domain(format!("eigenvalues must be positive and finite, got {x}"));
    }
    Ok(())
}

/// Which Gaussian integral a series represents. Indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntegralKind {
    Alpha,
    AlphaK(usize),
    AlphaJK(usize, usize),
}

impl IntegralKind {
    /// Number of squared-coordinate factors; each shifts the chi-square
    /// degrees of freedom by two.
    pub fn order(self) -> usize {
        match self {
            IntegralKind::Alpha => 0,
            IntegralKind::AlphaK(_) => 1,
            IntegralKind::AlphaJK(..) => 2,
        }
    }

    fn check(self, dim: usize) -> Result<()> {
        let bad = match self {
            IntegralKind::Alpha => None,
            IntegralKind::AlphaK(k) => (k >= dim).then_some(k),
            IntegralKind::AlphaJK(j, k) => (j >= dim).then_some(j).or((k >= dim).then_some(k)),
        };
        match bad {
            Some(index) => Err(Error::IndexOutOfRange { index, dim }),
            None => Ok(()),
        }
    }
}

/// s = 2 λ_min λ_max / (λ_min + λ_max).
pub fn choose_scale(lambda: &[f64]) -> f64 {
    let lo = lambda.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lambda.iter().copied().fold(0.0, f64::max);
    2.0 * lo * hi / (lo + hi)
}

/// η = max_i |1 − s/λ_i|.
pub fn eta(lambda: &[f64], s: f64) -> f64 {
    lambda.iter().map(|l| (1.0 - s / l).abs()).fold(0.0, f64::max)
}

fn c0_of(lambda: &[f64], s: f64) -> f64 {
    // Accumulated in logs: the product over many small ratios can underflow.
    lambda.iter().map(|l| 0.5 * (s / l).ln()).sum::<f64>().exp()
}

fn leading_coefficient(lambda: &[f64], s: f64, kind: IntegralKind) -> f64 {
    let c0 = c0_of(lambda, s);
    match kind {
        IntegralKind::Alpha => c0,
        IntegralKind::AlphaK(k) => s / lambda[k] * c0,
        IntegralKind::AlphaJK(j, k) => {
            let mult = if j == k { 3.0 } else { 1.0 };
            mult * (s / lambda[j]) * (s / lambda[k]) * c0
        }
    }
}

/// Extends `coeffs` in place until it holds `n` entries of the recursion
/// c_n = (1/2n) Σ_{r<n} g_{n−r} c_r. `g[m]` must be available for m < n.
fn extend_recursion(coeffs: &mut Vec<f64>, g: &[f64], n: usize) {
    while coeffs.len() < n {
        let m = coeffs.len();
        let acc: f64 = (0..m).map(|r| g[m - r] * coeffs[r]).sum();
        coeffs.push(acc / (2.0 * m as f64));
    }
}

fn power_sums(lambda: &[f64], s: f64, weights: &[f64], n: usize) -> Vec<f64> {
    let mut g = vec![0.0; n.max(1)];
    for (l, w) in lambda.iter().zip(weights) {
        let a = 1.0 - s / l;
        let mut p = 1.0;
        for gm in g.iter_mut().skip(1) {
            p *= a;
            *gm += w * p;
        }
    }
    g
}

fn weights_for(dim: usize, kind: IntegralKind) -> Vec<f64> {
    let mut w = vec![1.0; dim];
    match kind {
        IntegralKind::Alpha => {}
        IntegralKind::AlphaK(k) => w[k] = 3.0,
        IntegralKind::AlphaJK(j, k) if j == k => w[k] = 5.0,
        IntegralKind::AlphaJK(j, k) => {
            w[j] = 3.0;
            w[k] = 3.0;
        }
    }
    w
}

fn coefficients(lambda: &[f64], s: f64, kind: IntegralKind, n: usize) -> Result<Vec<f64>> {
    validate_positive(lambda)?;
    kind.check(lambda.len())?;
    if !(s > 0.0) || !s.is_finite() {
        return domain(format!("scale must be positive, got {s}"));
    }
    let g = power_sums(lambda, s, &weights_for(lambda.len(), kind), n);
    let mut c = Vec::with_capacity(n);
    c.push(leading_coefficient(lambda, s, kind));
    extend_recursion(&mut c, &g, n);
    c.truncate(n);
    Ok(c)
}

/// c_0 … c_{n−1} of the α expansion.
pub fn coeffs_alpha(lambda: &[f64], s: f64, n: usize) -> Result<Vec<f64>> {
    coefficients(lambda, s, IntegralKind::Alpha, n)
}

/// c_{k;0} … c_{k;n−1} of the α_k expansion (k zero-based).
pub fn coeffs_alpha_k(lambda: &[f64], s: f64, k: usize, n: usize) -> Result<Vec<f64>> {
    coefficients(lambda, s, IntegralKind::AlphaK(k), n)
}

/// c_{jk;0} … c_{jk;n−1} of the α_jk expansion (j, k zero-based).
pub fn coeffs_alpha_jk(lambda: &[f64], s: f64, j: usize, k: usize, n: usize) -> Result<Vec<f64>> {
    coefficients(lambda, s, IntegralKind::AlphaJK(j, k), n)
}

/// Logarithm of the part of the tail bound that depends on n only:
///
/// ```text
/// Γ(v/2+n+d)/Γ(v/2) · ηⁿ/n! · (1−η)^{−(v/2+n+d)}
/// ```
fn ln_bound_prefactor(v: usize, eta: f64, order: usize, n: usize) -> f64 {
    let half_v = 0.5 * v as f64;
    let shifted = half_v + (n + order) as f64;
    let ln_gammas = log_gamma(shifted).unwrap_or(f64::NAN) - log_gamma(half_v).unwrap_or(f64::NAN)
        - log_gamma(n as f64 + 1.0).unwrap_or(f64::NAN);
    ln_gammas + n as f64 * eta.ln() - shifted * (-eta).ln_1p()
}

/// One truncated chi-square series for a single integral at a given ρ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubenSeries {
    pub kind: IntegralKind,
    pub dim: usize,
    pub s: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub k_th: usize,
    pub coeffs: Vec<f64>,
}

impl RubenSeries {
    /// Upper bound on |Σ_{m≥n} c_m F(ρ/s)|, the tail discarded after n terms.
    pub fn residual_bound(&self, rho: f64, n: usize) -> Result<f64> {
        residual_bound_raw(self.dim, self.s, self.eta, self.coeffs[0], self.kind.order(), rho, n)
    }

    /// Σ_{m<k_th} c_m F_{v+2(m+d)}(ρ/s).
    pub fn value(&self, rho: f64) -> Result<f64> {
        let first = Dof::new((self.dim + 2 * self.kind.order()) as u32)?;
        let f = chi_square_cdf_ladder(first, rho / self.s, self.k_th)?;
        Ok(self.coeffs.iter().zip(&f).map(|(c, f)| c * f).sum())
    }
}

fn residual_bound_raw(dim: usize, s: f64, eta: f64, lead: f64, order: usize, rho: f64, n: usize) -> Result<f64> {
    if !(eta < 1.0) {
        return domain(format!("scale gives eta = {eta} >= 1; the series bound does not apply"));
    }
    if n == 0 || eta == 0.0 {
        // n = 0 keeps the whole series; otherwise ηⁿ = 0.
        if n == 0 {
            let dof = Dof::new((dim + 2 * order) as u32)?;
            let f = crate::specfun::chi_square_cdf(dof, (1.0 - eta) * rho / s)?;
            return Ok(lead * (ln_bound_prefactor(dim, eta, order, 0)).exp() * f);
        }
        return Ok(0.0);
    }
    let dof = Dof::new((dim + 2 * (n + order)) as u32)?;
    let f = crate::specfun::chi_square_cdf(dof, (1.0 - eta) * rho / s)?;
    if f == 0.0 {
        return Ok(0.0);
    }
    Ok(lead * (ln_bound_prefactor(dim, eta, order, n) + f.ln()).exp())
}

/// Which family of integrals an evaluation should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Want {
    Alpha,
    AlphaAndK,
    All,
}

/// Gaussian integrals over B_v(ρ) for one spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallIntegrals {
    pub rho: f64,
    pub epsilon: f64,
    pub alpha: f64,
    /// Empty when only α was requested.
    pub alpha_k: Vec<f64>,
    /// Present only for `Want::All`.
    pub alpha_jk: Option<SymMatrix>,
    /// Largest truncation order used across the requested integrals.
    pub k_th_max: usize,
}

/// Coefficient tables for one spectrum, grown on demand and reused across
/// radii.
///
/// The tables are private to one evaluator; sharing one across threads
/// requires external synchronization, and distinct evaluators never alias.
#[derive(Debug, Clone)]
pub struct RubenExpansion {
    lambda: Vec<f64>,
    s: f64,
    eta: f64,
    c0: f64,
    /// powers[i][m] = (1 − s/λ_i)^m
    powers: Vec<Vec<f64>>,
    /// base_g[m] = Σ_i (1 − s/λ_i)^m
    base_g: Vec<f64>,
    alpha: Vec<f64>,
    alpha_k: Vec<Vec<f64>>,
    /// Upper triangle, row-major: (j, k) with j ≤ k.
    alpha_jk: Vec<Vec<f64>>,
}

impl RubenExpansion {
    pub fn new(lambda: &[f64]) -> Result<Self> {
        validate_positive(lambda)?;
        let s = choose_scale(lambda);
        let eta = eta(lambda, s);
        let v = lambda.len();
        Ok(RubenExpansion {
            lambda: lambda.to_vec(),
            s,
            eta,
            c0: c0_of(lambda, s),
            powers: vec![vec![1.0]; v],
            base_g: vec![v as f64],
            alpha: Vec::new(),
            alpha_k: vec![Vec::new(); v],
            alpha_jk: vec![Vec::new(); v * (v + 1) / 2],
        })
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn scale(&self) -> f64 {
        self.s
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    fn pair_slot(&self, j: usize, k: usize) -> usize {
        let (j, k) = if j <= k { (j, k) } else { (k, j) };
        let v = self.dim();
        j * v - j * (j + 1) / 2 + k
    }

    fn grow_powers(&mut self, n: usize) {
        let have = self.base_g.len();
        if have >= n {
            return;
        }
        let s = self.s;
        for (row, l) in self.powers.iter_mut().zip(&self.lambda) {
            let a = 1.0 - s / l;
            while row.len() < n {
                let last = *row.last().unwrap();
                row.push(last * a);
            }
        }
        for m in have..n {
            self.base_g.push(self.powers.iter().map(|row| row[m]).sum());
        }
    }

    /// Makes sure the coefficients of `kind` reach length `n`.
    fn ensure(&mut self, kind: IntegralKind, n: usize) {
        self.grow_powers(n);
        let lead = leading_coefficient(&self.lambda, self.s, kind);
        // g_{X;m} = Σ_i a_i^m + Σ_i (e_i − 1) a_i^m
        let g: Vec<f64> = match kind {
            IntegralKind::Alpha => self.base_g[..n].to_vec(),
            IntegralKind::AlphaK(k) => (0..n).map(|m| self.base_g[m] + 2.0 * self.powers[k][m]).collect(),
            IntegralKind::AlphaJK(j, k) if j == k => {
                (0..n).map(|m| self.base_g[m] + 4.0 * self.powers[k][m]).collect()
            }
            IntegralKind::AlphaJK(j, k) => (0..n)
                .map(|m| self.base_g[m] + 2.0 * self.powers[j][m] + 2.0 * self.powers[k][m])
                .collect(),
        };
        let slot = match kind {
            IntegralKind::Alpha => &mut self.alpha,
            IntegralKind::AlphaK(k) => &mut self.alpha_k[k],
            IntegralKind::AlphaJK(j, k) => {
                let idx = self.pair_slot(j, k);
                &mut self.alpha_jk[idx]
            }
        };
        if slot.is_empty() && n > 0 {
            slot.push(lead);
        }
        extend_recursion(slot, &g, n);
    }

    fn coeffs(&self, kind: IntegralKind) -> &[f64] {
        match kind {
            IntegralKind::Alpha => &self.alpha,
            IntegralKind::AlphaK(k) => &self.alpha_k[k],
            IntegralKind::AlphaJK(j, k) => &self.alpha_jk[self.pair_slot(j, k)],
        }
    }

    /// Leading coefficient c_{X;0} of a series.
    pub fn leading(&self, kind: IntegralKind) -> f64 {
        match kind {
            IntegralKind::Alpha => self.c0,
            _ => leading_coefficient(&self.lambda, self.s, kind),
        }
    }

    /// Tail bound after n terms.
    pub fn residual_bound(&self, kind: IntegralKind, rho: f64, n: usize) -> Result<f64> {
        kind.check(self.dim())?;
        residual_bound_raw(self.dim(), self.s, self.eta, self.leading(kind), kind.order(), rho, n)
    }

    /// Smallest n ≥ 1 whose tail bound is below ε.
    pub fn k_threshold(&self, kind: IntegralKind, rho: f64, epsilon: f64) -> Result<usize> {
        kind.check(self.dim())?;
        let table = BoundTable::build(self, rho, epsilon, &[self.leading(kind)], kind.order())?;
        Ok(table[0])
    }

    /// The truncated series of one integral at ρ.
    pub fn series(&mut self, kind: IntegralKind, rho: f64, epsilon: f64) -> Result<RubenSeries> {
        let k_th = self.k_threshold(kind, rho, epsilon)?;
        self.ensure(kind, k_th);
        Ok(RubenSeries {
            kind,
            dim: self.dim(),
            s: self.s,
            eta: self.eta,
            epsilon,
            k_th,
            coeffs: self.coeffs(kind)[..k_th].to_vec(),
        })
    }

    /// Evaluates the requested integrals at ρ, each to certified absolute
    /// error ε.
    pub fn integrals(&mut self, rho: f64, epsilon: f64, want: Want) -> Result<BallIntegrals> {
        self.integrals_scaled(rho, epsilon, want, None)
    }

    /// Like [`integrals`](Self::integrals), but each entry x is certified to
    /// within ε·min(1, |x|). Ratios such as α_k/α stay accurate when the ball
    /// carries little probability; the absolute error is still at most ε.
    pub fn integrals_relative(&mut self, rho: f64, epsilon: f64, want: Want) -> Result<BallIntegrals> {
        let mut out = self.integrals_scaled(rho, epsilon, want, None)?;
        for _ in 0..RELATIVE_PASSES {
            let scales = flatten(&out);
            let next = self.integrals_scaled(rho, epsilon, want, Some(&scales))?;
            let settled = flatten(&next).iter().zip(&scales).all(|(a, b)| (a - b).abs() <= 0.5 * b.abs());
            out = next;
            if settled {
                break;
            }
        }
        out.epsilon = epsilon;
        Ok(out)
    }

    fn integrals_scaled(&mut self, rho: f64, epsilon: f64, want: Want, scales: Option<&[f64]>) -> Result<BallIntegrals> {
        if !(rho > 0.0) || !rho.is_finite() {
            return domain(format!("ball radius squared must be positive, got {rho}"));
        }
        if !(epsilon > 0.0) {
            return domain(format!("epsilon must be positive, got {epsilon}"));
        }
        let v = self.dim();
        let mut kinds = vec![IntegralKind::Alpha];
        if want != Want::Alpha {
            kinds.extend((0..v).map(IntegralKind::AlphaK));
        }
        if want == Want::All {
            for j in 0..v {
                for k in j..v {
                    kinds.push(IntegralKind::AlphaJK(j, k));
                }
            }
        }

        // Thresholds per order share one bound table.
        let mut k_th = vec![0usize; kinds.len()];
        for order in 0..=2 {
            let idx: Vec<usize> = (0..kinds.len()).filter(|&i| kinds[i].order() == order).collect();
            if idx.is_empty() {
                continue;
            }
            let leads: Vec<f64> = idx
                .iter()
                .map(|&i| {
                    let scale = scales.map_or(1.0, |sc| sc[i].abs().clamp(f64::MIN_POSITIVE, 1.0));
                    self.leading(kinds[i]) / scale
                })
                .collect();
            let found = BoundTable::build(self, rho, epsilon, &leads, order)?;
            for (&i, n) in idx.iter().zip(found) {
                k_th[i] = n;
            }
        }
        let k_max = k_th.iter().copied().max().unwrap_or(1);

        let f = chi_square_cdf_ladder(Dof::new(v as u32)?, rho / self.s, k_max + 2)?;
        let mut values = Vec::with_capacity(kinds.len());
        for (&kind, &n) in kinds.iter().zip(&k_th) {
            self.ensure(kind, n);
            let d = kind.order();
            let c = &self.coeffs(kind)[..n];
            values.push(c.iter().zip(&f[d..d + n]).map(|(c, f)| c * f).sum::<f64>());
        }

        let alpha = values[0];
        let alpha_k = if want == Want::Alpha { Vec::new() } else { values[1..=v].to_vec() };
        let alpha_jk = (want == Want::All).then(|| {
            let mut m = SymMatrix::zeros(v);
            let mut it = values[v + 1..].iter();
            for j in 0..v {
                for k in j..v {
                    m.set(j, k, *it.next().unwrap());
                }
            }
            m
        });
        Ok(BallIntegrals { rho, epsilon, alpha, alpha_k, alpha_jk, k_th_max: k_max })
    }
}

/// Entries of a result in evaluation order: α, α_k, then the upper triangle
/// of α_jk row by row.
fn flatten(b: &BallIntegrals) -> Vec<f64> {
    let mut out = vec![b.alpha];
    out.extend(&b.alpha_k);
    if let Some(m) = &b.alpha_jk {
        for j in 0..m.dim() {
            for k in j..m.dim() {
                out.push(m.get(j, k));
            }
        }
    }
    out
}

/// Scans the tail bounds of several series of the same order at once. The
/// n-dependent factor and the chi-square ladder at (1 − η)ρ/s are shared; the
/// series differ only by their leading coefficient.
struct BoundTable;

impl BoundTable {
    fn build(exp: &RubenExpansion, rho: f64, epsilon: f64, leads: &[f64], order: usize) -> Result<Vec<usize>> {
        if !(epsilon > 0.0) {
            return domain(format!("epsilon must be positive, got {epsilon}"));
        }
        if !(rho > 0.0) {
            return domain(format!("ball radius squared must be positive, got {rho}"));
        }
        let eta = exp.eta;
        if !(eta < 1.0) {
            return domain(format!("scale gives eta = {eta} >= 1; the series bound does not apply"));
        }
        let mut found: Vec<Option<usize>> = vec![None; leads.len()];
        if eta == 0.0 {
            return Ok(vec![1; leads.len()]);
        }
        let v = exp.dim();
        let y = (1.0 - eta) * rho / exp.s;
        let first = Dof::new((v + 2 * order) as u32)?;
        let ln_eps = epsilon.ln();
        let ln_leads: Vec<f64> = leads.iter().map(|c| c.ln()).collect();

        let mut done = 0usize;
        let mut start = 1usize;
        let mut span = 64usize;
        while done < leads.len() {
            if start > MAX_TERMS {
                return Err(Error::Convergence(format!(
                    "series bound did not drop below {epsilon} within {MAX_TERMS} terms"
                )));
            }
            let end = (start + span).min(MAX_TERMS + 1);
            // F_{v+2(n+d)}(y) for n in [start, end)
            let ladder = chi_square_cdf_ladder(first, y, end)?;
            for n in start..end {
                let lnf = ladder[n].ln();
                let base = ln_bound_prefactor(v, eta, order, n) + lnf;
                for (slot, ln_c) in found.iter_mut().zip(&ln_leads) {
                    if slot.is_none() && (lnf == f64::NEG_INFINITY || base + ln_c < ln_eps) {
                        *slot = Some(n);
                        done += 1;
                    }
                }
                if done == leads.len() {
                    break;
                }
            }
            start = end;
            span *= 2;
        }
        Ok(found.into_iter().map(|n| n.unwrap()).collect())
    }
}

/// Smallest n ≥ 1 with tail bound below ε for one integral of λ at ρ.
pub fn k_threshold(lambda: &[f64], rho: f64, kind: IntegralKind, epsilon: f64) -> Result<usize> {
    RubenExpansion::new(lambda)?.k_threshold(kind, rho, epsilon)
}

/// Tail bound of `kind` after n terms, for the default scale choice.
pub fn residual_bound(lambda: &[f64], rho: f64, kind: IntegralKind, n: usize) -> Result<f64> {
    RubenExpansion::new(lambda)?.residual_bound(kind, rho, n)
}

/// Evaluates the requested Gaussian ball integrals of λ at ρ.
pub fn eval_integrals(lambda: &[f64], rho: f64, epsilon: f64, want: Want) -> Result<BallIntegrals> {
    RubenExpansion::new(lambda)?.integrals(rho, epsilon, want)
}

/// Evaluates the requested integrals of λ at ρ, each entry x to within
/// ε·min(1, |x|).
pub fn eval_integrals_relative(lambda: &[f64], rho: f64, epsilon: f64, want: Want) -> Result<BallIntegrals> {
    RubenExpansion::new(lambda)?.integrals_relative(rho, epsilon, want)
}

/// Evaluates at several radii, building each coefficient table once.
pub fn eval_integrals_batch(lambda: &[f64], rhos: &[f64], epsilon: f64, want: Want) -> Result<Vec<BallIntegrals>> {
    let mut exp = RubenExpansion::new(lambda)?;
    // Largest radius first: it needs the longest series.
    let mut order: Vec<usize> = (0..rhos.len()).collect();
    order.sort_by(|&a, &b| rhos[b].total_cmp(&rhos[a]));
    let mut out = vec![None; rhos.len()];
    for i in order {
        out[i] = Some(exp.integrals(rhos[i], epsilon, want)?);
    }
    Ok(out.into_iter().map(Option::unwrap).collect())
}
