//! Independent reference computations used to validate the series module.
//!
//! These routines are slow on purpose and rely only on `specfun`: rejection
//! sampling, tensor Gauss–Legendre quadrature, closed forms for the isotropic
//! case, and Cauchy-integral Taylor coefficients of the generating functions.

use crate::ensembles::RngStream;
use crate::error::{domain, Error, Result};
use crate::ruben::IntegralKind;
use crate::specfun::{chi_square_cdf, Dof};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub n_accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McMoments {
    pub alpha: McEstimate,
    pub mu: Vec<McEstimate>,
}

const MC_CHUNK: usize = 100_000;

/// Rejection-sampling estimates of α and μ_k = E[x_k² | xᵀx < ρ] for
/// x ~ N(0, diag(λ)).
pub fn mc_truncated_moments(lambda: &[f64], rho: f64, n: usize, stream: RngStream) -> Result<McMoments> {
    if lambda.iter().any(|l| !(*l > 0.0)) || !(rho > 0.0) {
        return domain("Monte Carlo oracle needs positive eigenvalues and radius");
    }
    let v = lambda.len();
    let sd: Vec<f64> = lambda.iter().map(|l| l.sqrt()).collect();
    let chunks = n.div_ceil(MC_CHUNK);
    // Each chunk reads from its own far-apart position of the same stream.
    let partial: Vec<(usize, Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream.rng();
            rng.set_word_pos((c as u128) << 40);
            let count = MC_CHUNK.min(n - c * MC_CHUNK);
            let mut accepted = 0;
            let mut sum = vec![0.0; v];
            let mut sum_sq = vec![0.0; v];
            let mut x = vec![0.0; v];
            for _ in 0..count {
                let mut r2 = 0.0;
                for (xi, s) in x.iter_mut().zip(&sd) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *xi = z * s;
                    r2 += *xi * *xi;
                }
                if r2 < rho {
                    accepted += 1;
                    for k in 0..v {
                        let q = x[k] * x[k];
                        sum[k] += q;
                        sum_sq[k] += q * q;
                    }
                }
            }
            (accepted, sum, sum_sq)
        })
        .collect();

    let mut accepted = 0;
    let mut sum = vec![0.0; v];
    let mut sum_sq = vec![0.0; v];
    for (a, s, q) in partial {
        accepted += a;
        for k in 0..v {
            sum[k] += s[k];
            sum_sq[k] += q[k];
        }
    }
    if accepted < 2 {
        return Err(Error::Degenerate(format!("only {accepted} of {n} samples fell inside the ball")));
    }
    let p = accepted as f64 / n as f64;
    let alpha = McEstimate {
        value: p,
        std_error: (p * (1.0 - p) / n as f64).sqrt(),
        n_samples: n,
        n_accepted: accepted,
    };
    let na = accepted as f64;
    let mu = (0..v)
        .map(|k| {
            let mean = sum[k] / na;
            let var = (sum_sq[k] / na - mean * mean) * na / (na - 1.0);
            McEstimate { value: mean, std_error: (var.max(0.0) / na).sqrt(), n_samples: n, n_accepted: accepted }
        })
        .collect();
    Ok(McMoments { alpha, mu })
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and its derivative.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn mapped_rule(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    x.iter().zip(&w).map(|(x, w)| (a + half * (x + 1.0), half * w)).collect()
}

/// Quadrature of α and α_k over the ball in spherical coordinates, v ≤ 3.
/// `nodes` is the number of Gauss–Legendre points per coordinate.
pub fn quadrature_integrals(lambda: &[f64], rho: f64, nodes: usize) -> Result<(f64, Vec<f64>)> {
    let v = lambda.len();
    if !(1..=3).contains(&v) {
        return domain(format!("quadrature oracle supports v in 1..=3, got {v}"));
    }
    if lambda.iter().any(|l| !(*l > 0.0)) || !(rho > 0.0) {
        return domain("quadrature oracle needs positive eigenvalues and radius");
    }
    let norm = (2.0 * PI).powf(-0.5 * v as f64) / lambda.iter().product::<f64>().sqrt();
    let radial = mapped_rule(nodes, 0.0, rho.sqrt());
    // Directions u on the unit sphere with their surface weights.
    let directions: Vec<(Vec<f64>, f64)> = match v {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => mapped_rule(nodes, 0.0, 2.0 * PI).into_iter().map(|(t, w)| (vec![t.cos(), t.sin()], w)).collect(),
        _ => {
            let theta = mapped_rule(nodes, 0.0, PI);
            let phi = mapped_rule(nodes, 0.0, 2.0 * PI);
            let mut d = Vec::with_capacity(nodes * nodes);
            for &(t, wt) in &theta {
                for &(p, wp) in &phi {
                    d.push((vec![t.sin() * p.cos(), t.sin() * p.sin(), t.cos()], wt * wp * t.sin()));
                }
            }
            d
        }
    };
    let mut alpha = 0.0;
    let mut alpha_k = vec![0.0; v];
    for (u, wu) in &directions {
        let q: f64 = u.iter().zip(lambda).map(|(u, l)| u * u / l).sum();
        for &(t, wt) in &radial {
            let f = wu * wt * t.powi(v as i32 - 1) * (-0.5 * t * t * q).exp();
            alpha += f;
            for k in 0..v {
                alpha_k[k] += f * t * t * u[k] * u[k] / lambda[k];
            }
        }
    }
    Ok((norm * alpha, alpha_k.into_iter().map(|a| norm * a).collect()))
}

/// Quadrature estimate of α alone.
pub fn quadrature_alpha(lambda: &[f64], rho: f64, nodes: usize) -> Result<f64> {
    Ok(quadrature_integrals(lambda, rho, nodes)?.0)
}

fn cdf(n: usize, x: f64) -> Result<f64> {
    chi_square_cdf(Dof::new(n as u32)?, x)
}

/// Truncated second moment of the isotropic law c·I: c F_{v+2}(ρ/c)/F_v(ρ/c).
pub fn tallis_mu(c: f64, v: usize, rho: f64) -> Result<f64> {
    if !(c > 0.0) || !(rho > 0.0) || v == 0 {
        return domain("Tallis form needs c > 0, rho > 0, v >= 1");
    }
    Ok(c * cdf(v + 2, rho / c)? / cdf(v, rho / c)?)
}

/// Solves tallis_mu(λ, v, ρ) = m for λ by bisection on [m, 10⁶ m].
pub fn bisect_isotropic(m: f64, v: usize, rho: f64) -> Result<f64> {
    if !(m > 0.0) {
        return domain(format!("isotropic level must be positive, got {m}"));
    }
    let (mut lo, mut hi) = (m, 1e6 * m);
    if tallis_mu(hi, v, rho)? < m {
        return domain(format!("level {m} is not reachable for v = {v}, rho = {rho}"));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if tallis_mu(mid, v, rho)? < m {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Generating function of the series coefficients of `kind`, evaluated at a
/// complex point: Π_i (s/λ_i)^{e_i/2} [1 − (1 − s/λ_i) z]^{−e_i/2}, times 3
/// for a repeated index.
pub fn generating_function(lambda: &[f64], s: f64, kind: IntegralKind, z: Complex64) -> Complex64 {
    let mut e = vec![1.0; lambda.len()];
    let mut factor = 1.0;
    match kind {
        IntegralKind::Alpha => {}
        IntegralKind::AlphaK(k) => e[k] = 3.0,
        IntegralKind::AlphaJK(j, k) if j == k => {
            e[k] = 5.0;
            factor = 3.0;
        }
        IntegralKind::AlphaJK(j, k) => {
            e[j] = 3.0;
            e[k] = 3.0;
        }
    }
    lambda.iter().zip(&e).fold(Complex64::new(factor, 0.0), |acc, (l, e)| {
        let r = s / l;
        let base = Complex64::new(1.0, 0.0) - (1.0 - r) * z;
        acc * r.powf(0.5 * e) * base.powf(-0.5 * e)
    })
}

/// Taylor coefficients 0..=m_max of the generating function, by the
/// trapezoidal rule on a circle inside the disc of convergence.
pub fn taylor_coefficients(lambda: &[f64], s: f64, kind: IntegralKind, m_max: usize) -> Vec<f64> {
    let eta = lambda.iter().map(|l| (1.0 - s / l).abs()).fold(0.0, f64::max);
    let radius = if eta > 0.0 { (0.5 / eta).min(1.0) } else { 1.0 };
    let points = 128;
    let values: Vec<Complex64> = (0..points)
        .map(|j| {
            let theta = 2.0 * PI * j as f64 / points as f64;
            generating_function(lambda, s, kind, Complex64::from_polar(radius, theta))
        })
        .collect();
    (0..=m_max)
        .map(|m| {
            let sum: Complex64 = values
                .iter()
                .enumerate()
                .map(|(j, f)| f * Complex64::from_polar(1.0, -2.0 * PI * (j * m) as f64 / points as f64))
                .sum();
            sum.re / points as f64 / radius.powi(m as i32)
        })
        .collect()
}
