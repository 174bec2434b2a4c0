use sphtrunc::ensembles::{sample_spectrum, RngStream, WishartConfig};
use sphtrunc::oracles::bisect_isotropic;
use sphtrunc::reconstruction::{solve, Scheme, SolverConfig, Status};
use sphtrunc::ruben::Spectrum;
use sphtrunc::truncation::{truncate_spectrum, TruncatedSpectrum};

fn rel_sup(a: &[f64], b: &[f64]) -> f64 {
    let d = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    d / b.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[test]
fn isotropic_inversion_matches_bisection() {
    for v in [1usize, 3, 6] {
        for rho in [0.3, 1.0, 4.0] {
            let mu = truncate_spectrum(&Spectrum::isotropic(1.3, v).unwrap(), rho, 1e-14).unwrap();
            let expected = bisect_isotropic(mu.mu[0], v, rho).unwrap();
            let cfg = SolverConfig { eps_t: 1e-10, ..SolverConfig::with_scheme(Scheme::Gj) };
            let trace = solve(&mu, &cfg).unwrap();
            assert_eq!(trace.status, Status::Converged);
            for l in &trace.lambda_hat {
                assert!((l - expected).abs() / expected < 1e-6, "v={v} rho={rho}: {l} vs {expected}");
            }
        }
    }
}

#[test]
fn over_relaxation_beats_plain_iteration_at_v10() {
    let lam = sample_spectrum(WishartConfig::standard(10).unwrap(), RngStream::new(21, 0)).unwrap();
    // Close to the mode of the smallest eigenvalue at v = 10.
    let mu = truncate_spectrum(&lam, 0.1258, 1e-14).unwrap();
    let gj = solve(&mu, &SolverConfig::with_scheme(Scheme::Gj)).unwrap();
    let gjor = solve(&mu, &SolverConfig::with_scheme(Scheme::Gjor)).unwrap();
    assert_eq!(gj.status, Status::Converged);
    assert_eq!(gjor.status, Status::Converged);
    assert!(gjor.omega > 1.0);
    assert!(gjor.n_it < gj.n_it, "GJOR {} vs GJ {}", gjor.n_it, gj.n_it);
}

#[test]
fn schemes_reach_the_same_solution() {
    for i in 0..5 {
        let lam = sample_spectrum(WishartConfig::standard(4).unwrap(), RngStream::new(22, i)).unwrap();
        let mu = truncate_spectrum(&lam, 0.8, 1e-14).unwrap();
        let eps_t = 1e-10;
        let mut sols = Vec::new();
        for scheme in [Scheme::Gj, Scheme::Gjor, Scheme::Boosted] {
            let cfg = SolverConfig { eps_t, beta: 0.4, ..SolverConfig::with_scheme(scheme) };
            let trace = solve(&mu, &cfg).unwrap();
            assert_eq!(trace.status, Status::Converged, "{scheme:?}");
            sols.push(trace.lambda_hat);
        }
        // Each run stops within about ε_T/(1 − q) of the fixed point.
        assert!(rel_sup(&sols[1], &sols[0]) < 1e-7);
        assert!(rel_sup(&sols[2], &sols[0]) < 1e-7);
        assert!(rel_sup(&sols[0], &lam) < 1e-7);
    }
}

#[test]
fn plain_iterates_increase_towards_lambda() {
    let lam = sample_spectrum(WishartConfig::standard(6).unwrap(), RngStream::new(23, 0)).unwrap();
    let mu = truncate_spectrum(&lam, 0.07, 1e-14).unwrap();
    let cfg = SolverConfig { record_history: true, ..SolverConfig::with_scheme(Scheme::Gj) };
    let trace = solve(&mu, &cfg).unwrap();
    let hist = trace.iterates.unwrap();
    assert_eq!(hist.len(), trace.n_it + 1);
    for w in hist.windows(2) {
        for k in 0..lam.dim() {
            assert!(w[0][k] <= w[1][k] && w[1][k] <= lam[k]);
        }
    }
}

#[test]
fn infeasible_input_is_rejected() {
    let mu = TruncatedSpectrum::new(vec![0.5, 0.5, 0.5], 1.0).unwrap();
    assert!(solve(&mu, &SolverConfig::default()).is_err());
}
