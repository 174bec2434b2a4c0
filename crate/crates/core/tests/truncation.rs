use sphtrunc::ensembles::{bartlett_sample, sample_spectrum, RngStream, WishartConfig};
use sphtrunc::linalg::{compose, eigh};
use sphtrunc::oracles::mc_truncated_moments;
use sphtrunc::ruben::Spectrum;
use sphtrunc::truncation::{check_feasibility, mu_bounds, truncate_matrix, truncate_spectrum};

#[test]
fn truncation_commutes_with_rotation() {
    for i in 0..10 {
        let sigma = bartlett_sample(WishartConfig::standard(5).unwrap(), RngStream::new(11, i));
        let rho = 0.4 + 0.3 * i as f64;
        let eig = eigh(&sigma).unwrap();
        let mu = truncate_spectrum(&Spectrum::new(eig.values.clone()).unwrap(), rho, 1e-14).unwrap();
        let expected = compose(&mu.mu, &eig.vectors).unwrap();
        let got = truncate_matrix(&sigma, rho, 1e-14).unwrap();
        assert!(got.as_matrix().max_abs_diff(expected.as_matrix()) < 1e-12);
    }
}

#[test]
fn matches_monte_carlo_for_small_example() {
    let lam = Spectrum::new(vec![0.5, 1.0, 2.0]).unwrap();
    let mu = truncate_spectrum(&lam, 1.0, 1e-14).unwrap();
    let mc = mc_truncated_moments(&lam, 1.0, 400_000, RngStream::new(5, 0)).unwrap();
    for (m, e) in mu.mu.iter().zip(&mc.mu) {
        assert!((m - e.value).abs() < 4.0 * e.std_error, "{m} vs {} ± {}", e.value, e.std_error);
    }
}

#[test]
fn truncated_spectra_are_ordered_and_bounded() {
    for v in 2..=8 {
        for i in 0..20 {
            let lam = sample_spectrum(WishartConfig::standard(v).unwrap(), RngStream::new(12, i)).unwrap();
            for rho in [0.1, 0.7, 2.5] {
                let mu = truncate_spectrum(&lam, rho, 1e-14).unwrap().mu;
                assert!(mu.windows(2).all(|w| w[0] <= w[1]), "{mu:?}");
                assert!(check_feasibility(&mu, rho).in_h);
                for (m, (lo, hi)) in mu.iter().zip(mu_bounds(&lam, rho).unwrap()) {
                    assert!(lo - 1e-12 <= *m && *m <= hi + 1e-12);
                }
                for (m, l) in mu.iter().zip(lam.iter()) {
                    assert!(m < l);
                }
            }
        }
    }
}

#[test]
fn rejects_non_positive_definite_matrix() {
    let s = sphtrunc::linalg::SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
    assert!(truncate_matrix(&s, 1.0, 1e-14).is_err());
}
