mod common;

use collapse_core::gmm::{approx_joint_ml, joint_ml, DEFAULT_TOL};
use collapse_core::math::chi2_scaled_moment;
use collapse_core::processes::sample_mixture;
use collapse_core::rng::trajectory_rng;
use common::*;
use rand::Rng;

#[test]
fn chi2_moment_matches_quadrature() {
    for m in 2..=50 {
        for i in 1..=9 {
            let t = i as f64 / 10.0;
            let got = chi2_scaled_moment(t, m).unwrap();
            let want = chi2_moment_by_quadrature(t, m);
            assert!((got - want).abs() <= 1e-9 * want, "m={m} t={t}: {got} vs {want}");
        }
    }
}

#[test]
fn chi2_moment_reference_point() {
    let v = chi2_moment_by_quadrature(0.5, 9);
    assert!((v - 0.97266).abs() < 5e-6, "{v}");
}

#[test]
fn quadrature_oracle_recovers_integer_moments() {
    for m in [2, 9, 40] {
        assert!((chi2_moment_by_quadrature(1.0, m) - 1.0).abs() < 1e-12);
        let second = 1.0 + 2.0 / m as f64;
        assert!((chi2_moment_by_quadrature(2.0, m) - second).abs() < 1e-11);
    }
}

#[test]
fn library_log_likelihood_agrees_with_direct_mixture() {
    let xs = [0.3, -1.7, 2.2, -0.1, 0.9];
    for (mu, sigma) in [(0.0, 1.0), (1.0, 0.5), (2.5, 0.2), (0.7, 3.0)] {
        let a = collapse_core::gmm::log_likelihood(&xs, mu, sigma);
        let b = mixture_log_likelihood(&xs, mu, sigma);
        assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn joint_ml_is_a_grid_maximum() {
    let mut rng = trajectory_rng(2024, 0);
    let mut xs = Vec::new();
    for case in 0..100 {
        let n = rng.random_range(3..=20);
        let mu = rng.random_range(0.0..3.0);
        let sigma = rng.random_range(0.2..2.0);
        sample_mixture(mu, sigma, n, &mut rng, &mut xs);
        let est = joint_ml(&xs, DEFAULT_TOL).unwrap();
        let (mu_hat, sigma_hat) = (est.mu_hat, est.sigma_hat());
        let ll = mixture_log_likelihood(&xs, mu_hat, sigma_hat);
        let slack = 1e-9 * ll.abs().max(1.0);
        let (local, lm, ls) = local_grid_max(&xs, mu_hat, sigma_hat, 1e-3, 5);
        assert!(
            local <= ll + slack,
            "case {case}: local grid ({lm},{ls}) beats ({mu_hat},{sigma_hat}) by {}",
            local - ll
        );
        let (global, gm, gs) = global_grid_max(&xs, 200);
        assert!(
            global <= ll + slack,
            "case {case}: global grid ({gm},{gs}) beats ({mu_hat},{sigma_hat}) by {}",
            global - ll
        );
    }
}

#[test]
fn approx_estimator_is_close_to_joint_ml_for_separated_components() {
    let mut rng = trajectory_rng(7, 0);
    let mut xs = Vec::new();
    for _ in 0..50 {
        sample_mixture(5.0, 1.0, 30, &mut rng, &mut xs);
        let a = approx_joint_ml(&xs).unwrap();
        let j = joint_ml(&xs, DEFAULT_TOL).unwrap();
        assert!((a.mu_hat - j.mu_hat).abs() < 0.1, "{} vs {}", a.mu_hat, j.mu_hat);
    }
}
