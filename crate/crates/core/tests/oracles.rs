//! Cross-checks of closed forms against the independent quadrature,
//! Monte-Carlo and hand-derived oracles.

use gvi_core::divergence::{closed_form, divergence_gradient, DivergenceSpec};
use gvi_core::oracle::{integrate_1d, integrate_2d, QuadratureConfig};
use gvi_core::scoring::{integral_term, LikelihoodModel};
use gvi_core::{ExpFamDistribution, FamilyKind};

fn assert_close(actual: f64, expected: f64, tol: f64) {
    let diff = (actual - expected).abs();
    assert!(
        diff <= tol,
        "expected {expected}, got {actual}, |diff|={diff}, tol={tol}"
    );
}

#[test]
fn univariate_densities_integrate_to_one() {
    let cfg = QuadratureConfig::default();
    let normal = ExpFamDistribution::univariate_normal(0.7, 2.3).unwrap();
    let (mass, _) = integrate_1d(
        |x| normal.log_pdf(&[x]).unwrap().exp(),
        0.7 - 12.0 * 2.3f64.sqrt(),
        0.7 + 12.0 * 2.3f64.sqrt(),
        &cfg,
    )
    .unwrap();
    assert_close(mass, 1.0, 1e-4);

    let ig = ExpFamDistribution::inverse_gamma(3.0, 5.0).unwrap();
    let (mass, _) = integrate_1d(|x| ig.log_pdf(&[x]).unwrap().exp(), 1e-6, 400.0, &cfg).unwrap();
    assert_close(mass, 1.0, 1e-4);
}

#[test]
fn nig_log_partition_matches_quadrature() {
    // exp(A) should equal ∫∫ h·exp{ηᵀT} dθ dσ², computed by the 2-D rule on
    // the unnormalized density exp(log_pdf + A).
    let q = ExpFamDistribution::normal_inverse_gamma(&[0.0], &[1.0], 2.0, 1.0).unwrap();
    let log_a = q.kind().log_partition(q.natural_params()).unwrap();
    let cfg = QuadratureConfig {
        abs_tol: 1e-9,
        rel_tol: 1e-9,
        max_subdivisions: 4_000,
    };
    let (mass, _) = integrate_2d(
        |theta, s2| q.log_pdf(&[theta, s2]).unwrap().exp(),
        (-60.0, 60.0),
        (1e-6, 250.0),
        &cfg,
    )
    .unwrap();
    // Normalized mass equal to one is exactly the statement that A(η) is the
    // correct log-normalizer.
    assert_close(mass, 1.0, 1e-5);
    assert!(log_a.is_finite());
}

#[test]
fn mixture_power_integral_matches_gauss_kronrod() {
    let model = LikelihoodModel::GaussianMixture2 { sigma: 0.65 };
    let theta = [0.0, 2.0];
    for c in [1.05, 1.5, 2.0] {
        let production = integral_term(&model, &theta, c);
        let cfg = QuadratureConfig::default();
        let (oracle, _) = integrate_1d(
            |y| (c * model.log_likelihood(&theta, &[y])).exp(),
            -12.0,
            14.0,
            &cfg,
        )
        .unwrap();
        assert_close(production, oracle, 1e-6);
    }
}

#[test]
fn inverse_gamma_mean_stats_match_monte_carlo() {
    let (a, b) = (3.0, 5.0);
    let ig = ExpFamDistribution::inverse_gamma(a, b).unwrap();
    let expected = ig.mean_sufficient_stats();
    let n = 1_000_000;
    let draws = ig.sample(n, 123);
    let mean_inv: f64 = draws.iter().map(|d| 1.0 / d[0]).sum::<f64>() / n as f64;
    let mean_log: f64 = draws.iter().map(|d| d[0].ln()).sum::<f64>() / n as f64;
    // E[1/σ²] = a/b has sd (a/b²)·... bounded crudely by a/b/√n·2.
    assert_close(mean_inv, expected[0], 5.0 * expected[0] / (n as f64).sqrt());
    assert_close(mean_log, expected[1], 5.0 / (n as f64).sqrt() * 2.0);
}

#[test]
fn fig4_pair_renyi_closed_form_matches_monte_carlo() {
    // The well-separated NIG pair: closed form within 3 SE of sampling.
    let q = ExpFamDistribution::normal_inverse_gamma(&[2.5, 2.5], &[0.3, 0.3], 512.0, 543.0)
        .unwrap();
    let p = ExpFamDistribution::normal_inverse_gamma(&[0.0, 0.0], &[25.0, 25.0], 500.0, 500.0)
        .unwrap();
    let spec = DivergenceSpec::AlphaRenyi { alpha: 0.5 };
    let exact = closed_form(&q, &p, &spec).unwrap().value;
    let mc = gvi_core::divergence::mc_estimate(&q, &p, &spec, 200_000, 99).unwrap();
    match mc.path {
        gvi_core::divergence::EvalPath::MonteCarlo { std_error, .. } => {
            assert_close(mc.value, exact, 3.0 * std_error);
        }
        _ => unreachable!(),
    }
}

#[test]
fn renyi_gradient_matches_hand_derived_formula() {
    // For univariate normals, with v_mix = α·v_p + (1−α)·v_q and Δ = μ_q − μ_p,
    //   D = Δ²/(2·v_mix) − (1/(2α(α−1)))·log(v_mix / (v_q^{1−α}·v_p^α)),
    // so that
    //   ∂D/∂μ_q = Δ / v_mix
    //   ∂D/∂v_q = −(1−α)·Δ²/(2·v_mix²) + (1/(2α))·(1/v_mix − 1/v_q).
    let alpha = 0.5;
    let (mu_q, v_q) = (1.2, 0.7);
    let (mu_p, v_p) = (-0.3, 1.8);
    let p = ExpFamDistribution::univariate_normal(mu_p, v_p).unwrap();
    let grad = divergence_gradient(
        FamilyKind::UnivariateNormal,
        &[mu_q, v_q],
        &p,
        &DivergenceSpec::AlphaRenyi { alpha },
    )
    .unwrap();
    let v_mix = alpha * v_p + (1.0 - alpha) * v_q;
    let delta = mu_q - mu_p;
    let d_mu = delta / v_mix;
    let d_v = -(1.0 - alpha) * delta * delta / (2.0 * v_mix * v_mix)
        + (1.0 / v_mix - 1.0 / v_q) / (2.0 * alpha);
    assert_close(grad[0], d_mu, 1e-4 * (1.0 + d_mu.abs()));
    assert_close(grad[1], d_v, 1e-4 * (1.0 + d_v.abs()));
}

#[test]
fn renyi_closed_form_matches_the_same_analytic_value() {
    // Same hand-derived expression, now for the value itself.
    let alpha = 0.5;
    let (mu_q, v_q) = (1.2, 0.7);
    let (mu_p, v_p) = (-0.3, 1.8);
    let q = ExpFamDistribution::univariate_normal(mu_q, v_q).unwrap();
    let p = ExpFamDistribution::univariate_normal(mu_p, v_p).unwrap();
    let v_mix = alpha * v_p + (1.0 - alpha) * v_q;
    let delta = mu_q - mu_p;
    let analytic = delta * delta / (2.0 * v_mix)
        - (v_mix / (v_q.powf(1.0 - alpha) * v_p.powf(alpha))).ln()
            / (2.0 * alpha * (alpha - 1.0));
    let value = closed_form(&q, &p, &DivergenceSpec::AlphaRenyi { alpha })
        .unwrap()
        .value;
    assert_close(value, analytic, 1e-12);
}
