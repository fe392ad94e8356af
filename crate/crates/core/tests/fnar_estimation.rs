mod common;

use common::{qr_least_squares, stacked_system};
use fnar::forecastlab::fit_ar1;
use fnar::model::{
    self, build_heterogeneous_design, fit_heterogeneous, fit_ols, fit_sur, fit_with_covariance,
    forecast_one_step, rescale_to_layers, EffectsMode, Estimator, PanelSeries,
};
use fnar::montecarlo::{generate, Synthetic, SyntheticSpec};
use fnar::netfactors::estimate_factor_model;
use fnar::{Error, Matrix, Tensor3};
use nalgebra::DVector;
use proptest::prelude::*;

fn synthetic(n: usize, m: usize, r: usize, t: usize, seed: u64) -> Synthetic {
    let mut spec = SyntheticSpec::new(n, m, r, t);
    spec.seed = seed;
    spec.noise_sd = 0.05;
    generate(&spec).unwrap()
}

#[test]
fn residuals_are_orthogonal_to_the_design() {
    let d = synthetic(5, 6, 2, 120, 1);
    let fit = fit_ols(&d.y, d.truth.factors()).unwrap();
    let (x, target) = stacked_system(&d.y, d.truth.factors());
    let resid = &target - &x * &fit.theta;
    let score = x.tr_mul(&resid);
    assert!(score.amax() <= 1e-8 * x.tr_mul(&target).amax());
    // residual matrix reproduces y - fitted exactly
    for t in 0..fit.n_obs() {
        for i in 0..5 {
            assert_eq!(
                fit.residuals[(t, i)],
                d.y.values()[(t + 1, i)] - fit.fitted[(t, i)]
            );
        }
    }
    assert_eq!(fit.sigma_nu, fit.sigma_nu.transpose());
    assert!(fit.sigma_nu.clone().symmetric_eigen().eigenvalues.min() >= -1e-12);
    assert!((fit.dof_divisor - (119.0 - 2.0 / 5.0 - 2.0)).abs() < 1e-12);
}

#[test]
fn intercept_only_process_gives_sample_means() {
    let mut spec = SyntheticSpec::new(4, 5, 1, 400);
    spec.beta = vec![0.0];
    spec.rho = vec![0.0; 4];
    spec.alpha = vec![1.0, 2.0, -1.0, 0.5];
    spec.shock_sd = 0.01;
    spec.seed = 2;
    let d = generate(&spec).unwrap();
    let fit = fit_ols(&d.y, d.truth.factors()).unwrap();
    for i in 0..4 {
        let mean = d.y.values().column(i).rows(1, 399).mean();
        assert!(
            (fit.coefficients.alpha[i] - mean).abs() < 4.0 * fit.alpha_se[i],
            "node {i}"
        );
        assert!(fit.coefficients.rho[i].abs() < 4.0 * fit.rho_se[i]);
    }
}

#[test]
fn large_sample_estimate_within_three_standard_errors() {
    let mut spec = SyntheticSpec::new(5, 6, 2, 2000);
    spec.seed = 3;
    let d = generate(&spec).unwrap();
    let fit = fit_ols(&d.y, d.truth.factors()).unwrap();
    let truth = fnar::montecarlo::aligned_truth(&d.theta, &[1.0, 1.0]);
    for j in 0..fit.theta.len() {
        let se = fit.theta_cov[(j, j)].sqrt();
        assert!(
            (fit.theta[j] - truth[j]).abs() <= 3.0 * se,
            "{}",
            fit.column_names[j]
        );
    }
}

#[test]
fn diagonal_covariance_is_weighted_least_squares() {
    let d = synthetic(4, 5, 2, 80, 4);
    let sd = [0.5, 1.0, 2.0, 4.0];
    let sigma = Matrix::from_diagonal(&DVector::from_iterator(4, sd.iter().map(|s| s * s)));
    let gls = fit_with_covariance(&d.y, d.truth.factors(), EffectsMode::Homogeneous, &sigma).unwrap();
    let (mut x, mut target) = stacked_system(&d.y, d.truth.factors());
    for row in 0..x.nrows() {
        let w = 1.0 / sd[row % 4];
        x.row_mut(row).scale_mut(w);
        target[row] *= w;
    }
    let wls = qr_least_squares(&x, &target);
    assert!((&gls.theta - &wls).norm() <= 1e-9 * wls.norm());
}

#[test]
fn spherical_covariance_reproduces_ols_bit_for_bit() {
    let d = synthetic(3, 4, 1, 50, 5);
    let ols = fit_ols(&d.y, d.truth.factors()).unwrap();
    for s2 in [1.0, 0.37, 12.5] {
        let sur = fit_with_covariance(
            &d.y,
            d.truth.factors(),
            EffectsMode::Homogeneous,
            &(Matrix::identity(3, 3) * s2),
        )
        .unwrap();
        assert_eq!(sur.theta, ols.theta);
    }
}

#[test]
fn sur_handles_short_samples_with_ridge() {
    let d = synthetic(8, 5, 1, 6, 6);
    let fit = fit_sur(&d.y, d.truth.factors(), 3).unwrap();
    assert!(fit.theta.iter().all(|v| v.is_finite()));
}

#[test]
fn heterogeneous_effects_cluster_around_common_beta() {
    let spread = |t: usize| {
        let d = synthetic(4, 5, 1, t, 7);
        let fit = fit_heterogeneous(&d.y, d.truth.factors(), Estimator::Ols).unwrap();
        let b: Vec<f64> = fit.coefficients.beta.column(0).iter().copied().collect();
        b.iter().map(|v| (v - 0.5).abs()).fold(0.0, f64::max)
    };
    let (short, long) = (spread(200), spread(5000));
    assert!(long < short, "{long} vs {short}");
    assert!(long < 0.2);
}

#[test]
fn single_node_reduces_to_ar1() {
    let mut rng = common::rng(8);
    let mut series = vec![0.0];
    for _ in 1..100 {
        let prev = *series.last().unwrap();
        series.push(
            0.3 + 0.6 * prev + rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng),
        );
    }
    let y = PanelSeries::from_matrix(Matrix::from_column_slice(100, 1, &series)).unwrap();
    // a single node has no links, so every factor is empty
    let factors: Vec<Tensor3> = (0..100).map(|_| Tensor3::zeros([1, 1, 1])).collect();
    let fit = fit_heterogeneous(&y, &factors, Estimator::Ols).unwrap();
    assert_eq!(fit.dropped_columns, vec!["beta_1_1".to_string()]);
    let ar = fit_ar1(&series).unwrap();
    assert!((fit.coefficients.rho[0] - ar.rho).abs() < 1e-10);
    assert!((fit.coefficients.alpha[0] - ar.alpha).abs() < 1e-10);
    assert_eq!(fit.coefficients.beta[(0, 0)], 0.0);
    // homogeneous mode cannot drop the column and reports it instead
    match fit_ols(&y, &factors) {
        Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec!["beta_1".to_string()]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn pooled_heterogeneous_design_reproduces_homogeneous_fit() {
    let d = synthetic(3, 4, 2, 90, 9);
    let (n, r) = (3, 2);
    let w = r + 2;
    // pooling map: heterogeneous column -> homogeneous column
    let mut pool = Matrix::zeros(n * w, r + 2 * n);
    for i in 0..n {
        for k in 0..r {
            pool[(i * w + k, k)] = 1.0;
        }
        pool[(i * w + r, r + i)] = 1.0;
        pool[(i * w + r + 1, r + n + i)] = 1.0;
    }
    let f = d.truth.factors();
    let mut rows = Vec::new();
    let mut target = Vec::new();
    for t in 1..90 {
        let x = build_heterogeneous_design(&d.y.row(t - 1), &f[t - 1]).unwrap() * &pool;
        for i in 0..n {
            rows.push(x.row(i).into_owned());
            target.push(d.y.values()[(t, i)]);
        }
    }
    let x = Matrix::from_rows(&rows);
    let restricted = qr_least_squares(&x, &DVector::from_vec(target));
    let hom = fit_ols(&d.y, f).unwrap();
    assert!((&hom.theta - &restricted).norm() <= 1e-9 * restricted.norm());
}

#[test]
fn rescaling_cases() {
    let d = synthetic(4, 5, 1, 60, 10);
    let (est, _) = estimate_factor_model(&d.panel, 1).unwrap();
    let mut fit = fit_ols(&d.y, est.factors()).unwrap();
    fit.coefficients.beta[(0, 0)] = 0.0;
    assert_eq!(rescale_to_layers(&fit, &est).unwrap(), DVector::zeros(5));

    // m = r: b solves U' b = beta
    let d = synthetic(4, 2, 2, 60, 11);
    let (est, _) = estimate_factor_model(&d.panel, 2).unwrap();
    let fit = fit_ols(&d.y, est.factors()).unwrap();
    let b = rescale_to_layers(&fit, &est).unwrap();
    let direct = est
        .loadings()
        .transpose()
        .lu()
        .solve(&fit.beta().unwrap())
        .unwrap();
    assert!((b - direct).amax() < 1e-12);

    let het = fit_heterogeneous(&d.y, est.factors(), Estimator::Ols).unwrap();
    assert!(rescale_to_layers(&het, &est).is_err());
}

#[test]
fn forecast_cases() {
    let d = synthetic(3, 4, 2, 50, 12);
    let fit = fit_ols(&d.y, d.truth.factors()).unwrap();
    let f_last = &d.truth.factors()[49];
    let zero = forecast_one_step(&fit, &DVector::zeros(3), f_last).unwrap();
    assert_eq!(zero, fit.coefficients.alpha);

    let mut ar_only = fit.clone();
    ar_only.coefficients.beta.fill(0.0);
    let y = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    let expect = fit.coefficients.rho.component_mul(&y) + &fit.coefficients.alpha;
    assert!((forecast_one_step(&ar_only, &y, f_last).unwrap() - expect).amax() < 1e-15);

    // direct evaluation of the recursion
    let mut brute = fit.coefficients.alpha.clone();
    for i in 0..3 {
        brute[i] += fit.coefficients.rho[i] * y[i];
        for k in 0..2 {
            for j in 0..3 {
                brute[i] += fit.coefficients.beta[(0, k)] * f_last.get(i, j, k) * y[j];
            }
        }
    }
    assert!((forecast_one_step(&fit, &y, f_last).unwrap() - brute).amax() < 1e-13);
}

#[test]
fn collinear_design_names_columns() {
    let y = PanelSeries::from_matrix(Matrix::from_fn(10, 2, |t, i| {
        (t * (i + 1)) as f64 + 0.3 * ((t * 7) % 3) as f64
    }))
    .unwrap();
    let zeros: Vec<Tensor3> = (0..10).map(|_| Tensor3::zeros([2, 2, 1])).collect();
    match fit_ols(&y, &zeros) {
        Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec!["beta_1".to_string()]),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        fit_ols(&y, &zeros[..3]),
        Err(Error::DimensionMismatch(_))
    ));
    assert!(matches!(
        model::fit_ols(&y.head(1), &zeros),
        Err(Error::InsufficientData(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sign_flip_of_factor_and_beta_is_invisible(seed in 0u64..500, flip_first in any::<bool>()) {
        let d = synthetic(4, 5, 2, 60, seed);
        let (est, _) = estimate_factor_model(&d.panel, 2).unwrap();
        let flipped = est.with_flipped(&[flip_first, !flip_first]);
        let a = fit_ols(&d.y, est.factors()).unwrap();
        let b = fit_ols(&d.y, flipped.factors()).unwrap();
        let s = if flip_first { [-1.0, 1.0] } else { [1.0, -1.0] };
        for k in 0..2 {
            prop_assert!((a.theta[k] - s[k] * b.theta[k]).abs() < 1e-10);
        }
        prop_assert!((&a.fitted - &b.fitted).amax() < 1e-10);
        prop_assert!((&a.residuals - &b.residuals).amax() < 1e-10);
        let (ra, rb) = (rescale_to_layers(&a, &est).unwrap(), rescale_to_layers(&b, &flipped).unwrap());
        prop_assert!((ra - rb).amax() < 1e-10);
        let y = d.y.row(59);
        let fa = forecast_one_step(&a, &y, &est.factors()[59]).unwrap();
        let fb = forecast_one_step(&b, &y, &flipped.factors()[59]).unwrap();
        prop_assert!((fa - fb).amax() < 1e-10);
    }
}
