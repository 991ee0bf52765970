mod common;

use common::{enumerated_loglik, enumerated_posteriors, random_data, random_params, tiny_instance};
use nalgebra::DMatrix;
use npmlca::estimator::{
    e_step, fast_loglik, fit, hessian_asymmetry, loglik_gradient, m_step, numerical_hessian,
    random_start, regression_coefficients, standard_errors, weighted_logit_gradient,
    weighted_logit_objective, with_regression_coefficients, FitOptions,
};
use npmlca::model::total_loglik;
use npmlca::simulator::{build_true_parameters, condition_grid, generate_from_parameters};
use npmlca::{Dataset, Individual, ModelSpec, Parameters, Site};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn likelihood_matches_enumeration(seed in any::<u64>()) {
        let (_, params, data) = tiny_instance(seed);
        let oracle = enumerated_loglik(&params, &data);
        let reference = total_loglik(&data, &params).unwrap();
        let fast = fast_loglik(&data, &params).unwrap();
        prop_assert!((reference - oracle).abs() < 1e-10, "{reference} vs {oracle}");
        prop_assert!((fast - oracle).abs() < 1e-10, "{fast} vs {oracle}");
    }

    #[test]
    fn posteriors_match_enumeration(seed in any::<u64>()) {
        let (_, params, data) = tiny_instance(seed);
        let post = e_step(&data, &params).unwrap();
        let (w_post, c_marg) = enumerated_posteriors(&params, &data);
        for (j, row) in w_post.iter().enumerate() {
            for (a, b) in post.site(j).iter().zip(row) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
        for (i, row) in c_marg.iter().enumerate() {
            let got = post.marginal(i);
            prop_assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            for (a, b) in got.iter().zip(row) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn loglik_invariant_under_class_permutation(seed in any::<u64>(), shift in 0usize..6) {
        let (spec, params, data) = tiny_instance(seed);
        let l = spec.level1_classes;
        let m = spec.level2_classes;
        let perm1: Vec<usize> = (0..l).map(|c| (c + shift) % l).collect();
        let perm2: Vec<usize> = (0..m).map(|w| (w + shift) % m).collect();
        let moved = params.relabel(&perm1, &perm2);
        let a = total_loglik(&data, &params).unwrap();
        let b = total_loglik(&data, &moved).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn em_never_decreases_loglik(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = ModelSpec::binary(4, 3, 2, 1, 1).unwrap();
        let data = random_data(&spec, &mut rng, 8, 3, 10);
        let start = random_params(&spec, &mut rng, 1.0);
        let mut params = start;
        let mut previous = total_loglik(&data, &params).unwrap();
        for _ in 0..30 {
            let post = e_step(&data, &params).unwrap();
            params = m_step(&data, &post, &params).unwrap();
            let current = total_loglik(&data, &params).unwrap();
            prop_assert!(current >= previous - 1e-8, "{previous} -> {current}");
            previous = current;
        }
    }
}

fn small_design_dataset(seed: u64) -> (Parameters, Dataset) {
    let cond = condition_grid()[79];
    let truth = build_true_parameters(&cond).unwrap();
    let data = generate_from_parameters(&truth, 40, 12, seed).unwrap();
    (truth, data)
}

#[test]
fn m_step_gradient_matches_central_differences() {
    for seed in 0..5 {
        let (truth, data) = small_design_dataset(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = truth.spec();
        let post = e_step(&data, &random_start(&spec, &mut rng)).unwrap();
        let at = random_params(&spec, &mut rng, 0.8);
        let analytic = weighted_logit_gradient(&data, &post, &at).unwrap();
        let coords = regression_coefficients(&at);
        for i in 0..coords.len() {
            let h = 1e-5;
            let (mut up, mut down) = (coords.clone(), coords.clone());
            up[i] += h;
            down[i] -= h;
            let f = |c: &[f64]| {
                weighted_logit_objective(&data, &post, &with_regression_coefficients(&at, c).unwrap())
                    .unwrap()
            };
            let numeric = (f(&up) - f(&down)) / (2.0 * h);
            let rel = (analytic[i] - numeric).abs() / numeric.abs().max(1.0);
            assert!(rel < 1e-5, "coordinate {i}: {} vs {numeric}", analytic[i]);
        }
    }
}

#[test]
fn score_matches_finite_differences_of_loglik() {
    let (truth, data) = small_design_dataset(3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let at = random_params(&truth.spec(), &mut rng, 1.0);
    let spec = at.spec();
    let score = loglik_gradient(&data, &at).unwrap();
    let base = at.to_free();
    for i in 0..base.len() {
        let h = 1e-5;
        let (mut up, mut down) = (base.clone(), base.clone());
        up[i] += h;
        down[i] -= h;
        let f = |v: &[f64]| total_loglik(&data, &Parameters::from_free(&spec, v).unwrap()).unwrap();
        let numeric = (f(&up) - f(&down)) / (2.0 * h);
        assert!(
            (score[i] - numeric).abs() / numeric.abs().max(1.0) < 1e-5,
            "parameter {i}: {} vs {numeric}",
            score[i]
        );
    }
}

#[test]
fn hessian_is_symmetric_at_the_estimate() {
    let (truth, data) = small_design_dataset(5);
    let result = fit(&data, &truth.spec(), &FitOptions { seed: 5, ..FitOptions::default() }).unwrap();
    let h = numerical_hessian(&data, &result.params).unwrap();
    assert!(hessian_asymmetry(&h) < 1e-4);
    assert!(result.diagnostics.hessian_asymmetry < 1e-4);
}

#[test]
fn asymmetry_measure() {
    let h = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.1, 4.0]);
    assert!((hessian_asymmetry(&h) - 0.1 / 4.0).abs() < 1e-12);
}

fn single_class_data(n: usize, seed: u64) -> Dataset {
    let spec = ModelSpec::binary(3, 1, 1, 0, 0).unwrap();
    let mut p = Parameters::zeros(&spec);
    p.set_binary_crp(&[vec![0.3], vec![0.6], vec![0.85]]).unwrap();
    generate_from_parameters(&p, 10, n / 10, seed).unwrap()
}

#[test]
fn one_class_model_has_closed_form_solution() {
    let data = single_class_data(2000, 4);
    let spec = ModelSpec::binary(3, 1, 1, 0, 0).unwrap();
    let result = fit(&data, &spec, &FitOptions::default()).unwrap();
    let n = data.n_individuals() as f64;
    let mut expected_ll = 0.0;
    for k in 0..3 {
        let endorsed = data.individuals().filter(|(_, i)| i.y[k] == 2).count() as f64;
        let p_hat = endorsed / n;
        assert!((result.params.crp(k, 0)[1] - p_hat).abs() < 1e-6);
        expected_ll += endorsed * p_hat.ln() + (n - endorsed) * (1.0 - p_hat).ln();
        // logit-scale binomial standard error
        let se = 1.0 / (n * p_hat * (1.0 - p_hat)).sqrt();
        let got = result.se[k].unwrap();
        assert!((got - se).abs() / se < 1e-3, "indicator {k}: {got} vs {se}");
    }
    assert!((result.loglik - expected_ll).abs() < 1e-6);
    assert!(result.converged);
}

#[test]
fn fitting_from_permuted_start_gives_permuted_solution() {
    let (truth, data) = small_design_dataset(8);
    let spec = truth.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let start = random_start(&spec, &mut rng);
    let perm1 = [2, 0, 1];
    let perm2 = [1, 0];
    let options = |s: Parameters| FitOptions {
        start: Some(s),
        compute_se: false,
        tolerance: 1e-12,
        max_iterations: 3000,
        ..FitOptions::default()
    };
    let a = fit(&data, &spec, &options(start.clone())).unwrap();
    let b = fit(&data, &spec, &options(start.relabel(&perm1, &perm2))).unwrap();
    assert!((a.loglik - b.loglik).abs() < 1e-6 * a.loglik.abs());
    let expected = a.params.relabel(&perm1, &perm2);
    for (x, y) in expected.crp_matrix().iter().flatten().zip(b.params.crp_matrix().iter().flatten()) {
        assert!((x - y).abs() < 1e-5, "{x} vs {y}");
    }
    for (x, y) in expected.to_free().iter().zip(b.params.to_free()) {
        assert!((x - y).abs() < 1e-3, "{x} vs {y}");
    }
}

#[test]
fn fit_is_deterministic_and_trace_ascends() {
    let (truth, data) = small_design_dataset(2);
    let options = FitOptions {
        seed: 9,
        keep_trace: true,
        ..FitOptions::default()
    };
    let a = fit(&data, &truth.spec(), &options).unwrap();
    let b = fit(&data, &truth.spec(), &options).unwrap();
    assert_eq!(a, b);
    assert!(a.trace.windows(2).all(|w| w[1] >= w[0] - 1e-8));
    assert_eq!(a.trace.len(), a.iterations + 1);
}

#[test]
fn posteriors_normalized_on_design_data() {
    let (truth, data) = small_design_dataset(1);
    let post = e_step(&data, &truth).unwrap();
    for row in post.marginal_rows().into_iter().chain(post.site_rows()) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
    for i in 0..post.n_individuals() {
        for m in 0..post.level2_classes {
            assert!((post.conditional(i, m).iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn standard_errors_match_free_parameter_count() {
    let (truth, data) = small_design_dataset(4);
    let errs = standard_errors(&data, &truth).unwrap();
    assert_eq!(errs.se.len(), truth.to_free().len());
    assert!(errs.se.iter().all(|s| s.is_some_and(|v| v > 0.0)));
}

#[test]
fn rejects_mismatched_data() {
    let spec = ModelSpec::binary(2, 2, 1, 0, 0).unwrap();
    let data = Dataset::new(vec![Site {
        id: "a".into(),
        z: vec![],
        rows: vec![Individual { y: vec![1, 3], x: vec![] }],
    }]);
    assert!(fit(&data, &spec, &FitOptions::default()).is_err());
    let empty = Dataset::new(vec![]);
    assert!(fit(&empty, &spec, &FitOptions::default()).is_err());
}
