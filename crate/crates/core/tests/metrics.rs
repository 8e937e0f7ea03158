mod common;

use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use xaudit::explainers::{explain, ExplainerConfig, Method};
use xaudit::metrics::{
    complexity, ground_truth_fidelity, inconsistency, instability, prediction_gap, prediction_gap_masked,
    top_k_indices, MetricConfig,
};
use xaudit::models::{LinearModel, MlpModel, Model};
use xaudit::seed::rng;

fn cfg() -> MetricConfig {
    MetricConfig::default()
}

#[test]
fn prediction_gap_vanishes_when_nothing_is_perturbed() {
    let m = MlpModel::glorot(6, &[10], 1);
    let x = [0.1, 0.2, -0.3, 0.4, 1.0, -1.0];
    let w = [0.5, 0.1, 0.2, 0.3, 0.4, 0.6];
    let all_top = MetricConfig { k: 6, ..cfg() };
    assert_eq!(prediction_gap(&m, &x, &w, &all_top, 3).unwrap(), 0.0);
    let quiet = MetricConfig { sigma: 0.0, ..cfg() };
    assert_eq!(prediction_gap(&m, &x, &w, &quiet, 3).unwrap(), 0.0);
    let masked = MetricConfig { k: 2, ..cfg() };
    let none = [false; 6];
    assert_eq!(prediction_gap_masked(&m, &x, &w, &masked, 3, Some(&none)).unwrap(), 0.0);
}

#[test]
fn prediction_gap_matches_monte_carlo_oracle() {
    let m = LinearModel::new(vec![1.0, -2.0, 0.5, 3.0], 0.0);
    let x = [0.3, 0.1, -0.2, 0.05];
    // top-2 by magnitude are features 3 and 1; 0 and 2 get noise
    let w = [0.1, -0.9, 0.2, 1.2];
    let c = MetricConfig { k: 2, sigma: 0.5, m_pred_gap: 20_000, ..cfg() };
    let ours = prediction_gap(&m, &x, &w, &c, 42).unwrap();
    let h = m.predict_proba(&x).unwrap();
    let mut r = rng(7);
    let n = 20_000;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let mut p = x;
        p[0] += 0.5 * r.sample::<f64, _>(StandardNormal);
        p[2] += 0.5 * r.sample::<f64, _>(StandardNormal);
        let v = (h - m.predict_proba(&p).unwrap()).abs();
        s += v;
        s2 += v * v;
    }
    let mean = s / n as f64;
    let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
    assert!((ours - mean).abs() < 5.0 * se * 2f64.sqrt(), "{ours} vs {mean}");
}

#[test]
fn constant_explainer_is_perfectly_stable() {
    let constant = |_: &[f64], _: u64| Ok(vec![1.0, -2.0, 0.5]);
    let x = [0.0, 1.0, 2.0];
    assert_eq!(instability(&x, &constant, &cfg(), 9).unwrap(), 0.0);
    assert_eq!(inconsistency(&x, &constant, &[1, 2, 3, 4, 5, 6]).unwrap(), 0.0);
}

#[test]
fn deterministic_methods_are_consistent() {
    let m = MlpModel::glorot(4, &[8], 2);
    let ecfg = ExplainerConfig::default();
    let x = [0.3, -0.1, 0.8, 0.0];
    for method in [Method::VanillaGrad, Method::IntGrad] {
        let f = |p: &[f64], s: u64| explain(method, &m, p, &ecfg, s);
        assert_eq!(inconsistency(&x, &f, &[10, 11, 12, 13, 14, 15]).unwrap(), 0.0);
    }
}

#[test]
fn instability_with_zero_noise_is_zero_for_deterministic_methods() {
    let m = MlpModel::glorot(3, &[5], 3);
    let ecfg = ExplainerConfig::default();
    let c = MetricConfig { sigma: 0.0, ..cfg() };
    let f = |p: &[f64], s: u64| explain(Method::VanillaGrad, &m, p, &ecfg, s);
    assert_eq!(instability(&[0.1, 0.2, 0.3], &f, &c, 1).unwrap(), 0.0);
}

#[test]
fn vanilla_grad_recovers_linear_ground_truth_for_every_k() {
    let mut r = rng(8);
    let d = 9;
    for _ in 0..200 {
        let coef: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
        let m = LinearModel::new(coef, r.sample(StandardNormal));
        let omega = m.ground_truth_weights();
        let x: Vec<f64> = (0..d).map(|_| 2.0 * r.sample::<f64, _>(StandardNormal)).collect();
        let w = m.input_gradient(&x).unwrap();
        for k in 1..=d {
            assert_eq!(ground_truth_fidelity(&w, &omega, k, false).unwrap(), 1.0);
        }
    }
}

#[test]
fn ground_truth_fidelity_counts_overlap() {
    let omega = [3.0, 2.0, 1.0, 0.0];
    assert_eq!(ground_truth_fidelity(&[0.0, 0.0, 5.0, 4.0], &omega, 2, false).unwrap(), 0.0);
    assert_eq!(ground_truth_fidelity(&[0.0, 1.0, 5.0, 0.0], &omega, 2, false).unwrap(), 0.5);
    assert!(ground_truth_fidelity(&[1.0], &omega, 1, false).is_err());
}

#[test]
fn complexity_counts_strict_exceedances() {
    assert_eq!(complexity(&[0.5, -0.02, 0.01, 0.0], 0.01, false), 2);
    assert_eq!(complexity(&[0.5, -0.02, 0.01, 0.0], 0.01, true), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn complexity_is_monotone_in_threshold(w in prop::collection::vec(-3.0f64..3.0, 1..20)) {
        let grid: Vec<f64> = (0..50).map(|i| i as f64 * 0.07).collect();
        let counts: Vec<usize> = grid.iter().map(|&t| complexity(&w, t, false)).collect();
        prop_assert!(counts.windows(2).all(|p| p[1] <= p[0]));
        prop_assert!(counts[0] <= w.len());
    }

    #[test]
    fn top_k_is_a_prefix_of_top_k_plus_one(w in prop::collection::vec(-3.0f64..3.0, 2..12)) {
        for k in 1..w.len() {
            let a = top_k_indices(&w, k, false).unwrap();
            let b = top_k_indices(&w, k + 1, false).unwrap();
            prop_assert_eq!(&a[..], &b[..k]);
        }
    }

    #[test]
    fn fidelity_is_a_fraction(w in prop::collection::vec(-3.0f64..3.0, 6), o in prop::collection::vec(0.0f64..3.0, 6), k in 1usize..=6) {
        let f = ground_truth_fidelity(&w, &o, k, false).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert_eq!((f * k as f64).round() / k as f64, f);
    }
}
