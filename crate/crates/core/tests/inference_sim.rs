mod common;

use common::simulate;
use nalgebra::DMatrix;
use rayon::prelude::*;
use ularma::forecast::path_rng;
use ularma::inference::{
    conf_int_mu, conf_int_params, stepwise_select, wald_p_values, wald_test, StepwiseOptions,
};
use ularma::simulate::{simulate_path, CovariateRule};
use ularma::{fit, FitOptions, LinkChoice, ModelSpec, ParamVector, SeriesData};

fn ar1() -> (ModelSpec, ParamVector) {
    let spec = ModelSpec::new(1, 0, 0, LinkChoice::Logit);
    let g = ParamVector {
        alpha: 0.2,
        beta: vec![],
        phi: vec![0.5],
        theta: vec![],
    };
    (spec, g)
}

#[test]
fn wald_size_for_a_null_ma_term() {
    let (sim_spec, truth) = ar1();
    let spec = ModelSpec::new(1, 1, 0, LinkChoice::Logit);
    let theta = spec.theta_index(0);
    let reps = 500;
    let rejections: Vec<bool> = (0..reps)
        .into_par_iter()
        .filter_map(|m| {
            let data = simulate(&sim_spec, &truth, 500, 101, m);
            let f = fit(&spec, &data, &FitOptions::default()).ok()?;
            Some(wald_test(&f, theta, 0.0).ok()?.p_value < 0.05)
        })
        .collect();
    let rate = rejections.iter().filter(|&&r| r).count() as f64 / rejections.len() as f64;
    println!("Wald size {rate:.3} over {}", rejections.len());
    assert!(rejections.len() >= 490);
    assert!((rate - 0.05).abs() <= 0.02, "{rate}");
}

#[test]
fn parameter_interval_coverage() {
    let spec = ModelSpec::new(1, 0, 1, LinkChoice::Logit);
    let truth = ParamVector {
        alpha: 0.5,
        beta: vec![0.5],
        phi: vec![0.4],
        theta: vec![],
    };
    let t = truth.to_vec();
    let covered: Vec<Vec<bool>> = (0..500)
        .into_par_iter()
        .filter_map(|m| {
            let data = simulate(&spec, &truth, 1000, 202, m);
            let f = fit(&spec, &data, &FitOptions::default()).ok()?;
            let ci = conf_int_params(&f, 0.05).ok()?;
            Some(ci.iter().map(|c| c.lower <= t[c.index] && t[c.index] <= c.upper).collect())
        })
        .collect();
    assert!(covered.len() >= 490);
    for j in 0..t.len() {
        let rate = covered.iter().filter(|c| c[j]).count() as f64 / covered.len() as f64;
        println!("coefficient {j}: coverage {rate:.3}");
        assert!((rate - 0.95).abs() <= 0.02, "coef {j}: {rate}");
    }
}

#[test]
fn mean_interval_coverage() {
    let spec = ModelSpec::new(1, 1, 1, LinkChoice::Logit);
    let truth = ParamVector {
        alpha: 0.5,
        beta: vec![0.5],
        phi: vec![0.2],
        theta: vec![-0.4],
    };
    let n = 500;
    let t = 250;
    let covered: Vec<bool> = (0..500)
        .into_par_iter()
        .filter_map(|m| {
            let x = CovariateRule::Sinusoid.design(n, 100);
            let path = simulate_path(&spec, &truth, n, 100, &x, &mut path_rng(303, m)).ok()?;
            let data = path.observed();
            let f = fit(&spec, &data, &FitOptions::default()).ok()?;
            let iv = conf_int_mu(&f, &data, t, 0.05).ok()?;
            assert!(iv.lower <= iv.mu_hat && iv.mu_hat <= iv.upper);
            let mu = path.observed_mu()[t - 1];
            Some(iv.lower <= mu && mu <= iv.upper)
        })
        .collect();
    let rate = covered.iter().filter(|&&c| c).count() as f64 / covered.len() as f64;
    println!("mean interval coverage {rate:.3}");
    assert!((rate - 0.95).abs() <= 0.03, "{rate}");
}

#[test]
fn mean_interval_narrows_on_nested_samples() {
    let (spec, truth) = ar1();
    let data = simulate(&spec, &truth, 4000, 9, 0);
    let mut prev = f64::INFINITY;
    for n in [250, 1000, 4000] {
        let sub = data.head(n).unwrap();
        let f = fit(&spec, &sub, &FitOptions::default()).unwrap();
        let iv = conf_int_mu(&f, &sub, 200, 0.05).unwrap();
        let width = iv.upper - iv.lower;
        assert!(width < prev, "n = {n}: {width}");
        prev = width;
    }
}

#[test]
fn wald_p_values_follow_the_coefficients() {
    let spec = ModelSpec::new(1, 0, 2, LinkChoice::Logit);
    let truth = ParamVector {
        alpha: 0.1,
        beta: vec![0.6, 0.0],
        phi: vec![0.3],
        theta: vec![],
    };
    let data = simulate(&spec, &truth, 600, 12, 0);
    let x = data.x();
    let swapped = DMatrix::from_fn(x.nrows(), 2, |i, j| x[(i, 1 - j)]);
    let data2 = SeriesData::new(data.y().to_vec(), swapped).unwrap();
    let p1 = wald_p_values(&fit(&spec, &data, &FitOptions::default()).unwrap()).unwrap();
    let p2 = wald_p_values(&fit(&spec, &data2, &FitOptions::default()).unwrap()).unwrap();
    let close = |a: Option<f64>, b: Option<f64>| (a.unwrap() - b.unwrap()).abs() < 1e-6;
    assert!(close(p1[0], p2[0]));
    assert!(close(p1[1], p2[2]));
    assert!(close(p1[2], p2[1]));
    assert!(close(p1[3], p2[3]));
}

#[test]
fn stepwise_recovers_an_ar1() {
    let (spec, truth) = ar1();
    let hits: Vec<bool> = (0..100)
        .into_par_iter()
        .map(|m| {
            let data = simulate(&spec, &truth, 500, 404, m);
            // one candidate lag of each kind; larger candidate sets admit
            // near-equivalent ARMA representations of an AR(1)
            let Ok(sel) = stepwise_select(&data, 1, 1, LinkChoice::Logit, &StepwiseOptions::default())
            else {
                return false;
            };
            let s = &sel.fit.spec;
            s.free_mask[s.phi_index(0)] && !s.free_mask[s.theta_index(0)]
        })
        .collect();
    let rate = hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64;
    println!("AR(1) recovered in {rate:.2}");
    assert!(rate > 0.8, "{rate}");
}

#[test]
fn stepwise_on_pure_noise_keeps_only_the_intercept() {
    let spec = ModelSpec::new(0, 0, 0, LinkChoice::Logit);
    let truth = ParamVector {
        alpha: -0.4,
        ..ParamVector::zeros(&spec)
    };
    // a mixed AR/MA candidate set is unidentified under white noise, so the
    // candidates are pure AR and pure MA lags
    for (p_max, q_max) in [(2, 0), (0, 2)] {
        let hits: Vec<bool> = (0..100)
            .into_par_iter()
            .map(|m| {
                let data = simulate(&spec, &truth, 500, 505, m);
                match stepwise_select(&data, p_max, q_max, LinkChoice::Logit, &StepwiseOptions::default()) {
                    Ok(sel) => sel.fit.spec.free_indices() == vec![0],
                    Err(_) => false,
                }
            })
            .collect();
        let rate = hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64;
        println!("({p_max},{q_max}): intercept-only selected in {rate:.2}");
        assert!(rate > 0.5, "{rate}");
    }
}

#[test]
fn stepwise_terminates_when_thresholds_coincide() {
    let (spec, truth) = ar1();
    let opts = StepwiseOptions {
        drop: 0.1,
        add: 0.1,
        ..StepwiseOptions::default()
    };
    for m in 0..5 {
        let data = simulate(&spec, &truth, 300, 606, m);
        let sel = stepwise_select(&data, 2, 2, LinkChoice::Logit, &opts).unwrap();
        let k = 1 + 2 + 2;
        assert!(sel.refits <= 2 * k * opts.max_rounds);
        assert!(sel.trace.len() < sel.refits + 1);
    }
}
