mod common;

use common::simulate;
use nalgebra::DMatrix;
use ularma::estimation::{FitMethod, FittedModel};
use ularma::forecast::{bootstrap_paths, bootstrap_pi, forecast_point};
use ularma::unit_lindley::quantile;
use ularma::{fit, FitOptions, LinkChoice, ModelSpec, ParamVector, SeriesData, UnitLindleyParam};

fn fitted(spec: &ModelSpec, gamma: &ParamVector, data: &SeriesData) -> FittedModel {
    FittedModel::at_estimate(spec, gamma.clone(), data, true, 0, FitMethod::Bfgs, vec![]).unwrap()
}

fn arma() -> (ModelSpec, ParamVector) {
    let spec = ModelSpec::new(1, 1, 0, LinkChoice::Logit);
    let g = ParamVector {
        alpha: 0.3,
        beta: vec![],
        phi: vec![0.5],
        theta: vec![0.2],
    };
    (spec, g)
}

#[test]
fn point_forecasts_approach_the_fixed_point() {
    let (spec, g) = arma();
    let data = simulate(&spec, &g, 300, 1, 0);
    let f = fitted(&spec, &g, &data);
    let fc = forecast_point(&f, &data, 200, None).unwrap();
    // eta* = alpha + phi g(mu*) with g(mu*) = eta*
    let eta_star = g.alpha / (1.0 - g.phi[0]);
    let mu_star = LinkChoice::Logit.inverse(eta_star);
    assert!((fc[199] - mu_star).abs() < 1e-12);
}

#[test]
fn horizon_one_bounds_are_exact_quantiles() {
    let (spec, g) = arma();
    let data = simulate(&spec, &g, 300, 2, 0);
    let f = fitted(&spec, &g, &data);
    let res = bootstrap_pi(&f, &data, 1, 20_000, 0.1, None, 42).unwrap();
    let p = UnitLindleyParam::new(res.point[0]).unwrap();
    let lo = quantile(0.05, p).unwrap();
    let hi = quantile(0.95, p).unwrap();
    let (bl, bu) = (res.lower.unwrap()[0], res.upper.unwrap()[0]);
    assert!((bl - lo).abs() < 0.005, "{bl} vs {lo}");
    assert!((bu - hi).abs() < 0.005, "{bu} vs {hi}");
}

#[test]
fn bootstrap_is_reproducible_and_schedule_free() {
    let (spec, g) = arma();
    let data = simulate(&spec, &g, 200, 3, 0);
    let f = fitted(&spec, &g, &data);
    let a = bootstrap_paths(&f, &data, 6, 300, None, 9).unwrap();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = one.install(|| bootstrap_paths(&f, &data, 6, 300, None, 9).unwrap());
    assert_eq!(a, b);
    let c = bootstrap_paths(&f, &data, 6, 300, None, 10).unwrap();
    assert_ne!(a, c);
    for path in &a {
        assert!(path.iter().all(|&y| y > 0.0 && y < 1.0));
    }
}

#[test]
fn interval_ordering_and_widening() {
    let (spec, g) = arma();
    let data = simulate(&spec, &g, 400, 4, 0);
    let f = fit(&spec, &data, &FitOptions::default()).unwrap();
    let res = bootstrap_pi(&f, &data, 6, 2000, 0.1, None, 5).unwrap();
    let (lo, hi) = (res.lower.unwrap(), res.upper.unwrap());
    for h in 0..6 {
        assert!(lo[h] < hi[h]);
        assert!(lo[h] > 0.0 && hi[h] < 1.0);
    }
    let narrow = bootstrap_pi(&f, &data, 6, 2000, 0.5, None, 5).unwrap();
    for h in 0..6 {
        assert!(narrow.lower.as_ref().unwrap()[h] >= lo[h]);
        assert!(narrow.upper.as_ref().unwrap()[h] <= hi[h]);
    }
}

#[test]
fn covariate_forecasts_use_future_rows() {
    let spec = ModelSpec::new(0, 0, 1, LinkChoice::Cloglog);
    let g = ParamVector {
        alpha: -0.2,
        beta: vec![0.7],
        phi: vec![],
        theta: vec![],
    };
    let data = simulate(&spec, &g, 100, 5, 0);
    let f = fitted(&spec, &g, &data);
    let future = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, -1.0]);
    let fc = forecast_point(&f, &data, 3, Some(&future)).unwrap();
    for (k, x) in [0.0, 1.0, -1.0].iter().enumerate() {
        assert!((fc[k] - LinkChoice::Cloglog.inverse(-0.2 + 0.7 * x)).abs() < 1e-15);
    }
}
