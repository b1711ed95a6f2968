//! Multi-step point forecasts and bootstrap prediction intervals.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::FittedModel;
use crate::filter::{filter_forward, Recursion, SeriesData};
use crate::stats::quantile_sorted;
use crate::unit_lindley::{sample, UnitLindleyParam};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub horizon: usize,
    /// `mu_hat_{n+1..n+h}`
    pub point: Vec<f64>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub b_samples: usize,
}

/// Random stream for bootstrap path `m` under `seed`.
pub fn path_rng(seed: u64, m: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(m);
    rng
}

/// In-sample history and covariates extended over the forecast horizon.
struct Extended {
    x: DMatrix<f64>,
    g_y: Vec<f64>,
    resid: Vec<f64>,
}

fn extend(fit: &FittedModel, data: &SeriesData, h: usize, new_x: Option<&DMatrix<f64>>) -> Result<Extended> {
    if h == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let spec = &fit.spec;
    let n = data.n();
    let r = spec.r;
    let x = if r > 0 {
        let fut = new_x.ok_or(Error::MissingCovariates(h))?;
        if fut.nrows() < h {
            return Err(Error::MissingCovariates(h));
        }
        if fut.ncols() != r {
            return Err(Error::Dimension(format!(
                "future covariates have {} columns, model has {r}",
                fut.ncols()
            )));
        }
        let mut x = DMatrix::zeros(n + h, r);
        x.rows_mut(0, n).copy_from(data.x());
        x.rows_mut(n, h).copy_from(&fut.rows(0, h));
        x
    } else {
        DMatrix::zeros(n + h, 0)
    };
    let fs = filter_forward(spec, &fit.gamma_hat, data)?;
    Ok(Extended {
        x,
        g_y: fs.g_y,
        resid: fs.resid_r,
    })
}

/// Point forecasts `mu_hat_{n+1..n+h}`.
///
/// Beyond the sample the recursion uses `Y_hat_t = mu_hat_t` and `r_t = 0`.
pub fn forecast_point(
    fit: &FittedModel,
    data: &SeriesData,
    h: usize,
    new_x: Option<&DMatrix<f64>>,
) -> Result<Vec<f64>> {
    let mut ext = extend(fit, data, h, new_x)?;
    let rec = Recursion::new(&fit.spec, &fit.gamma_hat, &ext.x);
    let link = rec.link();
    let n = data.n();
    let mut out = Vec::with_capacity(h);
    for t in n..n + h {
        let mu = link.inverse(rec.eta(t, &ext.g_y, &ext.resid));
        ext.g_y.push(link.apply(mu));
        ext.resid.push(0.0);
        out.push(mu);
    }
    Ok(out)
}

/// Simulated future paths, one row per bootstrap replicate (`B x h`).
///
/// Path `m` draws from [`path_rng`]`(seed, m)`, so the result does not depend
/// on scheduling.
pub fn bootstrap_paths(
    fit: &FittedModel,
    data: &SeriesData,
    h: usize,
    b: usize,
    new_x: Option<&DMatrix<f64>>,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let ext = extend(fit, data, h, new_x)?;
    let rec = Recursion::new(&fit.spec, &fit.gamma_hat, &ext.x);
    let link = rec.link();
    let n = data.n();
    let paths = (0..b)
        .into_par_iter()
        .map(|m| {
            let mut rng = path_rng(seed, m as u64);
            let mut g_y = ext.g_y.clone();
            let mut resid = ext.resid.clone();
            let mut path = Vec::with_capacity(h);
            for t in n..n + h {
                let mu = link.inverse(rec.eta(t, &g_y, &resid));
                let param = UnitLindleyParam::new(mu).map_err(|_| Error::NonFinite(t + 1))?;
                let y = sample(param, &mut rng);
                let gy = link.apply(y);
                g_y.push(gy);
                resid.push(gy - link.apply(mu));
                path.push(y);
            }
            Ok(path)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(paths)
}

/// Point forecasts plus per-horizon `delta/2` and `1 - delta/2` bootstrap
/// quantiles (type 7) of the simulated futures.
pub fn bootstrap_pi(
    fit: &FittedModel,
    data: &SeriesData,
    h: usize,
    b: usize,
    delta: f64,
    new_x: Option<&DMatrix<f64>>,
    seed: u64,
) -> Result<ForecastResult> {
    if b < 50 {
        return Err(Error::InvalidArgument(format!("need at least 50 bootstrap samples, got {b}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("miscoverage {delta} not in (0, 1)")));
    }
    let point = forecast_point(fit, data, h, new_x)?;
    let paths = bootstrap_paths(fit, data, h, b, new_x, seed)?;
    let (lower, upper) = interval_bounds(&paths, h, delta);
    Ok(ForecastResult {
        horizon: h,
        point,
        lower: Some(lower),
        upper: Some(upper),
        b_samples: b,
    })
}

/// Per-horizon empirical quantile bounds of a set of paths.
pub fn interval_bounds(paths: &[Vec<f64>], h: usize, delta: f64) -> (Vec<f64>, Vec<f64>) {
    (0..h)
        .map(|k| {
            let mut col: Vec<f64> = paths.iter().map(|p| p[k]).collect();
            col.sort_by(f64::total_cmp);
            (
                quantile_sorted(&col, delta / 2.0),
                quantile_sorted(&col, 1.0 - delta / 2.0),
            )
        })
        .unzip()
}
