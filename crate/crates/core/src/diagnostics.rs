//! Residual diagnostics, accuracy metrics and the AR root screen.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::FittedModel;
use crate::filter::SeriesData;
use crate::forecast::path_rng;
use crate::stats::{norm_cdf, norm_quantile};
use crate::unit_lindley::{cdf_unchecked, sf_unchecked};

/// Replacement for an infinite quantile residual.
pub const QUANTILE_RESID_CAP: f64 = 8.0;

/// Rule-of-thumb bound below which the smallest AR root signals a near unit root.
pub const SRCP_THRESHOLD: f64 = 1.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSet {
    /// `y_t - mu_hat_t`
    pub simple: Vec<f64>,
    /// `Phi^{-1}(F(y_t | mu_hat_t))`
    pub quantile: Vec<f64>,
    pub drop_first: bool,
}

/// Quantile residual of one observation; tails use whichever of the
/// distribution or survival function is smaller.
pub fn quantile_residual(y: f64, mu: f64) -> f64 {
    let f = cdf_unchecked(y, mu);
    let z = if f <= 0.5 {
        norm_quantile(f)
    } else {
        -norm_quantile(sf_unchecked(y, mu))
    };
    if z.is_finite() {
        z
    } else {
        log::warn!("quantile residual at the boundary (y = {y}, mu = {mu}); capped");
        if z > 0.0 {
            QUANTILE_RESID_CAP
        } else {
            -QUANTILE_RESID_CAP
        }
    }
}

/// Residuals from a mean sequence; `drop_first` removes `t = 1`.
pub fn residuals_from_mu(y: &[f64], mu: &[f64], drop_first: bool) -> Result<ResidualSet> {
    if y.len() != mu.len() {
        return Err(Error::Dimension(format!(
            "{} observations but {} fitted means",
            y.len(),
            mu.len()
        )));
    }
    let skip = usize::from(drop_first && !y.is_empty());
    let pairs = || y.iter().zip(mu).skip(skip);
    Ok(ResidualSet {
        simple: pairs().map(|(y, m)| y - m).collect(),
        quantile: pairs().map(|(&y, &m)| quantile_residual(y, m)).collect(),
        drop_first,
    })
}

pub fn residuals(fit: &FittedModel, data: &SeriesData, drop_first: bool) -> Result<ResidualSet> {
    residuals_from_mu(data.y(), &fit.fitted_mu, drop_first)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DlStatistic {
    /// Cramer-von Mises functional
    Cp,
    /// Kolmogorov-Smirnov functional
    Ks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Multiplier {
    /// Two-point law with mean 0 and variance 1 (Mammen).
    Mammen,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DlConfig {
    pub bootstrap: usize,
    /// Number of lagged values in the conditioning vector.
    pub lags: usize,
    pub multiplier: Multiplier,
    pub seed: u64,
}

impl Default for DlConfig {
    fn default() -> Self {
        Self {
            bootstrap: 500,
            lags: 1,
            multiplier: Multiplier::Mammen,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DlOutcome {
    pub cp: TestOutcome,
    pub ks: TestOutcome,
}

impl DlOutcome {
    pub fn get(&self, kind: DlStatistic) -> TestOutcome {
        match kind {
            DlStatistic::Cp => self.cp,
            DlStatistic::Ks => self.ks,
        }
    }
}

/// Marked empirical process `S(x_j) = sum_t m_t 1{x_t <= x_j}` for every
/// observed conditioning point.
enum Indicator {
    /// Single lag: points sorted by their conditioning value, with tie groups.
    Sorted { order: Vec<usize>, group_end: Vec<usize> },
    /// Several lags: dense componentwise-order matrix, `le[j * n + t]`.
    Dense { le: Vec<bool> },
}

impl Indicator {
    fn new(cond: &[Vec<f64>]) -> Self {
        let n = cond.len();
        if cond.first().is_some_and(|c| c.len() == 1) {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| cond[a][0].total_cmp(&cond[b][0]));
            // group_end[i]: one past the last sorted position tied with position i
            let mut group_end = vec![n; n];
            let mut i = n;
            while i > 0 {
                let mut start = i - 1;
                while start > 0 && cond[order[start - 1]][0] == cond[order[i - 1]][0] {
                    start -= 1;
                }
                for g in &mut group_end[start..i] {
                    *g = i;
                }
                i = start;
            }
            Indicator::Sorted { order, group_end }
        } else {
            let mut le = vec![false; n * n];
            for j in 0..n {
                for t in 0..n {
                    le[j * n + t] = cond[t].iter().zip(&cond[j]).all(|(a, b)| a <= b);
                }
            }
            Indicator::Dense { le }
        }
    }

    /// Sum of squares and maximum absolute value of the process.
    fn functionals(&self, marks: &[f64]) -> (f64, f64) {
        let n = marks.len();
        let mut sum_sq = 0.0;
        let mut max_abs = 0.0_f64;
        match self {
            Indicator::Sorted { order, group_end } => {
                let mut prefix = Vec::with_capacity(n + 1);
                prefix.push(0.0);
                let mut acc = 0.0;
                for &t in order {
                    acc += marks[t];
                    prefix.push(acc);
                }
                for &end in group_end {
                    let s = prefix[end];
                    sum_sq += s * s;
                    max_abs = max_abs.max(s.abs());
                }
            }
            Indicator::Dense { le } => {
                for j in 0..n {
                    let row = &le[j * n..(j + 1) * n];
                    let s: f64 = row.iter().zip(marks).filter(|(&b, _)| b).map(|(_, m)| m).sum();
                    sum_sq += s * s;
                    max_abs = max_abs.max(s.abs());
                }
            }
        }
        (sum_sq, max_abs)
    }
}

fn mammen<R: Rng>(rng: &mut R) -> f64 {
    let s5 = 5f64.sqrt();
    let p = (s5 + 1.0) / (2.0 * s5);
    if rng.random::<f64>() < p {
        (1.0 - s5) / 2.0
    } else {
        (1.0 + s5) / 2.0
    }
}

/// Both Dominguez-Lobato statistics with wild-bootstrap p-values.
///
/// Marks are the centered residuals `e_t - mean(e)` for `t > lags`, the
/// conditioning vector is `(e_{t-1}, ..., e_{t-lags})`, and with
/// `N = n - lags` and `sigma^2` the mark variance:
/// `Cp = sum_j S_j^2 / (sigma^2 N^2)`, `KS = max_j |S_j| / (sigma sqrt N)`.
/// Bootstrap replicate `b` multiplies the marks by draws from
/// `path_rng(seed, b)`, re-centers and re-standardizes them, and keeps the
/// conditioning values fixed; the p-value is `(1 + #{T*_b >= T}) / (B + 1)`.
pub fn dl_tests(e: &[f64], cfg: &DlConfig) -> Result<DlOutcome> {
    if cfg.lags == 0 {
        return Err(Error::InvalidArgument("at least one lag is required".into()));
    }
    if e.len() < 20 || e.len() <= cfg.lags + 1 {
        return Err(Error::InvalidArgument(format!(
            "need at least 20 residuals, got {}",
            e.len()
        )));
    }
    if cfg.bootstrap < 100 {
        return Err(Error::InvalidArgument(format!(
            "need at least 100 bootstrap draws, got {}",
            cfg.bootstrap
        )));
    }
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite residual".into()));
    }
    let p = cfg.lags;
    let n_eff = e.len() - p;
    let raw: Vec<f64> = e[p..].to_vec();
    let mean = raw.iter().sum::<f64>() / n_eff as f64;
    let marks: Vec<f64> = raw.iter().map(|v| v - mean).collect();
    let var = marks.iter().map(|m| m * m).sum::<f64>() / n_eff as f64;
    if !(var > 0.0) || var.sqrt() <= 1e-14 * mean.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateResiduals);
    }
    let cond: Vec<Vec<f64>> = (p..e.len())
        .map(|t| (1..=p).map(|lag| e[t - lag]).collect())
        .collect();
    let ind = Indicator::new(&cond);
    let nf = n_eff as f64;
    let scale_cp = var * nf * nf;
    let scale_ks = (var * nf).sqrt();

    let (ss, mx) = ind.functionals(&marks);
    let cp = ss / scale_cp;
    let ks = mx / scale_ks;

    let boot: Vec<(f64, f64)> = (0..cfg.bootstrap)
        .into_par_iter()
        .map(|b| {
            let mut rng = path_rng(cfg.seed, b as u64);
            let mut starred: Vec<f64> = marks
                .iter()
                .map(|m| {
                    let v = match cfg.multiplier {
                        Multiplier::Mammen => mammen(&mut rng),
                        Multiplier::Normal => rng.sample(StandardNormal),
                    };
                    m * v
                })
                .collect();
            // the bootstrap sample is re-centered and re-standardized like the data
            let c = starred.iter().sum::<f64>() / nf;
            for v in &mut starred {
                *v -= c;
            }
            let var_b = starred.iter().map(|m| m * m).sum::<f64>() / nf;
            if !(var_b > 0.0) {
                return (0.0, 0.0);
            }
            let (ss, mx) = ind.functionals(&starred);
            (ss / (var_b * nf * nf), mx / (var_b * nf).sqrt())
        })
        .collect();
    let bf = cfg.bootstrap as f64;
    let p_cp = (1 + boot.iter().filter(|(c, _)| *c >= cp).count()) as f64 / (bf + 1.0);
    let p_ks = (1 + boot.iter().filter(|(_, k)| *k >= ks).count()) as f64 / (bf + 1.0);
    Ok(DlOutcome {
        cp: TestOutcome {
            statistic: cp,
            p_value: p_cp,
        },
        ks: TestOutcome {
            statistic: ks,
            p_value: p_ks,
        },
    })
}

/// Martingale-difference test of Dominguez and Lobato; returns the p-value
/// of the requested functional.
pub fn dl_test(e: &[f64], kind: DlStatistic, cfg: &DlConfig) -> Result<f64> {
    Ok(dl_tests(e, cfg)?.get(kind).p_value)
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // P(K <= l) = sqrt(2 pi)/l * sum exp(-(2k-1)^2 pi^2 / (8 l^2))
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            s += (-j * j * c).exp();
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Largest gap between the empirical distribution of `sorted` and `cdf`.
fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

fn sorted_checked(e: &[f64], min_len: usize) -> Result<Vec<f64>> {
    if e.len() < min_len {
        return Err(Error::InvalidArgument(format!(
            "need at least {min_len} values, got {}",
            e.len()
        )));
    }
    if e.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("NaN residual".into()));
    }
    let mut s = e.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// One-sample Kolmogorov-Smirnov test against N(0,1) with the asymptotic
/// p-value `Q(sqrt(n) D)`.
pub fn ks_normality(e: &[f64]) -> Result<TestOutcome> {
    let s = sorted_checked(e, 8)?;
    let d = ks_distance(&s, norm_cdf);
    Ok(TestOutcome {
        statistic: d,
        p_value: kolmogorov_sf((s.len() as f64).sqrt() * d),
    })
}

/// Kolmogorov-Smirnov normality test with mean and standard deviation
/// estimated from the sample (Lilliefors).
///
/// The p-value follows the Dallal-Wilkinson approximation below 0.1 and
/// Stephens' modified-statistic polynomials above, as in the common R
/// implementation.
pub fn lilliefors_normality(e: &[f64]) -> Result<TestOutcome> {
    let s = sorted_checked(e, 5)?;
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let sd = (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::DegenerateResiduals);
    }
    let k = ks_distance(&s, |v| norm_cdf((v - mean) / sd));
    Ok(TestOutcome {
        statistic: k,
        p_value: lilliefors_p_value(k, n),
    })
}

fn lilliefors_p_value(k: f64, n: f64) -> f64 {
    let (kd, nd) = if n <= 100.0 { (k, n) } else { (k * (n / 100.0).powf(0.49), 100.0) };
    let mut p = (-7.01256 * kd * kd * (nd + 2.78019) + 2.99587 * kd * (nd + 2.78019).sqrt() - 0.122119
        + 0.974598 / nd.sqrt()
        + 1.67997 / nd)
        .exp();
    if p > 0.1 {
        let kk = (n.sqrt() - 0.01 + 0.85 / n.sqrt()) * k;
        p = if kk <= 0.302 {
            1.0
        } else if kk <= 0.5 {
            2.76773 - 19.828315 * kk + 80.709644 * kk.powi(2) - 138.55152 * kk.powi(3) + 81.218052 * kk.powi(4)
        } else if kk <= 0.9 {
            -4.901232 + 40.662806 * kk - 97.490286 * kk.powi(2) + 94.029866 * kk.powi(3) - 32.355711 * kk.powi(4)
        } else if kk <= 1.31 {
            6.198765 - 19.558097 * kk + 23.186922 * kk.powi(2) - 12.234627 * kk.powi(3) + 2.423045 * kk.powi(4)
        } else {
            0.0
        };
    }
    p.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub rmse: f64,
    /// As a fraction, not a percentage.
    pub mape: f64,
    pub mda: f64,
}

/// RMSE, MAPE and mean directional accuracy.
///
/// MDA is the share of `t >= 2` with `sign(p_t - a_{t-1}) == sign(a_t - a_{t-1})`.
pub fn accuracy_metrics(actual: &[f64], predicted: &[f64]) -> Result<Accuracy> {
    if actual.len() != predicted.len() {
        return Err(Error::Dimension(format!(
            "{} actual values but {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.len() < 2 {
        return Err(Error::InvalidArgument("need at least two points".into()));
    }
    if actual.iter().any(|&a| a == 0.0) {
        return Err(Error::InvalidArgument("MAPE undefined for a zero actual value".into()));
    }
    let (rmse, mape) = error_metrics(actual, predicted);
    let hits = (1..actual.len())
        .filter(|&t| {
            let base = actual[t - 1];
            sign(predicted[t] - base) == sign(actual[t] - base)
        })
        .count();
    Ok(Accuracy {
        rmse,
        mape,
        mda: hits as f64 / (actual.len() - 1) as f64,
    })
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

fn error_metrics(actual: &[f64], predicted: &[f64]) -> (f64, f64) {
    let n = actual.len() as f64;
    let sq: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    let ape: f64 = actual.iter().zip(predicted).map(|(a, p)| ((a - p) / a).abs()).sum();
    ((sq / n).sqrt(), ape / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonAccuracy {
    pub horizon: usize,
    pub rmse: f64,
    pub mape: f64,
}

/// RMSE and MAPE over the first `h` forecasts, for every `h`.
pub fn cumulative_accuracy(actual: &[f64], predicted: &[f64]) -> Result<Vec<HorizonAccuracy>> {
    if actual.len() != predicted.len() || actual.is_empty() {
        return Err(Error::Dimension("actual and predicted must be nonempty and equal length".into()));
    }
    if actual.iter().any(|&a| a == 0.0) {
        return Err(Error::InvalidArgument("MAPE undefined for a zero actual value".into()));
    }
    Ok((1..=actual.len())
        .map(|h| {
            let (rmse, mape) = error_metrics(&actual[..h], &predicted[..h]);
            HorizonAccuracy { horizon: h, rmse, mape }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Srcp {
    /// Smallest root modulus of `1 - phi_1 z - ... - phi_p z^p`.
    pub modulus: f64,
    pub root_re: f64,
    pub root_im: f64,
    /// `|poly(root)|` after refinement.
    pub residual: f64,
    /// `modulus < SRCP_THRESHOLD`; advisory only.
    pub near_unit_root: bool,
}

/// `1 - sum phi_i z^i` and its derivative.
fn ar_poly(phi: &[f64], z: Complex64) -> (Complex64, Complex64) {
    // Horner on c_0 = 1, c_i = -phi_i
    let mut v = Complex64::new(0.0, 0.0);
    let mut dv = Complex64::new(0.0, 0.0);
    for &c in phi.iter().rev() {
        dv = dv * z + v;
        v = v * z - c;
    }
    dv = dv * z + v;
    v = v * z + 1.0;
    (v, dv)
}

/// Evaluates the AR characteristic polynomial `1 - sum phi_i z^i`.
pub fn ar_characteristic(phi: &[f64], z: Complex64) -> Complex64 {
    ar_poly(phi, z).0
}

/// Smallest root (in modulus) of the AR characteristic polynomial.
///
/// Roots are the reciprocals of the eigenvalues of the AR companion matrix,
/// refined by Newton steps on the polynomial itself.
pub fn srcp(phi: &[f64]) -> Result<Srcp> {
    let deg = phi.iter().rposition(|&c| c != 0.0).map(|i| i + 1).ok_or(Error::NoArPart)?;
    if phi.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("non-finite AR coefficient".into()));
    }
    let phi = &phi[..deg];
    let mut companion = DMatrix::<f64>::zeros(deg, deg);
    for (j, &c) in phi.iter().enumerate() {
        companion[(0, j)] = c;
    }
    for i in 1..deg {
        companion[(i, i - 1)] = 1.0;
    }
    let eig = companion.complex_eigenvalues();
    let mut best: Option<(Complex64, f64)> = None;
    for lambda in eig.iter() {
        if lambda.norm() == 0.0 {
            continue;
        }
        let mut z = Complex64::new(1.0, 0.0) / *lambda;
        for _ in 0..50 {
            let (v, dv) = ar_poly(phi, z);
            if v.norm() == 0.0 || dv.norm() == 0.0 {
                break;
            }
            let step = v / dv;
            z -= step;
            if step.norm() <= 1e-16 * z.norm() {
                break;
            }
        }
        let res = ar_poly(phi, z).0.norm();
        let m = z.norm();
        if best.is_none_or(|(b, _)| m < b.norm()) {
            best = Some((z, res));
        }
    }
    let (root, residual) = best.ok_or(Error::NoArPart)?;
    let modulus = root.norm();
    Ok(Srcp {
        modulus,
        root_re: root.re,
        root_im: root.im,
        residual,
        near_unit_root: modulus < SRCP_THRESHOLD,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_observation_has_zero_quantile_residual() {
        let p = crate::unit_lindley::UnitLindleyParam::new(0.4).unwrap();
        let med = crate::unit_lindley::quantile(0.5, p).unwrap();
        assert!(quantile_residual(med, 0.4).abs() < 1e-10);
    }

    #[test]
    fn perfect_fit_simple_residuals() {
        let y = [0.2, 0.5, 0.7];
        let set = residuals_from_mu(&y, &y, false).unwrap();
        assert!(set.simple.iter().all(|&e| e == 0.0));
        let dropped = residuals_from_mu(&y, &y, true).unwrap();
        assert_eq!(dropped.simple.len(), 2);
        assert!(residuals_from_mu(&y, &y[..2], false).is_err());
    }

    #[test]
    fn accuracy_hand_values() {
        let a = accuracy_metrics(&[0.2, 0.4], &[0.2, 0.1]).unwrap();
        assert!((a.rmse - (0.09f64 / 2.0).sqrt()).abs() < 1e-15);
        assert!((a.mape - 0.375).abs() < 1e-15);
        assert_eq!(a.mda, 0.0);
        let same = accuracy_metrics(&[0.2, 0.4, 0.3], &[0.2, 0.4, 0.3]).unwrap();
        assert_eq!((same.rmse, same.mape, same.mda), (0.0, 0.0, 1.0));
        assert!(accuracy_metrics(&[0.2], &[0.2]).is_err());
        assert!(accuracy_metrics(&[0.0, 0.2], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn srcp_simple_roots() {
        assert!((srcp(&[0.5]).unwrap().modulus - 2.0).abs() < 1e-14);
        assert!((srcp(&[1.0]).unwrap().modulus - 1.0).abs() < 1e-14);
        assert!(srcp(&[1.0]).unwrap().near_unit_root);
        assert_eq!(srcp(&[0.0, 0.0]), Err(Error::NoArPart));
        let s = srcp(&[0.2, -0.4]).unwrap();
        let z = Complex64::new(s.root_re, s.root_im);
        assert!(ar_characteristic(&[0.2, -0.4], z).norm() < 1e-10);
        // 1 - 0.2 z + 0.4 z^2 has complex roots of modulus sqrt(1/0.4)
        assert!((s.modulus - (2.5f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn srcp_ignores_trailing_zeros() {
        let a = srcp(&[0.5, 0.0, 0.0]).unwrap();
        assert!((a.modulus - 2.0).abs() < 1e-14);
    }

    #[test]
    fn kolmogorov_tail_values() {
        // reference values of the Kolmogorov distribution
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 5e-4);
        assert!((kolmogorov_sf(1.63) - 0.0098).abs() < 5e-4);
        assert!((kolmogorov_sf(0.5) - 0.9639).abs() < 5e-4);
        // the two series agree near the switch point
        let l = 1.18;
        let c = std::f64::consts::PI.powi(2) / (8.0 * l * l);
        let small: f64 = 1.0
            - (2.0 * std::f64::consts::PI).sqrt() / l
                * (1..=20).map(|k| (-(((2 * k - 1) as f64).powi(2)) * c).exp()).sum::<f64>();
        assert!((small - kolmogorov_sf(l)).abs() < 1e-12);
    }

    #[test]
    fn lilliefors_p_is_nearly_monotone() {
        // the two approximations meet with a small step near p = 0.1 and the
        // polynomial pieces wiggle slightly; neither exceeds these bounds
        for n in [20.0, 100.0, 500.0] {
            let mut prev = 1.0;
            for i in 1..40_000 {
                let k = i as f64 * 1e-5;
                let p = lilliefors_p_value(k, n);
                assert!((0.0..=1.0).contains(&p));
                assert!(p <= prev + 1e-3, "n = {n}, k = {k}");
                assert!(prev - p < 1e-2, "jump at n = {n}, k = {k}");
                prev = p;
            }
            assert_eq!(lilliefors_p_value(0.01, n.min(100.0)), 1.0);
        }
    }

    #[test]
    fn ks_on_normal_scores() {
        let n = 200;
        let e: Vec<f64> = (1..=n).map(|i| norm_quantile((i as f64 - 0.5) / n as f64)).collect();
        let out = ks_normality(&e).unwrap();
        assert!((out.statistic - 0.5 / n as f64).abs() < 1e-12);
        assert!(out.p_value > 0.999);
        assert!(ks_normality(&e[..5]).is_err());
    }

    #[test]
    fn dl_input_checks() {
        let cfg = DlConfig::default();
        assert!(dl_tests(&[0.1; 10], &cfg).is_err());
        assert_eq!(dl_tests(&[0.3; 50], &cfg), Err(Error::DegenerateResiduals));
        let e: Vec<f64> = (0..50).map(|t| (t as f64 * 1.7).sin()).collect();
        let few = DlConfig { bootstrap: 20, ..cfg };
        assert!(dl_tests(&e, &few).is_err());
    }

    #[test]
    fn dl_single_and_dense_indicator_agree() {
        let e: Vec<f64> = (0..60).map(|t| ((t * 37 % 17) as f64 - 8.0) / 5.0).collect();
        let cond: Vec<Vec<f64>> = e.iter().map(|&v| vec![v]).collect();
        let sorted = Indicator::new(&cond);
        let le: Vec<bool> = (0..60)
            .flat_map(|j| (0..60).map(move |t| (j, t)))
            .map(|(j, t)| cond[t][0] <= cond[j][0])
            .collect();
        let dense = Indicator::Dense { le };
        let marks: Vec<f64> = (0..60).map(|t| (t as f64 * 0.3).cos()).collect();
        let (a1, b1) = sorted.functionals(&marks);
        let (a2, b2) = dense.functionals(&marks);
        assert!((a1 - a2).abs() < 1e-10 && (b1 - b2).abs() < 1e-12);
    }
}
