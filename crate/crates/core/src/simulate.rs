//! Path simulation and the Monte Carlo harness.

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{dl_tests, ks_normality, lilliefors_normality, residuals, DlConfig};
use crate::error::{Error, Result};
use crate::estimation::{fit, FitOptions};
use crate::filter::{ModelSpec, ParamVector, Recursion, SeriesData};
use crate::forecast::path_rng;
use crate::stats::{mean, median, std_dev};
use crate::unit_lindley::{sample, UnitLindleyParam};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateRule {
    #[default]
    None,
    /// Single covariate `x_t = sin(pi t / 50)`.
    Sinusoid,
}

impl CovariateRule {
    /// Covariate rows for `t = -burnin+1 ..= n`.
    pub fn design(self, n: usize, burnin: usize) -> DMatrix<f64> {
        match self {
            CovariateRule::None => DMatrix::zeros(n + burnin, 0),
            CovariateRule::Sinusoid => DMatrix::from_fn(n + burnin, 1, |i, _| {
                let t = i as f64 - burnin as f64 + 1.0;
                (std::f64::consts::PI * t / 50.0).sin()
            }),
        }
    }

    fn n_cols(self) -> usize {
        match self {
            CovariateRule::None => 0,
            CovariateRule::Sinusoid => 1,
        }
    }
}

fn default_burnin() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub spec: ModelSpec,
    pub gamma_true: ParamVector,
    pub n: usize,
    #[serde(default = "default_burnin")]
    pub burnin: usize,
    #[serde(default)]
    pub covariate_rule: CovariateRule,
    pub n_replicas: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.gamma_true.check(&self.spec)?;
        if self.n == 0 {
            return Err(Error::InvalidArgument("scenario needs n >= 1".into()));
        }
        if self.n_replicas == 0 {
            return Err(Error::InvalidArgument("scenario needs at least one replica".into()));
        }
        if self.covariate_rule.n_cols() != self.spec.r {
            return Err(Error::Dimension(format!(
                "covariate rule gives {} columns, model has {}",
                self.covariate_rule.n_cols(),
                self.spec.r
            )));
        }
        Ok(())
    }

    /// Path for replica `m`, drawn from stream `(seed, m)`.
    pub fn simulate_replica(&self, m: u64) -> Result<SimulatedPath> {
        let x = self.covariate_rule.design(self.n, self.burnin);
        let mut rng = path_rng(self.seed, m);
        simulate_path(&self.spec, &self.gamma_true, self.n, self.burnin, &x, &mut rng)
    }
}

/// A generated series including its burn-in span.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub y: Vec<f64>,
    /// Conditional means used to draw `y`.
    pub mu: Vec<f64>,
    pub x: DMatrix<f64>,
    pub burnin: usize,
}

impl SimulatedPath {
    /// The retained observations, burn-in removed.
    pub fn observed(&self) -> SeriesData {
        let b = self.burnin;
        let n = self.y.len() - b;
        let x = self.x.rows(b, n).into_owned();
        SeriesData::new(self.y[b..].to_vec(), x).expect("simulated values lie in (0, 1)")
    }

    /// The whole generated series.
    pub fn full(&self) -> SeriesData {
        SeriesData::new(self.y.clone(), self.x.clone()).expect("simulated values lie in (0, 1)")
    }

    pub fn observed_mu(&self) -> &[f64] {
        &self.mu[self.burnin..]
    }
}

/// Draws `burnin + n` observations from the model, starting from the same
/// pre-sample values as the filter.
///
/// `x` needs `n + burnin` rows (any row count when `r = 0`).
pub fn simulate_path<R: Rng + ?Sized>(
    spec: &ModelSpec,
    gamma: &ParamVector,
    n: usize,
    burnin: usize,
    x: &DMatrix<f64>,
    rng: &mut R,
) -> Result<SimulatedPath> {
    spec.validate()?;
    gamma.check(spec)?;
    let total = n + burnin;
    let x = if spec.r == 0 {
        DMatrix::zeros(total, 0)
    } else {
        if x.ncols() != spec.r || x.nrows() < total {
            return Err(Error::Dimension(format!(
                "need a {total} x {} covariate matrix, got {} x {}",
                spec.r,
                x.nrows(),
                x.ncols()
            )));
        }
        x.rows(0, total).into_owned()
    };
    let rec = Recursion::new(spec, gamma, &x);
    let link = spec.link;
    let mut y = Vec::with_capacity(total);
    let mut mu = Vec::with_capacity(total);
    let mut g_y = Vec::with_capacity(total);
    let mut resid = Vec::with_capacity(total);
    for t in 0..total {
        let eta = rec.eta(t, &g_y, &resid);
        if !eta.is_finite() {
            return Err(Error::NonFinite(t + 1));
        }
        let m = link.inverse(eta);
        let yt = sample(UnitLindleyParam::new(m)?, rng);
        let gy = link.apply(yt);
        g_y.push(gy);
        resid.push(gy - link.apply(m));
        mu.push(m);
        y.push(yt);
    }
    Ok(SimulatedPath { y, mu, x, burnin })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub coefficient: String,
    pub true_value: f64,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub mean_converged: f64,
    pub median_converged: f64,
    pub sd_converged: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMcSummary {
    pub n: usize,
    pub n_replicas: usize,
    /// Replicas whose simulation or fit returned an error.
    pub failed: usize,
    /// Fitted replicas that did not meet the convergence criterion.
    pub not_converged: usize,
    pub rows: Vec<SummaryRow>,
    /// Free-coefficient estimates per replica in full layout; `None` on failure.
    pub estimates: Vec<Option<(Vec<f64>, bool)>>,
}

impl PointMcSummary {
    pub fn row(&self, coefficient: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.coefficient == coefficient)
    }
}

fn summarize(values: &[f64]) -> (f64, f64, f64) {
    match values.len() {
        0 => (f64::NAN, f64::NAN, f64::NAN),
        1 => (values[0], values[0], f64::NAN),
        _ => (mean(values), median(values), std_dev(values)),
    }
}

/// Simulate, fit and summarize `n_replicas` replicas.
pub fn run_point_mc(scn: &Scenario, opts: &FitOptions) -> Result<PointMcSummary> {
    scn.validate()?;
    let estimates: Vec<Option<(Vec<f64>, bool)>> = (0..scn.n_replicas)
        .into_par_iter()
        .map(|m| {
            let path = scn.simulate_replica(m as u64).ok()?;
            match fit(&scn.spec, &path.observed(), opts) {
                Ok(f) => Some((f.gamma_hat.to_vec(), f.converged)),
                Err(e) => {
                    log::debug!("replica {m}: {e}");
                    None
                }
            }
        })
        .collect();
    let names = scn.spec.coefficient_names();
    let truth = scn.gamma_true.to_vec();
    let rows = scn
        .spec
        .free_indices()
        .into_iter()
        .map(|j| {
            let all: Vec<f64> = estimates.iter().flatten().map(|(g, _)| g[j]).collect();
            let conv: Vec<f64> = estimates
                .iter()
                .flatten()
                .filter(|(_, c)| *c)
                .map(|(g, _)| g[j])
                .collect();
            let (mean, median, sd) = summarize(&all);
            let (mean_converged, median_converged, sd_converged) = summarize(&conv);
            SummaryRow {
                coefficient: names[j].clone(),
                true_value: truth[j],
                mean,
                median,
                sd,
                mean_converged,
                median_converged,
                sd_converged,
            }
        })
        .collect();
    Ok(PointMcSummary {
        n: scn.n,
        n_replicas: scn.n_replicas,
        failed: estimates.iter().filter(|e| e.is_none()).count(),
        not_converged: estimates.iter().flatten().filter(|(_, c)| !c).count(),
        rows,
        estimates,
    })
}

impl fmt::Display for PointMcSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "n = {}, replicas = {}, failed = {}, not converged = {}",
            self.n, self.n_replicas, self.failed, self.not_converged
        )?;
        writeln!(
            f,
            "{:<12} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "coef", "true", "mean", "median", "sd", "mean_c", "median_c", "sd_c"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<12} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                r.coefficient,
                r.true_value,
                r.mean,
                r.median,
                r.sd,
                r.mean_converged,
                r.median_converged,
                r.sd_converged
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GofTest {
    #[serde(rename = "dl-cp")]
    DlCp,
    #[serde(rename = "dl-ks")]
    DlKs,
    /// Kolmogorov-Smirnov against N(0,1) as a simple null.
    #[serde(rename = "ks")]
    KsNormality,
    /// Kolmogorov-Smirnov with mean and variance estimated (Lilliefors).
    #[serde(rename = "ks-lilliefors")]
    KsLilliefors,
}

impl GofTest {
    pub const ALL: [GofTest; 4] = [GofTest::DlCp, GofTest::DlKs, GofTest::KsNormality, GofTest::KsLilliefors];

    pub fn name(self) -> &'static str {
        match self {
            GofTest::DlCp => "DL-Cp",
            GofTest::DlKs => "DL-KS",
            GofTest::KsNormality => "KS",
            GofTest::KsLilliefors => "KS-L",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRow {
    pub test: String,
    pub evaluated: usize,
    pub rejected: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofMcSummary {
    pub n: usize,
    pub n_replicas: usize,
    pub level: f64,
    pub failed: usize,
    pub rows: Vec<RejectionRow>,
}

impl GofMcSummary {
    pub fn rate(&self, test: GofTest) -> Option<f64> {
        self.rows.iter().find(|r| r.test == test.name()).map(|r| r.rate)
    }
}

impl fmt::Display for GofMcSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "n = {}, replicas = {}, failed = {}, level = {}",
            self.n, self.n_replicas, self.failed, self.level
        )?;
        writeln!(f, "{:<8} {:>9} {:>9} {:>7}", "test", "evaluated", "rejected", "rate")?;
        for r in &self.rows {
            writeln!(f, "{:<8} {:>9} {:>9} {:>7.3}", r.test, r.evaluated, r.rejected, r.rate)?;
        }
        Ok(())
    }
}

/// Rejection rates of the residual tests at level `0.05`.
///
/// DL tests use the simple residuals and the KS variants the quantile residuals, both
/// without the first observation. The bootstrap seed of replica `m` is drawn
/// from its own stream, so results do not depend on scheduling.
pub fn run_gof_mc(
    scn: &Scenario,
    tests: &[GofTest],
    opts: &FitOptions,
    dl: &DlConfig,
) -> Result<GofMcSummary> {
    const LEVEL: f64 = 0.05;
    scn.validate()?;
    if tests.is_empty() {
        return Err(Error::InvalidArgument("no tests requested".into()));
    }
    let want_dl = tests.iter().any(|t| matches!(t, GofTest::DlCp | GofTest::DlKs));
    let outcomes: Vec<Option<Vec<Option<bool>>>> = (0..scn.n_replicas)
        .into_par_iter()
        .map(|m| {
            let path = scn.simulate_replica(m as u64).ok()?;
            let data = path.observed();
            let fitted = fit(&scn.spec, &data, opts).ok()?;
            let res = residuals(&fitted, &data, true).ok()?;
            let dl_out = if want_dl {
                let mut seed_rng = path_rng(scn.seed ^ 0x9e37_79b9_7f4a_7c15, m as u64);
                let cfg = DlConfig {
                    seed: seed_rng.random(),
                    ..*dl
                };
                dl_tests(&res.simple, &cfg).ok()
            } else {
                None
            };
            let ks = ks_normality(&res.quantile).ok();
            let lks = lilliefors_normality(&res.quantile).ok();
            Some(
                tests
                    .iter()
                    .map(|t| match t {
                        GofTest::DlCp => dl_out.map(|d| d.cp.p_value < LEVEL),
                        GofTest::DlKs => dl_out.map(|d| d.ks.p_value < LEVEL),
                        GofTest::KsNormality => ks.map(|k| k.p_value < LEVEL),
                        GofTest::KsLilliefors => lks.map(|k| k.p_value < LEVEL),
                    })
                    .collect(),
            )
        })
        .collect();
    let rows = tests
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let decisions: Vec<bool> = outcomes.iter().flatten().filter_map(|o| o[i]).collect();
            let rejected = decisions.iter().filter(|&&d| d).count();
            RejectionRow {
                test: t.name().to_string(),
                evaluated: decisions.len(),
                rejected,
                rate: if decisions.is_empty() {
                    f64::NAN
                } else {
                    rejected as f64 / decisions.len() as f64
                },
            }
        })
        .collect();
    Ok(GofMcSummary {
        n: scn.n,
        n_replicas: scn.n_replicas,
        level: LEVEL,
        failed: outcomes.iter().filter(|o| o.is_none()).count(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::filter_forward;
    use crate::links::LinkChoice;

    #[test]
    fn sinusoid_design_spans_burnin() {
        let x = CovariateRule::Sinusoid.design(50, 25);
        assert_eq!(x.nrows(), 75);
        // row 24 is t = 0, row 49 is t = 25
        assert!(x[(24, 0)].abs() < 1e-15);
        assert!((x[(49, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn generated_path_refilters_exactly() {
        let spec = ModelSpec::new(1, 1, 1, LinkChoice::Logit);
        let gamma = ParamVector {
            alpha: 0.5,
            beta: vec![0.5],
            phi: vec![0.2],
            theta: vec![-0.4],
        };
        let x = CovariateRule::Sinusoid.design(200, 100);
        let mut rng = path_rng(3, 0);
        let path = simulate_path(&spec, &gamma, 200, 100, &x, &mut rng).unwrap();
        let fs = filter_forward(&spec, &gamma, &path.full()).unwrap();
        for (a, b) in fs.mu.iter().zip(&path.mu) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(path.observed().n(), 200);
    }

    #[test]
    fn scenario_validation() {
        let spec = ModelSpec::new(0, 0, 1, LinkChoice::Logit);
        let mut scn = Scenario {
            gamma_true: ParamVector::zeros(&spec),
            spec,
            n: 100,
            burnin: 100,
            covariate_rule: CovariateRule::None,
            n_replicas: 2,
            seed: 1,
        };
        assert!(scn.validate().is_err());
        scn.covariate_rule = CovariateRule::Sinusoid;
        assert!(scn.validate().is_ok());
        scn.n = 0;
        assert!(scn.validate().is_err());
    }

    #[test]
    fn scenario_json_defaults() {
        let json = r#"{"spec":{"p":0,"q":0,"r":0,"link":"logit","free_mask":[true]},
            "gamma_true":{"alpha":0.1,"beta":[],"phi":[],"theta":[]},
            "n":10,"n_replicas":3}"#;
        let scn: Scenario = serde_json::from_str(json).unwrap();
        assert_eq!(scn.burnin, 100);
        assert_eq!(scn.covariate_rule, CovariateRule::None);
    }
}
