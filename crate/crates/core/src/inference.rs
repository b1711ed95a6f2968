//! Wald tests, confidence intervals and bidirectional stepwise selection.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{fit, Evaluation, FitOptions, FittedModel};
use crate::filter::{ModelSpec, SeriesData};
use crate::links::LinkChoice;
use crate::stats::{norm_quantile, two_sided_p};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldResult {
    pub statistic: f64,
    pub p_value: f64,
    pub coefficient_index: usize,
    pub null_value: f64,
}

/// Wald test of `gamma_j = gamma_star`; `j` indexes the full coefficient layout.
pub fn wald_test(fit: &FittedModel, j: usize, gamma_star: f64) -> Result<WaldResult> {
    let se = std_error(fit, j)?;
    let est = fit.gamma_hat.to_vec()[j];
    let z = if est == gamma_star { 0.0 } else { (est - gamma_star) / se };
    Ok(WaldResult {
        statistic: z,
        p_value: two_sided_p(z),
        coefficient_index: j,
        null_value: gamma_star,
    })
}

fn std_error(fit: &FittedModel, j: usize) -> Result<f64> {
    if j >= fit.spec.n_coef() {
        return Err(Error::InvalidArgument(format!(
            "coefficient index {j} out of range (model has {})",
            fit.spec.n_coef()
        )));
    }
    if !fit.spec.free_mask[j] {
        return Err(Error::FixedCoefficient(j));
    }
    if fit.k_inv.is_none() {
        return Err(Error::SingularInformation);
    }
    fit.std_err[j].ok_or(Error::SingularInformation)
}

/// Wald p-values against zero in the full layout (`None` for fixed entries).
pub fn wald_p_values(fit: &FittedModel) -> Result<Vec<Option<f64>>> {
    if fit.k_inv.is_none() && fit.n_free() > 0 {
        return Err(Error::SingularInformation);
    }
    (0..fit.spec.n_coef())
        .map(|j| {
            if fit.spec.free_mask[j] {
                wald_test(fit, j, 0.0).map(|w| Some(w.p_value))
            } else {
                Ok(None)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamInterval {
    pub index: usize,
    pub name: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

fn z_for(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!("miscoverage {delta} not in (0, 1]")));
    }
    Ok(norm_quantile(1.0 - delta / 2.0))
}

/// Wald intervals `estimate +/- z_{1-delta/2} * se` for every free coefficient.
pub fn conf_int_params(fit: &FittedModel, delta: f64) -> Result<Vec<ParamInterval>> {
    let z = z_for(delta)?;
    let names = fit.spec.coefficient_names();
    let values = fit.gamma_hat.to_vec();
    fit.spec
        .free_indices()
        .into_iter()
        .map(|j| {
            let se = std_error(fit, j)?;
            Ok(ParamInterval {
                index: j,
                name: names[j].clone(),
                estimate: values[j],
                lower: values[j] - z * se,
                upper: values[j] + z * se,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanInterval {
    pub t: usize,
    pub mu_hat: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Delta-method interval for the in-sample mean `mu_t` (`t` is 1-based).
///
/// The gradient of `eta_t` is row `t` of `D`, so
/// `Var(mu_hat_t) ~ Z' K_n^{-1} Z / g'(mu_hat_t)^2`.
pub fn conf_int_mu(fit: &FittedModel, data: &SeriesData, t: usize, delta: f64) -> Result<MeanInterval> {
    Ok(conf_int_mu_all(fit, data, delta)?.swap_remove(checked_time(t, data.n())?))
}

fn checked_time(t: usize, n: usize) -> Result<usize> {
    if t == 0 || t > n {
        return Err(Error::InvalidArgument(format!("time index {t} not in 1..={n}")));
    }
    Ok(t - 1)
}

/// [`conf_int_mu`] for every time point at once.
pub fn conf_int_mu_all(fit: &FittedModel, data: &SeriesData, delta: f64) -> Result<Vec<MeanInterval>> {
    let z = z_for(delta)?;
    let k_inv = fit.k_inv.as_ref().ok_or(Error::SingularInformation)?;
    let ev = Evaluation::new(&fit.spec, &fit.gamma_hat, data)?;
    let free = fit.spec.free_indices();
    let out = (0..data.n())
        .map(|t| {
            let zrow: Vec<f64> = free.iter().map(|&j| ev.derivs.d[(t, j)]).collect();
            let mut quad = 0.0;
            for (a, za) in zrow.iter().enumerate() {
                for (b, zb) in zrow.iter().enumerate() {
                    quad += za * k_inv[(a, b)] * zb;
                }
            }
            let mu = ev.state.mu[t];
            let half = z * quad.max(0.0).sqrt() * ev.derivs.t_diag[t];
            MeanInterval {
                t: t + 1,
                mu_hat: mu,
                lower: (mu - half).max(0.0),
                upper: (mu + half).min(1.0),
            }
        })
        .collect();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepwiseOptions {
    /// Fix a coefficient at zero when its p-value exceeds this.
    pub drop: f64,
    /// Re-admit an excluded coefficient when its re-entry p-value is below this.
    pub add: f64,
    pub max_rounds: usize,
    /// Never eliminate the intercept.
    pub keep_intercept: bool,
    pub fit: FitOptions,
}

impl Default for StepwiseOptions {
    fn default() -> Self {
        Self {
            drop: 0.15,
            add: 0.10,
            max_rounds: 20,
            keep_intercept: true,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepAction {
    Drop,
    Add,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub action: StepAction,
    pub index: usize,
    pub coefficient: String,
    pub p_value: f64,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub fit: FittedModel,
    pub trace: Vec<SelectionStep>,
    /// Refits performed, the full model included.
    pub refits: usize,
}

fn fit_ok(spec: &ModelSpec, data: &SeriesData, opts: &FitOptions) -> Option<FittedModel> {
    match fit(spec, data, opts) {
        Ok(f) if f.converged && f.k_inv.is_some() => Some(f),
        _ => None,
    }
}

/// Bidirectional stepwise selection driven by Wald p-values.
///
/// Starts from the full model with `p_max` AR and `q_max` MA lags (plus all
/// covariates in `data`). The backward phase fixes the single least
/// significant coefficient at zero while its p-value exceeds `drop`; the
/// forward phase re-admits the excluded coefficient with the smallest
/// re-entry p-value if it is below `add`. Phases alternate until nothing
/// changes. A mask is never revisited, and a step whose refit fails is
/// rolled back with that coefficient frozen.
pub fn stepwise_select(
    data: &SeriesData,
    p_max: usize,
    q_max: usize,
    link: LinkChoice,
    opts: &StepwiseOptions,
) -> Result<Selection> {
    let full = ModelSpec::new(p_max, q_max, data.r(), link);
    let mut current = fit(&full, data, &opts.fit)?;
    if current.k_inv.is_none() {
        return Err(Error::SingularInformation);
    }
    let names = full.coefficient_names();
    let k = full.n_coef();
    let budget = 2 * k * opts.max_rounds.max(1);

    let mut visited: HashSet<Vec<bool>> = HashSet::new();
    visited.insert(current.spec.free_mask.clone());
    let mut frozen = vec![false; k];
    if opts.keep_intercept {
        frozen[0] = true;
    }
    let mut trace = Vec::new();
    let mut refits = 1;

    let with_flag = |mask: &[bool], j: usize, value: bool| -> Result<ModelSpec> {
        let mut m = mask.to_vec();
        m[j] = value;
        full.clone().with_mask(m)
    };

    'rounds: for _ in 0..opts.max_rounds {
        let mut changed = false;

        // backward elimination, one coefficient per refit
        loop {
            if refits >= budget {
                break 'rounds;
            }
            let pvals = wald_p_values(&current)?;
            let worst = (0..k)
                .filter(|&j| !frozen[j])
                .filter_map(|j| pvals[j].map(|p| (j, p)))
                .filter(|&(_, p)| p > opts.drop)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            let Some((j, p)) = worst else { break };
            let spec = with_flag(&current.spec.free_mask, j, false)?;
            if visited.contains(&spec.free_mask) {
                frozen[j] = true;
                continue;
            }
            refits += 1;
            match fit_ok(&spec, data, &opts.fit) {
                Some(next) => {
                    log::info!("drop {} (p = {p:.4})", names[j]);
                    trace.push(SelectionStep {
                        action: StepAction::Drop,
                        index: j,
                        coefficient: names[j].clone(),
                        p_value: p,
                    });
                    visited.insert(spec.free_mask);
                    current = next;
                    changed = true;
                }
                None => frozen[j] = true,
            }
        }

        // forward re-entry
        let candidates: Vec<(usize, ModelSpec)> = (0..k)
            .filter(|&j| !current.spec.free_mask[j] && !frozen[j])
            .filter_map(|j| with_flag(&current.spec.free_mask, j, true).ok().map(|s| (j, s)))
            .filter(|(_, s)| !visited.contains(&s.free_mask))
            .collect();
        if refits + candidates.len() > budget {
            break;
        }
        refits += candidates.len();
        let trials: Vec<(usize, ModelSpec, Option<FittedModel>)> = candidates
            .into_par_iter()
            .map(|(j, s)| {
                let f = fit_ok(&s, data, &opts.fit);
                (j, s, f)
            })
            .collect();
        let mut best: Option<(usize, f64, FittedModel, ModelSpec)> = None;
        for (j, spec, trial) in trials {
            let Some(f) = trial else {
                frozen[j] = true;
                continue;
            };
            let p = wald_test(&f, j, 0.0)?.p_value;
            if p < opts.add && best.as_ref().is_none_or(|b| p < b.1) {
                best = Some((j, p, f, spec));
            }
        }
        if let Some((j, p, f, spec)) = best {
            log::info!("add {} (p = {p:.4})", names[j]);
            trace.push(SelectionStep {
                action: StepAction::Add,
                index: j,
                coefficient: names[j].clone(),
                p_value: p,
            });
            visited.insert(spec.free_mask);
            current = f;
            changed = true;
        }

        if !changed {
            break;
        }
    }

    Ok(Selection {
        fit: current,
        trace,
        refits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{FitMethod, InformationCriteria};
    use crate::filter::ParamVector;
    use nalgebra::DMatrix;

    fn fake_fit(estimate: f64, se: f64) -> FittedModel {
        let spec = ModelSpec::new(1, 0, 0, LinkChoice::Logit);
        let info = DMatrix::from_diagonal_element(2, 2, 1.0 / (se * se));
        FittedModel {
            gamma_hat: ParamVector {
                alpha: 0.1,
                beta: vec![],
                phi: vec![estimate],
                theta: vec![],
            },
            loglik: 0.0,
            k_inv: Some(info.clone().try_inverse().unwrap()),
            k_n: info,
            std_err: vec![Some(se), Some(se)],
            fitted_mu: vec![],
            converged: true,
            iterations: 0,
            n_obs: 100,
            criteria: InformationCriteria::new(0.0, 2, 100),
            clamp_active: false,
            method: FitMethod::Bfgs,
            score: vec![0.0, 0.0],
            loglik_trace: vec![],
            spec,
        }
    }

    #[test]
    fn wald_null_at_estimate() {
        let f = fake_fit(0.2, 0.1);
        let w = wald_test(&f, 1, 0.2).unwrap();
        assert_eq!(w.statistic, 0.0);
        assert_eq!(w.p_value, 1.0);
    }

    #[test]
    fn wald_two_sigma() {
        let f = fake_fit(0.2, 0.1);
        let w = wald_test(&f, 1, 0.0).unwrap();
        assert!((w.statistic - 2.0).abs() < 1e-12);
        assert!((w.p_value - 0.0455).abs() < 1e-4);
    }

    #[test]
    fn wald_errors() {
        let mut f = fake_fit(0.2, 0.1);
        assert!(wald_test(&f, 7, 0.0).is_err());
        f.k_inv = None;
        assert_eq!(wald_test(&f, 1, 0.0), Err(Error::SingularInformation));
    }

    #[test]
    fn interval_values() {
        let f = fake_fit(0.5, 0.1);
        let ci = conf_int_params(&f, 0.05).unwrap();
        assert!((ci[1].lower - 0.304).abs() < 1e-3);
        assert!((ci[1].upper - 0.696).abs() < 1e-3);
        let degenerate = conf_int_params(&f, 1.0).unwrap();
        assert_eq!(degenerate[1].lower, 0.5);
        assert_eq!(degenerate[1].upper, 0.5);
        assert!(conf_int_params(&f, 0.0).is_err());
    }
}
