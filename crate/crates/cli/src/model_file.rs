//! Versioned JSON persistence of fitted models.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use ularma::estimation::{FitMethod, InformationCriteria};
use ularma::inference::{wald_p_values, SelectionStep};
use ularma::{FittedModel, ModelSpec, ParamVector, SeriesData};

use crate::error::{CliError, CliResult, Internal};

pub const SCHEMA_VERSION: u32 = 1;

/// One row of the coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub coefficient: String,
    pub estimate: f64,
    /// Empty for coefficients fixed at zero.
    pub std_error: Option<f64>,
    pub z_value: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub spec: ModelSpec,
    pub gamma: ParamVector,
    pub coefficients: Vec<CoefficientRow>,
    /// Conditional information over the free coefficients.
    pub k_n: Vec<Vec<f64>>,
    pub loglik: f64,
    pub criteria: InformationCriteria,
    pub converged: bool,
    pub iterations: usize,
    pub method: FitMethod,
    pub n_obs: usize,
    pub clamp_active: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Vec<SelectionStep>>,
}

pub fn coefficient_table(fit: &FittedModel) -> CliResult<Vec<CoefficientRow>> {
    let p = wald_p_values(fit)?;
    let names = fit.spec.coefficient_names();
    let values = fit.gamma_hat.to_vec();
    Ok(names
        .into_iter()
        .enumerate()
        .map(|(j, name)| {
            let se = fit.std_err[j];
            CoefficientRow {
                coefficient: name,
                estimate: values[j],
                std_error: se,
                z_value: se.filter(|&s| s > 0.0).map(|s| values[j] / s),
                p_value: p[j],
            }
        })
        .collect())
}

impl ModelFile {
    pub fn from_fit(fit: &FittedModel, selection: Option<Vec<SelectionStep>>) -> CliResult<Self> {
        let k = &fit.k_n;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            spec: fit.spec.clone(),
            gamma: fit.gamma_hat.clone(),
            coefficients: coefficient_table(fit)?,
            k_n: (0..k.nrows()).map(|i| k.row(i).iter().copied().collect()).collect(),
            loglik: fit.loglik,
            criteria: fit.criteria,
            converged: fit.converged,
            iterations: fit.iterations,
            method: fit.method,
            n_obs: fit.n_obs,
            clamp_active: fit.clamp_active,
            selection,
        })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).internal()?;
        fs::write(path, text + "\n").map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| e.context(format!("{}", path.display())))
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::schema(format!("not a model file: {e}")))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(CliError::schema(format!(
                    "model schema version {v} is not supported (expected {SCHEMA_VERSION})"
                )))
            }
            None => return Err(CliError::schema("model file has no schema_version")),
        }
        let model: Self =
            serde_json::from_value(value).map_err(|e| CliError::schema(format!("malformed model file: {e}")))?;
        model.spec.validate()?;
        model.gamma.check(&model.spec)?;
        Ok(model)
    }

    /// Rebuilds the fitted model against its training data.
    ///
    /// Fails when the data are not the sample the model was fitted on, as
    /// judged by length and log-likelihood.
    pub fn restore(&self, data: &SeriesData) -> CliResult<FittedModel> {
        if data.n() != self.n_obs {
            return Err(CliError::input(format!(
                "model was fitted on {} observations, training data has {}",
                self.n_obs,
                data.n()
            )));
        }
        if data.r() != self.spec.r {
            return Err(CliError::input(format!(
                "model uses {} covariates, data supplies {}",
                self.spec.r,
                data.r()
            )));
        }
        let fit = FittedModel::at_estimate(
            &self.spec,
            self.gamma.clone(),
            data,
            self.converged,
            self.iterations,
            self.method,
            vec![],
        )?;
        let tol = 1e-8 * self.loglik.abs().max(1.0);
        if (fit.loglik - self.loglik).abs() > tol {
            return Err(CliError::input(format!(
                "data do not match the fitted model (log-likelihood {} vs stored {})",
                fit.loglik, self.loglik
            )));
        }
        Ok(fit)
    }
}
