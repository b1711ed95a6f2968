//! Partial maximum likelihood: log-likelihood, analytic score, conditional
//! information matrix and the fitting driver.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{deriv_recursions, filter_forward, DerivMatrices, FilterState, ModelSpec, ParamVector, SeriesData};
use crate::optim::{bfgs, nelder_mead, Stopping};
use crate::unit_lindley::log_density;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Relative change in the log-likelihood between accepted steps.
    pub rel_tol: f64,
    /// Bound on `max_j |U_j|` at convergence.
    pub grad_tol: f64,
    /// Restart with Nelder-Mead when the quasi-Newton run does not converge.
    pub fallback_enabled: bool,
    pub start_override: Option<ParamVector>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            rel_tol: 1e-8,
            grad_tol: 1e-4,
            fallback_enabled: true,
            start_override: None,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) || !(self.grad_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InformationCriteria {
    pub aic: f64,
    pub bic: f64,
    pub hqc: f64,
}

impl InformationCriteria {
    pub fn new(loglik: f64, k: usize, n: usize) -> Self {
        let k = k as f64;
        let n = n as f64;
        Self {
            aic: -2.0 * loglik + 2.0 * k,
            bic: -2.0 * loglik + k * n.ln(),
            hqc: -2.0 * loglik + 2.0 * k * n.ln().ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    Bfgs,
    NelderMeadThenBfgs,
}

/// Result of [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub gamma_hat: ParamVector,
    pub loglik: f64,
    /// Conditional information over the free coordinates, in layout order.
    pub k_n: DMatrix<f64>,
    pub k_inv: Option<DMatrix<f64>>,
    /// Standard errors in the full layout; `None` for coefficients fixed at zero.
    pub std_err: Vec<Option<f64>>,
    pub fitted_mu: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub n_obs: usize,
    pub criteria: InformationCriteria,
    /// The inverse-link clamp is active somewhere at the estimate.
    pub clamp_active: bool,
    pub method: FitMethod,
    pub score: Vec<f64>,
    pub loglik_trace: Vec<f64>,
}

impl FittedModel {
    /// Assembles a fitted model at a given estimate, recomputing the
    /// likelihood, information and standard errors from the data.
    pub fn at_estimate(
        spec: &ModelSpec,
        gamma: ParamVector,
        data: &SeriesData,
        converged: bool,
        iterations: usize,
        method: FitMethod,
        loglik_trace: Vec<f64>,
    ) -> Result<Self> {
        let ev = Evaluation::new(spec, &gamma, data)?;
        let loglik = ev.loglik();
        let k_n = ev.cond_info();
        let k_inv = invert_spd(&k_n);
        let free = spec.free_indices();
        let mut std_err = vec![None; spec.n_coef()];
        if let Some(inv) = &k_inv {
            for (a, &j) in free.iter().enumerate() {
                std_err[j] = Some(inv[(a, a)].max(0.0).sqrt());
            }
        }
        let clamp_active = ev.state.any_saturated();
        if clamp_active {
            log::warn!("inverse-link clamp is active at the estimate");
        }
        Ok(Self {
            spec: spec.clone(),
            criteria: InformationCriteria::new(loglik, spec.n_free(), data.n()),
            score: ev.score(),
            fitted_mu: ev.state.mu.clone(),
            gamma_hat: gamma,
            loglik,
            k_n,
            k_inv,
            std_err,
            converged,
            iterations,
            n_obs: data.n(),
            clamp_active,
            method,
            loglik_trace,
        })
    }

    pub fn n_free(&self) -> usize {
        self.spec.n_free()
    }

    /// Position of full-layout coefficient `j` among the free coordinates.
    pub fn free_position(&self, j: usize) -> Option<usize> {
        if j >= self.spec.n_coef() || !self.spec.free_mask[j] {
            return None;
        }
        Some(self.spec.free_mask[..j].iter().filter(|&&f| f).count())
    }
}

/// Cholesky-based inverse; `None` when the matrix is not positive definite.
pub(crate) fn invert_spd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Some(m.clone());
    }
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let chol = m.clone().cholesky()?;
    let inv = chol.inverse();
    inv.iter().all(|v| v.is_finite()).then_some(inv)
}

/// Filter output plus derivative pieces at one parameter value.
pub(crate) struct Evaluation<'a> {
    spec: &'a ModelSpec,
    data: &'a SeriesData,
    pub(crate) state: FilterState,
    pub(crate) derivs: DerivMatrices,
}

impl<'a> Evaluation<'a> {
    pub(crate) fn new(spec: &'a ModelSpec, gamma: &ParamVector, data: &'a SeriesData) -> Result<Self> {
        let state = filter_forward(spec, gamma, data)?;
        let derivs = deriv_recursions(spec, gamma, data, &state)?;
        Ok(Self {
            spec,
            data,
            state,
            derivs,
        })
    }

    pub(crate) fn loglik(&self) -> f64 {
        loglik_from_mu(self.data.y(), &self.state.mu)
    }

    pub(crate) fn score(&self) -> Vec<f64> {
        let dm = &self.derivs;
        self.spec
            .free_indices()
            .into_iter()
            .map(|j| {
                dm.d.column(j)
                    .iter()
                    .zip(&dm.t_diag)
                    .zip(&dm.h)
                    .map(|((d, t), h)| d * t * h)
                    .sum()
            })
            .collect()
    }

    pub(crate) fn cond_info(&self) -> DMatrix<f64> {
        let free = self.spec.free_indices();
        let k = free.len();
        let dm = &self.derivs;
        let mut info = DMatrix::zeros(k, k);
        for (t, &mu) in self.state.mu.iter().enumerate() {
            let w = dm.t_diag[t] * dm.t_diag[t] * expected_curvature(mu);
            if w == 0.0 {
                continue;
            }
            for a in 0..k {
                let da = dm.d[(t, free[a])] * w;
                for b in 0..=a {
                    info[(a, b)] += da * dm.d[(t, free[b])];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        info
    }
}

/// `-E[d^2 l_t / d mu_t^2 | past] = (2 - (1-mu)^2) / (mu^2 (1-mu)^2)`.
#[inline]
pub fn expected_curvature(mu: f64) -> f64 {
    let om = 1.0 - mu;
    (2.0 - om * om) / (mu * mu * om * om)
}

fn loglik_from_mu(y: &[f64], mu: &[f64]) -> f64 {
    let total: f64 = y.iter().zip(mu).map(|(&y, &m)| log_density(y, m)).sum();
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}

/// Partial log-likelihood; `-inf` when the recursion breaks down.
pub fn log_likelihood(spec: &ModelSpec, gamma: &ParamVector, data: &SeriesData) -> Result<f64> {
    match filter_forward(spec, gamma, data) {
        Ok(fs) => Ok(loglik_from_mu(data.y(), &fs.mu)),
        Err(Error::NonFinite(_)) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// Partial score `D' T h` over the free coordinates.
pub fn score(spec: &ModelSpec, gamma: &ParamVector, data: &SeriesData) -> Result<Vec<f64>> {
    Ok(Evaluation::new(spec, gamma, data)?.score())
}

/// Conditional information `D' T E T D` over the free coordinates.
pub fn cond_info(spec: &ModelSpec, gamma: &ParamVector, data: &SeriesData) -> Result<DMatrix<f64>> {
    Ok(Evaluation::new(spec, gamma, data)?.cond_info())
}

/// Least-squares starting values on the link scale.
///
/// Regresses `g(y_t)` on an intercept, the covariates and `p` lags of
/// `g(y)`; MA coefficients start at zero. Intercept-only models and
/// rank-deficient designs use `alpha = g(mean(y))` with everything else zero.
pub fn start_values(spec: &ModelSpec, data: &SeriesData) -> Result<ParamVector> {
    spec.validate()?;
    if data.r() != spec.r {
        return Err(Error::Dimension(format!(
            "model expects {} covariates, data has {}",
            spec.r,
            data.r()
        )));
    }
    let link = spec.link;
    let n = data.n();
    let y = data.y();
    let fallback = || {
        let mean = y.iter().sum::<f64>() / n as f64;
        let mut g = ParamVector::zeros(spec);
        if spec.free_mask[0] {
            g.alpha = link.apply(mean);
        }
        g
    };

    let (p, r) = (spec.p, spec.r);
    let mut cols: Vec<usize> = Vec::new();
    if spec.free_mask[0] {
        cols.push(0);
    }
    cols.extend((0..r).map(|l| spec.beta_index(l)).filter(|&j| spec.free_mask[j]));
    cols.extend((0..p).map(|k| spec.phi_index(k)).filter(|&j| spec.free_mask[j]));
    // intercept-only: g(mean(y)) rather than mean(g(y))
    if cols.is_empty() || cols == [0] || n <= p + cols.len() {
        return Ok(fallback());
    }

    let gy: Vec<f64> = y.iter().map(|&v| link.apply(v)).collect();
    let rows = n - p;
    let design = DMatrix::from_fn(rows, cols.len(), |i, c| {
        let t = i + p;
        let j = cols[c];
        if j == 0 {
            1.0
        } else if j <= r {
            data.x()[(t, j - 1)]
        } else {
            gy[t - (j - r)]
        }
    });
    let response = DVector::from_fn(rows, |i, _| gy[i + p]);
    let svd = design.svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if !(smax > 0.0) || smin <= 1e-10 * smax {
        return Ok(fallback());
    }
    let Ok(coef) = svd.solve(&response, 1e-12 * smax) else {
        return Ok(fallback());
    };
    let mut full = vec![0.0; spec.n_coef()];
    for (c, &j) in cols.iter().enumerate() {
        full[j] = coef[c];
    }
    if full.iter().any(|v| !v.is_finite()) {
        return Ok(fallback());
    }
    ParamVector::from_slice(spec, &full)
}

/// Maximizes the partial log-likelihood.
///
/// Runs BFGS with the analytic score; on failure (and if enabled) restarts
/// with Nelder-Mead from the best point found, then polishes with BFGS again.
/// Non-convergence is reported through `converged`, never silently.
pub fn fit(spec: &ModelSpec, data: &SeriesData, opts: &FitOptions) -> Result<FittedModel> {
    spec.validate()?;
    opts.validate()?;
    let needed = spec.n_coef() + 5;
    if data.n() < needed {
        return Err(Error::TooShort { n: data.n(), needed });
    }
    let start = match &opts.start_override {
        Some(g) => {
            g.check(spec)?;
            g.clone()
        }
        None => start_values(spec, data)?,
    };

    let objective = |free: &[f64]| -> (f64, Vec<f64>) {
        let Ok(gamma) = ParamVector::from_free(spec, free) else {
            return (f64::INFINITY, vec![f64::NAN; free.len()]);
        };
        match Evaluation::new(spec, &gamma, data) {
            Ok(ev) => {
                let ll = ev.loglik();
                let u = ev.score();
                if !ll.is_finite() || u.iter().any(|v| !v.is_finite()) {
                    (f64::INFINITY, vec![f64::NAN; free.len()])
                } else {
                    (-ll, u.into_iter().map(|v| -v).collect())
                }
            }
            Err(_) => (f64::INFINITY, vec![f64::NAN; free.len()]),
        }
    };
    let stop = Stopping {
        max_iterations: opts.max_iterations,
        rel_tol: opts.rel_tol,
        grad_tol: opts.grad_tol,
    };

    let x0 = start.free_values(spec);
    let first = bfgs(objective, &x0, &stop);
    let mut iterations = first.iterations;
    let mut trace: Vec<f64> = first.trace.iter().map(|f| -f).collect();
    let (x, converged, method) = if first.converged || !opts.fallback_enabled {
        (first.x, first.converged, FitMethod::Bfgs)
    } else {
        log::debug!("quasi-Newton did not converge; restarting with Nelder-Mead");
        let base = if first.f.is_finite() { first.x } else { x0 };
        let value = |free: &[f64]| objective(free).0;
        let (x_nm, _, nm_iter) = nelder_mead(value, &base, opts.max_iterations.max(200) * 2);
        iterations += nm_iter;
        let polish = bfgs(objective, &x_nm, &stop);
        iterations += polish.iterations;
        trace.extend(polish.trace.iter().map(|f| -f));
        (polish.x, polish.converged, FitMethod::NelderMeadThenBfgs)
    };
    let gamma = ParamVector::from_free(spec, &x)?;
    FittedModel::at_estimate(spec, gamma, data, converged, iterations, method, trace)
}
