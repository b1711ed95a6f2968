//! Model description types and the forward recursion for the linear predictor.
//!
//! Coefficients are always laid out as `(alpha, beta_1..beta_r, phi_1..phi_p,
//! theta_1..theta_q)`. Pre-sample values follow the forecasting convention:
//! `g(Y_t) = 0`, `r_t = 0` and the covariate row is the average of the first
//! `p` rows for `t < 1`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::links::LinkChoice;

/// Orders, covariate count, link and the set of free coefficients.
///
/// When deserialized without `free_mask`, every coefficient is free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct ModelSpec {
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub link: LinkChoice,
    pub free_mask: Vec<bool>,
}

#[derive(Deserialize)]
struct RawSpec {
    p: usize,
    q: usize,
    r: usize,
    link: LinkChoice,
    free_mask: Option<Vec<bool>>,
}

impl TryFrom<RawSpec> for ModelSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let spec = ModelSpec::new(raw.p, raw.q, raw.r, raw.link);
        match raw.free_mask {
            Some(mask) => spec.with_mask(mask),
            None => Ok(spec),
        }
    }
}

impl ModelSpec {
    /// A specification with every coefficient free.
    pub fn new(p: usize, q: usize, r: usize, link: LinkChoice) -> Self {
        Self {
            p,
            q,
            r,
            link,
            free_mask: vec![true; 1 + r + p + q],
        }
    }

    pub fn with_mask(mut self, free_mask: Vec<bool>) -> Result<Self> {
        self.free_mask = free_mask;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.free_mask.len() != self.n_coef() {
            return Err(Error::Dimension(format!(
                "free mask has {} entries, model has {} coefficients",
                self.free_mask.len(),
                self.n_coef()
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn n_coef(&self) -> usize {
        1 + self.r + self.p + self.q
    }

    pub fn free_indices(&self) -> Vec<usize> {
        self.free_mask
            .iter()
            .enumerate()
            .filter_map(|(j, &f)| f.then_some(j))
            .collect()
    }

    pub fn n_free(&self) -> usize {
        self.free_mask.iter().filter(|&&f| f).count()
    }

    #[inline]
    pub fn beta_index(&self, l: usize) -> usize {
        1 + l
    }

    #[inline]
    pub fn phi_index(&self, k: usize) -> usize {
        1 + self.r + k
    }

    #[inline]
    pub fn theta_index(&self, s: usize) -> usize {
        1 + self.r + self.p + s
    }

    /// Human-readable coefficient names, 1-based for lags and covariates.
    pub fn coefficient_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_coef());
        names.push("alpha".to_string());
        names.extend((1..=self.r).map(|l| format!("beta{l}")));
        names.extend((1..=self.p).map(|k| format!("phi{k}")));
        names.extend((1..=self.q).map(|s| format!("theta{s}")));
        names
    }
}

/// The full coefficient vector `(alpha, beta, phi, theta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(spec: &ModelSpec) -> Self {
        Self {
            alpha: 0.0,
            beta: vec![0.0; spec.r],
            phi: vec![0.0; spec.p],
            theta: vec![0.0; spec.q],
        }
    }

    /// Builds from the packed layout; masked entries are forced to zero.
    pub fn from_slice(spec: &ModelSpec, values: &[f64]) -> Result<Self> {
        if values.len() != spec.n_coef() {
            return Err(Error::Dimension(format!(
                "expected {} coefficients, got {}",
                spec.n_coef(),
                values.len()
            )));
        }
        let v: Vec<f64> = values
            .iter()
            .zip(&spec.free_mask)
            .map(|(&x, &free)| if free { x } else { 0.0 })
            .collect();
        let (r, p) = (spec.r, spec.p);
        Ok(Self {
            alpha: v[0],
            beta: v[1..1 + r].to_vec(),
            phi: v[1 + r..1 + r + p].to_vec(),
            theta: v[1 + r + p..].to_vec(),
        })
    }

    /// Expands a vector over the free coordinates into a full parameter vector.
    pub fn from_free(spec: &ModelSpec, free: &[f64]) -> Result<Self> {
        let idx = spec.free_indices();
        if free.len() != idx.len() {
            return Err(Error::Dimension(format!(
                "expected {} free coefficients, got {}",
                idx.len(),
                free.len()
            )));
        }
        let mut full = vec![0.0; spec.n_coef()];
        for (&j, &v) in idx.iter().zip(free) {
            full[j] = v;
        }
        Self::from_slice(spec, &full)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + self.beta.len() + self.phi.len() + self.theta.len());
        v.push(self.alpha);
        v.extend_from_slice(&self.beta);
        v.extend_from_slice(&self.phi);
        v.extend_from_slice(&self.theta);
        v
    }

    pub fn free_values(&self, spec: &ModelSpec) -> Vec<f64> {
        let all = self.to_vec();
        spec.free_indices().into_iter().map(|j| all[j]).collect()
    }

    /// Checks dimensions against `spec` and that masked entries are zero.
    pub fn check(&self, spec: &ModelSpec) -> Result<()> {
        if self.beta.len() != spec.r || self.phi.len() != spec.p || self.theta.len() != spec.q {
            return Err(Error::Dimension(format!(
                "parameter vector (r={}, p={}, q={}) does not match model (r={}, p={}, q={})",
                self.beta.len(),
                self.phi.len(),
                self.theta.len(),
                spec.r,
                spec.p,
                spec.q
            )));
        }
        spec.validate()?;
        for (j, (v, &free)) in self.to_vec().iter().zip(&spec.free_mask).enumerate() {
            if !free && *v != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "coefficient {j} is masked but equals {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Observed series and its covariates (`n x r`, possibly `r = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesData {
    y: Vec<f64>,
    x: DMatrix<f64>,
}

impl SeriesData {
    pub fn new(y: Vec<f64>, x: DMatrix<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::InvalidArgument("empty series".into()));
        }
        if x.nrows() != y.len() {
            return Err(Error::Dimension(format!(
                "covariate matrix has {} rows, series has {}",
                x.nrows(),
                y.len()
            )));
        }
        if let Some((t, &v)) = y.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v < 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "observation {} = {v} is not strictly inside (0, 1)",
                t + 1
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite covariate value".into()));
        }
        Ok(Self { y, x })
    }

    pub fn univariate(y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        Self::new(y, DMatrix::zeros(n, 0))
    }

    #[inline]
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn r(&self) -> usize {
        self.x.ncols()
    }

    /// First `len` observations.
    pub fn head(&self, len: usize) -> Result<Self> {
        let len = len.min(self.n());
        Self::new(self.y[..len].to_vec(), self.x.rows(0, len).into_owned())
    }
}

/// Per-time output of the forward recursion (0-based index `t` is time `t+1`).
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub eta: Vec<f64>,
    pub mu: Vec<f64>,
    /// `r_t = g(Y_t) - g(mu_t)`
    pub resid_r: Vec<f64>,
    /// `g(Y_t)`, cached for the derivative recursions.
    pub g_y: Vec<f64>,
    /// Whether `mu_t` hit the saturation clamp of the inverse link.
    pub saturated: Vec<bool>,
}

impl FilterState {
    pub fn any_saturated(&self) -> bool {
        self.saturated.iter().any(|&s| s)
    }
}

/// Derivatives of the linear predictor and the pieces of the score.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivMatrices {
    /// `n x (1+r+p+q)`, `[D]_{t,j} = d eta_t / d gamma_j`, all coordinates.
    pub d: DMatrix<f64>,
    /// `d mu_t / d eta_t = 1 / g'(mu_t)`, zero where the clamp is active.
    pub t_diag: Vec<f64>,
    /// `d l_t / d mu_t`
    pub h: Vec<f64>,
}

/// One-step evaluation of the systematic component.
///
/// `x` must cover every time index the caller asks about; the pre-sample
/// covariate row is the mean of its first `p` rows.
pub(crate) struct Recursion<'a> {
    spec: &'a ModelSpec,
    gamma: &'a ParamVector,
    xb: Vec<f64>,
    pre_xb: f64,
    pre_x: Vec<f64>,
}

impl<'a> Recursion<'a> {
    pub(crate) fn new(spec: &'a ModelSpec, gamma: &'a ParamVector, x: &DMatrix<f64>) -> Self {
        let r = spec.r;
        let xb: Vec<f64> = (0..x.nrows())
            .map(|t| (0..r).map(|l| x[(t, l)] * gamma.beta[l]).sum())
            .collect();
        let mut pre_x = vec![0.0; r];
        if spec.p > 0 && r > 0 {
            let rows = spec.p.min(x.nrows());
            for (l, v) in pre_x.iter_mut().enumerate() {
                *v = (0..rows).map(|t| x[(t, l)]).sum::<f64>() / spec.p as f64;
            }
        }
        let pre_xb = pre_x.iter().zip(&gamma.beta).map(|(a, b)| a * b).sum();
        Self {
            spec,
            gamma,
            xb,
            pre_xb,
            pre_x,
        }
    }

    /// `eta_t` given `g(Y_s)` and `r_s` for all `s < t` (0-based).
    #[inline]
    pub(crate) fn eta(&self, t: usize, g_y: &[f64], resid: &[f64]) -> f64 {
        let g = self.gamma;
        let mut eta = g.alpha + self.xb[t];
        for (i, &phi) in g.phi.iter().enumerate() {
            let lag = i + 1;
            eta += if t >= lag {
                phi * (g_y[t - lag] - self.xb[t - lag])
            } else {
                -phi * self.pre_xb
            };
        }
        for (j, &theta) in g.theta.iter().enumerate() {
            let lag = j + 1;
            if t >= lag {
                eta += theta * resid[t - lag];
            }
        }
        eta
    }

    pub(crate) fn link(&self) -> LinkChoice {
        self.spec.link
    }
}

fn check_inputs(spec: &ModelSpec, gamma: &ParamVector, data: &SeriesData) -> Result<()> {
    gamma.check(spec)?;
    if data.r() != spec.r {
        return Err(Error::Dimension(format!(
            "model expects {} covariates, data has {}",
            spec.r,
            data.r()
        )));
    }
    Ok(())
}

/// Runs the recursion over the sample, producing `eta_t`, `mu_t` and `r_t`.
pub fn filter_forward(
    spec: &ModelSpec,
    gamma: &ParamVector,
    data: &SeriesData,
) -> Result<FilterState> {
    check_inputs(spec, gamma, data)?;
    let n = data.n();
    let link = spec.link;
    let rec = Recursion::new(spec, gamma, data.x());
    let g_y: Vec<f64> = data.y().iter().map(|&y| link.apply(y)).collect();
    let mut eta = Vec::with_capacity(n);
    let mut mu = Vec::with_capacity(n);
    let mut resid = Vec::with_capacity(n);
    let mut saturated = Vec::with_capacity(n);
    for t in 0..n {
        let e = rec.eta(t, &g_y, &resid);
        if !e.is_finite() {
            return Err(Error::NonFinite(t + 1));
        }
        let (m, sat) = link.inverse_flagged(e);
        eta.push(e);
        mu.push(m);
        saturated.push(sat);
        resid.push(g_y[t] - link.apply(m));
    }
    Ok(FilterState {
        eta,
        mu,
        resid_r: resid,
        g_y,
        saturated,
    })
}

/// `d l_t / d mu_t`.
#[inline]
pub(crate) fn score_mu(y: f64, mu: f64) -> f64 {
    -2.0 / (1.0 - mu) - 1.0 / mu + y / (mu * mu * (1.0 - y))
}

/// Builds `D`, `T` and `h` from a filtered state.
///
/// The MA feedback enters through `r_{t-j}`, whose derivative is
/// `-d eta_{t-j}/d gamma` except where the inverse link is saturated (there
/// `mu` no longer moves with `eta`).
pub fn deriv_recursions(
    spec: &ModelSpec,
    gamma: &ParamVector,
    data: &SeriesData,
    fs: &FilterState,
) -> Result<DerivMatrices> {
    check_inputs(spec, gamma, data)?;
    let n = data.n();
    if fs.mu.len() != n {
        return Err(Error::Dimension("filter state does not match data".into()));
    }
    let (p, q, r) = (spec.p, spec.q, spec.r);
    let k = spec.n_coef();
    let x = data.x();
    let rec = Recursion::new(spec, gamma, x);

    let mut d = vec![0.0; n * k];
    for t in 0..n {
        let (done, row_and_rest) = d.split_at_mut(t * k);
        let row = &mut row_and_rest[..k];

        row[0] = 1.0;
        for l in 0..r {
            let mut v = x[(t, l)];
            for (i, &phi) in gamma.phi.iter().enumerate() {
                let lag = i + 1;
                v -= phi * if t >= lag { x[(t - lag, l)] } else { rec.pre_x[l] };
            }
            row[1 + l] = v;
        }
        for kk in 0..p {
            let lag = kk + 1;
            row[1 + r + kk] = if t >= lag {
                fs.g_y[t - lag] - rec.xb[t - lag]
            } else {
                -rec.pre_xb
            };
        }
        for s in 0..q {
            let lag = s + 1;
            row[1 + r + p + s] = if t >= lag { fs.resid_r[t - lag] } else { 0.0 };
        }
        for (j, &theta) in gamma.theta.iter().enumerate() {
            let lag = j + 1;
            if t < lag || theta == 0.0 || fs.saturated[t - lag] {
                continue;
            }
            let prev = &done[(t - lag) * k..(t - lag + 1) * k];
            for (dst, &src) in row.iter_mut().zip(prev) {
                *dst -= theta * src;
            }
        }
    }

    let link = spec.link;
    let t_diag = fs
        .mu
        .iter()
        .zip(&fs.saturated)
        .map(|(&m, &sat)| if sat { 0.0 } else { 1.0 / link.deriv(m) })
        .collect();
    let h = data
        .y()
        .iter()
        .zip(&fs.mu)
        .map(|(&y, &m)| score_mu(y, m))
        .collect();
    Ok(DerivMatrices {
        d: DMatrix::from_row_slice(n, k, &d),
        t_diag,
        h,
    })
}
