//! The Unit-Lindley distribution on (0,1), parameterized by its mean.
//!
//! If `X ~ Lindley(theta)` then `Y = X / (1 + X)` is Unit-Lindley with mean
//! `mu = 1 / (1 + theta)`, i.e. `theta = (1 - mu) / mu`. The distribution
//! function, quantile and sampler below all go through that representation.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};

/// Values closer than this to 0 or 1 are rejected rather than clamped.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Mean parameter of a Unit-Lindley law, `0 < mu < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitLindleyParam {
    mu: f64,
}

impl UnitLindleyParam {
    pub fn new(mu: f64) -> Result<Self> {
        if mu > BOUNDARY_TOL && mu < 1.0 - BOUNDARY_TOL {
            Ok(Self { mu })
        } else {
            Err(Error::Domain {
                what: "mu",
                value: mu,
                domain: "(0, 1)",
            })
        }
    }

    #[inline]
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Rate of the underlying Lindley variable.
    #[inline]
    pub fn lindley_rate(&self) -> f64 {
        (1.0 - self.mu) / self.mu
    }
}

fn check_support(y: f64) -> Result<()> {
    if y > BOUNDARY_TOL && y < 1.0 - BOUNDARY_TOL {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "y",
            value: y,
            domain: "(0, 1)",
        })
    }
}

/// Log density without argument checks; used in the likelihood hot path.
#[inline]
pub fn log_density(y: f64, mu: f64) -> f64 {
    2.0 * (-mu).ln_1p() - mu.ln() - 3.0 * (-y).ln_1p() + y * (mu - 1.0) / (mu * (1.0 - y))
}

pub fn pdf(y: f64, p: UnitLindleyParam) -> Result<f64> {
    check_support(y)?;
    Ok(log_density(y, p.mu).exp())
}

pub fn log_pdf(y: f64, p: UnitLindleyParam) -> Result<f64> {
    check_support(y)?;
    Ok(log_density(y, p.mu))
}

/// Distribution function `P(Y <= y)` for `0 <= y < 1`.
pub fn cdf(y: f64, p: UnitLindleyParam) -> Result<f64> {
    if !(0.0..1.0).contains(&y) {
        return Err(Error::Domain {
            what: "y",
            value: y,
            domain: "[0, 1)",
        });
    }
    Ok(cdf_unchecked(y, p.mu))
}

/// Survival function `P(Y > y)`, accurate in the upper tail.
pub fn sf(y: f64, p: UnitLindleyParam) -> Result<f64> {
    if !(0.0..1.0).contains(&y) {
        return Err(Error::Domain {
            what: "y",
            value: y,
            domain: "[0, 1)",
        });
    }
    Ok(sf_unchecked(y, p.mu))
}

#[inline]
pub(crate) fn sf_unchecked(y: f64, mu: f64) -> f64 {
    let theta = (1.0 - mu) / mu;
    let x = y / (1.0 - y);
    // (1 + theta + theta x) / (1 + theta) = 1 + mu * theta * x
    (1.0 + mu * theta * x) * (-theta * x).exp()
}

#[inline]
pub(crate) fn cdf_unchecked(y: f64, mu: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let theta = (1.0 - mu) / mu;
    let tx = theta * y / (1.0 - y);
    // 1 - (1 + mu tx) e^{-tx} = -expm1(-tx) - mu tx e^{-tx}
    let v = -(-tx).exp_m1() - mu * tx * (-tx).exp();
    v.clamp(0.0, 1.0)
}

/// Quantile function: the `y` with `cdf(y) = u`.
///
/// Safeguarded Newton iteration, falling back to bisection whenever a step
/// leaves the current bracket. Upper quantiles are solved on the survival
/// function so that `1 - u` keeps its precision.
pub fn quantile(u: f64, p: UnitLindleyParam) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain {
            what: "u",
            value: u,
            domain: "(0, 1)",
        });
    }
    let mu = p.mu;
    let upper = u > 0.5;
    let target = if upper { 1.0 - u } else { u };
    // increasing in y in both branches
    let resid = |y: f64| {
        if upper {
            target - sf_unchecked(y, mu)
        } else {
            cdf_unchecked(y, mu) - target
        }
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut y = mu;
    for _ in 0..300 {
        let f = resid(y);
        if f.abs() <= 2.0 * f64::EPSILON * target {
            return Ok(y);
        }
        if f < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let dens = log_density(y, mu).exp();
        let mut next = if dens > 0.0 { y - f / dens } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == y || hi - lo <= 2.0 * f64::EPSILON * hi {
            return Ok(next);
        }
        y = next;
    }
    Ok(y)
}

/// Draws one variate.
///
/// With probability `1 - mu` the Lindley component is exponential with rate
/// `theta`, otherwise Erlang(2, theta); the result is mapped through
/// `x / (1 + x)`.
pub fn sample<R: Rng + ?Sized>(p: UnitLindleyParam, rng: &mut R) -> f64 {
    let theta = p.lindley_rate();
    loop {
        let u: f64 = rng.random();
        let mut e: f64 = Exp1.sample(rng);
        if u >= 1.0 - p.mu {
            let e2: f64 = Exp1.sample(rng);
            e += e2;
        }
        let x = e / theta;
        let y = x / (1.0 + x);
        if y > 0.0 && y < 1.0 {
            return y;
        }
    }
}

/// `E[Y / (1 - Y)] = (mu^2 + mu) / (1 - mu)`.
pub fn odds_mean(p: UnitLindleyParam) -> f64 {
    let mu = p.mu;
    (mu * mu + mu) / (1.0 - mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ul(mu: f64) -> UnitLindleyParam {
        UnitLindleyParam::new(mu).unwrap()
    }

    #[test]
    fn density_at_midpoint() {
        let expected = 4.0 * (-1.0f64).exp();
        assert_relative_eq!(pdf(0.5, ul(0.5)).unwrap(), expected, epsilon = 1e-14);
        assert_relative_eq!(log_pdf(0.5, ul(0.5)).unwrap(), 4.0f64.ln() - 1.0, epsilon = 1e-14);
    }

    #[test]
    fn parameter_validation() {
        assert!(UnitLindleyParam::new(0.0).is_err());
        assert!(UnitLindleyParam::new(1.0).is_err());
        assert!(UnitLindleyParam::new(1.0 - 1e-13).is_err());
        assert!(UnitLindleyParam::new(f64::NAN).is_err());
        assert!(pdf(1.0, ul(0.3)).is_err());
        assert!(pdf(0.0, ul(0.3)).is_err());
        assert!(cdf(-0.1, ul(0.3)).is_err());
        assert!(cdf(1.0, ul(0.3)).is_err());
        assert!(quantile(0.0, ul(0.3)).is_err());
        assert!(quantile(1.0, ul(0.3)).is_err());
    }

    #[test]
    fn cdf_endpoints() {
        for mu in [0.1, 0.5, 0.9] {
            assert_eq!(cdf(0.0, ul(mu)).unwrap(), 0.0);
            assert!(cdf(1.0 - 1e-9, ul(mu)).unwrap() > 0.999);
        }
    }

    #[test]
    fn cdf_and_sf_complement() {
        for mu in [0.05, 0.3, 0.5, 0.95] {
            for i in 1..50 {
                let y = i as f64 / 50.0;
                let total = cdf(y, ul(mu)).unwrap() + sf(y, ul(mu)).unwrap();
                assert!((total - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn quantile_round_trips() {
        for mu in [0.1, 0.4, 0.5, 0.9] {
            for u in [0.01, 0.5, 0.99] {
                let y = quantile(u, ul(mu)).unwrap();
                assert!((cdf(y, ul(mu)).unwrap() - u).abs() < 1e-10);
            }
        }
        let u = cdf(0.3, ul(0.4)).unwrap();
        assert!((quantile(u, ul(0.4)).unwrap() - 0.3).abs() < 1e-9);
    }

    #[test]
    fn quantile_lower_limit_is_monotone() {
        let mut prev = 1.0;
        for k in 1..12 {
            let q = quantile(10f64.powi(-k), ul(0.5)).unwrap();
            assert!(q > 0.0 && q < prev);
            prev = q;
        }
        assert!(prev < 1e-10);
    }

    #[test]
    fn odds_mean_values() {
        assert_relative_eq!(odds_mean(ul(0.5)), 1.5, epsilon = 1e-15);
        assert_relative_eq!(odds_mean(ul(0.2)), 0.3, epsilon = 1e-15);
        assert!(odds_mean(ul(1e-9)) < 2e-9);
    }

    #[test]
    fn samples_are_interior_and_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = ul(0.3);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| sample(p, &mut rng)).collect();
        assert!(draws.iter().all(|&y| y > 0.0 && y < 1.0));
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!((mean - 0.3).abs() < 3.0 * (var / n as f64).sqrt());
    }
}
