//! Link functions mapping the conditional mean on (0,1) to the real line.
//!
//! All three links are strictly increasing, so interval endpoints map to
//! interval endpoints without reordering.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, Error, Result};

/// Saturation bound applied by [`LinkChoice::inverse`].
pub const MU_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkChoice {
    /// `ln(mu / (1 - mu))`
    Logit,
    /// `-ln(-ln(mu))`
    Loglog,
    /// `ln(-ln(1 - mu))`
    Cloglog,
}

impl LinkChoice {
    pub const ALL: [LinkChoice; 3] = [LinkChoice::Logit, LinkChoice::Loglog, LinkChoice::Cloglog];

    /// Evaluates `g(mu)`. Returns NaN or an infinity outside (0,1); use
    /// [`LinkChoice::checked_apply`] for validated input.
    #[inline]
    pub fn apply(self, mu: f64) -> f64 {
        match self {
            LinkChoice::Logit => (mu / (1.0 - mu)).ln(),
            LinkChoice::Loglog => -(-mu.ln()).ln(),
            LinkChoice::Cloglog => (-(-mu).ln_1p()).ln(),
        }
    }

    pub fn checked_apply(self, mu: f64) -> Result<f64> {
        check_open_unit("mu", mu)?;
        Ok(self.apply(mu))
    }

    /// `g^{-1}(eta)`, saturated to `[MU_EPS, 1 - MU_EPS]`.
    #[inline]
    pub fn inverse(self, eta: f64) -> f64 {
        self.inverse_flagged(eta).0
    }

    /// Like [`LinkChoice::inverse`] but also reports whether the clamp was hit.
    #[inline]
    pub fn inverse_flagged(self, eta: f64) -> (f64, bool) {
        let raw = self.inverse_raw(eta);
        if raw < MU_EPS {
            (MU_EPS, true)
        } else if raw > 1.0 - MU_EPS {
            (1.0 - MU_EPS, true)
        } else {
            (raw, false)
        }
    }

    #[inline]
    fn inverse_raw(self, eta: f64) -> f64 {
        match self {
            LinkChoice::Logit => {
                if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let e = eta.exp();
                    e / (1.0 + e)
                }
            }
            LinkChoice::Loglog => (-(-eta).exp()).exp(),
            LinkChoice::Cloglog => -(-eta.exp()).exp_m1(),
        }
    }

    /// First derivative `g'(mu)`.
    #[inline]
    pub fn deriv(self, mu: f64) -> f64 {
        match self {
            LinkChoice::Logit => 1.0 / (mu * (1.0 - mu)),
            LinkChoice::Loglog => -1.0 / (mu * mu.ln()),
            LinkChoice::Cloglog => -1.0 / ((1.0 - mu) * (-mu).ln_1p()),
        }
    }

    pub fn checked_deriv(self, mu: f64) -> Result<f64> {
        check_open_unit("mu", mu)?;
        Ok(self.deriv(mu))
    }

    pub fn name(self) -> &'static str {
        match self {
            LinkChoice::Logit => "logit",
            LinkChoice::Loglog => "loglog",
            LinkChoice::Cloglog => "cloglog",
        }
    }
}

impl fmt::Display for LinkChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LinkChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logit" => Ok(LinkChoice::Logit),
            "loglog" | "log-log" => Ok(LinkChoice::Loglog),
            "cloglog" | "clog-log" => Ok(LinkChoice::Cloglog),
            other => Err(Error::InvalidArgument(format!("unknown link '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    #[test]
    fn zero_points() {
        assert_eq!(LinkChoice::Logit.apply(0.5), 0.0);
        assert!(LinkChoice::Cloglog.apply(1.0 - (-1.0f64).exp()).abs() < 1e-15);
        assert!(LinkChoice::Loglog.apply((-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(LinkChoice::Logit.inverse(0.0), 0.5);
    }

    #[test]
    fn round_trip_all_links() {
        for link in LinkChoice::ALL {
            assert_relative_eq!(link.inverse(link.apply(0.3)), 0.3, epsilon = 1e-12);
            for i in 1..100 {
                let mu = i as f64 / 100.0;
                assert_relative_eq!(link.inverse(link.apply(mu)), mu, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn saturation() {
        assert_eq!(LinkChoice::Logit.inverse(50.0), 1.0 - MU_EPS);
        assert_eq!(LinkChoice::Logit.inverse(-50.0), MU_EPS);
        let (_, hit) = LinkChoice::Cloglog.inverse_flagged(40.0);
        assert!(hit);
        let (_, hit) = LinkChoice::Loglog.inverse_flagged(0.3);
        assert!(!hit);
    }

    #[test]
    fn derivative_values() {
        assert_eq!(LinkChoice::Logit.deriv(0.5), 4.0);
        assert_relative_eq!(LinkChoice::Cloglog.deriv(1.0 - (-1.0f64).exp()), E, epsilon = 1e-12);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for link in LinkChoice::ALL {
            for i in 1..100 {
                let mu = i as f64 / 100.0;
                let h = 1e-6 * mu.min(1.0 - mu);
                let fd = (link.apply(mu + h) - link.apply(mu - h)) / (2.0 * h);
                let d = link.deriv(mu);
                assert!(d > 0.0, "{link} not increasing at {mu}");
                assert!(((fd - d) / d).abs() < 1e-6, "{link} at {mu}: {fd} vs {d}");
            }
        }
    }

    #[test]
    fn boundaries_are_rejected() {
        for link in LinkChoice::ALL {
            assert!(link.checked_apply(0.0).is_err());
            assert!(link.checked_apply(1.0).is_err());
            assert!(link.checked_deriv(1.0).is_err());
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("logit".parse::<LinkChoice>().unwrap(), LinkChoice::Logit);
        assert_eq!("loglog".parse::<LinkChoice>().unwrap(), LinkChoice::Loglog);
        assert_eq!("cloglog".parse::<LinkChoice>().unwrap(), LinkChoice::Cloglog);
        assert!("probit".parse::<LinkChoice>().is_err());
    }
}
