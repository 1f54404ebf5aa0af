//! Outcome distribution families.
//!
//! Every family has a location parameter `mu` that lives on the linear
//! predictor scale. Scale-bearing families additionally take `sigma > 0`,
//! modelled through a log link. The negative binomial uses the mean /
//! dispersion parameterization with `theta = 1 / sigma²`, so its variance is
//! `lambda + lambda² / theta`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{
    digamma_diff, ln_factorial, ln_gamma_ratio, logistic, logit, normal_expectation, softplus,
    LN_SQRT_2PI,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Normal,
    LogNormal,
    LogitNormal,
    Logistic,
    Poisson,
    NegativeBinomial,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 6] = [
        FamilyKind::Normal,
        FamilyKind::LogNormal,
        FamilyKind::LogitNormal,
        FamilyKind::Logistic,
        FamilyKind::Poisson,
        FamilyKind::NegativeBinomial,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FamilyKind::Normal => "normal",
            FamilyKind::LogNormal => "log_normal",
            FamilyKind::LogitNormal => "logit_normal",
            FamilyKind::Logistic => "logistic",
            FamilyKind::Poisson => "poisson",
            FamilyKind::NegativeBinomial => "negative_binomial",
        }
    }

    pub fn has_scale(self) -> bool {
        !matches!(self, FamilyKind::Logistic | FamilyKind::Poisson)
    }

    pub fn is_count(self) -> bool {
        matches!(self, FamilyKind::Poisson | FamilyKind::NegativeBinomial)
    }

    pub fn in_support(self, y: f64) -> bool {
        if !y.is_finite() {
            return false;
        }
        match self {
            FamilyKind::Normal => true,
            FamilyKind::LogNormal => y > 0.0,
            FamilyKind::LogitNormal => y > 0.0 && y < 1.0,
            FamilyKind::Logistic => y == 0.0 || y == 1.0,
            FamilyKind::Poisson | FamilyKind::NegativeBinomial => y >= 0.0 && y.fract() == 0.0,
        }
    }

    /// Maps a response-scale location to the linear predictor scale.
    pub fn location_link(self, mu_response: f64) -> Result<f64> {
        let bad = || {
            Error::InvalidParameter(format!(
                "{mu_response} is outside the {self} location domain"
            ))
        };
        match self {
            FamilyKind::Normal => mu_response.is_finite().then_some(mu_response).ok_or_else(bad),
            FamilyKind::LogNormal | FamilyKind::Poisson | FamilyKind::NegativeBinomial => {
                (mu_response > 0.0 && mu_response.is_finite())
                    .then(|| mu_response.ln())
                    .ok_or_else(bad)
            }
            FamilyKind::LogitNormal | FamilyKind::Logistic => (mu_response > 0.0
                && mu_response < 1.0)
                .then(|| logit(mu_response))
                .ok_or_else(bad),
        }
    }

    pub fn location_inverse_link(self, eta: f64) -> f64 {
        match self {
            FamilyKind::Normal => eta,
            FamilyKind::LogNormal | FamilyKind::Poisson | FamilyKind::NegativeBinomial => eta.exp(),
            FamilyKind::LogitNormal | FamilyKind::Logistic => logistic(eta),
        }
    }

    /// Log density / mass of `y`.
    pub fn log_likelihood(self, y: f64, params: FamilyParams) -> Result<f64> {
        params.validate(self)?;
        let obs = Observation::new(self, y).ok_or_else(|| Error::UndefinedLikelihood {
            family: self.to_string(),
            rows: Vec::new(),
        })?;
        let log_sigma = params.sigma.map_or(0.0, f64::ln);
        Ok(self.log_lik_grad(&obs, params.mu, log_sigma).value)
    }

    /// One outcome draw on the data scale.
    pub fn sample_outcome<R: Rng + ?Sized>(self, params: FamilyParams, rng: &mut R) -> Result<f64> {
        params.validate(self)?;
        Ok(self.sample_unchecked(params.mu, params.sigma.unwrap_or(1.0), rng))
    }

    pub(crate) fn sample_unchecked<R: Rng + ?Sized>(self, mu: f64, sigma: f64, rng: &mut R) -> f64 {
        match self {
            FamilyKind::Normal => mu + sigma * rng.sample::<f64, _>(StandardNormal),
            FamilyKind::LogNormal => {
                let z = mu + sigma * rng.sample::<f64, _>(StandardNormal);
                z.exp().clamp(f64::MIN_POSITIVE, f64::MAX)
            }
            FamilyKind::LogitNormal => {
                let z = mu + sigma * rng.sample::<f64, _>(StandardNormal);
                // Keep draws strictly inside (0, 1) even when the logistic rounds.
                logistic(z).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
            }
            FamilyKind::Logistic => {
                if rng.random::<f64>() < logistic(mu) {
                    1.0
                } else {
                    0.0
                }
            }
            FamilyKind::Poisson => poisson_draw(mu.exp(), rng),
            FamilyKind::NegativeBinomial => {
                let lambda = mu.exp();
                let theta = 1.0 / (sigma * sigma);
                if !(lambda > 0.0) {
                    return 0.0;
                }
                let rate = match Gamma::new(theta, lambda / theta) {
                    Ok(g) => g.sample(rng),
                    Err(_) => lambda,
                };
                poisson_draw(rate, rng)
            }
        }
    }

    /// Response-scale mean at the given parameters.
    pub fn mean(self, params: FamilyParams) -> f64 {
        let sigma = params.sigma.unwrap_or(1.0);
        match self {
            FamilyKind::Normal => params.mu,
            FamilyKind::LogNormal => (params.mu + 0.5 * sigma * sigma).exp(),
            FamilyKind::LogitNormal => normal_expectation(params.mu, sigma, logistic),
            FamilyKind::Logistic => logistic(params.mu),
            FamilyKind::Poisson | FamilyKind::NegativeBinomial => params.mu.exp(),
        }
    }

    /// Log-likelihood and its derivatives with respect to the location
    /// linear predictor and ln(sigma).
    pub(crate) fn log_lik_grad(self, obs: &Observation, eta: f64, log_sigma: f64) -> LogLikGrad {
        let z = obs.z;
        match self {
            FamilyKind::Normal | FamilyKind::LogNormal | FamilyKind::LogitNormal => {
                let inv_var = (-2.0 * log_sigma).exp();
                let r = z - eta;
                let q = r * r * inv_var;
                LogLikGrad {
                    value: -LN_SQRT_2PI - log_sigma - 0.5 * q + obs.offset,
                    d_eta: r * inv_var,
                    d_log_sigma: q - 1.0,
                }
            }
            FamilyKind::Logistic => LogLikGrad {
                value: z * eta - softplus(eta),
                d_eta: z - logistic(eta),
                d_log_sigma: 0.0,
            },
            FamilyKind::Poisson => {
                let lambda = eta.exp();
                LogLikGrad {
                    value: z * eta - lambda + obs.offset,
                    d_eta: z - lambda,
                    d_log_sigma: 0.0,
                }
            }
            FamilyKind::NegativeBinomial => {
                let lambda = eta.exp();
                let theta = (-2.0 * log_sigma).exp();
                let denom = theta + lambda;
                // ln(theta / (theta + lambda)), accurate when lambda << theta.
                let ln_p = -(lambda / theta).ln_1p();
                let ln_q = eta - denom.ln();
                let value = ln_gamma_ratio(z, theta) + obs.offset + theta * ln_p + z * ln_q;
                let d_theta = digamma_diff(z, theta) + ln_p + (lambda - z) / denom;
                LogLikGrad {
                    value,
                    d_eta: theta * (z - lambda) / denom,
                    d_log_sigma: -2.0 * theta * d_theta,
                }
            }
        }
    }
}

fn poisson_draw<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    if !(lambda > 0.0) {
        return 0.0;
    }
    match Poisson::new(lambda.min(1e15)) {
        Ok(p) => p.sample(rng).max(0.0).round(),
        Err(_) => 0.0,
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        match key.as_str() {
            "normal" | "gaussian" => Ok(FamilyKind::Normal),
            "log_normal" | "lognormal" => Ok(FamilyKind::LogNormal),
            "logit_normal" | "logitnormal" => Ok(FamilyKind::LogitNormal),
            "logistic" | "bernoulli" => Ok(FamilyKind::Logistic),
            "poisson" => Ok(FamilyKind::Poisson),
            "negative_binomial" | "negbin" | "nb" => Ok(FamilyKind::NegativeBinomial),
            _ => Err(Error::Unsupported(format!("unknown family `{s}`"))),
        }
    }
}

/// Family parameters: `mu` on the linear predictor scale, `sigma` for
/// scale-bearing families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub mu: f64,
    pub sigma: Option<f64>,
}

impl FamilyParams {
    pub fn new(mu: f64, sigma: Option<f64>) -> Self {
        FamilyParams { mu, sigma }
    }

    pub fn location(mu: f64) -> Self {
        FamilyParams { mu, sigma: None }
    }

    pub fn with_scale(mu: f64, sigma: f64) -> Self {
        FamilyParams {
            mu,
            sigma: Some(sigma),
        }
    }

    fn validate(&self, kind: FamilyKind) -> Result<()> {
        if self.mu.is_nan() {
            return Err(Error::InvalidParameter("mu is NaN".into()));
        }
        match (kind.has_scale(), self.sigma) {
            (true, Some(s)) if s > 0.0 && s.is_finite() => Ok(()),
            (true, Some(s)) => Err(Error::InvalidParameter(format!("sigma must be > 0, got {s}"))),
            (true, None) => Err(Error::InvalidParameter(format!("{kind} requires sigma"))),
            (false, _) => Ok(()),
        }
    }
}

/// An outcome pre-mapped to the scale the location acts on, with the
/// constant part of its log-likelihood (Jacobian or factorial term).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Observation {
    pub z: f64,
    pub offset: f64,
}

impl Observation {
    /// `None` when `y` is outside the family's support.
    pub fn new(kind: FamilyKind, y: f64) -> Option<Observation> {
        if !kind.in_support(y) {
            return None;
        }
        Some(match kind {
            FamilyKind::Normal | FamilyKind::Logistic => Observation { z: y, offset: 0.0 },
            FamilyKind::LogNormal => Observation {
                z: y.ln(),
                offset: -y.ln(),
            },
            FamilyKind::LogitNormal => Observation {
                z: logit(y),
                offset: -(y.ln() + (-y).ln_1p()),
            },
            FamilyKind::Poisson | FamilyKind::NegativeBinomial => Observation {
                z: y,
                offset: -ln_factorial(y),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LogLikGrad {
    pub value: f64,
    pub d_eta: f64,
    pub d_log_sigma: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn links() {
        assert_eq!(FamilyKind::Logistic.location_inverse_link(0.0), 0.5);
        assert_eq!(FamilyKind::Poisson.location_inverse_link(0.0), 1.0);
        assert_eq!(FamilyKind::Normal.location_link(5.0).unwrap(), 5.0);
        assert_eq!(FamilyKind::Normal.location_inverse_link(5.0), 5.0);
        assert!(FamilyKind::Logistic.location_link(0.0).is_err());
        assert!(FamilyKind::Poisson.location_link(-1.0).is_err());
        for kind in FamilyKind::ALL {
            let x = if matches!(kind, FamilyKind::Logistic | FamilyKind::LogitNormal) {
                0.3
            } else {
                2.5
            };
            let eta = kind.location_link(x).unwrap();
            assert_relative_eq!(kind.location_inverse_link(eta), x, max_relative = 1e-14);
        }
    }

    #[test]
    fn point_values() {
        let ll = FamilyKind::Normal
            .log_likelihood(0.0, FamilyParams::with_scale(0.0, 1.0))
            .unwrap();
        assert_relative_eq!(ll, -0.918_938_533_204_672_7, max_relative = 1e-15);
        let ll = FamilyKind::Poisson.log_likelihood(0.0, FamilyParams::location(0.0)).unwrap();
        assert_relative_eq!(ll, -1.0, max_relative = 1e-15);
    }

    #[test]
    fn negative_binomial_direct_pmf() {
        // P(Y=3) with mean 2, theta 5: Γ(8)/(Γ(5) 3!) (5/7)^5 (2/7)^3
        let direct = (5040.0 / (24.0 * 6.0)) * (5.0f64 / 7.0).powi(5) * (2.0f64 / 7.0).powi(3);
        let sigma = (1.0f64 / 5.0).sqrt();
        let ll = FamilyKind::NegativeBinomial
            .log_likelihood(3.0, FamilyParams::with_scale(2f64.ln(), sigma))
            .unwrap();
        assert_relative_eq!(ll, direct.ln(), max_relative = 1e-13);
    }

    #[test]
    fn out_of_support_is_undefined() {
        let p = FamilyParams::with_scale(0.0, 1.0);
        assert!(matches!(
            FamilyKind::LogNormal.log_likelihood(0.0, p),
            Err(Error::UndefinedLikelihood { .. })
        ));
        assert!(FamilyKind::Poisson.log_likelihood(1.5, FamilyParams::location(0.0)).is_err());
        assert!(FamilyKind::Logistic.log_likelihood(2.0, FamilyParams::location(0.0)).is_err());
        assert!(FamilyKind::Normal
            .log_likelihood(0.0, FamilyParams::with_scale(0.0, 0.0))
            .is_err());
    }

    #[test]
    fn degenerate_samplers() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let y = FamilyKind::Logistic
                .sample_outcome(FamilyParams::location(-1e3), &mut rng)
                .unwrap();
            assert_eq!(y, 0.0);
            let y = FamilyKind::LogNormal
                .sample_outcome(FamilyParams::with_scale(0.0, 1e-12), &mut rng)
                .unwrap();
            assert_relative_eq!(y, 1.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn normal_sample_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| {
                FamilyKind::Normal
                    .sample_outcome(FamilyParams::with_scale(2.0, 1.0), &mut rng)
                    .unwrap()
            })
            .sum::<f64>()
            / n as f64;
        // 3 sigma / sqrt(n) is just under 0.01
        assert!((mean - 2.0).abs() < 3.0 / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn serde_names() {
        let s = serde_json::to_string(&FamilyKind::NegativeBinomial).unwrap();
        assert_eq!(s, "\"negative_binomial\"");
        assert_eq!("log-normal".parse::<FamilyKind>().unwrap(), FamilyKind::LogNormal);
        for k in FamilyKind::ALL {
            assert_eq!(k.as_str().parse::<FamilyKind>().unwrap(), k);
        }
    }

    #[test]
    fn log_normal_mean() {
        let m = FamilyKind::LogNormal.mean(FamilyParams::with_scale(0.5, 0.4));
        assert_relative_eq!(m, (0.5f64 + 0.08).exp(), max_relative = 1e-14);
    }
}
