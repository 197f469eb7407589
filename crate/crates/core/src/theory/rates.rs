use crate::error::{Error, Result};

use super::KeyValueReport;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateParams {
    pub alpha: f64,
    pub sigma: f64,
    pub radius: f64,
    pub d1: usize,
    pub d2: usize,
    pub n: usize,
    /// Lower sampling-spread factor: every cell has probability at least `1 / (mu d1 d2)`.
    pub mu: f64,
    /// Upper factor: every cell has probability at most `L / (d1 d2)`.
    pub l: f64,
}

impl RateParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {x}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("sigma", self.sigma)?;
        positive("radius", self.radius)?;
        if self.radius < self.alpha {
            return Err(Error::invalid(format!(
                "radius {} is below alpha {}",
                self.radius, self.alpha
            )));
        }
        if self.d1 == 0 || self.d2 == 0 || self.n == 0 {
            return Err(Error::invalid("d1, d2 and n must be at least 1"));
        }
        if !(self.mu >= 1.0 && self.mu.is_finite()) || !(self.l >= 1.0 && self.l.is_finite()) {
            return Err(Error::invalid(format!(
                "mu and L must be at least 1, got {} and {}",
                self.mu, self.l
            )));
        }
        Ok(())
    }

    fn d(&self) -> f64 {
        (self.d1 + self.d2) as f64
    }
}

/// Rates for the normalized squared Frobenius error, without absolute constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateBounds {
    /// `mu max(alpha, sigma) R sqrt(d / n)`.
    pub upper_rate: f64,
    /// `min(alpha^2 / 16, sigma R / 256 sqrt(d / (n L)))`.
    pub lower_rate_general: f64,
    /// `min(alpha, sigma) R / 256 sqrt(d / (n L))`, valid once `sample_condition_ok`.
    pub lower_rate_large_n: f64,
    /// `48 alpha^2 / max(d1, d2) <= R^2 <= sigma^2 min(d1, d2) d1 d2 / (128 L n)`.
    pub quater_ok: bool,
    /// `n >= (R / alpha)^2 d / L`.
    pub sample_condition_ok: bool,
}

impl KeyValueReport for RateBounds {
    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("upper_rate", self.upper_rate.to_string()),
            ("lower_rate_general", self.lower_rate_general.to_string()),
            ("lower_rate_large_n", self.lower_rate_large_n.to_string()),
            ("quater_ok", self.quater_ok.to_string()),
            ("sample_condition_ok", self.sample_condition_ok.to_string()),
        ]
    }
}

pub fn rate_bounds(p: &RateParams) -> Result<RateBounds> {
    p.validate()?;
    let (d, n) = (p.d(), p.n as f64);
    let (d1, d2) = (p.d1 as f64, p.d2 as f64);
    let spread = (d / (n * p.l)).sqrt();
    let r2 = p.radius * p.radius;
    Ok(RateBounds {
        upper_rate: p.mu * p.alpha.max(p.sigma) * p.radius * (d / n).sqrt(),
        lower_rate_general: (p.alpha * p.alpha / 16.0).min(p.sigma * p.radius / 256.0 * spread),
        lower_rate_large_n: p.alpha.min(p.sigma) * p.radius / 256.0 * spread,
        quater_ok: 48.0 * p.alpha * p.alpha / d1.max(d2) <= r2
            && r2 <= p.sigma * p.sigma * d1.min(d2) * d1 * d2 / (128.0 * p.l * n),
        sample_condition_ok: n >= (p.radius / p.alpha).powi(2) * d / p.l,
    })
}
