//! Estimator values at the boundary of a mixture parameter space, where one
//! component has been sent to infinity (a Gaussian mean or a Weibull shape).

use crate::divkernels::{phi_prime_weighted, phi_sharp_log};
use crate::error::{Error, Result};
use crate::models::ModelSpec;

use super::{EstimatorSpec, Objective};

/// `ln f_j(t)` of the single component `j` (0 or 1) with mean or shape `theta`.
pub fn component_log_pdf(model: &ModelSpec, j: usize, theta: f64, t: f64) -> f64 {
    let x = if j == 0 { [1.0, theta, 1.0] } else { [0.0, 1.0, theta] };
    model.log_pdf(&x, t)
}

/// Where the Weibull component `j` concentrates as its shape grows: its scale.
pub fn weibull_spike(j: usize) -> f64 {
    1.0 / crate::models::WEIBULL_RATES[j]
}

impl Objective {
    /// Value of the estimator in the limit where the other component leaves to
    /// infinity, so that component `j` with weight `w` and parameter `theta` is
    /// the only one seen by the data. For the log-likelihood this is `-J / n`.
    ///
    /// A Gaussian component leaves by its mean and its mass moves away from the
    /// data; a Weibull component leaves by its shape and its mass piles up at its
    /// scale. `-inf` (for the likelihood) marks an observation sitting exactly on
    /// that spike.
    pub fn separated_limit(&self, j: usize, w: f64, theta: f64) -> Result<f64> {
        if !self.model.is_mixture() || j > 1 {
            return Err(Error::InvalidInput("separated limits need a two-component mixture".into()));
        }
        if !(w > 0.0 && w <= 1.0) || !theta.is_finite() {
            return Err(Error::InvalidInput(format!("invalid limit component w = {w}, theta = {theta}")));
        }
        let m = self.model;
        let weibull = matches!(m, ModelSpec::WeibullMix2 { .. });
        let spike = weibull_spike(1 - j);
        let lw = w.ln();
        let lp = |t: f64| lw + component_log_pdf(&m, j, theta, t);
        let n = self.n();
        match &self.estimator {
            EstimatorSpec::LogLikelihood => {
                if weibull && self.obs.iter().any(|&y| y == spike) {
                    return Ok(f64::NEG_INFINITY);
                }
                let j_sum: f64 = self.obs.iter().map(|&y| lp(y)).sum();
                Ok(-j_sum / n)
            }
            EstimatorSpec::Mdpd { a } => {
                if weibull && w < 1.0 {
                    // int p^(1+a) diverges on the spike
                    return Ok(f64::INFINITY);
                }
                let (int, _) = self.integrate(|t, _| ((1.0 + a) * lp(t)).exp())?;
                // the departed Gaussian component keeps its own power integral
                let far = (1.0 - w).powf(1.0 + a) * (2.0 * std::f64::consts::PI).powf(-0.5 * a) / (1.0 + a).sqrt();
                let s: f64 = self.obs.iter().map(|&y| (a * lp(y)).exp()).sum::<f64>() / n;
                Ok(int + far - (a + 1.0) / a * s)
            }
            EstimatorSpec::KernelDual { gamma, .. } => {
                let gamma = *gamma;
                let k = self.kernel.as_ref().expect("kernel state");
                let (int, _) = self.integrate(|t, lk| {
                    let l = lp(t);
                    if l == f64::NEG_INFINITY && lk == f64::NEG_INFINITY {
                        return 0.0;
                    }
                    phi_prime_weighted(gamma, l, lk)
                })?;
                // the departed mass sees p / K -> inf wherever it lands inside the
                // integration domain
                let inside = if weibull {
                    k.kde.support(m.support()).contains(spike)
                } else {
                    k.kde.support(m.support()).hi == f64::INFINITY
                };
                let far = if w == 1.0 || !inside {
                    0.0
                } else if gamma < 1.0 {
                    (1.0 - w) / (1.0 - gamma)
                } else {
                    f64::INFINITY
                };
                let s: f64 = self
                    .obs
                    .iter()
                    .zip(&k.ln_k_obs)
                    .map(|(&y, &lk)| phi_sharp_log(gamma, lp(y) - lk))
                    .sum();
                Ok(int + far - s / n)
            }
            EstimatorSpec::ClassicalDual { .. } => Err(Error::InvalidInput(
                "separated limits are not defined for the classical dual estimator".into(),
            )),
        }
    }
}
