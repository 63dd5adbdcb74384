//! Cressie-Read divergence generators and the proximal kernel psi.

use crate::error::{Error, Result};

/// Statistical criterion being minimized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DivergenceSpec {
    /// Cressie-Read generator `phi_gamma`; `gamma = 1` and `gamma = 0` are the log limits.
    CressieRead { gamma: f64 },
    /// Density power divergence with exponent `a > 0`.
    Dpd { a: f64 },
    Likelihood,
}

impl DivergenceSpec {
    pub const HELLINGER: DivergenceSpec = DivergenceSpec::CressieRead { gamma: 0.5 };
    pub const PEARSON: DivergenceSpec = DivergenceSpec::CressieRead { gamma: 2.0 };
    pub const NEYMAN: DivergenceSpec = DivergenceSpec::CressieRead { gamma: -1.0 };

    pub fn validate(&self) -> Result<()> {
        match *self {
            DivergenceSpec::CressieRead { gamma } if !gamma.is_finite() => {
                Err(Error::InvalidInput(format!("Cressie-Read gamma must be finite, got {gamma}")))
            }
            DivergenceSpec::Dpd { a } if !(a > 0.0 && a.is_finite()) => {
                Err(Error::InvalidInput(format!("DPD exponent must be positive, got {a}")))
            }
            _ => Ok(()),
        }
    }
}

/// `phi_gamma(t) = (t^g - g t + g - 1) / (g (g - 1))`.
pub fn cressie_read_phi(gamma: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("phi argument must be finite and >= 0, got {t}")));
    }
    if gamma == 1.0 {
        let tlogt = if t == 0.0 { 0.0 } else { t * t.ln() };
        return Ok(tlogt - t + 1.0);
    }
    if t == 0.0 && gamma <= 0.0 {
        return Err(Error::Domain(format!("phi_{gamma}(0) is +inf")));
    }
    if gamma == 0.0 {
        return Ok(-t.ln() + t - 1.0);
    }
    Ok((t.powf(gamma) - gamma * t + gamma - 1.0) / (gamma * (gamma - 1.0)))
}

pub fn cressie_read_phi_prime(gamma: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("phi' needs t > 0, got {t}")));
    }
    Ok(if gamma == 1.0 {
        t.ln()
    } else if gamma == 0.0 {
        1.0 - 1.0 / t
    } else {
        (t.powf(gamma - 1.0) - 1.0) / (gamma - 1.0)
    })
}

/// `phi#(t) = t phi'(t) - phi(t) = (t^g - 1) / g`.
pub fn cressie_read_phi_sharp(gamma: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("phi# needs t > 0, got {t}")));
    }
    Ok(if gamma == 1.0 {
        t - 1.0
    } else if gamma == 0.0 {
        t.ln()
    } else {
        (t.powf(gamma) - 1.0) / gamma
    })
}

/// `phi'(p/q) * p` from `ln p` and `ln q`, without forming the ratio.
///
/// `ln_p = -inf` is allowed: the result is the continuous extension, which is
/// `-inf` for `gamma < 0`.
pub fn phi_prime_weighted(gamma: f64, ln_p: f64, ln_q: f64) -> f64 {
    if ln_p == f64::NEG_INFINITY {
        return if gamma > 0.0 {
            0.0
        } else if gamma == 0.0 {
            -ln_q.exp()
        } else {
            f64::NEG_INFINITY
        };
    }
    let r = ln_p - ln_q;
    let p = ln_p.exp();
    if gamma == 1.0 {
        p * r
    } else {
        p * ((gamma - 1.0) * r).exp_m1() / (gamma - 1.0)
    }
}

/// `phi#(exp(r))` for a log-ratio `r`.
pub fn phi_sharp_log(gamma: f64, r: f64) -> f64 {
    if gamma == 0.0 {
        r
    } else if gamma == 1.0 {
        r.exp_m1()
    } else {
        (gamma * r).exp_m1() / gamma
    }
}

/// The proximal kernel `psi` and its derivative.
#[derive(Debug, Clone, Copy)]
pub enum ProximalSpec {
    /// `psi(t) = (sqrt(t) - 1)^2 / 2`.
    SqrtHalf,
    /// `psi(t) = -log t + t - 1`; with the log-likelihood this turns the one-step
    /// iteration into EM.
    ModifiedKl,
    Custom {
        psi: fn(f64) -> f64,
        psi_prime: fn(f64) -> f64,
    },
}

impl Default for ProximalSpec {
    fn default() -> Self {
        ProximalSpec::SqrtHalf
    }
}

impl PartialEq for ProximalSpec {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ProximalSpec::SqrtHalf, ProximalSpec::SqrtHalf) => true,
            (ProximalSpec::ModifiedKl, ProximalSpec::ModifiedKl) => true,
            (ProximalSpec::Custom { psi: a, psi_prime: b }, ProximalSpec::Custom { psi: c, psi_prime: d }) => {
                std::ptr::fn_addr_eq(*a, *c) && std::ptr::fn_addr_eq(*b, *d)
            }
            _ => false,
        }
    }
}

impl ProximalSpec {
    /// `psi(t)`; `+inf` where the kernel blows up.
    pub fn psi(&self, t: f64) -> f64 {
        match self {
            ProximalSpec::SqrtHalf => default_psi(t),
            ProximalSpec::ModifiedKl => {
                if t <= 0.0 {
                    f64::INFINITY
                } else {
                    -t.ln() + t - 1.0
                }
            }
            ProximalSpec::Custom { psi, .. } => psi(t),
        }
    }

    /// `psi'(t)`; `-inf` at `t = 0` for the built-in kernels.
    pub fn psi_prime(&self, t: f64) -> f64 {
        match self {
            ProximalSpec::SqrtHalf => default_psi_prime(t).unwrap_or(f64::NEG_INFINITY),
            ProximalSpec::ModifiedKl => {
                if t <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    1.0 - 1.0 / t
                }
            }
            ProximalSpec::Custom { psi_prime, .. } => psi_prime(t),
        }
    }

    /// `lim psi(t) / t` as `t -> inf`.
    pub fn recession_slope(&self) -> f64 {
        match self {
            ProximalSpec::SqrtHalf => 0.5,
            ProximalSpec::ModifiedKl => 1.0,
            ProximalSpec::Custom { psi, .. } => psi(1e12) / 1e12,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProximalSpec::SqrtHalf => "sqrt_half",
            ProximalSpec::ModifiedKl => "modified_kl",
            ProximalSpec::Custom { .. } => "custom",
        }
    }
}

pub fn default_psi(t: f64) -> f64 {
    0.5 * (t.max(0.0).sqrt() - 1.0).powi(2)
}

pub fn default_psi_prime(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("psi'(t) is -inf at t = {t}")));
    }
    Ok(0.5 * (1.0 - 1.0 / t.sqrt()))
}
