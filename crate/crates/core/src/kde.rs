//! Kernel density estimates `K_{n,w}(y) = (1/(n w)) sum_i K((y - y_i)/w)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Sample;
use crate::numerics::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    Gaussian,
    Epanechnikov,
    Cauchy,
}

impl KernelKind {
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Epanechnikov => "epanechnikov",
            KernelKind::Cauchy => "cauchy",
        }
    }

    /// Kernel density `K(u)`.
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            KernelKind::Gaussian => (-0.5 * u * u).exp() / (2.0 * PI).sqrt(),
            KernelKind::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            KernelKind::Cauchy => 1.0 / (PI * (1.0 + u * u)),
        }
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(KernelKind::Gaussian),
            "epanechnikov" | "epa" => Ok(KernelKind::Epanechnikov),
            "cauchy" => Ok(KernelKind::Cauchy),
            other => Err(Error::Parse(format!("unknown kernel {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    Explicit(f64),
    Silverman,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub bandwidth: Bandwidth,
}

impl KernelSpec {
    pub fn silverman(kind: KernelKind) -> Self {
        Self {
            kind,
            bandwidth: Bandwidth::Silverman,
        }
    }

    pub fn resolve_bandwidth(&self, sample: &Sample) -> Result<f64> {
        match self.bandwidth {
            Bandwidth::Explicit(w) if w > 0.0 && w.is_finite() => Ok(w),
            Bandwidth::Explicit(w) => Err(Error::InvalidInput(format!("bandwidth must be positive, got {w}"))),
            Bandwidth::Silverman => silverman_bandwidth(sample),
        }
    }
}

/// Linear-interpolation quantile of sorted data (Hyndman-Fan type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `0.9 min(sd, IQR / 1.34) n^(-1/5)`; falls back to the sd alone when the IQR is zero.
pub fn silverman_bandwidth(sample: &Sample) -> Result<f64> {
    let y = &sample.observations;
    let n = y.len();
    if n < 2 {
        return Err(Error::DegenerateSample("bandwidth needs at least 2 observations".into()));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    if !(sd > 0.0) {
        return Err(Error::DegenerateSample("all observations are equal".into()));
    }
    let mut sorted = y.clone();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

/// A kernel estimate with its bandwidth resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    pub kind: KernelKind,
    pub bandwidth: f64,
    observations: Vec<f64>,
}

impl Kde {
    pub fn new(sample: &Sample, kernel: &KernelSpec) -> Result<Self> {
        let bandwidth = kernel.resolve_bandwidth(sample)?;
        let mut observations = sample.observations.clone();
        observations.sort_by(f64::total_cmp);
        Ok(Self {
            kind: kernel.kind,
            bandwidth,
            observations,
        })
    }

    pub fn eval(&self, y: f64) -> f64 {
        let w = self.bandwidth;
        let obs: &[f64] = if self.kind == KernelKind::Epanechnikov {
            let lo = self.observations.partition_point(|&v| v < y - w);
            let hi = self.observations.partition_point(|&v| v <= y + w);
            &self.observations[lo..hi]
        } else {
            &self.observations
        };
        let s: f64 = obs.iter().map(|&v| self.kind.eval((y - v) / w)).sum();
        s / (self.observations.len() as f64 * w)
    }

    /// Support of the estimate intersected with `model_support`.
    pub fn support(&self, model_support: Interval) -> Interval {
        match self.kind {
            KernelKind::Epanechnikov => {
                let lo = self.observations[0] - self.bandwidth;
                let hi = self.observations[self.observations.len() - 1] + self.bandwidth;
                Interval::new(lo, hi).intersect(&model_support)
            }
            _ => model_support,
        }
    }
}

pub fn kde_eval(sample: &Sample, kernel: &KernelSpec, y: f64) -> Result<f64> {
    Ok(Kde::new(sample, kernel)?.eval(y))
}

pub fn kde_support(sample: &Sample, kernel: &KernelSpec, model_support: Interval) -> Result<Interval> {
    Ok(Kde::new(sample, kernel)?.support(model_support))
}
