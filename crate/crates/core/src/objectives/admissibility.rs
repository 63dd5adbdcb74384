//! Which (model, gamma, kernel, parameter) combinations give a finite estimator.

use crate::error::{Error, Result};
use crate::kde::KernelKind;
use crate::models::{ModelSpec, WEIBULL_RATES};

/// Margin kept from the integrability border of the inner search in the Weibull
/// model for `gamma < 0`.
pub const WEIBULL_INNER_MARGIN: f64 = 0.05;

/// Shape and tail constant `c^k` of the slowest-decaying Weibull component.
fn slowest_tail(x: &[f64]) -> (f64, f64) {
    let a = (x[1], WEIBULL_RATES[0].powf(x[1]));
    let b = (x[2], WEIBULL_RATES[1].powf(x[2]));
    if a.0 < b.0 || (a.0 == b.0 && a.1 <= b.1) {
        a
    } else {
        b
    }
}

/// Whether `int p_phi^gamma p_alpha^(1 - gamma)` is finite for two Weibull mixtures.
pub fn weibull_power_integrable(gamma: f64, x_phi: &[f64], x_alpha: &[f64]) -> bool {
    if (0.0..=1.0).contains(&gamma) {
        return true;
    }
    let (m_phi, m_alpha) = (x_phi[1].min(x_phi[2]), x_alpha[1].min(x_alpha[2]));
    // near 0 the integrand behaves like x^(gamma m_phi + (1 - gamma) m_alpha - 1)
    if gamma * m_phi + (1.0 - gamma) * m_alpha <= 0.0 {
        return false;
    }
    let (s_phi, k_phi) = slowest_tail(x_phi);
    let (s_alpha, k_alpha) = slowest_tail(x_alpha);
    if gamma < 0.0 {
        s_alpha > s_phi || (s_alpha == s_phi && (1.0 - gamma) * k_alpha > -gamma * k_phi)
    } else {
        s_phi > s_alpha || (s_phi == s_alpha && gamma * k_phi > (gamma - 1.0) * k_alpha)
    }
}

/// Inner-search wall for `gamma < 0`: keeps `alpha` a fixed margin inside the
/// region where the integral near the origin converges. For `gamma = -1` this is
/// `min(alpha) >= min(phi) / 2 + 0.05`.
pub fn weibull_inner_wall(gamma: f64, x_phi: &[f64], x_alpha: &[f64]) -> bool {
    if gamma >= 0.0 {
        return true;
    }
    let (m_phi, m_alpha) = (x_phi[1].min(x_phi[2]), x_alpha[1].min(x_alpha[2]));
    gamma * m_phi + (1.0 - gamma) * m_alpha >= WEIBULL_INNER_MARGIN * (1.0 - gamma)
}

/// Classical dual estimator admissibility for the model as a whole.
pub fn classical_admissible(model: &ModelSpec, gamma: f64) -> Result<()> {
    if matches!(model, ModelSpec::WeibullMix2 { .. }) && gamma > 1.0 {
        return Err(Error::Inadmissible(format!(
            "classical dual estimator is infinite on the Weibull mixture for gamma = {gamma} > 1"
        )));
    }
    Ok(())
}

/// Kernel dual estimator admissibility at parameter `x` with bandwidth `w`.
pub fn kernel_admissible(model: &ModelSpec, gamma: f64, kernel: KernelKind, x: &[f64], w: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        return Ok(());
    }
    let reject = |why: String| Err(Error::Inadmissible(format!("{} kernel, gamma = {gamma}: {why}", kernel.name())));
    match model {
        ModelSpec::WeibullMix2 { .. } => {
            let (lo, hi) = (x[1].min(x[2]), x[1].max(x[2]));
            let bound = 1.0 - 1.0 / gamma;
            match (kernel, gamma > 1.0) {
                (KernelKind::Gaussian, true) if lo <= 2.0 => reject(format!("needs min shape > 2, got {lo}")),
                (KernelKind::Gaussian, false) if lo >= bound || hi >= 2.0 => reject(format!(
                    "needs min shape < {bound} and max shape < 2, got ({lo}, {hi})"
                )),
                (KernelKind::Epanechnikov, true) => reject("kernel vanishes at the support edges".into()),
                (KernelKind::Epanechnikov, false) if lo >= bound => {
                    reject(format!("needs min shape < {bound}, got {lo}"))
                }
                (KernelKind::Cauchy, true) if lo <= bound => {
                    reject(format!("needs min shape > {bound} for integrability at 0, got {lo}"))
                }
                (KernelKind::Cauchy, false) => reject("polynomial kernel tails against Weibull tails".into()),
                _ => Ok(()),
            }
        }
        ModelSpec::GaussMix2 { .. } => match (kernel, gamma > 1.0) {
            (KernelKind::Gaussian, true) if w * w <= (gamma - 1.0) / gamma => {
                reject(format!("bandwidth {w} too small for the model tails"))
            }
            (KernelKind::Gaussian, false) if w * w >= (1.0 - gamma) / -gamma => {
                reject(format!("bandwidth {w} too large for the model tails"))
            }
            (KernelKind::Epanechnikov, true) => reject("kernel vanishes at the support edges".into()),
            (KernelKind::Cauchy, false) => reject("polynomial kernel tails against Gaussian tails".into()),
            _ => Ok(()),
        },
        ModelSpec::CauchyScale { .. } => match (kernel, gamma > 1.0) {
            (KernelKind::Gaussian, true) => reject("Gaussian kernel tails against Cauchy tails".into()),
            (KernelKind::Epanechnikov, true) => reject("kernel vanishes at the support edges".into()),
            _ => Ok(()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weibull_integrability_cases() {
        let truth = [0.35, 0.5, 3.0];
        assert!(weibull_power_integrable(-1.0, &truth, &truth));
        // Neyman: alpha below phi/2 fails near zero, below phi fails at the tail
        assert!(!weibull_power_integrable(-1.0, &truth, &[0.35, 0.2, 3.0]));
        assert!(!weibull_power_integrable(-1.0, &truth, &[0.35, 0.3, 3.0]));
        // tails: for gamma < 0 the alpha tail has to decay faster than the phi tail
        assert!(weibull_power_integrable(-1.0, &truth, &[0.35, 0.6, 3.0]));
        assert!(!weibull_power_integrable(-1.0, &truth, &[0.35, 0.45, 3.0]));
        assert!(weibull_power_integrable(0.5, &truth, &[0.35, 0.01, 9.0]));
        // chi-square error between distinct shapes at the tail
        assert!(!weibull_power_integrable(2.0, &[0.35, 0.45, 3.0], &truth));
        assert!(weibull_power_integrable(2.0, &[0.35, 0.55, 3.0], &truth));
        assert!(weibull_power_integrable(2.0, &truth, &truth));
    }

    #[test]
    fn inner_wall_matches_neyman_margin() {
        let phi = [0.35, 0.5, 3.0];
        assert!(weibull_inner_wall(-1.0, &phi, &[0.4, 0.31, 3.0]));
        assert!(!weibull_inner_wall(-1.0, &phi, &[0.4, 0.29, 3.0]));
        assert!(weibull_inner_wall(0.5, &phi, &[0.4, 0.01, 3.0]));
    }
}
