//! The proximal term `D_psi(phi, phi') = (1/n) sum_i int psi(h_i(x|phi) / h_i(x|phi')) h_i(x|phi') dx`
//! between two parameters, computed on the label posteriors.

use crate::divkernels::ProximalSpec;
use crate::error::{Error, Result};
use crate::models::{ModelSpec, ParamPoint, Sample};
use crate::numerics::{Domain, Interval, NodeRule};

const CAUCHY_PANEL_ORDER: usize = 16;

/// `D_psi(., phi_prev)` with the posteriors at `phi_prev` cached.
#[derive(Debug, Clone)]
pub struct ProximalTerm {
    model: ModelSpec,
    psi: ProximalSpec,
    obs: Vec<f64>,
    prev: Vec<f64>,
    /// Mixtures: `ln h_i(1|phi_prev)` and `ln h_i(2|phi_prev)`.
    post: Vec<(f64, f64)>,
}

impl ProximalTerm {
    pub fn new(model: ModelSpec, x_prev: &[f64], obs: &[f64], psi: ProximalSpec) -> Result<Self> {
        model.check_free(x_prev)?;
        let mut post = Vec::new();
        if model.is_mixture() {
            for (i, &y) in obs.iter().enumerate() {
                let (l1, l2) = model.mixture_log_posteriors(x_prev, y);
                if !(l1.is_finite() && l2.is_finite()) {
                    return Err(Error::ZeroPosterior(i));
                }
                post.push((l1, l2));
            }
        } else if let Some(i) = obs.iter().position(|&y| y == 0.0) {
            // h_i(.|a) vanishes identically at y = 0
            return Err(Error::ZeroPosterior(i));
        }
        Ok(Self {
            model,
            psi,
            obs: obs.to_vec(),
            prev: x_prev.to_vec(),
            post,
        })
    }

    pub fn previous(&self) -> &[f64] {
        &self.prev
    }

    /// `D_psi(x, phi_prev)`; `+inf` where `psi` blows up.
    pub fn value(&self, x: &[f64]) -> f64 {
        let n = self.obs.len() as f64;
        let psi = &self.psi;
        if self.model.is_mixture() {
            let mut s = 0.0;
            for (&y, &(p1, p2)) in self.obs.iter().zip(&self.post) {
                let (l1, l2) = self.model.mixture_log_posteriors(x, y);
                s += weighted_psi(psi, l1, p1) + weighted_psi(psi, l2, p2);
            }
            s / n
        } else {
            let (a, b) = (x[0], self.prev[0]);
            let mut s = 0.0;
            for &y in &self.obs {
                let rule = cauchy_label_rule(a.max(b), y);
                s += rule.integrate(|t| {
                    let hp = ModelSpec::cauchy_posterior(b, y, t);
                    if hp == 0.0 {
                        return 0.0;
                    }
                    psi.psi(cauchy_ratio(a, b, y, t)) * hp
                });
            }
            s / n
        }
    }

    /// Gradient of [`value`](Self::value) in the free coordinates of `x`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.obs.len() as f64;
        let psi = &self.psi;
        if self.model.is_mixture() {
            let mut g = vec![0.0; 3];
            for (&y, &(p1, p2)) in self.obs.iter().zip(&self.post) {
                let (_, _, dh1) = self.model.mixture_posterior_grad(x, y);
                let (l1, l2) = self.model.mixture_log_posteriors(x, y);
                // grad h2 = -grad h1
                let c = psi.psi_prime((l1 - p1).exp()) - psi.psi_prime((l2 - p2).exp());
                for (gi, d) in g.iter_mut().zip(dh1) {
                    if d != 0.0 {
                        *gi += c * d / n;
                    }
                }
            }
            g
        } else {
            let (a, b) = (x[0], self.prev[0]);
            let mut s = 0.0;
            for &y in &self.obs {
                let rule = cauchy_label_rule(a.max(b), y);
                s += rule.integrate(|t| {
                    let h = ModelSpec::cauchy_posterior(a, y, t);
                    if h == 0.0 {
                        return 0.0;
                    }
                    h * ModelSpec::cauchy_posterior_score(a, y, t) * psi.psi_prime(cauchy_ratio(a, b, y, t))
                });
            }
            vec![s / n]
        }
    }
}

/// `h' psi(h / h')` from `ln h` and `ln h'`. Where `h'` underflows the term
/// tends to `h` times the slope of `psi` at infinity.
fn weighted_psi(psi: &ProximalSpec, ln_h: f64, ln_prev: f64) -> f64 {
    let (r, w) = ((ln_h - ln_prev).exp(), ln_prev.exp());
    if w > 0.0 && r.is_finite() {
        psi.psi(r) * w
    } else {
        ln_h.exp() * psi.recession_slope()
    }
}

/// `h(t|y; a) / h(t|y; b)` without forming the two posteriors.
fn cauchy_ratio(a: f64, b: f64, y: f64, t: f64) -> f64 {
    let (a2, b2, y2) = (a * a, b * b, y * y);
    let ey = t.exp() * y2;
    if !ey.is_finite() {
        return (a2 + y2) / (b2 + y2);
    }
    let q = (b2 + ey) / (a2 + ey);
    (a2 + y2) / (b2 + y2) * q * q
}

/// Composite rule over `[0, T]`, with `T` past which the posterior mass is
/// negligible for every scale up to `a_max`. Panels have unit width at most.
fn cauchy_label_rule(a_max: f64, y: f64) -> NodeRule {
    let cut = ModelSpec::cauchy_label_cutoff(a_max, y);
    let panels = cut.ceil().max(1.0) as usize;
    NodeRule::composite(&Domain::new(Interval::new(0.0, cut)), panels, CAUCHY_PANEL_ORDER)
        .expect("finite label interval")
}

/// `D_psi(phi, phi_prev)` on `sample`.
pub fn proximal_term(
    model: &ModelSpec,
    phi: &ParamPoint,
    phi_prev: &ParamPoint,
    sample: &Sample,
    psi: &ProximalSpec,
) -> Result<f64> {
    let x = model.check(phi)?;
    let xp = model.check(phi_prev)?;
    Ok(ProximalTerm::new(*model, &xp, &sample.observations, *psi)?.value(&x))
}

/// Gradient of `D_psi(., phi_prev)` at `phi`, in free coordinates.
pub fn proximal_term_gradient(
    model: &ModelSpec,
    phi: &ParamPoint,
    phi_prev: &ParamPoint,
    sample: &Sample,
    psi: &ProximalSpec,
) -> Result<Vec<f64>> {
    let x = model.check(phi)?;
    let xp = model.check(phi_prev)?;
    Ok(ProximalTerm::new(*model, &xp, &sample.observations, *psi)?.gradient(&x))
}
