//! The three incomplete-data models: a two-component Gaussian mixture with unit
//! variances, a two-component Weibull mixture with fixed scales 1/2 and 2, and a
//! centered Cauchy scale model whose latent label lives on `[0, inf)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Cauchy, Distribution, Normal, Weibull};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Domain, Interval};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Rate factors `c_j` of the Weibull components: component `j` has scale `1/c_j`.
pub const WEIBULL_RATES: [f64; 2] = [2.0, 0.5];

/// Model parameter split into mixture weights and component parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    pub weights: Vec<f64>,
    pub component_params: Vec<f64>,
}

impl ParamPoint {
    /// Two-component mixture point `(lambda, theta1, theta2)`.
    pub fn mixture(lambda: f64, theta1: f64, theta2: f64) -> Self {
        Self {
            weights: vec![lambda, 1.0 - lambda],
            component_params: vec![theta1, theta2],
        }
    }

    pub fn scale(a: f64) -> Self {
        Self {
            weights: Vec::new(),
            component_params: vec![a],
        }
    }

    /// Free optimizer coordinates: the first `s - 1` weights followed by the
    /// component parameters.
    pub fn free(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.weights.iter().take(self.weights.len().saturating_sub(1)).copied().collect();
        v.extend_from_slice(&self.component_params);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Clean,
    Contaminated(String),
    External(String),
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Clean => write!(f, "clean"),
            Provenance::Contaminated(s) => write!(f, "contaminated({s})"),
            Provenance::External(s) => write!(f, "external({s})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub observations: Vec<f64>,
    pub provenance: Provenance,
    pub seed: u64,
}

impl Sample {
    pub fn new(observations: Vec<f64>, provenance: Provenance, seed: u64) -> Result<Self> {
        let s = Self {
            observations,
            provenance,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.observations.len() < 2 {
            return Err(Error::DegenerateSample(format!(
                "need at least 2 observations, got {}",
                self.observations.len()
            )));
        }
        if let Some(y) = self.observations.iter().find(|y| !y.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite observation {y}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.observations.iter().sum::<f64>() / self.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.observations.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.observations.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Single-column CSV with a comment header carrying seed and provenance.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# seed={} provenance={}", self.seed, self.provenance)?;
        writeln!(w, "y")?;
        for y in &self.observations {
            writeln!(w, "{y:?}")?;
        }
        Ok(())
    }

    /// Reads the format written by [`Sample::write_csv`]; the header comment is optional.
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .has_headers(true)
            .from_reader(r);
        let mut obs = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let field = rec
                .get(0)
                .ok_or_else(|| Error::Parse("empty CSV record".into()))?;
            obs.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{field:?}: {e}")))?,
            );
        }
        Self::new(obs, Provenance::External("csv".into()), 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    GaussMix2 { eta: f64 },
    WeibullMix2 { eta: f64, shape_min: f64 },
    CauchyScale { eps: f64 },
}

impl ModelSpec {
    pub fn gauss_mix2() -> Self {
        ModelSpec::GaussMix2 { eta: 0.1 }
    }

    pub fn weibull_mix2() -> Self {
        ModelSpec::WeibullMix2 {
            eta: 0.1,
            shape_min: 0.01,
        }
    }

    pub fn cauchy_scale() -> Self {
        ModelSpec::CauchyScale { eps: 1e-3 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::GaussMix2 { .. } => "gauss_mix2",
            ModelSpec::WeibullMix2 { .. } => "weibull_mix2",
            ModelSpec::CauchyScale { .. } => "cauchy_scale",
        }
    }

    pub fn is_mixture(&self) -> bool {
        !matches!(self, ModelSpec::CauchyScale { .. })
    }

    /// Number of free coordinates.
    pub fn dim(&self) -> usize {
        if self.is_mixture() {
            3
        } else {
            1
        }
    }

    pub fn eta(&self) -> Option<f64> {
        match *self {
            ModelSpec::GaussMix2 { eta } | ModelSpec::WeibullMix2 { eta, .. } => Some(eta),
            ModelSpec::CauchyScale { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ModelSpec::GaussMix2 { eta } => eta > 0.0 && eta < 0.5,
            ModelSpec::WeibullMix2 { eta, shape_min } => eta > 0.0 && eta < 0.5 && shape_min > 0.0,
            ModelSpec::CauchyScale { eps } => eps > 0.0 && eps.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid model settings {self:?}")))
        }
    }

    /// Lower and upper bounds of each free coordinate of the feasible set.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        match *self {
            ModelSpec::GaussMix2 { eta } => vec![
                (eta, 1.0 - eta),
                (f64::NEG_INFINITY, f64::INFINITY),
                (f64::NEG_INFINITY, f64::INFINITY),
            ],
            ModelSpec::WeibullMix2 { eta, shape_min } => {
                vec![(eta, 1.0 - eta), (shape_min, f64::INFINITY), (shape_min, f64::INFINITY)]
            }
            ModelSpec::CauchyScale { eps } => vec![(eps, f64::INFINITY)],
        }
    }

    pub fn point_from_free(&self, free: &[f64]) -> Result<ParamPoint> {
        if free.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "{} expects {} coordinates, got {}",
                self.name(),
                self.dim(),
                free.len()
            )));
        }
        Ok(if self.is_mixture() {
            ParamPoint::mixture(free[0], free[1], free[2])
        } else {
            ParamPoint::scale(free[0])
        })
    }

    /// Validates `p` and returns its free coordinates.
    pub fn check(&self, p: &ParamPoint) -> Result<Vec<f64>> {
        let (ns, nc) = if self.is_mixture() { (2, 2) } else { (0, 1) };
        if p.weights.len() != ns || p.component_params.len() != nc {
            return Err(Error::InfeasibleParams(format!("wrong shape for {}: {p:?}", self.name())));
        }
        if self.is_mixture() {
            let s: f64 = p.weights.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InfeasibleParams(format!("weights sum to {s}")));
            }
        }
        let free = p.free();
        self.check_free(&free)?;
        Ok(free)
    }

    pub fn check_free(&self, free: &[f64]) -> Result<()> {
        if free.len() != self.dim() {
            return Err(Error::InfeasibleParams(format!("expected {} coordinates", self.dim())));
        }
        for (i, (&x, (lo, hi))) in free.iter().zip(self.bounds()).enumerate() {
            if !x.is_finite() || x < lo || x > hi {
                return Err(Error::InfeasibleParams(format!(
                    "coordinate {i} = {x} outside [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Clamps weights into `[eta, 1 - eta]` (then renormalizes) and shapes or
    /// scales to their lower bounds. Non-finite coordinates are clamped too.
    pub fn feasible_project(&self, raw: &[f64]) -> Result<ParamPoint> {
        Ok(self.point_from_free(&self.project_free(raw)?)?)
    }

    pub fn project_free(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "{} expects {} coordinates, got {}",
                self.name(),
                self.dim(),
                raw.len()
            )));
        }
        Ok(raw
            .iter()
            .zip(self.bounds())
            .map(|(&x, (lo, hi))| {
                let x = if x.is_nan() { lo.max(0.0) } else { x };
                x.clamp(lo, hi)
                    .clamp(-f64::MAX, f64::MAX)
            })
            .collect())
    }

    /// Sorts Gaussian components by mean (label swap leaves the density unchanged).
    /// Other models are returned as is: the Weibull components have distinct scales.
    pub fn canonicalize(&self, p: &ParamPoint) -> ParamPoint {
        match self {
            ModelSpec::GaussMix2 { .. } if p.component_params[0] > p.component_params[1] => ParamPoint {
                weights: vec![p.weights[1], p.weights[0]],
                component_params: vec![p.component_params[1], p.component_params[0]],
            },
            _ => p.clone(),
        }
    }

    /// Support of the observation density.
    pub fn support(&self) -> Interval {
        match self {
            ModelSpec::WeibullMix2 { .. } => Interval::positive_half_line(),
            _ => Interval::real_line(),
        }
    }

    /// Integration domain for integrands built from `p_x` (free coordinates).
    pub fn domain(&self, x: &[f64]) -> Domain {
        match self {
            ModelSpec::GaussMix2 { .. } => {
                let c = x[0] * x[1] + (1.0 - x[0]) * x[2];
                let spread = (x[1] - x[2]).abs();
                Domain::new(Interval::real_line()).with_hint(c, 2.0 + 0.5 * spread)
            }
            ModelSpec::WeibullMix2 { .. } => {
                let k = x[1].min(x[2]).max(0.05);
                Domain::log_positive(Interval::positive_half_line()).with_hint(0.0, 1.5 / k)
            }
            ModelSpec::CauchyScale { .. } => Domain::new(Interval::real_line()).with_hint(0.0, x[0]),
        }
    }

    /// `ln p_x(y)` on free coordinates without feasibility checks.
    #[inline]
    pub fn log_pdf(&self, x: &[f64], y: f64) -> f64 {
        match self {
            ModelSpec::GaussMix2 { .. } => {
                let a = x[0].ln() - 0.5 * (y - x[1]).powi(2);
                let b = (1.0 - x[0]).ln() - 0.5 * (y - x[2]).powi(2);
                log_add_exp(a, b) - LN_SQRT_2PI
            }
            ModelSpec::WeibullMix2 { .. } => {
                if y <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let a = x[0].ln() + weibull_log_component(x[1], WEIBULL_RATES[0], y);
                let b = (1.0 - x[0]).ln() + weibull_log_component(x[2], WEIBULL_RATES[1], y);
                log_add_exp(a, b)
            }
            ModelSpec::CauchyScale { .. } => {
                let a = x[0];
                a.ln() - PI.ln() - (a * a + y * y).ln()
            }
        }
    }

    #[inline]
    pub fn pdf(&self, x: &[f64], y: f64) -> f64 {
        self.log_pdf(x, y).exp()
    }

    pub fn density(&self, p: &ParamPoint, y: f64) -> Result<f64> {
        let x = self.check(p)?;
        Ok(self.pdf(&x, y))
    }

    pub fn log_density(&self, p: &ParamPoint, y: f64) -> Result<f64> {
        let x = self.check(p)?;
        Ok(self.log_pdf(&x, y))
    }

    /// Gradient of `ln p_x(y)` in the free coordinates.
    pub fn grad_log_pdf(&self, x: &[f64], y: f64) -> Vec<f64> {
        match self {
            ModelSpec::CauchyScale { .. } => {
                let a = x[0];
                vec![1.0 / a - 2.0 * a / (a * a + y * y)]
            }
            _ => {
                let lam = x[0];
                let (h1, h2) = self.mixture_posteriors(x, y);
                let (d1, d2) = self.component_score(x, y);
                vec![h1 / lam - h2 / (1.0 - lam), h1 * d1, h2 * d2]
            }
        }
    }

    /// Derivatives of `ln f_1(y)` and `ln f_2(y)` in their own shape or mean.
    fn component_score(&self, x: &[f64], y: f64) -> (f64, f64) {
        match self {
            ModelSpec::GaussMix2 { .. } => (y - x[1], y - x[2]),
            ModelSpec::WeibullMix2 { .. } => (
                weibull_shape_score(x[1], WEIBULL_RATES[0], y),
                weibull_shape_score(x[2], WEIBULL_RATES[1], y),
            ),
            ModelSpec::CauchyScale { .. } => unreachable!("not a mixture"),
        }
    }

    /// Log-odds `z = ln(lambda f_1(y)) - ln((1 - lambda) f_2(y))`.
    fn log_odds(&self, x: &[f64], y: f64) -> f64 {
        let lam = x[0];
        let base = lam.ln() - (1.0 - lam).ln();
        match self {
            ModelSpec::GaussMix2 { .. } => base - 0.5 * (y - x[1]).powi(2) + 0.5 * (y - x[2]).powi(2),
            ModelSpec::WeibullMix2 { .. } => {
                base + weibull_log_component(x[1], WEIBULL_RATES[0], y)
                    - weibull_log_component(x[2], WEIBULL_RATES[1], y)
            }
            ModelSpec::CauchyScale { .. } => unreachable!("not a mixture"),
        }
    }

    /// Label posteriors `(h(1|y), h(2|y))` of a mixture; they sum to one.
    #[inline]
    pub fn mixture_posteriors(&self, x: &[f64], y: f64) -> (f64, f64) {
        let z = self.log_odds(x, y);
        let h1 = sigmoid(z);
        let h2 = sigmoid(-z);
        (h1, h2)
    }

    /// `(ln h(1|y), ln h(2|y))`, accurate where a posterior underflows.
    pub fn mixture_log_posteriors(&self, x: &[f64], y: f64) -> (f64, f64) {
        let z = self.log_odds(x, y);
        (-softplus(-z), -softplus(z))
    }

    /// `h(1|y)` together with its gradient in the free coordinates. The gradient of
    /// `h(2|y)` is the negation.
    pub fn mixture_posterior_grad(&self, x: &[f64], y: f64) -> (f64, f64, [f64; 3]) {
        let (h1, h2) = self.mixture_posteriors(x, y);
        let lam = x[0];
        let (d1, d2) = self.component_score(x, y);
        let s = h1 * h2;
        (h1, h2, [s / (lam * (1.0 - lam)), s * d1, -s * d2])
    }

    /// Cauchy label posterior `h(t|y; a)` for `t >= 0`.
    #[inline]
    pub fn cauchy_posterior(a: f64, y: f64, t: f64) -> f64 {
        let y2 = y * y;
        let a2 = a * a;
        if y2 == 0.0 {
            return 0.0;
        }
        let et = t.exp();
        if !et.is_finite() {
            return 0.0;
        }
        let d = a2 + et * y2;
        y2 * et * (a2 + y2) / (d * d)
    }

    /// `d/da ln h(t|y; a)`.
    #[inline]
    pub fn cauchy_posterior_score(a: f64, y: f64, t: f64) -> f64 {
        let y2 = y * y;
        let a2 = a * a;
        2.0 * a / (a2 + y2) - 4.0 * a / (a2 + t.exp() * y2)
    }

    /// Point beyond which `h(t|y; a) < 1e-13 * ...`; the tail mass past it is
    /// below `exp(-30)` for every scale up to `a_max`.
    pub fn cauchy_label_cutoff(a_max: f64, y: f64) -> f64 {
        let y2 = (y * y).max(1e-300);
        ((a_max * a_max + y2) / y2).ln() + 30.0
    }

    /// `h_i(label | phi)`. Mixture labels are 1 and 2; Cauchy labels are `t >= 0`.
    pub fn label_posterior(&self, p: &ParamPoint, y: f64, label: f64) -> Result<f64> {
        let x = self.check(p)?;
        if self.pdf(&x, y) <= 0.0 {
            return Err(Error::ZeroDensity(y));
        }
        match self {
            ModelSpec::CauchyScale { .. } => {
                if !(label >= 0.0) {
                    return Err(Error::Domain(format!("Cauchy label must be >= 0, got {label}")));
                }
                Ok(Self::cauchy_posterior(x[0], y, label))
            }
            _ => {
                let (h1, h2) = self.mixture_posteriors(&x, y);
                if label == 1.0 {
                    Ok(h1)
                } else if label == 2.0 {
                    Ok(h2)
                } else {
                    Err(Error::Domain(format!("mixture labels are 1 and 2, got {label}")))
                }
            }
        }
    }

    /// Draws `n` i.i.d. observations.
    pub fn sample<R: Rng + ?Sized>(&self, p: &ParamPoint, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        let x = self.check(p)?;
        let mut out = Vec::with_capacity(n);
        match self {
            ModelSpec::GaussMix2 { .. } => {
                let c1 = Normal::new(x[1], 1.0).map_err(|e| Error::Domain(e.to_string()))?;
                let c2 = Normal::new(x[2], 1.0).map_err(|e| Error::Domain(e.to_string()))?;
                for _ in 0..n {
                    out.push(if rng.gen::<f64>() < x[0] { c1.sample(rng) } else { c2.sample(rng) });
                }
            }
            ModelSpec::WeibullMix2 { .. } => {
                let c1 = Weibull::new(1.0 / WEIBULL_RATES[0], x[1]).map_err(|e| Error::Domain(e.to_string()))?;
                let c2 = Weibull::new(1.0 / WEIBULL_RATES[1], x[2]).map_err(|e| Error::Domain(e.to_string()))?;
                for _ in 0..n {
                    out.push(if rng.gen::<f64>() < x[0] { c1.sample(rng) } else { c2.sample(rng) });
                }
            }
            ModelSpec::CauchyScale { .. } => {
                let c = Cauchy::new(0.0, x[0]).map_err(|e| Error::Domain(e.to_string()))?;
                out.extend((0..n).map(|_| c.sample(rng)));
            }
        }
        Ok(out)
    }

    /// Draws a [`Sample`] from a seeded ChaCha stream.
    pub fn sample_seeded(&self, p: &ParamPoint, n: usize, seed: u64) -> Result<Sample> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let obs = self.sample(p, n, &mut rng)?;
        Sample::new(obs, Provenance::Clean, seed)
    }
}

/// `ln(k c (c y)^(k-1) exp(-(c y)^k))`.
#[inline]
pub fn weibull_log_component(k: f64, c: f64, y: f64) -> f64 {
    let cy = c * y;
    let l = cy.ln();
    k.ln() + c.ln() + (k - 1.0) * l - (k * l).exp()
}

#[inline]
fn weibull_shape_score(k: f64, c: f64, y: f64) -> f64 {
    let l = (c * y).ln();
    1.0 / k + l - (k * l).exp() * l
}

#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[inline]
/// `ln(1 + e^u)`.
fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Solves the Gaussian degeneracy system for the weight: given `(lambda, mu1, mu2)`
/// and a shift `delta`, returns `lambda'` such that `(lambda', mu1 + delta,
/// mu2 + delta)` yields the same label posteriors at every observation.
pub fn gauss_degenerate_partner(lambda: f64, mu1: f64, mu2: f64, delta: f64) -> f64 {
    let (m1, m2) = (mu1 + delta, mu2 + delta);
    // log((1 - l') / l') + (m1^2 - m2^2) / 2 = log((1 - l) / l) + (mu1^2 - mu2^2) / 2
    let rhs = ((1.0 - lambda) / lambda).ln() + 0.5 * (mu1 * mu1 - mu2 * mu2) - 0.5 * (m1 * m1 - m2 * m2);
    1.0 / (1.0 + rhs.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate, integrate_domain, QuadratureOptions};
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Weibull as SWeibull};

    fn gm() -> ModelSpec {
        ModelSpec::gauss_mix2()
    }
    fn wm() -> ModelSpec {
        ModelSpec::weibull_mix2()
    }
    fn cm() -> ModelSpec {
        ModelSpec::cauchy_scale()
    }

    #[test]
    fn density_examples() {
        let p = ParamPoint::mixture(0.9, 0.0, 0.0);
        let v = gm().density(&p, 0.0).unwrap();
        assert!((v - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert!((cm().density(&ParamPoint::scale(1.0), 0.0).unwrap() - 1.0 / PI).abs() < 1e-15);
        let x = [0.35, 0.5, 3.0];
        assert_eq!(wm().pdf(&x, -1.0), 0.0);
        let r = integrate_domain(|y| wm().pdf(&x, y), &wm().domain(&x), &QuadratureOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn weibull_density_matches_closed_form() {
        let (l, k1, k2, y) = (0.35, 0.5, 3.0, 0.7);
        let f1 = 2.0 * k1 * (2.0 * y as f64).powf(k1 - 1.0) * (-(2.0 * y as f64).powf(k1)).exp();
        let f2 = (k2 / 2.0) * (y / 2.0 as f64).powf(k2 - 1.0) * (-(y / 2.0 as f64).powf(k2)).exp();
        let direct = l * f1 + (1.0 - l) * f2;
        assert!((wm().pdf(&[l, k1, k2], y) - direct).abs() < 1e-14);
    }

    #[test]
    fn infeasible_params_rejected() {
        assert!(matches!(
            gm().density(&ParamPoint::mixture(0.05, 0.0, 1.0), 0.0),
            Err(Error::InfeasibleParams(_))
        ));
        assert!(wm().density(&ParamPoint::mixture(0.5, 0.001, 1.0), 1.0).is_err());
        assert!(cm().density(&ParamPoint::scale(0.0), 1.0).is_err());
        let bad_sum = ParamPoint {
            weights: vec![0.5, 0.6],
            component_params: vec![0.0, 1.0],
        };
        assert!(gm().density(&bad_sum, 0.0).is_err());
    }

    #[test]
    fn posterior_examples() {
        let p = ParamPoint::mixture(0.3, 1.2, 1.2);
        for y in [-3.0, 0.0, 4.0] {
            assert!((gm().label_posterior(&p, y, 1.0).unwrap() - 0.3).abs() < 1e-15);
        }
        let (a, y) = (1.3, 0.534);
        let h0 = cm().label_posterior(&ParamPoint::scale(a), y, 0.0).unwrap();
        assert!((h0 - y * y / (a * a + y * y)).abs() < 1e-15);
        let r = integrate(
            |t| ModelSpec::cauchy_posterior(1.0, 0.534, t),
            Interval::positive_half_line(),
            &QuadratureOptions::default(),
        )
        .unwrap();
        assert!((r.value - 1.0).abs() < 1e-6);
        assert!(gm().label_posterior(&p, 0.0, 3.0).is_err());
    }

    #[test]
    fn cauchy_cutoff_captures_mass() {
        for &y in &[0.0119, 0.534, -18.197] {
            for &a in &[0.01, 1.0, 20.0] {
                let cut = ModelSpec::cauchy_label_cutoff(a, y);
                let r = integrate(
                    |t| ModelSpec::cauchy_posterior(a, y, t),
                    Interval::new(0.0, cut),
                    &QuadratureOptions::default(),
                )
                .unwrap();
                assert!((r.value - 1.0).abs() < 1e-9, "a {a} y {y}: {}", r.value);
            }
        }
    }

    #[test]
    fn project_examples() {
        let p = gm().feasible_project(&[0.05, 0.0, 1.0]).unwrap();
        assert_eq!(p.weights[0], 0.1);
        assert_eq!(gm().feasible_project(&[0.4, 0.0, 1.0]).unwrap(), ParamPoint::mixture(0.4, 0.0, 1.0));
        let p = wm().feasible_project(&[0.4, -1.0, 2.0]).unwrap();
        assert_eq!(p.component_params[0], 0.01);
    }

    #[test]
    fn sampling_is_deterministic_and_centered() {
        let truth = ParamPoint::mixture(0.35, 2.0, 1.5);
        let a = gm().sample_seeded(&truth, 50, 7).unwrap();
        let b = gm().sample_seeded(&truth, 50, 7).unwrap();
        assert_eq!(a, b);
        let big = gm().sample_seeded(&truth, 100_000, 11).unwrap();
        let mean = big.mean();
        let var_mix = 1.0 + 0.35 * 0.65 * 0.25;
        let se = (var_mix / 1e5f64).sqrt();
        assert!((mean - 1.675).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn weibull_sampler_matches_cdf() {
        let x = [0.35, 0.5, 3.0];
        let s = wm().sample_seeded(&ParamPoint::mixture(0.35, 0.5, 3.0), 100_000, 3).unwrap();
        let mut ys = s.observations.clone();
        ys.sort_by(f64::total_cmp);
        let c1 = SWeibull::new(x[1], 0.5).unwrap();
        let c2 = SWeibull::new(x[2], 2.0).unwrap();
        let n = ys.len() as f64;
        let mut ks: f64 = 0.0;
        for (i, &y) in ys.iter().enumerate() {
            let f = x[0] * c1.cdf(y) + (1.0 - x[0]) * c2.cdf(y);
            ks = ks.max((f - i as f64 / n).abs()).max((f - (i + 1) as f64 / n).abs());
        }
        assert!(ks < 0.01, "KS {ks}");
    }

    #[test]
    fn degeneracy_partner_matches_derived_weight() {
        let lp = gauss_degenerate_partner(2.0 / 3.0, 0.0, 1.0, 0.5);
        // ln((1 - l')/l') = ln(1/2) + (0 - 1)/2 - (0.25 - 2.25)/2 = -ln 2 + 0.5
        let expected = 1.0 / (1.0 + (0.5 - 2f64.ln()).exp());
        assert!((lp - expected).abs() < 1e-15);
        assert!((lp - 0.54814).abs() < 1e-5, "{lp}");
        let (a, b) = ([2.0 / 3.0, 0.0, 1.0], [lp, 0.5, 1.5]);
        for y in [-4.0, -0.3, 0.0, 1.1, 7.5] {
            let (h, g) = (gm().mixture_posteriors(&a, y).0, gm().mixture_posteriors(&b, y).0);
            assert!((h - g).abs() < 1e-14);
        }
    }

    #[test]
    fn sample_csv_round_trip() {
        let s = gm().sample_seeded(&ParamPoint::mixture(0.35, 2.0, 1.5), 20, 5).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# seed=5 provenance=clean\ny\n"));
        let back = Sample::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.observations, s.observations);
    }

    fn random_point(model: ModelSpec) -> impl Strategy<Value = Vec<f64>> {
        match model {
            ModelSpec::GaussMix2 { .. } => (0.1f64..0.9, -3.0f64..3.0, -3.0f64..3.0)
                .prop_map(|(a, b, c)| vec![a, b, c])
                .boxed(),
            ModelSpec::WeibullMix2 { .. } => (0.1f64..0.9, 0.3f64..5.0, 0.3f64..5.0)
                .prop_map(|(a, b, c)| vec![a, b, c])
                .boxed(),
            ModelSpec::CauchyScale { .. } => (0.05f64..10.0).prop_map(|a| vec![a]).boxed(),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn gauss_density_normalizes(x in random_point(ModelSpec::gauss_mix2())) {
            let m = gm();
            let r = integrate_domain(|y| m.pdf(&x, y), &m.domain(&x), &QuadratureOptions::default()).unwrap();
            prop_assert!((r.value - 1.0).abs() < 1e-7, "{}", r.value);
        }

        #[test]
        fn weibull_density_normalizes(x in random_point(ModelSpec::weibull_mix2())) {
            let m = wm();
            let r = integrate_domain(|y| m.pdf(&x, y), &m.domain(&x), &QuadratureOptions::default()).unwrap();
            prop_assert!((r.value - 1.0).abs() < 1e-7, "{}", r.value);
        }

        #[test]
        fn cauchy_density_normalizes(x in random_point(ModelSpec::cauchy_scale())) {
            let m = cm();
            let r = integrate_domain(|y| m.pdf(&x, y), &m.domain(&x), &QuadratureOptions::default()).unwrap();
            prop_assert!((r.value - 1.0).abs() < 1e-7, "{}", r.value);
        }

        #[test]
        fn mixture_posteriors_positive_and_sum_to_one(
            x in random_point(ModelSpec::gauss_mix2()),
            w in random_point(ModelSpec::weibull_mix2()),
            y in 0.01f64..8.0,
        ) {
            for (m, p) in [(gm(), &x), (wm(), &w)] {
                let (h1, h2) = m.mixture_posteriors(p, y);
                let z = m.log_odds(p, y);
                prop_assert!(z.is_finite());
                // beyond |z| ~ 745 one posterior underflows to zero in f64
                if z.abs() < 700.0 {
                    prop_assert!(h1 > 0.0 && h2 > 0.0);
                }
                prop_assert!((h1 + h2 - 1.0).abs() < 1e-15);
            }
        }

        #[test]
        fn cauchy_posterior_normalizes(a in 0.05f64..10.0, y in -20.0f64..20.0) {
            prop_assume!(y.abs() > 1e-3);
            let r = integrate(|t| ModelSpec::cauchy_posterior(a, y, t), Interval::positive_half_line(), &QuadratureOptions::default()).unwrap();
            prop_assert!((r.value - 1.0).abs() < 1e-6);
            prop_assert!(ModelSpec::cauchy_posterior(a, y, 3.0) > 0.0);
        }

        #[test]
        fn degenerate_pairs_share_posteriors(
            l in 0.2f64..0.8, m1 in -2.0f64..2.0, m2 in -2.0f64..2.0, d in -0.5f64..0.5, y in -5.0f64..5.0,
        ) {
            let lp = gauss_degenerate_partner(l, m1, m2, d);
            let (h, g) = (
                gm().mixture_posteriors(&[l, m1, m2], y).0,
                gm().mixture_posteriors(&[lp, m1 + d, m2 + d], y).0,
            );
            prop_assert!((h - g).abs() < 1e-12);
        }

        #[test]
        fn posterior_gradient_matches_fd(x in random_point(ModelSpec::weibull_mix2()), y in 0.05f64..5.0) {
            let m = wm();
            let (_, _, g) = m.mixture_posterior_grad(&x, y);
            for i in 0..3 {
                let h = 1e-6;
                let mut a = x.clone();
                let mut b = x.clone();
                a[i] += h;
                b[i] -= h;
                let fd = (m.mixture_posteriors(&a, y).0 - m.mixture_posteriors(&b, y).0) / (2.0 * h);
                prop_assert!((fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()), "i {} fd {} g {}", i, fd, g[i]);
            }
        }

        #[test]
        fn log_pdf_gradient_matches_fd(x in random_point(ModelSpec::gauss_mix2()), y in -4.0f64..5.0) {
            let m = gm();
            let g = m.grad_log_pdf(&x, y);
            for i in 0..3 {
                let h = 1e-6;
                let mut a = x.clone();
                let mut b = x.clone();
                a[i] += h;
                b[i] -= h;
                let fd = (m.log_pdf(&a, y) - m.log_pdf(&b, y)) / (2.0 * h);
                prop_assert!((fd - g[i]).abs() < 1e-5 * (1.0 + g[i].abs()));
            }
        }
    }
}
