//! Estimated divergence criteria: the classical dual estimator (a supremum over an
//! auxiliary parameter), the kernel dual estimator, the density power divergence
//! objective, the log-likelihood, and the proximal term between iterates.

mod admissibility;
mod limits;
mod proximal_term;
mod rules;

use serde::{Deserialize, Serialize};

pub use admissibility::{
    classical_admissible, kernel_admissible, weibull_inner_wall, weibull_power_integrable, WEIBULL_INNER_MARGIN,
};
pub use limits::{component_log_pdf, weibull_spike};
pub use proximal_term::{proximal_term, proximal_term_gradient, ProximalTerm};

use crate::divkernels::{phi_prime_weighted, phi_sharp_log, DivergenceSpec};
use crate::error::{Error, Result};
use crate::kde::{Kde, KernelSpec};
use crate::models::{ModelSpec, ParamPoint, Sample};
use crate::numerics::{
    bfgs_box, brent_multistart, integrate_domain, nelder_mead, NodeRule, OptimizerOptions, QuadratureOptions,
};
use rules::Piece;

/// Settings of the inner supremum of the classical dual estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerSearch {
    /// Box for the auxiliary parameter; derived from the model and sample when `None`.
    pub bounds: Option<Vec<(f64, f64)>>,
    /// Extra starting points (free coordinates) besides `phi` and the box midpoint.
    pub starts: Vec<Vec<f64>>,
    pub options: OptimizerOptions,
    /// Number of log-spaced subintervals for one-dimensional searches.
    pub pieces: usize,
    pub method: InnerMethod,
    /// Also start from the midpoint of the box.
    pub midpoint_start: bool,
    /// Number of maxima of a grid scan, run once per sample at a reference
    /// parameter, added to the starts of every mixture search. They catch
    /// maxima far from `phi`, such as a component sitting on outliers.
    #[serde(default)]
    pub global_starts: usize,
}

/// Local search used for the inner supremum in two or more dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InnerMethod {
    /// BFGS on the analytic gradient in `alpha`.
    QuasiNewton,
    NelderMead,
}

impl Default for InnerSearch {
    fn default() -> Self {
        Self {
            bounds: None,
            starts: Vec::new(),
            options: OptimizerOptions {
                max_evals: 2000,
                ..OptimizerOptions::default()
            },
            pieces: 8,
            method: InnerMethod::QuasiNewton,
            midpoint_start: false,
            global_starts: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EstimatorSpec {
    ClassicalDual { gamma: f64, inner: InnerSearch },
    KernelDual { gamma: f64, kernel: KernelSpec },
    Mdpd { a: f64 },
    LogLikelihood,
}

impl EstimatorSpec {
    pub fn classical(gamma: f64) -> Self {
        EstimatorSpec::ClassicalDual {
            gamma,
            inner: InnerSearch::default(),
        }
    }

    pub fn kernel(gamma: f64, kernel: KernelSpec) -> Self {
        EstimatorSpec::KernelDual { gamma, kernel }
    }

    pub fn divergence(&self) -> DivergenceSpec {
        match *self {
            EstimatorSpec::ClassicalDual { gamma, .. } | EstimatorSpec::KernelDual { gamma, .. } => {
                DivergenceSpec::CressieRead { gamma }
            }
            EstimatorSpec::Mdpd { a } => DivergenceSpec::Dpd { a },
            EstimatorSpec::LogLikelihood => DivergenceSpec::Likelihood,
        }
    }

    pub fn name(&self) -> String {
        match self {
            EstimatorSpec::ClassicalDual { gamma, .. } => format!("classical(gamma={gamma})"),
            EstimatorSpec::KernelDual { gamma, kernel } => format!("kernel(gamma={gamma},{})", kernel.kind.name()),
            EstimatorSpec::Mdpd { a } => format!("mdpd(a={a})"),
            EstimatorSpec::LogLikelihood => "likelihood".into(),
        }
    }

    /// Whether the estimate is a smooth function of the parameter.
    pub fn is_smooth(&self) -> bool {
        !matches!(self, EstimatorSpec::ClassicalDual { .. })
    }
}

/// How integrals inside the objectives are computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QuadratureMode {
    /// A node rule fixed per sample; densities of the data side are cached at its nodes.
    Composite,
    /// Adaptive Gauss-Legendre on every call; slow, used as a reference.
    Adaptive(QuadratureOptions),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveOptions {
    pub quadrature: QuadratureMode,
}

impl Default for ObjectiveOptions {
    fn default() -> Self {
        Self {
            quadrature: QuadratureMode::Composite,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValue {
    pub value: f64,
    /// Maximizing auxiliary parameter of the classical dual estimator.
    pub inner_argmax: Option<ParamPoint>,
    /// Summed adaptive error estimates; `None` with the composite rule.
    pub quadrature_error: Option<f64>,
}

impl ObjectiveValue {
    fn plain(value: f64, err: Option<f64>) -> Self {
        Self {
            value,
            inner_argmax: None,
            quadrature_error: err,
        }
    }
}

struct KernelState {
    kde: Kde,
    ln_k_nodes: Vec<f64>,
    ln_k_obs: Vec<f64>,
}

/// An estimator bound to one sample, with per-sample caches.
pub struct Objective {
    model: ModelSpec,
    estimator: EstimatorSpec,
    sample: Sample,
    obs: Vec<f64>,
    mode: QuadratureMode,
    pieces: Vec<Piece>,
    rule: Option<NodeRule>,
    kernel: Option<KernelState>,
    inner_bounds: Vec<(f64, f64)>,
    /// Inner starts found by the grid scan; empty unless classical on a mixture.
    global_starts: Vec<Vec<f64>>,
}

impl std::fmt::Debug for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Objective")
            .field("model", &self.model)
            .field("estimator", &self.estimator)
            .field("n", &self.obs.len())
            .field("mode", &self.mode)
            .finish()
    }
}

/// Default box of the auxiliary parameter of the classical dual estimator.
pub fn default_inner_bounds(model: &ModelSpec, sample: &Sample) -> Vec<(f64, f64)> {
    match *model {
        ModelSpec::GaussMix2 { eta } => {
            let (lo, hi) = (sample.min() - 1.0, sample.max() + 1.0);
            vec![(eta, 1.0 - eta), (lo, hi), (lo, hi)]
        }
        ModelSpec::WeibullMix2 { eta, shape_min } => {
            vec![(eta, 1.0 - eta), (shape_min, 20.0), (shape_min, 20.0)]
        }
        ModelSpec::CauchyScale { eps } => {
            let m = sample.observations.iter().fold(0.0f64, |m, y| m.max(y.abs()));
            vec![(eps, (10.0 * m).max(10.0 * eps))]
        }
    }
}

impl Objective {
    pub fn new(model: ModelSpec, estimator: EstimatorSpec, sample: &Sample, options: &ObjectiveOptions) -> Result<Self> {
        model.validate()?;
        sample.validate()?;
        estimator.divergence().validate()?;
        if let EstimatorSpec::ClassicalDual { gamma, .. } = estimator {
            classical_admissible(&model, gamma)?;
        }
        if let QuadratureMode::Adaptive(q) = options.quadrature {
            q.validate()?;
        }
        let obs = sample.observations.clone();
        if let Some(y) = obs.iter().find(|y| !model.support().contains(**y)) {
            return Err(Error::InvalidInput(format!("observation {y} outside the model support")));
        }
        let (pieces, kde) = match &estimator {
            EstimatorSpec::KernelDual { kernel, .. } => {
                let kde = Kde::new(sample, kernel)?;
                (rules::kernel_pieces(&model, &kde, sample), Some(kde))
            }
            EstimatorSpec::LogLikelihood => (Vec::new(), None),
            _ => (rules::model_pieces(&model, sample), None),
        };
        let rule = match options.quadrature {
            QuadratureMode::Composite if !pieces.is_empty() => Some(rules::build_rule(&pieces)?),
            _ => None,
        };
        let kernel = kde.map(|kde| {
            let ln_k_nodes = rule
                .as_ref()
                .map(|r| r.nodes.iter().map(|&x| kde.eval(x).ln()).collect())
                .unwrap_or_default();
            let ln_k_obs = obs.iter().map(|&y| kde.eval(y).ln()).collect();
            KernelState {
                kde,
                ln_k_nodes,
                ln_k_obs,
            }
        });
        let inner_bounds = match &estimator {
            EstimatorSpec::ClassicalDual { inner, .. } => match &inner.bounds {
                Some(b) if b.len() == model.dim() && b.iter().all(|(lo, hi)| lo < hi) => b.clone(),
                Some(_) => return Err(Error::InvalidInput("inner bounds do not match the model".into())),
                None => default_inner_bounds(&model, sample),
            },
            _ => Vec::new(),
        };
        Ok(Self {
            model,
            estimator,
            sample: sample.clone(),
            obs,
            mode: options.quadrature,
            pieces,
            rule,
            kernel,
            inner_bounds,
            global_starts: Vec::new(),
        }
        .with_global_starts())
    }

    pub fn model(&self) -> ModelSpec {
        self.model
    }

    pub fn estimator(&self) -> &EstimatorSpec {
        &self.estimator
    }

    pub fn sample(&self) -> &Sample {
        &self.sample
    }

    pub fn observations(&self) -> &[f64] {
        &self.obs
    }

    pub fn inner_bounds(&self) -> &[(f64, f64)] {
        &self.inner_bounds
    }

    /// Resolved kernel bandwidth, for kernel estimators.
    pub fn bandwidth(&self) -> Option<f64> {
        self.kernel.as_ref().map(|k| k.kde.bandwidth)
    }

    fn n(&self) -> f64 {
        self.obs.len() as f64
    }

    /// Estimator value at free coordinates `x`.
    pub fn value(&self, x: &[f64]) -> Result<ObjectiveValue> {
        self.model.check_free(x)?;
        match &self.estimator {
            EstimatorSpec::LogLikelihood => {
                let j = self.log_likelihood(x)?;
                Ok(ObjectiveValue::plain(-j / self.n(), None))
            }
            EstimatorSpec::Mdpd { a } => self.mdpd(x, *a),
            EstimatorSpec::KernelDual { gamma, kernel } => {
                let k = self.kernel.as_ref().expect("kernel state");
                kernel_admissible(&self.model, *gamma, kernel.kind, x, k.kde.bandwidth)?;
                self.kernel_dual(x, *gamma)
            }
            EstimatorSpec::ClassicalDual { gamma, .. } => self.classical_dual(x, *gamma),
        }
    }

    /// Estimator value, with any error mapped to `+inf` (a wall for the optimizers).
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.value(x) {
            Ok(v) if !v.value.is_nan() => v.value,
            _ => f64::INFINITY,
        }
    }

    /// `J = sum_i ln p_x(y_i)`.
    pub fn log_likelihood(&self, x: &[f64]) -> Result<f64> {
        let mut j = 0.0;
        for &y in &self.obs {
            let l = self.model.log_pdf(x, y);
            if l == f64::NEG_INFINITY {
                return Err(Error::ZeroDensity(y));
            }
            j += l;
        }
        Ok(j)
    }

    /// Integrates `f(x, ln K(x))`; `ln K` is NaN when no kernel is attached.
    /// Non-finite node terms are errors in adaptive mode and are dropped with the
    /// node rule, where they only arise from underflow far in the tails.
    fn integrate<F: FnMut(f64, f64) -> f64>(&self, mut f: F) -> Result<(f64, Option<f64>)> {
        match (&self.rule, self.mode) {
            (Some(rule), _) => {
                let lk = self.kernel.as_ref().map(|k| k.ln_k_nodes.as_slice());
                let mut s = 0.0;
                for (i, (&x, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
                    let v = f(x, lk.map_or(f64::NAN, |l| l[i]));
                    if v.is_finite() {
                        s += w * v;
                    } else if v.is_nan() {
                        continue;
                    } else {
                        return Ok((v, None));
                    }
                }
                Ok((s, None))
            }
            (None, QuadratureMode::Adaptive(opts)) => {
                let kde = self.kernel.as_ref().map(|k| &k.kde);
                let (mut s, mut e) = (0.0, 0.0);
                for p in &self.pieces {
                    let r = integrate_domain(|x| f(x, kde.map_or(f64::NAN, |k| k.eval(x).ln())), &p.domain, &opts)?;
                    s += r.value;
                    e += r.abs_error;
                }
                Ok((s, Some(e)))
            }
            (None, QuadratureMode::Composite) => Err(Error::InvalidInput("no integration rule for this estimator".into())),
        }
    }

    fn mdpd(&self, x: &[f64], a: f64) -> Result<ObjectiveValue> {
        let m = self.model;
        let (int, err) = self.integrate(|t, _| ((1.0 + a) * m.log_pdf(x, t)).exp())?;
        let s: f64 = self.obs.iter().map(|&y| (a * m.log_pdf(x, y)).exp()).sum::<f64>() / self.n();
        Ok(ObjectiveValue::plain(int - (a + 1.0) / a * s, err))
    }

    fn kernel_dual(&self, x: &[f64], gamma: f64) -> Result<ObjectiveValue> {
        let m = self.model;
        let k = self.kernel.as_ref().expect("kernel state");
        let (int, err) = self.integrate(|t, lk| {
            let lp = m.log_pdf(x, t);
            if lp == f64::NEG_INFINITY && lk == f64::NEG_INFINITY {
                return 0.0;
            }
            phi_prime_weighted(gamma, lp, lk)
        })?;
        let mut s = 0.0;
        for (&y, &lk) in self.obs.iter().zip(&k.ln_k_obs) {
            s += phi_sharp_log(gamma, m.log_pdf(x, y) - lk);
        }
        let v = int - s / self.n();
        if v.is_nan() {
            return Err(Error::NonFinite(x.to_vec()));
        }
        Ok(ObjectiveValue::plain(v, err))
    }

    /// Whether `alpha` is inside the auxiliary search region for `phi`.
    fn alpha_allowed(&self, gamma: f64, x_phi: &[f64], x_alpha: &[f64]) -> bool {
        if x_alpha
            .iter()
            .zip(&self.inner_bounds)
            .any(|(v, (lo, hi))| !(v >= lo && v <= hi))
        {
            return false;
        }
        match self.model {
            ModelSpec::WeibullMix2 { .. } => {
                weibull_inner_wall(gamma, x_phi, x_alpha) && weibull_power_integrable(gamma, x_phi, x_alpha)
            }
            _ => true,
        }
    }

    fn inner_problem<'a>(&'a self, gamma: f64, x_phi: &'a [f64]) -> InnerProblem<'a> {
        let m = self.model;
        let pearson = matches!(m, ModelSpec::CauchyScale { .. }) && gamma == 2.0;
        let lp_obs = self.obs.iter().map(|&y| m.log_pdf(x_phi, y)).collect();
        let lp_nodes = self
            .rule
            .as_ref()
            .filter(|_| !pearson)
            .map(|rule| rule.nodes.iter().map(|&t| m.log_pdf(x_phi, t)).collect());
        InnerProblem {
            obj: self,
            gamma,
            x_phi,
            lp_obs,
            lp_nodes,
            pearson,
        }
    }

    fn classical_gamma(&self) -> Result<(f64, &InnerSearch)> {
        match &self.estimator {
            EstimatorSpec::ClassicalDual { gamma, inner } => Ok((*gamma, inner)),
            _ => Err(Error::InvalidInput("the inner supremum needs a classical dual estimator".into())),
        }
    }

    /// `f(alpha, phi)`, the function whose supremum over `alpha` is the classical
    /// dual estimate. `-inf` outside the auxiliary search region.
    pub fn dual_inner(&self, x_phi: &[f64], x_alpha: &[f64]) -> Result<f64> {
        let (gamma, _) = self.classical_gamma()?;
        self.model.check_free(x_phi)?;
        Ok(self.inner_problem(gamma, x_phi).value(x_alpha))
    }

    /// Gradient of `alpha -> f(alpha, phi)`.
    pub fn dual_inner_gradient(&self, x_phi: &[f64], x_alpha: &[f64]) -> Result<Vec<f64>> {
        let (gamma, _) = self.classical_gamma()?;
        self.model.check_free(x_phi)?;
        let (v, g) = self.inner_problem(gamma, x_phi).value_grad(x_alpha);
        if !v.is_finite() {
            return Err(Error::NonFinite(x_alpha.to_vec()));
        }
        Ok(g)
    }

    fn clamp_inner(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.inner_bounds)
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect()
    }

    /// Scans a grid of auxiliary parameters at a reference parameter (one
    /// component with weight one half at the sample center) and keeps the best
    /// distinct local maxima as inner starts.
    fn with_global_starts(mut self) -> Self {
        let (gamma, count) = match &self.estimator {
            EstimatorSpec::ClassicalDual { gamma, inner } if self.model.is_mixture() => (*gamma, inner.global_starts),
            _ => return self,
        };
        if count == 0 {
            return self;
        }
        let reference = match self.model {
            ModelSpec::GaussMix2 { .. } => {
                let mut sorted = self.obs.clone();
                sorted.sort_by(f64::total_cmp);
                let med = crate::kde::quantile_sorted(&sorted, 0.5);
                vec![0.5, med, med]
            }
            _ => vec![0.5, 1.0, 1.0],
        };
        let b = &self.inner_bounds;
        let weights = [0.0, 0.25, 0.5, 0.75, 1.0].map(|u| b[0].0 + u * (b[0].1 - b[0].0));
        let levels: Vec<f64> = (0..17)
            .map(|k| {
                let u = k as f64 / 16.0;
                match self.model {
                    ModelSpec::WeibullMix2 { .. } => {
                        let (lo, hi) = (b[1].0.max(0.05).ln(), b[1].1.min(10.0).ln());
                        (lo + u * (hi - lo)).exp()
                    }
                    _ => b[1].0 + u * (b[1].1 - b[1].0),
                }
            })
            .collect();
        let prob = self.inner_problem(gamma, &reference);
        let mut grid: Vec<(Vec<f64>, f64)> = Vec::new();
        for &w in &weights {
            for &t1 in &levels {
                for &t2 in &levels {
                    let a = vec![w, t1, t2];
                    let v = prob.value(&a);
                    if v.is_finite() {
                        grid.push((a, v));
                    }
                }
            }
        }
        grid.sort_by(|a, b| b.1.total_cmp(&a.1));
        let opts = match &self.estimator {
            EstimatorSpec::ClassicalDual { inner, .. } => inner.options,
            _ => unreachable!(),
        };
        let mut kept: Vec<(Vec<f64>, f64)> = Vec::new();
        for (a, _) in grid.into_iter().take(6 * count) {
            let m = match bfgs_box(
                |z| {
                    let (v, g) = prob.value_grad(z);
                    (-v, g.into_iter().map(|x| -x).collect())
                },
                &a,
                b,
                &opts,
            ) {
                Ok(m) if m.f.is_finite() => m,
                _ => continue,
            };
            let same = |c: &[f64]| {
                let swapped = [1.0 - c[0], c[2], c[1]];
                let d = |u: &[f64]| u.iter().zip(&m.x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                d(c) < 1e-3 || d(&swapped) < 1e-3
            };
            if !kept.iter().any(|(c, _)| same(c)) {
                kept.push((m.x, -m.f));
            }
        }
        kept.sort_by(|a, b| b.1.total_cmp(&a.1));
        drop(prob);
        self.global_starts = kept.into_iter().take(count).map(|(a, _)| a).collect();
        self
    }

    /// Local maxima of `alpha -> f(alpha, phi)` reached from every start, best first.
    pub fn inner_local_maxima(&self, x_phi: &[f64]) -> Result<Vec<(Vec<f64>, f64)>> {
        let (gamma, inner) = self.classical_gamma()?;
        self.model.check_free(x_phi)?;
        let prob = self.inner_problem(gamma, x_phi);
        let mut found: Vec<(Vec<f64>, f64)> = Vec::new();
        if self.model.dim() == 1 {
            let (lo, hi) = self.inner_bounds[0];
            let mins = brent_multistart(|b| -prob.value(&[b]), lo, hi, inner.pieces.max(1), lo > 0.0, &inner.options)?;
            for m in mins {
                if m.f.is_finite() {
                    found.push((vec![m.x], -m.f));
                }
            }
        } else {
            let mut starts = vec![self.clamp_inner(x_phi)];
            for s in inner.starts.iter().chain(&self.global_starts).filter(|s| s.len() == x_phi.len()) {
                let s = self.clamp_inner(s);
                if !starts.contains(&s) {
                    starts.push(s);
                }
            }
            if inner.midpoint_start {
                starts.push(self.inner_bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect());
            }
            for s in starts {
                if !prob.value(&s).is_finite() {
                    continue;
                }
                let res = match inner.method {
                    InnerMethod::QuasiNewton => bfgs_box(
                        |a| {
                            let (v, g) = prob.value_grad(a);
                            (-v, g.into_iter().map(|x| -x).collect())
                        },
                        &s,
                        &self.inner_bounds,
                        &inner.options,
                    ),
                    InnerMethod::NelderMead => nelder_mead(|a| -prob.value(a), &s, &inner.options),
                };
                if let Ok(m) = res {
                    if m.f.is_finite() {
                        found.push((m.x, -m.f));
                    }
                }
            }
        }
        found.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(found)
    }

    fn classical_dual(&self, x: &[f64], gamma: f64) -> Result<ObjectiveValue> {
        let maxima = self.inner_local_maxima(x)?;
        let at_phi = Some(self.inner_problem(gamma, x).value(x)).filter(|v| v.is_finite());
        let (arg, value) = match (maxima.into_iter().next(), at_phi) {
            (Some((_, v)), Some(z)) if z > v => (x.to_vec(), z),
            (Some((a, v)), _) => (a, v),
            (None, Some(z)) => (x.to_vec(), z),
            (None, None) => {
                return Err(Error::Optimizer(format!(
                    "no admissible start for the inner supremum at {x:?} (gamma = {gamma})"
                )))
            }
        };
        if value == f64::INFINITY {
            return Err(Error::NonFinite(x.to_vec()));
        }
        Ok(ObjectiveValue {
            value,
            inner_argmax: Some(self.model.point_from_free(&arg)?),
            quadrature_error: None,
        })
    }

    /// Gradient of a Cressie-Read dual criterion in `phi` with the reference log
    /// density `ln_ref(t, cached ln K(t))` in place of the unknown density.
    fn cressie_read_gradient<R>(&self, x: &[f64], gamma: f64, ln_ref: R, ln_ref_obs: &[f64]) -> Result<Vec<f64>>
    where
        R: Fn(f64, f64) -> f64,
    {
        let m = self.model;
        let n = self.n();
        let weight = |lr: f64| {
            if gamma == 1.0 {
                1.0 + lr
            } else {
                (gamma * ((gamma - 1.0) * lr).exp() - 1.0) / (gamma - 1.0)
            }
        };
        let mut g = vec![0.0; m.dim()];
        for (i, gi) in g.iter_mut().enumerate() {
            let (v, _) = self.integrate(|t, lk| {
                let lp = m.log_pdf(x, t);
                if lp == f64::NEG_INFINITY {
                    return 0.0;
                }
                lp.exp() * m.grad_log_pdf(x, t)[i] * weight(lp - ln_ref(t, lk))
            })?;
            *gi += v;
        }
        for (&y, &lk) in self.obs.iter().zip(ln_ref_obs) {
            let r = (gamma * (m.log_pdf(x, y) - lk)).exp();
            for (gi, si) in g.iter_mut().zip(m.grad_log_pdf(x, y)) {
                *gi -= r * si / n;
            }
        }
        Ok(g)
    }

    /// Estimator value and gradient in the free coordinates. For the classical
    /// dual estimator the gradient is that of `f(alpha*, .)` at the maximizing
    /// `alpha*`, which is the gradient of the supremum wherever the maximizer is
    /// unique and interior.
    pub fn value_and_gradient(&self, x: &[f64]) -> Result<(ObjectiveValue, Vec<f64>)> {
        let v = self.value(x)?;
        let m = self.model;
        let n = self.n();
        let d = m.dim();
        let mut g = vec![0.0; d];
        match &self.estimator {
            EstimatorSpec::ClassicalDual { gamma, .. } => {
                let alpha = m.check(v.inner_argmax.as_ref().expect("classical value carries its argmax"))?;
                let ref_obs: Vec<f64> = self.obs.iter().map(|&y| m.log_pdf(&alpha, y)).collect();
                g = self.cressie_read_gradient(x, *gamma, |t, _| m.log_pdf(&alpha, t), &ref_obs)?;
            }
            EstimatorSpec::LogLikelihood => {
                for &y in &self.obs {
                    for (gi, si) in g.iter_mut().zip(m.grad_log_pdf(x, y)) {
                        *gi -= si / n;
                    }
                }
            }
            EstimatorSpec::Mdpd { a } => {
                // (1 + a) [ int p^(1+a) grad ln p - mean p^a grad ln p ]
                for (i, gi) in g.iter_mut().enumerate() {
                    let (v, _) = self.integrate(|t, _| ((1.0 + a) * m.log_pdf(x, t)).exp() * m.grad_log_pdf(x, t)[i])?;
                    *gi += (1.0 + a) * v;
                }
                for &y in &self.obs {
                    let w = (a * m.log_pdf(x, y)).exp();
                    for (gi, si) in g.iter_mut().zip(m.grad_log_pdf(x, y)) {
                        *gi -= (1.0 + a) * w * si / n;
                    }
                }
            }
            EstimatorSpec::KernelDual { gamma, .. } => {
                let k = self.kernel.as_ref().expect("kernel state");
                g = self.cressie_read_gradient(x, *gamma, |_, lk| lk, &k.ln_k_obs)?;
            }
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(x.to_vec()));
        }
        Ok((v, g))
    }

    /// Gradient in the free coordinates; see [`value_and_gradient`](Self::value_and_gradient).
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_and_gradient(x)?.1)
    }
}

/// `alpha -> f(alpha, phi)` with the `phi` side cached at the nodes.
struct InnerProblem<'a> {
    obj: &'a Objective,
    gamma: f64,
    x_phi: &'a [f64],
    lp_obs: Vec<f64>,
    lp_nodes: Option<Vec<f64>>,
    pearson: bool,
}

impl InnerProblem<'_> {
    fn node_term(&self, lp: f64, lq: f64) -> f64 {
        if lp == f64::NEG_INFINITY && lq == f64::NEG_INFINITY {
            0.0
        } else {
            phi_prime_weighted(self.gamma, lp, lq)
        }
    }

    fn value(&self, xa: &[f64]) -> f64 {
        let o = self.obj;
        let m = o.model;
        if !o.alpha_allowed(self.gamma, self.x_phi, xa) {
            return f64::NEG_INFINITY;
        }
        if self.pearson {
            return cauchy_pearson_inner(self.x_phi[0], xa[0], &o.obs);
        }
        let mut s = 0.0;
        for (&y, &lp) in o.obs.iter().zip(&self.lp_obs) {
            s += phi_sharp_log(self.gamma, lp - m.log_pdf(xa, y));
        }
        let int = match (&o.rule, &self.lp_nodes) {
            (Some(rule), Some(lpn)) => {
                let mut acc = 0.0;
                for ((&t, &w), &lp) in rule.nodes.iter().zip(&rule.weights).zip(lpn) {
                    let v = self.node_term(lp, m.log_pdf(xa, t));
                    if v.is_finite() {
                        acc += w * v;
                    } else if !v.is_nan() {
                        return v;
                    }
                }
                acc
            }
            _ => match o.integrate(|t, _| self.node_term(m.log_pdf(self.x_phi, t), m.log_pdf(xa, t))) {
                Ok((v, _)) => v,
                Err(_) => return f64::NEG_INFINITY,
            },
        };
        let v = int - s / o.n();
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    /// Value and gradient in `alpha`:
    /// `-int p_phi^gamma p_alpha^(1-gamma) grad ln p_alpha + (1/n) sum r_i^gamma grad ln p_alpha(y_i)`.
    fn value_grad(&self, xa: &[f64]) -> (f64, Vec<f64>) {
        let o = self.obj;
        let m = o.model;
        let d = xa.len();
        let v = self.value(xa);
        let mut g = vec![0.0; d];
        if !v.is_finite() {
            return (f64::NEG_INFINITY, g);
        }
        let gamma = self.gamma;
        let weight = |lp: f64, lq: f64| {
            if lp == f64::NEG_INFINITY || lq == f64::NEG_INFINITY {
                0.0
            } else {
                (gamma * lp + (1.0 - gamma) * lq).exp()
            }
        };
        match (&o.rule, &self.lp_nodes) {
            (Some(rule), Some(lpn)) => {
                for ((&t, &w), &lp) in rule.nodes.iter().zip(&rule.weights).zip(lpn) {
                    let c = weight(lp, m.log_pdf(xa, t));
                    if c > 0.0 && c.is_finite() {
                        for (gi, si) in g.iter_mut().zip(m.grad_log_pdf(xa, t)) {
                            *gi -= w * c * si;
                        }
                    }
                }
            }
            _ => {
                for (i, gi) in g.iter_mut().enumerate() {
                    let r = o.integrate(|t, _| {
                        let c = weight(m.log_pdf(self.x_phi, t), m.log_pdf(xa, t));
                        if c > 0.0 {
                            c * m.grad_log_pdf(xa, t)[i]
                        } else {
                            0.0
                        }
                    });
                    match r {
                        Ok((val, _)) => *gi -= val,
                        Err(_) => return (f64::NEG_INFINITY, vec![0.0; d]),
                    }
                }
            }
        }
        let n = o.n();
        for (&y, &lp) in o.obs.iter().zip(&self.lp_obs) {
            let r = (gamma * (lp - m.log_pdf(xa, y))).exp();
            for (gi, si) in g.iter_mut().zip(m.grad_log_pdf(xa, y)) {
                *gi += r * si / n;
            }
        }
        (v, g)
    }
}

/// Pearson inner function of the Cauchy scale model:
/// `(a^2 + b^2)/(2ab) - (1/2n) sum a^2 (b^2 + y^2)^2 / (b^2 (a^2 + y^2)^2) - 1/2`.
pub fn cauchy_pearson_inner(a: f64, b: f64, obs: &[f64]) -> f64 {
    let (a2, b2) = (a * a, b * b);
    let s: f64 = obs
        .iter()
        .map(|y| {
            let y2 = y * y;
            a2 * (b2 + y2).powi(2) / (b2 * (a2 + y2).powi(2))
        })
        .sum();
    (a2 + b2) / (2.0 * a * b) - s / (2.0 * obs.len() as f64) - 0.5
}

fn free_of(model: &ModelSpec, p: &ParamPoint) -> Result<Vec<f64>> {
    model.check(p)
}

/// `f(alpha, phi)` of the classical dual estimator.
pub fn dual_inner(model: &ModelSpec, phi: &ParamPoint, alpha: &ParamPoint, sample: &Sample, gamma: f64) -> Result<f64> {
    let obj = Objective::new(*model, EstimatorSpec::classical(gamma), sample, &ObjectiveOptions::default())?;
    let (xp, xa) = (free_of(model, phi)?, free_of(model, alpha)?);
    obj.dual_inner(&xp, &xa)
}

pub fn classical_dual_estimate(
    model: &ModelSpec,
    phi: &ParamPoint,
    sample: &Sample,
    gamma: f64,
    inner: &InnerSearch,
) -> Result<ObjectiveValue> {
    let est = EstimatorSpec::ClassicalDual {
        gamma,
        inner: inner.clone(),
    };
    let obj = Objective::new(*model, est, sample, &ObjectiveOptions::default())?;
    obj.value(&free_of(model, phi)?)
}

pub fn kernel_dual_estimate(
    model: &ModelSpec,
    phi: &ParamPoint,
    sample: &Sample,
    gamma: f64,
    kernel: &KernelSpec,
) -> Result<ObjectiveValue> {
    let obj = Objective::new(*model, EstimatorSpec::kernel(gamma, *kernel), sample, &ObjectiveOptions::default())?;
    obj.value(&free_of(model, phi)?)
}

pub fn mdpd_objective(model: &ModelSpec, phi: &ParamPoint, sample: &Sample, a: f64) -> Result<ObjectiveValue> {
    let obj = Objective::new(*model, EstimatorSpec::Mdpd { a }, sample, &ObjectiveOptions::default())?;
    obj.value(&free_of(model, phi)?)
}

/// `J(phi) = sum_i ln p_phi(y_i)`.
pub fn log_likelihood(model: &ModelSpec, phi: &ParamPoint, sample: &Sample) -> Result<f64> {
    let x = free_of(model, phi)?;
    let mut j = 0.0;
    for &y in &sample.observations {
        let l = model.log_pdf(&x, y);
        if l == f64::NEG_INFINITY {
            return Err(Error::ZeroDensity(y));
        }
        j += l;
    }
    Ok(j)
}

#[cfg(test)]
mod tests;
