//! Starting-point conditions that keep the initial sublevel set bounded: the
//! value at `phi0` has to beat every limit where one mixture component leaves
//! to infinity.

use crate::error::{Error, Result};
use crate::models::{ModelSpec, ParamPoint, Sample};
use crate::numerics::{brent_multistart, nelder_mead, OptimizerOptions};
use crate::objectives::{weibull_spike, EstimatorSpec, Objective, ObjectiveOptions};

use super::kernel_point_admissible;

/// Largest shape explored by the boundary searches.
const SHAPE_MAX: f64 = 50.0;
/// Finite stand-in for an infinite shape in admissibility checks.
const SHAPE_FAR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitCondition {
    /// Likelihood above the single-component Gaussian fit at the sample mean.
    GaussLikelihood,
    GaussMdpd,
    GaussKernelDual,
    /// Likelihood above the best single-component Weibull fit.
    WeibullLikelihood,
    /// An observation sits where a component with infinite shape piles up its
    /// mass, so the likelihood is unbounded.
    WeibullLikelihoodSpike,
    WeibullMdpd,
    WeibullKernelDual,
    /// Value below the value at the lower end of the scale range.
    CauchyBoundary,
    /// No condition: the parameter box is compact.
    CompactBox,
}

impl InitCondition {
    pub fn id(&self) -> &'static str {
        match self {
            InitCondition::GaussLikelihood => "gauss_likelihood",
            InitCondition::GaussMdpd => "gauss_mdpd",
            InitCondition::GaussKernelDual => "gauss_kernel_dual",
            InitCondition::WeibullLikelihood => "weibull_likelihood",
            InitCondition::WeibullLikelihoodSpike => "weibull_likelihood_spike",
            InitCondition::WeibullMdpd => "weibull_mdpd",
            InitCondition::WeibullKernelDual => "weibull_kernel_dual",
            InitCondition::CauchyBoundary => "cauchy_boundary",
            InitCondition::CompactBox => "compact_box",
        }
    }
}

/// Outcome of an initialization check. `margin` is the binding bound minus the
/// objective at `phi0`, in objective units (`-J / n` for the likelihood); it is
/// positive exactly when the condition holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitCheck {
    Ok { condition: InitCondition, margin: f64 },
    Violated { condition: InitCondition, margin: f64 },
}

impl InitCheck {
    fn from_margin(condition: InitCondition, margin: f64) -> Self {
        if margin > 0.0 {
            InitCheck::Ok { condition, margin }
        } else {
            InitCheck::Violated { condition, margin }
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, InitCheck::Ok { .. })
    }

    pub fn condition(&self) -> InitCondition {
        match *self {
            InitCheck::Ok { condition, .. } | InitCheck::Violated { condition, .. } => condition,
        }
    }

    pub fn margin(&self) -> f64 {
        match *self {
            InitCheck::Ok { margin, .. } | InitCheck::Violated { margin, .. } => margin,
        }
    }
}

pub fn check_initialization(
    model: &ModelSpec,
    estimator: &EstimatorSpec,
    sample: &Sample,
    phi0: &ParamPoint,
) -> Result<InitCheck> {
    let obj = Objective::new(*model, estimator.clone(), sample, &ObjectiveOptions::default())?;
    check_initialization_with(&obj, phi0)
}

/// [`check_initialization`] on a prepared objective.
pub fn check_initialization_with(obj: &Objective, phi0: &ParamPoint) -> Result<InitCheck> {
    let model = obj.model();
    let x0 = model.check(phi0)?;
    let v0 = obj.value(&x0)?.value;
    let obs = obj.observations();
    let n = obs.len() as f64;
    let est = obj.estimator();
    if matches!(est, EstimatorSpec::ClassicalDual { .. }) && model.is_mixture() {
        return Ok(InitCheck::Ok {
            condition: InitCondition::CompactBox,
            margin: f64::INFINITY,
        });
    }
    match model {
        ModelSpec::CauchyScale { eps } => {
            let at_eps = obj.value(&[eps])?.value;
            Ok(InitCheck::from_margin(InitCondition::CauchyBoundary, at_eps - v0))
        }
        ModelSpec::GaussMix2 { .. } => match est {
            EstimatorSpec::LogLikelihood => {
                // one mean at infinity: the other component takes all the weight and
                // its best mean is the sample mean
                let mean = obs.iter().sum::<f64>() / n;
                let bound = obj.separated_limit(0, 1.0, mean)?;
                Ok(InitCheck::from_margin(InitCondition::GaussLikelihood, bound - v0))
            }
            EstimatorSpec::Mdpd { .. } => {
                let inf = separated_infimum(obj, &[0])?;
                Ok(InitCheck::from_margin(InitCondition::GaussMdpd, inf.min(0.0) - v0))
            }
            EstimatorSpec::KernelDual { gamma, .. } => {
                let inf = separated_infimum(obj, &[0])?;
                Ok(InitCheck::from_margin(
                    InitCondition::GaussKernelDual,
                    inf.min(disjoint_bound(*gamma)) - v0,
                ))
            }
            EstimatorSpec::ClassicalDual { .. } => unreachable!("handled above"),
        },
        ModelSpec::WeibullMix2 { shape_min, .. } => match est {
            EstimatorSpec::LogLikelihood => {
                if obs.iter().any(|&y| y == weibull_spike(0) || y == weibull_spike(1)) {
                    return Ok(InitCheck::Violated {
                        condition: InitCondition::WeibullLikelihoodSpike,
                        margin: f64::NEG_INFINITY,
                    });
                }
                // the weight of the remaining component goes to one
                let mut bound = f64::INFINITY;
                for j in 0..2 {
                    let mins = brent_multistart(
                        |k| obj.separated_limit(j, 1.0, k).unwrap_or(f64::INFINITY),
                        shape_min,
                        SHAPE_MAX,
                        8,
                        true,
                        &scalar_options(),
                    )?;
                    bound = bound.min(mins[0].f);
                }
                Ok(InitCheck::from_margin(InitCondition::WeibullLikelihood, bound - v0))
            }
            EstimatorSpec::Mdpd { .. } => {
                let inf = separated_infimum(obj, &[0, 1])?;
                Ok(InitCheck::from_margin(InitCondition::WeibullMdpd, inf.min(0.0) - v0))
            }
            EstimatorSpec::KernelDual { gamma, .. } => {
                let inf = separated_infimum(obj, &[0, 1])?;
                Ok(InitCheck::from_margin(
                    InitCondition::WeibullKernelDual,
                    inf.min(disjoint_bound(*gamma)) - v0,
                ))
            }
            EstimatorSpec::ClassicalDual { .. } => unreachable!("handled above"),
        },
    }
}

/// `|1 / (gamma (gamma - 1))|` for positive `gamma != 1`, which for `gamma` in
/// `(0, 1)` is the kernel dual value of a model whose mass is disjoint from the
/// data. No finite cap otherwise.
fn disjoint_bound(gamma: f64) -> f64 {
    if gamma > 0.0 && gamma != 1.0 {
        (1.0 / (gamma * (gamma - 1.0))).abs()
    } else {
        f64::INFINITY
    }
}

fn scalar_options() -> OptimizerOptions {
    OptimizerOptions {
        max_evals: 300,
        x_tolerance: 1e-9,
        f_tolerance: 1e-12,
        initial_simplex_scale: 0.1,
    }
}

/// Infimum over the weight box and the remaining component's parameter of the
/// separated limits of the components in `comps`.
fn separated_infimum(obj: &Objective, comps: &[usize]) -> Result<f64> {
    let model = obj.model();
    let (eta, weibull) = match model {
        ModelSpec::GaussMix2 { eta } => (eta, false),
        ModelSpec::WeibullMix2 { eta, .. } => (eta, true),
        ModelSpec::CauchyScale { .. } => return Err(Error::InvalidInput("not a mixture".into())),
    };
    let shape_min = match model {
        ModelSpec::WeibullMix2 { shape_min, .. } => shape_min,
        _ => 0.0,
    };
    let obs = obj.observations();
    let mut sorted = obs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| sorted[((sorted.len() - 1) as f64 * p).round() as usize];
    let opts = OptimizerOptions {
        max_evals: 600,
        x_tolerance: 1e-8,
        f_tolerance: 1e-10,
        initial_simplex_scale: 0.2,
    };
    let mut best = f64::INFINITY;
    for &j in comps {
        // optimize over (w, theta), with the shape on a log scale
        let decode = |z: &[f64]| -> (f64, f64) {
            let w = z[0].clamp(eta, 1.0 - eta);
            let t = if weibull { z[1].exp().clamp(shape_min, SHAPE_MAX) } else { z[1] };
            (w, t)
        };
        let f = |z: &[f64]| -> f64 {
            let (w, t) = decode(z);
            let x = if j == 0 { [w, t, SHAPE_FAR] } else { [1.0 - w, SHAPE_FAR, t] };
            if weibull && !kernel_point_admissible(obj, &x) {
                return f64::INFINITY;
            }
            obj.separated_limit(j, w, t).unwrap_or(f64::INFINITY)
        };
        let thetas: Vec<f64> = if weibull {
            [0.5f64, 1.0, 2.0, 3.0].iter().map(|k| k.ln()).collect()
        } else {
            vec![q(0.25), q(0.5), q(0.75)]
        };
        for &t in &thetas {
            for &w in &[0.5, 1.0 - eta] {
                let z0 = [w, t];
                if !f(&z0).is_finite() {
                    continue;
                }
                let m = nelder_mead(f, &z0, &opts)?;
                best = best.min(m.f);
            }
        }
    }
    Ok(best)
}
