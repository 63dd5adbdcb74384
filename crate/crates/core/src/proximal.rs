//! Proximal-point iterations for minimizing an estimated divergence: the one-step
//! scheme over all parameters, the two-step scheme alternating weights and
//! component parameters, closed-form EM, and initialization checks.

use crate::divkernels::ProximalSpec;
use crate::error::{Error, Result};
use crate::models::{ModelSpec, ParamPoint, Sample};
use crate::numerics::{bfgs_box, brent_multistart, nelder_mead, OptimizerOptions};
use crate::objectives::{
    default_inner_bounds, kernel_admissible, EstimatorSpec, Objective, ObjectiveOptions, ProximalTerm,
};

mod init;

pub use init::{check_initialization, check_initialization_with, InitCheck, InitCondition};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    OneStep,
    TwoStep,
    ClosedFormEm,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_step" | "one-step" => Ok(Variant::OneStep),
            "two_step" | "two-step" => Ok(Variant::TwoStep),
            "em" | "closed_form_em" => Ok(Variant::ClosedFormEm),
            _ => Err(Error::Parse(format!("unknown algorithm variant '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub param_tol: f64,
    pub objective_tol: f64,
    pub max_iters: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            param_tol: 1e-6,
            objective_tol: 1e-8,
            max_iters: 200,
        }
    }
}

/// How each proximal step is solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSearch {
    /// Run Nelder-Mead from the current iterate before the gradient polish.
    pub use_simplex: bool,
    pub simplex: OptimizerOptions,
    /// Follow the simplex search by a projected BFGS run on the analytic gradient.
    pub polish: bool,
    pub polish_options: OptimizerOptions,
    /// Brent searches (weights in the two-step scheme, the Cauchy scale).
    pub scalar: OptimizerOptions,
    /// Log-spaced Brent pieces for one-dimensional models.
    pub pieces: usize,
}

impl Default for StepSearch {
    fn default() -> Self {
        Self {
            use_simplex: false,
            simplex: OptimizerOptions {
                max_evals: 2000,
                x_tolerance: 1e-7,
                f_tolerance: 1e-10,
                initial_simplex_scale: 0.05,
            },
            polish: true,
            polish_options: OptimizerOptions {
                max_evals: 400,
                x_tolerance: 1e-9,
                f_tolerance: 1e-8,
                initial_simplex_scale: 0.05,
            },
            scalar: OptimizerOptions {
                max_evals: 400,
                x_tolerance: 1e-12,
                f_tolerance: 1e-12,
                initial_simplex_scale: 0.1,
            },
            pieces: 8,
        }
    }
}

impl StepSearch {
    /// Tight step tolerances, for comparing iterates against closed forms.
    pub fn precise() -> Self {
        let mut s = Self::default();
        s.polish_options.x_tolerance = 1e-13;
        s.polish_options.f_tolerance = 1e-11;
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSpec {
    pub variant: Variant,
    pub psi: ProximalSpec,
    pub stop: StopRule,
    pub search: StepSearch,
}

impl Default for AlgorithmSpec {
    fn default() -> Self {
        Self::new(Variant::OneStep)
    }
}

impl AlgorithmSpec {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            psi: ProximalSpec::default(),
            stop: StopRule::default(),
            search: StepSearch::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.stop;
        if !(s.param_tol > 0.0 && s.objective_tol > 0.0) {
            return Err(Error::InvalidInput("stopping tolerances must be positive".into()));
        }
        if s.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be positive".into()));
        }
        self.search.simplex.validate()?;
        self.search.polish_options.validate()?;
        self.search.scalar.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TerminationReason {
    ParamTol,
    ObjectiveTol,
    MaxIters,
    /// The step search found nothing below the current value; the last point repeats.
    NoDecrease,
    /// Evaluation failed mid-run; the trace stops at the last good iterate.
    Failed(String),
}

impl TerminationReason {
    pub fn code(&self) -> &'static str {
        match self {
            TerminationReason::ParamTol => "param_tol",
            TerminationReason::ObjectiveTol => "objective_tol",
            TerminationReason::MaxIters => "max_iters",
            TerminationReason::NoDecrease => "no_decrease",
            TerminationReason::Failed(_) => "failed",
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, TerminationReason::Failed(_))
    }
}

/// Composite objective values around one two-step iteration: before, after the
/// weight step, after the component step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sandwich {
    pub before: f64,
    pub after_weights: f64,
    pub after_components: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateTrace {
    pub model: ModelSpec,
    pub points: Vec<ParamPoint>,
    /// Estimated divergence at each point (`-J / n` for the likelihood).
    pub objective_values: Vec<f64>,
    /// `D_psi(phi^(k+1), phi^k)` per iteration.
    pub proximal_values: Vec<f64>,
    pub step_norms: Vec<f64>,
    pub termination: TerminationReason,
    /// Two-step runs only.
    pub sandwich: Vec<Sandwich>,
}

impl IterateTrace {
    fn start(model: ModelSpec, x0: &[f64], value: f64) -> Result<Self> {
        Ok(Self {
            model,
            points: vec![model.point_from_free(x0)?],
            objective_values: vec![value],
            proximal_values: Vec::new(),
            step_norms: Vec::new(),
            termination: TerminationReason::MaxIters,
            sandwich: Vec::new(),
        })
    }

    pub fn iterations(&self) -> usize {
        self.step_norms.len()
    }

    pub fn last(&self) -> &ParamPoint {
        self.points.last().expect("a trace holds its starting point")
    }

    pub fn final_value(&self) -> f64 {
        *self.objective_values.last().expect("a trace holds its starting value")
    }

    fn push(&mut self, x: &[f64], value: f64, prox: f64, step: f64) -> Result<()> {
        self.points.push(self.model.point_from_free(x)?);
        self.objective_values.push(value);
        self.proximal_values.push(prox);
        self.step_norms.push(step);
        Ok(())
    }

    /// Largest increase of the objective between consecutive iterates (0 when
    /// the sequence is nonincreasing).
    pub fn max_increase(&self) -> f64 {
        self.objective_values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Largest excess of any iterate's objective over the starting value.
    pub fn max_excess_over_start(&self) -> f64 {
        let v0 = self.objective_values[0];
        self.objective_values.iter().map(|v| v - v0).fold(0.0, f64::max)
    }

    /// One row per iterate: index, free coordinates, objective, proximal value
    /// and step norm (empty for the starting point).
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["iter".to_string()];
        let coords: &[&str] = if self.model.is_mixture() {
            &["lambda", "theta1", "theta2"]
        } else {
            &["a"]
        };
        header.extend(coords.iter().map(|s| s.to_string()));
        header.extend(["objective", "proximal", "step_norm"].map(String::from));
        wr.write_record(&header)?;
        for (k, p) in self.points.iter().enumerate() {
            let mut row = vec![k.to_string()];
            row.extend(p.free().iter().map(|v| format!("{v:e}")));
            row.push(format!("{:e}", self.objective_values[k]));
            if k == 0 {
                row.extend([String::new(), String::new()]);
            } else {
                row.push(format!("{:e}", self.proximal_values[k - 1]));
                row.push(format!("{:e}", self.step_norms[k - 1]));
            }
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// `D_hat(x) + D_psi(x, phi^k)`, with errors as `+inf`.
fn composite(obj: &Objective, prox: &ProximalTerm, x: &[f64]) -> f64 {
    let v = obj.eval(x);
    if !v.is_finite() {
        return v;
    }
    let p = prox.value(x);
    if p.is_nan() {
        f64::INFINITY
    } else {
        v + p
    }
}

fn composite_grad(obj: &Objective, prox: &ProximalTerm, x: &[f64]) -> (f64, Vec<f64>) {
    match obj.value_and_gradient(x) {
        Ok((v, mut g)) => {
            let p = prox.value(x);
            for (gi, pi) in g.iter_mut().zip(prox.gradient(x)) {
                *gi += pi;
            }
            if p.is_finite() && g.iter().all(|v| v.is_finite()) {
                (v.value + p, g)
            } else {
                (f64::INFINITY, vec![0.0; x.len()])
            }
        }
        Err(_) => (f64::INFINITY, vec![0.0; x.len()]),
    }
}

/// Best point found for `min_x D_hat(x) + D_psi(x, phi^k)` over the free
/// coordinates listed in `free` (the others stay at `start`).
fn solve_step(
    obj: &Objective,
    prox: &ProximalTerm,
    start: &[f64],
    free: &[usize],
    search: &StepSearch,
) -> Result<(Vec<f64>, f64)> {
    let model = obj.model();
    let embed = |z: &[f64]| -> Vec<f64> {
        let mut x = start.to_vec();
        for (&i, &v) in free.iter().zip(z) {
            x[i] = v;
        }
        x
    };
    let z0: Vec<f64> = free.iter().map(|&i| start[i]).collect();
    let mut best = (start.to_vec(), composite(obj, prox, start));
    let consider = |x: Vec<f64>, f: f64, best: &mut (Vec<f64>, f64)| {
        if f < best.1 {
            *best = (x, f);
        }
    };

    if free.len() == 1 {
        let i = free[0];
        let (lo, hi) = scalar_range(obj, i, start);
        let log = lo > 0.0 && model.dim() == 1;
        let pieces = if model.dim() == 1 { search.pieces.max(1) } else { 1 };
        let mins = brent_multistart(|v| composite(obj, prox, &embed(&[v])), lo, hi, pieces, log, &search.scalar)?;
        for m in mins {
            consider(embed(&[m.x]), m.f, &mut best);
        }
    } else if search.use_simplex || !search.polish {
        let project = |z: &[f64]| -> Result<Vec<f64>> { model.project_free(&embed(z)) };
        let nm = nelder_mead(
            |z| match project(z) {
                Ok(x) => composite(obj, prox, &x),
                Err(_) => f64::INFINITY,
            },
            &z0,
            &search.simplex,
        )?;
        let x = project(&nm.x)?;
        let f = composite(obj, prox, &x);
        consider(x, f, &mut best);
    }

    if search.polish && best.1.is_finite() {
        let bounds = model.bounds();
        let fb: Vec<(f64, f64)> = free.iter().map(|&i| bounds[i]).collect();
        let zb: Vec<f64> = free.iter().map(|&i| best.0[i]).collect();
        let base = best.0.clone();
        let lift = |z: &[f64]| {
            let mut x = base.clone();
            for (&i, &v) in free.iter().zip(z) {
                x[i] = v;
            }
            x
        };
        let polished = bfgs_box(
            |z| {
                let (f, g) = composite_grad(obj, prox, &lift(z));
                (f, free.iter().map(|&i| g[i]).collect())
            },
            &zb,
            &fb,
            &search.polish_options,
        );
        if let Ok(m) = polished {
            let x = lift(&m.x);
            // re-evaluate through the value path so accepted values are consistent
            let f = composite(obj, prox, &x);
            consider(x, f, &mut best);
        }
    }
    Ok(best)
}

/// Search interval of coordinate `i` for Brent steps.
fn scalar_range(obj: &Objective, i: usize, _start: &[f64]) -> (f64, f64) {
    let model = obj.model();
    if model.dim() == 1 {
        default_inner_bounds(&model, obj.sample())[0]
    } else {
        model.bounds()[i]
    }
}

fn check_stop(stop: &StopRule, k: usize, step: f64, decrease: f64) -> Option<TerminationReason> {
    if step < stop.param_tol {
        Some(TerminationReason::ParamTol)
    } else if decrease < stop.objective_tol {
        Some(TerminationReason::ObjectiveTol)
    } else if k >= stop.max_iters {
        Some(TerminationReason::MaxIters)
    } else {
        None
    }
}

fn start_value(obj: &Objective, x0: &[f64]) -> Result<f64> {
    let v = obj.value(x0)?.value;
    if !v.is_finite() {
        return Err(Error::NonFinite(x0.to_vec()));
    }
    Ok(v)
}

/// One-step proximal iteration on a prepared objective.
pub fn one_step(obj: &Objective, phi0: &ParamPoint, algo: &AlgorithmSpec) -> Result<IterateTrace> {
    algo.validate()?;
    let model = obj.model();
    let mut x = model.check(phi0)?;
    let mut trace = IterateTrace::start(model, &x, start_value(obj, &x)?)?;
    let free: Vec<usize> = (0..model.dim()).collect();
    for k in 1..=algo.stop.max_iters {
        let current = trace.final_value();
        let prox = match ProximalTerm::new(model, &x, obj.observations(), algo.psi) {
            Ok(p) => p,
            Err(e) => {
                trace.termination = TerminationReason::Failed(e.to_string());
                return Ok(trace);
            }
        };
        let (next, c) = match solve_step(obj, &prox, &x, &free, &algo.search) {
            Ok(r) => r,
            Err(e) => {
                trace.termination = TerminationReason::Failed(e.to_string());
                return Ok(trace);
            }
        };
        if !(c < current) {
            trace.push(&x.clone(), current, 0.0, 0.0)?;
            trace.termination = TerminationReason::NoDecrease;
            return Ok(trace);
        }
        let value = obj.eval(&next);
        let step = norm(&next, &x);
        trace.push(&next, value, prox.value(&next), step)?;
        x = next;
        if let Some(reason) = check_stop(&algo.stop, k, step, current - value) {
            trace.termination = reason;
            return Ok(trace);
        }
    }
    Ok(trace)
}

/// Two-step proximal iteration on a prepared objective: a Brent step on the
/// weight, then a step on the component parameters, both against `phi^k`.
pub fn two_step(obj: &Objective, phi0: &ParamPoint, algo: &AlgorithmSpec) -> Result<IterateTrace> {
    algo.validate()?;
    let model = obj.model();
    if !model.is_mixture() {
        return Err(Error::InvalidInput(
            "the two-step scheme needs a mixture with weights and component parameters".into(),
        ));
    }
    let mut x = model.check(phi0)?;
    let mut trace = IterateTrace::start(model, &x, start_value(obj, &x)?)?;
    for k in 1..=algo.stop.max_iters {
        let current = trace.final_value();
        let prox = match ProximalTerm::new(model, &x, obj.observations(), algo.psi) {
            Ok(p) => p,
            Err(e) => {
                trace.termination = TerminationReason::Failed(e.to_string());
                return Ok(trace);
            }
        };
        let weights = solve_step(obj, &prox, &x, &[0], &algo.search);
        let (mid, c1) = match weights {
            Ok((m, c)) if c < current => (m, c),
            Ok(_) => (x.clone(), current),
            Err(e) => {
                trace.termination = TerminationReason::Failed(e.to_string());
                return Ok(trace);
            }
        };
        let (next, c2) = match solve_step(obj, &prox, &mid, &[1, 2], &algo.search) {
            Ok((n, c)) if c < c1 => (n, c),
            Ok(_) => (mid, c1),
            Err(e) => {
                trace.termination = TerminationReason::Failed(e.to_string());
                return Ok(trace);
            }
        };
        trace.sandwich.push(Sandwich {
            before: current,
            after_weights: c1,
            after_components: c2,
        });
        if !(c2 < current) {
            trace.push(&x.clone(), current, 0.0, 0.0)?;
            trace.termination = TerminationReason::NoDecrease;
            return Ok(trace);
        }
        let value = obj.eval(&next);
        let step = norm(&next, &x);
        trace.push(&next, value, prox.value(&next), step)?;
        x = next;
        if let Some(reason) = check_stop(&algo.stop, k, step, current - value) {
            trace.termination = reason;
            return Ok(trace);
        }
    }
    Ok(trace)
}

/// One-step proximal iteration (all parameters at once).
pub fn one_step_run(
    model: &ModelSpec,
    estimator: &EstimatorSpec,
    sample: &Sample,
    phi0: &ParamPoint,
    algo: &AlgorithmSpec,
) -> Result<IterateTrace> {
    let obj = Objective::new(*model, estimator.clone(), sample, &ObjectiveOptions::default())?;
    one_step(&obj, phi0, algo)
}

/// Two-step proximal iteration (weights, then component parameters).
pub fn two_step_run(
    model: &ModelSpec,
    estimator: &EstimatorSpec,
    sample: &Sample,
    phi0: &ParamPoint,
    algo: &AlgorithmSpec,
) -> Result<IterateTrace> {
    let obj = Objective::new(*model, estimator.clone(), sample, &ObjectiveOptions::default())?;
    two_step(&obj, phi0, algo)
}

/// Runs the variant selected in `algo` on a prepared objective.
pub fn run(obj: &Objective, phi0: &ParamPoint, algo: &AlgorithmSpec) -> Result<IterateTrace> {
    match algo.variant {
        Variant::OneStep => one_step(obj, phi0, algo),
        Variant::TwoStep => two_step(obj, phi0, algo),
        Variant::ClosedFormEm => {
            if *obj.estimator() != EstimatorSpec::LogLikelihood {
                return Err(Error::InvalidInput("closed-form EM needs the log-likelihood estimator".into()));
            }
            closed_form_em(&obj.model(), obj.sample(), phi0, &algo.stop)
        }
    }
}

/// EM for the Gaussian mixture: weights are posterior means (clamped to the
/// weight box) and means are posterior-weighted sample means. Objective values
/// are `-J / n` and proximal values use `psi(t) = -log t + t - 1`.
pub fn closed_form_em(model: &ModelSpec, sample: &Sample, phi0: &ParamPoint, stop: &StopRule) -> Result<IterateTrace> {
    let ModelSpec::GaussMix2 { eta } = *model else {
        return Err(Error::InvalidInput("closed-form EM is only available for the Gaussian mixture".into()));
    };
    sample.validate()?;
    let obs = &sample.observations;
    let n = obs.len() as f64;
    let mut x = model.check(phi0)?;
    let neg_mean_ll = |x: &[f64]| -> f64 { -obs.iter().map(|&y| model.log_pdf(x, y)).sum::<f64>() / n };
    let mut trace = IterateTrace::start(*model, &x, neg_mean_ll(&x))?;
    for k in 1..=stop.max_iters {
        let (mut s1, mut s2, mut sy1, mut sy2) = (0.0, 0.0, 0.0, 0.0);
        for &y in obs {
            let (h1, h2) = model.mixture_posteriors(&x, y);
            s1 += h1;
            s2 += h2;
            sy1 += h1 * y;
            sy2 += h2 * y;
        }
        if !(s1 > 0.0 && s2 > 0.0) {
            trace.termination = TerminationReason::Failed("a component lost all posterior mass".into());
            return Ok(trace);
        }
        let next = vec![(s1 / n).clamp(eta, 1.0 - eta), sy1 / s1, sy2 / s2];
        let prox = ProximalTerm::new(*model, &x, obs, ProximalSpec::ModifiedKl)?.value(&next);
        let current = trace.final_value();
        let value = neg_mean_ll(&next);
        let step = norm(&next, &x);
        trace.push(&next, value, prox, step)?;
        x = next;
        if let Some(reason) = check_stop(stop, k, step, current - value) {
            trace.termination = reason;
            return Ok(trace);
        }
    }
    Ok(trace)
}

/// Whether `x` keeps the kernel estimator finite; used to skip limits of
/// boundary searches outside the admissible region.
pub(crate) fn kernel_point_admissible(obj: &Objective, x: &[f64]) -> bool {
    match obj.estimator() {
        EstimatorSpec::KernelDual { gamma, kernel } => {
            kernel_admissible(&obj.model(), *gamma, kernel.kind, x, obj.bandwidth().unwrap_or(1.0)).is_ok()
        }
        _ => true,
    }
}
