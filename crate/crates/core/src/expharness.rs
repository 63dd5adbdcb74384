//! Monte-Carlo experiments: seeded samples, contamination, error metrics and
//! result tables.

use std::io::Write;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform, Weibull};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{ModelSpec, ParamPoint, Provenance, Sample};
use crate::numerics::{integrate_domain, Domain, QuadratureOptions};
use crate::objectives::{weibull_power_integrable, EstimatorSpec, Objective, ObjectiveOptions};
use crate::proximal::{check_initialization_with, run, AlgorithmSpec, Variant};

const CONTAMINATED: usize = 10;

fn metric_quadrature() -> QuadratureOptions {
    QuadratureOptions {
        abs_tol: 1e-11,
        rel_tol: 1e-10,
        max_subdivisions: 400,
        gauss_legendre_order: 20,
    }
}

/// Integration domain covering both densities; symmetric in its arguments.
fn metric_domain(model: &ModelSpec, xa: &[f64], xb: &[f64]) -> Domain {
    let (a, b) = (model.domain(xa), model.domain(xb));
    let center = 0.5 * (a.center + b.center);
    let scale = a.scale.max(b.scale) + 0.5 * (a.center - b.center).abs();
    Domain { center, scale, ..a }
}

/// Total variation distance `1/2 int |p_hat - p_true|`.
pub fn tvd_error(model: &ModelSpec, phi_hat: &ParamPoint, phi_true: &ParamPoint) -> Result<f64> {
    let (xh, xt) = (model.check(phi_hat)?, model.check(phi_true)?);
    let r = integrate_domain(
        |t| (model.pdf(&xh, t) - model.pdf(&xt, t)).abs(),
        &metric_domain(model, &xh, &xt),
        &metric_quadrature(),
    )?;
    Ok((0.5 * r.value).clamp(0.0, 1.0))
}

/// `int (p_hat - p_true)^2 / p_true`, or `+inf` when the integral diverges.
pub fn chi2_error(model: &ModelSpec, phi_hat: &ParamPoint, phi_true: &ParamPoint) -> Result<f64> {
    let (xh, xt) = (model.check(phi_hat)?, model.check(phi_true)?);
    if matches!(model, ModelSpec::WeibullMix2 { .. }) && !weibull_power_integrable(2.0, &xh, &xt) {
        return Ok(f64::INFINITY);
    }
    let r = integrate_domain(
        |t| {
            let (lh, lt) = (model.log_pdf(&xh, t), model.log_pdf(&xt, t));
            if lh == f64::NEG_INFINITY && lt == f64::NEG_INFINITY {
                return 0.0;
            }
            // (p - q)^2 / q = q (p/q - 1)^2, kept in logs since p/q can overflow
            (lt + 2.0 * ln_abs_expm1(lh - lt)).exp()
        },
        &metric_domain(model, &xh, &xt),
        &metric_quadrature(),
    );
    match r {
        Ok(i) if i.value.is_finite() => Ok(i.value.max(0.0)),
        _ => Ok(f64::INFINITY),
    }
}

fn ln_abs_expm1(d: f64) -> f64 {
    if d > 30.0 {
        d + (-(-d).exp()).ln_1p()
    } else {
        d.exp_m1().abs().ln()
    }
}

/// Replaces the 5 smallest observations by `U[-5, -2]` draws and the 5 largest
/// by `U[2, 5]` draws.
pub fn contaminate_gaussian<R: Rng + ?Sized>(sample: &Sample, rng: &mut R) -> Result<Sample> {
    let n = sample.len();
    if n < CONTAMINATED {
        return Err(Error::InvalidInput(format!("contamination needs n >= {CONTAMINATED}, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sample.observations[i].total_cmp(&sample.observations[j]));
    let (low, high) = (Uniform::new_inclusive(-5.0, -2.0), Uniform::new_inclusive(2.0, 5.0));
    let mut obs = sample.observations.clone();
    for &i in &order[..CONTAMINATED / 2] {
        obs[i] = low.sample(rng);
    }
    for &i in &order[n - CONTAMINATED / 2..] {
        obs[i] = high.sample(rng);
    }
    Sample::new(obs, Provenance::Contaminated("gaussian_tails".into()), sample.seed)
}

/// Replaces 10 uniformly chosen observations by Weibull(shape 0.9, scale 3) draws.
pub fn contaminate_weibull<R: Rng + ?Sized>(sample: &Sample, rng: &mut R) -> Result<Sample> {
    let n = sample.len();
    if n < CONTAMINATED {
        return Err(Error::InvalidInput(format!("contamination needs n >= {CONTAMINATED}, got {n}")));
    }
    let outlier = Weibull::new(3.0, 0.9).map_err(|e| Error::Domain(e.to_string()))?;
    let mut obs = sample.observations.clone();
    for i in index::sample(rng, n, CONTAMINATED) {
        obs[i] = outlier.sample(rng);
    }
    Sample::new(obs, Provenance::Contaminated("weibull_replace".into()), sample.seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contamination {
    None,
    GaussianTails,
    WeibullReplace,
}

impl Contamination {
    pub fn name(&self) -> &'static str {
        match self {
            Contamination::None => "none",
            Contamination::GaussianTails => "gaussian_tails",
            Contamination::WeibullReplace => "weibull_replace",
        }
    }

    pub fn apply<R: Rng + ?Sized>(&self, sample: Sample, rng: &mut R) -> Result<Sample> {
        match self {
            Contamination::None => Ok(sample),
            Contamination::GaussianTails => contaminate_gaussian(&sample, rng),
            Contamination::WeibullReplace => contaminate_weibull(&sample, rng),
        }
    }
}

impl std::str::FromStr for Contamination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "clean" => Ok(Contamination::None),
            "gaussian_tails" => Ok(Contamination::GaussianTails),
            "weibull_replace" => Ok(Contamination::WeibullReplace),
            _ => Err(Error::Parse(format!("unknown contamination '{s}'"))),
        }
    }
}

/// Starting point of each run.
#[derive(Debug, Clone, PartialEq)]
pub enum InitPolicy {
    Fixed(ParamPoint),
    /// Each free coordinate of the truth scaled by a factor in `[1 - rel, 1 + rel]`,
    /// redrawn until the initialization check passes. After `retries` failed draws
    /// the run starts from `fallback`, or fails when there is none.
    TruthPerturbed {
        rel: f64,
        retries: usize,
        fallback: Option<ParamPoint>,
    },
}

impl Default for InitPolicy {
    fn default() -> Self {
        InitPolicy::TruthPerturbed {
            rel: 0.1,
            retries: 10,
            fallback: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Row label in emitted tables.
    pub label: String,
    pub model: ModelSpec,
    pub truth: ParamPoint,
    pub n: usize,
    pub runs: usize,
    pub estimator: EstimatorSpec,
    pub algorithm: AlgorithmSpec,
    pub contamination: Contamination,
    pub base_seed: u64,
    pub init: InitPolicy,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.model.check(&self.truth)?;
        self.algorithm.validate()?;
        if self.runs == 0 {
            return Err(Error::InvalidInput("runs must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(Error::InvalidInput("samples need at least 2 observations".into()));
        }
        if self.contamination != Contamination::None && self.n < CONTAMINATED {
            return Err(Error::InvalidInput(format!("contamination needs n >= {CONTAMINATED}")));
        }
        if let InitPolicy::TruthPerturbed { rel, .. } = self.init {
            if !(0.0..1.0).contains(&rel) {
                return Err(Error::InvalidInput(format!("perturbation must lie in [0, 1), got {rel}")));
            }
        }
        if self.algorithm.variant == Variant::ClosedFormEm
            && (self.estimator != EstimatorSpec::LogLikelihood || !matches!(self.model, ModelSpec::GaussMix2 { .. }))
        {
            return Err(Error::InvalidInput(
                "closed-form EM needs the Gaussian mixture and the log-likelihood".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub index: usize,
    pub seed: u64,
    pub estimate: Option<ParamPoint>,
    pub tvd: f64,
    /// Square root of the chi-square error; `+inf` when it diverges.
    pub sqrt_chi2: f64,
    pub iterations: usize,
    pub termination: String,
    /// Whether the starting point passed the initialization check.
    pub init_ok: bool,
    pub used_fallback: bool,
    /// Monotone-decrease and sublevel-set violations of the trace (0 when clean).
    pub max_increase: f64,
    pub max_excess: f64,
    pub error: Option<String>,
}

impl RunOutcome {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Stat {
            mean,
            sd,
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub label: String,
    pub estimator: String,
    pub algorithm: String,
    pub contamination: String,
    pub runs: Vec<RunOutcome>,
    pub tvd: Option<Stat>,
    /// Over runs with a finite chi-square error.
    pub sqrt_chi2: Option<Stat>,
    pub infinite_chi2: usize,
    pub iterations: Option<Stat>,
    pub failures: usize,
}

fn algorithm_name(a: &AlgorithmSpec) -> &'static str {
    match a.variant {
        Variant::OneStep => "one_step",
        Variant::TwoStep => "two_step",
        Variant::ClosedFormEm => "em",
    }
}

fn perturb<R: Rng + ?Sized>(model: &ModelSpec, truth: &[f64], rel: f64, rng: &mut R) -> Result<ParamPoint> {
    let raw: Vec<f64> = truth
        .iter()
        .map(|v| v * (1.0 + rel * rng.gen_range(-1.0..=1.0)))
        .collect();
    model.feasible_project(&raw)
}

fn run_one(cfg: &ExperimentConfig, index: usize) -> RunOutcome {
    let seed = cfg.base_seed.wrapping_add(index as u64);
    let mut out = RunOutcome {
        index,
        seed,
        estimate: None,
        tvd: f64::NAN,
        sqrt_chi2: f64::NAN,
        iterations: 0,
        termination: String::new(),
        init_ok: false,
        used_fallback: false,
        max_increase: 0.0,
        max_excess: 0.0,
        error: None,
    };
    if let Err(e) = run_one_inner(cfg, seed, &mut out) {
        out.error = Some(e.to_string());
    }
    out
}

fn run_one_inner(cfg: &ExperimentConfig, seed: u64, out: &mut RunOutcome) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs = cfg.model.sample(&cfg.truth, cfg.n, &mut rng)?;
    let sample = cfg
        .contamination
        .apply(Sample::new(obs, Provenance::Clean, seed)?, &mut rng)?;
    let obj = Objective::new(cfg.model, cfg.estimator.clone(), &sample, &ObjectiveOptions::default())?;
    let phi0 = match &cfg.init {
        InitPolicy::Fixed(p) => {
            out.init_ok = check_initialization_with(&obj, p).map(|c| c.is_ok()).unwrap_or(false);
            p.clone()
        }
        InitPolicy::TruthPerturbed { rel, retries, fallback } => {
            let truth = cfg.model.check(&cfg.truth)?;
            let mut chosen = None;
            for _ in 0..(*retries).max(1) {
                let p = perturb(&cfg.model, &truth, *rel, &mut rng)?;
                if check_initialization_with(&obj, &p).map(|c| c.is_ok()).unwrap_or(false) {
                    chosen = Some(p);
                    break;
                }
            }
            match (chosen, fallback) {
                (Some(p), _) => {
                    out.init_ok = true;
                    p
                }
                (None, Some(f)) => {
                    out.used_fallback = true;
                    out.init_ok = check_initialization_with(&obj, f).map(|c| c.is_ok()).unwrap_or(false);
                    f.clone()
                }
                (None, None) => {
                    return Err(Error::InvalidInput(format!(
                        "no starting point passed the initialization check in {retries} draws"
                    )))
                }
            }
        }
    };
    let trace = run(&obj, &phi0, &cfg.algorithm)?;
    out.iterations = trace.iterations();
    out.termination = trace.termination.code().to_string();
    out.max_increase = trace.max_increase();
    out.max_excess = trace.max_excess_over_start();
    if let crate::proximal::TerminationReason::Failed(msg) = &trace.termination {
        return Err(Error::Optimizer(msg.clone()));
    }
    let est = trace.last().clone();
    out.tvd = tvd_error(&cfg.model, &est, &cfg.truth)?;
    out.sqrt_chi2 = chi2_error(&cfg.model, &est, &cfg.truth)?.sqrt();
    out.estimate = Some(cfg.model.canonicalize(&est));
    Ok(())
}

/// Runs every replication of `config` (in parallel) and aggregates the errors.
/// Replication `i` uses the seed `base_seed + i`, so the result does not depend
/// on scheduling.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let runs: Vec<RunOutcome> = (0..config.runs).into_par_iter().map(|i| run_one(config, i)).collect();
    Ok(summarize(config, runs))
}

fn summarize(cfg: &ExperimentConfig, runs: Vec<RunOutcome>) -> ExperimentSummary {
    let ok: Vec<&RunOutcome> = runs.iter().filter(|r| r.succeeded()).collect();
    let tvd: Vec<f64> = ok.iter().map(|r| r.tvd).collect();
    let chi: Vec<f64> = ok.iter().map(|r| r.sqrt_chi2).filter(|v| v.is_finite()).collect();
    let iters: Vec<f64> = ok.iter().map(|r| r.iterations as f64).collect();
    ExperimentSummary {
        label: cfg.label.clone(),
        estimator: cfg.estimator.name(),
        algorithm: algorithm_name(&cfg.algorithm).to_string(),
        contamination: cfg.contamination.name().to_string(),
        infinite_chi2: ok.len() - chi.len(),
        failures: runs.len() - ok.len(),
        tvd: Stat::of(&tvd),
        sqrt_chi2: Stat::of(&chi),
        iterations: Stat::of(&iters),
        runs,
    }
}

/// `v` with 4 significant digits in plain decimal notation; `inf` / `nan` otherwise.
pub fn format_sig4(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0.000".into();
    }
    // round first so that 9.9996 becomes 10.00, not 10.000
    let mut mag = v.abs().log10().floor() as i32;
    let scale = 10f64.powi(3 - mag);
    if ((v.abs() * scale).round() / scale).log10().floor() as i32 > mag {
        mag += 1;
    }
    let decimals = (3 - mag).max(0) as usize;
    format!("{v:.decimals$}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Text,
}

const TABLE_HEADER: [&str; 11] = [
    "label",
    "estimator",
    "algorithm",
    "contamination",
    "runs",
    "failures",
    "tvd_mean",
    "tvd_sd",
    "sqrt_chi2_mean",
    "sqrt_chi2_sd",
    "iterations_mean",
];

fn table_row(s: &ExperimentSummary) -> Vec<String> {
    let stat = |x: Option<Stat>, inf: bool| -> (String, String) {
        match x {
            _ if inf => ("inf".into(), "inf".into()),
            Some(st) => (format_sig4(st.mean), format_sig4(st.sd)),
            None => ("nan".into(), "nan".into()),
        }
    };
    let (tm, ts) = stat(s.tvd, false);
    // a diverging chi-square error in any run makes the mean infinite
    let (cm, cs) = stat(s.sqrt_chi2, s.infinite_chi2 > 0);
    vec![
        s.label.clone(),
        s.estimator.clone(),
        s.algorithm.clone(),
        s.contamination.clone(),
        s.runs.len().to_string(),
        s.failures.to_string(),
        tm,
        ts,
        cm,
        cs,
        s.iterations.map_or("nan".into(), |st| format_sig4(st.mean)),
    ]
}

/// Writes one row per summary, as CSV or as an aligned text table.
pub fn emit_table<W: Write>(summaries: &[ExperimentSummary], format: TableFormat, mut w: W) -> Result<()> {
    if summaries.is_empty() {
        return Err(Error::InvalidInput("no summaries to tabulate".into()));
    }
    let rows: Vec<Vec<String>> = summaries.iter().map(table_row).collect();
    match format {
        TableFormat::Csv => {
            let mut wr = csv::Writer::from_writer(w);
            wr.write_record(TABLE_HEADER)?;
            for r in &rows {
                wr.write_record(r)?;
            }
            wr.flush()?;
        }
        TableFormat::Text => {
            let mut widths: Vec<usize> = TABLE_HEADER.iter().map(|h| h.len()).collect();
            for r in &rows {
                for (wd, c) in widths.iter_mut().zip(r) {
                    *wd = (*wd).max(c.len());
                }
            }
            let line = |cells: Vec<&str>| -> String {
                cells
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(i, (c, &wd))| if i < 4 { format!("{c:<wd$}") } else { format!("{c:>wd$}") })
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            writeln!(w, "{}", line(TABLE_HEADER.to_vec()))?;
            for r in &rows {
                writeln!(w, "{}", line(r.iter().map(String::as_str).collect()))?;
            }
        }
    }
    Ok(())
}

/// Per-run results as CSV: seed, estimate (canonical order), metrics, iterations.
pub fn write_runs_csv<W: Write>(summary: &ExperimentSummary, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "run", "seed", "estimate", "tvd", "sqrt_chi2", "iterations", "termination", "init_ok", "fallback", "error",
    ])?;
    for r in &summary.runs {
        let est = r.estimate.as_ref().map_or(String::new(), |p| {
            p.free().iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ")
        });
        wr.write_record([
            r.index.to_string(),
            r.seed.to_string(),
            est,
            format!("{:e}", r.tvd),
            format!("{:e}", r.sqrt_chi2),
            r.iterations.to_string(),
            r.termination.clone(),
            r.init_ok.to_string(),
            r.used_fallback.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
