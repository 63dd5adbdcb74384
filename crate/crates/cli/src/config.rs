//! Flat key-value settings, read from a TOML file and overridden by flags.

use std::path::{Path, PathBuf};

use clap::Args;
use proxdiv::expharness::{Contamination, ExperimentConfig, InitPolicy, TableFormat};
use proxdiv::kde::{Bandwidth, KernelKind, KernelSpec};
use proxdiv::models::{ModelSpec, ParamPoint, Provenance, Sample};
use proxdiv::objectives::EstimatorSpec;
use proxdiv::proximal::{AlgorithmSpec, StopRule, Variant};
use proxdiv::divkernels::ProximalSpec;
use proxdiv::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Every setting is optional; unset keys take the defaults listed in the help.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// gauss_mix2, weibull_mix2 or cauchy_scale [default: gauss_mix2]
    #[arg(long)]
    pub model: Option<String>,
    /// True parameter, lambda,theta1,theta2 (or the scale a)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub truth: Option<Vec<f64>>,
    /// Starting parameter; defaults to the truth
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub init: Option<Vec<f64>>,
    /// Sample size when a sample is drawn [default: 100]
    #[arg(long)]
    pub n: Option<usize>,
    /// Monte-Carlo runs [default: 100]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Cressie-Read exponent of the dual estimators [default: 0.5]
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    /// Density power divergence exponent [default: 0.5]
    #[arg(long)]
    pub a: Option<f64>,
    /// classical, kernel, mdpd or likelihood [default: likelihood]
    #[arg(long)]
    pub estimator: Option<String>,
    /// one_step, two_step or em [default: one_step]
    #[arg(long)]
    pub algorithm: Option<String>,
    /// Proximal kernel: sqrt_half or modified_kl [default: sqrt_half]
    #[arg(long)]
    pub psi: Option<String>,
    /// gaussian, epanechnikov or cauchy [default: gaussian]
    #[arg(long)]
    pub kernel: Option<String>,
    /// Kernel bandwidth; Silverman's rule when unset
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// none, gaussian_tails or weibull_replace [default: none]
    #[arg(long)]
    pub contamination: Option<String>,
    /// Seed of the drawn sample, or the base seed of the runs [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Observations as a one-column CSV; drawn from the truth when unset
    #[arg(long)]
    pub sample: Option<PathBuf>,
    #[arg(long)]
    pub param_tol: Option<f64>,
    #[arg(long)]
    pub objective_tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Relative perturbation of the truth for the starts of the runs [default: 0.1]
    #[arg(long)]
    pub perturb: Option<f64>,
    /// Perturbed draws tried before falling back [default: 10]
    #[arg(long)]
    pub retries: Option<usize>,
    /// Start from the truth when every perturbed draw fails the check [default: false]
    #[arg(long)]
    pub fallback_truth: Option<bool>,
    /// Table row label
    #[arg(long)]
    pub label: Option<String>,
    /// csv or text [default: csv]
    #[arg(long)]
    pub format: Option<String>,
    /// Output file; standard output when unset
    #[arg(long)]
    pub output: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $(if $top.$f.is_some() { $base.$f = $top.$f.clone(); })*
    };
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// `self` with every key set in `top` replaced.
    pub fn overlay(mut self, top: &Settings) -> Self {
        overlay!(
            self, top, model, truth, init, n, runs, gamma, a, estimator, algorithm, psi, kernel, bandwidth,
            contamination, seed, sample, param_tol, objective_tol, max_iters, perturb, retries, fallback_truth,
            label, format, output
        );
        self
    }

    pub fn model(&self) -> Result<ModelSpec> {
        match self.model.as_deref().unwrap_or("gauss_mix2") {
            "gauss_mix2" | "gauss" => Ok(ModelSpec::gauss_mix2()),
            "weibull_mix2" | "weibull" => Ok(ModelSpec::weibull_mix2()),
            "cauchy_scale" | "cauchy" => Ok(ModelSpec::cauchy_scale()),
            other => Err(Error::Parse(format!("unknown model {other:?}"))),
        }
    }

    fn point(&self, model: &ModelSpec, v: &[f64], key: &str) -> Result<ParamPoint> {
        if v.len() != model.dim() {
            return Err(Error::InvalidInput(format!(
                "{key} needs {} values for {}, got {}",
                model.dim(),
                model.name(),
                v.len()
            )));
        }
        model.point_from_free(v)
    }

    pub fn truth(&self, model: &ModelSpec) -> Result<ParamPoint> {
        let v = self
            .truth
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("truth is required".into()))?;
        self.point(model, v, "truth")
    }

    /// The starting point: `init`, else the truth.
    pub fn start(&self, model: &ModelSpec) -> Result<ParamPoint> {
        match &self.init {
            Some(v) => self.point(model, v, "init"),
            None => self.truth(model),
        }
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        let kind: KernelKind = self.kernel.as_deref().unwrap_or("gaussian").parse()?;
        let bandwidth = match self.bandwidth {
            Some(w) => Bandwidth::Explicit(w),
            None => Bandwidth::Silverman,
        };
        Ok(KernelSpec { kind, bandwidth })
    }

    pub fn estimator(&self) -> Result<EstimatorSpec> {
        let gamma = self.gamma.unwrap_or(0.5);
        match self.estimator.as_deref().unwrap_or("likelihood") {
            "classical" => Ok(EstimatorSpec::classical(gamma)),
            "kernel" => Ok(EstimatorSpec::kernel(gamma, self.kernel()?)),
            "mdpd" => Ok(EstimatorSpec::Mdpd { a: self.a.unwrap_or(0.5) }),
            "likelihood" | "mle" => Ok(EstimatorSpec::LogLikelihood),
            other => Err(Error::Parse(format!("unknown estimator {other:?}"))),
        }
    }

    pub fn algorithm(&self) -> Result<AlgorithmSpec> {
        let variant: Variant = self.algorithm.as_deref().unwrap_or("one_step").parse()?;
        let psi = match self.psi.as_deref().unwrap_or("sqrt_half") {
            "sqrt_half" => ProximalSpec::SqrtHalf,
            "modified_kl" => ProximalSpec::ModifiedKl,
            other => return Err(Error::Parse(format!("unknown proximal kernel {other:?}"))),
        };
        let d = StopRule::default();
        let mut algo = AlgorithmSpec::new(variant);
        algo.psi = psi;
        algo.stop = StopRule {
            param_tol: self.param_tol.unwrap_or(d.param_tol),
            objective_tol: self.objective_tol.unwrap_or(d.objective_tol),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
        };
        algo.validate()?;
        Ok(algo)
    }

    pub fn contamination(&self) -> Result<Contamination> {
        self.contamination.as_deref().unwrap_or("none").parse()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn format(&self) -> Result<TableFormat> {
        match self.format.as_deref().unwrap_or("csv") {
            "csv" => Ok(TableFormat::Csv),
            "text" => Ok(TableFormat::Text),
            other => Err(Error::Parse(format!("unknown table format {other:?}"))),
        }
    }

    /// The sample file when given, else `n` draws from the truth followed by the
    /// contamination, all from one stream seeded with `seed`.
    pub fn sample(&self, model: &ModelSpec) -> Result<Sample> {
        if let Some(path) = &self.sample {
            let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let mut s = Sample::read_csv(f)?;
            s.provenance = Provenance::External(path.display().to_string());
            return Ok(s);
        }
        let truth = self.truth(model)?;
        let n = self.n.unwrap_or(100);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed());
        let obs = model.sample(&truth, n, &mut rng)?;
        let clean = Sample::new(obs, Provenance::Clean, self.seed())?;
        self.contamination()?.apply(clean, &mut rng)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let model = self.model()?;
        let truth = self.truth(&model)?;
        let estimator = self.estimator()?;
        let init = match &self.init {
            Some(v) => InitPolicy::Fixed(self.point(&model, v, "init")?),
            None => InitPolicy::TruthPerturbed {
                rel: self.perturb.unwrap_or(0.1),
                retries: self.retries.unwrap_or(10),
                fallback: self.fallback_truth.unwrap_or(false).then(|| truth.clone()),
            },
        };
        let config = ExperimentConfig {
            label: self.label.clone().unwrap_or_else(|| estimator.name()),
            model,
            truth,
            n: self.n.unwrap_or(100),
            runs: self.runs.unwrap_or(100),
            estimator,
            algorithm: self.algorithm()?,
            contamination: self.contamination()?,
            base_seed: self.seed(),
            init,
        };
        config.validate()?;
        Ok(config)
    }
}
