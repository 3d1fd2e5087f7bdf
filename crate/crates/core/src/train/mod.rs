//! Maximum-likelihood fitting of kernel, filter and noise parameters.

pub mod optim;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covops::{ConvKernelPair, CovMethod};
use crate::deconv::{Deconvolver, ObservationSet};
use crate::error::{param, GpdcError, Result};
use crate::gp::rng_from_seed;
use crate::kernels::{DiscreteFilter, FilterSpec, KernelSpec};

/// Lower bound applied to the SM frequency before taking its logarithm.
const FREQ_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    NelderMead,
    Gradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default = "default_optimizer")]
    pub optimizer: Optimizer,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_optimizer() -> Optimizer {
    Optimizer::NelderMead
}

fn default_max_iters() -> usize {
    2000
}

fn default_restarts() -> usize {
    1
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { optimizer: default_optimizer(), max_iters: default_max_iters(), restarts: default_restarts(), seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Transform {
    Log,
    LogFloor(f64),
    Identity,
}

impl Transform {
    fn forward(self, v: f64) -> f64 {
        match self {
            Self::Log => v.ln(),
            Self::LogFloor(floor) => v.max(floor).ln(),
            Self::Identity => v,
        }
    }

    fn inverse(self, u: f64) -> f64 {
        match self {
            Self::Log | Self::LogFloor(_) => u.exp(),
            Self::Identity => u,
        }
    }
}

/// Source, filter and noise parameters with per-parameter free/fixed flags.
///
/// Parameter names: `source.sigma`, `source.lengthscale`, `source.width`,
/// `source.freq`, `filter.sigma`, `filter.lengthscale`, `filter.width`,
/// `filter.weights` (all discrete weights at once) and `noise` (σ_n).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainableModel {
    source: KernelSpec,
    filter: FilterSpec,
    noise_sd: f64,
    method: Option<CovMethod>,
    free: Vec<bool>,
}

impl TrainableModel {
    /// All parameters free except the source magnitude when the filter
    /// carries its own magnitude (they are not separately identifiable).
    pub fn new(source: KernelSpec, filter: FilterSpec, noise_var: f64) -> Result<Self> {
        source.validate()?;
        filter.validate()?;
        if !(noise_var.is_finite() && noise_var >= 0.0) {
            return param(format!("noise variance must be >= 0, got {noise_var}"));
        }
        let mut m = Self { source, filter, noise_sd: noise_var.sqrt(), method: None, free: Vec::new() };
        m.free = vec![true; m.names().len()];
        if m.filter_magnitude_free() {
            m.source = m.source.with_sigma(1.0);
            m.set_free("source.sigma", false)?;
        }
        Ok(m)
    }

    pub fn with_method(mut self, method: CovMethod) -> Self {
        self.method = Some(method);
        self
    }

    pub fn source(&self) -> &KernelSpec {
        &self.source
    }

    pub fn filter(&self) -> &FilterSpec {
        &self.filter
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_sd * self.noise_sd
    }

    pub fn method(&self) -> CovMethod {
        self.method.unwrap_or_else(|| CovMethod::auto(&self.source, &self.filter))
    }

    fn layout(&self) -> Vec<(String, Transform, f64)> {
        let mut out = Vec::new();
        match self.source {
            KernelSpec::Se { sigma, lengthscale, .. } => {
                out.push(("source.sigma".into(), Transform::Log, sigma));
                out.push(("source.lengthscale".into(), Transform::Log, lengthscale));
            }
            KernelSpec::Sinc { sigma, width } => {
                out.push(("source.sigma".into(), Transform::Log, sigma));
                out.push(("source.width".into(), Transform::Log, width));
            }
            KernelSpec::Sm { sigma, lengthscale, freq } => {
                out.push(("source.sigma".into(), Transform::Log, sigma));
                out.push(("source.lengthscale".into(), Transform::Log, lengthscale));
                out.push(("source.freq".into(), Transform::LogFloor(FREQ_FLOOR), freq));
            }
        }
        match &self.filter {
            FilterSpec::Se { sigma, lengthscale } => {
                out.push(("filter.sigma".into(), Transform::Log, *sigma));
                out.push(("filter.lengthscale".into(), Transform::Log, *lengthscale));
            }
            FilterSpec::Sinc { sigma, width } | FilterSpec::Triangular { sigma, width } => {
                out.push(("filter.sigma".into(), Transform::Log, *sigma));
                out.push(("filter.width".into(), Transform::Log, *width));
            }
            FilterSpec::Discrete(d) => {
                for (i, w) in d.weights().iter().enumerate() {
                    out.push((format!("filter.weights[{i}]"), Transform::Identity, *w));
                }
            }
        }
        out.push(("noise".into(), Transform::Log, self.noise_sd));
        out
    }

    /// Parameter names in vector order.
    pub fn names(&self) -> Vec<String> {
        self.layout().into_iter().map(|(n, _, _)| n).collect()
    }

    fn matching(&self, name: &str) -> Vec<usize> {
        self.names()
            .iter()
            .enumerate()
            .filter(|(_, n)| n.as_str() == name || (name == "filter.weights" && n.starts_with("filter.weights[")))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn set_free(&mut self, name: &str, free: bool) -> Result<()> {
        let idx = self.matching(name);
        if idx.is_empty() {
            return param(format!("unknown parameter '{name}' (have {})", self.names().join(", ")));
        }
        for i in idx {
            self.free[i] = free;
        }
        Ok(())
    }

    pub fn fix(mut self, name: &str) -> Result<Self> {
        self.set_free(name, false)?;
        Ok(self)
    }

    pub fn with_free(mut self, name: &str) -> Result<Self> {
        self.set_free(name, true)?;
        Ok(self)
    }

    pub fn fix_all(mut self) -> Self {
        self.free.iter_mut().for_each(|f| *f = false);
        self
    }

    pub fn is_free(&self, name: &str) -> bool {
        self.matching(name).iter().any(|&i| self.free[i])
    }

    pub fn num_free(&self) -> usize {
        self.free.iter().filter(|f| **f).count()
    }

    fn filter_magnitude_free(&self) -> bool {
        self.is_free("filter.sigma") || self.is_free("filter.weights")
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_free("source.sigma") && self.filter_magnitude_free() {
            return param("source magnitude must be fixed when the filter magnitude or weights are free");
        }
        if self.is_free("noise") && self.noise_sd <= 0.0 {
            return param("a free noise level needs a positive initial value");
        }
        ConvKernelPair::new(self.source.clone(), self.filter.clone(), self.method())?;
        Ok(())
    }

    /// Heuristic starting point for the free parameters: lengthscale three
    /// times the median input spacing, σ_n a tenth of the sample standard
    /// deviation, discrete weights `1/M`.
    pub fn initialize(mut self, obs: &ObservationSet) -> Self {
        let spacing = median_spacing(obs);
        if let (Some(s), true) = (spacing, self.is_free("source.lengthscale")) {
            self.source = match self.source {
                KernelSpec::Se { sigma, dim, .. } => KernelSpec::Se { sigma, lengthscale: 3.0 * s, dim },
                KernelSpec::Sm { sigma, freq, .. } => KernelSpec::Sm { sigma, lengthscale: 3.0 * s, freq },
                k => k,
            };
        }
        if self.is_free("noise") && obs.len() >= 2 {
            let y = obs.values();
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (y.len() - 1) as f64).sqrt();
            if sd > 0.0 {
                self.noise_sd = 0.1 * sd;
            }
        }
        if self.is_free("filter.weights") {
            if let FilterSpec::Discrete(d) = &self.filter {
                let m = d.len() as f64;
                self.filter = FilterSpec::Discrete(d.with_weights(vec![1.0 / m; d.len()]).expect("same length"));
            }
        }
        self
    }

    /// Free parameters in unconstrained coordinates.
    pub fn unconstrained(&self) -> Vec<f64> {
        self.layout().into_iter().zip(&self.free).filter(|(_, f)| **f).map(|((_, t, v), _)| t.forward(v)).collect()
    }

    /// The model with its free parameters replaced from unconstrained coordinates.
    pub fn with_unconstrained(&self, theta: &[f64]) -> Result<Self> {
        if theta.len() != self.num_free() {
            return param(format!("expected {} free parameters, got {}", self.num_free(), theta.len()));
        }
        let mut values: Vec<f64> = self.layout().into_iter().map(|(_, _, v)| v).collect();
        let transforms: Vec<Transform> = self.layout().into_iter().map(|(_, t, _)| t).collect();
        let mut it = theta.iter();
        for (i, free) in self.free.iter().enumerate() {
            if *free {
                values[i] = transforms[i].inverse(*it.next().unwrap());
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return param("parameters left the finite range");
        }
        let mut k = 0;
        let mut next = || {
            k += 1;
            values[k - 1]
        };
        let source = match self.source {
            KernelSpec::Se { dim, .. } => KernelSpec::Se { sigma: next(), lengthscale: next(), dim },
            KernelSpec::Sinc { .. } => KernelSpec::Sinc { sigma: next(), width: next() },
            KernelSpec::Sm { .. } => KernelSpec::Sm { sigma: next(), lengthscale: next(), freq: next() },
        };
        let filter = match &self.filter {
            FilterSpec::Se { .. } => FilterSpec::Se { sigma: next(), lengthscale: next() },
            FilterSpec::Sinc { .. } => FilterSpec::Sinc { sigma: next(), width: next() },
            FilterSpec::Triangular { .. } => FilterSpec::Triangular { sigma: next(), width: next() },
            FilterSpec::Discrete(d) => FilterSpec::Discrete(d.with_weights((0..d.len()).map(|_| next()).collect())?),
        };
        let noise_sd = next();
        source.validate()?;
        filter.validate()?;
        Ok(Self { source, filter, noise_sd, method: self.method, free: self.free.clone() })
    }

    pub fn pair(&self) -> Result<ConvKernelPair> {
        ConvKernelPair::new(self.source.clone(), self.filter.clone(), self.method())
    }

    pub fn log_likelihood(&self, obs: &ObservationSet) -> Result<f64> {
        log_likelihood(&obs.with_noise_var(self.noise_var())?, &self.pair()?)
    }

    fn objective(&self, obs: &ObservationSet, theta: &[f64]) -> f64 {
        self.with_unconstrained(theta).and_then(|m| m.log_likelihood(obs)).unwrap_or(f64::NEG_INFINITY)
    }
}

fn median_spacing(obs: &ObservationSet) -> Option<f64> {
    let locs = obs.locations();
    let mut gaps: Vec<f64> = if locs.dim() == 1 {
        let mut t = locs.as_flat().to_vec();
        t.sort_by(f64::total_cmp);
        t.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 0.0).collect()
    } else {
        // nearest-neighbour distances
        (0..locs.len())
            .filter_map(|i| {
                (0..locs.len())
                    .filter(|&j| j != i)
                    .map(|j| locs.point(i).iter().zip(locs.point(j)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
                    .min_by(f64::total_cmp)
            })
            .collect()
    };
    if gaps.is_empty() {
        return None;
    }
    gaps.sort_by(f64::total_cmp);
    Some(gaps[gaps.len() / 2])
}

/// Log marginal likelihood of observations (with their noise variance) under a pair.
pub fn log_likelihood(obs: &ObservationSet, pair: &ConvKernelPair) -> Result<f64> {
    Ok(Deconvolver::new(obs, pair.clone())?.log_marginal_likelihood())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub source: KernelSpec,
    pub filter: FilterSpec,
    pub noise_var: f64,
    pub method: CovMethod,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best log-likelihood after each iteration of the winning restart.
    pub trace: Vec<f64>,
    pub restart: usize,
    /// Final log-likelihood of every restart, in restart order.
    pub restart_log_likelihoods: Vec<f64>,
}

impl FitResult {
    pub fn pair(&self) -> Result<ConvKernelPair> {
        ConvKernelPair::new(self.source.clone(), self.filter.clone(), self.method)
    }
}

/// Maximizes the log marginal likelihood over the free parameters of `model`.
///
/// Restart 0 starts from the model's current values; restart `r > 0`
/// perturbs every free unconstrained coordinate by `N(0, 0.5²)`.
pub fn fit(obs: &ObservationSet, model: &TrainableModel, config: &FitConfig) -> Result<FitResult> {
    if obs.is_empty() {
        return Err(GpdcError::Training("no observations to train on".into()));
    }
    if config.restarts == 0 {
        return param("restarts must be at least 1");
    }
    model.validate()?;
    let x0 = model.unconstrained();
    let method = model.method();

    if x0.is_empty() {
        let ll = model.log_likelihood(obs)?;
        return Ok(FitResult {
            source: model.source.clone(),
            filter: model.filter.clone(),
            noise_var: model.noise_var(),
            method,
            log_likelihood: ll,
            iterations: 0,
            evaluations: 1,
            trace: vec![ll],
            restart: 0,
            restart_log_likelihoods: vec![ll],
        });
    }

    let starts: Vec<Vec<f64>> = (0..config.restarts)
        .map(|r| {
            if r == 0 {
                return x0.clone();
            }
            let mut rng = rng_from_seed(config.seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            x0.iter().map(|v| v + 0.5 * rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
        })
        .collect();
    let steps: Vec<f64> = model
        .layout()
        .into_iter()
        .zip(&model.free)
        .filter(|(_, f)| **f)
        .map(|((_, t, v), _)| match t {
            Transform::Identity => 0.5 * v.abs().max(0.1),
            _ => 0.5,
        })
        .collect();

    let outcomes: Vec<optim::Outcome> = starts
        .par_iter()
        .map(|start| {
            let f = |theta: &[f64]| model.objective(obs, theta);
            match config.optimizer {
                Optimizer::NelderMead => optim::nelder_mead(f, start, &steps, config.max_iters, 1e-8),
                Optimizer::Gradient => optim::bfgs(f, start, config.max_iters, 1e-5, 1e-6),
            }
        })
        .collect();

    let lls: Vec<f64> = outcomes.iter().map(|o| o.value).collect();
    let (winner, best) = outcomes
        .iter()
        .enumerate()
        .fold(None::<(usize, &optim::Outcome)>, |acc, (i, o)| match acc {
            Some((_, b)) if b.value >= o.value || !o.value.is_finite() => acc,
            _ if !o.value.is_finite() => acc,
            _ => Some((i, o)),
        })
        .ok_or_else(|| GpdcError::Training(format!("every restart failed to evaluate the likelihood: {lls:?}")))?;
    let fitted = model.with_unconstrained(&best.x)?;
    Ok(FitResult {
        source: fitted.source.clone(),
        filter: fitted.filter.clone(),
        noise_var: fitted.noise_var(),
        method,
        log_likelihood: best.value,
        iterations: best.iterations,
        evaluations: outcomes.iter().map(|o| o.evaluations).sum(),
        trace: best.trace.clone(),
        restart: winner,
        restart_log_likelihoods: lls,
    })
}

/// Blind fit: kernel parameters, σ_n and `m` discrete filter weights at
/// uniform midpoint locations over `span`, with the source magnitude fixed to 1.
pub fn fit_blind(obs: &ObservationSet, source: &KernelSpec, m: usize, span: (f64, f64), config: &FitConfig) -> Result<FitResult> {
    if m == 0 {
        return param("blind filter needs at least one weight");
    }
    if !(span.1 > span.0) {
        return param("blind filter span must have positive length");
    }
    let locations = DiscreteFilter::uniform_locations(m, span);
    let filter = FilterSpec::discrete(vec![1.0 / m as f64; m], locations)?;
    let noise = if obs.noise_var() > 0.0 { obs.noise_var() } else { 1.0 };
    let model = TrainableModel::new(source.with_sigma(1.0), filter, noise)?.initialize(obs);
    fit(obs, &model, config)
}
