//! De-reverberation protocol on a synthetic speech-like signal: blur with a
//! known SE filter, add noise, compare the GP posterior mean with the
//! Wiener and inverse-FT baselines in time and frequency.

use std::f64::consts::PI;

use gpdc::baselines::{default_noise_to_signal, inverse_ft_deconv, metrics, wiener_deconv, Metrics, UniformSignal};
use gpdc::gp::{rng_from_seed, standard_normals};
use gpdc::train::{fit, FitConfig, FitResult, TrainableModel};
use gpdc::{ConvKernelPair, Deconvolver, FilterSpec, KernelSpec, Locations, ObservationSet};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Standardized sum of amplitude-modulated harmonics plus smoothed noise.
/// Time is in milliseconds, so frequencies are in kHz.
pub fn speech_proxy(n: usize, step_ms: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let pitch = 0.11 + 0.02 * rng.random::<f64>();
    let mut partials = Vec::new();
    for k in 1..=4 {
        let am = 0.003 + 0.006 * rng.random::<f64>();
        let phases = (2.0 * PI * rng.random::<f64>(), 2.0 * PI * rng.random::<f64>());
        partials.push((k as f64 * pitch, 1.0 / k as f64, am, phases));
    }
    let eps = standard_normals(&mut rng, n);
    let mut noise = vec![0.0; n];
    let mut state = 0.0;
    for (k, e) in eps.iter().enumerate() {
        state = 0.9 * state + e;
        noise[k] = state;
    }
    let raw: Vec<f64> = (0..n)
        .map(|k| {
            let t = k as f64 * step_ms;
            let tonal: f64 = partials
                .iter()
                .map(|(f, a, am, (p1, p2))| a * (1.0 + 0.8 * (2.0 * PI * am * t + p1).cos()) * (2.0 * PI * f * t + p2).sin())
                .sum();
            tonal + 0.1 * noise[k]
        })
        .collect();
    standardize(&raw)
}

fn standardize(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    v.iter().map(|x| (x - mean) / sd).collect()
}

/// Classical convolution kernel on lags `-half..=half` samples, `g[k] = h(-k step) step`
/// for continuous filters (so the GP convention `f(t) = ∫ h(τ) x(t + τ) dτ` becomes `f = g * x`).
pub fn sampled_filter(filter: &FilterSpec, step: f64, half_width: usize) -> CliResult<UniformSignal> {
    let n = 2 * half_width + 1;
    let mut values = vec![0.0; n];
    match filter {
        FilterSpec::Discrete(d) => {
            let locs = d.locations().as_1d()?;
            for (w, l) in d.weights().iter().zip(locs) {
                let k = -l / step;
                if (k - k.round()).abs() > 1e-6 || k.round().abs() > half_width as f64 {
                    return Err(CliError::usage(format!("filter tap at {l} is not on the {step} sampling grid")));
                }
                values[(k.round() as isize + half_width as isize) as usize] += w;
            }
        }
        _ => {
            for (i, v) in values.iter_mut().enumerate() {
                let lag = (i as f64 - half_width as f64) * step;
                *v = filter.eval(-lag)? * step;
            }
        }
    }
    Ok(UniformSignal::new(values, step, -(half_width as f64) * step)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DereverbConfig {
    pub samples: usize,
    pub sample_rate_hz: f64,
    pub filter_lengthscale_ms: f64,
    pub noise_sd: f64,
    /// Contiguous samples used to learn the source hyperparameters.
    pub train_window: usize,
    pub fit: FitConfig,
    pub seed: u64,
}

impl Default for DereverbConfig {
    fn default() -> Self {
        Self {
            samples: 2000,
            sample_rate_hz: 5512.5,
            filter_lengthscale_ms: 2.2,
            noise_sd: 0.05,
            train_window: 400,
            fit: FitConfig { max_iters: 400, ..FitConfig::default() },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodScores {
    pub gpdc: Metrics,
    pub wiener: Metrics,
    pub inverse_ft: Metrics,
}

#[derive(Debug, Clone)]
pub struct DereverbOutcome {
    pub times: Vec<f64>,
    pub truth: Vec<f64>,
    pub observed: Vec<f64>,
    pub gpdc: Vec<f64>,
    pub wiener: Vec<f64>,
    pub inverse_ft: Vec<f64>,
    pub fit: FitResult,
    pub scores: MethodScores,
}

pub fn run_dereverb(cfg: &DereverbConfig) -> CliResult<DereverbOutcome> {
    if cfg.samples < 16 || cfg.train_window < 2 || cfg.train_window > cfg.samples {
        return Err(CliError::usage("need at least 16 samples and a training window inside them"));
    }
    let step = 1000.0 / cfg.sample_rate_hz;
    let filter = FilterSpec::se_normalized(cfg.filter_lengthscale_ms)?;
    let half = (8.0 * cfg.filter_lengthscale_ms / step).ceil() as usize;
    let g = sampled_filter(&filter, step, half)?;

    // The signal continues beyond the observed window, so blur a longer
    // record and keep the centre.
    let long = speech_proxy(cfg.samples + 2 * half, step, cfg.seed);
    let truth = long[half..half + cfg.samples].to_vec();
    let clean: Vec<f64> = (0..cfg.samples)
        .map(|k| (0..g.len()).map(|j| g.values[j] * long[k + 2 * half - j]).sum())
        .collect();
    let eps = standard_normals(&mut rng_from_seed(cfg.seed.wrapping_add(1)), cfg.samples);
    let observed: Vec<f64> = clean.iter().zip(eps.iter()).map(|(f, e)| f + cfg.noise_sd * e).collect();
    let times: Vec<f64> = (0..cfg.samples).map(|k| k as f64 * step).collect();
    let noise_var = cfg.noise_sd * cfg.noise_sd;

    let start = (cfg.samples - cfg.train_window) / 2;
    let window = ObservationSet::one_d(
        times[start..start + cfg.train_window].to_vec(),
        observed[start..start + cfg.train_window].to_vec(),
        noise_var,
    )?;
    let model = TrainableModel::new(KernelSpec::se(1.0, 1.0)?, filter.clone(), noise_var)?
        .fix_all()
        .with_free("source.sigma")?
        .with_free("source.lengthscale")?
        .with_free("noise")?
        .initialize(&window);
    let fitted = fit(&window, &model, &cfg.fit)?;

    let obs = ObservationSet::one_d(times.clone(), observed.clone(), fitted.noise_var)?;
    let pair = ConvKernelPair::auto(fitted.source.clone(), filter)?;
    let gpdc: Vec<f64> = Deconvolver::new(&obs, pair)?.source_mean(&Locations::one_d(times.clone()))?.iter().copied().collect();

    let y = UniformSignal::new(observed.clone(), step, 0.0)?;
    let wiener = wiener_deconv(&y, &g, default_noise_to_signal(&observed, Some(noise_var)))?.values;
    let inverse_ft = inverse_ft_deconv(&y, &g, None)?.values;

    let t = UniformSignal::new(truth.clone(), step, 0.0)?;
    let score = |est: &[f64], align: bool| metrics(&t, &UniformSignal::new(est.to_vec(), step, 0.0)?, align);
    let scores = MethodScores { gpdc: score(&gpdc, false)?, wiener: score(&wiener, true)?, inverse_ft: score(&inverse_ft, true)? };
    Ok(DereverbOutcome { times, truth, observed, gpdc, wiener, inverse_ft, fit: fitted, scores })
}
