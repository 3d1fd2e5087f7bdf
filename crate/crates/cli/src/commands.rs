//! Subcommand implementations. Each writes its files under the output
//! directory and returns a one-line summary for stdout.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use gpdc::baselines::{default_noise_to_signal, inverse_ft_deconv, metrics, wiener_deconv, UniformSignal};
use gpdc::deconv::{default_frequency_grid, recovery_diagnostic};
use gpdc::model::{conditional_f_moments, sample_joint, GenerativeConfig};
use gpdc::train::{fit, fit_blind, TrainableModel};
use gpdc::{ConvKernelPair, CovMethod, Deconvolver, FilterSpec, KernelSpec, Locations, ObservationSet};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::audio::sampled_filter;
use crate::config::{
    load_config, BaselineConfig, BaselineMethod, DeconvConfig, DiagnoseConfig, EvaluateConfig, ImageConfig, SampleConfig,
    TrainConfig,
};
use crate::error::{CliError, CliResult};
use crate::image::{mse, ImageSetup};
use crate::io::{write_json, ImageGrid, Table};

#[derive(Debug, Parser)]
#[command(name = "gpdc", version, about = "Gaussian process deconvolution")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a joint sample of source, convolution and observations.
    Sample,
    /// Source posterior from (t, y) observations with known hyperparameters.
    Deconv {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Maximum-likelihood hyperparameters (optionally a blind filter), then the posterior.
    Train {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Image blur, masking and reconstruction pipeline.
    Image {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Inverse-FT or Wiener deconvolution of a uniformly sampled (t, y) signal.
    Baseline {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Time and spectral error metrics between two signals.
    Evaluate {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        /// Circularly shift the estimate onto the truth first.
        #[arg(long)]
        align: bool,
    },
    /// Frequencies where the filter removes source power.
    Diagnose,
}

struct Context<'a> {
    config: Option<&'a Path>,
    seed: Option<u64>,
    out: &'a Path,
}

impl Context<'_> {
    fn config<T: DeserializeOwned>(&self) -> CliResult<T> {
        let path = self.config.ok_or_else(|| CliError::usage("this command needs --config"))?;
        load_config(path, self.seed)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        write_json(&self.path(name), value)
    }

    fn csv(&self, name: &str, headers: &[&str], columns: &[&[f64]]) -> CliResult<()> {
        Table::from_columns(headers, columns).write(&self.path(name))
    }
}

pub fn run(cli: &Cli) -> CliResult<String> {
    let ctx = Context { config: cli.config.as_deref(), seed: cli.seed, out: &cli.out };
    match &cli.command {
        Command::Sample => sample(&ctx),
        Command::Deconv { input } => deconv(&ctx, input.as_deref()),
        Command::Train { input } => train(&ctx, input.as_deref()),
        Command::Image { input } => image(&ctx, input.as_deref()),
        Command::Baseline { input } => baseline(&ctx, input.as_deref()),
        Command::Evaluate { truth, estimate, align } => evaluate(&ctx, truth, estimate, *align),
        Command::Diagnose => diagnose(&ctx),
    }
}

fn input_path<'a>(flag: Option<&'a Path>, config: &'a Option<PathBuf>) -> CliResult<&'a Path> {
    flag.or(config.as_deref()).ok_or_else(|| CliError::usage("no input file (use --input or the config's 'input')"))
}

/// `(t, y)` columns of an observation CSV.
fn read_series(path: &Path) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let table = Table::read(path)?;
    Ok((table.column_or("t", 0)?, table.column_or("y", 1)?))
}

fn sample(ctx: &Context) -> CliResult<String> {
    let cfg: SampleConfig = ctx.config()?;
    let gen = GenerativeConfig {
        source: cfg.source,
        filter: cfg.filter,
        method: cfg.method,
        source_locations: cfg.source_grid.points("source_grid")?,
        conv_locations: cfg.conv_grid.points("conv_grid")?,
        noise_var: cfg.noise_var,
        seed: cfg.seed,
    };
    let s = sample_joint(&gen)?;
    let (_, var) = conditional_f_moments(&gen, &s.x)?;
    let std: Vec<f64> = var.iter().map(|v| v.max(0.0).sqrt()).collect();
    ctx.csv("source.csv", &["t", "x"], &[&gen.source_locations, &s.x])?;
    ctx.csv("convolution.csv", &["t", "f", "y", "f_std_given_x"], &[&gen.conv_locations, &s.f, &s.y, &std])?;
    Ok(format!("sampled {} source and {} convolution points", s.x.len(), s.f.len()))
}

#[derive(Debug, Serialize)]
struct DiagnosticSummary {
    recoverable: bool,
    suppressed_bands: Vec<(f64, f64)>,
    psd_tol: f64,
    transfer_tol: f64,
    num_freqs: usize,
}

#[derive(Debug, Serialize)]
struct DeconvReport {
    source: KernelSpec,
    filter: FilterSpec,
    method: CovMethod,
    noise_var: f64,
    num_observations: usize,
    log_likelihood: f64,
    diagnostic: Option<DiagnosticSummary>,
}

fn deconv(ctx: &Context, input: Option<&Path>) -> CliResult<String> {
    let cfg: DeconvConfig = ctx.config()?;
    let (t, y) = read_series(input_path(input, &cfg.input)?)?;
    let obs = ObservationSet::one_d(t.clone(), y, cfg.noise_var)?;
    let method = cfg.method.unwrap_or_else(|| CovMethod::auto(&cfg.source, &cfg.filter));
    let d = Deconvolver::new(&obs, ConvKernelPair::new(cfg.source.clone(), cfg.filter.clone(), method)?)?;
    let queries = match &cfg.queries {
        Some(g) => g.points("queries")?,
        None => t.clone(),
    };
    let (mean, var) = d.source_moments(&Locations::one_d(queries.clone()))?;
    let std: Vec<f64> = var.iter().map(|v| v.max(0.0).sqrt()).collect();
    let mean: Vec<f64> = mean.iter().copied().collect();

    let diagnostic = if cfg.source.dim() == 1 && cfg.filter.dim() == 1 && t.len() >= 2 {
        let freqs = default_frequency_grid(&t, cfg.diagnostic.freqs)?;
        let r = recovery_diagnostic(&cfg.source, &cfg.filter, &freqs, cfg.diagnostic.psd_tol, cfg.diagnostic.transfer_tol)?;
        Some(DiagnosticSummary {
            recoverable: r.recoverable,
            suppressed_bands: r.suppressed_bands,
            psd_tol: r.psd_tol,
            transfer_tol: r.transfer_tol,
            num_freqs: freqs.len(),
        })
    } else {
        None
    };
    let report = DeconvReport {
        source: cfg.source,
        filter: cfg.filter,
        method,
        noise_var: cfg.noise_var,
        num_observations: obs.len(),
        log_likelihood: d.log_marginal_likelihood(),
        diagnostic,
    };
    ctx.csv("posterior.csv", &["t", "mean", "std"], &[&queries, &mean, &std])?;
    ctx.json("report.json", &report)?;
    let verdict = match &report.diagnostic {
        Some(d) if d.recoverable => ", recoverable",
        Some(_) => ", suppressed bands present",
        None => "",
    };
    Ok(format!("posterior at {} points, log-likelihood {:.6}{verdict}", queries.len(), report.log_likelihood))
}

fn train(ctx: &Context, input: Option<&Path>) -> CliResult<String> {
    let cfg: TrainConfig = ctx.config()?;
    let mut fit_cfg = cfg.fit.clone();
    if let Some(s) = cfg.seed {
        fit_cfg.seed = s;
    }
    if fit_cfg.restarts == 0 {
        return Err(CliError::usage("fit.restarts must be at least 1"));
    }
    let (t, y) = read_series(input_path(input, &cfg.input)?)?;
    let obs = ObservationSet::one_d(t.clone(), y, cfg.noise_var)?;
    let res = match (&cfg.filter, &cfg.blind) {
        (Some(filter), None) => {
            let mut model = TrainableModel::new(cfg.source.clone(), filter.clone(), cfg.noise_var)?;
            if let Some(m) = cfg.method {
                model = model.with_method(m);
            }
            for name in &cfg.fixed {
                model.set_free(name, false)?;
            }
            if cfg.initialize {
                model = model.initialize(&obs);
            }
            fit(&obs, &model, &fit_cfg)?
        }
        (None, Some(b)) => {
            if !cfg.fixed.is_empty() || cfg.method.is_some() {
                return Err(CliError::usage("'fixed' and 'method' are not used with a blind filter"));
            }
            fit_blind(&obs, &cfg.source, b.taps, (b.span[0], b.span[1]), &fit_cfg)?
        }
        _ => return Err(CliError::usage("give exactly one of 'filter' and 'blind'")),
    };
    let queries = match &cfg.queries {
        Some(g) => g.points("queries")?,
        None => t,
    };
    let d = Deconvolver::new(&obs.with_noise_var(res.noise_var)?, res.pair()?)?;
    let (mean, var) = d.source_moments(&Locations::one_d(queries.clone()))?;
    let std: Vec<f64> = var.iter().map(|v| v.max(0.0).sqrt()).collect();
    let mean: Vec<f64> = mean.iter().copied().collect();
    ctx.json("fit.json", &res)?;
    ctx.csv("posterior.csv", &["t", "mean", "std"], &[&queries, &mean, &std])?;
    Ok(format!("log-likelihood {:.6} after {} iterations (restart {})", res.log_likelihood, res.iterations, res.restart))
}

#[derive(Debug, Serialize)]
struct SweepRow {
    fraction: f64,
    observed_pixels: usize,
    gpdc_mse: f64,
    wiener_mse: f64,
}

#[derive(Debug, Serialize)]
struct ImageReport {
    rows: usize,
    cols: usize,
    filter_shape: [usize; 2],
    filter_weights: Vec<f64>,
    noise_sd: f64,
    observed_fraction: f64,
    observed_pixels: usize,
    kernel: KernelSpec,
    estimated_filter: FilterSpec,
    noise_var: f64,
    gpdc_mse: f64,
    wiener_mse: f64,
    fit: Option<gpdc::train::FitResult>,
    sweep: Vec<SweepRow>,
}

fn image(ctx: &Context, input: Option<&Path>) -> CliResult<String> {
    let cfg: ImageConfig = ctx.config()?;
    let truth = match (input.or(cfg.image.as_deref()), &cfg.synthetic) {
        (Some(p), None) => {
            let img = ImageGrid::read(p)?;
            if img.values.iter().any(|v| v.is_nan()) {
                return Err(CliError::usage(format!("{}: image has missing (NaN) pixels", p.display())));
            }
            img
        }
        (None, Some(s)) => crate::image::synthetic_image(s.rows, s.cols, s.lengthscale, cfg.seed)?,
        (Some(_), Some(_)) => return Err(CliError::usage("give either an image file or 'synthetic', not both")),
        (None, None) => return Err(CliError::usage("no image (use --input, 'image' or 'synthetic')")),
    };
    if cfg.kernel.dim() != 2 {
        return Err(CliError::usage("image kernel must be two-dimensional (\"dim\": 2)"));
    }
    if !(cfg.noise_sd.is_finite() && cfg.noise_sd >= 0.0) {
        return Err(CliError::usage("noise_sd must be >= 0"));
    }
    let (weights, kshape) = cfg.filter.resolve()?;
    let setup = ImageSetup {
        truth: truth.clone(),
        weights: weights.clone(),
        kshape,
        kernel: cfg.kernel.clone(),
        noise_sd: cfg.noise_sd,
        training: cfg.train.clone(),
        wiener_noise_to_signal: cfg.wiener_noise_to_signal,
        seed: cfg.seed,
    };
    let data = setup.simulate()?;
    let main = setup.reconstruct(&data, cfg.observed_fraction)?;
    let wiener = setup.wiener(&data)?;
    let wiener_mse = mse(&wiener.values, &truth.values);
    let mut sweep = Vec::with_capacity(cfg.sweep.len());
    for &fraction in &cfg.sweep {
        let r = setup.reconstruct(&data, fraction)?;
        sweep.push(SweepRow { fraction, observed_pixels: r.mask.count(), gpdc_mse: r.mse, wiener_mse });
    }

    let observed: Vec<f64> = data
        .noisy
        .values
        .iter()
        .zip(&main.mask.observed)
        .map(|(v, o)| if *o { *v } else { f64::NAN })
        .collect();
    truth.write(&ctx.path("truth.csv"))?;
    data.convolution.write(&ctx.path("convolution.csv"))?;
    ImageGrid::new(truth.rows, truth.cols, observed)?.write(&ctx.path("observed.csv"))?;
    main.estimate.write(&ctx.path("gpdc.csv"))?;
    main.estimate.write(&ctx.path("gpdc.pgm"))?;
    wiener.write(&ctx.path("wiener.csv"))?;
    wiener.write(&ctx.path("wiener.pgm"))?;
    let fr: Vec<f64> = sweep.iter().map(|s| s.fraction).collect();
    let cnt: Vec<f64> = sweep.iter().map(|s| s.observed_pixels as f64).collect();
    let g: Vec<f64> = sweep.iter().map(|s| s.gpdc_mse).collect();
    let w: Vec<f64> = sweep.iter().map(|s| s.wiener_mse).collect();
    ctx.csv("sweep.csv", &["fraction", "observed_pixels", "gpdc_mse", "wiener_mse"], &[&fr, &cnt, &g, &w])?;
    let report = ImageReport {
        rows: truth.rows,
        cols: truth.cols,
        filter_shape: kshape,
        filter_weights: weights,
        noise_sd: cfg.noise_sd,
        observed_fraction: cfg.observed_fraction,
        observed_pixels: main.mask.count(),
        kernel: main.kernel,
        estimated_filter: main.filter,
        noise_var: main.noise_var,
        gpdc_mse: main.mse,
        wiener_mse,
        fit: main.fit,
        sweep,
    };
    ctx.json("report.json", &report)?;
    Ok(format!("gpdc mse {:.6e}, wiener mse {:.6e} ({} pixels observed)", report.gpdc_mse, wiener_mse, report.observed_pixels))
}

fn uniform_step(t: &[f64]) -> CliResult<f64> {
    if t.len() < 2 {
        return Err(CliError::usage("need at least two samples"));
    }
    let step = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if !(step > 0.0) || t.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-6 * step) {
        return Err(CliError::usage("samples must be uniformly spaced and increasing"));
    }
    Ok(step)
}

fn baseline(ctx: &Context, input: Option<&Path>) -> CliResult<String> {
    let cfg: BaselineConfig = ctx.config()?;
    let (t, y) = read_series(input_path(input, &cfg.input)?)?;
    let step = uniform_step(&t)?;
    let half = match (cfg.half_width, &cfg.filter) {
        (Some(h), _) => h,
        (None, FilterSpec::Discrete(d)) => d.locations().as_1d()?.iter().map(|l| (l.abs() / step).round() as usize).max().unwrap_or(0),
        (None, f) => {
            let (lo, hi) = f.default_span()?;
            (lo.abs().max(hi.abs()) / step).ceil() as usize
        }
    }
    .min((t.len() - 1) / 2);
    let g = sampled_filter(&cfg.filter, step, half)?;
    let signal = UniformSignal::new(y.clone(), step, t[0])?;
    let est = match cfg.method {
        BaselineMethod::InverseFt => inverse_ft_deconv(&signal, &g, cfg.eps)?,
        BaselineMethod::Wiener => {
            let r = cfg.noise_to_signal.unwrap_or_else(|| default_noise_to_signal(&y, cfg.noise_var));
            wiener_deconv(&signal, &g, r)?
        }
    };
    ctx.csv("estimate.csv", &["t", "x"], &[&t, &est.values])?;
    Ok(format!("{:?} estimate at {} samples", cfg.method, t.len()))
}

/// `(t, value)` where the value column is `x`, `mean` or `value`, else the second column.
fn read_signal(path: &Path) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let table = Table::read(path)?;
    let j = ["x", "mean", "value"].iter().find_map(|n| table.column_index(n)).unwrap_or(1);
    Ok((table.column_or("t", 0)?, table.column_at(j)?))
}

fn evaluate(ctx: &Context, truth: &Path, estimate: &Path, align: bool) -> CliResult<String> {
    let cfg: EvaluateConfig = match ctx.config {
        Some(_) => ctx.config()?,
        None => EvaluateConfig::default(),
    };
    let (t, a) = read_signal(truth)?;
    let (_, b) = read_signal(estimate)?;
    if a.len() != b.len() {
        return Err(CliError::usage(format!("truth has {} samples but estimate has {}", a.len(), b.len())));
    }
    let step = if t.len() >= 2 { uniform_step(&t)? } else { 1.0 };
    let m = metrics(&UniformSignal::new(a, step, t[0])?, &UniformSignal::new(b, step, t[0])?, align || cfg.align)?;
    ctx.json("metrics.json", &m)?;
    serde_json::to_string(&m).map_err(|e| CliError::Numerical(e.to_string()))
}

fn diagnose(ctx: &Context) -> CliResult<String> {
    let cfg: DiagnoseConfig = ctx.config()?;
    let freqs = cfg.freqs.points("freqs")?;
    let r = recovery_diagnostic(&cfg.source, &cfg.filter, &freqs, cfg.psd_tol, cfg.transfer_tol)?;
    ctx.json("diagnostic.json", &r)?;
    Ok(if r.recoverable {
        "recoverable: no suppressed frequencies".to_string()
    } else {
        format!("not recoverable: suppressed bands {:?}", r.suppressed_bands)
    })
}
