//! JSON run configurations. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use gpdc::train::FitConfig;
use gpdc::{linspace, CovMethod, FilterSpec, KernelSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::image::{ImageFilter, ImageTraining};

/// `n` evenly spaced points from `start` to `end` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub end: f64,
    pub n: usize,
}

impl Grid {
    pub fn points(&self, what: &str) -> CliResult<Vec<f64>> {
        if self.n == 0 {
            return Err(CliError::usage(format!("{what}: grid must be nonempty")));
        }
        if !(self.start.is_finite() && self.end.is_finite()) || self.end < self.start || (self.n > 1 && self.end == self.start) {
            return Err(CliError::usage(format!("{what}: grid needs finite start < end")));
        }
        Ok(linspace(self.start, self.end, self.n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub source: KernelSpec,
    pub filter: FilterSpec,
    #[serde(default)]
    pub method: Option<CovMethod>,
    pub source_grid: Grid,
    pub conv_grid: Grid,
    #[serde(default)]
    pub noise_var: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticOptions {
    #[serde(default = "default_freqs")]
    pub freqs: usize,
    #[serde(default)]
    pub psd_tol: Option<f64>,
    #[serde(default)]
    pub transfer_tol: Option<f64>,
}

fn default_freqs() -> usize {
    257
}

impl Default for DiagnosticOptions {
    fn default() -> Self {
        Self { freqs: default_freqs(), psd_tol: None, transfer_tol: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeconvConfig {
    pub source: KernelSpec,
    pub filter: FilterSpec,
    #[serde(default)]
    pub method: Option<CovMethod>,
    pub noise_var: f64,
    /// Defaults to the observation times.
    #[serde(default)]
    pub queries: Option<Grid>,
    #[serde(default)]
    pub diagnostic: DiagnosticOptions,
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

/// `taps` uniformly placed filter weights over `span`, learnt with the kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlindFilter {
    pub taps: usize,
    pub span: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub source: KernelSpec,
    /// Known (or parametric) filter; exclusive with `blind`.
    #[serde(default)]
    pub filter: Option<FilterSpec>,
    #[serde(default)]
    pub blind: Option<BlindFilter>,
    /// Initial noise variance.
    #[serde(default = "default_noise_var")]
    pub noise_var: f64,
    #[serde(default)]
    pub method: Option<CovMethod>,
    /// Parameter names held at their configured values.
    #[serde(default)]
    pub fixed: Vec<String>,
    /// Replace free values by data-driven starting points.
    #[serde(default = "default_true")]
    pub initialize: bool,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub queries: Option<Grid>,
    #[serde(default)]
    pub input: Option<PathBuf>,
    /// Overrides `fit.seed` when given.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_noise_var() -> f64 {
    0.01
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticImage {
    pub rows: usize,
    pub cols: usize,
    pub lengthscale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageConfig {
    /// CSV matrix or `.pgm`; exclusive with `synthetic`.
    #[serde(default)]
    pub image: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticImage>,
    #[serde(default = "default_image_filter")]
    pub filter: ImageFilter,
    /// Source prior (2D SE); the starting point when `train` is set.
    #[serde(default = "default_image_kernel")]
    pub kernel: KernelSpec,
    #[serde(default = "default_image_noise")]
    pub noise_sd: f64,
    #[serde(default = "default_fraction")]
    pub observed_fraction: f64,
    /// Extra observed fractions for the error-versus-data sweep.
    #[serde(default)]
    pub sweep: Vec<f64>,
    #[serde(default)]
    pub train: Option<ImageTraining>,
    #[serde(default = "default_wiener_ratio")]
    pub wiener_noise_to_signal: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_image_filter() -> ImageFilter {
    ImageFilter::Builtin("h0".into())
}

fn default_image_kernel() -> KernelSpec {
    KernelSpec::se_2d(1.0, 1.0).expect("valid defaults")
}

fn default_image_noise() -> f64 {
    0.05
}

fn default_fraction() -> f64 {
    0.6
}

fn default_wiener_ratio() -> f64 {
    0.01
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    InverseFt,
    Wiener,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    pub filter: FilterSpec,
    /// Filter support in samples either side of lag 0 (default: eight lengthscales or widths).
    #[serde(default)]
    pub half_width: Option<usize>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub noise_to_signal: Option<f64>,
    /// Used for the default Wiener ratio.
    #[serde(default)]
    pub noise_var: Option<f64>,
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    #[serde(default)]
    pub align: bool,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub source: KernelSpec,
    pub filter: FilterSpec,
    pub freqs: Grid,
    #[serde(default)]
    pub psd_tol: Option<f64>,
    #[serde(default)]
    pub transfer_tol: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

/// Parses a config, applying a `seed` override first.
pub fn parse_config<T: DeserializeOwned>(text: &str, seed: Option<u64>) -> CliResult<T> {
    let mut value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::usage(format!("config is not valid JSON: {e}")))?;
    if let Some(s) = seed {
        let obj = value.as_object_mut().ok_or_else(|| CliError::usage("config must be a JSON object"))?;
        obj.insert("seed".into(), s.into());
    }
    serde_json::from_value(value).map_err(|e| CliError::usage(format!("invalid config: {e}")))
}

pub fn load_config<T: DeserializeOwned>(path: &Path, seed: Option<u64>) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    parse_config(&text, seed).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let ok = r#"{"source": {"type": "se", "sigma": 1, "gamma": 10},
                     "filter": {"type": "se", "sigma": 1, "gamma": 10},
                     "source_grid": {"start": 0, "end": 10, "n": 40},
                     "conv_grid": {"start": 0, "end": 10, "n": 1000}}"#;
        let cfg: SampleConfig = parse_config(ok, Some(9)).unwrap();
        assert_eq!(cfg.seed, 9);
        let bad = ok.replace("\"n\": 40}", "\"n\": 40, \"extra\": 1}");
        assert!(parse_config::<SampleConfig>(&bad, None).is_err());
        assert!(parse_config::<SampleConfig>("[1]", Some(1)).is_err());
    }

    #[test]
    fn empty_grid_is_a_usage_error() {
        let g = Grid { start: 0.0, end: 1.0, n: 0 };
        assert!(matches!(g.points("source_grid"), Err(CliError::Usage(_))));
        assert_eq!(Grid { start: 0.0, end: 1.0, n: 3 }.points("g").unwrap(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn image_filter_forms() {
        let named: ImageConfig = parse_config(r#"{"filter": "h4"}"#, None).unwrap();
        assert_eq!(named.filter, ImageFilter::Builtin("h4".into()));
        let custom: ImageConfig = parse_config(r#"{"filter": {"weights": [1], "shape": [1, 1]}}"#, None).unwrap();
        assert!(matches!(custom.filter, ImageFilter::Custom(_)));
        assert_eq!(custom.observed_fraction, 0.6);
    }
}
