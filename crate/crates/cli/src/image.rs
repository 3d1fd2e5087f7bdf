//! Image super-resolution protocol: blur with a 5x5 filter, add noise, drop
//! pixels, then reconstruct with the 2D GP posterior and a Wiener baseline.

use gpdc::baselines::wiener_deconv_2d;
use gpdc::deconv::ImageMask;
use gpdc::gp::{mvn_sample, rng_from_seed, standard_normals};
use gpdc::train::{fit, FitConfig, FitResult, TrainableModel};
use gpdc::{ConvKernelPair, Deconvolver, DiscreteFilter, FilterSpec, KernelSpec, Locations, ObservationSet};
use nalgebra::DVector;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::ImageGrid;

/// Built-in 5x5 filters, each scaled to unit sum:
/// `h0` constant, `h1` unit peak over a near-zero floor, `h2` Gaussian radial,
/// `h3` seeded uniform random, `h4` diagonal.
pub fn builtin_filter(name: &str) -> CliResult<Vec<f64>> {
    let raw: Vec<f64> = match name {
        "h0" => vec![1.0; 25],
        "h1" => (0..25).map(|k| if k == 12 { 1.0 } else { 0.05 }).collect(),
        "h2" => (0..25)
            .map(|k| {
                let (r, c) = ((k / 5) as f64 - 2.0, (k % 5) as f64 - 2.0);
                (-0.5 * (r * r + c * c)).exp()
            })
            .collect(),
        "h3" => {
            let mut rng = rng_from_seed(3);
            (0..25).map(|_| rand::Rng::random::<f64>(&mut rng)).collect()
        }
        "h4" => (0..25).map(|k| if k / 5 == k % 5 { 1.0 } else { 0.0 }).collect(),
        other => return Err(CliError::usage(format!("unknown built-in filter '{other}' (expected h0..h4)"))),
    };
    let total: f64 = raw.iter().sum();
    Ok(raw.iter().map(|v| v / total).collect())
}

/// A built-in filter name or explicit row-major weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ImageFilter {
    Builtin(String),
    Custom(CustomFilter),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomFilter {
    pub weights: Vec<f64>,
    pub shape: [usize; 2],
}

impl ImageFilter {
    pub fn resolve(&self) -> CliResult<(Vec<f64>, [usize; 2])> {
        match self {
            Self::Builtin(name) => Ok((builtin_filter(name)?, [5, 5])),
            Self::Custom(c) => {
                let [r, k] = c.shape;
                if r * k != c.weights.len() || r % 2 == 0 || k % 2 == 0 {
                    return Err(CliError::usage(format!(
                        "filter shape {r}x{k} must be odd-sized and match {} weights",
                        c.weights.len()
                    )));
                }
                Ok((c.weights.clone(), c.shape))
            }
        }
    }
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    while i < 0 || i >= n {
        i = if i < 0 { -i } else { 2 * (n - 1) - i };
    }
    i as usize
}

/// Same-size output `f(p) = Σ w_ij x(p + l_ij)` with the filter centred on
/// `p` and the image extended by reflection (no edge repeat).
pub fn convolve_reflect(img: &ImageGrid, weights: &[f64], kshape: [usize; 2]) -> CliResult<ImageGrid> {
    let [kr, kc] = kshape;
    if img.rows < 2 && kr > 1 || img.cols < 2 && kc > 1 {
        return Err(CliError::usage("image is too small to reflect at the borders"));
    }
    let (hr, hc) = ((kr / 2) as isize, (kc / 2) as isize);
    let mut out = vec![0.0; img.values.len()];
    for r in 0..img.rows {
        for c in 0..img.cols {
            let mut acc = 0.0;
            for i in 0..kr {
                for j in 0..kc {
                    let rr = reflect(r as isize + i as isize - hr, img.rows);
                    let cc = reflect(c as isize + j as isize - hc, img.cols);
                    acc += weights[i * kc + j] * img.get(rr, cc);
                }
            }
            out[r * img.cols + c] = acc;
        }
    }
    ImageGrid::new(img.rows, img.cols, out)
}

/// Visiting order of the pixels; observing the first `round(fraction n)`
/// is uniform sampling without replacement, and masks for larger fractions
/// contain those for smaller ones.
pub fn pixel_order(n: usize, seed: u64) -> Vec<usize> {
    index::sample(&mut rng_from_seed(seed), n, n).into_vec()
}

pub fn mask_from_order(rows: usize, cols: usize, order: &[usize], fraction: f64) -> CliResult<ImageMask> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(CliError::usage(format!("observed fraction must lie in [0, 1], got {fraction}")));
    }
    let k = (fraction * (rows * cols) as f64).round() as usize;
    let mut observed = vec![false; rows * cols];
    for &i in &order[..k] {
        observed[i] = true;
    }
    Ok(ImageMask { rows, cols, observed })
}

/// Draw from a zero-mean 2D SE prior, rescaled to `[0, 1]`.
pub fn synthetic_image(rows: usize, cols: usize, lengthscale: f64, seed: u64) -> CliResult<ImageGrid> {
    let kernel = KernelSpec::se_2d(1.0, lengthscale)?;
    let pair = ConvKernelPair::auto(kernel, FilterSpec::Discrete(DiscreteFilter::grid_2d(vec![1.0], 1.0, [1, 1])?))?;
    let cov = pair.prepare()?.kx_matrix(&Locations::pixel_grid(rows, cols))?;
    let draw = mvn_sample(&DVector::zeros(rows * cols), &cov, seed)?;
    let (lo, hi) = draw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    ImageGrid::new(rows, cols, draw.iter().map(|v| (v - lo) / (hi - lo)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageTraining {
    /// Learn the filter weights too.
    #[serde(default)]
    pub blind: bool,
    #[serde(default)]
    pub fit: FitConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSetup {
    pub truth: ImageGrid,
    pub weights: Vec<f64>,
    pub kshape: [usize; 2],
    pub kernel: KernelSpec,
    pub noise_sd: f64,
    pub training: Option<ImageTraining>,
    pub wiener_noise_to_signal: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ImageData {
    pub convolution: ImageGrid,
    pub noisy: ImageGrid,
    pub order: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub fraction: f64,
    pub mask: ImageMask,
    pub estimate: ImageGrid,
    pub mse: f64,
    pub kernel: KernelSpec,
    pub filter: FilterSpec,
    pub noise_var: f64,
    pub fit: Option<FitResult>,
}

pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

impl ImageSetup {
    pub fn filter_spec(&self) -> CliResult<FilterSpec> {
        Ok(FilterSpec::Discrete(DiscreteFilter::grid_2d(self.weights.clone(), 1.0, self.kshape)?))
    }

    /// Blurred truth, its noisy version and the seeded pixel order.
    pub fn simulate(&self) -> CliResult<ImageData> {
        let convolution = convolve_reflect(&self.truth, &self.weights, self.kshape)?;
        let n = convolution.values.len();
        let eps = standard_normals(&mut rng_from_seed(self.seed), n);
        let noisy = convolution.values.iter().zip(eps.iter()).map(|(f, e)| f + self.noise_sd * e).collect();
        Ok(ImageData {
            noisy: ImageGrid::new(self.truth.rows, self.truth.cols, noisy)?,
            convolution,
            order: pixel_order(n, self.seed.wrapping_add(1)),
        })
    }

    pub fn reconstruct(&self, data: &ImageData, fraction: f64) -> CliResult<Reconstruction> {
        let (rows, cols) = (self.truth.rows, self.truth.cols);
        let mask = mask_from_order(rows, cols, &data.order, fraction)?;
        if mask.count() == 0 {
            return Err(CliError::usage(format!("observed fraction {fraction} leaves no pixels")));
        }
        let noise_var = self.noise_sd * self.noise_sd;
        let obs = ObservationSet::from_image(&data.noisy.values, mask.clone(), noise_var)?;
        let (kernel, filter, noise_var, fit_result) = match &self.training {
            None => (self.kernel.clone(), self.filter_spec()?, noise_var, None),
            Some(t) => {
                let filter = if t.blind {
                    let m = self.kshape[0] * self.kshape[1];
                    FilterSpec::Discrete(DiscreteFilter::grid_2d(vec![1.0 / m as f64; m], 1.0, self.kshape)?)
                } else {
                    self.filter_spec()?
                };
                let mut model = TrainableModel::new(self.kernel.clone(), filter, noise_var.max(1e-6))?;
                if !t.blind {
                    model = model.fix("filter.weights")?.with_free("source.sigma")?;
                }
                let res = fit(&obs, &model.initialize(&obs), &t.fit)?;
                (res.source.clone(), res.filter.clone(), res.noise_var, Some(res))
            }
        };
        let pair = ConvKernelPair::auto(kernel.clone(), filter.clone())?;
        let mean = Deconvolver::new(&obs.with_noise_var(noise_var)?, pair)?.source_mean(&Locations::pixel_grid(rows, cols))?;
        let estimate = ImageGrid::new(rows, cols, mean.iter().copied().collect())?;
        Ok(Reconstruction {
            fraction,
            mse: mse(&estimate.values, &self.truth.values),
            mask,
            estimate,
            kernel,
            filter,
            noise_var,
            fit: fit_result,
        })
    }

    /// Wiener deconvolution of the complete noiseless blurred image.
    pub fn wiener(&self, data: &ImageData) -> CliResult<ImageGrid> {
        // f is a correlation with w; the classical convolution kernel is w reversed.
        let flipped: Vec<f64> = self.weights.iter().rev().copied().collect();
        let values = wiener_deconv_2d(
            &data.convolution.values,
            [self.truth.rows, self.truth.cols],
            &flipped,
            self.kshape,
            self.wiener_noise_to_signal,
        )?;
        ImageGrid::new(self.truth.rows, self.truth.cols, values)
    }
}
