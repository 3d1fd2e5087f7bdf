//! Joint sampling of a source process and its convolution.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::covops::{ConvKernel, ConvKernelPair, CovMethod};
use crate::error::{domain, Result};
use crate::gp::{cholesky, condition_mean, condition_variance, rng_from_seed, standard_normals, PsdFactor};
use crate::kernels::{FilterSpec, KernelSpec};
use crate::locations::Locations;

/// Everything needed to draw `(x, f, y)` at finite location sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerativeConfig {
    pub source: KernelSpec,
    pub filter: FilterSpec,
    #[serde(default)]
    pub method: Option<CovMethod>,
    pub source_locations: Vec<f64>,
    pub conv_locations: Vec<f64>,
    #[serde(default)]
    pub noise_var: f64,
    #[serde(default)]
    pub seed: u64,
}

impl GenerativeConfig {
    pub fn pair(&self) -> Result<ConvKernelPair> {
        let method = self.method.unwrap_or_else(|| CovMethod::auto(&self.source, &self.filter));
        ConvKernelPair::new(self.source.clone(), self.filter.clone(), method)
    }

    pub fn validate(&self) -> Result<()> {
        self.pair()?;
        if self.source.dim() != 1 {
            return Err(crate::GpdcError::UnsupportedDimension("joint sampling is one-dimensional".into()));
        }
        if self.source_locations.is_empty() || self.conv_locations.is_empty() {
            return domain("location sets must be nonempty");
        }
        if self.source_locations.iter().chain(&self.conv_locations).any(|t| !t.is_finite()) {
            return domain("locations must be finite");
        }
        if self.source_locations.windows(2).any(|w| w[1] <= w[0]) {
            return domain("source locations must be strictly increasing");
        }
        if !(self.noise_var.is_finite() && self.noise_var >= 0.0) {
            return domain(format!("noise variance must be >= 0, got {}", self.noise_var));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSample {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub y: Vec<f64>,
}

/// Precomputed factor of the joint covariance of `(x(t_x), f(t_f))`.
///
/// The source block is pivoted first, so `x` uses only the leading normals
/// and does not depend on the convolution locations; `f` then follows its
/// exact conditional law given `x`. Rank-deficient joints (a Dirac filter
/// evaluated at the source locations) give `f` equal to `x`.
#[derive(Debug, Clone)]
pub struct JointSampler {
    factor: PsdFactor,
    nx: usize,
    noise_sd: f64,
}

impl JointSampler {
    pub fn new(cfg: &GenerativeConfig) -> Result<Self> {
        cfg.validate()?;
        let kernel = cfg.pair()?.prepare()?;
        let (tx, tf) = locations(cfg);
        let (nx, nf) = (tx.len(), tf.len());
        let kx = kernel.kx_matrix(&tx)?;
        let kxf = kernel.kxf_matrix(&tx, &tf)?;
        let kf = kernel.kf_matrix(&tf)?;
        let mut joint = DMatrix::zeros(nx + nf, nx + nf);
        joint.view_mut((0, 0), (nx, nx)).copy_from(&kx);
        joint.view_mut((0, nx), (nx, nf)).copy_from(&kxf);
        joint.view_mut((nx, 0), (nf, nx)).copy_from(&kxf.transpose());
        joint.view_mut((nx, nx), (nf, nf)).copy_from(&kf);
        let reference = [Some(kx.diagonal().amax()), Some(kf.diagonal().amax())];
        let factor = PsdFactor::blocked(&joint, nx, reference)?;
        Ok(Self { factor, nx, noise_sd: cfg.noise_var.sqrt() })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> JointSample {
        let v = self.factor.sample(&DVector::zeros(self.factor.matrix().nrows()), rng);
        let (x, f) = (&v.as_slice()[..self.nx], &v.as_slice()[self.nx..]);
        let y: Vec<f64> = f.iter().zip(standard_normals(rng, f.len()).iter()).map(|(a, e)| a + self.noise_sd * e).collect();
        JointSample { x: x.to_vec(), f: f.to_vec(), y }
    }
}

fn locations(cfg: &GenerativeConfig) -> (Locations, Locations) {
    (Locations::one_d(cfg.source_locations.clone()), Locations::one_d(cfg.conv_locations.clone()))
}

/// `x ~ N(0, K_x)`, `f | x` from the Gaussian conditional, `y = f + σ_n ε`.
pub fn sample_joint(cfg: &GenerativeConfig) -> Result<JointSample> {
    let sampler = JointSampler::new(cfg)?;
    Ok(sampler.sample(&mut rng_from_seed(cfg.seed)))
}

/// Mean and marginal variance of `f(t_f)` given `x(t_x)`.
pub fn conditional_f_moments(cfg: &GenerativeConfig, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    if x.len() != cfg.source_locations.len() {
        return domain(format!("{} source values for {} source locations", x.len(), cfg.source_locations.len()));
    }
    let kernel: ConvKernel = cfg.pair()?.prepare()?;
    let (tx, tf) = locations(cfg);
    let factor = cholesky(&kernel.kx_matrix(&tx)?)?;
    let kfx = kernel.kxf_matrix(&tx, &tf)?.transpose();
    let mean = condition_mean(&kfx, &factor, &DVector::from_column_slice(x))?;
    let prior = DVector::from_element(tf.len(), kernel.kf(&[0.0]));
    let var = condition_variance(&prior, &kfx, &factor)?;
    Ok((mean.as_slice().to_vec(), var.as_slice().to_vec()))
}
