//! Convolved covariances.
//!
//! For a source kernel `K_x` and filter `h` the convolution process has
//! covariance `K_f(t) = ∫∫ h(τ') h(τ) K_x(τ - (τ' - t)) dτ dτ'` and the
//! source/convolution cross-covariance is `K_xf(t) = ∫ h(τ) K_x(τ - t) dτ`
//! with `t = t_source - t_convolution`. For a discrete filter
//! `h = Σ w_i δ_{l_i}` these become
//! `K_f(t) = Σ_i Σ_j w_i w_j K_x(l_i - (l_j - t))` and
//! `K_xf(t) = Σ_i w_i K_x(l_i - t)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, GpdcError, Result};
use crate::kernels::{sinc, FilterSpec, KernelSpec};
use crate::locations::{lag_into, Locations};

/// How `K_f` and `K_xf` are computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovMethod {
    /// Closed forms for SE/SE and Sinc/Sinc pairs.
    Analytic,
    /// Finite sums for discrete filters.
    DiscreteSum,
    /// Tensor-product midpoint rule: the filter is discretized into `nodes` taps over `span`.
    Quadrature {
        #[serde(default = "default_nodes")]
        nodes: usize,
        #[serde(default)]
        span: Option<(f64, f64)>,
    },
}

fn default_nodes() -> usize {
    801
}

impl CovMethod {
    pub fn quadrature() -> Self {
        Self::Quadrature { nodes: default_nodes(), span: None }
    }

    /// Analytic when available, discrete sums for discrete filters, quadrature otherwise.
    pub fn auto(source: &KernelSpec, filter: &FilterSpec) -> Self {
        match (source, filter) {
            (_, FilterSpec::Discrete(_)) => Self::DiscreteSum,
            (KernelSpec::Se { dim: 1, .. }, FilterSpec::Se { .. }) | (KernelSpec::Sinc { .. }, FilterSpec::Sinc { .. }) => {
                Self::Analytic
            }
            _ => Self::quadrature(),
        }
    }
}

/// A source kernel, a filter, and the method used to combine them.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernelPair {
    pub source: KernelSpec,
    pub filter: FilterSpec,
    pub method: CovMethod,
}

impl ConvKernelPair {
    pub fn new(source: KernelSpec, filter: FilterSpec, method: CovMethod) -> Result<Self> {
        let pair = Self { source, filter, method };
        pair.validate()?;
        Ok(pair)
    }

    pub fn auto(source: KernelSpec, filter: FilterSpec) -> Result<Self> {
        let method = CovMethod::auto(&source, &filter);
        Self::new(source, filter, method)
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.filter.validate()?;
        if self.source.dim() != self.filter.dim() {
            return Err(GpdcError::UnsupportedDimension(format!(
                "{}D source with {}D filter",
                self.source.dim(),
                self.filter.dim()
            )));
        }
        match (self.method, &self.source, &self.filter) {
            (CovMethod::Analytic, KernelSpec::Se { dim: 1, .. }, FilterSpec::Se { .. })
            | (CovMethod::Analytic, KernelSpec::Sinc { .. }, FilterSpec::Sinc { .. }) => Ok(()),
            (CovMethod::Analytic, k, h) => Err(GpdcError::UnsupportedCombination(format!(
                "no closed form for {} source with {} filter",
                kernel_name(k),
                filter_name(h)
            ))),
            (CovMethod::DiscreteSum, _, FilterSpec::Discrete(_)) => Ok(()),
            (CovMethod::DiscreteSum, _, h) => Err(GpdcError::UnsupportedCombination(format!(
                "discrete sums need a discrete filter, got {}",
                filter_name(h)
            ))),
            (CovMethod::Quadrature { .. }, _, FilterSpec::Discrete(_)) => Err(GpdcError::UnsupportedCombination(
                "quadrature applies to continuous filters; use discrete sums".into(),
            )),
            (CovMethod::Quadrature { nodes, span }, _, _) => {
                if nodes == 0 {
                    return domain("quadrature needs at least one node");
                }
                if let Some((a, b)) = span {
                    if !(b > a) {
                        return domain("quadrature span must have positive length");
                    }
                }
                Ok(())
            }
        }
    }

    /// Precomputes whatever the method needs for repeated evaluation.
    pub fn prepare(&self) -> Result<ConvKernel> {
        ConvKernel::new(self)
    }
}

fn kernel_name(k: &KernelSpec) -> &'static str {
    match k {
        KernelSpec::Se { .. } => "SE",
        KernelSpec::Sinc { .. } => "Sinc",
        KernelSpec::Sm { .. } => "SM",
    }
}

fn filter_name(h: &FilterSpec) -> &'static str {
    match h {
        FilterSpec::Se { .. } => "SE",
        FilterSpec::Sinc { .. } => "Sinc",
        FilterSpec::Triangular { .. } => "triangular",
        FilterSpec::Discrete(_) => "discrete",
    }
}

#[derive(Debug, Clone)]
enum Repr {
    /// Both covariances are SE: `amp * exp(-t² / (2 l²))`.
    SeSe { kf_amp: f64, kf_len: f64, kxf_amp: f64, kxf_len: f64 },
    /// Both covariances are Sinc-shaped with bandwidth `band`: `amp * sinc(band t)`.
    SincSinc { kf_amp: f64, kxf_amp: f64, band: f64 },
    Taps(Taps),
}

/// Discrete filter taps plus the collapsed autocorrelation used for `K_f`.
#[derive(Debug, Clone)]
struct Taps {
    dim: usize,
    weights: Vec<f64>,
    locations: Vec<f64>,
    /// `(offset, coefficient)` pairs with `K_f(t) = Σ c K_x(offset + t)`.
    auto_offsets: Vec<f64>,
    auto_coefs: Vec<f64>,
}

impl Taps {
    fn new(weights: &[f64], locations: &Locations, grid_step: Option<(f64, [usize; 2])>) -> Self {
        let dim = locations.dim();
        let m = weights.len();
        let flat = locations.as_flat().to_vec();
        let (auto_offsets, auto_coefs) = match (dim, grid_step) {
            (2, Some((step, [rows, cols]))) => {
                // Offsets on a regular grid collapse to (2 rows - 1) x (2 cols - 1) lags.
                let (rr, cc) = (2 * rows - 1, 2 * cols - 1);
                let mut coefs = vec![0.0; rr * cc];
                for i in 0..m {
                    for j in 0..m {
                        let dr = (i / cols) as isize - (j / cols) as isize + rows as isize - 1;
                        let dc = (i % cols) as isize - (j % cols) as isize + cols as isize - 1;
                        coefs[dr as usize * cc + dc as usize] += weights[i] * weights[j];
                    }
                }
                let mut offsets = Vec::with_capacity(2 * rr * cc);
                for r in 0..rr {
                    for c in 0..cc {
                        offsets.push((r as f64 - (rows as f64 - 1.0)) * step);
                        offsets.push((c as f64 - (cols as f64 - 1.0)) * step);
                    }
                }
                (offsets, coefs)
            }
            (1, _) if m > 1 && is_uniform(&flat) => {
                let step = (flat[m - 1] - flat[0]) / (m - 1) as f64;
                let mut coefs = vec![0.0; 2 * m - 1];
                for i in 0..m {
                    for j in 0..m {
                        coefs[i + m - 1 - j] += weights[i] * weights[j];
                    }
                }
                let offsets = (0..2 * m - 1).map(|k| (k as f64 - (m as f64 - 1.0)) * step).collect();
                (offsets, coefs)
            }
            _ => {
                let mut offsets = Vec::with_capacity(m * m * dim);
                let mut coefs = Vec::with_capacity(m * m);
                for i in 0..m {
                    for j in 0..m {
                        for d in 0..dim {
                            offsets.push(flat[i * dim + d] - flat[j * dim + d]);
                        }
                        coefs.push(weights[i] * weights[j]);
                    }
                }
                (offsets, coefs)
            }
        };
        Self { dim, weights: weights.to_vec(), locations: flat, auto_offsets, auto_coefs }
    }

    fn kf(&self, source: &KernelSpec, lag: &[f64]) -> f64 {
        let mut buf = [0.0; 2];
        let buf = &mut buf[..self.dim];
        let mut acc = 0.0;
        for (off, c) in self.auto_offsets.chunks_exact(self.dim).zip(&self.auto_coefs) {
            for d in 0..self.dim {
                buf[d] = off[d] + lag[d];
            }
            acc += c * source.value(buf);
        }
        acc
    }

    fn kxf(&self, source: &KernelSpec, lag: &[f64]) -> f64 {
        let mut buf = [0.0; 2];
        let buf = &mut buf[..self.dim];
        let mut acc = 0.0;
        for (loc, w) in self.locations.chunks_exact(self.dim).zip(&self.weights) {
            for d in 0..self.dim {
                buf[d] = loc[d] - lag[d];
            }
            acc += w * source.value(buf);
        }
        acc
    }
}

fn is_uniform(locs: &[f64]) -> bool {
    let m = locs.len();
    let step = (locs[m - 1] - locs[0]) / (m - 1) as f64;
    let tol = 1e-9 * step.abs();
    locs.iter().enumerate().all(|(i, l)| (l - (locs[0] + step * i as f64)).abs() <= tol)
}

/// Prepared `K_x`, `K_f` and `K_xf` evaluators for one kernel/filter pair.
#[derive(Debug, Clone)]
pub struct ConvKernel {
    source: KernelSpec,
    repr: Repr,
}

impl ConvKernel {
    pub fn new(pair: &ConvKernelPair) -> Result<Self> {
        pair.validate()?;
        let source = pair.source.clone();
        let repr = match (pair.method, &pair.source, &pair.filter) {
            (CovMethod::Analytic, KernelSpec::Se { sigma: sx, lengthscale: lx, .. }, FilterSpec::Se { sigma: sh, lengthscale: lh }) => {
                // Products of Gaussian spectra: K̂_f = K̂_x ĥ², K̂_xf = K̂_x ĥ.
                let (vx, vh) = (sx * sx, sh * sh);
                let kf_len = (lx * lx + 2.0 * lh * lh).sqrt();
                let kxf_len = (lx * lx + lh * lh).sqrt();
                Repr::SeSe {
                    kf_amp: vx * vh * vh * 2.0 * PI * lh * lh * lx / kf_len,
                    kf_len,
                    kxf_amp: vx * vh * (2.0 * PI).sqrt() * lx * lh / kxf_len,
                    kxf_len,
                }
            }
            (CovMethod::Analytic, KernelSpec::Sinc { sigma: sx, width: wx }, FilterSpec::Sinc { sigma: sh, width: wh }) => {
                // Product of rectangles is a rectangle of width min(Δx, Δh).
                let (vx, vh) = (sx * sx, sh * sh);
                let band = wx.min(*wh);
                Repr::SincSinc {
                    kf_amp: vx * vh * vh * band / (wx * wh * wh),
                    kxf_amp: vx * vh * band / (wx * wh),
                    band,
                }
            }
            (CovMethod::DiscreteSum, _, FilterSpec::Discrete(d)) => {
                Repr::Taps(Taps::new(d.weights(), d.locations(), d.grid().map(|g| (g.step, g.shape))))
            }
            (CovMethod::Quadrature { nodes, span }, _, h) => {
                let span = match span {
                    Some(s) => s,
                    None => h.default_span()?,
                };
                let disc = h.discretize(nodes, span)?;
                let d = disc.as_discrete().expect("discretize returns a discrete filter");
                Repr::Taps(Taps::new(d.weights(), d.locations(), None))
            }
            _ => unreachable!("validated above"),
        };
        Ok(Self { source, repr })
    }

    pub fn source(&self) -> &KernelSpec {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    #[inline]
    pub fn kx(&self, lag: &[f64]) -> f64 {
        self.source.value(lag)
    }

    /// Covariance of the convolution process at `lag`.
    #[inline]
    pub fn kf(&self, lag: &[f64]) -> f64 {
        match &self.repr {
            Repr::SeSe { kf_amp, kf_len, .. } => kf_amp * (-0.5 * lag[0] * lag[0] / (kf_len * kf_len)).exp(),
            Repr::SincSinc { kf_amp, band, .. } => kf_amp * sinc(band * lag[0]),
            Repr::Taps(t) => t.kf(&self.source, lag),
        }
    }

    /// Cross-covariance `Cov(x(s), f(t))` at `lag = s - t`.
    #[inline]
    pub fn kxf(&self, lag: &[f64]) -> f64 {
        match &self.repr {
            Repr::SeSe { kxf_amp, kxf_len, .. } => kxf_amp * (-0.5 * lag[0] * lag[0] / (kxf_len * kxf_len)).exp(),
            Repr::SincSinc { kxf_amp, band, .. } => kxf_amp * sinc(band * lag[0]),
            Repr::Taps(t) => t.kxf(&self.source, lag),
        }
    }

    fn check_dim(&self, locs: &Locations) -> Result<()> {
        if locs.dim() != self.dim() {
            return Err(GpdcError::Domain(format!(
                "{}D locations for a {}D covariance",
                locs.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Symmetric matrix `[k(a_i - a_j)]`, upper triangle evaluated and mirrored.
    fn symmetric(&self, a: &Locations, k: impl Fn(&Self, &[f64]) -> f64 + Sync) -> Result<DMatrix<f64>> {
        self.check_dim(a)?;
        let n = a.len();
        let dim = a.dim();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut lag = [0.0; 2];
                let pi = a.point(i);
                (i..n)
                    .map(|j| {
                        lag_into(pi, a.point(j), &mut lag[..dim]);
                        k(self, &lag[..dim])
                    })
                    .collect()
            })
            .collect();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            for (off, v) in row.iter().enumerate() {
                m[(i, i + off)] = *v;
                m[(i + off, i)] = *v;
            }
        }
        Ok(m)
    }

    fn cross(&self, a: &Locations, b: &Locations, k: impl Fn(&Self, &[f64]) -> f64 + Sync) -> Result<DMatrix<f64>> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        let (n, m) = (a.len(), b.len());
        let dim = a.dim();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut lag = [0.0; 2];
                let pi = a.point(i);
                (0..m)
                    .map(|j| {
                        lag_into(pi, b.point(j), &mut lag[..dim]);
                        k(self, &lag[..dim])
                    })
                    .collect()
            })
            .collect();
        Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub fn kx_matrix(&self, a: &Locations) -> Result<DMatrix<f64>> {
        self.symmetric(a, Self::kx)
    }

    pub fn kf_matrix(&self, a: &Locations) -> Result<DMatrix<f64>> {
        self.symmetric(a, Self::kf)
    }

    /// `[K_x(a_i - b_j)]`.
    pub fn kx_cross(&self, a: &Locations, b: &Locations) -> Result<DMatrix<f64>> {
        self.cross(a, b, Self::kx)
    }

    /// `[K_f(a_i - b_j)]`.
    pub fn kf_cross(&self, a: &Locations, b: &Locations) -> Result<DMatrix<f64>> {
        self.cross(a, b, Self::kf)
    }

    /// `[K_xf(source_i - conv_j)]`.
    pub fn kxf_matrix(&self, source: &Locations, conv: &Locations) -> Result<DMatrix<f64>> {
        self.cross(source, conv, Self::kxf)
    }
}

/// `K_f` of a pair at one lag (checked).
pub fn kf_eval(pair: &ConvKernelPair, lag: &[f64]) -> Result<f64> {
    let k = pair.prepare()?;
    check_lag(&k, lag)?;
    Ok(k.kf(lag))
}

/// `K_xf` of a pair at one lag (checked).
pub fn kxf_eval(pair: &ConvKernelPair, lag: &[f64]) -> Result<f64> {
    let k = pair.prepare()?;
    check_lag(&k, lag)?;
    Ok(k.kxf(lag))
}

fn check_lag(k: &ConvKernel, lag: &[f64]) -> Result<()> {
    if lag.len() != k.dim() {
        return Err(GpdcError::UnsupportedDimension(format!("lag of dimension {} for a {}D pair", lag.len(), k.dim())));
    }
    Ok(())
}

/// Dense covariance blocks for observation and query location sets.
#[derive(Debug, Clone)]
pub struct CovarianceBundle {
    /// `K_x` over queries.
    pub kx: DMatrix<f64>,
    /// `K_f` over observations.
    pub kf: DMatrix<f64>,
    /// `K_xf` between queries (rows) and observations (columns).
    pub kxf: DMatrix<f64>,
    pub noise_var: f64,
    /// `K_f + σ_n² I`.
    pub ky: DMatrix<f64>,
}

pub fn build_bundle(
    source: &KernelSpec,
    filter: &FilterSpec,
    method: CovMethod,
    obs: &Locations,
    queries: &Locations,
    noise_var: f64,
) -> Result<CovarianceBundle> {
    if obs.is_empty() || queries.is_empty() {
        return domain("covariance bundle needs nonempty observation and query sets");
    }
    if !(noise_var.is_finite() && noise_var >= 0.0) {
        return domain(format!("noise variance must be >= 0, got {noise_var}"));
    }
    let k = ConvKernelPair::new(source.clone(), filter.clone(), method)?.prepare()?;
    bundle_from_kernel(&k, obs, queries, noise_var)
}

pub(crate) fn bundle_from_kernel(k: &ConvKernel, obs: &Locations, queries: &Locations, noise_var: f64) -> Result<CovarianceBundle> {
    let kx = k.kx_matrix(queries)?;
    let kf = k.kf_matrix(obs)?;
    let kxf = k.kxf_matrix(queries, obs)?;
    let mut ky = kf.clone();
    for i in 0..ky.nrows() {
        ky[(i, i)] += noise_var;
    }
    Ok(CovarianceBundle { kx, kf, kxf, noise_var, ky })
}

/// Numerical `∫|K_f|` against the bound `‖h‖₁² ‖K_x‖₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegrabilityProbe {
    pub estimate: f64,
    pub bound: f64,
    pub passes: bool,
}

pub fn integrability_probe(pair: &ConvKernelPair, span: (f64, f64), nodes: usize) -> Result<IntegrabilityProbe> {
    if pair.filter.as_discrete().is_some() {
        return Err(GpdcError::UnsupportedOperation("a Dirac comb is a measure, not an L1 function".into()));
    }
    let h1 = pair
        .filter
        .l1_norm()
        .ok_or_else(|| GpdcError::UnsupportedOperation("filter is not integrable".into()))?;
    let k1 = pair
        .source
        .l1_norm()
        .ok_or_else(|| GpdcError::UnsupportedOperation("source kernel is not integrable".into()))?;
    if nodes == 0 || !(span.1 > span.0) {
        return domain("probe needs a positive span and at least one node");
    }
    let k = pair.prepare()?;
    let dt = (span.1 - span.0) / nodes as f64;
    let estimate = (0..nodes)
        .into_par_iter()
        .map(|i| k.kf(&[span.0 + (i as f64 + 0.5) * dt]).abs())
        .sum::<f64>()
        * dt;
    let bound = h1 * h1 * k1;
    Ok(IntegrabilityProbe { estimate, bound, passes: estimate <= bound * (1.0 + 1e-6) })
}
