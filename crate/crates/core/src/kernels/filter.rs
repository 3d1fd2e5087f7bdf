use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::repr::RawSpec;
use super::{check_positive, gaussian_ft, sinc};
use crate::error::{domain, param, GpdcError, Result};
use crate::locations::Locations;

/// Layout of a 2D discrete filter: row-major weights on a regular grid centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub step: f64,
    pub shape: [usize; 2],
}

/// Weighted sum of Dirac deltas `h(t) = Σ w_i δ(t - l_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFilter {
    weights: Vec<f64>,
    locations: Locations,
    grid: Option<GridLayout>,
}

impl DiscreteFilter {
    /// 1D filter; locations must be strictly increasing.
    pub fn new(weights: Vec<f64>, locations: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return param("discrete filter needs at least one weight");
        }
        if weights.len() != locations.len() {
            return param(format!("{} weights but {} locations", weights.len(), locations.len()));
        }
        if weights.iter().chain(&locations).any(|v| !v.is_finite()) {
            return param("discrete filter weights and locations must be finite");
        }
        if locations.windows(2).any(|w| w[1] <= w[0]) {
            return param("discrete filter locations must be strictly increasing");
        }
        Ok(Self { weights, locations: Locations::one_d(locations), grid: None })
    }

    /// Unit Dirac at the origin, the identity of convolution.
    pub fn dirac() -> Self {
        Self { weights: vec![1.0], locations: Locations::one_d(vec![0.0]), grid: None }
    }

    /// `m` uniformly spaced taps (midpoints of `m` cells over `span`).
    pub fn uniform_locations(m: usize, span: (f64, f64)) -> Vec<f64> {
        let step = (span.1 - span.0) / m as f64;
        (0..m).map(|i| span.0 + (i as f64 + 0.5) * step).collect()
    }

    /// 2D filter with row-major weights on a `shape` grid of spacing `step`, centred at the origin.
    pub fn grid_2d(weights: Vec<f64>, step: f64, shape: [usize; 2]) -> Result<Self> {
        check_positive("grid_step", step)?;
        let [rows, cols] = shape;
        if rows == 0 || cols == 0 || rows * cols != weights.len() {
            return param(format!("grid shape {rows}x{cols} does not match {} weights", weights.len()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return param("discrete filter weights must be finite");
        }
        let r0 = (rows as f64 - 1.0) / 2.0;
        let c0 = (cols as f64 - 1.0) / 2.0;
        let mut coords = Vec::with_capacity(2 * weights.len());
        for r in 0..rows {
            for c in 0..cols {
                coords.push((r as f64 - r0) * step);
                coords.push((c as f64 - c0) * step);
            }
        }
        Ok(Self {
            weights,
            locations: Locations::from_flat(2, coords)?,
            grid: Some(GridLayout { step, shape }),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn locations(&self) -> &Locations {
        &self.locations
    }

    pub fn grid(&self) -> Option<GridLayout> {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.locations.dim()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Same locations, new weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.weights.len() {
            return param("weight count must stay unchanged");
        }
        Ok(Self { weights, ..self.clone() })
    }

    /// Translates every tap by `delta` (1D only).
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        let locs = self.locations.as_1d()?;
        Self::new(self.weights.clone(), locs.iter().map(|l| l + delta).collect())
    }

    pub fn transfer(&self, freq: f64) -> Result<Complex64> {
        let locs = self.locations.as_1d()?;
        Ok(self
            .weights
            .iter()
            .zip(locs)
            .map(|(w, l)| Complex64::from_polar(*w, -2.0 * std::f64::consts::PI * freq * l))
            .sum())
    }
}

/// Convolution filter `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub enum FilterSpec {
    Se { sigma: f64, lengthscale: f64 },
    Sinc { sigma: f64, width: f64 },
    /// Bartlett window `σ² max(1 - 2|t|/Δ, 0)`.
    Triangular { sigma: f64, width: f64 },
    Discrete(DiscreteFilter),
}

impl FilterSpec {
    pub fn se(sigma: f64, lengthscale: f64) -> Result<Self> {
        let spec = Self::Se { sigma, lengthscale };
        spec.validate()?;
        Ok(spec)
    }

    pub fn se_rate(sigma: f64, gamma: f64) -> Result<Self> {
        check_positive("gamma", gamma)?;
        Self::se(sigma, super::lengthscale_from_rate(gamma))
    }

    /// SE filter scaled to unit area.
    pub fn se_normalized(lengthscale: f64) -> Result<Self> {
        check_positive("lengthscale", lengthscale)?;
        let sigma2 = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * lengthscale);
        Self::se(sigma2.sqrt(), lengthscale)
    }

    pub fn sinc(sigma: f64, width: f64) -> Result<Self> {
        let spec = Self::Sinc { sigma, width };
        spec.validate()?;
        Ok(spec)
    }

    pub fn triangular(sigma: f64, width: f64) -> Result<Self> {
        let spec = Self::Triangular { sigma, width };
        spec.validate()?;
        Ok(spec)
    }

    pub fn discrete(weights: Vec<f64>, locations: Vec<f64>) -> Result<Self> {
        Ok(Self::Discrete(DiscreteFilter::new(weights, locations)?))
    }

    pub fn dirac() -> Self {
        Self::Discrete(DiscreteFilter::dirac())
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Se { sigma, lengthscale } => {
                check_positive("sigma", sigma)?;
                check_positive("lengthscale", lengthscale)
            }
            Self::Sinc { sigma, width } | Self::Triangular { sigma, width } => {
                check_positive("sigma", sigma)?;
                check_positive("width", width)
            }
            Self::Discrete(ref d) => {
                if d.weights.is_empty() || d.weights.iter().any(|w| !w.is_finite()) {
                    return param("discrete filter weights must be non-empty and finite");
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Discrete(d) => d.dim(),
            _ => 1,
        }
    }

    pub fn as_discrete(&self) -> Option<&DiscreteFilter> {
        match self {
            Self::Discrete(d) => Some(d),
            _ => None,
        }
    }

    /// Pointwise value of a continuous filter.
    pub fn eval(&self, lag: f64) -> Result<f64> {
        self.validate()?;
        match self {
            Self::Discrete(_) => Err(GpdcError::UnsupportedOperation(
                "a discrete filter is a measure; use the covariance discrete sums instead".into(),
            )),
            _ => Ok(self.value(lag)),
        }
    }

    #[inline]
    pub(crate) fn value(&self, t: f64) -> f64 {
        match *self {
            Self::Se { sigma, lengthscale } => sigma * sigma * (-0.5 * t * t / (lengthscale * lengthscale)).exp(),
            Self::Sinc { sigma, width } => sigma * sigma * sinc(width * t),
            Self::Triangular { sigma, width } => sigma * sigma * (1.0 - 2.0 * t.abs() / width).max(0.0),
            Self::Discrete(_) => f64::NAN,
        }
    }

    /// Fourier transform of the filter.
    pub fn transfer(&self, freq: f64) -> Result<Complex64> {
        self.validate()?;
        match self {
            Self::Discrete(d) => d.transfer(freq),
            _ => Ok(Complex64::new(self.transfer_real(freq), 0.0)),
        }
    }

    /// Transfer of the even continuous variants (real valued).
    #[inline]
    pub(crate) fn transfer_real(&self, freq: f64) -> f64 {
        match *self {
            Self::Se { sigma, lengthscale } => sigma * sigma * gaussian_ft(lengthscale, freq),
            Self::Sinc { sigma, width } => {
                if freq.abs() <= 0.5 * width {
                    sigma * sigma / width
                } else {
                    0.0
                }
            }
            Self::Triangular { sigma, width } => {
                let half = 0.5 * width;
                let s = sinc(half * freq);
                sigma * sigma * half * s * s
            }
            Self::Discrete(_) => f64::NAN,
        }
    }

    pub(crate) fn spectral_breakpoints(&self) -> Vec<f64> {
        match *self {
            Self::Sinc { width, .. } => vec![-0.5 * width, 0.5 * width],
            _ => Vec::new(),
        }
    }

    /// `∫|h|` for integrable continuous filters.
    pub fn l1_norm(&self) -> Option<f64> {
        match *self {
            Self::Se { sigma, lengthscale } => Some(sigma * sigma * (2.0 * std::f64::consts::PI).sqrt() * lengthscale),
            Self::Triangular { sigma, width } => Some(0.5 * sigma * sigma * width),
            _ => None,
        }
    }

    /// Default quadrature span: the support for compact filters, eight scales otherwise.
    pub fn default_span(&self) -> Result<(f64, f64)> {
        match *self {
            Self::Se { lengthscale, .. } => Ok((-8.0 * lengthscale, 8.0 * lengthscale)),
            Self::Sinc { width, .. } => Ok((-8.0 / width, 8.0 / width)),
            Self::Triangular { width, .. } => Ok((-0.5 * width, 0.5 * width)),
            Self::Discrete(_) => Err(GpdcError::UnsupportedOperation("discrete filters have no quadrature span".into())),
        }
    }

    /// Midpoint-rule discretization into `m` Dirac taps over `span`.
    pub fn discretize(&self, m: usize, span: (f64, f64)) -> Result<FilterSpec> {
        self.validate()?;
        if matches!(self, Self::Discrete(_)) {
            return Err(GpdcError::UnsupportedOperation("filter is already discrete".into()));
        }
        if m == 0 {
            return param("discretization needs at least one node");
        }
        let (lo, hi) = span;
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return domain(format!("discretization span [{lo}, {hi}] has no positive length"));
        }
        let step = (hi - lo) / m as f64;
        let locations = DiscreteFilter::uniform_locations(m, span);
        let weights = locations.iter().map(|&l| self.value(l) * step).collect();
        FilterSpec::discrete(weights, locations)
    }
}
