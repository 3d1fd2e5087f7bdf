//! JSON form shared by kernels and filters:
//! `{"type": "se"|"sinc"|"sm"|"triangular"|"discrete", <parameters>, "dim": 1|2}`.

use serde::{Deserialize, Serialize};

use super::filter::{DiscreteFilter, FilterSpec};
use super::source::KernelSpec;
use super::{check_positive, lengthscale_from_rate};
use crate::error::{param, GpdcError, Result};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawSpec {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lengthscale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    freq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    locations: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid_shape: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
}

impl RawSpec {
    fn require(&self, name: &str, value: Option<f64>) -> Result<f64> {
        value.ok_or_else(|| GpdcError::ParameterDomain(format!("'{}' spec is missing '{name}'", self.kind)))
    }

    /// Lengthscale given directly or through the rate `gamma`.
    fn lengthscale(&self) -> Result<f64> {
        match (self.lengthscale, self.gamma) {
            (Some(_), Some(_)) => param("give either 'lengthscale' or 'gamma', not both"),
            (Some(l), None) => Ok(l),
            (None, Some(g)) => {
                check_positive("gamma", g)?;
                Ok(lengthscale_from_rate(g))
            }
            (None, None) => param(format!("'{}' spec is missing 'lengthscale' (or 'gamma')", self.kind)),
        }
    }

    fn reject_extra(&self, allowed: &[&str]) -> Result<()> {
        let present = [
            ("sigma", self.sigma.is_some()),
            ("lengthscale", self.lengthscale.is_some() || self.gamma.is_some()),
            ("width", self.width.is_some()),
            ("freq", self.freq.is_some()),
            ("weights", self.weights.is_some()),
            ("locations", self.locations.is_some()),
            ("grid_step", self.grid_step.is_some()),
            ("grid_shape", self.grid_shape.is_some()),
        ];
        for (name, set) in present {
            if set && !allowed.contains(&name) {
                return param(format!("'{name}' is not a parameter of a '{}' spec", self.kind));
            }
        }
        Ok(())
    }
}

impl TryFrom<RawSpec> for KernelSpec {
    type Error = GpdcError;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let dim = raw.dim.unwrap_or(1);
        let spec = match raw.kind.as_str() {
            "se" => {
                raw.reject_extra(&["sigma", "lengthscale"])?;
                KernelSpec::Se { sigma: raw.require("sigma", raw.sigma)?, lengthscale: raw.lengthscale()?, dim }
            }
            "sinc" => {
                raw.reject_extra(&["sigma", "width"])?;
                KernelSpec::Sinc { sigma: raw.require("sigma", raw.sigma)?, width: raw.require("width", raw.width)? }
            }
            "sm" => {
                raw.reject_extra(&["sigma", "lengthscale", "freq"])?;
                KernelSpec::Sm {
                    sigma: raw.require("sigma", raw.sigma)?,
                    lengthscale: raw.lengthscale()?,
                    freq: raw.require("freq", raw.freq)?,
                }
            }
            other => return param(format!("unknown kernel type '{other}'")),
        };
        if dim != spec.dim() && !matches!(spec, KernelSpec::Se { .. }) {
            return Err(GpdcError::UnsupportedDimension(format!("'{}' kernels are 1D only", raw.kind)));
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl From<KernelSpec> for RawSpec {
    fn from(spec: KernelSpec) -> Self {
        match spec {
            KernelSpec::Se { sigma, lengthscale, dim } => RawSpec {
                kind: "se".into(),
                sigma: Some(sigma),
                lengthscale: Some(lengthscale),
                dim: Some(dim),
                ..Default::default()
            },
            KernelSpec::Sinc { sigma, width } => RawSpec {
                kind: "sinc".into(),
                sigma: Some(sigma),
                width: Some(width),
                dim: Some(1),
                ..Default::default()
            },
            KernelSpec::Sm { sigma, lengthscale, freq } => RawSpec {
                kind: "sm".into(),
                sigma: Some(sigma),
                lengthscale: Some(lengthscale),
                freq: Some(freq),
                dim: Some(1),
                ..Default::default()
            },
        }
    }
}

impl TryFrom<RawSpec> for FilterSpec {
    type Error = GpdcError;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let dim = raw.dim.unwrap_or(1);
        let spec = match raw.kind.as_str() {
            "se" => {
                raw.reject_extra(&["sigma", "lengthscale"])?;
                FilterSpec::Se { sigma: raw.require("sigma", raw.sigma)?, lengthscale: raw.lengthscale()? }
            }
            "sinc" => {
                raw.reject_extra(&["sigma", "width"])?;
                FilterSpec::Sinc { sigma: raw.require("sigma", raw.sigma)?, width: raw.require("width", raw.width)? }
            }
            "triangular" => {
                raw.reject_extra(&["sigma", "width"])?;
                FilterSpec::Triangular {
                    sigma: raw.require("sigma", raw.sigma)?,
                    width: raw.require("width", raw.width)?,
                }
            }
            "discrete" => {
                let weights = raw
                    .weights
                    .clone()
                    .ok_or_else(|| GpdcError::ParameterDomain("'discrete' spec is missing 'weights'".into()))?;
                match dim {
                    1 => {
                        raw.reject_extra(&["weights", "locations"])?;
                        let locations = raw.locations.clone().ok_or_else(|| {
                            GpdcError::ParameterDomain("'discrete' spec is missing 'locations'".into())
                        })?;
                        FilterSpec::Discrete(DiscreteFilter::new(weights, locations)?)
                    }
                    2 => {
                        raw.reject_extra(&["weights", "grid_step", "grid_shape"])?;
                        let step = raw.require("grid_step", raw.grid_step)?;
                        let shape = raw.grid_shape.ok_or_else(|| {
                            GpdcError::ParameterDomain("2D 'discrete' spec is missing 'grid_shape'".into())
                        })?;
                        FilterSpec::Discrete(DiscreteFilter::grid_2d(weights, step, shape)?)
                    }
                    d => return Err(GpdcError::UnsupportedDimension(format!("filter dimension {d}"))),
                }
            }
            other => return param(format!("unknown filter type '{other}'")),
        };
        if dim != spec.dim() {
            return Err(GpdcError::UnsupportedDimension(format!("'{}' filters are 1D only", raw.kind)));
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl From<FilterSpec> for RawSpec {
    fn from(spec: FilterSpec) -> Self {
        match spec {
            FilterSpec::Se { sigma, lengthscale } => RawSpec {
                kind: "se".into(),
                sigma: Some(sigma),
                lengthscale: Some(lengthscale),
                dim: Some(1),
                ..Default::default()
            },
            FilterSpec::Sinc { sigma, width } => RawSpec {
                kind: "sinc".into(),
                sigma: Some(sigma),
                width: Some(width),
                dim: Some(1),
                ..Default::default()
            },
            FilterSpec::Triangular { sigma, width } => RawSpec {
                kind: "triangular".into(),
                sigma: Some(sigma),
                width: Some(width),
                dim: Some(1),
                ..Default::default()
            },
            FilterSpec::Discrete(d) => match d.grid() {
                Some(grid) => RawSpec {
                    kind: "discrete".into(),
                    weights: Some(d.weights().to_vec()),
                    grid_step: Some(grid.step),
                    grid_shape: Some(grid.shape),
                    dim: Some(2),
                    ..Default::default()
                },
                None => RawSpec {
                    kind: "discrete".into(),
                    weights: Some(d.weights().to_vec()),
                    locations: Some(d.locations().as_flat().to_vec()),
                    dim: Some(1),
                    ..Default::default()
                },
            },
        }
    }
}
