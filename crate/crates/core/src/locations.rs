use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// A finite set of input locations in one or two dimensions, stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Locations {
    dim: usize,
    coords: Vec<f64>,
}

impl Locations {
    pub fn one_d(values: Vec<f64>) -> Self {
        Self { dim: 1, coords: values }
    }

    pub fn two_d(points: &[[f64; 2]]) -> Self {
        Self { dim: 2, coords: points.iter().flatten().copied().collect() }
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return domain(format!("{} coordinates do not split into points of dimension {dim}", coords.len()));
        }
        Ok(Self { dim, coords })
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, coords: Vec::new() }
    }

    /// `n` evenly spaced points covering `[start, end]` inclusive.
    pub fn linspace(start: f64, end: f64, n: usize) -> Self {
        Self::one_d(linspace(start, end, n))
    }

    /// Row-major pixel centres `(row, col)` of a `rows x cols` grid with unit spacing.
    pub fn pixel_grid(rows: usize, cols: usize) -> Self {
        let mut coords = Vec::with_capacity(2 * rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                coords.push(r as f64);
                coords.push(c as f64);
            }
        }
        Self { dim: 2, coords }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    /// Scalar coordinates of a 1D set.
    pub fn as_1d(&self) -> Result<&[f64]> {
        if self.dim != 1 {
            return Err(crate::GpdcError::UnsupportedDimension(format!(
                "expected 1D locations, found dimension {}",
                self.dim
            )));
        }
        Ok(&self.coords)
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        Self { dim: self.dim, coords }
    }

    /// Concatenation of two sets with equal dimension.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return domain("cannot concatenate locations of different dimension");
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        Ok(Self { dim: self.dim, coords })
    }
}

pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (n - 1) as f64;
            (0..n).map(|i| start + step * i as f64).collect()
        }
    }
}

/// Writes `a - b` into `out`.
#[inline]
pub(crate) fn lag_into(a: &[f64], b: &[f64], out: &mut [f64]) {
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o = x - y;
    }
}
