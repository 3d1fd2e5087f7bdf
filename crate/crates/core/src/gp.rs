//! Dense Gaussian linear algebra.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{domain, GpdcError, Result};

/// Jitter levels tried after a plain factorization fails, as multiples of
/// `base * mean(diag A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JitterSchedule {
    pub base: f64,
    pub multipliers: Vec<f64>,
}

impl Default for JitterSchedule {
    fn default() -> Self {
        Self { base: 1e-10, multipliers: vec![1.0, 10.0, 100.0, 1e3, 1e4] }
    }
}

impl JitterSchedule {
    /// No jitter at all.
    pub fn none() -> Self {
        Self { base: 0.0, multipliers: Vec::new() }
    }
}

/// Lower Cholesky factor of `A + jitter I`.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    l: DMatrix<f64>,
    jitter: f64,
}

impl SpdFactor {
    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn size(&self) -> usize {
        self.l.nrows()
    }

    /// `L⁻¹ b`.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        self.l.solve_lower_triangular(b).expect("factor diagonal is positive")
    }

    /// `L⁻¹ B`.
    pub fn solve_lower_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.l.solve_lower_triangular(b).expect("factor diagonal is positive")
    }

    /// `(L Lᵀ)⁻¹ b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let z = self.solve_lower(b);
        self.l.tr_solve_lower_triangular(&z).expect("factor diagonal is positive")
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// `L Lᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.l * self.l.transpose()
    }
}

/// Factor with the default jitter schedule.
pub fn cholesky(a: &DMatrix<f64>) -> Result<SpdFactor> {
    cholesky_jittered(a, &JitterSchedule::default())
}

pub fn cholesky_jittered(a: &DMatrix<f64>, schedule: &JitterSchedule) -> Result<SpdFactor> {
    if !a.is_square() {
        return domain(format!("cannot factor a {}x{} matrix", a.nrows(), a.ncols()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return domain("matrix has non-finite entries");
    }
    let n = a.nrows();
    let sym = (a + a.transpose()) * 0.5;
    let mean_diag = if n == 0 { 0.0 } else { sym.diagonal().mean() };
    let levels = std::iter::once(0.0).chain(schedule.multipliers.iter().map(|m| m * schedule.base * mean_diag));
    let mut last = (0, 0.0);
    for jitter in levels {
        match factor_rows(&sym, jitter) {
            Ok(rows) => {
                let l = DMatrix::from_row_slice(n, n, &rows);
                return Ok(SpdFactor { l, jitter });
            }
            Err(pivot) => last = (pivot, jitter),
        }
    }
    Err(GpdcError::NotPositiveDefinite { pivot: last.0, jitter: last.1 })
}

/// Row-major Cholesky of `a + jitter I`; on failure returns the failing pivot.
fn factor_rows(a: &DMatrix<f64>, jitter: f64) -> std::result::Result<Vec<f64>, usize> {
    let n = a.nrows();
    let mut rows = vec![0.0; n * n];
    for j in 0..n {
        let (head, tail) = rows.split_at_mut((j + 1) * n);
        let row_j = &mut head[j * n..];
        let d = a[(j, j)] + jitter - dot(&row_j[..j], &row_j[..j]);
        if !(d > 0.0) || !d.is_finite() {
            return Err(j);
        }
        let ljj = d.sqrt();
        row_j[j] = ljj;
        let row_j = &row_j[..j];
        let update = |(k, row): (usize, &mut [f64])| {
            let i = j + 1 + k;
            row[j] = (a[(i, j)] - dot(&row[..j], row_j)) / ljj;
        };
        if (n - j) * j > 1 << 15 {
            tail.par_chunks_mut(n).enumerate().for_each(update);
        } else {
            tail.chunks_mut(n).enumerate().for_each(update);
        }
    }
    Ok(rows)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Posterior moments at a query set.
#[derive(Debug, Clone)]
pub struct GaussianPosterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Jitter of the observation-covariance factor that produced them.
    pub factor_jitter: f64,
}

impl GaussianPosterior {
    pub fn variance(&self) -> DVector<f64> {
        self.cov.diagonal()
    }
}

fn check_cross(cross: &DMatrix<f64>, factor: &SpdFactor, y: &DVector<f64>) -> Result<()> {
    if cross.ncols() != factor.size() || y.len() != factor.size() {
        return domain(format!(
            "shape mismatch: cross is {}x{}, factor {}, observations {}",
            cross.nrows(),
            cross.ncols(),
            factor.size(),
            y.len()
        ));
    }
    Ok(())
}

/// `prior_mean + cross K⁻¹ (y)` where `K = L Lᵀ`.
pub fn condition_mean(cross_qo: &DMatrix<f64>, factor: &SpdFactor, y: &DVector<f64>) -> Result<DVector<f64>> {
    check_cross(cross_qo, factor, y)?;
    if factor.size() == 0 {
        return Ok(DVector::zeros(cross_qo.nrows()));
    }
    Ok(cross_qo * factor.solve(y))
}

/// Diagonal of `prior - cross K⁻¹ crossᵀ`, clamped at zero after the tolerance check.
pub fn condition_variance(prior_var: &DVector<f64>, cross_qo: &DMatrix<f64>, factor: &SpdFactor) -> Result<DVector<f64>> {
    if prior_var.len() != cross_qo.nrows() || cross_qo.ncols() != factor.size() {
        return domain("shape mismatch in posterior variance");
    }
    let mut var = prior_var.clone();
    if factor.size() > 0 {
        let v = factor.solve_lower_mat(&cross_qo.transpose());
        for (q, col) in v.column_iter().enumerate() {
            var[q] -= col.norm_squared();
        }
    }
    clamp_variances(var.as_mut_slice(), prior_var.as_slice())?;
    Ok(var)
}

fn clamp_variances(var: &mut [f64], prior: &[f64]) -> Result<()> {
    let scale = prior.first().copied().unwrap_or(0.0).abs();
    for (i, v) in var.iter_mut().enumerate() {
        if *v < -1e-10 * scale.max(prior[i].abs()) {
            return Err(GpdcError::NegativeVariance { index: i, value: *v });
        }
        *v = v.max(0.0);
    }
    Ok(())
}

/// Conditions a zero-mean (or `prior_mean`) Gaussian on observations with covariance factor `factor`.
pub fn condition(
    prior_cov_qq: &DMatrix<f64>,
    cross_cov_qo: &DMatrix<f64>,
    factor: &SpdFactor,
    y: &DVector<f64>,
    prior_mean_q: Option<&DVector<f64>>,
) -> Result<GaussianPosterior> {
    let nq = prior_cov_qq.nrows();
    if !prior_cov_qq.is_square() || cross_cov_qo.nrows() != nq {
        return domain(format!(
            "shape mismatch: prior is {}x{}, cross has {} rows",
            prior_cov_qq.nrows(),
            prior_cov_qq.ncols(),
            cross_cov_qo.nrows()
        ));
    }
    if let Some(m) = prior_mean_q {
        if m.len() != nq {
            return domain("prior mean length differs from query count");
        }
    }
    let mut mean = condition_mean(cross_cov_qo, factor, y)?;
    if let Some(m) = prior_mean_q {
        mean += m;
    }
    let mut cov = prior_cov_qq.clone();
    if factor.size() > 0 {
        let v = factor.solve_lower_mat(&cross_cov_qo.transpose());
        cov -= v.tr_mul(&v);
    }
    let cov = (&cov + cov.transpose()) * 0.5;
    let prior_diag: Vec<f64> = prior_cov_qq.diagonal().iter().copied().collect();
    let mut diag: Vec<f64> = cov.diagonal().iter().copied().collect();
    clamp_variances(&mut diag, &prior_diag)?;
    let mut cov = cov;
    for (i, d) in diag.into_iter().enumerate() {
        cov[(i, i)] = d;
    }
    Ok(GaussianPosterior { mean, cov, factor_jitter: factor.jitter() })
}

/// `-n/2 log 2π - ½ log det K - ½ yᵀ K⁻¹ y`.
pub fn log_marginal_likelihood(factor: &SpdFactor, y: &DVector<f64>) -> Result<f64> {
    if y.len() != factor.size() {
        return domain("observation count differs from factor size");
    }
    let n = y.len() as f64;
    let z = factor.solve_lower(y);
    Ok(-0.5 * n * (2.0 * PI).ln() - 0.5 * factor.log_det() - 0.5 * z.norm_squared())
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn standard_normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// `B` with `B Bᵀ ≈ A` for a symmetric positive semidefinite `A`, from a
/// diagonally pivoted Cholesky that stops once the remaining diagonal is
/// negligible. Rank-deficient and zero matrices are handled exactly.
#[derive(Debug, Clone)]
pub struct PsdFactor {
    b: DMatrix<f64>,
}

impl PsdFactor {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        Self::with_reference(a, None)
    }

    /// Tolerances relative to `reference` (for example the prior variance a
    /// conditional covariance was derived from) instead of the largest diagonal entry.
    pub fn with_reference(a: &DMatrix<f64>, reference: Option<f64>) -> Result<Self> {
        check_square(a)?;
        let n = a.nrows();
        Self::pivoted(a, &[(0..n, reference)])
    }

    /// Factor of a joint covariance whose leading `split` variables are
    /// pivoted before the rest, so `(B z)[..split]` depends only on the
    /// first columns of `B`. Each block uses its own largest diagonal entry
    /// (or `reference`) as the tolerance scale.
    pub fn blocked(a: &DMatrix<f64>, split: usize, reference: [Option<f64>; 2]) -> Result<Self> {
        check_square(a)?;
        let n = a.nrows();
        if split > n {
            return domain(format!("block split {split} exceeds size {n}"));
        }
        Self::pivoted(a, &[(0..split, reference[0]), (split..n, reference[1])])
    }

    fn pivoted(a: &DMatrix<f64>, blocks: &[(std::ops::Range<usize>, Option<f64>)]) -> Result<Self> {
        let n = a.nrows();
        let sym = (a + a.transpose()) * 0.5;
        let mut diag: Vec<f64> = sym.diagonal().iter().copied().collect();
        // Columns of the factor in original index order.
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for (b, (range, reference)) in blocks.iter().enumerate() {
            // Rows of later blocks still receive this block's columns.
            let pending: Vec<usize> = blocks[b + 1..].iter().flat_map(|(r, _)| r.clone()).collect();
            let scale = reference.unwrap_or_else(|| diag[range.clone()].iter().fold(0.0f64, |m, d| m.max(d.abs())));
            let tol = 1e-12 * scale;
            let mut active: Vec<usize> = range.clone().collect();
            while !active.is_empty() {
                let (p, dmax) = active
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| (k, diag[i]))
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("nonempty");
                if dmax <= tol {
                    break;
                }
                let piv = active.swap_remove(p);
                let s = dmax.sqrt();
                let mut col = vec![0.0; n];
                col[piv] = s;
                for &i in active.iter().chain(&pending) {
                    let mut v = sym[(i, piv)];
                    for c in &cols {
                        v -= c[i] * c[piv];
                    }
                    col[i] = v / s;
                    diag[i] -= col[i] * col[i];
                }
                diag[piv] = 0.0;
                cols.push(col);
            }
            if let Some(&i) = active.iter().find(|&&i| diag[i] < -1e-6 * scale.max(f64::MIN_POSITIVE)) {
                return Err(GpdcError::NotPositiveDefinite { pivot: i, jitter: 0.0 });
            }
        }
        let r = cols.len();
        let b = DMatrix::from_fn(n, r, |i, j| cols[j][i]);
        Ok(Self { b })
    }

    pub fn rank(&self) -> usize {
        self.b.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// `mean + B z` with standard normal `z`.
    pub fn sample<R: Rng + ?Sized>(&self, mean: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        if self.rank() == 0 {
            return mean.clone();
        }
        mean + &self.b * standard_normals(rng, self.rank())
    }
}

fn check_square(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return domain(format!("cannot factor a {}x{} matrix", a.nrows(), a.ncols()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return domain("matrix has non-finite entries");
    }
    Ok(())
}

/// One draw from `N(mean, cov)` with a seeded generator.
pub fn mvn_sample(mean: &DVector<f64>, cov: &DMatrix<f64>, seed: u64) -> Result<DVector<f64>> {
    if cov.nrows() != mean.len() {
        return domain("mean and covariance sizes differ");
    }
    let f = PsdFactor::new(cov)?;
    Ok(f.sample(mean, &mut rng_from_seed(seed)))
}
