//! Spectral recoverability: support diagnostics and the posterior of the windowed spectrum.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{Deconvolver, ObservationSet};
use crate::covops::ConvKernelPair;
use crate::error::{domain, GpdcError, Result};
use crate::kernels::{sinc, FilterSpec, KernelSpec};

/// Per-frequency comparison of the source PSD with the filter transfer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub freqs: Vec<f64>,
    pub psd: Vec<f64>,
    pub transfer_abs: Vec<f64>,
    pub suppressed: Vec<bool>,
    pub psd_tol: f64,
    pub transfer_tol: f64,
    /// Contiguous runs of suppressed grid frequencies as `(first, last)`.
    pub suppressed_bands: Vec<(f64, f64)>,
    /// No suppressed frequency on the grid or next to a spectral discontinuity.
    pub recoverable: bool,
}

fn check_1d(source: &KernelSpec, filter: &FilterSpec) -> Result<()> {
    source.validate()?;
    filter.validate()?;
    if source.dim() != 1 || filter.dim() != 1 {
        return Err(GpdcError::UnsupportedDimension("spectral analysis is one-dimensional".into()));
    }
    Ok(())
}

fn transfer_abs(filter: &FilterSpec, f: f64) -> f64 {
    match filter {
        FilterSpec::Discrete(d) => d.transfer(f).map(|c| c.norm()).unwrap_or(f64::NAN),
        _ => filter.transfer_real(f).abs(),
    }
}

/// Flags frequencies where the source has power the filter removes.
///
/// Defaults: `psd_tol = 1e-6 max PSD`, `transfer_tol = 1e-6 max |ĥ|` over the grid.
pub fn recovery_diagnostic(
    source: &KernelSpec,
    filter: &FilterSpec,
    freqs: &[f64],
    psd_tol: Option<f64>,
    transfer_tol: Option<f64>,
) -> Result<SpectralReport> {
    check_1d(source, filter)?;
    if freqs.is_empty() || freqs.iter().any(|f| !f.is_finite()) {
        return domain("frequency grid must be nonempty and finite");
    }
    let psd: Vec<f64> = freqs.iter().map(|&f| source.psd_unchecked(f)).collect();
    let tr: Vec<f64> = freqs.iter().map(|&f| transfer_abs(filter, f)).collect();
    let psd_tol = psd_tol.unwrap_or_else(|| 1e-6 * psd.iter().cloned().fold(0.0, f64::max));
    let transfer_tol = transfer_tol.unwrap_or_else(|| 1e-6 * tr.iter().cloned().fold(0.0, f64::max));
    let flag = |p: f64, h: f64| p > psd_tol && h <= transfer_tol;
    let suppressed: Vec<bool> = psd.iter().zip(&tr).map(|(&p, &h)| flag(p, h)).collect();

    let mut bands = Vec::new();
    let mut start = None;
    for (i, &s) in suppressed.iter().enumerate() {
        match (s, start) {
            (true, None) => start = Some(i),
            (false, Some(a)) => {
                bands.push((freqs[a], freqs[i - 1]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        bands.push((freqs[a], freqs[freqs.len() - 1]));
    }

    // A grid can step over a narrow suppressed band, so also probe either side
    // of every discontinuity and between consecutive ones.
    let mut edges: Vec<f64> = source
        .spectral_breakpoints()
        .into_iter()
        .chain(filter.spectral_breakpoints())
        .filter(|b| *b > 0.0)
        .collect();
    edges.sort_by(f64::total_cmp);
    let mut probes: Vec<f64> = edges.iter().flat_map(|&b| [b * (1.0 - 1e-9), b * (1.0 + 1e-9)]).collect();
    probes.extend(edges.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    let probe_hit = probes.iter().any(|&f| flag(source.psd_unchecked(f), transfer_abs(filter, f)));

    Ok(SpectralReport {
        freqs: freqs.to_vec(),
        psd,
        transfer_abs: tr,
        recoverable: !probe_hit && bands.is_empty(),
        suppressed,
        psd_tol,
        transfer_tol,
        suppressed_bands: bands,
    })
}

/// `n` uniform frequencies from 0 to half the reciprocal of the median spacing.
pub fn default_frequency_grid(locations: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut t = locations.to_vec();
    t.sort_by(f64::total_cmp);
    let mut gaps: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 0.0).collect();
    if gaps.is_empty() || n < 2 {
        return domain("need at least two distinct locations and two frequencies");
    }
    gaps.sort_by(f64::total_cmp);
    let median = gaps[gaps.len() / 2];
    Ok(crate::locations::linspace(0.0, 0.5 / median, n))
}

/// Hann taper `cos²(π (t - c) / L)` supported on `[c - L/2, c + L/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HannWindow {
    pub center: f64,
    pub width: f64,
}

impl HannWindow {
    pub fn new(center: f64, width: f64) -> Result<Self> {
        if !(center.is_finite() && width.is_finite() && width > 0.0) {
            return domain(format!("window needs a finite center and positive width, got ({center}, {width})"));
        }
        Ok(Self { center, width })
    }

    /// The central 80% of `[start, end]`.
    pub fn central(start: f64, end: f64) -> Result<Self> {
        Self::new(0.5 * (start + end), 0.8 * (end - start))
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - 0.5 * self.width, self.center + 0.5 * self.width)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let u = (t - self.center) / self.width;
        if u.abs() > 0.5 {
            0.0
        } else {
            (PI * u).cos().powi(2)
        }
    }

    /// Fourier transform of the window shifted to be centred at zero (real and even).
    pub fn centered_ft(&self, nu: f64) -> f64 {
        let l = self.width;
        0.5 * l * sinc(l * nu) + 0.25 * l * (sinc(l * nu - 1.0) + sinc(l * nu + 1.0))
    }
}

/// Posterior moments of `x̂_w(ξ) = ∫ x(t) w(t) e^{-j2πξt} dt`.
#[derive(Debug, Clone, Serialize)]
pub struct WindowedSpectrum {
    pub freqs: Vec<f64>,
    pub mean: Vec<Complex64>,
    pub variance: Vec<f64>,
    /// Prior variance `∫ K̂_x(ζ) |ŵ(ξ - ζ)|² dζ`.
    pub prior: Vec<f64>,
    pub window: HannWindow,
}

const GL_NODES: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL_WEIGHTS: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

/// Composite 8-point Gauss–Legendre rule over `[edges[0], edges[last]]`,
/// never straddling an edge and with panels no wider than `max_width`.
fn gauss_legendre(edges: &[f64], max_width: f64) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let panels = ((b - a) / max_width).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, wt) in GL_NODES.iter().zip(&GL_WEIGHTS) {
                for s in [-1.0, 1.0] {
                    nodes.push(mid + s * x * 0.5 * h);
                    weights.push(wt * 0.5 * h);
                }
            }
        }
    }
    (nodes, weights)
}

/// Windowed-spectrum posterior with the default covariance method.
pub fn windowed_spectrum_posterior(
    obs: &ObservationSet,
    source: &KernelSpec,
    filter: &FilterSpec,
    window: Option<HannWindow>,
    freqs: Option<&[f64]>,
) -> Result<WindowedSpectrum> {
    check_1d(source, filter)?;
    let d = Deconvolver::new(obs, ConvKernelPair::auto(source.clone(), filter.clone())?)?;
    windowed_spectrum_from(&d, window, freqs)
}

/// Windowed-spectrum posterior reusing a factored observation covariance.
///
/// Both spectral convolutions are evaluated by quadrature over the source
/// spectrum: with `s_i = t_i - c`,
/// `v_i(ξ) = ∫ ŵ(ξ - ζ) K̂_x(ζ) ĥ(ζ) e^{-j2πζ s_i} dζ`, the mean is
/// `e^{-j2πξc} vᵀ K_y⁻¹ y` and the variance is the prior term minus `vᴴ K_y⁻¹ v`.
pub fn windowed_spectrum_from(d: &Deconvolver, window: Option<HannWindow>, freqs: Option<&[f64]>) -> Result<WindowedSpectrum> {
    let pair = d.pair();
    check_1d(&pair.source, &pair.filter)?;
    let obs = d.observations();
    let t = obs.locations().as_1d()?;
    let (lo, hi) = t.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let window = match window {
        Some(w) => {
            let (a, b) = w.support();
            if t.is_empty() || a < lo - 1e-12 * (hi - lo).abs() || b > hi + 1e-12 * (hi - lo).abs() {
                return domain(format!("window [{a}, {b}] exceeds the data span [{lo}, {hi}]"));
            }
            w
        }
        None if t.len() >= 2 => HannWindow::central(lo, hi)?,
        None => return domain("a default window needs at least two observations"),
    };
    let freqs = match freqs {
        Some(f) => f.to_vec(),
        None => default_frequency_grid(t, 257)?,
    };
    if freqs.iter().any(|f| !f.is_finite()) {
        return domain("frequencies must be finite");
    }

    let source = &pair.source;
    let filter = &pair.filter;
    let extent = source.spectral_extent();
    let mut edges: Vec<f64> = vec![-extent, extent];
    edges.extend(source.spectral_breakpoints().into_iter().chain(filter.spectral_breakpoints()).filter(|b| b.abs() < extent));
    edges.sort_by(f64::total_cmp);
    let c = window.center;
    let shifts: Vec<f64> = t.iter().map(|ti| ti - c).collect();
    let reach = shifts.iter().fold(window.width, |m, s| m.max(s.abs()));
    let (zeta, q) = gauss_legendre(&edges, 1.0 / (4.0 * reach));
    let k = zeta.len();
    let n = t.len();
    let nf = freqs.len();

    let psd: Vec<f64> = zeta.iter().map(|&z| source.psd_unchecked(z)).collect();
    let wmat = DMatrix::from_fn(k, nf, |i, j| q[i] * window.centered_ft(freqs[j] - zeta[i]));
    let prior: Vec<f64> = (0..nf)
        .into_par_iter()
        .map(|j| (0..k).map(|i| q[i] * psd[i] * window.centered_ft(freqs[j] - zeta[i]).powi(2)).sum())
        .collect();

    let mut mean = vec![Complex64::new(0.0, 0.0); nf];
    let mut variance = prior.clone();
    if n > 0 {
        let g: Vec<Complex64> = zeta
            .iter()
            .zip(&psd)
            .map(|(&z, &p)| {
                let h = match filter {
                    FilterSpec::Discrete(dd) => dd.transfer(z).expect("validated filter"),
                    _ => Complex64::new(filter.transfer_real(z), 0.0),
                };
                h * p
            })
            .collect();
        let cols: Vec<(Vec<f64>, Vec<f64>)> = (0..k)
            .into_par_iter()
            .map(|i| {
                shifts
                    .iter()
                    .map(|s| {
                        let e = g[i] * Complex64::from_polar(1.0, -2.0 * PI * zeta[i] * s);
                        (e.re, e.im)
                    })
                    .unzip()
            })
            .collect();
        let er = DMatrix::from_fn(n, k, |r, col| cols[col].0[r]);
        let ei = DMatrix::from_fn(n, k, |r, col| cols[col].1[r]);
        let vr = &er * &wmat;
        let vi = &ei * &wmat;
        let alpha: &DVector<f64> = d.weights();
        let mr = vr.tr_mul(alpha);
        let mi = vi.tr_mul(alpha);
        let factor = d.factor();
        let lr = factor.solve_lower_mat(&vr);
        let li = factor.solve_lower_mat(&vi);
        let scale = prior.iter().cloned().fold(0.0, f64::max);
        for j in 0..nf {
            let phase = Complex64::from_polar(1.0, -2.0 * PI * freqs[j] * c);
            mean[j] = phase * Complex64::new(mr[j], mi[j]);
            let v = prior[j] - lr.column(j).norm_squared() - li.column(j).norm_squared();
            if v < -1e-8 * scale {
                return Err(GpdcError::NegativeVariance { index: j, value: v });
            }
            variance[j] = v.max(0.0);
        }
    }
    Ok(WindowedSpectrum { freqs, mean, variance, prior, window })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covops::CovMethod;
    use crate::gp::rng_from_seed;
    use crate::locations::linspace;
    use crate::model::{sample_joint, GenerativeConfig};
    use crate::testutil::midpoint;

    #[test]
    fn se_se_has_no_suppression() {
        let freqs = linspace(0.0, 50.0, 1001);
        let l = 0.05f64.sqrt();
        for (lx, lh) in [(l, l), (0.5, 0.3), (1.0, 0.01)] {
            let r = recovery_diagnostic(&KernelSpec::se(1.0, lx).unwrap(), &FilterSpec::se(1.0, lh).unwrap(), &freqs, None, None)
                .unwrap();
            assert!(r.suppressed.iter().all(|s| !s));
            assert!(r.recoverable);
        }
    }

    #[test]
    fn sinc_band_containment() {
        let freqs = linspace(0.0, 2.0, 401);
        let r = recovery_diagnostic(&KernelSpec::sinc(1.0, 2.0).unwrap(), &FilterSpec::sinc(1.0, 1.0).unwrap(), &freqs, None, None)
            .unwrap();
        for (f, s) in freqs.iter().zip(&r.suppressed) {
            assert_eq!(*s, *f > 0.5 && *f <= 1.0, "f={f}");
        }
        assert!(!r.recoverable);
        assert_eq!(r.suppressed_bands.len(), 1);
        assert!((r.suppressed_bands[0].0 - 0.505).abs() < 1e-12 && (r.suppressed_bands[0].1 - 1.0).abs() < 1e-12);

        let r = recovery_diagnostic(&KernelSpec::sinc(1.0, 1.0).unwrap(), &FilterSpec::sinc(1.0, 2.0).unwrap(), &freqs, None, None)
            .unwrap();
        assert!(r.recoverable);

        // a grid that steps over the suppressed band still yields the right verdict
        let coarse = [0.0, 0.45, 2.0];
        for (wx, wh) in [(1.0, 0.9), (0.95, 0.9), (0.9, 0.9), (0.9, 1.0)] {
            let r = recovery_diagnostic(&KernelSpec::sinc(1.0, wx).unwrap(), &FilterSpec::sinc(1.0, wh).unwrap(), &coarse, None, None)
                .unwrap();
            assert_eq!(r.recoverable, wh >= wx, "({wx}, {wh})");
        }
        let two_d = KernelSpec::se_2d(1.0, 1.0).unwrap();
        assert!(matches!(
            recovery_diagnostic(&two_d, &FilterSpec::dirac(), &freqs, None, None),
            Err(GpdcError::UnsupportedDimension(_))
        ));
    }

    #[test]
    fn hann_transform_matches_quadrature() {
        let w = HannWindow::new(0.0, 3.0).unwrap();
        for nu in [0.0, 0.1, 0.33, 1.0, 2.7] {
            let direct = midpoint(|t| w.eval(t) * (2.0 * PI * nu * t).cos(), -1.5, 1.5, 20000);
            assert!((direct - w.centered_ft(nu)).abs() < 1e-8);
        }
    }

    fn time_domain_oracle(d: &Deconvolver, w: HannWindow, xi: f64, m: usize) -> (Complex64, f64) {
        let k = d.kernel();
        let t = d.observations().locations().as_1d().unwrap();
        let (a, b) = w.support();
        let h = (b - a) / m as f64;
        let grid: Vec<f64> = (0..m).map(|i| a + (i as f64 + 0.5) * h).collect();
        let ww: Vec<f64> = grid.iter().map(|&s| w.eval(s)).collect();
        let ph: Vec<Complex64> = grid.iter().map(|&s| Complex64::from_polar(1.0, -2.0 * PI * xi * s)).collect();
        let v: Vec<Complex64> =
            t.iter().map(|&ti| (0..m).map(|j| ph[j] * ww[j] * k.kxf(&[grid[j] - ti])).sum::<Complex64>() * h).collect();
        let mut prior = 0.0;
        for i in 0..m {
            for j in 0..m {
                prior += ww[i] * ww[j] * k.kx(&[grid[i] - grid[j]]) * (2.0 * PI * xi * (grid[i] - grid[j])).cos();
            }
        }
        prior *= h * h;
        let alpha = d.weights();
        let mean: Complex64 = v.iter().zip(alpha.iter()).map(|(vi, a)| vi * a).sum();
        let vr = DVector::from_iterator(v.len(), v.iter().map(|c| c.re));
        let vi = DVector::from_iterator(v.len(), v.iter().map(|c| c.im));
        let f = d.factor();
        let var = prior - f.solve_lower(&vr).norm_squared() - f.solve_lower(&vi).norm_squared();
        (mean, var)
    }

    #[test]
    fn matches_time_domain_quadrature() {
        use rand::Rng;
        let mut rng = rng_from_seed(5);
        let t = linspace(0.0, 6.0, 30);
        let y: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let obs = ObservationSet::one_d(t, y, 0.05).unwrap();
        let pairs = [
            ConvKernelPair::auto(KernelSpec::se(1.0, 0.4).unwrap(), FilterSpec::se(1.0, 0.3).unwrap()).unwrap(),
            ConvKernelPair::auto(
                KernelSpec::sm(1.0, 0.5, 0.6).unwrap(),
                FilterSpec::discrete(vec![0.5, 0.3, 0.2], vec![-0.2, 0.1, 0.5]).unwrap(),
            )
            .unwrap(),
        ];
        let w = HannWindow::new(3.1, 4.0).unwrap();
        let freqs = [0.0, 0.3, 0.75, 1.4];
        for pair in pairs {
            let d = Deconvolver::new(&obs, pair).unwrap();
            let ws = windowed_spectrum_from(&d, Some(w), Some(&freqs)).unwrap();
            for (j, &xi) in freqs.iter().enumerate() {
                let (m, v) = time_domain_oracle(&d, w, xi, 1500);
                let scale = ws.prior[j].max(1e-3);
                assert!((ws.mean[j] - m).norm() < 1e-5 * scale.sqrt().max(1.0), "mean at {xi}: {} vs {m}", ws.mean[j]);
                assert!((ws.variance[j] - v.max(0.0)).abs() < 1e-5 * scale, "var at {xi}: {} vs {v}", ws.variance[j]);
            }
        }
    }

    #[test]
    fn zero_observations_leave_prior() {
        let obs = ObservationSet::empty(1, 0.1);
        let d = Deconvolver::new(&obs, ConvKernelPair::auto(KernelSpec::se(1.0, 0.5).unwrap(), FilterSpec::dirac()).unwrap()).unwrap();
        assert!(windowed_spectrum_from(&d, Some(HannWindow::new(0.0, 2.0).unwrap()), Some(&[0.0])).is_err());
        assert!(windowed_spectrum_from(&d, None, None).is_err());
    }

    #[test]
    fn window_must_fit_in_data() {
        let obs = ObservationSet::one_d(linspace(0.0, 5.0, 20), vec![0.0; 20], 0.1).unwrap();
        let src = KernelSpec::se(1.0, 0.5).unwrap();
        let res = windowed_spectrum_posterior(&obs, &src, &FilterSpec::dirac(), Some(HannWindow::new(2.5, 6.0).unwrap()), None);
        assert!(matches!(res, Err(GpdcError::Domain(_))));
        let ok = windowed_spectrum_posterior(&obs, &src, &FilterSpec::dirac(), None, None).unwrap();
        assert_eq!(ok.freqs.len(), 257);
        assert!((ok.freqs[256] - 0.5 / (5.0 / 19.0)).abs() < 1e-9);
        assert!((ok.window.width - 4.0).abs() < 1e-12);
    }

    #[test]
    fn more_data_shrinks_spectral_variance() {
        let t = linspace(0.0, 10.0, 400);
        let l = 0.05f64.sqrt();
        let cfg = GenerativeConfig {
            source: KernelSpec::se(1.0, l).unwrap(),
            filter: FilterSpec::se(1.0, l).unwrap(),
            method: None,
            source_locations: t.clone(),
            conv_locations: t.clone(),
            noise_var: 0.01,
            seed: 8,
        };
        let y = sample_joint(&cfg).unwrap().y;
        let w = HannWindow::new(5.0, 8.0).unwrap();
        let freqs = linspace(0.0, 4.0, 81);
        let run = |stride: usize| {
            let idx: Vec<usize> = (0..400).step_by(stride).collect();
            let obs = ObservationSet::one_d(idx.iter().map(|&i| t[i]).collect(), idx.iter().map(|&i| y[i]).collect(), 0.01).unwrap();
            windowed_spectrum_posterior(&obs, &cfg.source, &cfg.filter, Some(w), Some(&freqs)).unwrap().variance
        };
        let (v100, v400) = (run(4), run(1));
        for (a, b) in v400.iter().zip(&v100) {
            assert!(*a <= b + 1e-9);
        }
    }

    #[test]
    fn suppressed_band_keeps_variance() {
        for seed in 0..3 {
            let n = 800;
            let t = linspace(0.0, 40.0, n);
            let cfg = GenerativeConfig {
                source: KernelSpec::sinc(1.0, 2.0).unwrap(),
                filter: FilterSpec::sinc(1.0, 1.0).unwrap(),
                method: Some(CovMethod::Analytic),
                source_locations: linspace(0.0, 40.0, 50),
                conv_locations: t.clone(),
                noise_var: 0.01,
                seed,
            };
            let y = sample_joint(&cfg).unwrap().y;
            let obs = ObservationSet::one_d(t, y, 0.01).unwrap();
            let ws = windowed_spectrum_posterior(&obs, &cfg.source, &cfg.filter, None, Some(&[0.25, 0.75])).unwrap();
            assert!(ws.variance[1] >= 0.5 * ws.prior[1], "{:?}", ws.variance);
            assert!(ws.variance[0] < 0.1 * ws.prior[0], "{:?}", ws.variance);
        }
    }
}
