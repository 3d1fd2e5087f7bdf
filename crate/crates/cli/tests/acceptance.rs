//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use gpdc::covops::kf_eval;
use gpdc::deconv::{recovery_diagnostic, windowed_spectrum_posterior, HannWindow, ImageMask};
use gpdc::gp::{cholesky, log_marginal_likelihood, rng_from_seed};
use gpdc::model::{conditional_f_moments, sample_joint, GenerativeConfig};
use gpdc::train::{fit, fit_blind, log_likelihood, FitConfig, Optimizer, TrainableModel};
use gpdc::{
    deconvolve, linspace, ConvKernelPair, CovMethod, Deconvolver, DiscreteFilter, FilterSpec, KernelSpec, Locations,
    ObservationSet,
};
use gpdc_cli::audio::{run_dereverb, DereverbConfig};
use gpdc_cli::image::{synthetic_image, ImageSetup, ImageTraining};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Criterion 1: the unit Dirac filter reduces everything to plain GP regression.
fn dirac_identity() -> Check {
    let src = KernelSpec::se(1.3, 0.6).map_err(e2s)?;
    let pair = ConvKernelPair::auto(src.clone(), FilterSpec::dirac()).map_err(e2s)?;
    let k = pair.prepare().map_err(e2s)?;
    let mut worst = 0.0f64;
    for i in 0..101 {
        let lag = -5.0 + 0.1 * i as f64;
        let kx = src.eval(&[lag]).map_err(e2s)?;
        worst = worst.max((k.kf(&[lag]) - kx).abs()).max((k.kxf(&[lag]) - kx).abs());
    }
    ensure(worst <= 1e-10, format!("kernel mismatch {worst:e}"))?;

    let t = linspace(0.0, 5.0, 60);
    let cfg = GenerativeConfig {
        source: src.clone(),
        filter: FilterSpec::dirac(),
        method: None,
        source_locations: t.clone(),
        conv_locations: t.clone(),
        noise_var: 0.0,
        seed: 11,
    };
    let s = sample_joint(&cfg).map_err(e2s)?;
    let fx = s.f.iter().zip(&s.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(fx <= 1e-10, format!("sampled f differs from x by {fx:e}"))?;

    // Plain GP regression oracle.
    let obs_t = linspace(0.1, 4.9, 25);
    let y: Vec<f64> = obs_t.iter().map(|v| (1.7 * v).sin()).collect();
    let noise = 0.04;
    let q = linspace(0.0, 5.0, 40);
    let kmat = |a: &[f64], b: &[f64]| DMatrix::from_fn(a.len(), b.len(), |i, j| src.eval_1d(a[i] - b[j]));
    let ky = kmat(&obs_t, &obs_t) + DMatrix::identity(obs_t.len(), obs_t.len()) * noise;
    let chol = ky.cholesky().ok_or("oracle Cholesky failed")?;
    let kqo = kmat(&q, &obs_t);
    let mean = &kqo * chol.solve(&DVector::from_vec(y.clone()));
    let cov = kmat(&q, &q) - &kqo * chol.solve(&kqo.transpose());
    let obs = ObservationSet::one_d(obs_t, y, noise).map_err(e2s)?;
    let post = deconvolve(&obs, &src, &FilterSpec::dirac(), CovMethod::DiscreteSum, &Locations::one_d(q)).map_err(e2s)?;
    let dm = (&post.mean - &mean).amax();
    let dc = (&post.cov - &cov).amax();
    ensure(dm <= 1e-10 && dc <= 1e-10, format!("posterior differs from GP regression: mean {dm:e}, cov {dc:e}"))?;
    Ok(format!("kernel {worst:.1e}, sample {fx:.1e}, posterior mean {dm:.1e} cov {dc:.1e}"))
}

/// Criterion 2: closed forms against independent numerical integration.
fn analytic_vs_quadrature() -> Check {
    let (sx, lx, sh, lh) = (1.2, 0.7, 0.9, 0.4);
    let src = KernelSpec::se(sx, lx).map_err(e2s)?;
    let filt = FilterSpec::se(sh, lh).map_err(e2s)?;
    let analytic = ConvKernelPair::new(src.clone(), filt.clone(), CovMethod::Analytic).map_err(e2s)?.prepare().map_err(e2s)?;
    let nodes = 801;
    let (lo, hi) = (-8.0 * lh, 8.0 * lh);
    let d = (hi - lo) / nodes as f64;
    let taus: Vec<f64> = (0..nodes).map(|i| lo + (i as f64 + 0.5) * d).collect();
    let h: Vec<f64> = taus.iter().map(|t| sh * sh * (-0.5 * t * t / (lh * lh)).exp() * d).collect();
    let kx = |u: f64| sx * sx * (-0.5 * u * u / (lx * lx)).exp();
    let mut rng = rng_from_seed(2);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let t: f64 = rng.random_range(-3.0..3.0);
        let mut kf = 0.0;
        for (a, ha) in taus.iter().zip(&h) {
            for (b, hb) in taus.iter().zip(&h) {
                kf += ha * hb * kx(t + a - b);
            }
        }
        let kxf: f64 = taus.iter().zip(&h).map(|(a, ha)| ha * kx(a - t)).sum();
        worst = worst.max((analytic.kf(&[t]) - kf).abs() / kf.abs()).max((analytic.kxf(&[t]) - kxf).abs() / kxf.abs());
    }
    ensure(worst <= 1e-6, format!("SE/SE relative error {worst:e}"))?;

    // Sinc/Sinc: integrate the spectral product on a fine frequency grid.
    let (dx, dh, s2x, s2h) = (2.0, 1.3, 1.1f64, 0.8f64);
    let src = KernelSpec::sinc(s2x, dx).map_err(e2s)?;
    let filt = FilterSpec::sinc(s2h, dh).map_err(e2s)?;
    let pair = ConvKernelPair::new(src, filt, CovMethod::Analytic).map_err(e2s)?;
    let k = pair.prepare().map_err(e2s)?;
    let band = dx.min(dh);
    let m = 20_000;
    let dxi = band / m as f64;
    let psd = s2x * s2x / dx;
    let hhat = s2h * s2h / dh;
    let mut sinc_worst = 0.0f64;
    let scale_f = psd * hhat * hhat * band;
    let scale_xf = psd * hhat * band;
    for i in 0..50 {
        let t = -4.0 + 8.0 * i as f64 / 49.0;
        let (mut kf, mut kxf) = (0.0, 0.0);
        for j in 0..m {
            let xi = -band / 2.0 + (j as f64 + 0.5) * dxi;
            let c = (2.0 * PI * xi * t).cos() * dxi;
            kf += psd * hhat * hhat * c;
            kxf += psd * hhat * c;
        }
        sinc_worst = sinc_worst.max((k.kf(&[t]) - kf).abs() / scale_f).max((k.kxf(&[t]) - kxf).abs() / scale_xf);
    }
    ensure(sinc_worst <= 1e-4, format!("Sinc/Sinc error {sinc_worst:e}"))?;
    let _ = kf_eval(&pair, &[0.0]).map_err(e2s)?;
    Ok(format!("SE/SE max relative error {worst:.1e}, Sinc/Sinc {sinc_worst:.1e}"))
}

/// Criterion 3: log marginal likelihood against a determinant/LU evaluation.
fn likelihood() -> Check {
    let mut rng = rng_from_seed(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let b = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let a = &b * b.transpose() + DMatrix::identity(5, 5) * 0.5;
        let y = DVector::from_fn(5, |_, _| rng.random_range(-2.0..2.0));
        let lml = log_marginal_likelihood(&cholesky(&a).map_err(e2s)?, &y).map_err(e2s)?;
        let lu = a.clone().lu();
        let alpha = lu.solve(&y).ok_or("singular")?;
        let brute = -0.5 * y.dot(&alpha) - 0.5 * a.determinant().ln() - 2.5 * (2.0 * PI).ln();
        worst = worst.max((lml - brute).abs());
    }
    ensure(worst <= 1e-10, format!("random SPD mismatch {worst:e}"))?;
    let unit = log_marginal_likelihood(&cholesky(&DMatrix::identity(1, 1)).map_err(e2s)?, &DVector::zeros(1)).map_err(e2s)?;
    ensure(
        (unit + 0.5 * (2.0 * PI).ln()).abs() < 1e-15 && format!("{unit:.6}") == "-0.918939",
        format!("unit case gave {unit}"),
    )?;
    Ok(format!("max deviation {worst:.1e}, unit case {unit:.6}"))
}

/// Criterion 4: recovery improves with data and the 95% band is calibrated.
fn recovery_with_data() -> Check {
    let l = 0.05f64.sqrt();
    let (src, filt) = (KernelSpec::se(1.0, l).map_err(e2s)?, FilterSpec::se(1.0, l).map_err(e2s)?);
    let truth_t = linspace(0.0, 10.0, 200);
    let noise = 0.01;
    let mut errors = Vec::new();
    let mut coverage = (0, 0);
    for n in [25usize, 100, 400] {
        let cfg = GenerativeConfig {
            source: src.clone(),
            filter: filt.clone(),
            method: None,
            source_locations: truth_t.clone(),
            conv_locations: linspace(0.0, 10.0, n),
            noise_var: noise,
            seed: 21,
        };
        let joint = sample_joint(&cfg).map_err(e2s)?;
        let obs = ObservationSet::one_d(cfg.conv_locations.clone(), joint.y, noise).map_err(e2s)?;
        let d = Deconvolver::new(&obs, ConvKernelPair::auto(src.clone(), filt.clone()).map_err(e2s)?).map_err(e2s)?;
        let (mean, var) = d.source_moments(&Locations::one_d(truth_t.clone())).map_err(e2s)?;
        errors.push(mean.iter().zip(&joint.x).map(|(m, x)| (m - x).powi(2)).sum::<f64>() / truth_t.len() as f64);
        if n == 400 {
            let inside = (0..truth_t.len()).filter(|&i| (joint.x[i] - mean[i]).abs() <= 1.96 * var[i].max(0.0).sqrt()).count();
            coverage = (inside, truth_t.len());
        }
    }
    ensure(errors[0] > errors[1] && errors[1] > errors[2], format!("MSE not decreasing: {errors:?}"))?;
    let needed = (0.95 * coverage.1 as f64).ceil() as usize - 5;
    ensure(coverage.0 >= needed, format!("coverage {}/{} below {needed}", coverage.0, coverage.1))?;
    Ok(format!("MSE {:.3e} > {:.3e} > {:.3e}, coverage {}/{}", errors[0], errors[1], errors[2], coverage.0, coverage.1))
}

/// Criterion 5: a band the filter removes cannot be learnt from data.
fn suppressed_band() -> Check {
    let src = KernelSpec::sinc(1.0, 2.0).map_err(e2s)?;
    let filt = FilterSpec::sinc(1.0, 1.0).map_err(e2s)?;
    let grid = linspace(0.0, 1.5, 301);
    let report = recovery_diagnostic(&src, &filt, &grid, None, None).map_err(e2s)?;
    ensure(!report.recoverable, "diagnostic reports recoverable")?;
    for (f, s) in grid.iter().zip(&report.suppressed) {
        let inside = *f > 0.5 && *f <= 1.0;
        let interior = *f > 0.5 + 1e-9 && *f < 1.0 - 1e-9;
        ensure(!*s || inside, format!("flagged {f} outside (0.5, 1]"))?;
        ensure(*s || !interior, format!("missed {f} inside (0.5, 1)"))?;
    }

    let t = linspace(0.0, 40.0, 800);
    let noise = 0.01;
    let cfg = GenerativeConfig {
        source: src.clone(),
        filter: filt.clone(),
        method: None,
        source_locations: linspace(0.0, 40.0, 200),
        conv_locations: t.clone(),
        noise_var: noise,
        seed: 5,
    };
    let y = sample_joint(&cfg).map_err(e2s)?.y;
    let obs = ObservationSet::one_d(t, y, noise).map_err(e2s)?;
    let window = HannWindow::central(0.0, 40.0).map_err(e2s)?;
    let ws = windowed_spectrum_posterior(&obs, &src, &filt, Some(window), Some(&[0.25, 0.75])).map_err(e2s)?;
    let passed = ws.variance[0] / ws.prior[0];
    let blocked = ws.variance[1] / ws.prior[1];
    ensure(blocked >= 0.5, format!("suppressed-band variance ratio {blocked:.3} < 0.5"))?;
    ensure(passed < 0.1, format!("passed-band variance ratio {passed:.3} >= 0.1"))?;
    Ok(format!("bands {:?}, variance/prior passed {passed:.2e}, suppressed {blocked:.3}", report.suppressed_bands))
}

/// Criterion 6: denser source samples tighten the conditional law of f.
fn conditional_tightening() -> Check {
    let src = KernelSpec::se_rate(1.0, 10.0).map_err(e2s)?;
    let filt = FilterSpec::se_rate(1.0, 10.0).map_err(e2s)?;
    let q = linspace(0.0, 10.0, 1000);
    let mut stds = Vec::new();
    for nx in [40usize, 500] {
        let cfg = GenerativeConfig {
            source: src.clone(),
            filter: filt.clone(),
            method: None,
            source_locations: linspace(0.0, 10.0, nx),
            conv_locations: q.clone(),
            noise_var: 0.0,
            seed: 8,
        };
        let x = sample_joint(&cfg).map_err(e2s)?.x;
        let (_, var) = conditional_f_moments(&cfg, &x).map_err(e2s)?;
        stds.push(var.iter().map(|v| v.max(0.0).sqrt()).collect::<Vec<f64>>());
    }
    let not_above = stds[1].iter().zip(&stds[0]).all(|(a, b)| a <= b);
    let strict = stds[1].iter().zip(&stds[0]).filter(|(a, b)| a < b).count();
    ensure(not_above, "N_x = 500 std exceeds the N_x = 40 std somewhere")?;
    ensure(strict * 100 >= 99 * q.len(), format!("strict at only {strict}/{}", q.len()))?;
    let m40 = stds[0].iter().cloned().fold(0.0, f64::max);
    let m500 = stds[1].iter().cloned().fold(0.0, f64::max);
    Ok(format!("max std {m40:.3e} (40) vs {m500:.3e} (500), strict at {strict}/1000"))
}

/// Largest |normalized cross-correlation| over shifts: a blind filter fixes the
/// source only up to sign and translation.
fn ncc_with_shift(a: &[f64], b: &[f64], max_shift: usize) -> f64 {
    let mut best = 0.0f64;
    for s in -(max_shift as isize)..=max_shift as isize {
        let pairs: Vec<(f64, f64)> = (0..a.len())
            .filter_map(|i| {
                let j = i as isize + s;
                (j >= 0 && (j as usize) < b.len()).then(|| (a[i], b[j as usize]))
            })
            .collect();
        let n = pairs.len() as f64;
        let (ma, mb) = (pairs.iter().map(|p| p.0).sum::<f64>() / n, pairs.iter().map(|p| p.1).sum::<f64>() / n);
        let cov: f64 = pairs.iter().map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = pairs.iter().map(|(x, _)| (x - ma).powi(2)).sum();
        let vb: f64 = pairs.iter().map(|(_, y)| (y - mb).powi(2)).sum();
        best = best.max((cov / (va * vb).sqrt()).abs());
    }
    best
}

/// Criterion 7: training behaviour and blind recovery.
fn training() -> Check {
    // Nondecreasing traces.
    let l = 0.05f64.sqrt();
    let (src, filt) = (KernelSpec::se(1.0, l).map_err(e2s)?, FilterSpec::se(1.0, l).map_err(e2s)?);
    let t = linspace(0.0, 10.0, 150);
    let cfg = GenerativeConfig {
        source: src.clone(),
        filter: filt.clone(),
        method: None,
        source_locations: linspace(0.0, 10.0, 50),
        conv_locations: t.clone(),
        noise_var: 0.01,
        seed: 4,
    };
    let obs = ObservationSet::one_d(t, sample_joint(&cfg).map_err(e2s)?.y, 0.01).map_err(e2s)?;
    let model = TrainableModel::new(src.clone(), filt.clone(), 0.05)
        .map_err(e2s)?
        .fix("filter.sigma")
        .map_err(e2s)?
        .with_free("source.sigma")
        .map_err(e2s)?
        .initialize(&obs);
    for optimizer in [Optimizer::NelderMead, Optimizer::Gradient] {
        let res = fit(&obs, &model, &FitConfig { optimizer, max_iters: 300, restarts: 2, seed: 1 }).map_err(e2s)?;
        ensure(res.trace.windows(2).all(|w| w[1] >= w[0]), format!("{optimizer:?} trace decreases"))?;
    }

    // Scale degeneracy of the blind likelihood.
    let locs = DiscreteFilter::uniform_locations(5, (-0.25, 0.25));
    let w = vec![0.1, 0.3, 0.4, 0.2, -0.05];
    let c: f64 = 1.7;
    let sm = |sigma: f64| KernelSpec::sm(sigma, 0.1, 1.0);
    let a = log_likelihood(
        &obs,
        &ConvKernelPair::auto(sm(c).map_err(e2s)?, FilterSpec::discrete(w.clone(), locs.clone()).map_err(e2s)?).map_err(e2s)?,
    )
    .map_err(e2s)?;
    let b = log_likelihood(
        &obs,
        &ConvKernelPair::auto(sm(1.0).map_err(e2s)?, FilterSpec::discrete(w.iter().map(|v| v * c).collect(), locs).map_err(e2s)?)
            .map_err(e2s)?,
    )
    .map_err(e2s)?;
    ensure((a - b).abs() <= 1e-10 * a.abs().max(1.0), format!("scale degeneracy broken: {a} vs {b}"))?;

    // Blind recovery with a spectral-mixture source and a triangular filter.
    let src = sm(1.0).map_err(e2s)?;
    let truth_t = linspace(0.0, 10.0, 500);
    let obs_t = linspace(0.0, 10.0, 200);
    let noise = 1e-4;
    let cfg = GenerativeConfig {
        source: src.clone(),
        filter: FilterSpec::triangular(2.0f64.sqrt(), 0.5).map_err(e2s)?,
        method: None,
        source_locations: truth_t.clone(),
        conv_locations: obs_t.clone(),
        noise_var: noise,
        seed: 31,
    };
    let joint = sample_joint(&cfg).map_err(e2s)?;
    let obs = ObservationSet::one_d(obs_t, joint.y, noise).map_err(e2s)?;
    let res = fit_blind(&obs, &src, 5, (-0.25, 0.25), &FitConfig { max_iters: 1500, restarts: 3, seed: 7, ..FitConfig::default() })
        .map_err(e2s)?;
    let d = Deconvolver::new(&obs.with_noise_var(res.noise_var).map_err(e2s)?, res.pair().map_err(e2s)?).map_err(e2s)?;
    let mean: Vec<f64> = d.source_mean(&Locations::one_d(truth_t)).map_err(e2s)?.iter().copied().collect();
    let ncc = ncc_with_shift(&joint.x, &mean, 25);
    ensure(ncc >= 0.8, format!("blind correlation {ncc:.3} < 0.8"))?;
    Ok(format!("traces nondecreasing, degeneracy gap {:.1e}, blind correlation {ncc:.3}", (a - b).abs()))
}

/// Criterion 8: the de-reverberation ordering GPDC < Wiener < inverse FT.
fn dereverberation() -> Check {
    let out = run_dereverb(&DereverbConfig::default()).map_err(e2s)?;
    let s = &out.scores;
    let line = format!(
        "mse_time {:.4} / {:.4} / {:.4}, kl_psd {:.4} / {:.4} / {:.4}",
        s.gpdc.mse_time, s.wiener.mse_time, s.inverse_ft.mse_time, s.gpdc.kl_psd, s.wiener.kl_psd, s.inverse_ft.kl_psd
    );
    ensure(s.gpdc.mse_time < s.wiener.mse_time && s.wiener.mse_time < s.inverse_ft.mse_time, format!("time ordering: {line}"))?;
    ensure(s.gpdc.kl_psd < s.wiener.kl_psd && s.wiener.kl_psd < s.inverse_ft.kl_psd, format!("KL ordering: {line}"))?;
    Ok(line)
}

/// Criterion 9: image reconstruction improves with the observed fraction.
fn image_sweep() -> Check {
    let truth = synthetic_image(16, 16, 2.0, 12).map_err(e2s)?;
    let setup = ImageSetup {
        truth,
        weights: vec![1.0 / 25.0; 25],
        kshape: [5, 5],
        kernel: KernelSpec::se_2d(1.0, 1.0).map_err(e2s)?,
        noise_sd: 0.05,
        training: Some(ImageTraining { blind: false, fit: FitConfig { max_iters: 300, ..FitConfig::default() } }),
        wiener_noise_to_signal: 0.01,
        seed: 12,
    };
    let data = setup.simulate().map_err(e2s)?;
    let mut errors = Vec::new();
    for f in [0.3, 0.6, 0.9] {
        errors.push(setup.reconstruct(&data, f).map_err(e2s)?.mse);
    }
    ensure(errors[0] > errors[1] && errors[1] > errors[2], format!("MSE not decreasing: {errors:?}"))?;

    // A 1 x n image row against the 1D path.
    let n = 12;
    let row: Vec<f64> = (0..n).map(|i| (i as f64 * 0.6).cos()).collect();
    let w = vec![0.25, 0.5, 0.25];
    let mut mask = ImageMask::full(1, n);
    mask.observed[3] = false;
    mask.observed[8] = false;
    let kernel2 = KernelSpec::se_2d(1.0, 1.2).map_err(e2s)?;
    let h2 = FilterSpec::Discrete(DiscreteFilter::grid_2d(w.clone(), 1.0, [1, 3]).map_err(e2s)?);
    let a = deconvolve(
        &ObservationSet::from_image(&row, mask.clone(), 0.01).map_err(e2s)?,
        &kernel2,
        &h2,
        CovMethod::DiscreteSum,
        &Locations::pixel_grid(1, n),
    )
    .map_err(e2s)?;
    let keep: Vec<usize> = mask.observed_indices();
    let obs1 = ObservationSet::one_d(keep.iter().map(|&c| c as f64).collect(), keep.iter().map(|&c| row[c]).collect(), 0.01)
        .map_err(e2s)?;
    let b = deconvolve(
        &obs1,
        &KernelSpec::se(1.0, 1.2).map_err(e2s)?,
        &FilterSpec::discrete(w, vec![-1.0, 0.0, 1.0]).map_err(e2s)?,
        CovMethod::DiscreteSum,
        &Locations::linspace(0.0, (n - 1) as f64, n),
    )
    .map_err(e2s)?;
    let gap = (a.mean - b.mean).amax().max((a.cov - b.cov).amax());
    ensure(gap <= 1e-10, format!("2D row differs from 1D by {gap:e}"))?;
    Ok(format!("MSE {:.3e} > {:.3e} > {:.3e}, row consistency {gap:.1e}", errors[0], errors[1], errors[2]))
}

fn run_cli(args: &[&str], out: &Path) -> Result<String, String> {
    let output = Command::new(env!("CARGO_BIN_EXE_gpdc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(e2s)?;
    if !output.status.success() {
        return Err(format!("gpdc {args:?} failed: {}", String::from_utf8_lossy(&output.stderr)));
    }
    Ok(String::from_utf8_lossy(&output.stdout).into_owned())
}

fn snapshot(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map_err(e2s)?
        .map(|e| {
            let e = e.map_err(e2s)?;
            Ok((e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).map_err(e2s)?))
        })
        .collect::<Result<_, String>>()?;
    files.sort();
    Ok(files)
}

/// Criterion 10: every command is byte-for-byte reproducible.
fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(e2s)?;
    let root = tmp.path();
    let write = |name: &str, text: &str| -> Result<String, String> {
        let p = root.join(name);
        std::fs::write(&p, text).map_err(e2s)?;
        Ok(p.to_string_lossy().into_owned())
    };
    let sample_cfg = write(
        "sample.json",
        r#"{"source": {"type": "se", "sigma": 1.0, "gamma": 10.0},
            "filter": {"type": "se", "sigma": 1.0, "gamma": 10.0},
            "source_grid": {"start": 0, "end": 10, "n": 40},
            "conv_grid": {"start": 0, "end": 10, "n": 120},
            "noise_var": 0.01, "seed": 1}"#,
    )?;
    let base = root.join("base");
    run_cli(&["sample", "--config", &sample_cfg], &base)?;
    let conv_csv = base.join("convolution.csv").to_string_lossy().into_owned();
    let source_csv = base.join("source.csv").to_string_lossy().into_owned();
    let deconv_cfg = write(
        "deconv.json",
        r#"{"source": {"type": "se", "sigma": 1.0, "gamma": 10.0},
            "filter": {"type": "se", "sigma": 1.0, "gamma": 10.0},
            "noise_var": 0.01, "queries": {"start": 0, "end": 10, "n": 40}}"#,
    )?;
    let train_cfg = write(
        "train.json",
        r#"{"source": {"type": "se", "sigma": 1.0, "lengthscale": 0.5},
            "filter": {"type": "se", "sigma": 1.0, "gamma": 10.0},
            "fixed": ["filter.sigma", "filter.lengthscale"],
            "fit": {"max_iters": 60, "restarts": 2}, "seed": 3}"#,
    )?;
    let image_cfg = write(
        "image.json",
        r#"{"synthetic": {"rows": 8, "cols": 8, "lengthscale": 1.5},
            "filter": "h2", "observed_fraction": 0.6, "sweep": [0.3, 0.9], "seed": 4}"#,
    )?;
    let baseline_cfg = write(
        "baseline.json",
        r#"{"method": "wiener", "filter": {"type": "se", "sigma": 1.0, "gamma": 10.0}, "noise_var": 0.01}"#,
    )?;
    let diagnose_cfg = write(
        "diagnose.json",
        r#"{"source": {"type": "sinc", "sigma": 1.0, "width": 2.0},
            "filter": {"type": "sinc", "sigma": 1.0, "width": 1.0},
            "freqs": {"start": 0, "end": 1.5, "n": 31}}"#,
    )?;
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("sample", vec!["sample", "--config", &sample_cfg, "--seed", "9"]),
        ("deconv", vec!["deconv", "--config", &deconv_cfg, "--input", &conv_csv]),
        ("train", vec!["train", "--config", &train_cfg, "--input", &conv_csv]),
        ("image", vec!["image", "--config", &image_cfg]),
        ("baseline", vec!["baseline", "--config", &baseline_cfg, "--input", &conv_csv]),
        ("evaluate", vec!["evaluate", "--truth", &source_csv, "--estimate", &source_csv, "--align"]),
        ("diagnose", vec!["diagnose", "--config", &diagnose_cfg]),
    ];
    for (name, args) in &runs {
        let (a, b) = (root.join(format!("{name}-a")), root.join(format!("{name}-b")));
        let (sa, sb) = (run_cli(args, &a)?, run_cli(args, &b)?);
        ensure(sa == sb, format!("{name}: stdout differs"))?;
        let (fa, fb) = (snapshot(&a)?, snapshot(&b)?);
        ensure(!fa.is_empty(), format!("{name}: wrote no files"))?;
        ensure(fa == fb, format!("{name}: output files differ"))?;
    }
    Ok(format!("{} commands reproduced byte for byte", runs.len()))
}

fn main() {
    let criteria: [(&str, f64, fn() -> Check); 10] = [
        ("Dirac identity", 1.0, dirac_identity),
        ("analytic vs quadrature oracle", 30.0, analytic_vs_quadrature),
        ("likelihood correctness", 1.0, likelihood),
        ("recovery improves with observations", 60.0, recovery_with_data),
        ("suppressed band is unrecoverable", 120.0, suppressed_band),
        ("conditional density tightens", 60.0, conditional_tightening),
        ("training suite", 600.0, training),
        ("de-reverberation ordering", 300.0, dereverberation),
        ("image sweep", 300.0, image_sweep),
        ("CLI determinism", 300.0, determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok(d) if secs <= *limit => (true, d),
            Ok(d) => (false, format!("{d}; took {secs:.1} s, limit {limit} s")),
            Err(e) => (false, e),
        };
        failed += usize::from(!pass);
        println!("{} criterion {:>2} {name} ({secs:.2} s): {detail}", if pass { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
