//! Derivative-free and finite-difference maximizers over unconstrained vectors.

/// Result of one local maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best value after each iteration, starting with the initial value.
    pub trace: Vec<f64>,
}

struct Counted<F> {
    f: F,
    calls: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    /// Negated objective; failures (NaN, -inf) become +inf.
    fn cost(&mut self, x: &[f64]) -> f64 {
        self.calls += 1;
        let v = (self.f)(x);
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    }
}

/// Nelder–Mead on `-f` with the standard coefficients (1, 2, 0.5, 0.5).
///
/// `steps[i]` is the initial simplex offset along coordinate `i`. Stops when
/// the simplex diameter falls below `xtol` or after `max_iters` iterations.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], steps: &[f64], max_iters: usize, xtol: f64) -> Outcome {
    let n = x0.len();
    let mut obj = Counted { f, calls: 0 };
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut costs: Vec<f64> = simplex.iter().map(|v| obj.cost(v)).collect();
    let mut trace = vec![-costs[0]];
    let mut iterations = 0;

    let order = |simplex: &mut Vec<Vec<f64>>, costs: &mut Vec<f64>| {
        let mut idx: Vec<usize> = (0..costs.len()).collect();
        // stable: ties keep the older vertex first
        idx.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
        *simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        *costs = idx.iter().map(|&i| costs[i]).collect();
    };
    order(&mut simplex, &mut costs);
    *trace.last_mut().unwrap() = -costs[0];

    while iterations < max_iters && n > 0 {
        let diameter = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter < xtol {
            break;
        }
        iterations += 1;
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };

        let xr = along(-1.0);
        let fr = obj.cost(&xr);
        if fr < costs[0] {
            let xe = along(-2.0);
            let fe = obj.cost(&xe);
            if fe < fr {
                simplex[n] = xe;
                costs[n] = fe;
            } else {
                simplex[n] = xr;
                costs[n] = fr;
            }
        } else if fr < costs[n - 1] {
            simplex[n] = xr;
            costs[n] = fr;
        } else {
            let (xc, fc) = if fr < costs[n] {
                let xc = along(-0.5);
                let fc = obj.cost(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = obj.cost(&xc);
                (xc, fc)
            };
            if fc < costs[n].min(fr) {
                simplex[n] = xc;
                costs[n] = fc;
            } else {
                for i in 1..=n {
                    let v: Vec<f64> = (0..n).map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j])).collect();
                    costs[i] = obj.cost(&v);
                    simplex[i] = v;
                }
            }
        }
        order(&mut simplex, &mut costs);
        trace.push(-costs[0]);
    }
    Outcome { x: simplex[0].clone(), value: -costs[0], iterations, evaluations: obj.calls, trace }
}

/// Central-difference gradient of `f` at `x`.
pub fn fd_gradient<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], step: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + step;
            let up = f(&xp);
            xp[i] = x[i] - step;
            let down = f(&xp);
            xp[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// BFGS ascent with central finite-difference gradients and Armijo backtracking.
pub fn bfgs<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], max_iters: usize, fd_step: f64, gtol: f64) -> Outcome {
    let n = x0.len();
    let mut obj = Counted { f, calls: 0 };
    let mut x = x0.to_vec();
    let mut fx = obj.cost(&x);
    let mut trace = vec![-fx];
    let mut iterations = 0;
    if n == 0 || !fx.is_finite() {
        return Outcome { x, value: -fx, iterations, evaluations: obj.calls, trace };
    }
    let grad = |obj: &mut Counted<F>, x: &[f64]| fd_gradient(&mut |p: &[f64]| obj.cost(p), x, fd_step);
    let mut g = grad(&mut obj, &x);
    let mut h = identity(n);
    let mut reset = false;
    while iterations < max_iters {
        if g.iter().any(|v| !v.is_finite()) || g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < gtol {
            break;
        }
        let d: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| h[i][j] * g[j]).sum::<f64>()).collect();
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        let d = if slope >= 0.0 {
            // not a descent direction: fall back to steepest descent
            h = identity(n);
            let d: Vec<f64> = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
            d
        } else {
            d
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let fnew = obj.cost(&xn);
            if fnew.is_finite() && fnew <= fx + 1e-4 * t * slope {
                accepted = Some((xn, fnew));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            if reset {
                break;
            }
            reset = true;
            h = identity(n);
            continue;
        };
        reset = false;
        iterations += 1;
        let gn = grad(&mut obj, &xn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i][j] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += (1.0 + yhy * rho) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        let small_step = s.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 1e-12;
        x = xn;
        fx = fnew;
        g = gn;
        trace.push(-fx);
        if small_step {
            break;
        }
    }
    Outcome { x, value: -fx, iterations, evaluations: obj.calls, trace }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}
