//! Derivative-free minimization on an unconstrained working scale.
//!
//! Nelder–Mead with dimension-adaptive coefficients. A run stops when the
//! spread of function values over the simplex falls below `f_tol`; the
//! search is then restarted from the best vertex with a fresh simplex, and
//! declared converged once a restart no longer improves the minimum by more
//! than `f_tol`.
//!
//! BFGS with finite-difference gradients finishes searches in higher
//! dimensions, where the simplex alone creeps.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Iteration budget across all restarts.
    pub max_iter: usize,
    pub f_tol: f64,
    pub initial_step: f64,
    /// Points with any `|x_i| > bound` are treated as infeasible.
    pub bound: f64,
    pub max_restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            f_tol: 1e-9,
            initial_step: 1.0,
            bound: 25.0,
            max_restarts: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Bounded<F> {
    f: F,
    bound: f64,
}

impl<F: FnMut(&[f64]) -> f64> Bounded<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        if x.iter().any(|v| !v.is_finite() || v.abs() > self.bound) {
            return f64::INFINITY;
        }
        let y = (self.f)(x);
        if y.is_nan() {
            f64::INFINITY
        } else {
            y
        }
    }
}

pub fn nelder_mead<F>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let mut obj = Bounded { f, bound: opts.bound };
    let mut best = x0.iter().map(|v| v.clamp(-opts.bound, opts.bound)).collect::<Vec<_>>();
    let mut best_f = obj.eval(&best);
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..=opts.max_restarts {
        let budget = opts.max_iter.saturating_sub(iterations);
        if budget == 0 {
            break;
        }
        let (x, fx, used, settled) = run(&mut obj, &best, opts, budget);
        iterations += used;
        let improvement = best_f - fx;
        if fx <= best_f {
            best = x;
            best_f = fx;
        }
        if !settled {
            break;
        }
        if improvement.is_finite() && improvement < opts.f_tol {
            converged = true;
            break;
        }
    }

    Minimum {
        x: best,
        fx: best_f,
        iterations,
        converged,
    }
}

/// One simplex run. Returns `(x, f(x), iterations, settled)`.
fn run<F: FnMut(&[f64]) -> f64>(
    obj: &mut Bounded<F>,
    start: &[f64],
    opts: &NelderMeadOptions,
    budget: usize,
) -> (Vec<f64>, f64, usize, bool) {
    let n = start.len();
    let nf = n as f64;
    let (alpha, gamma) = (1.0, 1.0 + 2.0 / nf);
    let (rho, sigma) = (0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);
    let (rho, sigma) = if n == 1 { (0.5, 0.5) } else { (rho, sigma) };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), obj.eval(start)));
    for i in 0..n {
        let mut x = start.to_vec();
        let step = opts.initial_step;
        x[i] += if x[i] + step > opts.bound { -step } else { step };
        let fx = obj.eval(&x);
        simplex.push((x, fx));
    }

    let mut it = 0;
    while it < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let f_best = simplex[0].1;
        let f_worst = simplex[n].1;
        if f_best.is_finite() && (f_worst - f_best).abs() < opts.f_tol {
            let (x, fx) = simplex.swap_remove(0);
            return (x, fx, it, true);
        }
        it += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / nf;
            }
        }
        let along = |coef: f64, worst: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(worst)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let worst = simplex[n].0.clone();
        let xr = along(alpha, &worst);
        let fr = obj.eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(alpha * gamma, &worst);
            let fe = obj.eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = along(alpha * rho, &worst);
            let fc = obj.eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-rho, &worst);
            let fc = obj.eval(&xc);
            (xc, fc)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x0 = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = x0
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + sigma * (v - b))
                .collect();
            let fx = obj.eval(&x);
            *vertex = (x, fx);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    (x, fx, it, false)
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Converged after three successive steps each improving by less than this.
    pub f_tol: f64,
    /// Converged once the largest gradient component falls below this.
    pub g_tol: f64,
    pub bound: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            f_tol: 1e-9,
            g_tol: 1e-7,
            bound: 25.0,
        }
    }
}

/// Central differences, falling back to one side next to the bound.
fn bounded_gradient<F: FnMut(&[f64]) -> f64>(obj: &mut Bounded<F>, x: &[f64], fx: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 1e-6 * x[i].abs().max(1.0);
            xp[i] = x[i] + h;
            let up = obj.eval(&xp);
            xp[i] = x[i] - h;
            let down = obj.eval(&xp);
            xp[i] = x[i];
            match (up.is_finite(), down.is_finite()) {
                (true, true) => (up - down) / (2.0 * h),
                (true, false) => (up - fx) / h,
                (false, true) => (fx - down) / h,
                (false, false) => 0.0,
            }
        })
        .collect()
}

pub fn bfgs<F>(f: F, x0: &[f64], opts: &BfgsOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let mut obj = Bounded { f, bound: opts.bound };
    let n = x0.len();
    let mut x: Vec<f64> = x0.iter().map(|v| v.clamp(-opts.bound, opts.bound)).collect();
    let mut fx = obj.eval(&x);
    if !fx.is_finite() {
        return Minimum { x, fx, iterations: 0, converged: false };
    }
    let identity = |n: usize| -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect()
    };
    let mut inv_h = identity(n);
    let mut g = bounded_gradient(&mut obj, &x, fx);
    let mut quiet = 0;
    let mut reset = false;

    for it in 0..opts.max_iter {
        if g.iter().all(|v| v.abs() < opts.g_tol) {
            return Minimum { x, fx, iterations: it, converged: true };
        }
        let mut d: Vec<f64> = inv_h.iter().map(|row| -row.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()).collect();
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            inv_h = identity(n);
            d = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        let longest = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut t = (5.0 / longest).min(1.0);
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let ft = obj.eval(&trial);
            if ft <= fx + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            if reset {
                // no descent even along the gradient: stationary to working precision
                return Minimum { x, fx, iterations: it, converged: true };
            }
            reset = true;
            inv_h = identity(n);
            continue;
        };
        reset = false;
        let g_new = bounded_gradient(&mut obj, &x_new, f_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            let hy: Vec<f64> = inv_h.iter().map(|row| row.iter().zip(&y).map(|(a, b)| a * b).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    inv_h[i][j] += (sy + yhy) * s[i] * s[j] / (sy * sy) - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                }
            }
        }
        quiet = if fx - f_new < opts.f_tol { quiet + 1 } else { 0 };
        x = x_new;
        fx = f_new;
        g = g_new;
        if quiet >= 3 {
            return Minimum { x, fx, iterations: it + 1, converged: true };
        }
    }
    Minimum { x, fx, iterations: opts.max_iter, converged: false }
}

/// Central-difference gradient.
pub fn gradient<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], rel_step: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = rel_step * x[i].abs().max(1.0);
            xp[i] = x[i] + h;
            let up = f(&xp);
            xp[i] = x[i] - h;
            let down = f(&xp);
            xp[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian, row-major.
pub fn hessian<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], rel_step: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| rel_step * v.abs().max(1.0)).collect();
    let f0 = f(x);
    let mut out = vec![vec![0.0; n]; n];
    let mut xp = x.to_vec();
    for i in 0..n {
        xp[i] = x[i] + h[i];
        let up = f(&xp);
        xp[i] = x[i] - h[i];
        let down = f(&xp);
        xp[i] = x[i];
        out[i][i] = (up - 2.0 * f0 + down) / (h[i] * h[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                xp[i] = x[i] + si * h[i];
                xp[j] = x[j] + sj * h[j];
                let v = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * h[i] * h[j]);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let m = nelder_mead(rosenbrock, &[-1.2, 1.0], &NelderMeadOptions::default());
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3, "{:?}", m.x);
    }

    #[test]
    fn one_dimensional_quadratic() {
        let m = nelder_mead(|x: &[f64]| (x[0] - 3.0).powi(2), &[0.0], &NelderMeadOptions::default());
        assert!(m.converged);
        assert!((m.x[0] - 3.0).abs() < 1e-4);
    }

    #[test]
    fn quadratic_bowl_in_six_dimensions() {
        let target = [0.5, -1.0, 2.0, 0.0, 1.5, -0.3];
        let f = |x: &[f64]| x.iter().zip(&target).enumerate().map(|(i, (a, b))| (i as f64 + 1.0) * (a - b).powi(2)).sum::<f64>();
        let m = nelder_mead(f, &[0.0; 6], &NelderMeadOptions::default());
        assert!(m.converged);
        for (a, b) in m.x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn respects_bound_when_minimum_is_outside() {
        let opts = NelderMeadOptions { bound: 5.0, ..Default::default() };
        let m = nelder_mead(|x: &[f64]| -x[0], &[0.0], &opts);
        assert!(m.x[0] <= 5.0 && m.x[0] > 4.99);
    }

    #[test]
    fn bfgs_on_rosenbrock_and_a_twelve_dimensional_bowl() {
        let m = bfgs(rosenbrock, &[-1.2, 1.0], &BfgsOptions::default());
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);

        let f = |x: &[f64]| {
            x.iter()
                .enumerate()
                .map(|(i, v)| (i as f64 + 1.0) * (v - 0.1 * i as f64).powi(2))
                .sum::<f64>()
                + 0.5 * x[0] * x[11]
        };
        let m = bfgs(f, &[1.0; 12], &BfgsOptions::default());
        assert!(m.converged);
        assert!(m.fx < f(&[0.0; 12]));
    }

    #[test]
    fn bfgs_stops_at_the_bound() {
        let opts = BfgsOptions { bound: 5.0, ..Default::default() };
        let m = bfgs(|x: &[f64]| (-x[0]).exp(), &[0.0], &opts);
        assert!(m.converged);
        assert!(m.x[0] <= 5.0 && m.x[0] > 4.0, "{:?}", m.x);
    }

    #[test]
    fn derivatives_of_a_quadratic() {
        let f = |x: &[f64]| 3.0 * x[0] * x[0] + 2.0 * x[0] * x[1] + x[1] * x[1];
        let g = gradient(f, &[1.0, 2.0], 1e-5);
        assert!((g[0] - 10.0).abs() < 1e-6 && (g[1] - 6.0).abs() < 1e-6);
        let h = hessian(f, &[1.0, 2.0], 1e-4);
        assert!((h[0][0] - 6.0).abs() < 1e-5);
        assert!((h[0][1] - 2.0).abs() < 1e-5);
        assert!((h[1][1] - 2.0).abs() < 1e-5);
    }
}
