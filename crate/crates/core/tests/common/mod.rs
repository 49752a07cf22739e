//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls the library's recursions or likelihoods: histories are
//! scored one at a time with a forward pass, partial-history probabilities
//! by summing over every state path, and beta integrals by quadrature.

#![allow(dead_code)]

use closedpop::data::{Dataset, EncounterHistory};
use closedpop::ms::MsParams;
use rand::Rng;

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

fn psi(params: &MsParams, t: usize, r: usize, s: usize) -> f64 {
    let k = params.states;
    params.psi[(t * k + r) * k + s]
}

fn p(params: &MsParams, t: usize, r: usize) -> f64 {
    params.p[t * params.states + r]
}

fn c(params: &MsParams, t: usize, r: usize) -> f64 {
    params.c[t * params.states + r]
}

/// Probability of one full history by a forward pass over the hidden state.
pub fn history_prob(h: &[u32], params: &MsParams) -> f64 {
    let k = params.states;
    let mut a = params.alpha.clone();
    let mut seen = false;
    for (t, &obs) in h.iter().enumerate() {
        for (r, ar) in a.iter_mut().enumerate() {
            let cap = if seen { c(params, t, r) } else { p(params, t, r) };
            *ar *= match obs {
                0 => 1.0 - cap,
                x if x as usize == r + 1 => cap,
                _ => 0.0,
            };
        }
        if obs > 0 {
            seen = true;
        }
        if t + 1 < h.len() {
            a = (0..k)
                .map(|s| (0..k).map(|r| a[r] * psi(params, t, r, s)).sum())
                .collect();
        }
    }
    a.iter().sum()
}

/// Full log-likelihood scored history by history.
pub fn forward_log_lik(data: &Dataset, params: &MsParams) -> f64 {
    let n = data.n() as f64;
    let rho = history_prob(&vec![0; data.occasions()], params);
    let mut ll = ln_gamma(params.n_pop + 1.0) - ln_gamma(params.n_pop - n + 1.0);
    if params.n_pop > n {
        ll += (params.n_pop - n) * rho.ln();
    }
    for h in data.histories() {
        ll += history_prob(h.entries(), params).ln();
    }
    ll
}

/// Every state sequence of length `len` over `k` states.
pub fn paths(k: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out
}

/// Weight of a path starting at occasion `t0`, excluding the initial state's weight.
fn path_weight(params: &MsParams, t0: usize, path: &[usize], miss: impl Fn(usize, usize) -> f64) -> f64 {
    let mut w = 1.0;
    for i in 1..path.len() {
        let t = t0 + i;
        w *= psi(params, t - 1, path[i - 1], path[i]);
        if i + 1 < path.len() {
            w *= miss(t, path[i]);
        }
    }
    w
}

/// First capture at `t` in state `r`.
pub fn enum_zeta(params: &MsParams, t: usize, r: usize) -> f64 {
    paths(params.states, t + 1)
        .iter()
        .filter(|q| q[t] == r)
        .map(|q| {
            let mut w = params.alpha[q[0]];
            for u in 0..t {
                w *= 1.0 - p(params, u, q[u]);
                w *= psi(params, u, q[u], q[u + 1]);
            }
            w * p(params, t, r)
        })
        .sum()
}

/// Seen at `t1` in `r`, next seen at `t2` in `s`.
pub fn enum_recapture(params: &MsParams, t1: usize, t2: usize, r: usize, s: usize) -> f64 {
    paths(params.states, t2 - t1 + 1)
        .iter()
        .filter(|q| q[0] == r && q[t2 - t1] == s)
        .map(|q| path_weight(params, t1, q, |t, x| 1.0 - c(params, t, x)) * c(params, t2, s))
        .sum()
}

/// Seen at `t` in `r` and never again.
pub fn enum_chi(params: &MsParams, t: usize, r: usize) -> f64 {
    let t_max = params.occasions;
    if t + 1 == t_max {
        return 1.0;
    }
    paths(params.states, t_max - t)
        .iter()
        .filter(|q| q[0] == r)
        .map(|q| {
            let last = *q.last().unwrap();
            path_weight(params, t, q, |u, x| 1.0 - c(params, u, x)) * (1.0 - c(params, t_max - 1, last))
        })
        .sum()
}

/// Never observed.
pub fn enum_rho(params: &MsParams) -> f64 {
    let t_max = params.occasions;
    paths(params.states, t_max)
        .iter()
        .map(|q| {
            let mut w = params.alpha[q[0]];
            for u in 0..t_max {
                w *= 1.0 - p(params, u, q[u]);
                if u + 1 < t_max {
                    w *= psi(params, u, q[u], q[u + 1]);
                }
            }
            w
        })
        .sum()
}

fn simplex<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

/// Arbitrary valid parameters: time- and state-varying `p`, `c` and `psi`.
pub fn random_params<R: Rng>(rng: &mut R, occasions: usize, states: usize, n_pop: f64) -> MsParams {
    let p: Vec<f64> = (0..occasions * states).map(|_| rng.random_range(0.02..0.95)).collect();
    let c: Vec<f64> = (0..occasions * states).map(|_| rng.random_range(0.02..0.95)).collect();
    let psi: Vec<f64> = (0..occasions.saturating_sub(1) * states)
        .flat_map(|_| simplex(rng, states))
        .collect();
    MsParams {
        occasions,
        states,
        p,
        c,
        psi,
        alpha: simplex(rng, states),
        beta: None,
        n_pop,
    }
}

/// Random histories, each with at least one capture.
pub fn random_dataset<R: Rng>(rng: &mut R, occasions: usize, states: usize, n: usize) -> Dataset {
    let histories = (0..n)
        .map(|_| loop {
            let h: Vec<u32> = (0..occasions)
                .map(|_| {
                    if rng.random_bool(0.45) {
                        rng.random_range(1..=states as u32)
                    } else {
                        0
                    }
                })
                .collect();
            if h.iter().any(|&x| x > 0) {
                break EncounterHistory::new(h);
            }
        })
        .collect();
    Dataset::new(histories, states).unwrap()
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    (1..=m)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=m {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// `int_0^1 x^(a+j-1) (1-x)^(b+T-j-1) dx` with `x = sin^2(phi)` and
/// composite Gauss–Legendre in `phi`.
pub fn beta_integral(a: f64, b: f64, j: usize, occasions: usize) -> f64 {
    let rule = gauss_legendre(20);
    let panels = 64;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let h = half_pi / panels as f64;
    let e1 = 2.0 * (a + j as f64) - 1.0;
    let e2 = 2.0 * (b + (occasions - j) as f64) - 1.0;
    let mut total = 0.0;
    for k in 0..panels {
        let mid = (k as f64 + 0.5) * h;
        for &(x, w) in &rule {
            let phi = mid + 0.5 * h * x;
            total += 0.5 * h * w * 2.0 * phi.sin().powf(e1) * phi.cos().powf(e2);
        }
    }
    total
}

/// Beta-binomial probability of one history with `j` captures, by quadrature.
pub fn beta_binomial_quadrature(a: f64, b: f64, j: usize, occasions: usize) -> f64 {
    beta_integral(a, b, j, occasions) / beta_integral(a, b, 0, 0)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}
