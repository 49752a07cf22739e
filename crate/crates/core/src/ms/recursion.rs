//! Partial-history probabilities by backward recursion over the first occasion.

use super::MsParams;

/// Probabilities indexed `[t1][t2][r][s]` for `t1 < t2`; other entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionArray {
    occasions: usize,
    states: usize,
    data: Vec<f64>,
}

impl TransitionArray {
    fn zeros(occasions: usize, states: usize) -> Self {
        Self {
            occasions,
            states,
            data: vec![0.0; occasions * occasions * states * states],
        }
    }

    #[inline]
    fn idx(&self, t1: usize, t2: usize, r: usize, s: usize) -> usize {
        ((t1 * self.occasions + t2) * self.states + r) * self.states + s
    }

    #[inline]
    pub fn get(&self, t1: usize, t2: usize, r: usize, s: usize) -> f64 {
        self.data[self.idx(t1, t2, r, s)]
    }

    #[inline]
    fn set(&mut self, t1: usize, t2: usize, r: usize, s: usize, v: f64) {
        let i = self.idx(t1, t2, r, s);
        self.data[i] = v;
    }

    pub fn occasions(&self) -> usize {
        self.occasions
    }

    pub fn states(&self) -> usize {
        self.states
    }
}

/// `Q_{t1,t2}(r,s)`: move from `r` at `t1` to `s` at `t2` while missed at every
/// occasion strictly between, where `miss(t, u)` is the miss probability.
fn q_with(params: &MsParams, miss: impl Fn(usize, usize) -> f64) -> TransitionArray {
    let (t_max, r_max) = (params.occasions, params.states);
    let mut q = TransitionArray::zeros(t_max, r_max);
    if t_max < 2 {
        return q;
    }
    for t1 in (0..t_max - 1).rev() {
        for r in 0..r_max {
            for s in 0..r_max {
                q.set(t1, t1 + 1, r, s, params.psi(t1, r, s));
            }
        }
        for t2 in t1 + 2..t_max {
            for r in 0..r_max {
                for s in 0..r_max {
                    let v: f64 = (0..r_max)
                        .map(|u| params.psi(t1, r, u) * miss(t1 + 1, u) * q.get(t1 + 1, t2, u, s))
                        .sum();
                    q.set(t1, t2, r, s, v);
                }
            }
        }
    }
    q
}

/// Transitions while not yet captured (misses use `1 - p`).
pub fn q_unmarked(params: &MsParams) -> TransitionArray {
    q_with(params, |t, u| 1.0 - params.p(t, u))
}

/// Transitions after first capture (misses use `1 - c`).
pub fn q_marked(params: &MsParams) -> TransitionArray {
    q_with(params, |t, u| 1.0 - params.c(t, u))
}

fn zeta_from(params: &MsParams, qp: &TransitionArray) -> Vec<f64> {
    let (t_max, r_max) = (params.occasions, params.states);
    let mut zeta = vec![0.0; t_max * r_max];
    for r in 0..r_max {
        zeta[r] = params.p(0, r) * params.alpha[r];
    }
    for t in 1..t_max {
        for r in 0..r_max {
            let reach: f64 = (0..r_max)
                .map(|u| params.alpha[u] * (1.0 - params.p(0, u)) * qp.get(0, t, u, r))
                .sum();
            zeta[t * r_max + r] = params.p(t, r) * reach;
        }
    }
    zeta
}

fn recapture_from(params: &MsParams, qc: &TransitionArray) -> TransitionArray {
    let (t_max, r_max) = (params.occasions, params.states);
    let mut o = TransitionArray::zeros(t_max, r_max);
    for t1 in 0..t_max {
        for t2 in t1 + 1..t_max {
            for r in 0..r_max {
                for s in 0..r_max {
                    o.set(t1, t2, r, s, qc.get(t1, t2, r, s) * params.c(t2, s));
                }
            }
        }
    }
    o
}

fn chi_from(params: &MsParams, qc: &TransitionArray) -> Vec<f64> {
    let (t_max, r_max) = (params.occasions, params.states);
    let mut chi = vec![1.0; t_max * r_max];
    for t in 0..t_max.saturating_sub(1) {
        for r in 0..r_max {
            chi[t * r_max + r] = (0..r_max)
                .map(|u| qc.get(t, t_max - 1, r, u) * (1.0 - params.c(t_max - 1, u)))
                .sum();
        }
    }
    chi
}

fn rho_from(params: &MsParams, qp: &TransitionArray) -> f64 {
    let (t_max, r_max) = (params.occasions, params.states);
    if t_max == 1 {
        return (0..r_max)
            .map(|r| params.alpha[r] * (1.0 - params.p(0, r)))
            .sum();
    }
    let mut rho = 0.0;
    for r in 0..r_max {
        let start = params.alpha[r] * (1.0 - params.p(0, r));
        for s in 0..r_max {
            rho += start * qp.get(0, t_max - 1, r, s) * (1.0 - params.p(t_max - 1, s));
        }
    }
    rho
}

/// `zeta_t(r)`, flattened `t * R + r`.
pub fn first_capture_probs(params: &MsParams) -> Vec<f64> {
    zeta_from(params, &q_unmarked(params))
}

/// `O_{t1,t2}(r,s) = Q^C_{t1,t2}(r,s) c_{t2}(s)`.
pub fn recapture_probs(params: &MsParams) -> TransitionArray {
    recapture_from(params, &q_marked(params))
}

/// `chi_t(r)`, flattened `t * R + r`; equal to 1 at the last occasion.
pub fn chi_probs(params: &MsParams) -> Vec<f64> {
    chi_from(params, &q_marked(params))
}

/// `rho`: probability of never being captured.
pub fn never_observed_prob(params: &MsParams) -> f64 {
    rho_from(params, &q_unmarked(params))
}

/// All partial-history probabilities computed from one pass of each recursion.
#[derive(Debug, Clone)]
pub struct PartialHistoryProbs {
    pub zeta: Vec<f64>,
    pub recapture: TransitionArray,
    pub chi: Vec<f64>,
    pub rho: f64,
}

impl PartialHistoryProbs {
    pub fn new(params: &MsParams) -> Self {
        let qp = q_unmarked(params);
        let qc = if params.c == params.p {
            qp.clone()
        } else {
            q_marked(params)
        };
        Self {
            zeta: zeta_from(params, &qp),
            recapture: recapture_from(params, &qc),
            chi: chi_from(params, &qc),
            rho: rho_from(params, &qp),
        }
    }
}
