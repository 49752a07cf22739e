use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{logistic, logit};

/// Natural-scale multi-state parameters. Indices are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsParams {
    pub occasions: usize,
    pub states: usize,
    /// First-capture probabilities, `p[t * R + r]`.
    pub p: Vec<f64>,
    /// Recapture probabilities, `c[t * R + r]`; row 0 is never used.
    pub c: Vec<f64>,
    /// Transitions, `psi[(t * R + r) * R + s]` for `t < T - 1`.
    pub psi: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Logit offset of recapture over first capture, when behaviour is modelled.
    pub beta: Option<f64>,
    pub n_pop: f64,
}

impl MsParams {
    /// Time-constant parameters with `c = p` and a single transition matrix.
    pub fn homogeneous(
        occasions: usize,
        p_by_state: &[f64],
        psi: &[Vec<f64>],
        alpha: &[f64],
        n_pop: f64,
    ) -> Self {
        let states = p_by_state.len();
        let p: Vec<f64> = (0..occasions).flat_map(|_| p_by_state.iter().copied()).collect();
        let psi_flat: Vec<f64> = (0..occasions.saturating_sub(1))
            .flat_map(|_| psi.iter().flat_map(|row| row.iter().copied()))
            .collect();
        Self {
            occasions,
            states,
            c: p.clone(),
            p,
            psi: psi_flat,
            alpha: alpha.to_vec(),
            beta: None,
            n_pop,
        }
    }

    /// Sets `logit c = logit p + beta` everywhere.
    pub fn with_trap_response(mut self, beta: f64) -> Self {
        self.c = self.p.iter().map(|&p| logistic(logit(p) + beta)).collect();
        self.beta = Some(beta);
        self
    }

    #[inline]
    pub fn p(&self, t: usize, r: usize) -> f64 {
        self.p[t * self.states + r]
    }

    #[inline]
    pub fn c(&self, t: usize, r: usize) -> f64 {
        self.c[t * self.states + r]
    }

    #[inline]
    pub fn psi(&self, t: usize, r: usize, s: usize) -> f64 {
        self.psi[(t * self.states + r) * self.states + s]
    }

    pub fn validate(&self) -> Result<()> {
        let (t, r) = (self.occasions, self.states);
        if t == 0 || r == 0 {
            return Err(Error::Dimension("T and R must be positive".into()));
        }
        if self.p.len() != t * r || self.c.len() != t * r {
            return Err(Error::Dimension("p and c must be T x R".into()));
        }
        if self.psi.len() != (t - 1) * r * r {
            return Err(Error::Dimension("psi must be (T-1) x R x R".into()));
        }
        if self.alpha.len() != r {
            return Err(Error::Dimension("alpha must have R entries".into()));
        }
        let unit = |x: &f64| (0.0..=1.0).contains(x);
        if !self.p.iter().all(unit) || !self.c.iter().all(unit) || !self.psi.iter().all(unit) {
            return Err(Error::InvalidParams("probabilities must lie in [0, 1]".into()));
        }
        if (self.alpha.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams("alpha must sum to 1".into()));
        }
        for row in self.psi.chunks(r) {
            if (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParams("every psi row must sum to 1".into()));
            }
        }
        Ok(())
    }

    /// Relabels states by `perm`: new state `perm[r]` is old state `r`.
    pub fn permute_states(&self, perm: &[usize]) -> Self {
        let (t_max, r_max) = (self.occasions, self.states);
        let mut out = self.clone();
        for t in 0..t_max {
            for r in 0..r_max {
                out.p[t * r_max + perm[r]] = self.p(t, r);
                out.c[t * r_max + perm[r]] = self.c(t, r);
            }
        }
        for t in 0..t_max.saturating_sub(1) {
            for r in 0..r_max {
                for s in 0..r_max {
                    out.psi[(t * r_max + perm[r]) * r_max + perm[s]] = self.psi(t, r, s);
                }
            }
        }
        for r in 0..r_max {
            out.alpha[perm[r]] = self.alpha[r];
        }
        out
    }
}
