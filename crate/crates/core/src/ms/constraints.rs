//! Sub-model restrictions and the working-scale parameterization.
//!
//! Working vector layout, in order:
//! 1. capture block (logits, see [`MsConstraints::capture_count`]),
//! 2. trap-response offset `beta` when behaviour is on,
//! 3. one multinomial-logit block of `R - 1` entries per transition row
//!    (per occasion when `psi_by_time`), last state as reference,
//! 4. `R - 1` multinomial logits for the initial distribution,
//! 5. `nu = ln(N - n)`.

use serde::{Deserialize, Serialize};

use super::MsParams;
use crate::error::{Error, Result};
use crate::model::{Reported, Scale};
use crate::special::{logistic, logit, mlogit, mlogit_inverse};

/// Which factors capture probabilities depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct MsConstraints {
    pub time: bool,
    pub behaviour: bool,
    pub state: bool,
    /// With both time and state: `logit p_t(r) = logit p_t(1) + eta_r`.
    /// Without it every `(t, r)` gets its own probability.
    pub additive: bool,
    /// Separate transition matrix per occasion instead of one shared matrix.
    pub psi_by_time: bool,
}

/// Data dimensions a working vector is interpreted against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Meta {
    pub occasions: usize,
    pub states: usize,
    pub n: usize,
}

impl MsConstraints {
    pub fn capture_count(&self, occasions: usize, states: usize) -> usize {
        match (self.time, self.state) {
            (false, false) => 1,
            (true, false) => occasions,
            (false, true) => states,
            (true, true) if self.additive => occasions + states - 1,
            (true, true) => occasions * states,
        }
    }

    fn psi_rows(&self, occasions: usize) -> usize {
        if self.psi_by_time {
            occasions.saturating_sub(1)
        } else {
            1
        }
    }

    /// Working parameters other than `nu`.
    pub fn detection_and_movement_count(&self, occasions: usize, states: usize) -> usize {
        self.capture_count(occasions, states)
            + usize::from(self.behaviour)
            + self.psi_rows(occasions) * states * (states - 1)
            + (states - 1)
    }

    /// Total working-parameter count including `nu`.
    pub fn n_params(&self, occasions: usize, states: usize) -> usize {
        self.detection_and_movement_count(occasions, states) + 1
    }

    fn first_capture_logit(&self, theta: &[f64], t: usize, r: usize, occasions: usize, states: usize) -> f64 {
        match (self.time, self.state) {
            (false, false) => theta[0],
            (true, false) => theta[t],
            (false, true) => theta[r],
            (true, true) if self.additive => {
                theta[t] + if r == 0 { 0.0 } else { theta[occasions + r - 1] }
            }
            (true, true) => theta[t * states + r],
        }
    }

    /// Natural parameters from the working vector without `nu`.
    pub(crate) fn build(&self, theta: &[f64], occasions: usize, states: usize, n_pop: f64) -> MsParams {
        let ncap = self.capture_count(occasions, states);
        let mut logits = Vec::with_capacity(occasions * states);
        for t in 0..occasions {
            for r in 0..states {
                logits.push(self.first_capture_logit(theta, t, r, occasions, states));
            }
        }
        let mut pos = ncap;
        let beta = if self.behaviour {
            pos += 1;
            Some(theta[ncap])
        } else {
            None
        };
        let p: Vec<f64> = logits.iter().map(|&l| logistic(l)).collect();
        let c: Vec<f64> = match beta {
            Some(b) => logits.iter().map(|&l| logistic(l + b)).collect(),
            None => p.clone(),
        };

        let block = states - 1;
        let mut matrices = Vec::with_capacity(self.psi_rows(occasions));
        for _ in 0..self.psi_rows(occasions) {
            let mut m = Vec::with_capacity(states * states);
            for _ in 0..states {
                m.extend(mlogit_inverse(&theta[pos..pos + block]));
                pos += block;
            }
            matrices.push(m);
        }
        let psi: Vec<f64> = (0..occasions.saturating_sub(1))
            .flat_map(|t| {
                let m = if self.psi_by_time { &matrices[t] } else { &matrices[0] };
                m.iter().copied()
            })
            .collect();
        let alpha = mlogit_inverse(&theta[pos..pos + block]);

        MsParams {
            occasions,
            states,
            p,
            c,
            psi,
            alpha,
            beta,
            n_pop,
        }
    }

    /// Reported natural-scale quantities (excluding `N`) as functions of the working vector.
    pub(crate) fn report(&self, theta: &[f64], occasions: usize, states: usize) -> Vec<Reported> {
        let params = self.build(theta, occasions, states, f64::NAN);
        let mut out = Vec::new();
        match (self.time, self.state) {
            (false, false) => out.push(Reported::prob("p", params.p(0, 0))),
            (true, false) => {
                for t in 0..occasions {
                    out.push(Reported::prob(format!("p_{}", t + 1), params.p(t, 0)));
                }
            }
            (false, true) => {
                for r in 0..states {
                    out.push(Reported::prob(format!("p({})", r + 1), params.p(0, r)));
                }
            }
            (true, true) if self.additive => {
                for t in 0..occasions {
                    out.push(Reported::prob(format!("p_{}(1)", t + 1), params.p(t, 0)));
                }
                for r in 1..states {
                    out.push(Reported::new(format!("eta({})", r + 1), theta[occasions + r - 1], Scale::Real));
                }
            }
            (true, true) => {
                for t in 0..occasions {
                    for r in 0..states {
                        out.push(Reported::prob(format!("p_{}({})", t + 1, r + 1), params.p(t, r)));
                    }
                }
            }
        }
        if let Some(b) = params.beta {
            out.push(Reported::new("beta", b, Scale::Real));
        }
        if states > 1 {
            for t in 0..self.psi_rows(occasions) {
                for r in 0..states {
                    for s in 0..states {
                        if r == s {
                            continue;
                        }
                        let name = if self.psi_by_time {
                            format!("psi_{}({},{})", t + 1, r + 1, s + 1)
                        } else {
                            format!("psi({},{})", r + 1, s + 1)
                        };
                        out.push(Reported::prob(name, params.psi(t, r, s)));
                    }
                }
            }
            for r in 0..states - 1 {
                out.push(Reported::prob(format!("alpha({})", r + 1), params.alpha[r]));
            }
        }
        out
    }
}

/// Maps a full working vector (with `nu` last) to natural parameters.
pub fn apply_constraints(working: &[f64], spec: &MsConstraints, meta: Meta) -> Result<MsParams> {
    let k = spec.n_params(meta.occasions, meta.states);
    if working.len() != k {
        return Err(Error::Dimension(format!(
            "working vector has {} entries, model needs {k}",
            working.len()
        )));
    }
    let n_pop = meta.n as f64 + working[k - 1].exp();
    Ok(spec.build(&working[..k - 1], meta.occasions, meta.states, n_pop))
}

/// Inverse of [`apply_constraints`] for parameters that satisfy `spec`.
pub fn to_working(params: &MsParams, spec: &MsConstraints, n: usize) -> Result<Vec<f64>> {
    params.validate()?;
    let (t_max, r_max) = (params.occasions, params.states);
    let mut w = Vec::with_capacity(spec.n_params(t_max, r_max));
    match (spec.time, spec.state) {
        (false, false) => w.push(logit(params.p(0, 0))),
        (true, false) => w.extend((0..t_max).map(|t| logit(params.p(t, 0)))),
        (false, true) => w.extend((0..r_max).map(|r| logit(params.p(0, r)))),
        (true, true) if spec.additive => {
            w.extend((0..t_max).map(|t| logit(params.p(t, 0))));
            w.extend((1..r_max).map(|r| logit(params.p(0, r)) - logit(params.p(0, 0))));
        }
        (true, true) => {
            for t in 0..t_max {
                for r in 0..r_max {
                    w.push(logit(params.p(t, r)));
                }
            }
        }
    }
    if spec.behaviour {
        let b = match params.beta {
            Some(b) => b,
            None if t_max > 1 => logit(params.c(1, 0)) - logit(params.p(1, 0)),
            None => 0.0,
        };
        w.push(b);
    }
    let rows = if spec.psi_by_time { t_max.saturating_sub(1) } else { 1 };
    if r_max > 1 {
        for t in 0..rows {
            for r in 0..r_max {
                let row: Vec<f64> = (0..r_max).map(|s| params.psi(t, r, s)).collect();
                w.extend(mlogit(&row));
            }
        }
    }
    w.extend(mlogit(&params.alpha));
    let unseen = params.n_pop - n as f64;
    if unseen < 0.0 {
        return Err(Error::PopulationTooSmall {
            n_pop: params.n_pop,
            observed: n,
        });
    }
    w.push(unseen.ln());
    let back = apply_constraints(&w, spec, Meta { occasions: t_max, states: r_max, n })?;
    let consistent = back
        .p
        .iter()
        .zip(&params.p)
        .chain(back.c.iter().zip(&params.c))
        .chain(back.psi.iter().zip(&params.psi))
        .all(|(a, b)| (a - b).abs() < 1e-8);
    if !consistent {
        return Err(Error::InvalidParams(
            "parameters do not satisfy the requested constraints".into(),
        ));
    }
    Ok(w)
}
