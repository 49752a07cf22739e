//! Model specifications: the `M_{tbh}^R` notation and single-state competitors.
//!
//! Grammar: `M` followed by dependence letters from `{0, t, b, h}` and an
//! optional `^R` for the multi-state family (`M0^3`, `Mh^2`, `Mth^2`,
//! `Mtbh^2`). Without `^R` the single-state models are `M0`, `Mt`, `Mb`,
//! `Mh<k>` for a `k`-component binomial mixture, `Mhbe` for the beta model,
//! and `Mhb-be` for the point-mass plus beta mixture.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ms::{observed_log_likelihood, MsConstraints, MsParams, PartialHistoryProbs};
use crate::ss::{SsKind, SsParams};
use crate::stats::SufficientStats;

/// Transformed scale a reported quantity's interval is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Logit.
    Probability,
    /// Log.
    Positive,
    /// Identity.
    Real,
}

impl Scale {
    pub fn forward(self, x: f64) -> f64 {
        match self {
            Scale::Probability => crate::special::logit(x),
            Scale::Positive => x.ln(),
            Scale::Real => x,
        }
    }

    pub fn backward(self, g: f64) -> f64 {
        match self {
            Scale::Probability => crate::special::logistic(g),
            Scale::Positive => g.exp(),
            Scale::Real => g,
        }
    }

    /// `d natural / d transformed` at natural value `x`.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Scale::Probability => x * (1.0 - x),
            Scale::Positive => x,
            Scale::Real => 1.0,
        }
    }
}

/// A named natural-scale quantity derived from the working vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Reported {
    pub name: String,
    pub value: f64,
    pub scale: Scale,
}

impl Reported {
    pub fn new(name: impl Into<String>, value: f64, scale: Scale) -> Self {
        Self {
            name: name.into(),
            value,
            scale,
        }
    }

    pub fn prob(name: impl Into<String>, value: f64) -> Self {
        Self::new(name, value, Scale::Probability)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelSpec {
    MultiState {
        states: usize,
        constraints: MsConstraints,
    },
    SingleState(SsKind),
}

pub fn parse_model_spec(text: &str) -> Result<ModelSpec> {
    let err = |reason: &str| Error::ModelSpec {
        spec: text.to_string(),
        reason: reason.to_string(),
    };
    let body = text.trim().strip_prefix('M').ok_or_else(|| err("must start with 'M'"))?;
    let (letters, states) = match body.split_once('^') {
        Some((l, r)) => {
            let states: usize = r.parse().map_err(|_| err("R must be a positive integer"))?;
            if states < 1 {
                return Err(err("R must be at least 1"));
            }
            (l, Some(states))
        }
        None => (body, None),
    };

    if let Some(states) = states {
        if letters.chars().any(|c| c.is_ascii_digit() && c != '0') || letters.contains("be") {
            return Err(err("mixture arities are single-state only and cannot take ^R"));
        }
        let constraints = dependence_flags(letters).ok_or_else(|| err("unknown dependence letters"))?;
        return Ok(ModelSpec::MultiState {
            states,
            constraints,
        });
    }

    let kind = match letters {
        "0" => SsKind::M0,
        "t" => SsKind::Mt,
        "b" => SsKind::Mb,
        "hbe" => SsKind::MhBeta,
        "hb-be" => SsKind::MhPointBeta,
        "h" => return Err(err("single-state heterogeneity needs an arity: Mh2, Mh3, Mhbe or Mhb-be")),
        l if l.starts_with('h') && l.len() > 1 && l[1..].chars().all(|c| c.is_ascii_digit()) => {
            let k: usize = l[1..].parse().map_err(|_| err("bad mixture arity"))?;
            if k == 0 {
                return Err(err("mixture needs at least one component"));
            }
            SsKind::MhFinite(k)
        }
        l if dependence_flags(l).is_some() => {
            return Err(err("this single-state combination is not fitted; use the ^R form"))
        }
        _ => return Err(err("unknown dependence letters")),
    };
    Ok(ModelSpec::SingleState(kind))
}

fn dependence_flags(letters: &str) -> Option<MsConstraints> {
    if letters == "0" {
        return Some(MsConstraints::default());
    }
    if letters.is_empty() {
        return None;
    }
    let mut c = MsConstraints::default();
    for ch in letters.chars() {
        let slot = match ch {
            't' => &mut c.time,
            'b' => &mut c.behaviour,
            'h' => &mut c.state,
            _ => return None,
        };
        if *slot {
            return None;
        }
        *slot = true;
    }
    c.additive = c.time && c.state;
    Some(c)
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_model_spec(s)
    }
}

impl TryFrom<String> for ModelSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        parse_model_spec(&s)
    }
}

impl From<ModelSpec> for String {
    fn from(m: ModelSpec) -> String {
        m.to_string()
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::MultiState { states, constraints } => {
                let mut letters = String::new();
                if constraints.time {
                    letters.push('t');
                }
                if constraints.behaviour {
                    letters.push('b');
                }
                if constraints.state {
                    letters.push('h');
                }
                if letters.is_empty() {
                    letters.push('0');
                }
                write!(f, "M{letters}^{states}")
            }
            ModelSpec::SingleState(kind) => match kind {
                SsKind::M0 => f.write_str("M0"),
                SsKind::Mt => f.write_str("Mt"),
                SsKind::Mb => f.write_str("Mb"),
                SsKind::MhFinite(k) => write!(f, "Mh{k}"),
                SsKind::MhBeta => f.write_str("Mhbe"),
                SsKind::MhPointBeta => f.write_str("Mhb-be"),
            },
        }
    }
}

impl ModelSpec {
    pub fn is_multi_state(&self) -> bool {
        matches!(self, ModelSpec::MultiState { .. })
    }

    /// Working parameters other than `nu = ln(N - n)`.
    pub fn detection_count(&self, occasions: usize) -> usize {
        match self {
            ModelSpec::MultiState { states, constraints } => {
                constraints.detection_and_movement_count(occasions, *states)
            }
            ModelSpec::SingleState(kind) => kind.detection_count(occasions),
        }
    }

    pub fn check_data(&self, stats: &SufficientStats) -> Result<()> {
        if let ModelSpec::MultiState { states, .. } = self {
            if *states != stats.states {
                return Err(Error::Dimension(format!(
                    "model {self} has R={states} but the data have R={}",
                    stats.states
                )));
            }
        }
        Ok(())
    }

    /// Multi-state parameters (or their one-state equivalent for M0, Mt and Mb).
    pub fn markov_params(&self, theta: &[f64], occasions: usize, n_pop: f64) -> Option<MsParams> {
        match self {
            ModelSpec::MultiState { states, constraints } => {
                Some(constraints.build(theta, occasions, *states, n_pop))
            }
            ModelSpec::SingleState(kind) => {
                let (p, c): (Vec<f64>, Vec<f64>) = match kind.params(theta) {
                    SsParams::M0 { p } => (vec![p; occasions], vec![p; occasions]),
                    SsParams::Mt { p } => (p.clone(), p),
                    SsParams::Mb { p, c } => (vec![p; occasions], vec![c; occasions]),
                    _ => return None,
                };
                Some(MsParams {
                    occasions,
                    states: 1,
                    p,
                    c,
                    psi: vec![1.0; occasions.saturating_sub(1)],
                    alpha: vec![1.0],
                    beta: None,
                    n_pop,
                })
            }
        }
    }

    pub fn ss_params(&self, theta: &[f64]) -> Option<SsParams> {
        match self {
            ModelSpec::SingleState(kind) => Some(kind.params(theta)),
            ModelSpec::MultiState { .. } => None,
        }
    }

    /// `(sum_i ln Pr(history_i), rho)` at the working vector `theta` (no `nu`).
    pub fn components(&self, theta: &[f64], stats: &SufficientStats) -> (f64, f64) {
        match self {
            ModelSpec::MultiState { .. } => {
                let params = self
                    .markov_params(theta, stats.occasions, f64::NAN)
                    .expect("multi-state specs always have Markov parameters");
                let probs = PartialHistoryProbs::new(&params);
                (observed_log_likelihood(stats, &probs), probs.rho)
            }
            ModelSpec::SingleState(kind) => kind.params(theta).components(stats),
        }
    }

    /// Reported detection and movement quantities (no `N`).
    pub fn report(&self, theta: &[f64], occasions: usize) -> Vec<Reported> {
        match self {
            ModelSpec::MultiState { states, constraints } => constraints.report(theta, occasions, *states),
            ModelSpec::SingleState(kind) => kind.report(theta),
        }
    }

    pub fn collapsed(&self, theta: &[f64]) -> bool {
        match self {
            ModelSpec::SingleState(kind) => kind.collapsed(theta),
            ModelSpec::MultiState { .. } => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_forms() {
        for s in ["M0", "Mt", "Mb", "Mh2", "Mh3", "Mhbe", "Mhb-be", "Mh^2", "Mt^2", "Mth^2", "M0^3", "Mtbh^2"] {
            let m = parse_model_spec(s).unwrap();
            assert_eq!(m.to_string(), s);
        }
    }

    #[test]
    fn mh2_is_state_dependent() {
        match parse_model_spec("Mh^2").unwrap() {
            ModelSpec::MultiState { states, constraints } => {
                assert_eq!(states, 2);
                assert!(constraints.state && !constraints.time && !constraints.behaviour);
            }
            _ => panic!(),
        }
        match parse_model_spec("Mth^2").unwrap() {
            ModelSpec::MultiState { constraints, .. } => {
                assert!(constraints.time && constraints.state && constraints.additive);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn rejects_bad_specs() {
        for s in ["Mx", "Mh2^2", "Mh^0", "Mhbe^2", "Mh", "Mtb", "M", "h^2", "Mtt^2", "Mh0"] {
            assert!(parse_model_spec(s).is_err(), "{s} should fail");
        }
    }

    #[test]
    fn serde_uses_the_notation() {
        let m = parse_model_spec("Mth^2").unwrap();
        assert_eq!(serde_json::to_string(&m).unwrap(), "\"Mth^2\"");
        let back: ModelSpec = serde_json::from_str("\"Mhb-be\"").unwrap();
        assert_eq!(back, ModelSpec::SingleState(SsKind::MhPointBeta));
    }
}
