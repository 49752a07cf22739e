//! Single-state closed-population models that ignore state labels.
//!
//! All likelihoods use the per-history convention: the probability of each
//! specific observed history, with no binomial coefficients for the number of
//! histories sharing a capture count. That keeps them on the same footing as
//! the multi-state likelihood for AIC comparisons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ms::population_term;
use crate::model::{Reported, Scale};
use crate::special::{beta_binomial_history_prob, count_ln, logistic, mlogit_inverse};
use crate::stats::SufficientStats;

/// Which single-state model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SsKind {
    M0,
    Mt,
    Mb,
    /// Finite mixture of `k` binomial components.
    MhFinite(usize),
    /// Beta-distributed capture probabilities.
    MhBeta,
    /// Point mass plus beta component.
    MhPointBeta,
}

/// Natural-scale parameters of a single-state model, excluding `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SsParams {
    M0 { p: f64 },
    Mt { p: Vec<f64> },
    Mb { p: f64, c: f64 },
    MhFinite { weights: Vec<f64>, probs: Vec<f64> },
    MhBeta { a: f64, b: f64 },
    MhPointBeta { w: f64, p0: f64, a: f64, b: f64 },
}

fn check_n(stats: &SufficientStats, n_pop: f64) -> Result<()> {
    if n_pop >= stats.n as f64 {
        Ok(())
    } else {
        Err(Error::PopulationTooSmall {
            n_pop,
            observed: stats.n,
        })
    }
}

/// `sum_j f_j ln m_j` where `m_j` is the probability of one specific history with `j` captures.
fn schnabel_observed(stats: &SufficientStats, history_prob: impl Fn(usize) -> f64) -> f64 {
    stats
        .single
        .f
        .iter()
        .enumerate()
        .map(|(i, &fj)| count_ln(fj as f64, history_prob(i + 1)))
        .sum()
}

impl SsParams {
    /// Probability of one specific history with `j` captures, for the
    /// heterogeneity models whose histories are exchangeable given `j`.
    pub fn history_prob_by_captures(&self, j: usize, occasions: usize) -> Option<f64> {
        let binom = |p: f64| p.powi(j as i32) * (1.0 - p).powi((occasions - j) as i32);
        match self {
            SsParams::M0 { p } => Some(binom(*p)),
            SsParams::MhFinite { weights, probs } => {
                Some(weights.iter().zip(probs).map(|(w, &p)| w * binom(p)).sum())
            }
            SsParams::MhBeta { a, b } => Some(beta_binomial_history_prob(*a, *b, j, occasions)),
            SsParams::MhPointBeta { w, p0, a, b } => Some(
                w * binom(*p0) + (1.0 - w) * beta_binomial_history_prob(*a, *b, j, occasions),
            ),
            SsParams::Mt { .. } | SsParams::Mb { .. } => None,
        }
    }

    /// `(sum_i ln Pr(history_i), rho)`.
    pub fn components(&self, stats: &SufficientStats) -> (f64, f64) {
        let t_max = stats.occasions;
        let s = &stats.single;
        let n = s.n as f64;
        match self {
            SsParams::M0 { p } => {
                let f = s.f_total as f64;
                let obs = count_ln(f, *p) + count_ln(n * t_max as f64 - f, 1.0 - p);
                (obs, (1.0 - p).powi(t_max as i32))
            }
            SsParams::Mt { p } => {
                let mut obs = 0.0;
                let mut rho = 1.0;
                for (t, &pt) in p.iter().enumerate() {
                    let nt = s.n_t[t] as f64;
                    obs += count_ln(nt, pt) + count_ln(n - nt, 1.0 - pt);
                    rho *= 1.0 - pt;
                }
                (obs, rho)
            }
            SsParams::Mb { p, c } => {
                let (y, f) = (s.y as f64, s.f_total as f64);
                let recaps = f - n;
                let misses_after = n * t_max as f64 - n - y - recaps;
                let obs = count_ln(n, *p)
                    + count_ln(y, 1.0 - p)
                    + count_ln(recaps, *c)
                    + count_ln(misses_after, 1.0 - c);
                (obs, (1.0 - p).powi(t_max as i32))
            }
            _ => {
                let m = |j| self.history_prob_by_captures(j, t_max).unwrap_or(f64::NAN);
                (schnabel_observed(stats, m), m(0))
            }
        }
    }

    fn validate(&self, occasions: usize) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        let ok = match self {
            SsParams::M0 { p } => unit(*p),
            SsParams::Mt { p } => {
                if p.len() != occasions {
                    return Err(Error::Dimension(format!(
                        "Mt needs {occasions} capture probabilities, got {}",
                        p.len()
                    )));
                }
                p.iter().all(|&x| unit(x))
            }
            SsParams::Mb { p, c } => unit(*p) && unit(*c),
            SsParams::MhFinite { weights, probs } => {
                if weights.is_empty() || weights.len() != probs.len() {
                    return Err(Error::InvalidParams(
                        "mixture needs k >= 1 components with one weight each".into(),
                    ));
                }
                if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 || !weights.iter().all(|&w| unit(w)) {
                    return Err(Error::InvalidParams("mixture weights must lie on the simplex".into()));
                }
                probs.iter().all(|&x| unit(x))
            }
            SsParams::MhBeta { a, b } => *a > 0.0 && *b > 0.0,
            SsParams::MhPointBeta { w, p0, a, b } => unit(*w) && unit(*p0) && *a > 0.0 && *b > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("{self:?} out of range")))
        }
    }

    pub fn log_likelihood(&self, stats: &SufficientStats, n_pop: f64) -> Result<f64> {
        check_n(stats, n_pop)?;
        self.validate(stats.occasions)?;
        let (obs, rho) = self.components(stats);
        Ok(population_term(n_pop, stats.n, rho) + obs)
    }
}

pub fn loglik_m0(stats: &SufficientStats, p: f64, n_pop: f64) -> Result<f64> {
    SsParams::M0 { p }.log_likelihood(stats, n_pop)
}

pub fn loglik_mt(stats: &SufficientStats, p: &[f64], n_pop: f64) -> Result<f64> {
    SsParams::Mt { p: p.to_vec() }.log_likelihood(stats, n_pop)
}

pub fn loglik_mb(stats: &SufficientStats, p: f64, c: f64, n_pop: f64) -> Result<f64> {
    SsParams::Mb { p, c }.log_likelihood(stats, n_pop)
}

pub fn loglik_mh_finite(stats: &SufficientStats, weights: &[f64], probs: &[f64], n_pop: f64) -> Result<f64> {
    SsParams::MhFinite {
        weights: weights.to_vec(),
        probs: probs.to_vec(),
    }
    .log_likelihood(stats, n_pop)
}

pub fn loglik_mh_beta(stats: &SufficientStats, a: f64, b: f64, n_pop: f64) -> Result<f64> {
    SsParams::MhBeta { a, b }.log_likelihood(stats, n_pop)
}

pub fn loglik_mh_pointbeta(stats: &SufficientStats, w: f64, p0: f64, a: f64, b: f64, n_pop: f64) -> Result<f64> {
    SsParams::MhPointBeta { w, p0, a, b }.log_likelihood(stats, n_pop)
}

/// Weight or component gap below which a finite mixture is treated as collapsed.
pub const COLLAPSE_TOL: f64 = 1e-4;

impl SsKind {
    /// Working parameters other than `nu`.
    pub fn detection_count(&self, occasions: usize) -> usize {
        match self {
            SsKind::M0 => 1,
            SsKind::Mt => occasions,
            SsKind::Mb => 2,
            SsKind::MhFinite(k) => 2 * k - 1,
            SsKind::MhBeta => 2,
            SsKind::MhPointBeta => 4,
        }
    }

    /// Working vector (without `nu`) to natural parameters.
    ///
    /// Mixture weights use a multinomial logit with the last component as
    /// reference; component probabilities are ordered through cumulative
    /// increments `logit p_g = logit p_{g-1} + exp(theta_g)`. Beta shapes are
    /// on the log scale.
    pub fn params(&self, theta: &[f64]) -> SsParams {
        match self {
            SsKind::M0 => SsParams::M0 { p: logistic(theta[0]) },
            SsKind::Mt => SsParams::Mt {
                p: theta.iter().map(|&x| logistic(x)).collect(),
            },
            SsKind::Mb => SsParams::Mb {
                p: logistic(theta[0]),
                c: logistic(theta[1]),
            },
            SsKind::MhFinite(k) => {
                let weights = mlogit_inverse(&theta[..k - 1]);
                let mut probs = Vec::with_capacity(*k);
                let mut level = theta[k - 1];
                probs.push(logistic(level));
                for g in 1..*k {
                    level += theta[k - 1 + g].exp();
                    probs.push(logistic(level));
                }
                SsParams::MhFinite { weights, probs }
            }
            SsKind::MhBeta => SsParams::MhBeta {
                a: theta[0].exp(),
                b: theta[1].exp(),
            },
            SsKind::MhPointBeta => SsParams::MhPointBeta {
                w: logistic(theta[0]),
                p0: logistic(theta[1]),
                a: theta[2].exp(),
                b: theta[3].exp(),
            },
        }
    }

    pub(crate) fn report(&self, theta: &[f64]) -> Vec<Reported> {
        match self.params(theta) {
            SsParams::M0 { p } => vec![Reported::prob("p", p)],
            SsParams::Mt { p } => p
                .iter()
                .enumerate()
                .map(|(t, &x)| Reported::prob(format!("p_{}", t + 1), x))
                .collect(),
            SsParams::Mb { p, c } => vec![Reported::prob("p", p), Reported::prob("c", c)],
            SsParams::MhFinite { weights, probs } => {
                let k = probs.len();
                let mut out: Vec<Reported> = weights[..k - 1]
                    .iter()
                    .enumerate()
                    .map(|(g, &w)| Reported::prob(format!("w_{}", g + 1), w))
                    .collect();
                out.extend(
                    probs
                        .iter()
                        .enumerate()
                        .map(|(g, &p)| Reported::prob(format!("p_{}", g + 1), p)),
                );
                out
            }
            SsParams::MhBeta { a, b } => vec![
                Reported::new("a", a, Scale::Positive),
                Reported::new("b", b, Scale::Positive),
            ],
            SsParams::MhPointBeta { w, p0, a, b } => vec![
                Reported::prob("w", w),
                Reported::prob("p0", p0),
                Reported::new("a", a, Scale::Positive),
                Reported::new("b", b, Scale::Positive),
            ],
        }
    }

    /// Whether a finite mixture has effectively lost a component.
    pub fn collapsed(&self, theta: &[f64]) -> bool {
        match self.params(theta) {
            SsParams::MhFinite { weights, probs } => {
                weights.iter().any(|&w| w < COLLAPSE_TOL)
                    || probs.windows(2).any(|w| (w[1] - w[0]).abs() < COLLAPSE_TOL)
            }
            SsParams::MhPointBeta { w, .. } => !(COLLAPSE_TOL..=1.0 - COLLAPSE_TOL).contains(&w),
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_dataset;

    fn stats(text: &str) -> SufficientStats {
        SufficientStats::from_dataset(&parse_dataset(text, 1).unwrap())
    }

    #[test]
    fn m0_single_history() {
        let s = stats("1 1");
        assert!((loglik_m0(&s, 0.5, 1.0).unwrap() - 0.25f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn mt_hand_computed() {
        let s = stats("1 0\n0 1");
        let got = loglik_mt(&s, &[0.5, 0.5], 2.0).unwrap();
        let want = (0.25f64 * 0.25 * 2.0).ln();
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn mb_single_history() {
        let s = stats("0 1 1");
        let got = loglik_mb(&s, 0.5, 0.5, 1.0).unwrap();
        assert!((got - 0.125f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn collapses() {
        let s = stats("1 0 1 0\n0 1 1 1\n1 0 0 0\n0 0 0 1");
        let m0 = loglik_m0(&s, 0.37, 6.5).unwrap();
        assert!((loglik_mt(&s, &[0.37; 4], 6.5).unwrap() - m0).abs() < 1e-12);
        assert!((loglik_mb(&s, 0.37, 0.37, 6.5).unwrap() - m0).abs() < 1e-12);
        assert!((loglik_mh_finite(&s, &[1.0], &[0.37], 6.5).unwrap() - m0).abs() < 1e-12);
        assert!((loglik_mh_finite(&s, &[1.0, 0.0], &[0.37, 0.9], 6.5).unwrap() - m0).abs() < 1e-12);
        assert!((loglik_mh_pointbeta(&s, 1.0, 0.37, 2.0, 3.0, 6.5).unwrap() - m0).abs() < 1e-12);
        let be = loglik_mh_beta(&s, 2.0, 3.0, 6.5).unwrap();
        assert!((loglik_mh_pointbeta(&s, 0.0, 0.37, 2.0, 3.0, 6.5).unwrap() - be).abs() < 1e-12);
    }

    #[test]
    fn beta_concentration_limit() {
        let s = stats("1 0 1 0\n0 1 1 1\n1 0 0 0\n0 0 0 1");
        let m0 = loglik_m0(&s, 0.5, 6.5).unwrap();
        let be = loglik_mh_beta(&s, 1e6, 1e6, 6.5).unwrap();
        assert!(((be - m0) / m0).abs() < 1e-6);
    }

    #[test]
    fn mixture_errors() {
        let s = stats("1 1");
        assert!(loglik_mh_finite(&s, &[], &[], 2.0).is_err());
        assert!(loglik_mh_finite(&s, &[0.6, 0.6], &[0.2, 0.3], 2.0).is_err());
        assert!(loglik_mh_beta(&s, -1.0, 1.0, 2.0).is_err());
        assert!(loglik_m0(&s, 0.5, 0.5).is_err());
        assert!(loglik_mt(&s, &[0.5], 2.0).is_err());
    }

    #[test]
    fn ordered_components_and_collapse_flag() {
        let kind = SsKind::MhFinite(3);
        let theta = [0.3, -0.2, -1.0, 0.5, -12.0];
        match kind.params(&theta) {
            SsParams::MhFinite { weights, probs } => {
                assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
                assert!(probs[0] < probs[1] && probs[1] < probs[2]);
            }
            _ => unreachable!(),
        }
        assert!(kind.collapsed(&theta));
        assert!(!kind.collapsed(&[0.3, -0.2, -1.0, 0.5, 0.5]));
    }
}
