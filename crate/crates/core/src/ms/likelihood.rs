use super::{MsParams, PartialHistoryProbs};
use crate::error::{Error, Result};
use crate::special::{count_ln, ln_falling_factorial};
use crate::stats::SufficientStats;

/// Sum over observed individuals of `ln Pr(history)`, grouped through the
/// sufficient statistics.
pub fn observed_log_likelihood(stats: &SufficientStats, probs: &PartialHistoryProbs) -> f64 {
    let r_max = stats.states;
    let mut ll = 0.0;
    for (i, &z) in stats.first.iter().enumerate() {
        ll += count_ln(z as f64, probs.zeta[i]);
    }
    for (i, &v) in stats.last.iter().enumerate() {
        ll += count_ln(v as f64, probs.chi[i]);
    }
    for (k, &n) in &stats.pairs {
        ll += count_ln(n as f64, probs.recapture.get(k.t1, k.t2, k.from, k.to));
    }
    debug_assert_eq!(probs.zeta.len(), stats.occasions * r_max);
    ll
}

/// Full (unconditional) log-likelihood including the population-size term.
pub fn log_likelihood(stats: &SufficientStats, params: &MsParams) -> Result<f64> {
    if stats.occasions != params.occasions || stats.states != params.states {
        return Err(Error::Dimension(format!(
            "data have T={}, R={} but parameters have T={}, R={}",
            stats.occasions, stats.states, params.occasions, params.states
        )));
    }
    if !(params.n_pop >= stats.n as f64) {
        return Err(Error::PopulationTooSmall {
            n_pop: params.n_pop,
            observed: stats.n,
        });
    }
    let probs = PartialHistoryProbs::new(params);
    Ok(population_term(params.n_pop, stats.n, probs.rho) + observed_log_likelihood(stats, &probs))
}

/// `ln[N!/(N-n)!] + (N - n) ln rho`.
pub(crate) fn population_term(n_pop: f64, observed: usize, rho: f64) -> f64 {
    let unseen = n_pop - observed as f64;
    ln_falling_factorial(n_pop, observed) + count_ln(unseen, rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_dataset;

    #[test]
    fn one_individual_two_captures() {
        let d = parse_dataset("1 1", 1).unwrap();
        let s = SufficientStats::from_dataset(&d);
        let m = MsParams::homogeneous(2, &[0.5], &[vec![1.0]], &[1.0], 1.0);
        let ll = log_likelihood(&s, &m).unwrap();
        assert!((ll - 0.25f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn rejects_small_population_and_mismatch() {
        let d = parse_dataset("1 1\n1 0", 1).unwrap();
        let s = SufficientStats::from_dataset(&d);
        let m = MsParams::homogeneous(2, &[0.5], &[vec![1.0]], &[1.0], 1.5);
        assert!(matches!(log_likelihood(&s, &m), Err(Error::PopulationTooSmall { .. })));
        let m3 = MsParams::homogeneous(3, &[0.5], &[vec![1.0]], &[1.0], 5.0);
        assert!(matches!(log_likelihood(&s, &m3), Err(Error::Dimension(_))));
    }

    #[test]
    fn impossible_observed_event_gives_neg_inf_not_nan() {
        // state 2 is unreachable and undetectable, yet observed
        let d = parse_dataset("1 2", 2).unwrap();
        let s = SufficientStats::from_dataset(&d);
        let m = MsParams::homogeneous(2, &[0.5, 0.5], &[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 0.0], 1.0);
        let ll = log_likelihood(&s, &m).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
    }

    #[test]
    fn zero_count_cells_with_zero_probability_are_harmless() {
        let d = parse_dataset("1 1", 2).unwrap();
        let s = SufficientStats::from_dataset(&d);
        let m = MsParams::homogeneous(2, &[0.5, 0.5], &[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 0.0], 1.0);
        let ll = log_likelihood(&s, &m).unwrap();
        assert!(ll.is_finite());
        assert!((ll - 0.25f64.ln()).abs() < 1e-14);
    }
}
