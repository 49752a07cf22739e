//! Link functions and special-function helpers shared by the likelihoods.

/// Logs below this are treated as `-inf` rather than producing denormal noise.
pub const LOG_FLOOR: f64 = 1e-300;

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `ln x` with the floor guard: anything below [`LOG_FLOOR`] maps to `-inf`.
#[inline]
pub fn guarded_ln(x: f64) -> f64 {
    if x < LOG_FLOOR {
        f64::NEG_INFINITY
    } else {
        x.ln()
    }
}

/// `count * ln(prob)`, contributing exactly zero when `count == 0` whatever `prob` is.
#[inline]
pub fn count_ln(count: f64, prob: f64) -> f64 {
    if count == 0.0 {
        0.0
    } else {
        count * guarded_ln(prob)
    }
}

/// Multinomial logit with the last category as reference.
///
/// `working` has `k - 1` entries; the returned probabilities have `k` entries.
pub fn mlogit_inverse(working: &[f64]) -> Vec<f64> {
    let max = working.iter().copied().fold(0.0_f64, f64::max);
    let mut out: Vec<f64> = working.iter().map(|w| (w - max).exp()).collect();
    out.push((-max).exp());
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|q| *q /= total);
    out
}

/// Inverse of [`mlogit_inverse`]: `ln(q_i / q_last)` for all but the last category.
pub fn mlogit(probs: &[f64]) -> Vec<f64> {
    let last = probs[probs.len() - 1];
    probs[..probs.len() - 1]
        .iter()
        .map(|q| (q / last).ln())
        .collect()
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// `ln[N! / (N - n)!]` for continuous `N >= n`.
pub fn ln_falling_factorial(n_pop: f64, observed: usize) -> f64 {
    let unseen = n_pop - observed as f64;
    if unseen == 0.0 {
        // exact for integer N; avoids cancellation between two large lgammas
        (1..=observed).map(|k| (k as f64).ln()).sum()
    } else {
        ln_gamma(n_pop + 1.0) - ln_gamma(unseen + 1.0)
    }
}

/// `ln B(a, b)` via log-gamma differences.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `B(a + j, b + T - j) / B(a, b)` for integer `j <= T`.
///
/// Written as a ratio of rising factorials, which stays exact for very large
/// shapes where the log-gamma difference loses digits to cancellation.
pub fn beta_binomial_history_prob(a: f64, b: f64, captures: usize, occasions: usize) -> f64 {
    debug_assert!(captures <= occasions);
    let mut num = 1.0;
    let mut den = 1.0;
    for i in 0..occasions {
        num *= if i < captures {
            a + i as f64
        } else {
            b + (i - captures) as f64
        };
        den *= a + b + i as f64;
        if den > 1e200 {
            num *= 1e-200;
            den *= 1e-200;
        }
    }
    num / den
}

/// Upper tail of the chi-squared distribution.
pub fn chi_squared_sf(x: f64, df: usize) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    if x.is_infinite() {
        return 0.0;
    }
    ChiSquared::new(df as f64)
        .map(|d| d.sf(x))
        .unwrap_or(f64::NAN)
}
