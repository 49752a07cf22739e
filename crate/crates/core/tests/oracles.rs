mod common;

use closedpop::data::Dataset;
use closedpop::estimation::{fit_unconditional, FitOptions};
use closedpop::model::parse_model_spec;
use closedpop::ms::{
    chi_probs, first_capture_probs, never_observed_prob, q_marked, q_unmarked, recapture_probs, MsParams,
};
use closedpop::sim::{replicate_rng, simulate_dataset, simulate_from_params, Scenario};
use closedpop::special::{chi_squared_sf, logistic};
use closedpop::ss::{loglik_m0, loglik_mb, loglik_mh_beta, loglik_mh_finite, loglik_mh_pointbeta, loglik_mt};
use closedpop::stats::{PairKey, SufficientStats};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lo2(t: usize) -> MsParams {
    MsParams::homogeneous(t, &[0.15, 0.4], &[vec![0.7, 0.3], vec![0.2, 0.8]], &[0.4, 0.6], 100.0)
}

fn hi2(t: usize) -> MsParams {
    MsParams::homogeneous(t, &[0.15, 0.4], &[vec![0.1, 0.9], vec![0.6, 0.4]], &[0.4, 0.6], 100.0)
}

#[test]
fn recount_matches_naive_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let d = common::random_dataset(&mut rng, 6, 2, 50);
        let s = SufficientStats::from_dataset(&d);
        let (t_max, r_max) = (6, 2);
        let mut z = vec![0u64; t_max * r_max];
        let mut v = vec![0u64; (t_max - 1) * r_max];
        let mut pairs = std::collections::BTreeMap::new();
        for h in d.histories() {
            let caps: Vec<(usize, usize)> = h
                .entries()
                .iter()
                .enumerate()
                .filter(|(_, &x)| x > 0)
                .map(|(t, &x)| (t, x as usize - 1))
                .collect();
            z[caps[0].0 * r_max + caps[0].1] += 1;
            for w in caps.windows(2) {
                let key = PairKey { t1: w[0].0, t2: w[1].0, from: w[0].1, to: w[1].1 };
                *pairs.entry(key).or_insert(0u64) += 1;
            }
            let last = caps[caps.len() - 1];
            if last.0 + 1 < t_max {
                v[last.0 * r_max + last.1] += 1;
            }
        }
        assert_eq!(s.first, z);
        assert_eq!(s.last, v);
        assert_eq!(s.pairs, pairs);
    }
}

#[test]
fn transition_arrays_match_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for params in [lo2(4), hi2(6), common::random_params(&mut rng, 5, 2, 10.0), common::random_params(&mut rng, 4, 3, 10.0)] {
        let qp = q_unmarked(&params);
        let qc = q_marked(&params);
        let o = recapture_probs(&params);
        let k = params.states;
        for t1 in 0..params.occasions {
            for t2 in t1 + 1..params.occasions {
                for r in 0..k {
                    for s in 0..k {
                        let oracle = common::enum_recapture(&params, t1, t2, r, s);
                        assert!((o.get(t1, t2, r, s) - oracle).abs() < 1e-13);
                        let c = params.c[t2 * k + s];
                        assert!((qc.get(t1, t2, r, s) * c - oracle).abs() < 1e-13);
                        if t2 == t1 + 1 {
                            assert_eq!(qp.get(t1, t2, r, s), params.psi[(t1 * k + r) * k + s]);
                        }
                    }
                }
            }
        }
        let zeta = first_capture_probs(&params);
        let chi = chi_probs(&params);
        for t in 0..params.occasions {
            for r in 0..k {
                assert!((zeta[t * k + r] - common::enum_zeta(&params, t, r)).abs() < 1e-13);
                assert!((chi[t * k + r] - common::enum_chi(&params, t, r)).abs() < 1e-13);
            }
        }
        assert!((never_observed_prob(&params) - common::enum_rho(&params)).abs() < 1e-13);
    }
}

#[test]
fn low_mobility_never_observed_golden_value() {
    let rho = never_observed_prob(&lo2(6));
    assert!((rho - common::enum_rho(&lo2(6))).abs() < 1e-15);
    assert!((rho - 0.133_042_038_085_937_48).abs() < 1e-15);
}

/// Per-history product of Bernoulli probabilities mixed over a capture-probability law.
fn mixture_oracle(data: &Dataset, n_pop: f64, law: &dyn Fn(&[bool]) -> f64) -> f64 {
    let t = data.occasions();
    let n = data.n() as f64;
    let zero = law(&vec![false; t]);
    let mut ll = common::ln_gamma(n_pop + 1.0) - common::ln_gamma(n_pop - n + 1.0) + (n_pop - n) * zero.ln();
    for h in data.histories() {
        let caught: Vec<bool> = h.entries().iter().map(|&x| x > 0).collect();
        ll += law(&caught).ln();
    }
    ll
}

fn bern(caught: &[bool], p: f64) -> f64 {
    caught.iter().map(|&c| if c { p } else { 1.0 - p }).product()
}

#[test]
fn single_state_likelihoods_match_per_history_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let t = rng.random_range(2..=6);
        let n = rng.random_range(1..=40);
        let d = common::random_dataset(&mut rng, t, 1, n);
        let s = SufficientStats::from_dataset(&d);
        let n_pop = n as f64 + rng.random_range(0.0..30.0);
        let p: f64 = rng.random_range(0.05..0.95);
        let c: f64 = rng.random_range(0.05..0.95);
        let pt: Vec<f64> = (0..t).map(|_| rng.random_range(0.05..0.95)).collect();
        let (w, p2) = (rng.random_range(0.05..0.95), rng.random_range(0.05..0.95));
        // half-integer shapes keep the quadrature integrand smooth
        let (a, b) = (rng.random_range(1..=10) as f64 / 2.0, rng.random_range(1..=10) as f64 / 2.0);
        let close = |x: f64, y: f64| assert!(common::rel_close(x, y, 1e-10), "{x} vs {y} (a={a}, b={b})");

        close(loglik_m0(&s, p, n_pop).unwrap(), mixture_oracle(&d, n_pop, &|h| bern(h, p)));
        close(
            loglik_mt(&s, &pt, n_pop).unwrap(),
            mixture_oracle(&d, n_pop, &|h| h.iter().zip(&pt).map(|(&x, &q)| if x { q } else { 1.0 - q }).product()),
        );
        close(
            loglik_mb(&s, p, c, n_pop).unwrap(),
            mixture_oracle(&d, n_pop, &|h| {
                let mut seen = false;
                let mut pr = 1.0;
                for &x in h {
                    let q = if seen { c } else { p };
                    pr *= if x { q } else { 1.0 - q };
                    seen |= x;
                }
                pr
            }),
        );
        close(
            loglik_mh_finite(&s, &[w, 1.0 - w], &[p, p2], n_pop).unwrap(),
            mixture_oracle(&d, n_pop, &|h| w * bern(h, p) + (1.0 - w) * bern(h, p2)),
        );
        let beta = |h: &[bool]| {
            let j = h.iter().filter(|&&x| x).count();
            common::beta_binomial_quadrature(a, b, j, h.len())
        };
        close(loglik_mh_beta(&s, a, b, n_pop).unwrap(), mixture_oracle(&d, n_pop, &beta));
        close(
            loglik_mh_pointbeta(&s, w, p, a, b, n_pop).unwrap(),
            mixture_oracle(&d, n_pop, &|h| w * bern(h, p) + (1.0 - w) * beta(h)),
        );
    }
}

#[test]
fn beta_limit_approaches_m0() {
    let d = closedpop::data::parse_dataset("1 0 1\n0 1 1\n1 0 0\n0 0 1", 1).unwrap();
    let s = SufficientStats::from_dataset(&d);
    let p = 0.3;
    let big = 1e6;
    let beta = loglik_mh_beta(&s, p * big, (1.0 - p) * big, 7.0).unwrap();
    let m0 = loglik_m0(&s, p, 7.0).unwrap();
    assert!(common::rel_close(beta, m0, 1e-6));
}

#[test]
fn m0_fit_matches_grid_search() {
    let d = closedpop::data::parse_dataset("1 0 1 0\n0 1 1 0\n1 0 0 0\n0 0 1 1\n1 1 0 0\n0 1 0 0\n0 0 0 1\n1 0 0 1", 1).unwrap();
    let s = SufficientStats::from_dataset(&d);
    let fit = fit_unconditional(&s, &parse_model_spec("M0").unwrap(), &FitOptions::default()).unwrap();
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..=400 {
        let p = 0.05 + 0.9 * i as f64 / 400.0;
        for k in 0..=400 {
            let nu = -3.0 + 7.0 * k as f64 / 400.0;
            let n_pop = 8.0 + nu.exp();
            let ll = loglik_m0(&s, p, n_pop).unwrap();
            if ll > best.0 {
                best = (ll, p, n_pop);
            }
        }
    }
    let p_hat = fit.param("p").unwrap().estimate;
    assert!((p_hat - best.1).abs() <= 0.9 / 400.0 * 2.0, "{p_hat} vs {}", best.1);
    let nu_hat = (fit.n_hat - 8.0).ln();
    assert!((nu_hat - (best.2 - 8.0).ln()).abs() <= 7.0 / 400.0 * 2.0);
    assert!(fit.log_lik >= best.0 - 1e-9);
}

#[test]
fn m0_standard_error_matches_binomial_information() {
    let mut scen = Scenario::preset("lo2").unwrap();
    scen.p = vec![0.3, 0.3];
    scen.n_pop = 400;
    let d = simulate_dataset(&scen, &mut replicate_rng(5, 0)).unwrap();
    let s = SufficientStats::from_dataset(&d);
    let fit = fit_unconditional(&s, &parse_model_spec("M0").unwrap(), &FitOptions::default()).unwrap();
    let p = fit.param("p").unwrap();
    let (ph, nh, t) = (p.estimate, fit.n_hat, 6.0);
    let (n, f) = (s.n as f64, s.single.f_total as f64);

    // known N: binomial information N T / (p (1 - p))
    let known = (ph * (1.0 - ph) / (nh * t)).sqrt();
    // N estimated too: invert the analytic 2x2 information in (p, N)
    let i_pp = f / (ph * ph) + (nh * t - f) / (1.0 - ph).powi(2);
    let i_pn = t / (1.0 - ph);
    let i_nn: f64 = (0..s.n).map(|i| 1.0 / (nh - n + 1.0 + i as f64).powi(2)).sum();
    let joint = (i_nn / (i_pp * i_nn - i_pn * i_pn)).sqrt();

    let se = p.se.unwrap();
    assert!((se / joint - 1.0).abs() < 0.01, "se {se} vs {joint}");
    assert!(se >= known, "estimating N cannot sharpen p: {se} vs {known}");
    let [lo, hi] = p.ci.unwrap();
    assert!(0.0 < lo && lo < p.estimate && p.estimate < hi && hi < 1.0);
}

#[test]
fn m0_standard_error_with_rare_misses_is_close_to_binomial() {
    // almost everyone is caught, so N is nearly known
    let mut scen = Scenario::preset("lo2").unwrap();
    scen.p = vec![0.6, 0.6];
    scen.n_pop = 400;
    let d = simulate_dataset(&scen, &mut replicate_rng(6, 0)).unwrap();
    let s = SufficientStats::from_dataset(&d);
    let fit = fit_unconditional(&s, &parse_model_spec("M0").unwrap(), &FitOptions::default()).unwrap();
    let p = fit.param("p").unwrap();
    let known = (p.estimate * (1.0 - p.estimate) / (fit.n_hat * 6.0)).sqrt();
    assert!((p.se.unwrap() / known - 1.0).abs() < 0.15);
}

#[test]
fn mean_observed_count_matches_capture_probability() {
    let scen = Scenario::preset("lo2").unwrap();
    let expected = 100.0 * (1.0 - never_observed_prob(&lo2(6)));
    let counts: Vec<f64> = (0..500)
        .map(|k| simulate_dataset(&scen, &mut replicate_rng(9, k)).unwrap().n() as f64)
        .collect();
    let mean = counts.iter().sum::<f64>() / 500.0;
    let sd = (counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / 499.0).sqrt();
    assert!((mean - expected).abs() <= 3.0 * sd / 500f64.sqrt(), "{mean} vs {expected}");
}

#[test]
fn first_capture_frequencies_converge() {
    let mut params = hi2(6);
    params.n_pop = 10_000.0;
    let d = simulate_from_params(&params, &mut replicate_rng(11, 0)).unwrap();
    let s = SufficientStats::from_dataset(&d);
    let zeta = first_capture_probs(&params);
    let rho = never_observed_prob(&params);
    let mut x2 = (10_000.0 - s.n as f64 - 10_000.0 * rho).powi(2) / (10_000.0 * rho);
    for (i, &z) in zeta.iter().enumerate() {
        let e = 10_000.0 * z;
        x2 += (s.first[i] as f64 - e).powi(2) / e;
    }
    assert!(chi_squared_sf(x2, zeta.len()) > 0.001, "x2 {x2}");
}

#[test]
fn trap_response_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let d = common::random_dataset(&mut rng, 5, 2, 30);
        let s = SufficientStats::from_dataset(&d);
        let spec = parse_model_spec("Mbh^2").unwrap();
        let theta: Vec<f64> = (0..spec.detection_count(5)).map(|_| rng.random_range(-1.5..1.5)).collect();
        let params = spec.markov_params(&theta, 5, 45.0).unwrap();
        let beta = params.beta.unwrap();
        for (p, c) in params.p.iter().zip(&params.c) {
            assert!((logistic(closedpop::special::logit(*p) + beta) - c).abs() < 1e-12);
        }
        let ll = closedpop::ms::log_likelihood(&s, &params).unwrap();
        assert!(common::rel_close(ll, common::forward_log_lik(&d, &params), 1e-10));
    }
}
