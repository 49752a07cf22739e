//! Maximum-likelihood fitting, standard errors and model comparison.
//!
//! Implementation choices (none of them dictated by the model itself):
//! Nelder–Mead then BFGS from ten starts (working-zero plus nine draws from
//! `N(0, 1.5^2)`), the best converged start kept, ties within `1e-8` in
//! log-likelihood broken by the smallest working-vector norm. Standard errors
//! come from a central-difference Hessian on the working scale; intervals are
//! Wald intervals on the logit/log scale mapped back to the natural scale.
//! `N` is parameterized as `n + exp(nu)`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gof::GofSummary;
use crate::model::{ModelSpec, Reported, Scale};
use crate::ms::population_term;
use crate::optim::{bfgs, gradient, hessian, nelder_mead, BfgsOptions, NelderMeadOptions};
use crate::stats::SufficientStats;

pub const Z_95: f64 = 1.959_963_984_540_054;
const TIE_TOL: f64 = 1e-8;
const PROB_EDGE: f64 = 1e-6;
/// `N - n` below this counts as the lower boundary.
const UNSEEN_EDGE: f64 = 1e-4;
/// Transformed-scale magnitude treated as a boundary for log/identity parameters.
const SCALE_EDGE: f64 = 15.0;
const HESSIAN_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    /// Full likelihood with `N` as a parameter.
    Unconditional,
    /// Likelihood conditional on capture; `N` from `n / (1 - rho)`.
    Conditional,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub starts: usize,
    pub seed: u64,
    pub start_sd: f64,
    pub optimizer: NelderMeadOptions,
    /// Also compute a profile-likelihood interval for `N` (unconditional only).
    pub profile_ci: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            starts: 10,
            seed: 1,
            start_sd: 1.5,
            optimizer: NelderMeadOptions::default(),
            profile_ci: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub name: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub ci: Option<[f64; 2]>,
    pub scale: Scale,
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub starts: usize,
    pub starts_converged: usize,
    pub gradient_norm: f64,
    pub singular_hessian: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelSpec,
    pub approach: Approach,
    #[serde(rename = "T")]
    pub occasions: usize,
    #[serde(rename = "R")]
    pub states: usize,
    pub n: usize,
    /// Working-scale MLE; `nu = ln(N - n)` is last for unconditional fits.
    pub working: Vec<f64>,
    /// Natural-scale estimates, `N` first.
    pub params: Vec<ParamEstimate>,
    pub log_lik: f64,
    pub n_params: usize,
    pub aic: f64,
    pub n_hat: f64,
    pub boundary: bool,
    pub collapsed: bool,
    pub diagnostics: Diagnostics,
    /// Working-scale covariance, when the Hessian was positive definite.
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Profile-likelihood interval for `N`; `None` endpoints were not reached.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_profile_ci: Option<[Option<f64>; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gof: Option<GofSummary>,
}

impl FitResult {
    /// Model notation, suffixed `(c)` for conditional fits.
    pub fn label(&self) -> String {
        match self.approach {
            Approach::Unconditional => self.model.to_string(),
            Approach::Conditional => format!("{}(c)", self.model),
        }
    }

    pub fn param(&self, name: &str) -> Option<&ParamEstimate> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn n_estimate(&self) -> &ParamEstimate {
        &self.params[0]
    }

    /// Log-likelihood at the stored working vector.
    pub fn recompute_log_lik(&self, stats: &SufficientStats) -> Result<f64> {
        let obj = Objective::new(stats, &self.model, self.approach)?;
        if self.working.len() != obj.dim() {
            return Err(Error::Dimension("stored working vector has the wrong length".into()));
        }
        Ok(obj.log_lik(&self.working))
    }
}

pub(crate) struct Objective<'a> {
    stats: &'a SufficientStats,
    model: &'a ModelSpec,
    approach: Approach,
    detection: usize,
}

impl<'a> Objective<'a> {
    pub(crate) fn new(stats: &'a SufficientStats, model: &'a ModelSpec, approach: Approach) -> Result<Self> {
        model.check_data(stats)?;
        Ok(Self {
            stats,
            model,
            approach,
            detection: model.detection_count(stats.occasions),
        })
    }

    pub(crate) fn dim(&self) -> usize {
        self.detection + usize::from(self.approach == Approach::Unconditional)
    }

    pub(crate) fn log_lik(&self, theta: &[f64]) -> f64 {
        let (obs, rho) = self.model.components(&theta[..self.detection], self.stats);
        let n = self.stats.n;
        let ll = match self.approach {
            Approach::Unconditional => {
                let n_pop = n as f64 + theta[self.detection].exp();
                population_term(n_pop, n, rho) + obs
            }
            Approach::Conditional => obs - n as f64 * (-rho).ln_1p(),
        };
        if ll.is_nan() {
            f64::NEG_INFINITY
        } else {
            ll
        }
    }

    fn rho(&self, theta: &[f64]) -> f64 {
        self.model.components(&theta[..self.detection], self.stats).1
    }

    /// `N` as a function of the working vector.
    fn n_pop(&self, theta: &[f64]) -> f64 {
        let n = self.stats.n as f64;
        match self.approach {
            Approach::Unconditional => n + theta[self.detection].exp(),
            Approach::Conditional => n / (1.0 - self.rho(theta)),
        }
    }

    /// `ln(N - n)` as a function of the working vector.
    fn log_unseen(&self, theta: &[f64]) -> f64 {
        match self.approach {
            Approach::Unconditional => theta[self.detection],
            Approach::Conditional => {
                let rho = self.rho(theta);
                (self.stats.n as f64).ln() + rho.ln() - (-rho).ln_1p()
            }
        }
    }
}

pub fn fit_unconditional(stats: &SufficientStats, model: &ModelSpec, opts: &FitOptions) -> Result<FitResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    fit_with_rng(stats, model, Approach::Unconditional, opts, &mut rng)
}

pub fn fit_conditional(stats: &SufficientStats, model: &ModelSpec, opts: &FitOptions) -> Result<FitResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    fit_with_rng(stats, model, Approach::Conditional, opts, &mut rng)
}

pub fn fit(stats: &SufficientStats, model: &ModelSpec, approach: Approach, opts: &FitOptions) -> Result<FitResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    fit_with_rng(stats, model, approach, opts, &mut rng)
}

/// Multi-start fit drawing random starts from `rng`.
pub fn fit_with_rng<R: Rng + ?Sized>(
    stats: &SufficientStats,
    model: &ModelSpec,
    approach: Approach,
    opts: &FitOptions,
    rng: &mut R,
) -> Result<FitResult> {
    let obj = Objective::new(stats, model, approach)?;
    let dim = obj.dim();
    if dim == 0 {
        return Err(Error::Dimension("model has no free parameters".into()));
    }
    let normal = Normal::new(0.0, opts.start_sd).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let starts: Vec<Vec<f64>> = (0..opts.starts.max(1))
        .map(|i| {
            if i == 0 {
                vec![0.0; dim]
            } else {
                (0..dim).map(|_| normal.sample(rng)).collect()
            }
        })
        .collect();

    let mut iterations = 0;
    let mut candidates = Vec::new();
    for x0 in &starts {
        let coarse = nelder_mead(|x| -obj.log_lik(x), x0, &opts.optimizer);
        let quasi = BfgsOptions {
            max_iter: opts.optimizer.max_iter,
            f_tol: opts.optimizer.f_tol,
            bound: opts.optimizer.bound,
            ..BfgsOptions::default()
        };
        let m = bfgs(|x| -obj.log_lik(x), &coarse.x, &quasi);
        iterations += coarse.iterations + m.iterations;
        if m.converged && m.fx.is_finite() {
            candidates.push((-m.fx, m.x));
        }
    }
    let best_ll = candidates
        .iter()
        .map(|c| c.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let best = candidates
        .iter()
        .filter(|c| best_ll - c.0 < TIE_TOL)
        .min_by(|a, b| norm(&a.1).total_cmp(&norm(&b.1)))
        .ok_or(Error::NoConvergence)?;

    let theta = polish(&obj, best.1.clone(), opts.optimizer.bound);
    let log_lik = obj.log_lik(&theta);
    let grad = gradient(|x| obj.log_lik(x), &theta, 1e-6);
    let diagnostics = Diagnostics {
        iterations,
        starts: starts.len(),
        starts_converged: candidates.len(),
        gradient_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
        singular_hessian: false,
    };
    let n_params = dim;
    let mut result = FitResult {
        model: *model,
        approach,
        occasions: stats.occasions,
        states: stats.states,
        n: stats.n,
        n_hat: obj.n_pop(&theta),
        working: theta,
        params: Vec::new(),
        log_lik,
        n_params,
        aic: -2.0 * log_lik + 2.0 * n_params as f64,
        boundary: false,
        collapsed: false,
        diagnostics,
        covariance: None,
        n_profile_ci: None,
        gof: None,
    };
    result = standard_errors(result, stats)?;
    if opts.profile_ci && approach == Approach::Unconditional {
        result.n_profile_ci = Some(profile_n_interval(&obj, &result, opts));
    }
    Ok(result)
}

/// Newton steps from the simplex optimum while the observed information is
/// positive definite. Only steps that raise the log-likelihood are kept.
fn polish(obj: &Objective<'_>, mut theta: Vec<f64>, bound: f64) -> Vec<f64> {
    let dim = theta.len();
    let mut current = obj.log_lik(&theta);
    for _ in 0..20 {
        let g = gradient(|x| obj.log_lik(x), &theta, 1e-6);
        let h = hessian(|x| -obj.log_lik(x), &theta, HESSIAN_STEP);
        if g.iter().chain(h.iter().flatten()).any(|v| !v.is_finite()) {
            break;
        }
        let Some(chol) = DMatrix::from_fn(dim, dim, |i, j| h[i][j]).cholesky() else {
            break;
        };
        let step = chol.solve(&nalgebra::DVector::from_vec(g));
        let mut scale = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, d)| t + scale * d).collect();
            if trial.iter().all(|v| v.abs() <= bound) {
                let ll = obj.log_lik(&trial);
                if ll > current {
                    current = ll;
                    theta = trial;
                    moved = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !moved || step.amax() * scale < 1e-10 {
            break;
        }
    }
    theta
}

fn is_edge(scale: Scale, value: f64) -> bool {
    match scale {
        Scale::Probability => !(PROB_EDGE..=1.0 - PROB_EDGE).contains(&value),
        Scale::Positive => value.ln().abs() > SCALE_EDGE,
        Scale::Real => value.abs() > SCALE_EDGE,
    }
}

/// Fills SEs, intervals and boundary flags from the observed information at `fit.working`.
pub fn standard_errors(mut fit: FitResult, stats: &SufficientStats) -> Result<FitResult> {
    let obj = Objective::new(stats, &fit.model, fit.approach)?;
    let theta = fit.working.clone();
    let dim = theta.len();
    let detection = obj.detection;

    let neg_h = hessian(|x| -obj.log_lik(x), &theta, HESSIAN_STEP);
    let finite = neg_h.iter().flatten().all(|v| v.is_finite());
    let covariance = if finite {
        let m = DMatrix::from_fn(dim, dim, |i, j| neg_h[i][j]);
        m.cholesky().map(|c| c.inverse())
    } else {
        None
    };
    fit.diagnostics.singular_hessian = covariance.is_none();
    fit.covariance = covariance
        .as_ref()
        .map(|c| (0..dim).map(|i| (0..dim).map(|j| c[(i, j)]).collect()).collect());

    let quad = |g: &[f64]| -> Option<f64> {
        let c = covariance.as_ref()?;
        let mut v = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                v += g[i] * c[(i, j)] * g[j];
            }
        }
        (v >= 0.0).then(|| v.sqrt())
    };

    let n = stats.n as f64;
    let n_hat = obj.n_pop(&theta);
    let log_unseen = obj.log_unseen(&theta);
    let n_boundary = !(n_hat - n >= UNSEEN_EDGE) || log_unseen > SCALE_EDGE;
    let mut params = Vec::new();
    {
        let grad = gradient(|x| obj.log_unseen(x), &theta, 1e-6);
        let mut se_g = quad(&grad);
        if fit.approach == Approach::Conditional {
            // sampling variance of n itself on top of the estimation variance of rho
            let rho = obj.rho(&theta);
            let extra = n * rho / (1.0 - rho).powi(2) / (n_hat - n).powi(2);
            se_g = se_g.map(|s| (s * s + extra).sqrt());
        }
        let se_g = se_g.filter(|s| s.is_finite() && !n_boundary);
        params.push(ParamEstimate {
            name: "N".into(),
            estimate: n_hat,
            se: se_g.map(|s| s * (n_hat - n)),
            ci: se_g.map(|s| [n + (log_unseen - Z_95 * s).exp(), n + (log_unseen + Z_95 * s).exp()]),
            scale: Scale::Positive,
            boundary: n_boundary,
        });
    }

    let reported = fit.model.report(&theta[..detection], stats.occasions);
    let transformed = |x: &[f64], i: usize| -> f64 {
        let r: Vec<Reported> = fit.model.report(&x[..detection], stats.occasions);
        r[i].scale.forward(r[i].value)
    };
    for (i, rep) in reported.iter().enumerate() {
        let boundary = is_edge(rep.scale, rep.value);
        let se_g = if boundary {
            None
        } else {
            let grad = gradient(|x| transformed(x, i), &theta, 1e-6);
            quad(&grad).filter(|s| s.is_finite())
        };
        let g = rep.scale.forward(rep.value);
        params.push(ParamEstimate {
            name: rep.name.clone(),
            estimate: rep.value,
            se: se_g.map(|s| s * rep.scale.derivative(rep.value)),
            ci: se_g.map(|s| [rep.scale.backward(g - Z_95 * s), rep.scale.backward(g + Z_95 * s)]),
            scale: rep.scale,
            boundary,
        });
    }

    fit.collapsed = fit.model.collapsed(&theta[..detection]);
    fit.boundary = fit.collapsed || fit.diagnostics.singular_hessian || params.iter().any(|p| p.boundary);
    fit.params = params;
    fit.n_hat = n_hat;
    Ok(fit)
}

const PROFILE_CUTOFF: f64 = 3.841_458_820_694_124;

/// Profile interval for `N` found by bisection on `nu` with the other
/// parameters re-maximized at each trial value.
fn profile_n_interval(obj: &Objective<'_>, fit: &FitResult, opts: &FitOptions) -> [Option<f64>; 2] {
    let d = obj.detection;
    let nu_hat = fit.working[d];
    let best = fit.log_lik;
    let bound = opts.optimizer.bound;
    let inner = NelderMeadOptions {
        initial_step: 0.3,
        ..opts.optimizer
    };
    let mut warm = fit.working[..d].to_vec();
    let profile = |nu: f64, warm: &mut Vec<f64>| -> f64 {
        let m = nelder_mead(
            |x| {
                let mut full = x.to_vec();
                full.push(nu);
                -obj.log_lik(&full)
            },
            warm,
            &inner,
        );
        *warm = m.x;
        2.0 * (best + m.fx)
    };
    let n = obj.stats.n as f64;
    let side = |direction: f64, warm: &mut Vec<f64>| -> Option<f64> {
        let mut inside = nu_hat;
        let mut step = 0.25;
        let mut outside = None;
        while (inside + direction * step).abs() <= bound {
            let trial = inside + direction * step;
            if profile(trial, warm) > PROFILE_CUTOFF {
                outside = Some(trial);
                break;
            }
            inside = trial;
            step *= 1.5;
        }
        let mut outside = outside?;
        for _ in 0..40 {
            let mid = 0.5 * (inside + outside);
            if profile(mid, warm) > PROFILE_CUTOFF {
                outside = mid;
            } else {
                inside = mid;
            }
            if (outside - inside).abs() < 1e-6 {
                break;
            }
        }
        Some(n + (0.5 * (inside + outside)).exp())
    };
    let lower = side(-1.0, &mut warm);
    let mut warm = fit.working[..d].to_vec();
    let upper = side(1.0, &mut warm);
    [lower, upper]
}

/// One row of an AIC comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub delta_aic: f64,
    pub aic: f64,
    pub log_lik: f64,
    pub n_params: usize,
    pub n_hat: f64,
    pub n_ci: Option<[f64; 2]>,
    pub x2: Option<f64>,
    pub p_value: Option<f64>,
    pub boundary: bool,
}

/// Rows sorted by AIC; equal AICs keep their input order.
/// AIC values share a scale only when the likelihoods see the same data in
/// the same form: single-state models use the state-collapsed histories, and
/// conditional likelihoods omit the binomial term for `N`.
pub fn aic_comparable(fits: &[FitResult]) -> bool {
    let family = |f: &FitResult| (f.approach, if f.model.is_multi_state() { f.states } else { 1 });
    fits.windows(2).all(|w| family(&w[0]) == family(&w[1]))
}

pub fn compare_models(fits: &[FitResult]) -> Vec<ComparisonRow> {
    let min_aic = fits.iter().map(|f| f.aic).fold(f64::INFINITY, f64::min);
    let mut rows: Vec<ComparisonRow> = fits
        .iter()
        .map(|f| ComparisonRow {
            model: f.label(),
            delta_aic: f.aic - min_aic,
            aic: f.aic,
            log_lik: f.log_lik,
            n_params: f.n_params,
            n_hat: f.n_hat,
            n_ci: f.n_estimate().ci,
            x2: f.gof.as_ref().map(|g| g.x2),
            p_value: f.gof.as_ref().and_then(|g| g.p_value),
            boundary: f.boundary,
        })
        .collect();
    rows.sort_by(|a, b| a.aic.total_cmp(&b.aic));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_dataset;
    use crate::model::parse_model_spec;

    fn stats(text: &str, r: usize) -> SufficientStats {
        SufficientStats::from_dataset(&parse_dataset(text, r).unwrap())
    }

    #[test]
    fn all_captured_every_time_is_boundary() {
        let s = stats(&"1 1\n".repeat(12), 1);
        let fit = fit_unconditional(&s, &parse_model_spec("M0").unwrap(), &FitOptions::default()).unwrap();
        assert!(fit.boundary);
        assert!(fit.param("p").unwrap().estimate > 0.999);
        assert!((fit.n_hat - 12.0).abs() < 1e-3);
        assert!(fit.n_estimate().ci.is_none());
    }

    #[test]
    fn aic_comparability_needs_matching_data_and_approach() {
        let s = stats("1 0 2\n2 2 0\n0 1 1\n1 0 0\n0 2 0\n2 0 2", 2);
        let opts = FitOptions::default();
        let fit_one = |m: &str, a| fit(&s, &parse_model_spec(m).unwrap(), a, &opts).unwrap();
        let m0 = fit_one("M0", Approach::Unconditional);
        let mb = fit_one("Mb", Approach::Unconditional);
        let ms = fit_one("Mh^2", Approach::Unconditional);
        let ms_c = fit_one("Mh^2", Approach::Conditional);
        assert!(aic_comparable(&[m0.clone(), mb]));
        assert!(!aic_comparable(&[m0, ms.clone()]));
        assert!(!aic_comparable(&[ms, ms_c]));
    }

    #[test]
    fn aic_counts_working_parameters() {
        let s = stats("1 0 1\n0 1 1\n1 0 0\n0 0 1\n1 1 0\n0 1 0", 1);
        let fit = fit_unconditional(&s, &parse_model_spec("Mt").unwrap(), &FitOptions::default()).unwrap();
        assert_eq!(fit.n_params, 4);
        assert!((fit.aic - (-2.0 * fit.log_lik + 8.0)).abs() < 1e-12);
    }

    #[test]
    fn conditional_with_certain_detection_gives_n() {
        let s = stats(&"1 1 1\n".repeat(5), 1);
        let fit = fit_conditional(&s, &parse_model_spec("M0").unwrap(), &FitOptions::default()).unwrap();
        assert!((fit.n_hat - 5.0).abs() < 1e-6);
        assert_eq!(fit.n_params, 1);
    }

    #[test]
    fn comparison_single_fit_and_ties() {
        let s = stats("1 0 1\n0 1 1\n1 0 0\n0 0 1\n1 1 0\n0 1 0", 1);
        let fit = fit_unconditional(&s, &parse_model_spec("M0").unwrap(), &FitOptions::default()).unwrap();
        let rows = compare_models(std::slice::from_ref(&fit));
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].delta_aic, 0.0);

        let mut other = fit.clone();
        other.model = parse_model_spec("Mh2").unwrap();
        let rows = compare_models(&[other.clone(), fit.clone()]);
        assert_eq!(rows[0].model, "Mh2");
        assert_eq!(rows[1].model, "M0");
        assert_eq!(rows[0].aic, rows[1].aic);
    }

    #[test]
    fn r_mismatch_is_an_error() {
        let s = stats("1 0 2\n0 1 1", 2);
        let e = fit_unconditional(&s, &parse_model_spec("Mh^3").unwrap(), &FitOptions::default());
        assert!(matches!(e, Err(Error::Dimension(_))));
    }
}
