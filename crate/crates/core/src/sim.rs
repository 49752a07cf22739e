//! Simulation from the multi-state process and the replicated study.
//!
//! Replicate `k` of a study draws from `ChaCha8Rng` seeded with the master
//! seed on stream `k`, so results do not depend on thread count or order.
//! The same stream supplies the optimizer starts, models fitted in a fixed
//! order.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, EncounterHistory};
use crate::error::{Error, Result};
use crate::estimation::{fit_with_rng, Approach, FitOptions, FitResult};
use crate::model::{parse_model_spec, ModelSpec};
use crate::ms::MsParams;
use crate::stats::SufficientStats;

pub const THREADS_ENV: &str = "CLOSEDPOP_THREADS";

/// A simulation setting with time-constant parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(rename = "N")]
    pub n_pop: usize,
    #[serde(rename = "T")]
    pub occasions: usize,
    /// Capture probability by state.
    pub p: Vec<f64>,
    /// Row-stochastic transition matrix.
    pub psi: Vec<Vec<f64>>,
    /// Initial state distribution.
    pub alpha: Vec<f64>,
    pub replicates: usize,
}

fn two_state(name: &str, psi12: f64, psi21: f64) -> Scenario {
    Scenario {
        name: name.into(),
        n_pop: 100,
        occasions: 6,
        p: vec![0.15, 0.4],
        psi: vec![vec![1.0 - psi12, psi12], vec![psi21, 1.0 - psi21]],
        alpha: vec![0.4, 0.6],
        replicates: 100,
    }
}

fn three_state(name: &str, psi: [[f64; 3]; 3]) -> Scenario {
    Scenario {
        name: name.into(),
        n_pop: 100,
        occasions: 6,
        p: vec![0.15, 0.25, 0.4],
        psi: psi.iter().map(|r| r.to_vec()).collect(),
        alpha: vec![0.33, 0.40, 0.27],
        replicates: 100,
    }
}

pub const PRESETS: [&str; 4] = ["lo2", "hi2", "lo3", "hi3"];

impl Scenario {
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "lo2" => Ok(two_state("lo2", 0.3, 0.2)),
            "hi2" => Ok(two_state("hi2", 0.9, 0.6)),
            "lo3" => Ok(three_state(
                "lo3",
                [[0.76, 0.12, 0.12], [0.1, 0.8, 0.1], [0.15, 0.15, 0.7]],
            )),
            "hi3" => Ok(three_state(
                "hi3",
                [[0.28, 0.36, 0.36], [0.3, 0.4, 0.3], [0.45, 0.45, 0.1]],
            )),
            other => Err(Error::Scenario(format!(
                "unknown preset {other:?}; expected one of {}",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn states(&self) -> usize {
        self.p.len()
    }

    pub fn params(&self) -> Result<MsParams> {
        let r = self.states();
        if r == 0 || self.alpha.len() != r || self.psi.len() != r || self.psi.iter().any(|row| row.len() != r) {
            return Err(Error::Scenario("p, psi and alpha must agree on the number of states".into()));
        }
        if self.occasions == 0 {
            return Err(Error::Scenario("need at least one occasion".into()));
        }
        let params = MsParams::homogeneous(self.occasions, &self.p, &self.psi, &self.alpha, self.n_pop as f64);
        params.validate().map_err(|e| Error::Scenario(e.to_string()))?;
        Ok(params)
    }

    /// Models fitted in each replicate, in fitting order.
    pub fn default_models(&self) -> Vec<(ModelSpec, Approach)> {
        let mut out: Vec<(ModelSpec, Approach)> = ["M0", "Mt", "Mb", "Mh2", "Mh3", "Mhbe", "Mhb-be"]
            .iter()
            .map(|s| (parse_model_spec(s).expect("built-in model"), Approach::Unconditional))
            .collect();
        let ms = parse_model_spec(&format!("Mh^{}", self.states())).expect("built-in model");
        out.push((ms, Approach::Unconditional));
        out.push((ms, Approach::Conditional));
        out
    }
}

fn draw_index<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Encounter histories of the captured animals from `params.n_pop` individuals.
pub fn simulate_from_params<R: Rng + ?Sized>(params: &MsParams, rng: &mut R) -> Result<Dataset> {
    params.validate()?;
    if params.n_pop < 0.0 || params.n_pop.fract() != 0.0 {
        return Err(Error::InvalidParams("population size must be a whole number".into()));
    }
    let (t_max, r_max) = (params.occasions, params.states);
    let mut histories = Vec::new();
    for _ in 0..params.n_pop as usize {
        let mut state = draw_index(rng, &params.alpha);
        let mut entries = vec![0u32; t_max];
        let mut seen = false;
        for (t, entry) in entries.iter_mut().enumerate() {
            let prob = if seen { params.c(t, state) } else { params.p(t, state) };
            if rng.random::<f64>() < prob {
                *entry = state as u32 + 1;
                seen = true;
            }
            if t + 1 < t_max {
                let row = &params.psi[(t * r_max + state) * r_max..(t * r_max + state + 1) * r_max];
                state = draw_index(rng, row);
            }
        }
        if seen {
            histories.push(EncounterHistory::new(entries));
        }
    }
    Dataset::new(histories, r_max)
}

pub fn simulate_dataset<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<Dataset> {
    simulate_from_params(&scenario.params()?, rng)
}

/// Generator for replicate `k` under `master`.
pub fn replicate_rng(master: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(k);
    rng
}

#[derive(Debug, Clone)]
pub struct StudyOptions {
    pub seed: u64,
    pub replicates: usize,
    pub models: Vec<(ModelSpec, Approach)>,
    pub fit: FitOptions,
}

impl StudyOptions {
    pub fn for_scenario(scenario: &Scenario, seed: u64) -> Self {
        Self {
            seed,
            replicates: scenario.replicates,
            models: scenario.default_models(),
            fit: FitOptions::default(),
        }
    }
}

/// One parameter estimate from one replicate fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub scenario: String,
    pub replicate: usize,
    pub model: String,
    pub param: String,
    pub estimate: f64,
    pub converged: bool,
    pub boundary: bool,
}

/// Distribution of one parameter's estimates over converged replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub scenario: String,
    pub model: String,
    pub param: String,
    pub converged: usize,
    pub boundary: usize,
    pub failed: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub iqr: Option<f64>,
    pub sd: Option<f64>,
    pub mc_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResults {
    pub scenario: Scenario,
    pub seed: u64,
    pub rows: Vec<ReplicateRow>,
    /// Summaries of `N` by model.
    pub summary: Vec<EstimateSummary>,
}

fn label(model: &ModelSpec, approach: Approach) -> String {
    match approach {
        Approach::Unconditional => model.to_string(),
        Approach::Conditional => format!("{model}(c)"),
    }
}

fn replicate(scenario: &Scenario, params: &MsParams, opts: &StudyOptions, k: usize) -> Vec<ReplicateRow> {
    let mut rng = replicate_rng(opts.seed, k as u64);
    let data = simulate_from_params(params, &mut rng).map(|d| SufficientStats::from_dataset(&d));
    let mut rows = Vec::new();
    for (model, approach) in &opts.models {
        let name = label(model, *approach);
        let fit: Option<FitResult> = data
            .as_ref()
            .ok()
            .and_then(|s| fit_with_rng(s, model, *approach, &opts.fit, &mut rng).ok());
        match fit {
            Some(f) => rows.extend(f.params.iter().map(|p| ReplicateRow {
                scenario: scenario.name.clone(),
                replicate: k,
                model: name.clone(),
                param: p.name.clone(),
                estimate: p.estimate,
                converged: true,
                boundary: f.boundary,
            })),
            None => rows.push(ReplicateRow {
                scenario: scenario.name.clone(),
                replicate: k,
                model: name,
                param: "N".into(),
                estimate: f64::NAN,
                converged: false,
                boundary: false,
            }),
        }
    }
    rows
}

/// Worker count from `CLOSEDPOP_THREADS`, if set to a positive integer.
pub fn thread_limit() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

pub fn run_study(scenario: &Scenario, opts: &StudyOptions) -> Result<StudyResults> {
    let params = scenario.params()?;
    for (m, _) in &opts.models {
        if let ModelSpec::MultiState { states, .. } = m {
            if *states != scenario.states() {
                return Err(Error::Dimension(format!(
                    "model {m} does not match the {} states of scenario {}",
                    scenario.states(),
                    scenario.name
                )));
            }
        }
    }
    let work = || -> Vec<ReplicateRow> {
        (0..opts.replicates)
            .into_par_iter()
            .map(|k| replicate(scenario, &params, opts, k))
            .collect::<Vec<_>>()
            .concat()
    };
    let rows = match thread_limit() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParams(e.to_string()))?
            .install(work),
        None => work(),
    };
    let summary = opts
        .models
        .iter()
        .map(|(m, a)| summarize(&scenario.name, &label(m, *a), "N", &rows))
        .collect();
    Ok(StudyResults {
        scenario: scenario.clone(),
        seed: opts.seed,
        rows,
        summary,
    })
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(scenario: &str, model: &str, param: &str, rows: &[ReplicateRow]) -> EstimateSummary {
    let mine: Vec<&ReplicateRow> = rows
        .iter()
        .filter(|r| r.model == model && (r.param == param || !r.converged))
        .collect();
    let mut values: Vec<f64> = mine
        .iter()
        .filter(|r| r.converged && r.param == param)
        .map(|r| r.estimate)
        .collect();
    values.sort_by(f64::total_cmp);
    let k = values.len();
    let mean = (k > 0).then(|| values.iter().sum::<f64>() / k as f64);
    let sd = (k > 1).then(|| {
        let m = mean.unwrap_or(0.0);
        (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt()
    });
    let q = |p: f64| (k > 0).then(|| quantile(&values, p));
    let (q1, q3) = (q(0.25), q(0.75));
    EstimateSummary {
        scenario: scenario.into(),
        model: model.into(),
        param: param.into(),
        converged: k,
        boundary: mine.iter().filter(|r| r.converged && r.boundary).count(),
        failed: mine.iter().filter(|r| !r.converged).count(),
        mean,
        median: q(0.5),
        q1,
        q3,
        iqr: q1.zip(q3).map(|(a, b)| b - a),
        sd,
        mc_se: sd.map(|s| s / (k as f64).sqrt()),
    }
}

/// Spread of the `N` estimates for the requested models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRow {
    pub model: String,
    pub count: usize,
    pub iqr: Option<f64>,
    pub sd: Option<f64>,
    /// Fewer than two converged replicates.
    pub insufficient: bool,
}

pub fn precision_comparison(results: &StudyResults, models: &[&str]) -> Vec<PrecisionRow> {
    models
        .iter()
        .map(|m| {
            let s = results
                .summary
                .iter()
                .find(|s| s.model == *m)
                .cloned()
                .unwrap_or_else(|| summarize(&results.scenario.name, m, "N", &results.rows));
            PrecisionRow {
                model: (*m).into(),
                count: s.converged,
                iqr: s.iqr,
                sd: s.sd,
                insufficient: s.converged < 2,
            }
        })
        .collect()
}

impl StudyResults {
    pub fn summary_for(&self, model: &str) -> Option<&EstimateSummary> {
        self.summary.iter().find(|s| s.model == model)
    }

    pub fn write_results_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_json<W: Write>(&self, mut out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Summary<'a> {
            scenario: &'a Scenario,
            seed: u64,
            summary: &'a [EstimateSummary],
        }
        serde_json::to_writer_pretty(
            &mut out,
            &Summary {
                scenario: &self.scenario,
                seed: self.seed,
                summary: &self.summary,
            },
        )?;
        writeln!(out)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for name in PRESETS {
            let s = Scenario::preset(name).unwrap();
            s.params().unwrap();
            assert_eq!(s.n_pop, 100);
            assert_eq!(s.occasions, 6);
        }
        assert!(Scenario::preset("nope").is_err());
    }

    #[test]
    fn simulation_is_reproducible() {
        let s = Scenario::preset("lo2").unwrap();
        let a = simulate_dataset(&s, &mut replicate_rng(7, 3)).unwrap();
        let b = simulate_dataset(&s, &mut replicate_rng(7, 3)).unwrap();
        let c = simulate_dataset(&s, &mut replicate_rng(7, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.n() <= 100);
    }

    #[test]
    fn certain_capture_sees_everyone_every_time() {
        let mut s = Scenario::preset("lo2").unwrap();
        s.p = vec![1.0, 1.0];
        s.n_pop = 20;
        let d = simulate_dataset(&s, &mut replicate_rng(1, 0)).unwrap();
        assert_eq!(d.n(), 20);
        assert!(d.histories().iter().all(|h| h.captures() == 6));
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&[5.0], 0.75), 5.0);
    }

    #[test]
    fn summary_excludes_failures() {
        let row = |est: f64, ok: bool| ReplicateRow {
            scenario: "x".into(),
            replicate: 0,
            model: "M0".into(),
            param: "N".into(),
            estimate: est,
            converged: ok,
            boundary: false,
        };
        let rows = vec![row(10.0, true), row(f64::NAN, false), row(14.0, true)];
        let s = summarize("x", "M0", "N", &rows);
        assert_eq!(s.converged, 2);
        assert_eq!(s.failed, 1);
        assert_eq!(s.mean, Some(12.0));
        assert!((s.sd.unwrap() - 8f64.sqrt()).abs() < 1e-12);
        let one = summarize("x", "M0", "N", &rows[..2]);
        assert!(one.sd.is_none());
    }
}
