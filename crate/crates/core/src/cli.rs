//! Command-line interface.
//!
//! Exit status: 0 on success, 2 when a fit ends on a boundary, 1 on error.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{infer_states, parse_dataset, Dataset};
use crate::error::{Error, Result};
use crate::estimation::{aic_comparable, compare_models, fit, Approach, ComparisonRow, FitOptions, FitResult};
use crate::gof::{pearson_gof, GofReport};
use crate::model::{parse_model_spec, ModelSpec};
use crate::sim::{precision_comparison, replicate_rng, run_study, simulate_dataset, Scenario, StudyOptions};
use crate::stats::SufficientStats;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BOUNDARY: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "closedpop", version, about = "Closed-population abundance from multi-state capture histories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model by maximum likelihood.
    Fit(FitArgs),
    /// Pearson goodness of fit for one model.
    Gof(FitArgs),
    /// Fit several models and rank them by AIC.
    Compare(CompareArgs),
    /// Print the sufficient statistics of a dataset.
    Stats(DataArgs),
    /// Simulate one dataset from a scenario.
    Simulate(SimulateArgs),
    /// Run a replicated simulation study.
    Study(StudyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ApproachArg {
    Unconditional,
    Conditional,
}

impl From<ApproachArg> for Approach {
    fn from(a: ApproachArg) -> Self {
        match a {
            ApproachArg::Unconditional => Approach::Unconditional,
            ApproachArg::Conditional => Approach::Conditional,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Encounter-history file, one individual per line.
    #[arg(long)]
    pub data: PathBuf,
    /// Number of states; inferred from the largest label when omitted.
    #[arg(long = "R", visible_alias = "states")]
    pub states: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Write output here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimationArgs {
    #[arg(long, value_enum, default_value_t = ApproachArg::Unconditional)]
    pub approach: ApproachArg,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Optimizer starts (the first is always the working-scale origin).
    #[arg(long, default_value_t = 10)]
    pub starts: usize,
    /// Add a profile-likelihood interval for N.
    #[arg(long)]
    pub profile_ci: bool,
}

impl EstimationArgs {
    fn options(&self) -> FitOptions {
        FitOptions {
            starts: self.starts.max(1),
            seed: self.seed,
            profile_ci: self.profile_ci,
            ..FitOptions::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: String,
    #[command(flatten)]
    pub estimation: EstimationArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated model list; a trailing `(c)` requests a conditional fit.
    #[arg(long, value_delimiter = ',', default_value = "M0,Mt,Mb,Mh2,Mh3,Mhbe,Mhb-be")]
    pub models: Vec<String>,
    #[command(flatten)]
    pub estimation: EstimationArgs,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ScenarioArgs {
    /// Built-in scenario: lo2, hi2, lo3 or hi3.
    #[arg(long)]
    pub preset: Option<String>,
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario> {
        match (&self.preset, &self.scenario) {
            (Some(p), _) => Scenario::preset(p),
            (None, Some(path)) => Ok(serde_json::from_str(&fs::read_to_string(path)?)?),
            (None, None) => Err(Error::Scenario("give --preset or --scenario".into())),
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Which replicate stream to draw from.
    #[arg(long, default_value_t = 0)]
    pub replicate: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Override the scenario's replicate count.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub starts: usize,
    /// Output directory for results.csv and summary.json.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn load(args: &DataArgs) -> Result<(Dataset, SufficientStats)> {
    let text = fs::read_to_string(&args.data)?;
    let states = args.states.unwrap_or_else(|| infer_states(&text).max(1));
    let data = parse_dataset(&text, states)?;
    let stats = SufficientStats::from_dataset(&data);
    Ok((data, stats))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.2}"))
}

fn fmt_ci(ci: Option<[f64; 2]>) -> String {
    ci.map_or_else(|| "-".into(), |[a, b]| format!("({a:.2}, {b:.2})"))
}

pub fn fit_table(fit: &FitResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "model {}  T={}  R={}  n={}", fit.label(), fit.occasions, fit.states, fit.n);
    let _ = writeln!(s, "logL {:.2}  k {}  AIC {:.2}", fit.log_lik, fit.n_params, fit.aic);
    let _ = writeln!(s, "{:<14} {:>10} {:>10} {:>24}", "param", "estimate", "se", "95% ci");
    for p in &fit.params {
        let flag = if p.boundary { "  boundary" } else { "" };
        let _ = writeln!(
            s,
            "{:<14} {:>10.2} {:>10} {:>24}{flag}",
            p.name,
            p.estimate,
            fmt_opt(p.se),
            fmt_ci(p.ci)
        );
    }
    if let Some([lo, hi]) = fit.n_profile_ci {
        let _ = writeln!(s, "profile ci for N: ({}, {})", fmt_opt(lo), fmt_opt(hi));
    }
    if let Some(g) = &fit.gof {
        let _ = writeln!(s, "X2 {:.2}  df {}  p {}", g.x2, g.df, fmt_opt(g.p_value));
    }
    if fit.collapsed {
        let _ = writeln!(s, "warning: mixture collapsed to fewer components");
    }
    if fit.diagnostics.singular_hessian {
        let _ = writeln!(s, "warning: information matrix is singular; standard errors omitted");
    }
    s
}

pub fn gof_table(report: &GofReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<10} {:<14} {:>10} {:>10} {:>10}", "component", "cell", "observed", "expected", "X2");
    for c in &report.cells {
        let _ = writeln!(
            s,
            "{:<10} {:<14} {:>10.2} {:>10.2} {:>10.2}",
            c.component, c.cell, c.observed, c.expected, c.contribution
        );
    }
    let g = &report.summary;
    let _ = writeln!(s, "X2 {:.2}  df {}  p {}", g.x2, g.df, fmt_opt(g.p_value));
    s
}

pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>8} {:>10} {:>4} {:>10} {:>22} {:>10} {:>8}",
        "model", "dAIC", "AIC", "k", "N", "95% ci", "X2", "p"
    );
    for r in rows {
        let flag = if r.boundary { "  boundary" } else { "" };
        let _ = writeln!(
            s,
            "{:<10} {:>8.2} {:>10.2} {:>4} {:>10.2} {:>22} {:>10} {:>8}{flag}",
            r.model,
            r.delta_aic,
            r.aic,
            r.n_params,
            r.n_hat,
            fmt_ci(r.n_ci),
            fmt_opt(r.x2),
            fmt_opt(r.p_value)
        );
    }
    s
}

fn fit_csv(fit: &FitResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["param", "estimate", "se", "lower", "upper", "boundary"])?;
    for p in &fit.params {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            p.name.clone(),
            p.estimate.to_string(),
            opt(p.se),
            opt(p.ci.map(|c| c[0])),
            opt(p.ci.map(|c| c[1])),
            p.boundary.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("csv is utf-8"))
}

fn parse_model_with_approach(text: &str, default: Approach) -> Result<(ModelSpec, Approach)> {
    let t = text.trim();
    match t.strip_suffix("(c)") {
        Some(base) => Ok((parse_model_spec(base)?, Approach::Conditional)),
        None => Ok((parse_model_spec(t)?, default)),
    }
}

fn fit_with_gof(stats: &SufficientStats, model: &ModelSpec, approach: Approach, opts: &FitOptions) -> Result<(FitResult, GofReport)> {
    let mut f = fit(stats, model, approach, opts)?;
    let report = pearson_gof(&f, stats)?;
    f.gof = Some(report.summary);
    Ok((f, report))
}

fn exit_for(boundary: bool) -> i32 {
    if boundary {
        EXIT_BOUNDARY
    } else {
        EXIT_OK
    }
}

/// Runs a parsed command and returns the process exit status.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Fit(a) => {
            let (_, stats) = load(&a.data)?;
            let model = parse_model_spec(&a.model)?;
            let (f, _) = fit_with_gof(&stats, &model, a.estimation.approach.into(), &a.estimation.options())?;
            let text = match a.data.format {
                Format::Json => serde_json::to_string_pretty(&f)? + "\n",
                Format::Csv => fit_csv(&f)?,
                Format::Table => fit_table(&f),
            };
            emit(&a.data.out, &text)?;
            Ok(exit_for(f.boundary))
        }
        Command::Gof(a) => {
            let (_, stats) = load(&a.data)?;
            let model = parse_model_spec(&a.model)?;
            let (f, report) = fit_with_gof(&stats, &model, a.estimation.approach.into(), &a.estimation.options())?;
            let text = match a.data.format {
                Format::Json => serde_json::to_string_pretty(&report)? + "\n",
                Format::Csv => {
                    let mut buf = Vec::new();
                    report.write_csv(&mut buf)?;
                    String::from_utf8(buf).expect("csv is utf-8")
                }
                Format::Table => gof_table(&report),
            };
            emit(&a.data.out, &text)?;
            Ok(exit_for(f.boundary))
        }
        Command::Compare(a) => {
            let (_, stats) = load(&a.data)?;
            let opts = a.estimation.options();
            let mut fits = Vec::new();
            for m in &a.models {
                let (model, approach) = parse_model_with_approach(m, a.estimation.approach.into())?;
                fits.push(fit_with_gof(&stats, &model, approach, &opts)?.0);
            }
            if !aic_comparable(&fits) {
                eprintln!("warning: models mix single-state and multi-state data or conditional and unconditional likelihoods; their AIC values are not on a common scale");
            }
            let rows = compare_models(&fits);
            let text = match a.data.format {
                Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["model", "delta_aic", "aic", "log_lik", "k", "n_hat", "lower", "upper", "x2", "p_value", "boundary"])?;
                    for r in &rows {
                        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
                        w.write_record([
                            r.model.clone(),
                            r.delta_aic.to_string(),
                            r.aic.to_string(),
                            r.log_lik.to_string(),
                            r.n_params.to_string(),
                            r.n_hat.to_string(),
                            opt(r.n_ci.map(|c| c[0])),
                            opt(r.n_ci.map(|c| c[1])),
                            opt(r.x2),
                            opt(r.p_value),
                            r.boundary.to_string(),
                        ])?;
                    }
                    String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("csv is utf-8")
                }
                Format::Table => comparison_table(&rows),
            };
            emit(&a.data.out, &text)?;
            Ok(EXIT_OK)
        }
        Command::Stats(a) => {
            let (_, stats) = load(&a)?;
            let text = serde_json::to_string_pretty(&stats)? + "\n";
            emit(&a.out, &text)?;
            Ok(EXIT_OK)
        }
        Command::Simulate(a) => {
            let scenario = a.scenario.load()?;
            let data = simulate_dataset(&scenario, &mut replicate_rng(a.seed, a.replicate))?;
            emit(&a.out, &data.to_text())?;
            Ok(EXIT_OK)
        }
        Command::Study(a) => {
            let scenario = a.scenario.load()?;
            let mut opts = StudyOptions::for_scenario(&scenario, a.seed);
            if let Some(r) = a.replicates {
                opts.replicates = r;
            }
            opts.fit.starts = a.starts.max(1);
            let results = run_study(&scenario, &opts)?;
            write_study(&results, &a.out)?;
            let models: Vec<String> = results.summary.iter().map(|s| s.model.clone()).collect();
            let refs: Vec<&str> = models.iter().map(String::as_str).collect();
            let precision = precision_comparison(&results, &refs);
            let mut s = String::new();
            let _ = writeln!(s, "scenario {}  seed {}  replicates {}", scenario.name, a.seed, opts.replicates);
            let _ = writeln!(
                s,
                "{:<10} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
                "model", "ok", "bound", "mean", "median", "IQR", "sd", "mc se"
            );
            for (sm, pr) in results.summary.iter().zip(&precision) {
                let _ = writeln!(
                    s,
                    "{:<10} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
                    sm.model,
                    sm.converged,
                    sm.boundary,
                    fmt_opt(sm.mean),
                    fmt_opt(sm.median),
                    fmt_opt(pr.iqr),
                    fmt_opt(pr.sd),
                    fmt_opt(sm.mc_se)
                );
            }
            emit(&None, &s)?;
            Ok(EXIT_OK)
        }
    }
}

pub fn write_study(results: &crate::sim::StudyResults, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    results.write_results_csv(fs::File::create(dir.join("results.csv"))?)?;
    results.write_summary_json(fs::File::create(dir.join("summary.json"))?)?;
    Ok(())
}
