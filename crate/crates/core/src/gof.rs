//! Pearson goodness of fit against the expected sufficient statistics.
//!
//! Markov-type models (multi-state, and M0/Mt/Mb on the collapsed data) are
//! tested on two families of multinomials: first captures including the
//! never-seen cell, and for each `(t, r)` with animals present, where they
//! are next seen (or not seen again). Heterogeneity mixtures are tested on
//! the capture-frequency counts `f_0..f_T`. Cells are not pooled.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimation::FitResult;
use crate::model::ModelSpec;
use crate::ms::PartialHistoryProbs;
use crate::special::chi_squared_sf;
use crate::stats::SufficientStats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofCell {
    pub component: String,
    pub cell: String,
    pub observed: f64,
    pub expected: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofSummary {
    pub x2: f64,
    pub df: i64,
    /// `None` when `df < 1`.
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub summary: GofSummary,
    pub cells: Vec<GofCell>,
}

#[derive(Default)]
struct Table {
    cells: Vec<GofCell>,
    multinomials: usize,
}

impl Table {
    fn push(&mut self, component: &str, cell: String, observed: f64, expected: f64) {
        let contribution = if expected > 0.0 {
            (observed - expected).powi(2) / expected
        } else if observed > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        self.cells.push(GofCell {
            component: component.into(),
            cell,
            observed,
            expected,
            contribution,
        });
    }

    fn finish(self, free_params: usize) -> GofReport {
        let x2: f64 = self.cells.iter().map(|c| c.contribution).sum();
        let informative = self.cells.iter().filter(|c| c.expected > 0.0).count();
        let df = informative as i64 - self.multinomials as i64 - free_params as i64;
        let p_value = (df >= 1).then(|| chi_squared_sf(x2, df as usize));
        GofReport {
            summary: GofSummary { x2, df, p_value },
            cells: self.cells,
        }
    }
}

fn markov_table(stats: &SufficientStats, probs: &PartialHistoryProbs, n_hat: f64) -> Table {
    let (t_max, r_max) = (stats.occasions, stats.states);
    let mut table = Table::default();

    table.multinomials += 1;
    for t in 0..t_max {
        for r in 0..r_max {
            let e = n_hat * probs.zeta[t * r_max + r];
            table.push("first", format!("z({},{})", t + 1, r + 1), stats.z(t, r) as f64, e);
        }
    }
    table.push("first", "unseen".into(), n_hat - stats.n as f64, n_hat * probs.rho);

    for t1 in 0..t_max.saturating_sub(1) {
        for r in 0..r_max {
            let m = stats.inflow(t1, r) as f64;
            if m == 0.0 {
                continue;
            }
            table.multinomials += 1;
            for t2 in t1 + 1..t_max {
                for s in 0..r_max {
                    let e = m * probs.recapture.get(t1, t2, r, s);
                    let o = stats.pair(t1, t2, r, s) as f64;
                    table.push("recapture", format!("n({},{},{},{})", t1 + 1, t2 + 1, r + 1, s + 1), o, e);
                }
            }
            let e = m * probs.chi[t1 * r_max + r];
            table.push("recapture", format!("v({},{})", t1 + 1, r + 1), stats.v(t1, r) as f64, e);
        }
    }
    table
}

fn ln_choose(n: usize, k: usize) -> f64 {
    (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
}

/// Pearson statistic for `model` at detection parameters `theta` (no `nu`)
/// and population estimate `n_hat`.
pub fn pearson_gof_at(
    stats: &SufficientStats,
    model: &ModelSpec,
    theta: &[f64],
    n_hat: f64,
    free_params: usize,
) -> Result<GofReport> {
    model.check_data(stats)?;
    if let Some(params) = model.markov_params(theta, stats.occasions, n_hat) {
        let collapsed;
        let data = if model.is_multi_state() {
            stats
        } else {
            collapsed = stats.collapse_states();
            &collapsed
        };
        let probs = PartialHistoryProbs::new(&params);
        return Ok(markov_table(data, &probs, n_hat).finish(free_params));
    }
    let ss = model.ss_params(theta).expect("non-Markov models are single-state");
    let t_max = stats.occasions;
    let mut table = Table { multinomials: 1, ..Table::default() };
    let pi = |j: usize| ss.history_prob_by_captures(j, t_max).unwrap_or(f64::NAN);
    table.push("frequency", "f(0)".into(), n_hat - stats.n as f64, n_hat * pi(0));
    for j in 1..=t_max {
        let e = n_hat * (ln_choose(t_max, j).exp() * pi(j));
        table.push("frequency", format!("f({j})"), stats.single.f[j - 1] as f64, e);
    }
    Ok(table.finish(free_params))
}

/// Goodness of fit at a fitted model. `N` counts as a free parameter for
/// both approaches.
pub fn pearson_gof(fit: &FitResult, stats: &SufficientStats) -> Result<GofReport> {
    let detection = fit.model.detection_count(stats.occasions);
    pearson_gof_at(stats, &fit.model, &fit.working[..detection], fit.n_hat, detection + 1)
}

impl GofReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["component", "cell", "observed", "expected", "contribution"])?;
        for c in &self.cells {
            w.write_record([
                c.component.clone(),
                c.cell.clone(),
                c.observed.to_string(),
                c.expected.to_string(),
                c.contribution.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
