//! Minimal sufficient statistics of a dataset.
//!
//! Occasion and state indices are zero-based in memory. The JSON form uses
//! one-based labels so it reads like the data file.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;

/// Key of a recapture cell: seen at `t1` in state `from`, next seen at `t2` in state `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairKey {
    pub t1: usize,
    pub t2: usize,
    pub from: usize,
    pub to: usize,
}

/// Reductions that ignore state labels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SingleStateStats {
    /// `f_j` for `j = 1..=T`: individuals captured on exactly `j` occasions.
    pub f: Vec<u64>,
    /// `n_t`: individuals captured at occasion `t`.
    pub n_t: Vec<u64>,
    /// `z_t`: individuals first captured at occasion `t`.
    pub z_t: Vec<u64>,
    pub n: u64,
    /// Total capture events before first capture, `sum (t - 1) z_t`.
    pub y: u64,
    /// Total number of captures.
    pub f_total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "StatsJson", try_from = "StatsJson")]
pub struct SufficientStats {
    pub occasions: usize,
    pub states: usize,
    pub n: usize,
    /// First captures, `z[t * R + r]`.
    pub first: Vec<u64>,
    /// Nonzero successive-capture counts.
    pub pairs: BTreeMap<PairKey, u64>,
    /// Last captures before the final occasion, `v[t * R + r]` for `t < T - 1`.
    pub last: Vec<u64>,
    pub single: SingleStateStats,
}

impl SufficientStats {
    pub fn from_dataset(d: &Dataset) -> Self {
        let occasions = d.occasions();
        let states = d.states();
        let mut first = vec![0u64; occasions * states];
        let mut last = vec![0u64; occasions.saturating_sub(1) * states];
        let mut pairs: BTreeMap<PairKey, u64> = BTreeMap::new();
        let mut single = SingleStateStats {
            f: vec![0; occasions],
            n_t: vec![0; occasions],
            z_t: vec![0; occasions],
            ..Default::default()
        };

        for h in d.histories() {
            let mut prev: Option<(usize, usize)> = None;
            for (t, &x) in h.entries().iter().enumerate() {
                if x == 0 {
                    continue;
                }
                let r = x as usize - 1;
                single.n_t[t] += 1;
                match prev {
                    None => {
                        first[t * states + r] += 1;
                        single.z_t[t] += 1;
                        single.y += t as u64;
                    }
                    Some((t1, from)) => {
                        *pairs
                            .entry(PairKey {
                                t1,
                                t2: t,
                                from,
                                to: r,
                            })
                            .or_insert(0) += 1;
                    }
                }
                prev = Some((t, r));
            }
            if let Some((t, r)) = prev {
                if t + 1 < occasions {
                    last[t * states + r] += 1;
                }
            }
            let j = h.captures();
            single.f[j - 1] += 1;
            single.f_total += j as u64;
        }
        single.n = d.n() as u64;

        Self {
            occasions,
            states,
            n: d.n(),
            first,
            pairs,
            last,
            single,
        }
    }

    pub fn z(&self, t: usize, r: usize) -> u64 {
        self.first[t * self.states + r]
    }

    /// `v_t(r)` for `t < T - 1`; the implicit final-occasion count is [`Self::final_captures`].
    pub fn v(&self, t: usize, r: usize) -> u64 {
        self.last[t * self.states + r]
    }

    pub fn pair(&self, t1: usize, t2: usize, from: usize, to: usize) -> u64 {
        self.pairs
            .get(&PairKey { t1, t2, from, to })
            .copied()
            .unwrap_or(0)
    }

    /// Individuals seen at occasion `t` in state `r` (first captures plus arrivals).
    pub fn inflow(&self, t: usize, r: usize) -> u64 {
        let arrivals: u64 = self
            .pairs
            .iter()
            .filter(|(k, _)| k.t2 == t && k.to == r)
            .map(|(_, &c)| c)
            .sum();
        self.z(t, r) + arrivals
    }

    /// Individuals leaving `(t, r)` towards a later capture.
    pub fn outflow_to_recapture(&self, t: usize, r: usize) -> u64 {
        self.pairs
            .iter()
            .filter(|(k, _)| k.t1 == t && k.from == r)
            .map(|(_, &c)| c)
            .sum()
    }

    /// Captured at the last occasion in state `r`: the implicit `v_T(r)`.
    pub fn final_captures(&self, r: usize) -> u64 {
        self.inflow(self.occasions - 1, r)
    }

    /// Dense `n_{t1,t2}(r,s)` view indexed `[t1][t2][r][s]`.
    pub fn dense_pairs(&self) -> Vec<Vec<Vec<Vec<u64>>>> {
        let (t, r) = (self.occasions, self.states);
        let mut out = vec![vec![vec![vec![0u64; r]; r]; t]; t];
        for (k, &c) in &self.pairs {
            out[k.t1][k.t2][k.from][k.to] = c;
        }
        out
    }

    /// The same statistics with all states merged into one.
    pub fn collapse_states(&self) -> Self {
        let (t_max, r_max) = (self.occasions, self.states);
        let first = (0..t_max)
            .map(|t| (0..r_max).map(|r| self.z(t, r)).sum())
            .collect();
        let last = (0..t_max.saturating_sub(1))
            .map(|t| (0..r_max).map(|r| self.v(t, r)).sum())
            .collect();
        let mut pairs = BTreeMap::new();
        for (k, &c) in &self.pairs {
            *pairs
                .entry(PairKey {
                    t1: k.t1,
                    t2: k.t2,
                    from: 0,
                    to: 0,
                })
                .or_insert(0) += c;
        }
        Self {
            occasions: t_max,
            states: 1,
            n: self.n,
            first,
            pairs,
            last,
            single: self.single.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PairJson {
    t1: usize,
    t2: usize,
    r: usize,
    s: usize,
    count: u64,
}

#[derive(Serialize, Deserialize)]
struct StatsJson {
    #[serde(rename = "T")]
    occasions: usize,
    #[serde(rename = "R")]
    states: usize,
    n: usize,
    z: Vec<Vec<u64>>,
    pairs: Vec<PairJson>,
    v: Vec<Vec<u64>>,
    schnabel: SingleStateStats,
}

impl From<SufficientStats> for StatsJson {
    fn from(s: SufficientStats) -> Self {
        let rows = |flat: &[u64]| flat.chunks(s.states.max(1)).map(<[u64]>::to_vec).collect();
        StatsJson {
            occasions: s.occasions,
            states: s.states,
            n: s.n,
            z: rows(&s.first),
            pairs: s
                .pairs
                .iter()
                .map(|(k, &count)| PairJson {
                    t1: k.t1 + 1,
                    t2: k.t2 + 1,
                    r: k.from + 1,
                    s: k.to + 1,
                    count,
                })
                .collect(),
            v: rows(&s.last),
            schnabel: s.single.clone(),
        }
    }
}

impl TryFrom<StatsJson> for SufficientStats {
    type Error = String;

    fn try_from(j: StatsJson) -> Result<Self, String> {
        let (t_max, r_max) = (j.occasions, j.states);
        if j.z.len() != t_max || j.z.iter().any(|row| row.len() != r_max) {
            return Err("z must be T x R".into());
        }
        if j.v.len() != t_max.saturating_sub(1) || j.v.iter().any(|row| row.len() != r_max) {
            return Err("v must be (T-1) x R".into());
        }
        let mut pairs = BTreeMap::new();
        for p in j.pairs {
            if p.t1 == 0 || p.t2 <= p.t1 || p.t2 > t_max || p.r == 0 || p.r > r_max || p.s == 0 || p.s > r_max {
                return Err(format!("pair ({}, {}, {}, {}) out of range", p.t1, p.t2, p.r, p.s));
            }
            pairs.insert(
                PairKey {
                    t1: p.t1 - 1,
                    t2: p.t2 - 1,
                    from: p.r - 1,
                    to: p.s - 1,
                },
                p.count,
            );
        }
        Ok(SufficientStats {
            occasions: t_max,
            states: r_max,
            n: j.n,
            first: j.z.concat(),
            pairs,
            last: j.v.concat(),
            single: j.schnabel,
        })
    }
}
