//! Encounter histories and the text format they are read from.
//!
//! One history per line, entries separated by whitespace or commas. `0` means
//! not captured, `r` means captured in state `r`. When there are at most nine
//! states a compact form without separators (`100320`) is accepted as well.
//! Blank lines and lines starting with `#` are ignored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single individual's record over all occasions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EncounterHistory(Vec<u32>);

impl EncounterHistory {
    pub fn new(entries: Vec<u32>) -> Self {
        Self(entries)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn captures(&self) -> usize {
        self.0.iter().filter(|&&x| x != 0).count()
    }

    /// Index of the first nonzero entry.
    pub fn first_capture(&self) -> Option<usize> {
        self.0.iter().position(|&x| x != 0)
    }

    /// Same history with every state label replaced by 1.
    pub fn without_states(&self) -> Self {
        Self(self.0.iter().map(|&x| u32::from(x != 0)).collect())
    }
}

impl std::fmt::Display for EncounterHistory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut first = true;
        for x in &self.0 {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{x}")?;
            first = false;
        }
        Ok(())
    }
}

/// A validated set of observed histories sharing `occasions` and `states`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    #[serde(rename = "T")]
    occasions: usize,
    #[serde(rename = "R")]
    states: usize,
    n: usize,
    histories: Vec<EncounterHistory>,
}

impl Dataset {
    /// Validates and wraps histories. `occasions` is taken from the first history.
    pub fn new(histories: Vec<EncounterHistory>, states: usize) -> Result<Self> {
        if states == 0 {
            return Err(Error::NoStates);
        }
        let first = histories.first().ok_or(Error::EmptyInput)?;
        let occasions = first.len();
        for (i, h) in histories.iter().enumerate() {
            let line = i + 1;
            if h.len() != occasions {
                return Err(Error::RaggedRow {
                    line,
                    expected: occasions,
                    found: h.len(),
                });
            }
            if let Some(&bad) = h.entries().iter().find(|&&x| x as usize > states) {
                return Err(Error::StateOutOfRange {
                    line,
                    value: bad as i64,
                    max_state: states,
                });
            }
            if h.captures() == 0 {
                return Err(Error::AllZeroRow { line });
            }
        }
        Ok(Self {
            occasions,
            states,
            n: histories.len(),
            histories,
        })
    }

    pub fn occasions(&self) -> usize {
        self.occasions
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn histories(&self) -> &[EncounterHistory] {
        &self.histories
    }

    /// Collapses every state to a single one.
    pub fn without_states(&self) -> Self {
        Self {
            occasions: self.occasions,
            states: 1,
            n: self.n,
            histories: self.histories.iter().map(|h| h.without_states()).collect(),
        }
    }

    /// Writes the whitespace-separated text form, one history per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for h in &self.histories {
            out.push_str(&h.to_string());
            out.push('\n');
        }
        out
    }
}

/// Parses the text format described in the module docs.
pub fn parse_dataset(text: &str, states: usize) -> Result<Dataset> {
    if states == 0 {
        return Err(Error::NoStates);
    }
    let mut histories = Vec::new();
    let mut expected: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        let entries = if tokens.len() == 1 && tokens[0].len() > 1 && states <= 9 {
            tokens[0]
                .chars()
                .map(|c| {
                    c.to_digit(10).ok_or_else(|| Error::BadToken {
                        line,
                        token: c.to_string(),
                    })
                })
                .collect::<Result<Vec<u32>>>()?
        } else {
            tokens
                .iter()
                .map(|tok| parse_entry(tok, line, states))
                .collect::<Result<Vec<u32>>>()?
        };
        if let Some(&bad) = entries.iter().find(|&&x| x as usize > states) {
            return Err(Error::StateOutOfRange {
                line,
                value: bad as i64,
                max_state: states,
            });
        }
        match expected {
            None => expected = Some(entries.len()),
            Some(t) if t != entries.len() => {
                return Err(Error::RaggedRow {
                    line,
                    expected: t,
                    found: entries.len(),
                })
            }
            _ => {}
        }
        if entries.iter().all(|&x| x == 0) {
            return Err(Error::AllZeroRow { line });
        }
        histories.push(EncounterHistory::new(entries));
    }
    Dataset::new(histories, states)
}

fn parse_entry(tok: &str, line: usize, states: usize) -> Result<u32> {
    let value: i64 = tok.parse().map_err(|_| Error::BadToken {
        line,
        token: tok.to_string(),
    })?;
    if value < 0 || value as u64 > states as u64 {
        return Err(Error::StateOutOfRange {
            line,
            value,
            max_state: states,
        });
    }
    Ok(value as u32)
}

/// Largest state label appearing in the text, for callers that do not know `R` up front.
pub fn infer_states(text: &str) -> usize {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .flat_map(|l| {
            let tokens: Vec<&str> = l
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect();
            if tokens.len() == 1 && tokens[0].len() > 1 {
                tokens[0]
                    .chars()
                    .filter_map(|c| c.to_digit(10))
                    .map(|d| d as usize)
                    .collect::<Vec<_>>()
            } else {
                tokens.iter().filter_map(|t| t.parse::<usize>().ok()).collect()
            }
        })
        .max()
        .unwrap_or(0)
        .max(1)
}
