//! Alignment of discrete note embeddings with the hourly grid.
//!
//! At hour `t` the notes charted at or before `t` are averaged with weights
//! `exp(-lambda * (t - chart_time))`. Hours with no available note get a zero
//! row and a cleared availability flag. The summary embedding is constant in
//! time and stored once.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurizer::NoteEmbedding;

#[derive(Debug, Error, PartialEq)]
pub enum TemporalError {
    #[error("decay rate must be finite and non-negative, got {0}")]
    InvalidLambda(f64),
    #[error("lambda grid is empty")]
    EmptyGrid,
    #[error("summary embedding has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("summary embedding has a non-finite entry at {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    /// Decay rate per hour.
    pub lambda: f64,
    /// Candidates for validation-set selection.
    pub grid: Vec<f64>,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            grid: vec![0.0, 0.01, 0.05, 0.1, 0.5, 1.0],
        }
    }
}

impl DecayConfig {
    pub fn validate(&self) -> Result<(), TemporalError> {
        check_lambda(self.lambda)?;
        if self.grid.is_empty() {
            return Err(TemporalError::EmptyGrid);
        }
        self.grid.iter().try_for_each(|&l| check_lambda(l))
    }
}

fn check_lambda(lambda: f64) -> Result<(), TemporalError> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(TemporalError::InvalidLambda(lambda))
    }
}

/// `exp(-lambda * (t - chart_time))`.
///
/// Panics if the note lies in the future (`chart_time > t`) or `lambda < 0`;
/// callers filter notes by availability first.
pub fn decay_weight(t: f64, chart_time: f64, lambda: f64) -> f64 {
    assert!(
        chart_time <= t,
        "note charted at {chart_time} is not available at {t}"
    );
    assert!(lambda >= 0.0, "negative decay rate {lambda}");
    (-lambda * (t - chart_time)).exp()
}

/// Hourly aggregated note representation.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedText {
    /// Row `t - 1` holds the aggregate at hour `t`, for `t = 1..=T`.
    pub u: Vec<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    /// 1 where at least one note was available.
    pub availability: Vec<u8>,
}

fn chronological(embeddings: &[NoteEmbedding]) -> Vec<&NoteEmbedding> {
    let mut sorted: Vec<&NoteEmbedding> = embeddings.iter().collect();
    sorted.sort_by(|a, b| a.chart_time.total_cmp(&b.chart_time));
    sorted
}

fn aggregate_sorted(
    sorted: &[&NoteEmbedding],
    t: f64,
    lambda: f64,
    dim: usize,
) -> Option<Vec<f64>> {
    let mut acc = vec![0.0; dim];
    let mut m = 0usize;
    for note in sorted.iter().take_while(|n| n.chart_time <= t) {
        let w = decay_weight(t, note.chart_time, lambda);
        for (a, x) in acc.iter_mut().zip(&note.vector) {
            *a += w * x;
        }
        m += 1;
    }
    if m == 0 {
        return None;
    }
    let inv = 1.0 / m as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    Some(acc)
}

/// Aggregate at a single hour `t`; `None` when no note is available yet.
pub fn aggregate_at(
    embeddings: &[NoteEmbedding],
    t: f64,
    lambda: f64,
    dim: usize,
) -> Option<Vec<f64>> {
    aggregate_sorted(&chronological(embeddings), t, lambda, dim)
}

/// Aggregates for every hour `t = 1..=hours`. Summation runs in ascending
/// chart time so results are bit-reproducible.
pub fn aggregate_notes(
    embeddings: &[NoteEmbedding],
    hours: usize,
    lambda: f64,
    dim: usize,
) -> AlignedText {
    let sorted = chronological(embeddings);
    let mut u = Vec::with_capacity(hours);
    let mut availability = Vec::with_capacity(hours);
    for t in 1..=hours {
        match aggregate_sorted(&sorted, t as f64, lambda, dim) {
            Some(row) => {
                u.push(row);
                availability.push(1);
            }
            None => {
                u.push(vec![0.0; dim]);
                availability.push(0);
            }
        }
    }
    AlignedText {
        u,
        v: None,
        availability,
    }
}

/// Validates a summary embedding; it is used unchanged at every hour.
pub fn align_summary(summary: &[f64], dim: usize) -> Result<Vec<f64>, TemporalError> {
    if summary.len() != dim {
        return Err(TemporalError::LengthMismatch {
            expected: dim,
            found: summary.len(),
        });
    }
    if let Some(i) = summary.iter().position(|x| !x.is_finite()) {
        return Err(TemporalError::NonFinite(i));
    }
    Ok(summary.to_vec())
}

/// Picks the grid value with the highest score; ties go to the smaller decay
/// rate.
pub fn tune_lambda<E, F>(grid: &[f64], mut score: F) -> Result<f64, E>
where
    E: From<TemporalError>,
    F: FnMut(f64) -> Result<f64, E>,
{
    if grid.is_empty() {
        return Err(TemporalError::EmptyGrid.into());
    }
    grid.iter().try_for_each(|&l| check_lambda(l))?;
    let mut candidates = grid.to_vec();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut best: Option<(f64, f64)> = None;
    for lambda in candidates {
        let s = score(lambda)?;
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((lambda, s));
        }
    }
    Ok(best.expect("non-empty grid").0)
}
