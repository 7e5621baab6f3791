//! Episode data model, on-disk cohort format, hourly preprocessing, splits and
//! a synthetic cohort generator.

mod io;
mod preprocess;
mod split;
mod synthetic;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_cohort, read_jsonl, save_cohort, LoadOptions, LoadedCohort, RawEpisode};
pub use preprocess::{
    preprocess_cohort, HourlyVitals, OutOfRangePolicy, Preprocessor, RawMeasurement,
};
pub use split::{split_cohort, CohortSplit, SplitFractions};
pub use synthetic::{generate_synthetic, DemographicMarginals, GeneratorConfig};

/// Number of hourly time steps in an episode.
pub const HOURS: usize = 48;

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("line {line}: {kind}")]
    Line { line: usize, kind: LineError },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid vitals spec: {0}")]
    Spec(String),
    #[error("unknown vitals channel `{0}`")]
    UnknownChannel(String),
    #[error("non-finite value for channel `{channel}` at time {time}")]
    NonFinite { channel: String, time: f64 },
    #[error("measurement time {0} outside [0, {HOURS})")]
    TimeOutOfWindow(f64),
    #[error("invalid split: {0}")]
    Split(String),
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("prevalence calibration failed: {0}")]
    Calibration(String),
    #[error("episode `{id}`: {reason}")]
    Invalid { id: String, reason: String },
}

/// Reasons a single JSONL line is rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LineError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("negative chart_time {0}")]
    NegativeChartTime(f64),
    #[error("unknown race `{0}`")]
    UnknownRace(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("{0}")]
    Invariant(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VitalChannel {
    pub name: String,
    pub plausible_min: f64,
    pub plausible_max: f64,
    pub unit: String,
}

/// Ordered set of vital-sign channels with their truncation bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VitalsSpec {
    channels: Vec<VitalChannel>,
}

impl VitalsSpec {
    pub fn new(channels: Vec<VitalChannel>) -> Result<Self, CohortError> {
        if channels.is_empty() {
            return Err(CohortError::Spec("no channels".into()));
        }
        for (i, c) in channels.iter().enumerate() {
            if c.plausible_min.partial_cmp(&c.plausible_max) != Some(std::cmp::Ordering::Less) {
                return Err(CohortError::Spec(format!(
                    "channel `{}`: plausible_min must be below plausible_max",
                    c.name
                )));
            }
            if channels[..i].iter().any(|o| o.name == c.name) {
                return Err(CohortError::Spec(format!("duplicate channel `{}`", c.name)));
            }
        }
        Ok(Self { channels })
    }

    /// The ten bedside variables used for mortality prediction.
    pub fn standard() -> Self {
        let ch = |name: &str, lo: f64, hi: f64, unit: &str| VitalChannel {
            name: name.to_string(),
            plausible_min: lo,
            plausible_max: hi,
            unit: unit.to_string(),
        };
        Self::new(vec![
            ch("diastolic_bp", 0.0, 250.0, "mmHg"),
            ch("systolic_bp", 0.0, 300.0, "mmHg"),
            ch("mean_bp", 0.0, 300.0, "mmHg"),
            ch("heart_rate", 0.0, 300.0, "bpm"),
            ch("temperature", 25.0, 45.0, "C"),
            ch("respiratory_rate", 0.0, 100.0, "breaths/min"),
            ch("spo2", 0.0, 100.0, "%"),
            ch("fio2", 0.21, 1.0, "fraction"),
            ch("ph", 6.3, 8.0, "pH"),
            ch("glucose", 0.0, 2000.0, "mg/dL"),
        ])
        .expect("standard spec is valid")
    }

    pub fn channels(&self) -> &[VitalChannel] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.name == name)
    }
}

impl Default for VitalsSpec {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteEvent {
    /// Hours since ICU admission.
    pub chart_time: f64,
    pub text: String,
    pub category: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

/// Race groups as reported for the source cohort, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Race {
    White,
    Other,
    BlackAfricanAmerican,
    HispanicLatino,
    Asian,
    DeclinedToAnswer,
}

impl Race {
    pub const ALL: [Race; 6] = [
        Race::White,
        Race::Other,
        Race::BlackAfricanAmerican,
        Race::HispanicLatino,
        Race::Asian,
        Race::DeclinedToAnswer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Race::White => "white",
            Race::Other => "other",
            Race::BlackAfricanAmerican => "black_african_american",
            Race::HispanicLatino => "hispanic_latino",
            Race::Asian => "asian",
            Race::DeclinedToAnswer => "declined_to_answer",
        }
    }
}

impl fmt::Display for Race {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Race {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Race::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub age: f64,
    pub sex: Sex,
    pub race: Race,
}

/// One ICU stay: hourly vitals with observation mask, timed notes, optional
/// expert summary, outcome label and demographics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub episode_id: String,
    /// `HOURS` rows of `d` hourly averages.
    pub vitals: Vec<Vec<f64>>,
    /// Same shape as `vitals`; 1 where at least one measurement existed.
    pub mask: Vec<Vec<u8>>,
    pub notes: Vec<NoteEvent>,
    pub expert_summary: Option<String>,
    pub label: u8,
    pub demographics: Demographics,
}

impl Episode {
    /// Checks the shape, label, note and range invariants against `spec`.
    pub fn validate(&self, spec: &VitalsSpec) -> Result<(), LineError> {
        let d = spec.len();
        if self.episode_id.is_empty() {
            return Err(LineError::Invariant("empty episode_id".into()));
        }
        check_matrix_shape("vitals", self.vitals.iter().map(Vec::len), d)?;
        check_matrix_shape("mask", self.mask.iter().map(Vec::len), d)?;
        for (t, row) in self.vitals.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let c = &spec.channels()[j];
                if !v.is_finite() {
                    return Err(LineError::Invariant(format!(
                        "non-finite vitals value at hour {t}, channel `{}`",
                        c.name
                    )));
                }
                if v < c.plausible_min || v > c.plausible_max {
                    return Err(LineError::Invariant(format!(
                        "vitals value {v} at hour {t} outside [{}, {}] for `{}`",
                        c.plausible_min, c.plausible_max, c.name
                    )));
                }
            }
        }
        if self.mask.iter().flatten().any(|&m| m > 1) {
            return Err(LineError::Invariant("mask entries must be 0 or 1".into()));
        }
        if self.label > 1 {
            return Err(LineError::Invariant(format!(
                "label must be 0 or 1, got {}",
                self.label
            )));
        }
        for note in &self.notes {
            if !note.chart_time.is_finite() {
                return Err(LineError::Invariant("non-finite chart_time".into()));
            }
            if note.chart_time < 0.0 {
                return Err(LineError::NegativeChartTime(note.chart_time));
            }
            if note.chart_time > HOURS as f64 {
                return Err(LineError::Invariant(format!(
                    "chart_time {} beyond the {HOURS}-hour window",
                    note.chart_time
                )));
            }
            if note.text.trim().is_empty() {
                return Err(LineError::Invariant("empty note text".into()));
            }
        }
        if !self.demographics.age.is_finite() {
            return Err(LineError::Invariant("non-finite age".into()));
        }
        Ok(())
    }
}

fn check_matrix_shape(
    what: &str,
    mut row_lens: impl ExactSizeIterator<Item = usize>,
    d: usize,
) -> Result<(), LineError> {
    let rows = row_lens.len();
    if rows != HOURS {
        return Err(LineError::Shape(format!(
            "{what} has {rows} rows, expected T={HOURS}"
        )));
    }
    if let Some((t, len)) = row_lens.by_ref().enumerate().find(|(_, l)| *l != d) {
        return Err(LineError::Shape(format!(
            "{what} row {t} has {len} columns, expected d={d}"
        )));
    }
    Ok(())
}

/// Finding and filler phrases written by the synthetic generator.
#[cfg(test)]
pub(crate) fn synthetic_phrases() -> (Vec<&'static str>, Vec<&'static str>) {
    (
        synthetic::finding_phrases().collect(),
        synthetic::filler_phrases().collect(),
    )
}

/// Fraction of positive labels.
pub fn prevalence(episodes: &[Episode]) -> f64 {
    if episodes.is_empty() {
        return 0.0;
    }
    episodes.iter().filter(|e| e.label == 1).count() as f64 / episodes.len() as f64
}
