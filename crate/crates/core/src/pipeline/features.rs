use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::cohort::{Episode, Race};
use crate::featurizer::{
    concat_notes, embed_text, load_precomputed_embeddings, EmbeddingSpec, FeaturizerError,
    NoteEmbedding, PrecomputedEmbeddings, Summarizer, SummarizerConfig,
};
use crate::model::{Example, ModelInput};
use crate::temporal::aggregate_at;

/// How episodes become model inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturizeConfig {
    pub embedding: EmbeddingSpec,
    pub summarizer: SummarizerConfig,
    /// CSV of externally computed note and summary vectors; replaces the
    /// hashed featurizer when set.
    pub precomputed_embeddings: Option<PathBuf>,
}

impl FeaturizeConfig {
    /// Width `b` of every text vector.
    pub fn text_dim(&self) -> usize {
        self.embedding.dim
    }
}

/// Everything about one episode that does not depend on the decay rate or
/// on training statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeFeatures {
    pub episode_id: String,
    pub label: u8,
    pub race: Race,
    pub vitals: Vec<Vec<f64>>,
    pub mask: Vec<Vec<u8>>,
    pub notes: Vec<NoteEmbedding>,
    /// `None` when the summary vector came from a precomputed file.
    pub summary_text: Option<String>,
    pub summary: Vec<f64>,
}

/// Embeds notes and summaries. Episodes without a stored summary get one
/// from the configured summarizer applied to their concatenated notes.
pub fn featurize_cohort(
    episodes: &[Episode],
    config: &FeaturizeConfig,
) -> Result<Vec<EpisodeFeatures>, PipelineError> {
    config.embedding.validate()?;
    let summarizer = Summarizer::new(config.summarizer.clone())?;
    let precomputed = match &config.precomputed_embeddings {
        Some(p) => Some(load_precomputed_embeddings(p, Some(config.embedding.dim))?),
        None => None,
    };
    episodes
        .iter()
        .map(|e| featurize_episode(e, config, &summarizer, precomputed.as_ref()))
        .collect()
}

fn featurize_episode(
    e: &Episode,
    config: &FeaturizeConfig,
    summarizer: &Summarizer,
    precomputed: Option<&PrecomputedEmbeddings>,
) -> Result<EpisodeFeatures, PipelineError> {
    let (notes, summary_text, summary) = match precomputed {
        None => {
            let notes = e
                .notes
                .iter()
                .map(|n| NoteEmbedding {
                    vector: embed_text(&n.text, &config.embedding),
                    chart_time: n.chart_time,
                })
                .collect();
            let text = match &e.expert_summary {
                Some(s) => s.clone(),
                None => summarizer.summarize(
                    &e.episode_id,
                    &concat_notes(&e.notes, summarizer.max_input_tokens()),
                )?,
            };
            let vec = embed_text(&text, &config.embedding);
            (notes, Some(text), vec)
        }
        Some(pre) => {
            let missing = |what: String| {
                PipelineError::Featurize(FeaturizerError::Row {
                    path: "precomputed embeddings".into(),
                    row: 0,
                    reason: format!("episode `{}` has no {what}", e.episode_id),
                })
            };
            let entry = pre
                .episodes
                .get(&e.episode_id)
                .ok_or_else(|| missing("rows".into()))?;
            let notes = (0..e.notes.len())
                .map(|i| {
                    entry
                        .notes
                        .get(&i)
                        .cloned()
                        .ok_or_else(|| missing(format!("note {i}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let summary = entry
                .summary
                .clone()
                .ok_or_else(|| missing("summary row".into()))?;
            (notes, None, summary)
        }
    };
    Ok(EpisodeFeatures {
        episode_id: e.episode_id.clone(),
        label: e.label,
        race: e.demographics.race,
        vitals: e.vitals.clone(),
        mask: e.mask.clone(),
        notes,
        summary_text,
        summary,
    })
}

/// Per-channel z-scoring fitted on training episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Statistics over every hourly cell of `episodes`. Channels with zero
    /// spread get unit scale.
    pub fn fit<'a>(episodes: impl IntoIterator<Item = &'a EpisodeFeatures>) -> Self {
        let mut count = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        for e in episodes {
            for row in &e.vitals {
                if sum.is_empty() {
                    sum = vec![0.0; row.len()];
                    sq = vec![0.0; row.len()];
                }
                for (j, &v) in row.iter().enumerate() {
                    sum[j] += v;
                    sq[j] += v * v;
                }
                count += 1;
            }
        }
        let n = count.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / n - m * m).max(0.0);
                if var > 1e-12 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    /// Standardized vitals followed by the mask, one row per hour.
    pub fn lstm_input(&self, e: &EpisodeFeatures) -> Vec<Vec<f64>> {
        e.vitals
            .iter()
            .zip(&e.mask)
            .map(|(v, m)| {
                v.iter()
                    .zip(self.mean.iter().zip(&self.std))
                    .map(|(x, (mu, sd))| (x - mu) / sd)
                    .chain(m.iter().map(|&b| f64::from(b)))
                    .collect()
            })
            .collect()
    }
}

/// Model inputs at fusion time `hours`; `U` is the zero vector when no note
/// is available by then.
pub fn build_example(
    e: &EpisodeFeatures,
    standardizer: &Standardizer,
    lambda: f64,
    hours: usize,
    dim: usize,
) -> Example {
    let u = aggregate_at(&e.notes, hours as f64, lambda, dim).unwrap_or_else(|| vec![0.0; dim]);
    Example {
        input: ModelInput {
            x: Some(standardizer.lstm_input(e)),
            u: Some(u),
            v: Some(e.summary.clone()),
        },
        label: e.label,
    }
}
