use serde::{Deserialize, Serialize};

use super::{split_cohort, CohortError, Episode, RawEpisode, SplitFractions, VitalsSpec, HOURS};

/// A single timestamped bedside measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMeasurement {
    /// Hours since ICU admission, in `[0, 48)`.
    pub time: f64,
    pub channel: String,
    pub value: f64,
}

/// What to do with a measurement outside its channel's plausible range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutOfRangePolicy {
    /// Truncate to the nearest bound; the cell still counts as observed.
    #[default]
    Clamp,
    /// Discard the measurement (strict mode).
    Drop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HourlyVitals {
    pub vitals: Vec<Vec<f64>>,
    pub mask: Vec<Vec<u8>>,
}

impl HourlyVitals {
    /// Emits one measurement per observed cell at the middle of its hour.
    /// Feeding the result back through the same preprocessor reproduces `self`.
    pub fn flatten(&self, spec: &VitalsSpec) -> Vec<RawMeasurement> {
        let mut out = Vec::new();
        for (t, (row, mrow)) in self.vitals.iter().zip(&self.mask).enumerate() {
            for (j, (&v, &m)) in row.iter().zip(mrow).enumerate() {
                if m == 1 {
                    out.push(RawMeasurement {
                        time: t as f64 + 0.5,
                        channel: spec.channels()[j].name.clone(),
                        value: v,
                    });
                }
            }
        }
        out
    }
}

/// Hourly aggregation with range handling and imputation.
///
/// Cell `(t, j)` is the mean of channel-`j` values with time in `[t, t+1)`.
/// Unobserved cells take the last observed value of the same channel; cells
/// before the first observation take the channel's training-set mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    spec: VitalsSpec,
    policy: OutOfRangePolicy,
    channel_means: Vec<f64>,
}

impl Preprocessor {
    pub fn new(
        spec: VitalsSpec,
        policy: OutOfRangePolicy,
        channel_means: Vec<f64>,
    ) -> Result<Self, CohortError> {
        if channel_means.len() != spec.len() {
            return Err(CohortError::Spec(format!(
                "{} channel means for {} channels",
                channel_means.len(),
                spec.len()
            )));
        }
        for (m, c) in channel_means.iter().zip(spec.channels()) {
            if !m.is_finite() || *m < c.plausible_min || *m > c.plausible_max {
                return Err(CohortError::Spec(format!(
                    "fallback mean {m} for `{}` outside its plausible range",
                    c.name
                )));
            }
        }
        Ok(Self {
            spec,
            policy,
            channel_means,
        })
    }

    /// Fits fallback means as the average of observed hourly cells over the
    /// training episodes. A channel never observed in training falls back to
    /// the midpoint of its plausible range.
    pub fn fit(
        spec: VitalsSpec,
        policy: OutOfRangePolicy,
        training: &[&[RawMeasurement]],
    ) -> Result<Self, CohortError> {
        let d = spec.len();
        let mut sum = vec![0.0; d];
        let mut count = vec![0usize; d];
        for raw in training {
            let cells = hourly_means(&spec, policy, raw)?;
            for row in &cells {
                for (j, cell) in row.iter().enumerate() {
                    if let Some(v) = cell {
                        sum[j] += v;
                        count[j] += 1;
                    }
                }
            }
        }
        let means = spec
            .channels()
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if count[j] == 0 {
                    0.5 * (c.plausible_min + c.plausible_max)
                } else {
                    (sum[j] / count[j] as f64).clamp(c.plausible_min, c.plausible_max)
                }
            })
            .collect();
        Self::new(spec, policy, means)
    }

    pub fn spec(&self) -> &VitalsSpec {
        &self.spec
    }

    pub fn channel_means(&self) -> &[f64] {
        &self.channel_means
    }

    pub fn preprocess(&self, raw: &[RawMeasurement]) -> Result<HourlyVitals, CohortError> {
        let cells = hourly_means(&self.spec, self.policy, raw)?;
        let d = self.spec.len();
        let mut vitals = vec![vec![0.0; d]; HOURS];
        let mut mask = vec![vec![0u8; d]; HOURS];
        for j in 0..d {
            let mut carry = self.channel_means[j];
            for t in 0..HOURS {
                if let Some(v) = cells[t][j] {
                    carry = v;
                    mask[t][j] = 1;
                }
                vitals[t][j] = carry;
            }
        }
        Ok(HourlyVitals { vitals, mask })
    }
}

/// Per-cell means of in-range (or clamped) values; `None` where nothing was
/// recorded.
fn hourly_means(
    spec: &VitalsSpec,
    policy: OutOfRangePolicy,
    raw: &[RawMeasurement],
) -> Result<Vec<Vec<Option<f64>>>, CohortError> {
    let d = spec.len();
    let mut sum = vec![vec![0.0; d]; HOURS];
    let mut count = vec![vec![0usize; d]; HOURS];
    for m in raw {
        let j = spec
            .index_of(&m.channel)
            .ok_or_else(|| CohortError::UnknownChannel(m.channel.clone()))?;
        if !m.value.is_finite() {
            return Err(CohortError::NonFinite {
                channel: m.channel.clone(),
                time: m.time,
            });
        }
        if !(m.time >= 0.0 && m.time < HOURS as f64) {
            return Err(CohortError::TimeOutOfWindow(m.time));
        }
        let c = &spec.channels()[j];
        let in_range = m.value >= c.plausible_min && m.value <= c.plausible_max;
        let value = match (in_range, policy) {
            (true, _) => m.value,
            (false, OutOfRangePolicy::Clamp) => m.value.clamp(c.plausible_min, c.plausible_max),
            (false, OutOfRangePolicy::Drop) => continue,
        };
        let t = m.time.floor() as usize;
        sum[t][j] += value;
        count[t][j] += 1;
    }
    Ok(sum
        .into_iter()
        .zip(count)
        .map(|(srow, crow)| {
            srow.into_iter()
                .zip(crow)
                .map(|(s, n)| (n > 0).then(|| s / n as f64))
                .collect()
        })
        .collect())
}

/// Turns raw episodes into hourly episodes. Fallback means are fitted on the
/// training portion of `split_cohort(raw, fractions, seed)` so that the same
/// seed later yields a split whose training set produced the imputation.
pub fn preprocess_cohort(
    raw: &[RawEpisode],
    spec: &VitalsSpec,
    policy: OutOfRangePolicy,
    fractions: SplitFractions,
    seed: u64,
) -> Result<Vec<Episode>, CohortError> {
    let ids: Vec<&str> = raw.iter().map(|e| e.episode_id.as_str()).collect();
    let split = split_cohort(&ids, fractions, seed)?;
    let train_ids: std::collections::HashSet<&str> =
        split.train.iter().map(String::as_str).collect();
    let training: Vec<&[RawMeasurement]> = raw
        .iter()
        .filter(|e| train_ids.contains(e.episode_id.as_str()))
        .map(|e| e.measurements.as_slice())
        .collect();
    let pre = Preprocessor::fit(spec.clone(), policy, &training)?;
    raw.iter()
        .map(|e| {
            let hv = pre
                .preprocess(&e.measurements)
                .map_err(|err| CohortError::Invalid {
                    id: e.episode_id.clone(),
                    reason: err.to_string(),
                })?;
            let episode = Episode {
                episode_id: e.episode_id.clone(),
                vitals: hv.vitals,
                mask: hv.mask,
                notes: e.notes.clone(),
                expert_summary: e.expert_summary.clone(),
                label: e.label,
                demographics: e.demographics.clone(),
            };
            episode
                .validate(spec)
                .map_err(|kind| CohortError::Invalid {
                    id: e.episode_id.clone(),
                    reason: kind.to_string(),
                })?;
            Ok(episode)
        })
        .collect()
}
