//! Synthetic ICU cohort generator.
//!
//! Each patient carries two latent severities: `s_v` (expressed through vital
//! sign drift) and `s_x` (expressed only through note vocabulary). Notes also
//! echo part of `s_v`, so text holds both redundant and complementary
//! evidence. The outcome is drawn as
//! `y ~ Bernoulli(sigmoid(w_v * s_v + w_x * s_x + offset))` with the offset
//! found by bisection so the cohort hits the requested prevalence.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{
    preprocess_cohort, CohortError, Demographics, Episode, NoteEvent, OutOfRangePolicy, Race,
    RawEpisode, RawMeasurement, Sex, SplitFractions, VitalsSpec, HOURS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemographicMarginals {
    pub male_fraction: f64,
    pub race: BTreeMap<Race, f64>,
    pub age_median: f64,
    pub age_sd: f64,
    pub age_min: f64,
    pub age_max: f64,
}

impl Default for DemographicMarginals {
    /// Marginals of the 15,337-patient source cohort.
    fn default() -> Self {
        let n = 15_337.0;
        let race = [
            (Race::White, 10_806.0),
            (Race::Other, 2_427.0),
            (Race::BlackAfricanAmerican, 1_120.0),
            (Race::HispanicLatino, 456.0),
            (Race::Asian, 362.0),
            (Race::DeclinedToAnswer, 166.0),
        ]
        .into_iter()
        .map(|(r, c)| (r, c / n))
        .collect();
        Self {
            male_fraction: 8_559.0 / n,
            race,
            age_median: 66.96,
            age_sd: 16.0,
            age_min: 18.08,
            age_max: 90.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub n_patients: usize,
    pub target_prevalence: f64,
    pub seed: u64,
    /// Effect of the vitals severity on the outcome logit.
    pub vitals_signal_weight: f64,
    /// Effect of the text-only severity on the outcome logit; also scales how
    /// strongly notes express severity at all.
    pub text_signal_weight: f64,
    /// Share of note evidence that is complementary (text-only) rather than
    /// an echo of the vitals severity. In `[0, 1]`.
    pub complement_weight: f64,
    /// Mean number of notes per episode (at least one note is always written).
    pub notes_per_episode_rate: f64,
    pub demographics: DemographicMarginals,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_patients: 4000,
            target_prevalence: 0.13,
            seed: 1,
            vitals_signal_weight: 1.0,
            text_signal_weight: 1.5,
            complement_weight: 0.7,
            notes_per_episode_rate: 6.0,
            demographics: DemographicMarginals::default(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), CohortError> {
        let bad = |msg: String| Err(CohortError::Config(msg));
        if self.n_patients < 3 {
            return bad(format!(
                "n_patients must be at least 3, got {}",
                self.n_patients
            ));
        }
        if !(self.target_prevalence > 0.0 && self.target_prevalence < 1.0) {
            return bad(format!(
                "target_prevalence must lie in (0, 1), got {}",
                self.target_prevalence
            ));
        }
        for (name, w) in [
            ("vitals_signal_weight", self.vitals_signal_weight),
            ("text_signal_weight", self.text_signal_weight),
            ("complement_weight", self.complement_weight),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {w}"));
            }
        }
        if self.complement_weight > 1.0 {
            return bad("complement_weight must not exceed 1".into());
        }
        if !(self.notes_per_episode_rate.is_finite() && self.notes_per_episode_rate >= 1.0) {
            return bad("notes_per_episode_rate must be at least 1".into());
        }
        let m = &self.demographics;
        if !(0.0..=1.0).contains(&m.male_fraction) {
            return bad("male_fraction must lie in [0, 1]".into());
        }
        if m.race.values().any(|&p| !(p.is_finite() && p >= 0.0)) {
            return bad("race marginals must be non-negative".into());
        }
        let total: f64 = m.race.values().sum();
        if (total - 1.0).abs() > 1e-6 {
            return bad(format!("race marginals sum to {total}, expected 1"));
        }
        if !(m.age_sd >= 0.0 && m.age_min <= m.age_max) {
            return bad("invalid age distribution".into());
        }
        Ok(())
    }
}

struct ChannelModel {
    name: &'static str,
    mean: f64,
    sd: f64,
    /// Signed drift per unit of vitals severity, in units of `sd`.
    severity_shift: f64,
    /// Expected measurements per hour.
    rate: f64,
}

const CHANNELS: [ChannelModel; 10] = [
    ChannelModel {
        name: "diastolic_bp",
        mean: 62.0,
        sd: 12.0,
        severity_shift: -0.6,
        rate: 1.0,
    },
    ChannelModel {
        name: "systolic_bp",
        mean: 120.0,
        sd: 18.0,
        severity_shift: -0.8,
        rate: 1.0,
    },
    ChannelModel {
        name: "mean_bp",
        mean: 80.0,
        sd: 12.0,
        severity_shift: -0.8,
        rate: 1.0,
    },
    ChannelModel {
        name: "heart_rate",
        mean: 88.0,
        sd: 15.0,
        severity_shift: 0.9,
        rate: 1.2,
    },
    ChannelModel {
        name: "temperature",
        mean: 37.0,
        sd: 0.6,
        severity_shift: 0.4,
        rate: 0.25,
    },
    ChannelModel {
        name: "respiratory_rate",
        mean: 19.0,
        sd: 4.5,
        severity_shift: 0.8,
        rate: 1.0,
    },
    ChannelModel {
        name: "spo2",
        mean: 96.5,
        sd: 2.0,
        severity_shift: -0.7,
        rate: 1.0,
    },
    ChannelModel {
        name: "fio2",
        mean: 0.40,
        sd: 0.12,
        severity_shift: 0.6,
        rate: 0.15,
    },
    ChannelModel {
        name: "ph",
        mean: 7.39,
        sd: 0.06,
        severity_shift: -0.6,
        rate: 0.08,
    },
    ChannelModel {
        name: "glucose",
        mean: 135.0,
        sd: 35.0,
        severity_shift: 0.3,
        rate: 0.15,
    },
];

const NURSING_FILLER: &[&str] = &[
    "Patient resting comfortably in bed",
    "Family at bedside and updated on plan of care",
    "Tolerating tube feeds at goal rate",
    "Turned and repositioned every two hours",
    "Lines and drains intact and patent",
    "Oral care provided per protocol",
    "Pain controlled on current regimen",
    "Will continue to monitor closely overnight",
    "Skin warm and dry to touch",
    "Voiding via foley catheter with adequate output",
];
const RADIOLOGY_FILLER: &[&str] = &[
    "Portable chest radiograph obtained",
    "Endotracheal tube terminates above the carina",
    "Cardiomediastinal silhouette within normal limits",
    "No pneumothorax is identified",
    "Comparison made with prior study",
    "Osseous structures are unremarkable",
];
const PHYSICIAN_FILLER: &[&str] = &[
    "Assessment and plan reviewed with the team",
    "Continue current medications as ordered",
    "Labs reviewed this morning",
    "Discussed goals of care with family",
    "Will follow up on pending cultures",
];
/// Findings a bedside reader would call concerning.
const MILD_FINDINGS: &[&str] = &[
    "Episodes of hypotension responding to fluids",
    "Persistent tachycardia noted on telemetry",
    "Febrile overnight with rising white count",
    "Increasing oxygen requirement with tachypnea",
    "New confusion and agitation this shift",
    "Decreased urine output noted",
    "Bilateral pleural effusion present",
    "Worsening anemia requiring transfusion",
];
/// Findings strongly associated with death in the ICU.
const SEVERE_FINDINGS: &[&str] = &[
    "Septic shock requiring escalating vasopressors",
    "Remains intubated with worsening hypoxemia",
    "Lactate elevated despite resuscitation",
    "Acute kidney injury progressing toward dialysis",
    "Multiorgan failure evolving",
    "Family meeting held and code status changed to dnr",
    "Diffuse bilateral infiltrates concerning for ards",
    "Coagulopathy with ongoing bleeding",
];

/// Generates a cohort of `config.n_patients` episodes. The same config always
/// yields the same episodes.
pub fn generate_synthetic(config: &GeneratorConfig) -> Result<Vec<Episode>, CohortError> {
    config.validate()?;
    let spec = VitalsSpec::standard();
    let n = config.n_patients;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let latents: Vec<Latent> = (0..n)
        .map(|_| Latent {
            vitals: std_normal.sample(&mut rng),
            text: std_normal.sample(&mut rng),
            draw: rng.random::<f64>(),
        })
        .collect();
    let offset = calibrate_offset(&latents, config)?;

    let races: Vec<(Race, f64)> = config
        .demographics
        .race
        .iter()
        .map(|(r, p)| (*r, *p))
        .collect();
    let raw: Vec<RawEpisode> = latents
        .iter()
        .enumerate()
        .map(|(i, lat)| {
            let mut prng = ChaCha8Rng::seed_from_u64(config.seed);
            prng.set_stream(i as u64 + 1);
            let label = u8::from(lat.draw < sigmoid(lat.logit(config) + offset));
            RawEpisode {
                episode_id: format!("syn-{:06}", i),
                measurements: vitals_for(lat, &mut prng),
                notes: notes_for(lat, config, &mut prng),
                expert_summary: None,
                label,
                demographics: demographics_for(&config.demographics, &races, &mut prng),
            }
        })
        .collect();
    preprocess_cohort(
        &raw,
        &spec,
        OutOfRangePolicy::Clamp,
        SplitFractions::default(),
        config.seed,
    )
}

struct Latent {
    vitals: f64,
    text: f64,
    draw: f64,
}

impl Latent {
    fn logit(&self, c: &GeneratorConfig) -> f64 {
        c.vitals_signal_weight * self.vitals + c.text_signal_weight * self.text
    }

    /// Severity as expressed in note vocabulary.
    fn note_severity(&self, c: &GeneratorConfig) -> f64 {
        c.text_signal_weight * (self.text + (1.0 - c.complement_weight) * self.vitals)
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn prevalence_at(latents: &[Latent], c: &GeneratorConfig, offset: f64) -> f64 {
    let positives = latents
        .iter()
        .filter(|l| l.draw < sigmoid(l.logit(c) + offset))
        .count();
    positives as f64 / latents.len() as f64
}

fn calibrate_offset(latents: &[Latent], c: &GeneratorConfig) -> Result<f64, CohortError> {
    let target = c.target_prevalence;
    let (mut lo, mut hi) = (-60.0, 60.0);
    let (p_lo, p_hi) = (prevalence_at(latents, c, lo), prevalence_at(latents, c, hi));
    if p_lo > target || p_hi < target {
        return Err(CohortError::Calibration(format!(
            "prevalence range [{p_lo}, {p_hi}] over the offset bracket does not contain {target}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if prevalence_at(latents, c, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let best = [lo, hi]
        .into_iter()
        .min_by(|a, b| {
            let da = (prevalence_at(latents, c, *a) - target).abs();
            let db = (prevalence_at(latents, c, *b) - target).abs();
            da.total_cmp(&db)
        })
        .expect("two candidates");
    let achieved = prevalence_at(latents, c, best);
    let tolerance = (1.0 / latents.len() as f64).max(0.01);
    if (achieved - target).abs() > tolerance {
        return Err(CohortError::Calibration(format!(
            "best achievable prevalence {achieved} is more than {tolerance} from {target}"
        )));
    }
    Ok(best)
}

fn vitals_for(lat: &Latent, rng: &mut ChaCha8Rng) -> Vec<RawMeasurement> {
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::new();
    for ch in &CHANNELS {
        let patient_offset = 0.5 * ch.sd * std_normal.sample(rng);
        let per_hour = Poisson::new(ch.rate).expect("positive rate");
        for hour in 0..HOURS {
            let count = per_hour.sample(rng) as usize;
            for _ in 0..count {
                let time = hour as f64 + rng.random::<f64>();
                // Deterioration ramps in over the stay.
                let ramp = 0.3 + 0.7 * time / HOURS as f64;
                let mut value = ch.mean
                    + patient_offset
                    + lat.vitals * ch.severity_shift * ch.sd * ramp
                    + 0.3 * ch.sd * std_normal.sample(rng);
                if ch.name == "spo2" && rng.random::<f64>() < 0.002 {
                    // probe artefact
                    value = -value;
                }
                out.push(RawMeasurement {
                    time: time.min(HOURS as f64 - 1e-9),
                    channel: ch.name.to_string(),
                    value,
                });
            }
        }
    }
    out
}

fn notes_for(lat: &Latent, c: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Vec<NoteEvent> {
    let extra = Poisson::new(c.notes_per_episode_rate - 1.0)
        .map(|p| p.sample(rng) as usize)
        .unwrap_or(0);
    let severity = lat.note_severity(c);
    let p_abnormal = sigmoid(-1.5 + severity);
    let p_severe = sigmoid(-1.0 + 1.5 * severity);
    let mut times: Vec<f64> = (0..=extra)
        .map(|_| (rng.random::<f64>() * HOURS as f64 * 100.0).round() / 100.0)
        .collect();
    times.sort_by(f64::total_cmp);
    times
        .into_iter()
        .map(|chart_time| {
            let (category, filler) = match rng.random::<f64>() {
                x if x < 0.6 => ("nursing", NURSING_FILLER),
                x if x < 0.8 => ("radiology", RADIOLOGY_FILLER),
                _ => ("physician", PHYSICIAN_FILLER),
            };
            let n_sentences = rng.random_range(3..=6);
            let text = (0..n_sentences)
                .map(|_| {
                    let pool = if rng.random::<f64>() < p_abnormal {
                        if rng.random::<f64>() < p_severe {
                            SEVERE_FINDINGS
                        } else {
                            MILD_FINDINGS
                        }
                    } else {
                        filler
                    };
                    format!("{}.", pool[rng.random_range(0..pool.len())])
                })
                .collect::<Vec<_>>()
                .join(" ");
            NoteEvent {
                chart_time,
                text,
                category: category.to_string(),
            }
        })
        .collect()
}

fn demographics_for(
    m: &DemographicMarginals,
    races: &[(Race, f64)],
    rng: &mut ChaCha8Rng,
) -> Demographics {
    let sex = if rng.random::<f64>() < m.male_fraction {
        Sex::Male
    } else {
        Sex::Female
    };
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    let mut race = races.last().map(|(r, _)| *r).unwrap_or(Race::Other);
    for (r, p) in races {
        acc += p;
        if u < acc {
            race = *r;
            break;
        }
    }
    let age = Normal::new(m.age_median, m.age_sd.max(1e-12))
        .expect("finite age distribution")
        .sample(rng)
        .clamp(m.age_min, m.age_max);
    Demographics {
        age: (age * 100.0).round() / 100.0,
        sex,
        race,
    }
}

#[cfg(test)]
/// Phrases the generator writes for abnormal findings; exposed so tests can
/// check lexicon coverage.
pub(crate) fn finding_phrases() -> impl Iterator<Item = &'static str> {
    MILD_FINDINGS.iter().chain(SEVERE_FINDINGS).copied()
}

#[cfg(test)]
pub(crate) fn filler_phrases() -> impl Iterator<Item = &'static str> {
    NURSING_FILLER
        .iter()
        .chain(RADIOLOGY_FILLER)
        .chain(PHYSICIAN_FILLER)
        .copied()
}
