//! End-to-end glue: featurize a cohort, train variants, run the ablation and
//! evaluate checkpoints.

mod checkpoint;
mod features;

pub use checkpoint::{Checkpoint, FeaturizationMeta, CHECKPOINT_FORMAT_VERSION};
pub use features::{
    build_example, featurize_cohort, EpisodeFeatures, FeaturizeConfig, Standardizer,
};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{
    split_cohort, CohortError, CohortSplit, Episode, GeneratorConfig, SplitFractions, VitalsSpec,
    HOURS,
};
use crate::featurizer::FeaturizerError;
use crate::metrics::{auprc, EvalReport, MetricsError, ScoredSet};
use crate::model::{forward, Example, FusionModelParams, ModelDims, ModelError, ModelVariant};
use crate::temporal::{tune_lambda, DecayConfig, TemporalError};
use crate::trainer::{train, AdamConfig, TrainConfig, TrainError, TrainManifest};

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Training,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Config => "config",
            Self::Data => "data",
            Self::Training => "training",
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Cohort(#[from] CohortError),
    #[error(transparent)]
    Featurize(#[from] FeaturizerError),
    #[error(transparent)]
    Temporal(#[from] TemporalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("training {variant} failed: {source}")]
    Train {
        variant: ModelVariant,
        #[source]
        source: TrainError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("dimension mismatch for {what}: checkpoint has {expected}, data has {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl PipelineError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Self::Cohort(CohortError::Config(_) | CohortError::Spec(_) | CohortError::Split(_)) => {
                ErrorKind::Config
            }
            Self::Featurize(FeaturizerError::Spec(_)) => ErrorKind::Config,
            Self::Model(ModelError::Dims(_) | ModelError::UnknownVariant(_)) => ErrorKind::Config,
            Self::Model(ModelError::NonFinite { .. }) => ErrorKind::Training,
            Self::Train {
                source: TrainError::Config(_),
                ..
            } => ErrorKind::Config,
            Self::Train { .. } => ErrorKind::Training,
            Self::Temporal(_) | Self::Config(_) => ErrorKind::Config,
            _ => ErrorKind::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Self::Train),
            "val" => Ok(Self::Val),
            "test" => Ok(Self::Test),
            other => Err(format!("unknown split `{other}` (train, val, test)")),
        }
    }
}

/// Optimizer and architecture settings; the remaining training fields come
/// from the run (seed, variant, data dimensions, decay rate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub hidden: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub clip_norm: Option<f64>,
    pub tolerant: bool,
    pub adam: AdamConfig,
}

impl Default for TrainSection {
    /// Desk-scale defaults; [`TrainSection::full_scale`] gives the full-size
    /// settings.
    fn default() -> Self {
        Self {
            hidden: 16,
            learning_rate: 1e-3,
            ..Self::full_scale()
        }
    }
}

impl TrainSection {
    pub fn full_scale() -> Self {
        Self {
            hidden: 256,
            learning_rate: 1e-4,
            l2: 1e-5,
            batch_size: 32,
            patience: 5,
            max_epochs: 100,
            clip_norm: Some(5.0),
            tolerant: false,
            adam: AdamConfig::default(),
        }
    }
}

/// Complete description of an experiment; the CLI's TOML config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Seeds the split, initialization and shuffling.
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub split: SplitFractions,
    pub featurize: FeaturizeConfig,
    pub decay: DecayConfig,
    /// Select the decay rate on validation data instead of using
    /// `decay.lambda`.
    pub tune_lambda: bool,
    pub train: TrainSection,
    /// Variants trained by the ablation, reported in table order.
    pub variants: Vec<ModelVariant>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            generator: GeneratorConfig::default(),
            split: SplitFractions::default(),
            featurize: FeaturizeConfig::default(),
            decay: DecayConfig::default(),
            tune_lambda: true,
            train: TrainSection::default(),
            variants: ModelVariant::ALL.to_vec(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.featurize.embedding.validate()?;
        self.decay.validate()?;
        if self.variants.is_empty() {
            return Err(PipelineError::Config("no variants selected".into()));
        }
        let probe = self.train_config(ModelVariant::TsNotesExpert, 10, self.decay.lambda);
        probe.validate().map_err(|source| PipelineError::Train {
            variant: probe.variant,
            source,
        })
    }

    pub fn train_config(&self, variant: ModelVariant, d: usize, lambda: f64) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            l2: t.l2,
            batch_size: t.batch_size,
            patience: t.patience,
            max_epochs: t.max_epochs,
            seed: self.seed,
            variant,
            dims: ModelDims {
                d,
                h: t.hidden,
                b: self.featurize.text_dim(),
                t: HOURS,
            },
            lambda,
            adam: t.adam,
            clip_norm: t.clip_norm,
            tolerant: t.tolerant,
        }
    }
}

/// A featurized cohort with its split and training statistics.
#[derive(Debug, Clone)]
pub struct PreparedCohort {
    pub features: Vec<EpisodeFeatures>,
    pub split: CohortSplit,
    pub standardizer: Standardizer,
    pub vitals_channels: Vec<String>,
    pub text_dim: usize,
    indices: HashMap<SplitName, Vec<usize>>,
}

impl PreparedCohort {
    pub fn new(
        episodes: &[Episode],
        featurize: &FeaturizeConfig,
        fractions: SplitFractions,
        seed: u64,
    ) -> Result<Self, PipelineError> {
        let ids: Vec<&str> = episodes.iter().map(|e| e.episode_id.as_str()).collect();
        let split = split_cohort(&ids, fractions, seed)?;
        let features = featurize_cohort(episodes, featurize)?;
        let position: HashMap<&str, usize> =
            ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let lookup = |list: &[String]| -> Vec<usize> {
            list.iter().map(|id| position[id.as_str()]).collect()
        };
        let indices = HashMap::from([
            (SplitName::Train, lookup(&split.train)),
            (SplitName::Val, lookup(&split.val)),
            (SplitName::Test, lookup(&split.test)),
        ]);
        let standardizer =
            Standardizer::fit(indices[&SplitName::Train].iter().map(|&i| &features[i]));
        let d = features.first().map_or(0, |f| f.vitals[0].len());
        let spec = VitalsSpec::standard();
        let vitals_channels = if d == spec.len() {
            spec.channels().iter().map(|c| c.name.clone()).collect()
        } else {
            (0..d).map(|j| format!("channel_{j}")).collect()
        };
        Ok(Self {
            features,
            split,
            standardizer,
            vitals_channels,
            text_dim: featurize.text_dim(),
            indices,
        })
    }

    pub fn indices(&self, split: SplitName) -> &[usize] {
        &self.indices[&split]
    }

    pub fn d(&self) -> usize {
        self.vitals_channels.len()
    }

    pub fn examples(&self, split: SplitName, lambda: f64) -> Vec<Example> {
        self.indices(split)
            .iter()
            .map(|&i| {
                build_example(
                    &self.features[i],
                    &self.standardizer,
                    lambda,
                    HOURS,
                    self.text_dim,
                )
            })
            .collect()
    }

    pub fn scored_set(&self, split: SplitName, scores: Vec<f64>) -> ScoredSet {
        let idx = self.indices(split);
        ScoredSet {
            episode_ids: idx
                .iter()
                .map(|&i| self.features[i].episode_id.clone())
                .collect(),
            labels: idx.iter().map(|&i| self.features[i].label).collect(),
            races: idx.iter().map(|&i| self.features[i].race).collect(),
            scores,
        }
    }
}

pub fn predict(params: &FusionModelParams, examples: &[Example]) -> Result<Vec<f64>, ModelError> {
    examples
        .iter()
        .map(|e| forward(&e.input, params).map(|t| t.y_hat))
        .collect()
}

/// A trained variant and everything needed to reload it.
#[derive(Debug, Clone)]
pub struct TrainedVariant {
    pub params: FusionModelParams,
    pub manifest: TrainManifest,
    pub checkpoint: Checkpoint,
}

pub fn train_variant(
    prep: &PreparedCohort,
    config: &ExperimentConfig,
    variant: ModelVariant,
    lambda: f64,
) -> Result<TrainedVariant, PipelineError> {
    let tc = config.train_config(variant, prep.d(), lambda);
    let train_set = prep.examples(SplitName::Train, lambda);
    let val_set = prep.examples(SplitName::Val, lambda);
    let (params, manifest) = train(&train_set, &val_set, &tc)
        .map_err(|source| PipelineError::Train { variant, source })?;
    let checkpoint = Checkpoint::new(
        &params,
        config.seed,
        FeaturizationMeta {
            featurize: config.featurize.clone(),
            lambda,
            standardizer: prep.standardizer.clone(),
            split_seed: prep.split.seed,
            split_fractions: prep.split.fractions,
            vitals_channels: prep.vitals_channels.clone(),
            hours: HOURS,
        },
    );
    Ok(TrainedVariant {
        params,
        manifest,
        checkpoint,
    })
}

/// Picks the decay rate maximizing validation AUPRC of the notes-only model.
pub fn select_lambda(
    prep: &PreparedCohort,
    config: &ExperimentConfig,
) -> Result<(f64, Vec<(f64, f64)>), PipelineError> {
    let mut scores = Vec::new();
    let lambda = tune_lambda(&config.decay.grid, |lambda| {
        let trained = train_variant(prep, config, ModelVariant::NotesOnly, lambda)?;
        let val = prep.examples(SplitName::Val, lambda);
        let preds = predict(&trained.params, &val)?;
        let labels: Vec<u8> = val.iter().map(|e| e.label).collect();
        let s = auprc(&preds, &labels)?;
        scores.push((lambda, s));
        Ok::<f64, PipelineError>(s)
    })?;
    Ok((lambda, scores))
}

/// The decay rate a single-variant run uses: the override, else the tuned
/// rate for variants that read notes, else `decay.lambda`.
pub fn resolve_lambda(
    prep: &PreparedCohort,
    config: &ExperimentConfig,
    variant: ModelVariant,
    lambda_override: Option<f64>,
) -> Result<(f64, Vec<(f64, f64)>), PipelineError> {
    match lambda_override {
        Some(l) => Ok((l, Vec::new())),
        None if config.tune_lambda && variant.uses_notes() => select_lambda(prep, config),
        None => Ok((config.decay.lambda, Vec::new())),
    }
}

/// Result of training every requested variant on one split.
#[derive(Debug, Clone)]
pub struct AblationOutcome {
    pub lambda: f64,
    /// `(lambda, validation AUPRC)` for each candidate when tuned.
    pub lambda_scores: Vec<(f64, f64)>,
    pub report: EvalReport,
    /// In table order.
    pub trained: Vec<(ModelVariant, TrainedVariant)>,
}

/// Trains the configured variants with a shared split and seed and reports
/// test metrics with improvements over the time-series baseline. With
/// `workers > 1` variants train concurrently; results do not depend on it.
pub fn run_ablation(
    episodes: &[Episode],
    config: &ExperimentConfig,
    lambda_override: Option<f64>,
    workers: usize,
) -> Result<AblationOutcome, PipelineError> {
    config.validate()?;
    let prep = PreparedCohort::new(episodes, &config.featurize, config.split, config.seed)?;
    let (lambda, lambda_scores) = match lambda_override {
        Some(l) => (l, Vec::new()),
        None if config.tune_lambda => select_lambda(&prep, config)?,
        None => (config.decay.lambda, Vec::new()),
    };
    let mut variants = config.variants.clone();
    variants.sort();
    variants.dedup();

    let results: Vec<Mutex<Option<Result<TrainedVariant, PipelineError>>>> =
        variants.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let work = || loop {
        let k = next.fetch_add(1, Ordering::SeqCst);
        if k >= variants.len() {
            break;
        }
        let r = train_variant(&prep, config, variants[k], lambda);
        *results[k].lock().expect("result slot") = Some(r);
    };
    let workers = workers.clamp(1, variants.len());
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(work);
            }
        });
    }

    let mut trained = Vec::new();
    let mut sets = Vec::new();
    let test = prep.examples(SplitName::Test, lambda);
    for (variant, slot) in variants.iter().zip(results) {
        let tv = slot
            .into_inner()
            .expect("result slot")
            .expect("every variant ran")?;
        let scores = predict(&tv.params, &test)?;
        sets.push((*variant, prep.scored_set(SplitName::Test, scores)));
        trained.push((*variant, tv));
    }
    let report = EvalReport::new("test", ModelVariant::TsOnly, &sets)?;
    Ok(AblationOutcome {
        lambda,
        lambda_scores,
        report,
        trained,
    })
}

/// Learned and input representations of each scored episode.
#[derive(Debug, Clone, Default)]
pub struct Representations {
    pub h: Option<Vec<Vec<f64>>>,
    pub u: Option<Vec<Vec<f64>>>,
    pub v: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvalReport,
    pub scored: ScoredSet,
    pub representations: Representations,
}

/// Scores one split of `episodes` with a saved checkpoint, rebuilding the
/// split and featurization recorded in it.
pub fn evaluate_checkpoint(
    checkpoint: &Checkpoint,
    episodes: &[Episode],
    split: SplitName,
) -> Result<Evaluation, PipelineError> {
    let params = checkpoint.params()?;
    let meta = &checkpoint.featurization;
    let prep = PreparedCohort::new(
        episodes,
        &meta.featurize,
        meta.split_fractions,
        meta.split_seed,
    )?;
    checkpoint.check_compatible(&prep)?;
    let examples: Vec<Example> = prep
        .indices(split)
        .iter()
        .map(|&i| {
            build_example(
                &prep.features[i],
                &meta.standardizer,
                meta.lambda,
                meta.hours,
                prep.text_dim,
            )
        })
        .collect();
    let mut scores = Vec::with_capacity(examples.len());
    let mut reps = Representations {
        h: params.variant.uses_ts().then(Vec::new),
        u: params.variant.uses_notes().then(Vec::new),
        v: params.variant.uses_expert().then(Vec::new),
    };
    for ex in &examples {
        let tr = forward(&ex.input, &params)?;
        scores.push(tr.y_hat);
        if let (Some(h), Some(l)) = (reps.h.as_mut(), tr.lstm.as_ref()) {
            h.push(l.last_hidden().to_vec());
        }
        if let (Some(u), Some(x)) = (reps.u.as_mut(), ex.input.u.as_ref()) {
            u.push(x.clone());
        }
        if let (Some(v), Some(x)) = (reps.v.as_mut(), ex.input.v.as_ref()) {
            v.push(x.clone());
        }
    }
    let scored = prep.scored_set(split, scores);
    let report = EvalReport::new(
        split.as_str(),
        ModelVariant::TsOnly,
        &[(params.variant, scored.clone())],
    )?;
    Ok(Evaluation {
        report,
        scored,
        representations: reps,
    })
}
