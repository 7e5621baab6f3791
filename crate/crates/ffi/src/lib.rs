//! C ABI over `ihm-core`.
//!
//! Cohorts and models are opaque heap handles released with their `_free`
//! function. Every fallible call returns an [`IhmStatus`]; on failure the
//! message is available from [`ihm_last_error`] on the same thread until the
//! next failing call. Panics are caught at the boundary and reported as
//! [`IhmStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use ihm_core::cohort::{
    generate_synthetic, load_cohort, prevalence, Episode, GeneratorConfig, LoadOptions,
};
use ihm_core::featurizer::{embed_text, EmbeddingSpec};
use ihm_core::metrics::{auprc, auroc, improvement};
use ihm_core::model::ModelVariant;
use ihm_core::pipeline::{
    evaluate_checkpoint, resolve_lambda, train_variant, Checkpoint, ErrorKind, ExperimentConfig,
    PipelineError, PreparedCohort, SplitName,
};
use ihm_core::temporal::decay_weight;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IhmStatus {
    Ok = 0,
    InvalidArgument = 1,
    ConfigError = 2,
    DataError = 3,
    TrainingError = 4,
    IoError = 5,
    Panic = 6,
}

/// Cohort partition selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IhmSplit {
    Train = 0,
    Val = 1,
    Test = 2,
}

impl From<IhmSplit> for SplitName {
    fn from(s: IhmSplit) -> Self {
        match s {
            IhmSplit::Train => SplitName::Train,
            IhmSplit::Val => SplitName::Val,
            IhmSplit::Test => SplitName::Test,
        }
    }
}

/// A loaded or generated cohort.
pub struct IhmCohort {
    episodes: Vec<Episode>,
}

/// A trained model together with its featurization settings.
pub struct IhmModel {
    checkpoint: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: IhmStatus,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            status: IhmStatus::InvalidArgument,
            message: message.into(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let status = match (&e, e.kind()) {
            (PipelineError::Io { .. }, _) => IhmStatus::IoError,
            (PipelineError::Cohort(ihm_core::cohort::CohortError::Io { .. }), _) => {
                IhmStatus::IoError
            }
            (_, ErrorKind::Config) => IhmStatus::ConfigError,
            (_, ErrorKind::Data) => IhmStatus::DataError,
            (_, ErrorKind::Training) => IhmStatus::TrainingError,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl From<ihm_core::cohort::CohortError> for Failure {
    fn from(e: ihm_core::cohort::CohortError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<ihm_core::metrics::MetricsError> for Failure {
    fn from(e: ihm_core::metrics::MetricsError) -> Self {
        Self {
            status: IhmStatus::DataError,
            message: e.to_string(),
        }
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IhmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IhmStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            IhmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(Failure::invalid(format!("{name} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure::invalid(format!("{name} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(ptr: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Failure::invalid(format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn out_arg<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut()
        .ok_or_else(|| Failure::invalid(format!("{name} is null")))
}

/// Optional TOML config text; null means all defaults.
unsafe fn config_arg(ptr: *const c_char) -> Result<ExperimentConfig, Failure> {
    if ptr.is_null() {
        return Ok(ExperimentConfig::default());
    }
    let text = str_arg(ptr, "config_toml")?;
    toml::from_str(text).map_err(|e| Failure {
        status: IhmStatus::ConfigError,
        message: e.to_string(),
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ihm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn ihm_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |c| c.as_ptr())
    })
}

/// Loads a cohort JSONL file. In strict mode the first invalid line fails
/// the call; otherwise invalid lines are skipped.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ihm_cohort_load(
    path: *const c_char,
    strict: bool,
    out: *mut *mut IhmCohort,
) -> IhmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        let loaded = load_cohort(
            &path,
            &LoadOptions {
                strict,
                ..LoadOptions::default()
            },
        )?;
        *out = Box::into_raw(Box::new(IhmCohort {
            episodes: loaded.episodes,
        }));
        Ok(())
    })
}

/// Generates a synthetic cohort with default settings for `n_patients`
/// episodes and the given seed.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ihm_cohort_generate(
    n_patients: usize,
    seed: u64,
    out: *mut *mut IhmCohort,
) -> IhmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let episodes = generate_synthetic(&GeneratorConfig {
            n_patients,
            seed,
            ..GeneratorConfig::default()
        })?;
        *out = Box::into_raw(Box::new(IhmCohort { episodes }));
        Ok(())
    })
}

/// Number of episodes; 0 for a null handle.
///
/// # Safety
/// `cohort` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn ihm_cohort_len(cohort: *const IhmCohort) -> usize {
    cohort.as_ref().map_or(0, |c| c.episodes.len())
}

/// Share of positive labels; NaN for a null or empty handle.
///
/// # Safety
/// `cohort` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn ihm_cohort_prevalence(cohort: *const IhmCohort) -> f64 {
    match cohort.as_ref() {
        Some(c) if !c.episodes.is_empty() => prevalence(&c.episodes),
        _ => f64::NAN,
    }
}

/// # Safety
/// `cohort` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ihm_cohort_free(cohort: *mut IhmCohort) {
    if !cohort.is_null() {
        drop(Box::from_raw(cohort));
    }
}

/// Trains `variant` (e.g. `"ts_notes_expert"`) on the training split of
/// `cohort`. `config_toml` uses the CLI config format; null means defaults.
///
/// # Safety
/// `cohort` must be a live handle, `variant` a valid string, `config_toml`
/// null or a valid string, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ihm_model_train(
    cohort: *const IhmCohort,
    variant: *const c_char,
    config_toml: *const c_char,
    out: *mut *mut IhmModel,
) -> IhmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cohort = cohort
            .as_ref()
            .ok_or_else(|| Failure::invalid("cohort is null"))?;
        let variant: ModelVariant =
            str_arg(variant, "variant")?
                .parse()
                .map_err(|e: ihm_core::model::ModelError| Failure {
                    status: IhmStatus::ConfigError,
                    message: e.to_string(),
                })?;
        let config = config_arg(config_toml)?;
        config.validate()?;
        let prep = PreparedCohort::new(
            &cohort.episodes,
            &config.featurize,
            config.split,
            config.seed,
        )?;
        let (lambda, _) = resolve_lambda(&prep, &config, variant, None)?;
        let trained = train_variant(&prep, &config, variant, lambda)?;
        *out = Box::into_raw(Box::new(IhmModel {
            checkpoint: trained.checkpoint,
        }));
        Ok(())
    })
}

/// Loads a checkpoint JSON written by the CLI or [`ihm_model_save`].
///
/// # Safety
/// `path` must be a valid string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ihm_model_load(path: *const c_char, out: *mut *mut IhmModel) -> IhmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let checkpoint = Checkpoint::load(&PathBuf::from(str_arg(path, "path")?))?;
        checkpoint.params()?;
        *out = Box::into_raw(Box::new(IhmModel { checkpoint }));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `path` a valid string.
#[no_mangle]
pub unsafe extern "C" fn ihm_model_save(model: *const IhmModel, path: *const c_char) -> IhmStatus {
    guard(|| {
        let model = model
            .as_ref()
            .ok_or_else(|| Failure::invalid("model is null"))?;
        model
            .checkpoint
            .save(&PathBuf::from(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// Scores one split of `cohort`, writing at most `capacity` probabilities
/// to `scores` in split order and the split size to `written`. Fails with
/// `InvalidArgument` when the buffer is too small; `written` still holds the
/// required size.
///
/// # Safety
/// `model` and `cohort` must be live handles, `scores` must point to
/// `capacity` doubles (or be null with `capacity == 0`), and `written` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ihm_model_predict(
    model: *const IhmModel,
    cohort: *const IhmCohort,
    split: IhmSplit,
    scores: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> IhmStatus {
    guard(|| {
        let written = out_arg(written, "written")?;
        let model = model
            .as_ref()
            .ok_or_else(|| Failure::invalid("model is null"))?;
        let cohort = cohort
            .as_ref()
            .ok_or_else(|| Failure::invalid("cohort is null"))?;
        let eval = evaluate_checkpoint(&model.checkpoint, &cohort.episodes, split.into())?;
        let n = eval.scored.len();
        *written = n;
        if n > capacity {
            return Err(Failure::invalid(format!(
                "buffer holds {capacity} scores, split has {n}"
            )));
        }
        if n > 0 {
            if scores.is_null() {
                return Err(Failure::invalid("scores is null"));
            }
            std::slice::from_raw_parts_mut(scores, n).copy_from_slice(&eval.scored.scores);
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ihm_model_free(model: *mut IhmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Area under the ROC curve of `n` scores with 0/1 labels.
///
/// # Safety
/// `scores` and `labels` must each point to `n` elements.
#[no_mangle]
pub unsafe extern "C" fn ihm_auroc(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out: *mut f64,
) -> IhmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = auroc(
            slice_arg(scores, n, "scores")?,
            slice_arg(labels, n, "labels")?,
        )?;
        Ok(())
    })
}

/// Average precision of `n` scores with 0/1 labels.
///
/// # Safety
/// `scores` and `labels` must each point to `n` elements.
#[no_mangle]
pub unsafe extern "C" fn ihm_auprc(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out: *mut f64,
) -> IhmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = auprc(
            slice_arg(scores, n, "scores")?,
            slice_arg(labels, n, "labels")?,
        )?;
        Ok(())
    })
}

/// Percent change of `metric` over `baseline`; requires `baseline > 0`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ihm_improvement(metric: f64, baseline: f64, out: *mut f64) -> IhmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = improvement(metric, baseline).map_err(|e| Failure::invalid(e.to_string()))?;
        Ok(())
    })
}

/// `exp(-lambda * (t - chart_time))`; requires `chart_time <= t` and
/// `lambda >= 0`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ihm_decay_weight(
    t: f64,
    chart_time: f64,
    lambda: f64,
    out: *mut f64,
) -> IhmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if !(t.is_finite() && chart_time.is_finite() && chart_time <= t) {
            return Err(Failure::invalid(format!(
                "chart_time {chart_time} is after t {t}"
            )));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Failure::invalid(format!(
                "lambda must be non-negative, got {lambda}"
            )));
        }
        *out = decay_weight(t, chart_time, lambda);
        Ok(())
    })
}

/// Hashed unigram+bigram embedding of `text` into `dim` L2-normalized
/// components written to `out`.
///
/// # Safety
/// `text` must be a valid string and `out` must point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn ihm_embed_text(
    text: *const c_char,
    dim: usize,
    out: *mut f64,
) -> IhmStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let spec = EmbeddingSpec {
            dim,
            ..EmbeddingSpec::desk()
        };
        spec.validate()
            .map_err(|e| Failure::invalid(e.to_string()))?;
        if out.is_null() {
            return Err(Failure::invalid("out is null"));
        }
        std::slice::from_raw_parts_mut(out, dim).copy_from_slice(&embed_text(text, &spec));
        Ok(())
    })
}
