use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{tokenize, FeaturizerError, DEFAULT_MAX_INPUT_TOKENS};

/// Header emitted by the rule-based summarizer when no keyword matches.
pub const NO_FINDINGS_HEADER: &str = "no abnormal findings detected";

/// Abnormal-finding vocabulary used by the rule-based summarizer.
pub const DEFAULT_LEXICON: &[&str] = &[
    "hypotension",
    "tachycardia",
    "febrile",
    "tachypnea",
    "confusion",
    "agitation",
    "decreased urine output",
    "pleural effusion",
    "anemia",
    "transfusion",
    "septic shock",
    "vasopressors",
    "intubated",
    "hypoxemia",
    "lactate",
    "acute kidney injury",
    "dialysis",
    "multiorgan failure",
    "dnr",
    "infiltrates",
    "ards",
    "coagulopathy",
    "bleeding",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SummarizerMode {
    /// Keyword extraction over the concatenated notes.
    RuleBasedStub,
    /// JSONL file of `{"episode_id": ..., "summary": ...}` records.
    PrecomputedFile { path: PathBuf },
    /// Shell command; `{input_file}` is replaced by a file holding the
    /// document and stdout becomes the summary.
    ExternalCommand {
        template: String,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
    },
}

fn default_timeout_secs() -> u64 {
    600
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SummarizerConfig {
    pub mode: SummarizerMode,
    pub max_input_tokens: usize,
    /// Keywords for the stub; replaced by `lexicon_path` contents when set.
    pub lexicon: Vec<String>,
    pub lexicon_path: Option<PathBuf>,
}

impl Default for SummarizerConfig {
    fn default() -> Self {
        Self {
            mode: SummarizerMode::RuleBasedStub,
            max_input_tokens: DEFAULT_MAX_INPUT_TOKENS,
            lexicon: DEFAULT_LEXICON.iter().map(|s| s.to_string()).collect(),
            lexicon_path: None,
        }
    }
}

/// One keyword per line; blank lines and `#` comments are skipped.
pub fn load_lexicon(path: &Path) -> Result<Vec<String>, FeaturizerError> {
    let text = std::fs::read_to_string(path).map_err(|source| FeaturizerError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

/// The expert-summary transform applied to a concatenated note document.
#[derive(Debug, Clone)]
pub struct Summarizer {
    config: SummarizerConfig,
    lexicon: Vec<String>,
    precomputed: HashMap<String, String>,
}

#[derive(Deserialize)]
struct SummaryRecord {
    episode_id: String,
    summary: String,
}

impl Summarizer {
    pub fn new(config: SummarizerConfig) -> Result<Self, FeaturizerError> {
        if config.max_input_tokens == 0 {
            return Err(FeaturizerError::Spec(
                "max_input_tokens must be positive".into(),
            ));
        }
        let lexicon = match &config.lexicon_path {
            Some(p) => load_lexicon(p)?,
            None => config.lexicon.clone(),
        };
        let mut precomputed = HashMap::new();
        if let SummarizerMode::PrecomputedFile { path } = &config.mode {
            let text = std::fs::read_to_string(path).map_err(|source| FeaturizerError::Io {
                path: path.display().to_string(),
                source,
            })?;
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let rec: SummaryRecord =
                    serde_json::from_str(line).map_err(|e| FeaturizerError::Row {
                        path: path.display().to_string(),
                        row: i + 1,
                        reason: e.to_string(),
                    })?;
                precomputed.insert(rec.episode_id, rec.summary);
            }
        }
        Ok(Self {
            config,
            lexicon,
            precomputed,
        })
    }

    pub fn config(&self) -> &SummarizerConfig {
        &self.config
    }

    pub fn max_input_tokens(&self) -> usize {
        self.config.max_input_tokens
    }

    pub fn summarize(&self, episode_id: &str, document: &str) -> Result<String, FeaturizerError> {
        match &self.config.mode {
            SummarizerMode::RuleBasedStub => Ok(summarize_stub(document, &self.lexicon)),
            SummarizerMode::PrecomputedFile { .. } => self
                .precomputed
                .get(episode_id)
                .cloned()
                .ok_or_else(|| FeaturizerError::MissingSummary(episode_id.to_string())),
            SummarizerMode::ExternalCommand {
                template,
                timeout_secs,
            } => run_external(template, document, Duration::from_secs(*timeout_secs)),
        }
    }
}

/// Splits on sentence terminators and line breaks, keeping the terminator.
fn sentences(document: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in document.char_indices() {
        if matches!(c, '.' | '!' | '?' | '\n') {
            let end = if c == '\n' { i } else { i + c.len_utf8() };
            let s = document[start..end].trim();
            if !s.is_empty() {
                out.push(s);
            }
            start = i + c.len_utf8();
        }
    }
    let tail = document[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

fn contains_phrase(tokens: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && tokens.windows(phrase.len()).any(|w| w == phrase)
}

/// Rule-based summary: a header naming the lexicon keywords found (in lexicon
/// order), followed by every sentence that contains one of them.
pub fn summarize_stub<S: AsRef<str>>(document: &str, lexicon: &[S]) -> String {
    let phrases: Vec<(&str, Vec<String>)> = lexicon
        .iter()
        .map(|k| (k.as_ref(), tokenize(k.as_ref())))
        .collect();
    let mut found = vec![false; phrases.len()];
    let mut kept = Vec::new();
    for sentence in sentences(document) {
        let toks = tokenize(sentence);
        let mut hit = false;
        for (i, (_, phrase)) in phrases.iter().enumerate() {
            if contains_phrase(&toks, phrase) {
                found[i] = true;
                hit = true;
            }
        }
        if hit {
            kept.push(sentence);
        }
    }
    if kept.is_empty() {
        return NO_FINDINGS_HEADER.to_string();
    }
    let names: Vec<String> = phrases
        .iter()
        .zip(&found)
        .filter(|(_, f)| **f)
        .map(|((k, _), _)| k.to_lowercase())
        .collect();
    format!(
        "abnormal findings detected: {}\n{}",
        names.join(", "),
        kept.join(" ")
    )
}

fn run_external(
    template: &str,
    document: &str,
    timeout: Duration,
) -> Result<String, FeaturizerError> {
    let mut input = tempfile::NamedTempFile::new().map_err(|source| FeaturizerError::Io {
        path: "<summarizer input>".into(),
        source,
    })?;
    input
        .write_all(document.as_bytes())
        .and_then(|_| input.flush())
        .map_err(|source| FeaturizerError::Io {
            path: input.path().display().to_string(),
            source,
        })?;
    let quoted = format!(
        "'{}'",
        input.path().display().to_string().replace('\'', "'\\''")
    );
    let command = template.replace("{input_file}", &quoted);
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&command)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| FeaturizerError::Command(format!("spawn `{command}`: {e}")))?;

    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    let out_reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        stdout.read_to_end(&mut buf).map(|_| buf)
    });
    let err_reader = std::thread::spawn(move || {
        let mut buf = String::new();
        let _ = stderr.read_to_string(&mut buf);
        buf
    });

    let deadline = Instant::now() + timeout;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(FeaturizerError::Command(format!(
                    "`{command}` timed out after {}s",
                    timeout.as_secs()
                )));
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(10)),
            Err(e) => return Err(FeaturizerError::Command(e.to_string())),
        }
    };
    let stdout = out_reader
        .join()
        .expect("stdout reader")
        .map_err(|e| FeaturizerError::Command(e.to_string()))?;
    let stderr = err_reader.join().expect("stderr reader");
    if !status.success() {
        return Err(FeaturizerError::Command(format!(
            "`{command}` exited with {status}: {}",
            stderr.trim()
        )));
    }
    Ok(String::from_utf8_lossy(&stdout).trim_end().to_string())
}
