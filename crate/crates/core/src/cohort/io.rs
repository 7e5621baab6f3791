use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    CohortError, Demographics, Episode, LineError, NoteEvent, Race, RawMeasurement, VitalsSpec,
};

const EPISODE_KEYS: &[&str] = &[
    "episode_id",
    "vitals",
    "mask",
    "notes",
    "expert_summary",
    "label",
    "demographics",
];
const NOTE_KEYS: &[&str] = &["chart_time", "text", "category"];
const DEMOGRAPHIC_KEYS: &[&str] = &["age", "sex", "race"];

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Reject the whole file on the first bad line and refuse unknown keys.
    pub strict: bool,
    pub vitals: VitalsSpec,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedCohort {
    pub episodes: Vec<Episode>,
    /// One entry per skipped line (lenient mode only).
    pub warnings: Vec<String>,
}

/// Pre-aggregation episode: raw timed measurements instead of an hourly grid.
/// This is the input format of the `preprocess` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEpisode {
    pub episode_id: String,
    pub measurements: Vec<RawMeasurement>,
    #[serde(default)]
    pub notes: Vec<NoteEvent>,
    #[serde(default)]
    pub expert_summary: Option<String>,
    pub label: u8,
    pub demographics: Demographics,
}

/// Reads a cohort JSONL file. Blank lines are ignored. In lenient mode invalid
/// lines are skipped and reported in `warnings`; in strict mode the first one
/// is an error.
pub fn load_cohort(path: &Path, opts: &LoadOptions) -> Result<LoadedCohort, CohortError> {
    let file = File::open(path).map_err(|source| CohortError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = LoadedCohort::default();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| CohortError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_episode_line(&line, opts) {
            Ok(ep) => out.episodes.push(ep),
            Err(kind) if opts.strict => {
                return Err(CohortError::Line {
                    line: line_no,
                    kind,
                })
            }
            Err(kind) => out.warnings.push(format!("line {line_no}: {kind}")),
        }
    }
    Ok(out)
}

fn parse_episode_line(line: &str, opts: &LoadOptions) -> Result<Episode, LineError> {
    let value: Value = serde_json::from_str(line).map_err(|e| LineError::Json(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| LineError::Json("expected a JSON object".into()))?;
    if opts.strict {
        reject_unknown_keys(obj, EPISODE_KEYS)?;
        if let Some(Value::Array(notes)) = obj.get("notes") {
            for note in notes.iter().filter_map(Value::as_object) {
                reject_unknown_keys(note, NOTE_KEYS)?;
            }
        }
        if let Some(Value::Object(demo)) = obj.get("demographics") {
            reject_unknown_keys(demo, DEMOGRAPHIC_KEYS)?;
        }
    }
    if let Some(race) = obj
        .get("demographics")
        .and_then(|d| d.get("race"))
        .and_then(Value::as_str)
    {
        race.parse::<Race>().map_err(LineError::UnknownRace)?;
    }
    // Shape problems get a dedicated message before serde sees the arrays.
    for key in ["vitals", "mask"] {
        if let Some(Value::Array(rows)) = obj.get(key) {
            if rows.len() != super::HOURS {
                return Err(LineError::Shape(format!(
                    "{key} has {} rows, expected T={}",
                    rows.len(),
                    super::HOURS
                )));
            }
        }
    }
    let episode: Episode =
        serde_json::from_value(value).map_err(|e| LineError::Json(e.to_string()))?;
    episode.validate(&opts.vitals)?;
    Ok(episode)
}

fn reject_unknown_keys(
    obj: &serde_json::Map<String, Value>,
    allowed: &[&str],
) -> Result<(), LineError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(LineError::UnknownKey(k.clone())),
        None => Ok(()),
    }
}

/// Writes one episode per line.
pub fn save_cohort(path: &Path, episodes: &[Episode]) -> Result<(), CohortError> {
    write_jsonl(path, episodes)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CohortError> {
    let io_err = |source| CohortError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| io_err(e.into()))?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Strict line-numbered JSONL reader for any record type.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CohortError> {
    let file = File::open(path).map_err(|source| CohortError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CohortError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| CohortError::Line {
            line: idx + 1,
            kind: LineError::Json(e.to_string()),
        })?;
        out.push(item);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::tests::blank_episode;

    fn write_lines(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn save_then_load_round_trips() {
        let spec = VitalsSpec::standard();
        let ep = blank_episode("ep-1", &spec);
        let f = tempfile::NamedTempFile::new().unwrap();
        save_cohort(f.path(), std::slice::from_ref(&ep)).unwrap();
        let loaded = load_cohort(f.path(), &LoadOptions::default()).unwrap();
        assert_eq!(loaded.episodes, vec![ep]);
        assert!(loaded.warnings.is_empty());
    }

    #[test]
    fn short_vitals_error_names_line_and_t() {
        let spec = VitalsSpec::standard();
        let good = serde_json::to_string(&blank_episode("a", &spec)).unwrap();
        let mut bad_ep = blank_episode("b", &spec);
        bad_ep.vitals.truncate(47);
        let bad = serde_json::to_string(&bad_ep).unwrap();
        let f = write_lines(&[good, bad]);
        let opts = LoadOptions {
            strict: true,
            ..Default::default()
        };
        let err = load_cohort(f.path(), &opts).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("T=48"), "{err}");
    }

    #[test]
    fn lenient_mode_skips_malformed_line_with_warning() {
        let spec = VitalsSpec::standard();
        let mut lines: Vec<String> = (0..3)
            .map(|i| serde_json::to_string(&blank_episode(&format!("e{i}"), &spec)).unwrap())
            .collect();
        lines.insert(2, "{\"episode_id\": \"broken\", ".to_string());
        let f = write_lines(&lines);
        let loaded = load_cohort(f.path(), &LoadOptions::default()).unwrap();
        assert_eq!(loaded.episodes.len(), 3);
        assert_eq!(loaded.warnings.len(), 1);
        assert!(loaded.warnings[0].starts_with("line 3"));

        let strict = LoadOptions {
            strict: true,
            ..Default::default()
        };
        assert!(load_cohort(f.path(), &strict).is_err());
    }

    #[test]
    fn negative_chart_time_and_unknown_race_are_rejected() {
        let spec = VitalsSpec::standard();
        let mut ep = blank_episode("a", &spec);
        ep.notes[0].chart_time = -1.0;
        let line = serde_json::to_string(&ep).unwrap();
        let err = parse_episode_line(&line, &LoadOptions::default()).unwrap_err();
        assert_eq!(err, LineError::NegativeChartTime(-1.0));

        let ep = blank_episode("b", &spec);
        let line = serde_json::to_string(&ep)
            .unwrap()
            .replace("\"white\"", "\"martian\"");
        let err = parse_episode_line(&line, &LoadOptions::default()).unwrap_err();
        assert_eq!(err, LineError::UnknownRace("martian".into()));
    }

    #[test]
    fn unknown_keys_only_rejected_in_strict_mode() {
        let spec = VitalsSpec::standard();
        let mut v = serde_json::to_value(blank_episode("a", &spec)).unwrap();
        v.as_object_mut()
            .unwrap()
            .insert("icd_codes".into(), Value::Array(vec![]));
        let line = v.to_string();
        assert!(parse_episode_line(&line, &LoadOptions::default()).is_ok());
        let strict = LoadOptions {
            strict: true,
            ..Default::default()
        };
        assert_eq!(
            parse_episode_line(&line, &strict).unwrap_err(),
            LineError::UnknownKey("icd_codes".into())
        );
    }
}
