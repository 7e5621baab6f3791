use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::path::Path;

use super::{FeaturizerError, NoteEmbedding};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeEmbeddings {
    /// Keyed by note index.
    pub notes: BTreeMap<usize, NoteEmbedding>,
    pub summary: Option<Vec<f64>>,
}

/// Externally computed note and summary vectors, keyed by episode id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrecomputedEmbeddings {
    pub dim: usize,
    pub episodes: BTreeMap<String, EpisodeEmbeddings>,
}

const FIXED_COLUMNS: usize = 4;

/// Reads `episode_id,kind,index,chart_time,v0..v{b-1}` rows. Row numbers in
/// errors are file line numbers (the header is line 1). When `expected_dim`
/// is `None` the width comes from the header.
pub fn load_precomputed_embeddings(
    path: &Path,
    expected_dim: Option<usize>,
) -> Result<PrecomputedEmbeddings, FeaturizerError> {
    let p = path.display().to_string();
    let csv_err = |source| FeaturizerError::Csv {
        path: p.clone(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    let header_dim = header.len().saturating_sub(FIXED_COLUMNS);
    let dim = expected_dim.unwrap_or(header_dim);
    if header_dim != dim {
        return Err(FeaturizerError::Dimension {
            path: p,
            row: 1,
            expected: dim,
            found: header_dim,
        });
    }
    let mut out = PrecomputedEmbeddings {
        dim,
        episodes: BTreeMap::new(),
    };
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let row = record
            .position()
            .map(|pos| pos.line() as usize)
            .unwrap_or(0);
        let row_err = |reason: String| FeaturizerError::Row {
            path: p.clone(),
            row,
            reason,
        };
        let found = record.len().saturating_sub(FIXED_COLUMNS);
        if record.len() < FIXED_COLUMNS || found != dim {
            return Err(FeaturizerError::Dimension {
                path: p.clone(),
                row,
                expected: dim,
                found,
            });
        }
        let episode_id = record[0].to_string();
        let kind = record[1].to_string();
        let index: usize = record[2]
            .trim()
            .parse()
            .map_err(|e| row_err(format!("bad index `{}`: {e}", &record[2])))?;
        let vector = record
            .iter()
            .skip(FIXED_COLUMNS)
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| row_err(format!("non-numeric or non-finite value `{v}`")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let duplicate = || FeaturizerError::Duplicate {
            path: p.clone(),
            row,
            episode_id: episode_id.clone(),
            kind: kind.clone(),
            index,
        };
        let entry = out.episodes.entry(episode_id.clone()).or_default();
        match kind.as_str() {
            "note" => {
                let chart_time: f64 = record[3]
                    .trim()
                    .parse()
                    .ok()
                    .filter(|t: &f64| t.is_finite())
                    .ok_or_else(|| row_err(format!("bad chart_time `{}`", &record[3])))?;
                match entry.notes.entry(index) {
                    Entry::Occupied(_) => return Err(duplicate()),
                    Entry::Vacant(v) => {
                        v.insert(NoteEmbedding { vector, chart_time });
                    }
                }
            }
            "summary" => {
                if index != 0 || !record[3].trim().is_empty() {
                    return Err(row_err(
                        "summary rows need index 0 and an empty chart_time".into(),
                    ));
                }
                if entry.summary.is_some() {
                    return Err(duplicate());
                }
                entry.summary = Some(vector);
            }
            other => return Err(row_err(format!("unknown kind `{other}`"))),
        }
    }
    Ok(out)
}

pub fn save_precomputed_embeddings(
    path: &Path,
    data: &PrecomputedEmbeddings,
) -> Result<(), FeaturizerError> {
    let p = path.display().to_string();
    let csv_err = |source| FeaturizerError::Csv {
        path: p.clone(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = ["episode_id", "kind", "index", "chart_time"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..data.dim).map(|i| format!("v{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for (id, ep) in &data.episodes {
        for (idx, note) in &ep.notes {
            let mut row = vec![
                id.clone(),
                "note".into(),
                idx.to_string(),
                note.chart_time.to_string(),
            ];
            row.extend(note.vector.iter().map(f64::to_string));
            w.write_record(&row).map_err(csv_err)?;
        }
        if let Some(s) = &ep.summary {
            let mut row = vec![id.clone(), "summary".into(), "0".into(), String::new()];
            row.extend(s.iter().map(f64::to_string));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()
        .map_err(|source| FeaturizerError::Io { path: p, source })
}
