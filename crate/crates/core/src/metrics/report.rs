use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{auprc, auroc, improvement, MetricsError};
use crate::cohort::Race;
use crate::model::ModelVariant;

/// Test-time predictions with the attributes used for breakdowns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoredSet {
    pub episode_ids: Vec<String>,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
    pub races: Vec<Race>,
}

impl ScoredSet {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    fn check(&self) -> Result<(), MetricsError> {
        let n = self.scores.len();
        for len in [self.labels.len(), self.episode_ids.len(), self.races.len()] {
            if len != n {
                return Err(MetricsError::LengthMismatch {
                    scores: n,
                    labels: len,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupRow {
    pub group: Race,
    pub n: usize,
    pub positives: usize,
    /// `None` when the group lacks one of the classes.
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
}

/// One row per race group, in a fixed order; empty and single-class groups
/// are kept with undefined metrics.
pub fn subgroup_report(set: &ScoredSet) -> Result<Vec<SubgroupRow>, MetricsError> {
    set.check()?;
    Race::ALL
        .iter()
        .map(|&group| {
            let idx: Vec<usize> = (0..set.len()).filter(|&i| set.races[i] == group).collect();
            let scores: Vec<f64> = idx.iter().map(|&i| set.scores[i]).collect();
            let labels: Vec<u8> = idx.iter().map(|&i| set.labels[i]).collect();
            let positives = labels.iter().filter(|&&y| y == 1).count();
            let defined = positives > 0 && positives < labels.len();
            Ok(SubgroupRow {
                group,
                n: idx.len(),
                positives,
                auroc: defined.then(|| auroc(&scores, &labels)).transpose()?,
                auprc: defined.then(|| auprc(&scores, &labels)).transpose()?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRow {
    pub variant: ModelVariant,
    pub n: usize,
    pub positives: usize,
    pub auroc: f64,
    pub auprc: f64,
    /// Percent over the baseline row; `None` without a baseline row.
    pub delta_auroc_pct: Option<f64>,
    pub delta_auprc_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Split the scores come from.
    pub split: String,
    pub baseline: ModelVariant,
    /// In ablation-table order.
    pub rows: Vec<VariantRow>,
    pub subgroups: BTreeMap<ModelVariant, Vec<SubgroupRow>>,
}

/// Overall metrics of one variant.
pub fn evaluate_variant(
    variant: ModelVariant,
    set: &ScoredSet,
) -> Result<VariantRow, MetricsError> {
    set.check()?;
    Ok(VariantRow {
        variant,
        n: set.len(),
        positives: set.labels.iter().filter(|&&y| y == 1).count(),
        auroc: auroc(&set.scores, &set.labels)?,
        auprc: auprc(&set.scores, &set.labels)?,
        delta_auroc_pct: None,
        delta_auprc_pct: None,
    })
}

/// Two decimals, as printed in the ablation table.
pub fn format_percent(pct: f64) -> String {
    let s = format!("{pct:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

impl EvalReport {
    pub fn new(
        split: &str,
        baseline: ModelVariant,
        sets: &[(ModelVariant, ScoredSet)],
    ) -> Result<Self, MetricsError> {
        let mut rows = Vec::new();
        let mut subgroups = BTreeMap::new();
        for (variant, set) in sets {
            rows.push(evaluate_variant(*variant, set)?);
            subgroups.insert(*variant, subgroup_report(set)?);
        }
        rows.sort_by_key(|r| r.variant);
        if let Some(base) = rows.iter().find(|r| r.variant == baseline).cloned() {
            for r in &mut rows {
                r.delta_auroc_pct = Some(improvement(r.auroc, base.auroc)?);
                r.delta_auprc_pct = Some(improvement(r.auprc, base.auprc)?);
            }
        }
        Ok(Self {
            split: split.to_string(),
            baseline,
            rows,
            subgroups,
        })
    }

    pub fn row(&self, variant: ModelVariant) -> Option<&VariantRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    /// Aligned text table: `variant, AUROC, dAUROC%, AUPRC, dAUPRC%`.
    pub fn table(&self) -> String {
        let name_w = self
            .rows
            .iter()
            .map(|r| r.variant.display_name().len())
            .max()
            .unwrap_or(0)
            .max("variant".len());
        let pct = |p: Option<f64>| p.map(format_percent).unwrap_or_else(|| "-".into());
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<name_w$}  {:>7}  {:>9}  {:>7}  {:>9}",
            "variant", "AUROC", "ΔAUROC%", "AUPRC", "ΔAUPRC%"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<name_w$}  {:>7.4}  {:>9}  {:>7.4}  {:>9}",
                r.variant.display_name(),
                r.auroc,
                pct(r.delta_auroc_pct),
                r.auprc,
                pct(r.delta_auprc_pct),
            );
        }
        out
    }

    /// Per-group metrics for every variant in the report.
    pub fn subgroup_table(&self) -> String {
        let fmt = |m: Option<f64>| {
            m.map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "undef".into())
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16}  {:<26}  {:>6}  {:>5}  {:>7}  {:>7}",
            "variant", "group", "n", "pos", "AUROC", "AUPRC"
        );
        for (variant, rows) in &self.subgroups {
            for r in rows {
                let _ = writeln!(
                    out,
                    "{:<16}  {:<26}  {:>6}  {:>5}  {:>7}  {:>7}",
                    variant.as_str(),
                    r.group.as_str(),
                    r.n,
                    r.positives,
                    fmt(r.auroc),
                    fmt(r.auprc),
                );
            }
        }
        out
    }
}
