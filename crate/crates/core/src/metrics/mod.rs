//! Ranking metrics, ablation and subgroup reports, and 2-D projections.

mod projection;
mod report;

pub use projection::{project_embeddings, write_projection_csv, Projection};
pub use report::{
    evaluate_variant, format_percent, subgroup_report, EvalReport, ScoredSet, SubgroupRow,
    VariantRow,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("metric needs at least one positive and one negative")]
    SingleClass,
    #[error("metric needs at least one positive")]
    NoPositives,
    #[error("non-finite score at index {0}")]
    NonFinite(usize),
    #[error("label at index {0} is not 0 or 1")]
    Label(usize),
    #[error("baseline must be positive, got {0}")]
    Baseline(f64),
    #[error("projection needs at least 2 rows of equal width >= 2")]
    Shape,
    #[error("cannot write {path}: {reason}")]
    Io { path: String, reason: String },
}

fn check(scores: &[f64], labels: &[u8]) -> Result<(usize, usize), MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFinite(i));
    }
    if let Some(i) = labels.iter().position(|&y| y > 1) {
        return Err(MetricsError::Label(i));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    Ok((pos, labels.len() - pos))
}

/// Indices sorted by descending score, with runs of equal scores.
fn tie_groups(scores: &[f64]) -> (Vec<usize>, Vec<std::ops::Range<usize>>) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups = Vec::new();
    let mut start = 0;
    for k in 1..=order.len() {
        if k == order.len() || scores[order[k]] != scores[order[start]] {
            groups.push(start..k);
            start = k;
        }
    }
    (order, groups)
}

/// Area under the ROC curve: the fraction of positive/negative pairs ranked
/// correctly, ties counting one half.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64, MetricsError> {
    let (p, n) = check(scores, labels)?;
    if p == 0 || n == 0 {
        return Err(MetricsError::SingleClass);
    }
    let (order, groups) = tie_groups(scores);
    // Walking down from the top, each positive beats every negative not yet
    // seen and ties with negatives in its own group.
    let mut negatives_above = 0.0;
    let mut credit = 0.0;
    for g in groups {
        let pos = order[g.clone()].iter().filter(|&&i| labels[i] == 1).count() as f64;
        let neg = g.len() as f64 - pos;
        credit += pos * (n as f64 - negatives_above - neg) + 0.5 * pos * neg;
        negatives_above += neg;
    }
    Ok(credit / (p as f64 * n as f64))
}

/// Average precision with tied scores sharing one threshold:
/// `sum_k (R_k - R_{k-1}) P_k` over descending distinct scores.
pub fn auprc(scores: &[f64], labels: &[u8]) -> Result<f64, MetricsError> {
    let (p, _) = check(scores, labels)?;
    if p == 0 {
        return Err(MetricsError::NoPositives);
    }
    let (order, groups) = tie_groups(scores);
    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0);
    for g in groups {
        let pos = order[g.clone()].iter().filter(|&&i| labels[i] == 1).count();
        tp += pos;
        seen += g.len();
        if pos > 0 {
            ap += (pos as f64 / p as f64) * (tp as f64 / seen as f64);
        }
    }
    Ok(ap)
}

/// Reference implementations by explicit enumeration; quadratic, for tests.
pub fn brute_force_metrics(scores: &[f64], labels: &[u8]) -> Result<(f64, f64), MetricsError> {
    let (p, n) = check(scores, labels)?;
    if p == 0 || n == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    let roc = pairs / (p * n) as f64;

    let mut thresholds = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for t in thresholds {
        let predicted: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= t).collect();
        let tp = predicted.iter().filter(|&&i| labels[i] == 1).count();
        let precision = tp as f64 / predicted.len() as f64;
        let recall = tp as f64 / p as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok((roc, ap))
}

/// Percent change of `metric` over `baseline`.
pub fn improvement(metric: f64, baseline: f64) -> Result<f64, MetricsError> {
    if !(baseline.is_finite() && baseline > 0.0) {
        return Err(MetricsError::Baseline(baseline));
    }
    Ok(100.0 * (metric - baseline) / baseline)
}
