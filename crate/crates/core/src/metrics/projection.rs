use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MetricsError;

const MAX_ITERS: usize = 3000;
const TOL: f64 = 1e-12;

/// Rows projected onto the top two principal directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coords: Vec<[f64; 2]>,
    pub mean: Vec<f64>,
    pub components: [Vec<f64>; 2],
    /// Sample variance along each component.
    pub explained_variance: [f64; 2],
    /// Sum of per-column sample variances.
    pub total_variance: f64,
    pub warning: Option<String>,
}

impl Projection {
    pub fn explained_ratio(&self) -> f64 {
        if self.total_variance > 0.0 {
            (self.explained_variance[0] + self.explained_variance[1]) / self.total_variance
        } else {
            0.0
        }
    }

    /// Inverse map of row `i` back into the input space.
    pub fn reconstruct(&self, i: usize) -> Vec<f64> {
        let [c1, c2] = self.coords[i];
        self.mean
            .iter()
            .zip(self.components[0].iter().zip(&self.components[1]))
            .map(|(m, (a, b))| m + c1 * a + c2 * b)
            .collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `X^T X v / (n - 1)` without forming the covariance.
fn cov_apply(x: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for row in x {
        let s: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
        for (o, a) in out.iter_mut().zip(row) {
            *o += s * a;
        }
    }
    let scale = 1.0 / (x.len() - 1) as f64;
    out.iter_mut().for_each(|o| *o *= scale);
    out
}

fn orthogonalize(v: &mut [f64], against: &[Vec<f64>]) {
    for u in against {
        let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
        v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
    }
}

/// Leading eigenvector of the covariance orthogonal to `found`, with the
/// sign fixed so its largest-magnitude entry is positive.
fn power_iteration(x: &[Vec<f64>], found: &[Vec<f64>], rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let k = x[0].len();
    let mut v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    orthogonalize(&mut v, found);
    let n0 = norm(&v);
    v.iter_mut().for_each(|a| *a /= n0);
    for _ in 0..MAX_ITERS {
        let mut w = cov_apply(x, &v);
        orthogonalize(&mut w, found);
        let nw = norm(&w);
        if nw == 0.0 {
            break;
        }
        w.iter_mut().for_each(|a| *a /= nw);
        let delta: f64 = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = w;
        if delta < TOL {
            break;
        }
    }
    let pivot = v
        .iter()
        .copied()
        .fold(0.0f64, |m, a| if a.abs() > m.abs() { a } else { m });
    if pivot < 0.0 {
        v.iter_mut().for_each(|a| *a = -*a);
    }
    let cv = cov_apply(x, &v);
    let lambda: f64 = cv.iter().zip(&v).map(|(a, b)| a * b).sum();
    (v, lambda.max(0.0))
}

/// PCA to two dimensions by power iteration with deflation. Constant input
/// yields zero coordinates and a warning.
pub fn project_embeddings(vectors: &[Vec<f64>], seed: u64) -> Result<Projection, MetricsError> {
    let n = vectors.len();
    if n < 2 {
        return Err(MetricsError::Shape);
    }
    let k = vectors[0].len();
    if k < 2 || vectors.iter().any(|r| r.len() != k) {
        return Err(MetricsError::Shape);
    }
    let mut mean = vec![0.0; k];
    for row in vectors {
        mean.iter_mut().zip(row).for_each(|(m, a)| *m += a);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered: Vec<Vec<f64>> = vectors
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(a, m)| a - m).collect())
        .collect();
    let total_variance = centered.iter().flatten().map(|a| a * a).sum::<f64>() / (n - 1) as f64;
    if total_variance == 0.0 {
        return Ok(Projection {
            coords: vec![[0.0; 2]; n],
            mean,
            components: [vec![0.0; k], vec![0.0; k]],
            explained_variance: [0.0; 2],
            total_variance,
            warning: Some("input has zero variance; projection is all zeros".into()),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (v1, l1) = power_iteration(&centered, &[], &mut rng);
    let (v2, l2) = power_iteration(&centered, std::slice::from_ref(&v1), &mut rng);
    let coords = centered
        .iter()
        .map(|r| {
            let dot = |v: &[f64]| r.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
            [dot(&v1), dot(&v2)]
        })
        .collect();
    Ok(Projection {
        coords,
        mean,
        components: [v1, v2],
        explained_variance: [l1, l2],
        total_variance,
        warning: None,
    })
}

/// Writes `episode_id,label,comp1,comp2`.
pub fn write_projection_csv(
    path: &Path,
    episode_ids: &[String],
    labels: &[u8],
    projection: &Projection,
) -> Result<(), MetricsError> {
    let io = |e: &dyn std::fmt::Display| MetricsError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    if episode_ids.len() != projection.coords.len() || labels.len() != episode_ids.len() {
        return Err(MetricsError::LengthMismatch {
            scores: projection.coords.len(),
            labels: episode_ids.len(),
        });
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| io(&e))?;
    w.write_record(["episode_id", "label", "comp1", "comp2"])
        .map_err(|e| io(&e))?;
    for ((id, y), [c1, c2]) in episode_ids.iter().zip(labels).zip(&projection.coords) {
        w.write_record([id.clone(), y.to_string(), c1.to_string(), c2.to_string()])
            .map_err(|e| io(&e))?;
    }
    w.flush().map_err(|e| io(&e))
}
