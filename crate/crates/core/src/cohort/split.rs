use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CohortError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub fractions: SplitFractions,
    pub seed: u64,
}

impl CohortSplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

/// Seeded random partition. Validation and test sizes are `floor(n * f)`;
/// the remainder goes to training.
pub fn split_cohort<S: AsRef<str>>(
    ids: &[S],
    fractions: SplitFractions,
    seed: u64,
) -> Result<CohortSplit, CohortError> {
    let n = ids.len();
    if n < 3 {
        return Err(CohortError::Split(format!(
            "need at least 3 episodes, got {n}"
        )));
    }
    let SplitFractions { train, val, test } = fractions;
    if !(train > 0.0 && val > 0.0 && test > 0.0) {
        return Err(CohortError::Split("fractions must be positive".into()));
    }
    if ((train + val + test) - 1.0).abs() > 1e-9 {
        return Err(CohortError::Split(format!(
            "fractions sum to {}, expected 1",
            train + val + test
        )));
    }
    let mut seen = std::collections::HashSet::with_capacity(n);
    for id in ids {
        if !seen.insert(id.as_ref()) {
            return Err(CohortError::Split(format!(
                "duplicate episode id `{}`",
                id.as_ref()
            )));
        }
    }

    // The 1e-9 guards against products such as 0.29 * 100 landing just below
    // an integer.
    let n_val = (n as f64 * val + 1e-9).floor() as usize;
    let n_test = (n as f64 * test + 1e-9).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = |range: std::ops::Range<usize>| -> Vec<String> {
        order[range]
            .iter()
            .map(|&i| ids[i].as_ref().to_string())
            .collect()
    };
    let n_train = n - n_val - n_test;
    Ok(CohortSplit {
        train: take(0..n_train),
        val: take(n_train..n_train + n_val),
        test: take(n_train + n_val..n),
        fractions,
        seed,
    })
}
