use serde::{Deserialize, Serialize};

use super::FeaturizerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    L2,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingSpec {
    pub dim: usize,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub hash_seed: u64,
    pub normalization: Normalization,
}

impl Default for EmbeddingSpec {
    fn default() -> Self {
        Self::desk()
    }
}

impl EmbeddingSpec {
    /// 256-dimensional unigram+bigram embedding.
    pub fn desk() -> Self {
        Self {
            dim: 256,
            ngram_min: 1,
            ngram_max: 2,
            hash_seed: 0,
            normalization: Normalization::L2,
        }
    }

    /// Same featurizer at the width of a BERT-base encoder (768).
    pub fn bert_width() -> Self {
        Self {
            dim: 768,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<(), FeaturizerError> {
        if self.dim < 8 {
            return Err(FeaturizerError::Spec(format!(
                "dim must be at least 8, got {}",
                self.dim
            )));
        }
        if self.ngram_min == 0 || self.ngram_min > self.ngram_max {
            return Err(FeaturizerError::Spec(format!(
                "invalid n-gram range ({}, {})",
                self.ngram_min, self.ngram_max
            )));
        }
        Ok(())
    }
}

/// Lowercased runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded FNV-1a with a splitmix finalizer; identical on every platform.
fn hash_gram(gram: &[&str], seed: u64) -> u64 {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = 0xcbf2_9ce4_8422_2325 ^ splitmix64(seed);
    for (i, tok) in gram.iter().enumerate() {
        if i > 0 {
            h ^= u64::from(b' ');
            h = h.wrapping_mul(PRIME);
        }
        for &b in tok.as_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(PRIME);
        }
    }
    splitmix64(h)
}

/// Signed hashed bag of word n-grams. Empty (or token-free) text maps to the
/// zero vector. Panics if `spec` fails validation.
pub fn embed_text(text: &str, spec: &EmbeddingSpec) -> Vec<f64> {
    spec.validate().expect("valid embedding spec");
    let mut out = vec![0.0; spec.dim];
    let tokens = tokenize(text);
    let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
    for n in spec.ngram_min..=spec.ngram_max {
        for gram in refs.windows(n) {
            let h = hash_gram(gram, spec.hash_seed);
            let idx = (h % spec.dim as u64) as usize;
            let sign = if splitmix64(h) >> 63 == 0 { 1.0 } else { -1.0 };
            out[idx] += sign;
        }
    }
    if spec.normalization == Normalization::L2 {
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.iter_mut().for_each(|v| *v /= norm);
        }
    }
    out
}
