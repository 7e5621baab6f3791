//! LSTM over vitals plus mask, a linear fusion head over `[H_T; U_T; V]`,
//! analytic gradients and a finite-difference verifier.

mod checkpoint;
mod fusion;
mod gradcheck;
mod lstm;

pub use checkpoint::{ParamsFile, PARAMS_FORMAT_VERSION};
pub use fusion::{
    backward, batch_gradient, batch_objective, bce_from_logit, forward, stable_sigmoid, Example,
    ForwardTrace, ModelInput,
};
pub use gradcheck::gradient_check;
pub use lstm::{lstm_forward, LstmTrace};

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("variant {variant} needs the {modality} input")]
    MissingModality {
        variant: ModelVariant,
        modality: &'static str,
    },
    #[error("shape mismatch for {what}: expected {expected}, got {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite LSTM state at timestep {timestep}")]
    NonFinite { timestep: usize },
    #[error("invalid dimensions: {0}")]
    Dims(String),
    #[error("unknown variant `{0}`")]
    UnknownVariant(String),
    #[error("unsupported parameter format version {0}")]
    Version(u32),
}

/// The five ablation configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    TsOnly,
    NotesOnly,
    ExpertOnly,
    TsNotes,
    TsNotesExpert,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 5] = [
        ModelVariant::TsOnly,
        ModelVariant::NotesOnly,
        ModelVariant::ExpertOnly,
        ModelVariant::TsNotes,
        ModelVariant::TsNotesExpert,
    ];

    pub fn uses_ts(self) -> bool {
        matches!(self, Self::TsOnly | Self::TsNotes | Self::TsNotesExpert)
    }

    pub fn uses_notes(self) -> bool {
        matches!(self, Self::NotesOnly | Self::TsNotes | Self::TsNotesExpert)
    }

    pub fn uses_expert(self) -> bool {
        matches!(self, Self::ExpertOnly | Self::TsNotesExpert)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::TsOnly => "ts_only",
            Self::NotesOnly => "notes_only",
            Self::ExpertOnly => "expert_only",
            Self::TsNotes => "ts_notes",
            Self::TsNotesExpert => "ts_notes_expert",
        }
    }

    /// Row label used in ablation tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Self::TsOnly => "Time-Series (Only)",
            Self::NotesOnly => "Clinical Notes (Only)",
            Self::ExpertOnly => "Expert Opinion (Only)",
            Self::TsNotes => "Time-Series w/ Clinical Notes",
            Self::TsNotesExpert => "Time-Series w/ Clinical Notes + Expert Opinion",
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelVariant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Self::ALL
            .into_iter()
            .find(|v| v.as_str().replace('_', "") == key)
            .ok_or_else(|| ModelError::UnknownVariant(s.to_string()))
    }
}

/// `d` vitals channels, `h` LSTM units, `b` text width, `t` hours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub d: usize,
    pub h: usize,
    pub b: usize,
    pub t: usize,
}

impl ModelDims {
    /// LSTM input width: vitals followed by their mask.
    pub fn din(&self) -> usize {
        2 * self.d
    }

    pub fn fusion_width(&self, variant: ModelVariant) -> usize {
        self.h * usize::from(variant.uses_ts())
            + self.b * usize::from(variant.uses_notes())
            + self.b * usize::from(variant.uses_expert())
    }

    pub fn validate(&self, variant: ModelVariant) -> Result<(), ModelError> {
        if variant.uses_ts() && (self.d == 0 || self.h == 0 || self.t == 0) {
            return Err(ModelError::Dims(format!(
                "{variant} needs d, h, t > 0, got {self:?}"
            )));
        }
        if (variant.uses_notes() || variant.uses_expert()) && self.b == 0 {
            return Err(ModelError::Dims(format!("{variant} needs b > 0")));
        }
        Ok(())
    }
}

/// Offsets of each tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    /// `4h x (din + h)`, row-major, gate blocks in order i, f, g, o; columns
    /// are `[x_t; h_{t-1}]`.
    pub lstm_w: Range<usize>,
    /// `4h`, same gate order.
    pub lstm_b: Range<usize>,
    pub head_w: Range<usize>,
    pub head_b: usize,
}

impl Layout {
    pub fn new(variant: ModelVariant, dims: &ModelDims) -> Self {
        let (nw, nb) = if variant.uses_ts() {
            (4 * dims.h * (dims.din() + dims.h), 4 * dims.h)
        } else {
            (0, 0)
        };
        let width = dims.fusion_width(variant);
        let lstm_w = 0..nw;
        let lstm_b = nw..nw + nb;
        let head_w = lstm_b.end..lstm_b.end + width;
        Self {
            head_b: head_w.end,
            lstm_w,
            lstm_b,
            head_w,
        }
    }

    pub fn len(&self) -> usize {
        self.head_b + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates subject to the L2 penalty (weights, not biases).
    pub fn is_weight(&self, i: usize) -> bool {
        self.lstm_w.contains(&i) || self.head_w.contains(&i)
    }
}

/// All learnable values of one variant, stored flat in `theta` following
/// [`Layout`].
#[derive(Debug, Clone, PartialEq)]
pub struct FusionModelParams {
    pub variant: ModelVariant,
    pub dims: ModelDims,
    pub theta: Vec<f64>,
    layout: Layout,
}

impl FusionModelParams {
    pub fn zeros(variant: ModelVariant, dims: ModelDims) -> Result<Self, ModelError> {
        dims.validate(variant)?;
        let layout = Layout::new(variant, &dims);
        Ok(Self {
            variant,
            dims,
            theta: vec![0.0; layout.len()],
            layout,
        })
    }

    /// Weights uniform in `(-k, k)` with `k = 1/sqrt(fan_in)`, forget-gate
    /// bias 1, other biases 0.
    pub fn init(variant: ModelVariant, dims: ModelDims, seed: u64) -> Result<Self, ModelError> {
        let mut p = Self::zeros(variant, dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = p.layout.clone();
        if variant.uses_ts() {
            let k = 1.0 / ((dims.din() + dims.h) as f64).sqrt();
            p.theta[l.lstm_w.clone()]
                .iter_mut()
                .for_each(|w| *w = rng.random_range(-k..k));
            p.theta[l.lstm_b.start + dims.h..l.lstm_b.start + 2 * dims.h].fill(1.0);
        }
        let k = 1.0 / (dims.fusion_width(variant) as f64).sqrt();
        p.theta[l.head_w.clone()]
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-k..k));
        Ok(p)
    }

    pub fn from_theta(
        variant: ModelVariant,
        dims: ModelDims,
        theta: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let mut p = Self::zeros(variant, dims)?;
        if theta.len() != p.theta.len() {
            return Err(ModelError::Shape {
                what: "parameter vector",
                expected: p.theta.len(),
                found: theta.len(),
            });
        }
        p.theta = theta;
        Ok(p)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn lstm_w(&self) -> &[f64] {
        &self.theta[self.layout.lstm_w.clone()]
    }

    pub fn lstm_b(&self) -> &[f64] {
        &self.theta[self.layout.lstm_b.clone()]
    }

    pub fn head_w(&self) -> &[f64] {
        &self.theta[self.layout.head_w.clone()]
    }

    pub fn head_w_mut(&mut self) -> &mut [f64] {
        let r = self.layout.head_w.clone();
        &mut self.theta[r]
    }

    pub fn head_b(&self) -> f64 {
        self.theta[self.layout.head_b]
    }

    /// `sum(w^2)` over weights only.
    pub fn weight_sq_norm(&self) -> f64 {
        self.lstm_w()
            .iter()
            .chain(self.head_w())
            .map(|w| w * w)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|x| x.is_finite())
    }
}
