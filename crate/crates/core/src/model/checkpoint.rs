use serde::{Deserialize, Serialize};

use super::{FusionModelParams, ModelDims, ModelError, ModelVariant};

pub const PARAMS_FORMAT_VERSION: u32 = 1;

/// Serialized form of [`FusionModelParams`]. Matrices are row-major; see
/// [`super::Layout`] for the gate order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub format_version: u32,
    pub variant: ModelVariant,
    pub dims: ModelDims,
    pub init_seed: u64,
    pub lstm_w: Vec<f64>,
    pub lstm_b: Vec<f64>,
    pub head_w: Vec<f64>,
    pub head_b: f64,
}

impl ParamsFile {
    pub fn from_params(params: &FusionModelParams, init_seed: u64) -> Self {
        Self {
            format_version: PARAMS_FORMAT_VERSION,
            variant: params.variant,
            dims: params.dims,
            init_seed,
            lstm_w: params.lstm_w().to_vec(),
            lstm_b: params.lstm_b().to_vec(),
            head_w: params.head_w().to_vec(),
            head_b: params.head_b(),
        }
    }

    pub fn to_params(&self) -> Result<FusionModelParams, ModelError> {
        if self.format_version != PARAMS_FORMAT_VERSION {
            return Err(ModelError::Version(self.format_version));
        }
        let mut theta = Vec::new();
        theta.extend_from_slice(&self.lstm_w);
        theta.extend_from_slice(&self.lstm_b);
        theta.extend_from_slice(&self.head_w);
        theta.push(self.head_b);
        let p = FusionModelParams::from_theta(self.variant, self.dims, theta)?;
        let l = p.layout();
        for (what, expected, found) in [
            ("lstm_w", l.lstm_w.len(), self.lstm_w.len()),
            ("lstm_b", l.lstm_b.len(), self.lstm_b.len()),
            ("head_w", l.head_w.len(), self.head_w.len()),
        ] {
            if expected != found {
                return Err(ModelError::Shape {
                    what,
                    expected,
                    found,
                });
            }
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward, ModelInput};

    #[test]
    fn json_round_trip_is_bit_exact() {
        let dims = ModelDims {
            d: 3,
            h: 4,
            b: 5,
            t: 6,
        };
        let p = FusionModelParams::init(ModelVariant::TsNotesExpert, dims, 42).unwrap();
        let json = serde_json::to_string(&ParamsFile::from_params(&p, 42)).unwrap();
        let back: ParamsFile = serde_json::from_str(&json).unwrap();
        let q = back.to_params().unwrap();
        assert_eq!(
            p.theta.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            q.theta.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        assert!(q.lstm_b()[4..8].iter().all(|&b| b == 1.0));
        let input = ModelInput {
            x: Some(vec![vec![0.3; 6]; 6]),
            u: Some(vec![0.1; 5]),
            v: Some(vec![-0.2; 5]),
        };
        assert_eq!(
            forward(&input, &p).unwrap().y_hat.to_bits(),
            forward(&input, &q).unwrap().y_hat.to_bits()
        );
    }

    #[test]
    fn rejects_wrong_version_and_shape() {
        let dims = ModelDims {
            d: 1,
            h: 1,
            b: 2,
            t: 2,
        };
        let p = FusionModelParams::init(ModelVariant::TsNotes, dims, 1).unwrap();
        let mut f = ParamsFile::from_params(&p, 1);
        f.format_version = 99;
        assert_eq!(f.to_params().unwrap_err(), ModelError::Version(99));
        let mut f = ParamsFile::from_params(&p, 1);
        f.head_w.pop();
        f.lstm_b.push(0.0);
        assert!(f.to_params().is_err());
    }
}
