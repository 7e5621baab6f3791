use super::lstm::{lstm_backward, lstm_forward, LstmTrace};
use super::{FusionModelParams, ModelError, ModelVariant};

/// Per-episode tensors. Absent modalities may be `None` when the variant
/// ignores them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelInput {
    /// `T x 2d`: standardized vitals followed by the mask.
    pub x: Option<Vec<Vec<f64>>>,
    /// Aggregated note embedding at `t = T`.
    pub u: Option<Vec<f64>>,
    /// Summary embedding.
    pub v: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: ModelInput,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub lstm: Option<LstmTrace>,
    /// `[H_T; U_T; V]` restricted to the variant's modalities, in that order.
    pub h_concat: Vec<f64>,
    pub z: f64,
    pub y_hat: f64,
}

/// `1 / (1 + e^-z)` evaluated without overflow for any finite `z`.
pub fn stable_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-[y ln s(z) + (1-y) ln(1-s(z))] = softplus(z) - y z`.
pub fn bce_from_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z
}

fn require<'a, T>(
    v: &'a Option<T>,
    variant: ModelVariant,
    modality: &'static str,
) -> Result<&'a T, ModelError> {
    v.as_ref()
        .ok_or(ModelError::MissingModality { variant, modality })
}

fn check_len(what: &'static str, v: &[f64], expected: usize) -> Result<(), ModelError> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(ModelError::Shape {
            what,
            expected,
            found: v.len(),
        })
    }
}

pub fn forward(input: &ModelInput, params: &FusionModelParams) -> Result<ForwardTrace, ModelError> {
    let variant = params.variant;
    let dims = params.dims;
    let mut h_concat = Vec::with_capacity(dims.fusion_width(variant));
    let mut lstm = None;
    if variant.uses_ts() {
        let tr = lstm_forward(require(&input.x, variant, "time-series")?, params)?;
        h_concat.extend_from_slice(tr.last_hidden());
        lstm = Some(tr);
    }
    if variant.uses_notes() {
        let u = require(&input.u, variant, "notes")?;
        check_len("note embedding", u, dims.b)?;
        h_concat.extend_from_slice(u);
    }
    if variant.uses_expert() {
        let v = require(&input.v, variant, "summary")?;
        check_len("summary embedding", v, dims.b)?;
        h_concat.extend_from_slice(v);
    }
    let z = params.head_b()
        + params
            .head_w()
            .iter()
            .zip(&h_concat)
            .map(|(w, x)| w * x)
            .sum::<f64>();
    Ok(ForwardTrace {
        lstm,
        h_concat,
        z,
        y_hat: stable_sigmoid(z),
    })
}

/// Adds `scale * dBCE/dtheta` for one example into `grad`.
fn accumulate_data_grad(
    input: &ModelInput,
    trace: &ForwardTrace,
    y: f64,
    params: &FusionModelParams,
    scale: f64,
    grad: &mut [f64],
) {
    let l = params.layout();
    let dz = scale * (trace.y_hat - y);
    grad[l.head_b] += dz;
    for (g, x) in grad[l.head_w.clone()].iter_mut().zip(&trace.h_concat) {
        *g += dz * x;
    }
    if let (Some(tr), Some(x)) = (&trace.lstm, &input.x) {
        let h = params.dims.h;
        let d_h: Vec<f64> = params.head_w()[..h].iter().map(|w| dz * w).collect();
        let (w_part, rest) = grad.split_at_mut(l.lstm_b.start);
        lstm_backward(
            x,
            params,
            tr,
            &d_h,
            &mut w_part[l.lstm_w.clone()],
            &mut rest[..l.lstm_b.len()],
        );
    }
}

fn add_l2_grad(params: &FusionModelParams, l2: f64, grad: &mut [f64]) {
    if l2 == 0.0 {
        return;
    }
    let l = params.layout();
    for r in [l.lstm_w.clone(), l.head_w.clone()] {
        for i in r {
            grad[i] += 2.0 * l2 * params.theta[i];
        }
    }
}

/// Gradient of `BCE(y_hat, y) + l2 * ||weights||^2` for a single example.
pub fn backward(
    input: &ModelInput,
    trace: &ForwardTrace,
    y: u8,
    l2: f64,
    params: &FusionModelParams,
) -> Vec<f64> {
    let mut grad = vec![0.0; params.theta.len()];
    accumulate_data_grad(input, trace, f64::from(y), params, 1.0, &mut grad);
    add_l2_grad(params, l2, &mut grad);
    grad
}

/// Mean BCE over `batch` plus `l2 * ||weights||^2`.
pub fn batch_objective(
    params: &FusionModelParams,
    batch: &[&Example],
    l2: f64,
) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for ex in batch {
        let tr = forward(&ex.input, params)?;
        total += bce_from_logit(tr.z, f64::from(ex.label));
    }
    Ok(total / batch.len().max(1) as f64 + l2 * params.weight_sq_norm())
}

/// Objective and its gradient. Per-example contributions are reduced in
/// batch order.
pub fn batch_gradient(
    params: &FusionModelParams,
    batch: &[&Example],
    l2: f64,
) -> Result<(f64, Vec<f64>), ModelError> {
    let mut grad = vec![0.0; params.theta.len()];
    let scale = 1.0 / batch.len().max(1) as f64;
    let mut total = 0.0;
    for ex in batch {
        let tr = forward(&ex.input, params)?;
        let y = f64::from(ex.label);
        total += bce_from_logit(tr.z, y);
        accumulate_data_grad(&ex.input, &tr, y, params, scale, &mut grad);
    }
    add_l2_grad(params, l2, &mut grad);
    Ok((total * scale + l2 * params.weight_sq_norm(), grad))
}
