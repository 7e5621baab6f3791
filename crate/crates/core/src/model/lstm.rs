use super::fusion::stable_sigmoid;
use super::{FusionModelParams, ModelError};

/// Activations of one unrolled sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmTrace {
    pub h: usize,
    /// Post-activation gates per step, `T x 4h`, order i, f, g, o.
    pub gates: Vec<Vec<f64>>,
    /// Cell states `c_1..c_T`.
    pub cells: Vec<Vec<f64>>,
    /// Hidden states `H_1..H_T`.
    pub hidden: Vec<Vec<f64>>,
}

impl LstmTrace {
    pub fn last_hidden(&self) -> &[f64] {
        self.hidden.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Single-layer LSTM from zero initial state.
pub fn lstm_forward(x: &[Vec<f64>], params: &FusionModelParams) -> Result<LstmTrace, ModelError> {
    let dims = params.dims;
    let (h, din) = (dims.h, dims.din());
    if x.len() != dims.t {
        return Err(ModelError::Shape {
            what: "time steps",
            expected: dims.t,
            found: x.len(),
        });
    }
    if let Some(row) = x.iter().find(|r| r.len() != din) {
        return Err(ModelError::Shape {
            what: "LSTM input width",
            expected: din,
            found: row.len(),
        });
    }
    let w = params.lstm_w();
    let bias = params.lstm_b();
    let cols = din + h;
    let mut trace = LstmTrace {
        h,
        gates: Vec::with_capacity(dims.t),
        cells: Vec::with_capacity(dims.t),
        hidden: Vec::with_capacity(dims.t),
    };
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    for (t, xt) in x.iter().enumerate() {
        let mut a: Vec<f64> = (0..4 * h)
            .map(|r| {
                let row = &w[r * cols..(r + 1) * cols];
                bias[r] + dot(&row[..din], xt) + dot(&row[din..], &h_prev)
            })
            .collect();
        for (r, v) in a.iter_mut().enumerate() {
            *v = if (2 * h..3 * h).contains(&r) {
                v.tanh()
            } else {
                stable_sigmoid(*v)
            };
        }
        let mut c = vec![0.0; h];
        let mut hn = vec![0.0; h];
        for j in 0..h {
            let (i, f, g, o) = (a[j], a[h + j], a[2 * h + j], a[3 * h + j]);
            c[j] = f * c_prev[j] + i * g;
            hn[j] = o * c[j].tanh();
        }
        if !c.iter().chain(&hn).all(|v| v.is_finite()) {
            return Err(ModelError::NonFinite { timestep: t + 1 });
        }
        trace.gates.push(a);
        trace.cells.push(c.clone());
        trace.hidden.push(hn.clone());
        h_prev = hn;
        c_prev = c;
    }
    Ok(trace)
}

/// Backpropagation through time given `dL/dH_T`. Gradients are added into
/// `grad_w` and `grad_b`.
pub(crate) fn lstm_backward(
    x: &[Vec<f64>],
    params: &FusionModelParams,
    trace: &LstmTrace,
    d_h_last: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) {
    let dims = params.dims;
    let (h, din) = (dims.h, dims.din());
    let cols = din + h;
    let w = params.lstm_w();
    let zeros = vec![0.0; h];
    let mut dh = d_h_last.to_vec();
    let mut dc_next = vec![0.0; h];
    let mut da = vec![0.0; 4 * h];
    for t in (0..dims.t).rev() {
        let gates = &trace.gates[t];
        let c = &trace.cells[t];
        let c_prev = if t > 0 { &trace.cells[t - 1] } else { &zeros };
        let h_prev = if t > 0 { &trace.hidden[t - 1] } else { &zeros };
        for j in 0..h {
            let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            let tc = c[j].tanh();
            let dc = dc_next[j] + dh[j] * o * (1.0 - tc * tc);
            da[j] = dc * g * i * (1.0 - i);
            da[h + j] = dc * c_prev[j] * f * (1.0 - f);
            da[2 * h + j] = dc * i * (1.0 - g * g);
            da[3 * h + j] = dh[j] * tc * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        let xt = &x[t];
        for (r, &dar) in da.iter().enumerate() {
            grad_b[r] += dar;
            if dar == 0.0 {
                continue;
            }
            let gw = &mut grad_w[r * cols..(r + 1) * cols];
            for (g, xv) in gw[..din].iter_mut().zip(xt) {
                *g += dar * xv;
            }
            for (g, hv) in gw[din..].iter_mut().zip(h_prev) {
                *g += dar * hv;
            }
        }
        dh.fill(0.0);
        for (r, &dar) in da.iter().enumerate() {
            let row = &w[r * cols + din..(r + 1) * cols];
            for (d, wv) in dh.iter_mut().zip(row) {
                *d += dar * wv;
            }
        }
    }
}
