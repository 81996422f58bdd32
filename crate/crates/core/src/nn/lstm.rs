//! LSTM cell and sequence unrolling with backpropagation through time.
//!
//! Gate equations, with `[a, b]` concatenation written out as separate
//! recurrent (`*_h`) and input (`*_x`) weight matrices:
//!
//! ```text
//! f_t = σ(W_fh h_{t-1} + W_fx x_t + b_f)
//! i_t = σ(W_ih h_{t-1} + W_ix x_t + b_i)
//! g_t = tanh(W_ch h_{t-1} + W_cx x_t + b_c)
//! C_t = f_t ⊙ C_{t-1} + i_t ⊙ g_t
//! o_t = σ(W_oh h_{t-1} + W_ox x_t + b_o)
//! h_t = o_t ⊙ tanh(C_t)
//! ```

use rand::Rng;

use super::activation::sigmoid_scalar;
use super::layers::dot;
use super::params::Params;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Memory cell and hidden state after a step.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub cell: Tensor,
    pub hidden: Tensor,
}

impl LstmState {
    pub fn zeros(hidden_size: usize) -> Self {
        Self {
            cell: Tensor::zeros(&[hidden_size]),
            hidden: Tensor::zeros(&[hidden_size]),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden.len()
    }
}

/// Gate activations of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Gates {
    pub forget: Tensor,
    pub input: Tensor,
    pub candidate: Tensor,
    pub output: Tensor,
}

/// Gate identifiers, in the order their parameters are named.
const GATES: [(char, &str); 4] = [('f', "forget"), ('i', "input"), ('c', "candidate"), ('o', "output")];

/// Borrowed view of the twelve LSTM parameter tensors.
#[derive(Clone, Copy, Debug)]
pub struct LstmWeights<'a> {
    /// `[W_*h, W_*x, b_*]` for forget, input, candidate, output.
    gates: [(&'a Tensor, &'a Tensor, &'a Tensor); 4],
    hidden: usize,
    input_dim: usize,
}

impl<'a> LstmWeights<'a> {
    /// Looks up `{prefix}w_fh`, `{prefix}w_fx`, `{prefix}b_f`, ... and checks
    /// that every matrix maps (H + D) inputs to H outputs.
    pub fn from_params(params: &'a Params, prefix: &str) -> Result<Self> {
        let w_fh = params.get(&format!("{prefix}w_fh"))?;
        let hidden = w_fh.shape().first().copied().unwrap_or(0);
        let w_fx = params.get(&format!("{prefix}w_fx"))?;
        let input_dim = w_fx.shape().get(1).copied().unwrap_or(0);
        let mut gates = Vec::with_capacity(4);
        for (g, _) in GATES {
            let wh_name = format!("{prefix}w_{g}h");
            let wx_name = format!("{prefix}w_{g}x");
            let b_name = format!("{prefix}b_{g}");
            let wh = params.get(&wh_name)?;
            let wx = params.get(&wx_name)?;
            let b = params.get(&b_name)?;
            for (name, t, want) in [
                (&wh_name, wh, vec![hidden, hidden]),
                (&wx_name, wx, vec![hidden, input_dim]),
                (&b_name, b, vec![hidden]),
            ] {
                if t.shape() != want.as_slice() {
                    return Err(Error::shape(
                        format!("parameter `{name}`"),
                        format!("expected {want:?}, got {:?}", t.shape()),
                    ));
                }
            }
            gates.push((wh, wx, b));
        }
        Ok(Self {
            gates: [gates[0], gates[1], gates[2], gates[3]],
            hidden,
            input_dim,
        })
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }
}

/// Parameter names and shapes of an LSTM with the given sizes.
pub fn lstm_param_shapes(prefix: &str, input_dim: usize, hidden: usize) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    for (g, _) in GATES {
        out.push((format!("{prefix}w_{g}h"), vec![hidden, hidden]));
        out.push((format!("{prefix}w_{g}x"), vec![hidden, input_dim]));
        out.push((format!("{prefix}b_{g}"), vec![hidden]));
    }
    out
}

/// Xavier-uniform weights; forget-gate bias 1, other biases 0.
pub fn init_lstm_params(prefix: &str, input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Params {
    let mut p = Params::new();
    let bound = (6.0 / (input_dim + 2 * hidden) as f64).sqrt();
    for (name, shape) in lstm_param_shapes(prefix, input_dim, hidden) {
        let n: usize = shape.iter().product();
        let t = if name.ends_with("b_f") {
            Tensor::filled(&shape, 1.0)
        } else if shape.len() == 1 {
            Tensor::zeros(&shape)
        } else {
            Tensor::new(shape, (0..n).map(|_| rng.gen_range(-bound..bound)).collect()).unwrap()
        };
        p.insert(name, t);
    }
    p
}

fn affine(wh: &Tensor, wx: &Tensor, b: &Tensor, h: &[f64], x: &[f64], row: usize) -> f64 {
    let hd = h.len();
    let xd = x.len();
    b.data()[row] + dot(&wh.data()[row * hd..(row + 1) * hd], h) + dot(&wx.data()[row * xd..(row + 1) * xd], x)
}

/// One application of the gate equations.
pub fn lstm_step(prev: &LstmState, x_t: &Tensor, weights: &LstmWeights<'_>) -> Result<(LstmState, Gates)> {
    let h = weights.hidden;
    if prev.hidden.len() != h || prev.cell.len() != h {
        return Err(Error::shape(
            "lstm_step state",
            format!(
                "hidden size {h}, state has cell {} / hidden {}",
                prev.cell.len(),
                prev.hidden.len()
            ),
        ));
    }
    if x_t.len() != weights.input_dim {
        return Err(Error::shape(
            "lstm_step input",
            format!("expected {} features, got {}", weights.input_dim, x_t.len()),
        ));
    }
    let hp = prev.hidden.data();
    let x = x_t.data();
    let mut act = [vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]];
    for (k, (wh, wx, b)) in weights.gates.iter().enumerate() {
        for r in 0..h {
            let z = affine(wh, wx, b, hp, x, r);
            act[k][r] = if k == 2 { z.tanh() } else { sigmoid_scalar(z) };
        }
    }
    let [f, i, g, o] = act;
    let c: Vec<f64> = (0..h).map(|r| f[r] * prev.cell.data()[r] + i[r] * g[r]).collect();
    let hn: Vec<f64> = (0..h).map(|r| o[r] * c[r].tanh()).collect();
    Ok((
        LstmState {
            cell: Tensor::vector(c),
            hidden: Tensor::vector(hn),
        },
        Gates {
            forget: Tensor::vector(f),
            input: Tensor::vector(i),
            candidate: Tensor::vector(g),
            output: Tensor::vector(o),
        },
    ))
}

/// Everything recorded for one unrolled step.
#[derive(Clone, Debug)]
pub struct LstmStep {
    pub prev: LstmState,
    pub input: Tensor,
    pub state: LstmState,
    pub gates: Gates,
}

/// Runs the cell over `inputs` starting from `init`.
pub fn lstm_unroll(init: &LstmState, inputs: &[Tensor], weights: &LstmWeights<'_>) -> Result<Vec<LstmStep>> {
    let mut steps = Vec::with_capacity(inputs.len());
    let mut state = init.clone();
    for x in inputs {
        let (next, gates) = lstm_step(&state, x, weights)?;
        steps.push(LstmStep {
            prev: state,
            input: x.clone(),
            state: next.clone(),
            gates,
        });
        state = next;
    }
    Ok(steps)
}

/// Backpropagation through time.
///
/// `d_hidden[t]` is the loss gradient flowing into `h_t` from outside the
/// recurrence (e.g. from a per-step classifier head). Parameter gradients
/// are added into `grads` under `prefix`; returns dL/dx_t for every step.
pub fn lstm_backward(
    steps: &[LstmStep],
    d_hidden: &[Tensor],
    weights: &LstmWeights<'_>,
    prefix: &str,
    grads: &mut Params,
) -> Result<Vec<Tensor>> {
    if steps.len() != d_hidden.len() {
        return Err(Error::shape(
            "lstm_backward",
            format!("{} steps but {} hidden gradients", steps.len(), d_hidden.len()),
        ));
    }
    let h = weights.hidden;
    let d = weights.input_dim;
    let mut gwh = vec![vec![0.0; h * h]; 4];
    let mut gwx = vec![vec![0.0; h * d]; 4];
    let mut gb = vec![vec![0.0; h]; 4];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut d_inputs = vec![Tensor::zeros(&[d]); steps.len()];

    for t in (0..steps.len()).rev() {
        let s = &steps[t];
        let f = s.gates.forget.data();
        let i = s.gates.input.data();
        let g = s.gates.candidate.data();
        let o = s.gates.output.data();
        let c = s.state.cell.data();
        let c_prev = s.prev.cell.data();
        let h_prev = s.prev.hidden.data();
        let x = s.input.data();

        let mut dz = [vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]];
        let mut dc_prev = vec![0.0; h];
        for r in 0..h {
            let dh = d_hidden[t].data()[r] + dh_next[r];
            let tc = c[r].tanh();
            let d_o = dh * tc;
            let dc = dh * o[r] * (1.0 - tc * tc) + dc_next[r];
            dz[0][r] = dc * c_prev[r] * f[r] * (1.0 - f[r]);
            dz[1][r] = dc * g[r] * i[r] * (1.0 - i[r]);
            dz[2][r] = dc * i[r] * (1.0 - g[r] * g[r]);
            dz[3][r] = d_o * o[r] * (1.0 - o[r]);
            dc_prev[r] = dc * f[r];
        }

        let mut dh_prev = vec![0.0; h];
        let dx = d_inputs[t].data_mut();
        for (k, (wh, wx, _)) in weights.gates.iter().enumerate() {
            let whd = wh.data();
            let wxd = wx.data();
            for r in 0..h {
                let z = dz[k][r];
                if z == 0.0 {
                    continue;
                }
                gb[k][r] += z;
                let gh = &mut gwh[k][r * h..(r + 1) * h];
                for (q, hp) in h_prev.iter().enumerate() {
                    gh[q] += z * hp;
                    dh_prev[q] += z * whd[r * h + q];
                }
                let gx = &mut gwx[k][r * d..(r + 1) * d];
                for (q, xv) in x.iter().enumerate() {
                    gx[q] += z * xv;
                    dx[q] += z * wxd[r * d + q];
                }
            }
        }
        dh_next = dh_prev;
        dc_next = dc_prev;
    }

    for (k, (g, _)) in GATES.iter().enumerate() {
        for (name, shape, data) in [
            (format!("{prefix}w_{g}h"), vec![h, h], std::mem::take(&mut gwh[k])),
            (format!("{prefix}w_{g}x"), vec![h, d], std::mem::take(&mut gwx[k])),
            (format!("{prefix}b_{g}"), vec![h], std::mem::take(&mut gb[k])),
        ] {
            let t = Tensor::new(shape, data)?;
            match grads.get_mut(&name) {
                Ok(acc) => acc.add_scaled(&t, 1.0)?,
                Err(_) => {
                    grads.insert(name, t);
                }
            }
        }
    }
    Ok(d_inputs)
}
