//! Feed-forward layer stack with recorded activations for backpropagation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::loss::{cross_entropy, cross_entropy_grad};
use super::params::Params;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// `(k - 1) / 2` zeros on each side; preserves size at stride 1.
    Same,
    Valid,
}

/// One layer of a [`Sequential`] stack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
    },
    MaxPool2d {
        size: usize,
        stride: usize,
    },
    FullyConnected {
        inputs: usize,
        outputs: usize,
    },
    Activation {
        function: Activation,
    },
    Dropout {
        p: f64,
    },
    Flatten,
    Softmax,
}

impl LayerSpec {
    pub fn conv3x3(in_channels: usize, out_channels: usize) -> Self {
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel: 3,
            stride: 1,
            padding: Padding::Same,
        }
    }

    pub fn fc(inputs: usize, outputs: usize) -> Self {
        LayerSpec::FullyConnected { inputs, outputs }
    }

    pub fn relu() -> Self {
        LayerSpec::Activation {
            function: Activation::Relu,
        }
    }

    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Conv2d { .. } | LayerSpec::FullyConnected { .. })
    }

    fn output_shape(&self, index: usize, input: &[usize]) -> Result<Vec<usize>> {
        let ctx = || format!("layer {index} ({})", self.kind_name());
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let [c, h, w] = expect_chw(input, ctx)?;
                if c != in_channels {
                    return Err(Error::shape(
                        ctx(),
                        format!("expected {in_channels} input channels, got {c}"),
                    ));
                }
                if kernel == 0 || stride == 0 || out_channels == 0 {
                    return Err(Error::shape(ctx(), "zero kernel, stride or channel count"));
                }
                if padding == Padding::Same && kernel % 2 == 0 {
                    return Err(Error::shape(ctx(), "same padding needs an odd kernel"));
                }
                let pad = conv_pad(kernel, padding);
                if h + 2 * pad < kernel || w + 2 * pad < kernel {
                    return Err(Error::shape(ctx(), format!("input {h}x{w} smaller than kernel")));
                }
                Ok(vec![
                    out_channels,
                    (h + 2 * pad - kernel) / stride + 1,
                    (w + 2 * pad - kernel) / stride + 1,
                ])
            }
            LayerSpec::MaxPool2d { size, stride } => {
                let [c, h, w] = expect_chw(input, ctx)?;
                if size == 0 || stride == 0 || h < size || w < size {
                    return Err(Error::shape(ctx(), format!("cannot pool {h}x{w} with {size}")));
                }
                Ok(vec![c, (h - size) / stride + 1, (w - size) / stride + 1])
            }
            LayerSpec::FullyConnected { inputs, outputs } => {
                if input.len() != 1 || input[0] != inputs {
                    return Err(Error::shape(
                        ctx(),
                        format!("expected vector of {inputs}, got {input:?}"),
                    ));
                }
                if outputs == 0 {
                    return Err(Error::shape(ctx(), "zero outputs"));
                }
                Ok(vec![outputs])
            }
            LayerSpec::Dropout { p } => {
                if !(0.0..1.0).contains(&p) {
                    return Err(Error::InvalidArgument(format!(
                        "{}: dropout probability {p} outside [0, 1)",
                        ctx()
                    )));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Activation { .. } => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Softmax => {
                if input.len() != 1 {
                    return Err(Error::shape(ctx(), format!("expected vector, got {input:?}")));
                }
                Ok(input.to_vec())
            }
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::MaxPool2d { .. } => "maxpool2d",
            LayerSpec::FullyConnected { .. } => "fully_connected",
            LayerSpec::Activation { .. } => "activation",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Softmax => "softmax",
        }
    }
}

fn expect_chw(input: &[usize], ctx: impl Fn() -> String) -> Result<[usize; 3]> {
    match *input {
        [c, h, w] => Ok([c, h, w]),
        _ => Err(Error::shape(ctx(), format!("expected [C, H, W], got {input:?}"))),
    }
}

fn conv_pad(kernel: usize, padding: Padding) -> usize {
    match padding {
        Padding::Same => (kernel - 1) / 2,
        Padding::Valid => 0,
    }
}

/// Forward-pass mode. Dropout masks in train mode derive from `seed`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Infer,
    Train { seed: u64 },
}

/// Recorded forward pass: `activations[i]` is the input of layer `i`,
/// the last entry is the network output.
#[derive(Clone, Debug)]
pub struct Trace {
    pub activations: Vec<Tensor>,
    aux: Vec<Aux>,
}

impl Trace {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("trace holds the input")
    }
}

#[derive(Clone, Debug)]
enum Aux {
    None,
    Mask(Vec<f64>),
    Argmax(Vec<usize>),
}

/// A validated stack of layers with a fixed input shape.
///
/// Parameters live outside the network in a [`Params`] map, named
/// `{prefix}{layer}.weight` and `{prefix}{layer}.bias`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequential {
    layers: Vec<LayerSpec>,
    shapes: Vec<Vec<usize>>,
    prefix: String,
}

impl Sequential {
    pub fn new(layers: Vec<LayerSpec>, input_shape: &[usize], prefix: &str) -> Result<Self> {
        let mut shapes = vec![input_shape.to_vec()];
        for (i, layer) in layers.iter().enumerate() {
            let next = layer.output_shape(i, shapes.last().unwrap())?;
            shapes.push(next);
        }
        Ok(Self {
            layers,
            shapes,
            prefix: prefix.to_string(),
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.shapes[0]
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().unwrap()
    }

    /// Input shape of layer `i` (or the output shape for `i == len`).
    pub fn shape_at(&self, i: usize) -> &[usize] {
        &self.shapes[i]
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn weight_name(&self, layer: usize) -> String {
        format!("{}{layer}.weight", self.prefix)
    }

    pub fn bias_name(&self, layer: usize) -> String {
        format!("{}{layer}.bias", self.prefix)
    }

    /// The first `n` layers as a network of their own.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot keep {n} of {} layers",
                self.layers.len()
            )));
        }
        Ok(Self {
            layers: self.layers[..n].to_vec(),
            shapes: self.shapes[..=n].to_vec(),
            prefix: self.prefix.clone(),
        })
    }

    /// Names and shapes of every parameter the stack expects.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match *layer {
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    ..
                } => {
                    out.push((self.weight_name(i), vec![out_channels, in_channels, kernel, kernel]));
                    out.push((self.bias_name(i), vec![out_channels]));
                }
                LayerSpec::FullyConnected { inputs, outputs } => {
                    out.push((self.weight_name(i), vec![outputs, inputs]));
                    out.push((self.bias_name(i), vec![outputs]));
                }
                _ => {}
            }
        }
        out
    }

    /// Fan-in scaled uniform initialization: He bound for layers feeding a
    /// ReLU, Xavier bound otherwise. Biases start at zero.
    pub fn init_params(&self, rng: &mut impl Rng) -> Params {
        let mut params = Params::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let (fan_in, fan_out, shape) = match *layer {
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    ..
                } => (
                    in_channels * kernel * kernel,
                    out_channels * kernel * kernel,
                    vec![out_channels, in_channels, kernel, kernel],
                ),
                LayerSpec::FullyConnected { inputs, outputs } => (inputs, outputs, vec![outputs, inputs]),
                _ => continue,
            };
            let feeds_relu = matches!(
                self.layers.get(i + 1),
                Some(LayerSpec::Activation {
                    function: Activation::Relu
                })
            );
            let bound = if feeds_relu {
                (6.0 / fan_in as f64).sqrt()
            } else {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            };
            let n: usize = shape.iter().product();
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
            params.insert(self.weight_name(i), Tensor::new(shape, w).unwrap());
            params.insert(self.bias_name(i), Tensor::zeros(&[shape_out(layer)]));
        }
        params
    }

    /// Checks that `params` holds every expected tensor with the right shape.
    pub fn validate_params(&self, params: &Params) -> Result<()> {
        for (name, shape) in self.param_shapes() {
            let t = params.get(&name)?;
            if t.shape() != shape.as_slice() {
                return Err(Error::shape(
                    format!("parameter `{name}`"),
                    format!("expected {shape:?}, got {:?}", t.shape()),
                ));
            }
        }
        Ok(())
    }

    pub fn forward(&self, params: &Params, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut x = self.check_input(input)?;
        for (i, layer) in self.layers.iter().enumerate() {
            let (y, _) = self.layer_forward(i, layer, params, &x, mode, false)?;
            x = y;
        }
        Ok(x)
    }

    /// Forward pass that keeps every activation for [`Sequential::backward`].
    pub fn forward_trace(&self, params: &Params, input: &Tensor, mode: Mode) -> Result<Trace> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut aux = Vec::with_capacity(self.layers.len());
        activations.push(self.check_input(input)?);
        for (i, layer) in self.layers.iter().enumerate() {
            let (y, a) = self.layer_forward(i, layer, params, activations.last().unwrap(), mode, true)?;
            activations.push(y);
            aux.push(a);
        }
        Ok(Trace { activations, aux })
    }

    fn check_input(&self, input: &Tensor) -> Result<Tensor> {
        let expected = self.input_shape();
        if input.shape() == expected {
            return Ok(input.clone());
        }
        if input.len() == expected.iter().product::<usize>() && input.rank() != expected.len() {
            // same data, different view (e.g. [H, W] for a single channel)
            if expected.len() == 3 && expected[0] == 1 && input.shape() == &expected[1..] {
                return input.clone().reshape(expected);
            }
        }
        Err(Error::shape(
            "layer 0 input",
            format!("expected {expected:?}, got {:?}", input.shape()),
        ))
    }

    fn layer_forward(
        &self,
        i: usize,
        layer: &LayerSpec,
        params: &Params,
        x: &Tensor,
        mode: Mode,
        record: bool,
    ) -> Result<(Tensor, Aux)> {
        if x.shape() != self.shapes[i].as_slice() {
            return Err(Error::shape(
                format!("layer {i} ({})", layer.kind_name()),
                format!("expected {:?}, got {:?}", self.shapes[i], x.shape()),
            ));
        }
        let out_shape = &self.shapes[i + 1];
        match *layer {
            LayerSpec::Conv2d {
                kernel,
                stride,
                padding,
                ..
            } => {
                let w = self.param(params, &self.weight_name(i), i)?;
                let b = self.param(params, &self.bias_name(i), i)?;
                let y = conv2d_forward(x, w, b, kernel, stride, conv_pad(kernel, padding), out_shape);
                Ok((y, Aux::None))
            }
            LayerSpec::MaxPool2d { size, stride } => {
                let (y, arg) = maxpool_forward(x, size, stride, out_shape);
                Ok((y, if record { Aux::Argmax(arg) } else { Aux::None }))
            }
            LayerSpec::FullyConnected { inputs, outputs } => {
                let w = self.param(params, &self.weight_name(i), i)?;
                let b = self.param(params, &self.bias_name(i), i)?;
                let wd = w.data();
                let xd = x.data();
                let y: Vec<f64> = (0..outputs)
                    .map(|o| {
                        let row = &wd[o * inputs..(o + 1) * inputs];
                        b.data()[o] + dot(row, xd)
                    })
                    .collect();
                Ok((Tensor::new(vec![outputs], y)?, Aux::None))
            }
            LayerSpec::Activation { function } => Ok((x.map(|v| function.apply(v)), Aux::None)),
            LayerSpec::Dropout { p } => match mode {
                Mode::Infer => Ok((x.clone(), Aux::None)),
                Mode::Train { seed } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(layer_seed(seed, i));
                    let keep = 1.0 / (1.0 - p);
                    let mask: Vec<f64> = (0..x.len())
                        .map(|_| if rng.gen::<f64>() >= p { keep } else { 0.0 })
                        .collect();
                    let y: Vec<f64> = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
                    let y = Tensor::new(x.shape().to_vec(), y)?;
                    Ok((y, if record { Aux::Mask(mask) } else { Aux::None }))
                }
            },
            LayerSpec::Flatten => Ok((x.clone().reshape(out_shape)?, Aux::None)),
            LayerSpec::Softmax => Ok((softmax(x), Aux::None)),
        }
    }

    fn param<'a>(&self, params: &'a Params, name: &str, layer: usize) -> Result<&'a Tensor> {
        params.get(name).map_err(|_| {
            Error::shape(
                format!("layer {layer} ({})", self.layers[layer].kind_name()),
                format!("missing parameter `{name}`"),
            )
        })
    }

    /// Backpropagates `grad_output` (dL/d output) through a recorded trace.
    ///
    /// Parameter gradients are added into `grads`; the return value is
    /// dL/d input.
    pub fn backward(&self, params: &Params, trace: &Trace, grad_output: &Tensor, grads: &mut Params) -> Result<Tensor> {
        self.backward_to(params, trace, grad_output, grads, 0)
    }

    /// Like [`Sequential::backward`] but stops after layer `stop`; layers
    /// below it receive no gradient.
    pub fn backward_to(
        &self,
        params: &Params,
        trace: &Trace,
        grad_output: &Tensor,
        grads: &mut Params,
        stop: usize,
    ) -> Result<Tensor> {
        if grad_output.shape() != self.output_shape() {
            return Err(Error::shape(
                "backward",
                format!(
                    "gradient {:?} does not match output {:?}",
                    grad_output.shape(),
                    self.output_shape()
                ),
            ));
        }
        let mut dy = grad_output.clone();
        for i in (stop..self.layers.len()).rev() {
            let x = &trace.activations[i];
            let y = &trace.activations[i + 1];
            dy = match (&self.layers[i], &trace.aux[i]) {
                (
                    &LayerSpec::Conv2d {
                        kernel,
                        stride,
                        padding,
                        ..
                    },
                    _,
                ) => {
                    let w = self.param(params, &self.weight_name(i), i)?;
                    let (dx, dw, db) = conv2d_backward(x, w, &dy, kernel, stride, conv_pad(kernel, padding));
                    add_grad(grads, self.weight_name(i), dw)?;
                    add_grad(grads, self.bias_name(i), db)?;
                    dx
                }
                (LayerSpec::MaxPool2d { .. }, Aux::Argmax(arg)) => {
                    let mut dx = Tensor::zeros(x.shape());
                    for (g, &src) in dy.data().iter().zip(arg) {
                        dx.data_mut()[src] += g;
                    }
                    dx
                }
                (&LayerSpec::FullyConnected { inputs, outputs }, _) => {
                    let w = self.param(params, &self.weight_name(i), i)?;
                    let wd = w.data();
                    let xd = x.data();
                    let g = dy.data();
                    let mut dw = vec![0.0; inputs * outputs];
                    let mut dx = vec![0.0; inputs];
                    for o in 0..outputs {
                        let go = g[o];
                        if go == 0.0 {
                            continue;
                        }
                        let row = &wd[o * inputs..(o + 1) * inputs];
                        let drow = &mut dw[o * inputs..(o + 1) * inputs];
                        for k in 0..inputs {
                            drow[k] = go * xd[k];
                            dx[k] += go * row[k];
                        }
                    }
                    add_grad(grads, self.weight_name(i), Tensor::new(vec![outputs, inputs], dw)?)?;
                    add_grad(grads, self.bias_name(i), dy.clone())?;
                    Tensor::new(vec![inputs], dx)?
                }
                (&LayerSpec::Activation { function }, _) => {
                    let d: Vec<f64> = x
                        .data()
                        .iter()
                        .zip(y.data())
                        .zip(dy.data())
                        .map(|((&xv, &yv), &g)| g * function.derivative(xv, yv))
                        .collect();
                    Tensor::new(x.shape().to_vec(), d)?
                }
                (LayerSpec::Dropout { .. }, Aux::Mask(mask)) => {
                    let d: Vec<f64> = dy.data().iter().zip(mask).map(|(g, m)| g * m).collect();
                    Tensor::new(x.shape().to_vec(), d)?
                }
                (LayerSpec::Dropout { .. }, _) => dy,
                (LayerSpec::Flatten, _) => dy.reshape(x.shape())?,
                (LayerSpec::Softmax, _) => {
                    let p = y.data();
                    let g = dy.data();
                    let s: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
                    let d: Vec<f64> = p.iter().zip(g).map(|(pi, gi)| pi * (gi - s)).collect();
                    Tensor::new(x.shape().to_vec(), d)?
                }
                (LayerSpec::MaxPool2d { .. }, _) => {
                    return Err(Error::InvalidArgument(format!(
                        "layer {i}: trace lacks pooling indices"
                    )))
                }
            };
        }
        Ok(dy)
    }

    /// Cross-entropy loss of a softmax-terminated stack and its parameter
    /// gradients for one labelled input.
    pub fn loss_and_grads(&self, params: &Params, input: &Tensor, label: usize, mode: Mode) -> Result<(f64, Params)> {
        let trace = self.forward_trace(params, input, mode)?;
        let loss = cross_entropy(trace.output(), label)?;
        let dp = cross_entropy_grad(trace.output(), label)?;
        let mut grads = Params::new();
        self.backward(params, &trace, &dp, &mut grads)?;
        Ok((loss, grads))
    }

    pub fn loss(&self, params: &Params, input: &Tensor, label: usize, mode: Mode) -> Result<f64> {
        let p = self.forward(params, input, mode)?;
        cross_entropy(&p, label)
    }
}

fn shape_out(layer: &LayerSpec) -> usize {
    match *layer {
        LayerSpec::Conv2d { out_channels, .. } => out_channels,
        LayerSpec::FullyConnected { outputs, .. } => outputs,
        _ => 0,
    }
}

fn layer_seed(seed: u64, layer: usize) -> u64 {
    seed ^ (layer as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn add_grad(grads: &mut Params, name: String, g: Tensor) -> Result<()> {
    match grads.get_mut(&name) {
        Ok(t) => t.add_scaled(&g, 1.0),
        Err(_) => {
            grads.insert(name, g);
            Ok(())
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable softmax over a vector.
pub fn softmax(x: &Tensor) -> Tensor {
    let m = x.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.data().iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    Tensor::new(x.shape().to_vec(), e.into_iter().map(|v| v / s).collect()).unwrap()
}

/// Range of output positions `o` with `0 <= o*stride + k - pad < len`.
fn valid_range(len_in: usize, len_out: usize, k: usize, stride: usize, pad: usize) -> (usize, usize) {
    // smallest o with o*stride + k >= pad
    let lo = if k >= pad { 0 } else { (pad - k).div_ceil(stride) };
    // largest o with o*stride + k - pad <= len_in - 1
    let hi = if len_in + pad < k + 1 {
        0
    } else {
        ((len_in + pad - 1 - k) / stride + 1).min(len_out)
    };
    (lo.min(hi), hi)
}

fn conv2d_forward(
    x: &Tensor,
    w: &Tensor,
    b: &Tensor,
    k: usize,
    stride: usize,
    pad: usize,
    out_shape: &[usize],
) -> Tensor {
    let (c_in, h, wid) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (c_out, ho, wo) = (out_shape[0], out_shape[1], out_shape[2]);
    let xd = x.data();
    let wd = w.data();
    let mut out = vec![0.0; c_out * ho * wo];
    for o in 0..c_out {
        let plane = &mut out[o * ho * wo..(o + 1) * ho * wo];
        plane.iter_mut().for_each(|v| *v = b.data()[o]);
        for c in 0..c_in {
            let xin = &xd[c * h * wid..(c + 1) * h * wid];
            for ky in 0..k {
                let (y0, y1) = valid_range(h, ho, ky, stride, pad);
                for kx in 0..k {
                    let wv = wd[((o * c_in + c) * k + ky) * k + kx];
                    let (x0, x1) = valid_range(wid, wo, kx, stride, pad);
                    for oy in y0..y1 {
                        let iy = oy * stride + ky - pad;
                        let row_in = &xin[iy * wid..(iy + 1) * wid];
                        let row_out = &mut plane[oy * wo..(oy + 1) * wo];
                        if stride == 1 {
                            let off = x0 + kx - pad;
                            for (r, &v) in row_out[x0..x1].iter_mut().zip(&row_in[off..off + x1 - x0]) {
                                *r += wv * v;
                            }
                        } else {
                            for ox in x0..x1 {
                                row_out[ox] += wv * row_in[ox * stride + kx - pad];
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(out_shape.to_vec(), out).unwrap()
}

fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    dy: &Tensor,
    k: usize,
    stride: usize,
    pad: usize,
) -> (Tensor, Tensor, Tensor) {
    let (c_in, h, wid) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (c_out, ho, wo) = (dy.shape()[0], dy.shape()[1], dy.shape()[2]);
    let xd = x.data();
    let wd = w.data();
    let gd = dy.data();
    let mut dx = vec![0.0; xd.len()];
    let mut dw = vec![0.0; wd.len()];
    let mut db = vec![0.0; c_out];
    for o in 0..c_out {
        let gplane = &gd[o * ho * wo..(o + 1) * ho * wo];
        db[o] = gplane.iter().sum();
        for c in 0..c_in {
            let xin = &xd[c * h * wid..(c + 1) * h * wid];
            let dxin = &mut dx[c * h * wid..(c + 1) * h * wid];
            for ky in 0..k {
                let (y0, y1) = valid_range(h, ho, ky, stride, pad);
                for kx in 0..k {
                    let widx = ((o * c_in + c) * k + ky) * k + kx;
                    let wv = wd[widx];
                    let (x0, x1) = valid_range(wid, wo, kx, stride, pad);
                    let mut acc = 0.0;
                    for oy in y0..y1 {
                        let iy = oy * stride + ky - pad;
                        let grow = &gplane[oy * wo..(oy + 1) * wo];
                        for ox in x0..x1 {
                            let ix = ox * stride + kx - pad;
                            let g = grow[ox];
                            acc += g * xin[iy * wid + ix];
                            dxin[iy * wid + ix] += g * wv;
                        }
                    }
                    dw[widx] += acc;
                }
            }
        }
    }
    (
        Tensor::new(x.shape().to_vec(), dx).unwrap(),
        Tensor::new(w.shape().to_vec(), dw).unwrap(),
        Tensor::new(vec![c_out], db).unwrap(),
    )
}

fn maxpool_forward(x: &Tensor, size: usize, stride: usize, out_shape: &[usize]) -> (Tensor, Vec<usize>) {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (ho, wo) = (out_shape[1], out_shape[2]);
    let xd = x.data();
    let mut out = Vec::with_capacity(c * ho * wo);
    let mut arg = Vec::with_capacity(c * ho * wo);
    for ch in 0..c {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = f64::NEG_INFINITY;
                let mut best_i = 0;
                for dy in 0..size {
                    for dx in 0..size {
                        let idx = (ch * h + oy * stride + dy) * w + ox * stride + dx;
                        if xd[idx] > best {
                            best = xd[idx];
                            best_i = idx;
                        }
                    }
                }
                out.push(best);
                arg.push(best_i);
            }
        }
    }
    (Tensor::new(out_shape.to_vec(), out).unwrap(), arg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_of(net: &Sequential, values: &[(&str, Tensor)]) -> Params {
        let mut p = Params::new();
        for (n, t) in values {
            p.insert(format!("{}{n}", net.prefix()), t.clone());
        }
        p
    }

    #[test]
    fn identity_fully_connected() {
        let net = Sequential::new(vec![LayerSpec::fc(3, 3)], &[3], "").unwrap();
        let mut eye = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            eye.data_mut()[i * 3 + i] = 1.0;
        }
        let p = params_of(&net, &[("0.weight", eye), ("0.bias", Tensor::zeros(&[3]))]);
        let v = Tensor::vector(vec![0.3, -1.5, 2.0]);
        assert_eq!(net.forward(&p, &v, Mode::Infer).unwrap(), v);
    }

    #[test]
    fn maxpool_two_by_two() {
        let net = Sequential::new(vec![LayerSpec::MaxPool2d { size: 2, stride: 2 }], &[1, 2, 2], "").unwrap();
        let x = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = net.forward(&Params::new(), &x, Mode::Infer).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.data(), &[4.0]);
    }

    #[test]
    fn valid_conv_of_ones() {
        let net = Sequential::new(
            vec![LayerSpec::Conv2d {
                in_channels: 1,
                out_channels: 1,
                kernel: 3,
                stride: 1,
                padding: Padding::Valid,
            }],
            &[1, 3, 3],
            "",
        )
        .unwrap();
        let p = params_of(
            &net,
            &[
                ("0.weight", Tensor::filled(&[1, 1, 3, 3], 1.0)),
                ("0.bias", Tensor::zeros(&[1])),
            ],
        );
        let y = net.forward(&p, &Tensor::filled(&[1, 3, 3], 1.0), Mode::Infer).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.data(), &[9.0]);
    }

    /// Direct definition of a padded strided convolution, for comparison.
    fn naive_conv(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, pad: usize) -> Tensor {
        let (c, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let (o, k) = (w.shape()[0], w.shape()[2]);
        let ho = (h + 2 * pad - k) / stride + 1;
        let wo = (wd + 2 * pad - k) / stride + 1;
        let mut out = Vec::new();
        for oc in 0..o {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut s = b.data()[oc];
                    for ic in 0..c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                    continue;
                                }
                                s += w.at(&[oc, ic, ky, kx]) * x.at(&[ic, iy as usize, ix as usize]);
                            }
                        }
                    }
                    out.push(s);
                }
            }
        }
        Tensor::new(vec![o, ho, wo], out).unwrap()
    }

    #[test]
    fn conv_matches_direct_definition() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(k, stride, padding) in &[
            (3, 1, Padding::Same),
            (3, 2, Padding::Same),
            (5, 1, Padding::Same),
            (2, 2, Padding::Valid),
            (3, 1, Padding::Valid),
        ] {
            let spec = LayerSpec::Conv2d {
                in_channels: 2,
                out_channels: 3,
                kernel: k,
                stride,
                padding,
            };
            let net = Sequential::new(vec![spec], &[2, 7, 9], "").unwrap();
            let p = net.init_params(&mut rng);
            let x = Tensor::new(vec![2, 7, 9], (0..126).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let y = net.forward(&p, &x, Mode::Infer).unwrap();
            let reference = naive_conv(
                &x,
                p.get("0.weight").unwrap(),
                p.get("0.bias").unwrap(),
                stride,
                conv_pad(k, padding),
            );
            assert_eq!(y.shape(), reference.shape());
            for (a, b) in y.data().iter().zip(reference.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_errors_name_the_layer() {
        let err = Sequential::new(vec![LayerSpec::Flatten, LayerSpec::fc(10, 2)], &[1, 3, 3], "").unwrap_err();
        assert!(err.to_string().contains("layer 1"), "{err}");

        let net = Sequential::new(vec![LayerSpec::fc(4, 2)], &[4], "").unwrap();
        let p = net.init_params(&mut ChaCha8Rng::seed_from_u64(0));
        let err = net.forward(&p, &Tensor::zeros(&[5]), Mode::Infer).unwrap_err();
        assert!(err.to_string().contains("layer 0"), "{err}");
    }

    #[test]
    fn softmax_head_sums_to_one_and_ignores_shift() {
        let x = Tensor::vector(vec![3.0, -2.0]);
        let shifted = x.map(|v| v + 1000.0);
        let a = softmax(&x);
        let b = softmax(&shifted);
        assert!((a.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (u, v) in a.data().iter().zip(b.data()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn dropout_is_identity_at_inference_and_reproducible_in_training() {
        let net = Sequential::new(vec![LayerSpec::Dropout { p: 0.5 }], &[64], "").unwrap();
        let x = Tensor::filled(&[64], 1.0);
        assert_eq!(net.forward(&Params::new(), &x, Mode::Infer).unwrap(), x);
        let a = net.forward(&Params::new(), &x, Mode::Train { seed: 9 }).unwrap();
        let b = net.forward(&Params::new(), &x, Mode::Train { seed: 9 }).unwrap();
        assert_eq!(a, b);
        assert!(a.data().iter().all(|&v| v == 0.0 || v == 2.0));
        assert!(a.data().contains(&0.0));
        assert!(Sequential::new(vec![LayerSpec::Dropout { p: 1.0 }], &[4], "").is_err());
    }
}
