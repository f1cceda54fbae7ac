//! Forward and backward passes.
//!
//! Batches are NHWC (`[n, h, w, c]`) until a flatten, then `[n, features]`.
//! The backward pass differentiates the exact loss the forward pass computes,
//! clamp included: where a prediction sits in the clamped region the loss is
//! locally constant, so the gradient there is zero. ReLU takes subgradient 0
//! at the kink; max pooling routes to the first maximum in scan order.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::arch::{Activation, LayerSpec, NetworkArchitecture};
use super::metrics::EPSILON;
use super::params::{LayerParams, ModelParameters};
use super::NnError;
use crate::tensor::Tensor;

/// Runs the network over a batch, returning one probability per item.
pub fn forward(
    arch: &NetworkArchitecture,
    params: &ModelParameters,
    batch: &Tensor,
) -> Result<Tensor, NnError> {
    let trace = forward_trace(arch, params, batch)?;
    let out = trace.last().expect("at least the input");
    let n = out.shape()[0];
    Tensor::new(vec![n], out.values().to_vec()).map_err(|e| NnError::Dimension(format!("{e}")))
}

/// Mean-loss gradients for every parameterized layer.
pub fn backward(
    arch: &NetworkArchitecture,
    params: &ModelParameters,
    batch: &Tensor,
    labels: &[f64],
) -> Result<ModelParameters, NnError> {
    let trace = forward_trace(arch, params, batch)?;
    backward_from_trace(arch, params, &trace, labels)
}

/// Backward pass over an existing forward trace.
pub(crate) fn backward_from_trace(
    arch: &NetworkArchitecture,
    params: &ModelParameters,
    trace: &[Tensor],
    labels: &[f64],
) -> Result<ModelParameters, NnError> {
    let n = trace[0].shape()[0];
    if labels.len() != n {
        return Err(NnError::Dimension(format!(
            "batch has {n} items but {} labels",
            labels.len()
        )));
    }

    let preds = trace.last().expect("non-empty trace");
    let mut grad = Tensor::zeros(vec![n, 1]);
    for i in 0..n {
        let p = preds.values()[i];
        let y = labels[i];
        // Inside the clamp band the loss is flat in p.
        grad.values_mut()[i] = if p > EPSILON && p < 1.0 - EPSILON {
            (p - y) / (p * (1.0 - p)) / n as f64
        } else {
            0.0
        };
    }

    let mut grads = ModelParameters::new();
    for (i, layer) in arch.layers().iter().enumerate().rev() {
        let input = &trace[i];
        let output = &trace[i + 1];
        grad = match *layer {
            LayerSpec::Activation(Activation::Sigmoid) => {
                let mut g = grad;
                for (gv, &o) in g.values_mut().iter_mut().zip(output.values()) {
                    *gv *= o * (1.0 - o);
                }
                g
            }
            LayerSpec::Activation(Activation::Relu) => {
                let mut g = grad;
                for (gv, &x) in g.values_mut().iter_mut().zip(input.values()) {
                    if x <= 0.0 {
                        *gv = 0.0;
                    }
                }
                g
            }
            LayerSpec::Dense { .. } => {
                let p = params
                    .get(i)
                    .ok_or_else(|| NnError::Dimension(format!("missing parameters, layer {i}")))?;
                let (g_in, layer_grads) = dense_backward(input, &p.weights, &grad);
                grads.insert(i, layer_grads);
                g_in
            }
            LayerSpec::Conv2D { filters, kernel } => {
                let p = params
                    .get(i)
                    .ok_or_else(|| NnError::Dimension(format!("missing parameters, layer {i}")))?;
                let (g_in, layer_grads) =
                    conv_backward(input, &p.weights, &grad, filters, kernel);
                grads.insert(i, layer_grads);
                g_in
            }
            LayerSpec::MaxPool2D { window } => maxpool_backward(input, &grad, window),
            LayerSpec::Flatten => grad
                .reshaped(input.shape().to_vec())
                .map_err(|e| NnError::Dimension(format!("{e}")))?,
        };
    }
    Ok(grads)
}

/// Input plus each layer's output, in order.
pub(crate) fn forward_trace(
    arch: &NetworkArchitecture,
    params: &ModelParameters,
    batch: &Tensor,
) -> Result<Vec<Tensor>, NnError> {
    let (ih, iw, ic) = arch.input_shape();
    let shape = batch.shape();
    if shape.len() != 4 || shape[1] != ih || shape[2] != iw || shape[3] != ic {
        return Err(NnError::Dimension(format!(
            "batch shape {shape:?} does not match input {ih}x{iw}x{ic}"
        )));
    }
    if !batch.all_finite() {
        return Err(NnError::Domain(String::from("batch contains non-finite values")));
    }
    params.check_against(arch)?;

    let mut trace = Vec::with_capacity(arch.layers().len() + 1);
    trace.push(batch.clone());
    for (i, layer) in arch.layers().iter().enumerate() {
        let input = trace.last().expect("pushed above");
        let out = match *layer {
            LayerSpec::Dense { .. } => {
                let p = params.get(i).expect("checked against architecture");
                dense_forward(input, &p.weights, &p.bias)
            }
            LayerSpec::Conv2D { filters, kernel } => {
                let p = params.get(i).expect("checked against architecture");
                conv_forward(input, &p.weights, &p.bias, filters, kernel)
            }
            LayerSpec::MaxPool2D { window } => maxpool_forward(input, window),
            LayerSpec::Flatten => {
                let n = input.shape()[0];
                let features: usize = input.shape()[1..].iter().product();
                input
                    .reshaped(vec![n, features])
                    .map_err(|e| NnError::Dimension(format!("{e}")))?
            }
            LayerSpec::Activation(f) => {
                let mut out = input.clone();
                match f {
                    Activation::Relu => {
                        for v in out.values_mut() {
                            if *v < 0.0 {
                                *v = 0.0;
                            }
                        }
                    }
                    Activation::Sigmoid => {
                        for v in out.values_mut() {
                            *v = 1.0 / (1.0 + libm::exp(-*v));
                        }
                    }
                }
                out
            }
        };
        trace.push(out);
    }
    Ok(trace)
}

fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let n = x.shape()[0];
    let fan_in = x.shape()[1];
    let units = w.shape()[1];
    let xv = x.values();
    let wv = w.values();
    let bv = b.values();
    let mut out = Tensor::zeros(vec![n, units]);
    let ov = out.values_mut();
    for item in 0..n {
        let xrow = &xv[item * fan_in..(item + 1) * fan_in];
        let orow = &mut ov[item * units..(item + 1) * units];
        orow.copy_from_slice(bv);
        for (i, &xi) in xrow.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let wrow = &wv[i * units..(i + 1) * units];
            for (o, &wij) in orow.iter_mut().zip(wrow) {
                *o += xi * wij;
            }
        }
    }
    out
}

fn dense_backward(x: &Tensor, w: &Tensor, g: &Tensor) -> (Tensor, LayerParams) {
    let n = x.shape()[0];
    let fan_in = x.shape()[1];
    let units = w.shape()[1];
    let xv = x.values();
    let wv = w.values();
    let gv = g.values();
    let mut dw = Tensor::zeros(vec![fan_in, units]);
    let mut db = Tensor::zeros(vec![units]);
    let mut gx = Tensor::zeros(vec![n, fan_in]);
    {
        let dwv = dw.values_mut();
        for item in 0..n {
            let xrow = &xv[item * fan_in..(item + 1) * fan_in];
            let grow = &gv[item * units..(item + 1) * units];
            for (i, &xi) in xrow.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let drow = &mut dwv[i * units..(i + 1) * units];
                for (d, &gj) in drow.iter_mut().zip(grow) {
                    *d += xi * gj;
                }
            }
        }
    }
    {
        let dbv = db.values_mut();
        for item in 0..n {
            let grow = &gv[item * units..(item + 1) * units];
            for (d, &gj) in dbv.iter_mut().zip(grow) {
                *d += gj;
            }
        }
    }
    {
        let gxv = gx.values_mut();
        for item in 0..n {
            let grow = &gv[item * units..(item + 1) * units];
            let xrow = &mut gxv[item * fan_in..(item + 1) * fan_in];
            for (i, xi) in xrow.iter_mut().enumerate() {
                let wrow = &wv[i * units..(i + 1) * units];
                let mut acc = 0.0;
                for (&wij, &gj) in wrow.iter().zip(grow) {
                    acc += wij * gj;
                }
                *xi = acc;
            }
        }
    }
    (gx, LayerParams { weights: dw, bias: db })
}

fn conv_forward(x: &Tensor, w: &Tensor, b: &Tensor, filters: usize, kernel: usize) -> Tensor {
    let (n, h, wd, c) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let oh = h - kernel + 1;
    let ow = wd - kernel + 1;
    let xv = x.values();
    let wv = w.values();
    let bv = b.values();
    let mut out = Tensor::zeros(vec![n, oh, ow, filters]);
    let ov = out.values_mut();
    for item in 0..n {
        let xbase = item * h * wd * c;
        let obase = item * oh * ow * filters;
        for oy in 0..oh {
            for ox in 0..ow {
                let opix = obase + (oy * ow + ox) * filters;
                for f in 0..filters {
                    let mut acc = bv[f];
                    let wfbase = f * kernel * kernel * c;
                    for ky in 0..kernel {
                        let xrow = xbase + ((oy + ky) * wd + ox) * c;
                        let wrow = wfbase + ky * kernel * c;
                        for kx in 0..kernel * c {
                            acc += xv[xrow + kx] * wv[wrow + kx];
                        }
                    }
                    ov[opix + f] = acc;
                }
            }
        }
    }
    out
}

fn conv_backward(
    x: &Tensor,
    w: &Tensor,
    g: &Tensor,
    filters: usize,
    kernel: usize,
) -> (Tensor, LayerParams) {
    let (n, h, wd, c) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let oh = h - kernel + 1;
    let ow = wd - kernel + 1;
    let xv = x.values();
    let wv = w.values();
    let gv = g.values();
    let mut dw = Tensor::zeros(vec![filters, kernel, kernel, c]);
    let mut db = Tensor::zeros(vec![filters]);
    let mut gx = Tensor::zeros(vec![n, h, wd, c]);
    let dwv = dw.values_mut();
    let dbv = db.values_mut();
    let gxv = gx.values_mut();
    for item in 0..n {
        let xbase = item * h * wd * c;
        let gbase = item * oh * ow * filters;
        for oy in 0..oh {
            for ox in 0..ow {
                let gpix = gbase + (oy * ow + ox) * filters;
                for f in 0..filters {
                    let gval = gv[gpix + f];
                    if gval == 0.0 {
                        continue;
                    }
                    dbv[f] += gval;
                    let wfbase = f * kernel * kernel * c;
                    for ky in 0..kernel {
                        let xrow = xbase + ((oy + ky) * wd + ox) * c;
                        let wrow = wfbase + ky * kernel * c;
                        for kx in 0..kernel * c {
                            dwv[wrow + kx] += xv[xrow + kx] * gval;
                            gxv[xrow + kx] += wv[wrow + kx] * gval;
                        }
                    }
                }
            }
        }
    }
    (gx, LayerParams { weights: dw, bias: db })
}

fn maxpool_forward(x: &Tensor, window: usize) -> Tensor {
    let (n, h, wd, c) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let oh = h / window;
    let ow = wd / window;
    let xv = x.values();
    let mut out = Tensor::zeros(vec![n, oh, ow, c]);
    let ov = out.values_mut();
    for item in 0..n {
        let xbase = item * h * wd * c;
        let obase = item * oh * ow * c;
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best = f64::NEG_INFINITY;
                    for ky in 0..window {
                        for kx in 0..window {
                            let v = xv
                                [xbase + ((oy * window + ky) * wd + ox * window + kx) * c + ch];
                            if v > best {
                                best = v;
                            }
                        }
                    }
                    ov[obase + (oy * ow + ox) * c + ch] = best;
                }
            }
        }
    }
    out
}

fn maxpool_backward(x: &Tensor, g: &Tensor, window: usize) -> Tensor {
    let (n, h, wd, c) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let oh = h / window;
    let ow = wd / window;
    let xv = x.values();
    let gv = g.values();
    let mut gx = Tensor::zeros(vec![n, h, wd, c]);
    let gxv = gx.values_mut();
    for item in 0..n {
        let xbase = item * h * wd * c;
        let gbase = item * oh * ow * c;
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0;
                    for ky in 0..window {
                        for kx in 0..window {
                            let idx =
                                xbase + ((oy * window + ky) * wd + ox * window + kx) * c + ch;
                            if xv[idx] > best {
                                best = xv[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    gxv[best_idx] += gv[gbase + (oy * ow + ox) * c + ch];
                }
            }
        }
    }
    gx
}

/// Batch predictions, then loss and accuracy in one pass. Shared by the
/// training loop and the coordinator's candidate gate.
pub fn evaluate(
    arch: &NetworkArchitecture,
    params: &ModelParameters,
    batches: impl Iterator<Item = (Tensor, Vec<f64>)>,
) -> Result<super::Metric, NnError> {
    let mut preds = Vec::new();
    let mut labels = Vec::new();
    for (batch, batch_labels) in batches {
        let out = forward(arch, params, &batch)?;
        preds.extend_from_slice(out.values());
        labels.extend_from_slice(&batch_labels);
    }
    let loss = super::metrics::bce_loss(&preds, &labels)?;
    let acc = super::metrics::accuracy(&preds, &labels, 0.5)?;
    Ok(super::Metric { accuracy: acc, loss })
}
