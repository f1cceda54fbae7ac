//! Parameter storage, initialization, and the SGD update.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::arch::{LayerSpec, NetworkArchitecture, Shape};
use super::NnError;
use crate::tensor::Tensor;

/// Weights and bias of one parameterized layer.
///
/// Dense: weights `[fan_in, units]`, bias `[units]`.
/// Conv2D: weights `[filters, kernel, kernel, in_channels]`, bias `[filters]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Parameters keyed by layer index within the architecture's layer list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelParameters {
    entries: BTreeMap<usize, LayerParams>,
}

impl ModelParameters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, layer_index: usize, params: LayerParams) {
        self.entries.insert(layer_index, params);
    }

    pub fn get(&self, layer_index: usize) -> Option<&LayerParams> {
        self.entries.get(&layer_index)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &LayerParams)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn param_count(&self) -> usize {
        self.entries
            .values()
            .map(|p| p.weights.len() + p.bias.len())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.entries
            .values()
            .all(|p| p.weights.all_finite() && p.bias.all_finite())
    }

    /// Checks that the entry set matches the architecture layer for layer.
    pub fn check_against(&self, arch: &NetworkArchitecture) -> Result<(), NnError> {
        let mut expected = 0usize;
        for (i, layer) in arch.layers().iter().enumerate() {
            if !layer.has_params() {
                continue;
            }
            expected += 1;
            let (w_shape, b_shape) = expected_shapes(arch, i, layer)?;
            let entry = self.entries.get(&i).ok_or_else(|| {
                NnError::Dimension(format!("missing parameters for layer {i}"))
            })?;
            if entry.weights.shape() != w_shape.as_slice() {
                return Err(NnError::Dimension(format!(
                    "layer {i}: weight shape {:?} does not match {:?}",
                    entry.weights.shape(),
                    w_shape
                )));
            }
            if entry.bias.shape() != b_shape.as_slice() {
                return Err(NnError::Dimension(format!(
                    "layer {i}: bias shape {:?} does not match {:?}",
                    entry.bias.shape(),
                    b_shape
                )));
            }
        }
        if self.entries.len() != expected {
            return Err(NnError::Dimension(format!(
                "parameter set has {} entries, architecture has {expected} parameterized layers",
                self.entries.len()
            )));
        }
        Ok(())
    }
}

fn expected_shapes(
    arch: &NetworkArchitecture,
    index: usize,
    layer: &LayerSpec,
) -> Result<(Vec<usize>, Vec<usize>), NnError> {
    let input = arch.input_of(index);
    match (*layer, input) {
        (LayerSpec::Dense { units }, Shape::Flat(fan_in)) => {
            Ok((alloc::vec![fan_in, units], alloc::vec![units]))
        }
        (LayerSpec::Conv2D { filters, kernel }, Shape::Spatial { c, .. }) => {
            Ok((alloc::vec![filters, kernel, kernel, c], alloc::vec![filters]))
        }
        _ => Err(NnError::Dimension(format!(
            "layer {index} is not parameterized or mismatches its input"
        ))),
    }
}

/// Fan-in and fan-out of a parameterized layer, for initialization scale.
fn fans(arch: &NetworkArchitecture, index: usize, layer: &LayerSpec) -> (usize, usize) {
    match (*layer, arch.input_of(index)) {
        (LayerSpec::Dense { units }, Shape::Flat(fan_in)) => (fan_in, units),
        (LayerSpec::Conv2D { filters, kernel }, Shape::Spatial { c, .. }) => {
            (kernel * kernel * c, kernel * kernel * filters)
        }
        _ => unreachable!("architecture validation admits only these pairings"),
    }
}

/// Glorot-uniform weights, zero biases, from a seeded ChaCha20 stream.
///
/// Weights are drawn layer by layer in index order, row-major within each
/// tensor, uniformly from `[-limit, limit]` with
/// `limit = sqrt(6 / (fan_in + fan_out))`.
pub fn init_random(arch: &NetworkArchitecture, seed: u64) -> ModelParameters {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut params = ModelParameters::new();
    for (i, layer) in arch.layers().iter().enumerate() {
        if !layer.has_params() {
            continue;
        }
        let (fan_in, fan_out) = fans(arch, i, layer);
        let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        let (w_shape, b_shape) = expected_shapes(arch, i, layer).expect("validated arch");
        let w_count: usize = w_shape.iter().product();
        let values: Vec<f64> = (0..w_count)
            .map(|_| rng.gen::<f64>() * 2.0 * limit - limit)
            .collect();
        params.insert(
            i,
            LayerParams {
                weights: Tensor::new(w_shape, values).expect("count matches shape"),
                bias: Tensor::zeros(b_shape),
            },
        );
    }
    params
}

/// One SGD step: `p - lr * g` for every parameter. Pure; returns new values.
pub fn sgd_step(
    params: &ModelParameters,
    gradients: &ModelParameters,
    learning_rate: f64,
) -> Result<ModelParameters, NnError> {
    if !(learning_rate.is_finite() && learning_rate > 0.0) {
        return Err(NnError::Domain(format!(
            "learning rate must be positive and finite, got {learning_rate}"
        )));
    }
    if params.len() != gradients.len() {
        return Err(NnError::Dimension(format!(
            "parameter set has {} layers, gradient set has {}",
            params.len(),
            gradients.len()
        )));
    }
    let mut out = ModelParameters::new();
    for (index, p) in params.iter() {
        let g = gradients.get(index).ok_or_else(|| {
            NnError::Dimension(format!("gradients missing layer {index}"))
        })?;
        if p.weights.shape() != g.weights.shape() || p.bias.shape() != g.bias.shape() {
            return Err(NnError::Dimension(format!(
                "layer {index}: gradient shapes do not match parameters"
            )));
        }
        let weights = Tensor::new(
            p.weights.shape().to_vec(),
            p.weights
                .values()
                .iter()
                .zip(g.weights.values())
                .map(|(pv, gv)| pv - learning_rate * gv)
                .collect(),
        )
        .expect("same shape");
        let bias = Tensor::new(
            p.bias.shape().to_vec(),
            p.bias
                .values()
                .iter()
                .zip(g.bias.values())
                .map(|(pv, gv)| pv - learning_rate * gv)
                .collect(),
        )
        .expect("same shape");
        out.insert(index, LayerParams { weights, bias });
    }
    Ok(out)
}
