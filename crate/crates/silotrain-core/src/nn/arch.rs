//! Layer specifications and static shape inference.
//!
//! An architecture is a layer list applied to a fixed input shape. Shape
//! inference runs at construction time, so an architecture value is always
//! sound: every layer fits its input and the network ends in a single
//! sigmoid probability.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::NnError;

pub const INPUT_SIDE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    /// Fully connected layer over a flat input.
    Dense { units: usize },
    /// Valid-padding convolution, stride 1, square kernel.
    Conv2D { filters: usize, kernel: usize },
    /// Non-overlapping max pooling; stride equals the window.
    MaxPool2D { window: usize },
    Flatten,
    Activation(Activation),
}

impl LayerSpec {
    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Dense { .. } | LayerSpec::Conv2D { .. })
    }
}

/// Output shape of a layer: spatial maps or a flat feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Spatial { h: usize, w: usize, c: usize },
    Flat(usize),
}

impl Shape {
    pub fn count(&self) -> usize {
        match *self {
            Shape::Spatial { h, w, c } => h * w * c,
            Shape::Flat(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkArchitecture {
    input_shape: (usize, usize, usize),
    layers: Vec<LayerSpec>,
    shapes: Vec<Shape>,
}

impl NetworkArchitecture {
    /// Validates the layer list against `input_shape` (h, w, channels).
    pub fn new(
        input_shape: (usize, usize, usize),
        layers: Vec<LayerSpec>,
    ) -> Result<Self, NnError> {
        let (h, w, c) = input_shape;
        if h == 0 || w == 0 || c == 0 {
            return Err(NnError::Architecture(String::from(
                "input shape extents must be positive",
            )));
        }
        if layers.is_empty() {
            return Err(NnError::Architecture(String::from(
                "architecture needs at least one layer",
            )));
        }
        let shapes = infer_shapes(input_shape, &layers)?;
        match (layers.last(), shapes.last()) {
            (Some(LayerSpec::Activation(Activation::Sigmoid)), Some(Shape::Flat(1))) => {}
            _ => {
                return Err(NnError::Architecture(String::from(
                    "network must end in a single sigmoid output",
                )))
            }
        }
        Ok(NetworkArchitecture {
            input_shape,
            layers,
            shapes,
        })
    }

    /// Standard 20x20 grayscale input.
    pub fn with_default_input(layers: Vec<LayerSpec>) -> Result<Self, NnError> {
        NetworkArchitecture::new((INPUT_SIDE, INPUT_SIDE, 1), layers)
    }

    /// Builds the stock classifier family indexed by parameterized depth.
    ///
    /// Depth counts layers with weights, the output unit included. Depth 4 is
    /// the production stack: two conv/pool stages, one hidden dense layer,
    /// one output unit. Greater depths widen the same recipe by stacking
    /// extra convolutions (up to four) and extra 32-unit dense layers;
    /// smaller depths strip it down to the dense tail.
    pub fn for_depth(depth: usize) -> Result<Self, NnError> {
        if depth == 0 {
            return Err(NnError::Architecture(String::from(
                "depth must be at least 1",
            )));
        }
        let mut layers = Vec::new();
        if depth == 1 {
            layers.push(LayerSpec::Flatten);
        } else {
            let conv_count = (depth - 2).min(4).max(1);
            let conv_plan: &[(usize, bool)] = match conv_count {
                1 => &[(8, true)],
                2 => &[(8, true), (16, true)],
                3 => &[(8, false), (8, true), (16, true)],
                _ => &[(8, false), (8, true), (16, false), (16, true)],
            };
            for &(filters, pool) in conv_plan {
                layers.push(LayerSpec::Conv2D { filters, kernel: 3 });
                layers.push(LayerSpec::Activation(Activation::Relu));
                if pool {
                    layers.push(LayerSpec::MaxPool2D { window: 2 });
                }
            }
            layers.push(LayerSpec::Flatten);
            let dense_hidden = depth - 1 - conv_count;
            for _ in 0..dense_hidden {
                layers.push(LayerSpec::Dense { units: 32 });
                layers.push(LayerSpec::Activation(Activation::Relu));
            }
        }
        layers.push(LayerSpec::Dense { units: 1 });
        layers.push(LayerSpec::Activation(Activation::Sigmoid));
        NetworkArchitecture::with_default_input(layers)
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        self.input_shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Per-layer output shapes, parallel to `layers()`.
    pub fn output_shapes(&self) -> &[Shape] {
        &self.shapes
    }

    /// Number of layers carrying weights.
    pub fn depth(&self) -> usize {
        self.layers.iter().filter(|l| l.has_params()).count()
    }

    /// Input shape seen by layer `index`.
    pub fn input_of(&self, index: usize) -> Shape {
        if index == 0 {
            let (h, w, c) = self.input_shape;
            Shape::Spatial { h, w, c }
        } else {
            self.shapes[index - 1]
        }
    }
}

fn infer_shapes(
    input_shape: (usize, usize, usize),
    layers: &[LayerSpec],
) -> Result<Vec<Shape>, NnError> {
    let (h, w, c) = input_shape;
    let mut cur = Shape::Spatial { h, w, c };
    let mut shapes = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate() {
        cur = match (*layer, cur) {
            (LayerSpec::Dense { units }, Shape::Flat(n)) => {
                if units == 0 {
                    return Err(NnError::Architecture(format!(
                        "layer {i}: dense units must be positive"
                    )));
                }
                let _ = n;
                Shape::Flat(units)
            }
            (LayerSpec::Dense { .. }, Shape::Spatial { .. }) => {
                return Err(NnError::Architecture(format!(
                    "layer {i}: dense layer needs a flat input (insert flatten)"
                )));
            }
            (LayerSpec::Conv2D { filters, kernel }, Shape::Spatial { h, w, .. }) => {
                if filters == 0 || kernel == 0 {
                    return Err(NnError::Architecture(format!(
                        "layer {i}: conv filters and kernel must be positive"
                    )));
                }
                if kernel > h || kernel > w {
                    return Err(NnError::Architecture(format!(
                        "layer {i}: kernel {kernel} exceeds input {h}x{w}"
                    )));
                }
                Shape::Spatial {
                    h: h - kernel + 1,
                    w: w - kernel + 1,
                    c: filters,
                }
            }
            (LayerSpec::Conv2D { .. }, Shape::Flat(_)) => {
                return Err(NnError::Architecture(format!(
                    "layer {i}: conv layer needs a spatial input"
                )));
            }
            (LayerSpec::MaxPool2D { window }, Shape::Spatial { h, w, c }) => {
                if window == 0 {
                    return Err(NnError::Architecture(format!(
                        "layer {i}: pool window must be positive"
                    )));
                }
                if window > h || window > w {
                    return Err(NnError::Architecture(format!(
                        "layer {i}: pool window {window} exceeds input {h}x{w}"
                    )));
                }
                Shape::Spatial {
                    h: h / window,
                    w: w / window,
                    c,
                }
            }
            (LayerSpec::MaxPool2D { .. }, Shape::Flat(_)) => {
                return Err(NnError::Architecture(format!(
                    "layer {i}: pool layer needs a spatial input"
                )));
            }
            (LayerSpec::Flatten, Shape::Spatial { h, w, c }) => Shape::Flat(h * w * c),
            (LayerSpec::Flatten, Shape::Flat(n)) => Shape::Flat(n),
            (LayerSpec::Activation(_), shape) => shape,
        };
        shapes.push(cur);
    }
    Ok(shapes)
}
