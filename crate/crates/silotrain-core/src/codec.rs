//! The `DMDL` binary model format.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic            4 bytes  "DMDL"
//! format version   u16      currently 1
//! model version    u64
//! origin length    u16      followed by that many UTF-8 bytes
//! metric accuracy  f64
//! metric loss      f64
//! layer count      u16
//! layers           tag u8 + tag-specific u32 fields
//! weight blocks    per parameterized layer, in layer order:
//!                  u64 weight count + weights, u64 bias count + biases
//! ```
//!
//! Layer tags: 1 dense(units), 2 conv(filters, kernel), 3 pool(window),
//! 4 flatten, 5 activation(0 relu, 1 sigmoid). Input shape is fixed at
//! 20x20x1 by the exchange; it is not encoded.
//!
//! Encoding is canonical: equal artifacts produce identical bytes, distinct
//! artifacts distinct bytes. Decoding validates structure and shape
//! consistency but not weight values; a flipped weight byte decodes to a
//! different model, which the protocol layer catches by evaluation, not here.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::nn::arch::{Activation, LayerSpec, NetworkArchitecture};
use crate::nn::params::{LayerParams, ModelParameters};
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"DMDL";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelMetadata {
    pub model_version: u64,
    pub origin_node: String,
    pub metric_accuracy: f64,
    pub metric_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub architecture: NetworkArchitecture,
    pub parameters: ModelParameters,
    pub metadata: ModelMetadata,
}

impl ModelArtifact {
    /// Checks the parameter set against the architecture.
    pub fn new(
        architecture: NetworkArchitecture,
        parameters: ModelParameters,
        metadata: ModelMetadata,
    ) -> Result<Self, CodecError> {
        parameters
            .check_against(&architecture)
            .map_err(|e| CodecError::Integrity {
                offset: 0,
                reason: e.to_string(),
            })?;
        Ok(ModelArtifact {
            architecture,
            parameters,
            metadata,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("format error at offset {offset}: {reason}")]
    Format { offset: usize, reason: String },
    #[error("truncated at offset {offset}: {reason}")]
    Truncated { offset: usize, reason: String },
    #[error("integrity error at offset {offset}: {reason}")]
    Integrity { offset: usize, reason: String },
}

pub fn encode(artifact: &ModelArtifact) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&artifact.metadata.model_version.to_le_bytes());
    let origin = artifact.metadata.origin_node.as_bytes();
    out.extend_from_slice(&(origin.len() as u16).to_le_bytes());
    out.extend_from_slice(origin);
    out.extend_from_slice(&artifact.metadata.metric_accuracy.to_le_bytes());
    out.extend_from_slice(&artifact.metadata.metric_loss.to_le_bytes());

    let layers = artifact.architecture.layers();
    out.extend_from_slice(&(layers.len() as u16).to_le_bytes());
    for layer in layers {
        match *layer {
            LayerSpec::Dense { units } => {
                out.push(1);
                out.extend_from_slice(&(units as u32).to_le_bytes());
            }
            LayerSpec::Conv2D { filters, kernel } => {
                out.push(2);
                out.extend_from_slice(&(filters as u32).to_le_bytes());
                out.extend_from_slice(&(kernel as u32).to_le_bytes());
            }
            LayerSpec::MaxPool2D { window } => {
                out.push(3);
                out.extend_from_slice(&(window as u32).to_le_bytes());
            }
            LayerSpec::Flatten => out.push(4),
            LayerSpec::Activation(f) => {
                out.push(5);
                let code: u32 = match f {
                    Activation::Relu => 0,
                    Activation::Sigmoid => 1,
                };
                out.extend_from_slice(&code.to_le_bytes());
            }
        }
    }

    for (_, params) in artifact.parameters.iter() {
        out.extend_from_slice(&(params.weights.len() as u64).to_le_bytes());
        for &w in params.weights.values() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.extend_from_slice(&(params.bias.len() as u64).to_le_bytes());
        for &b in params.bias.values() {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<ModelArtifact, CodecError> {
    let mut r = Reader { bytes, pos: 0 };

    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(CodecError::Format {
            offset: 0,
            reason: String::from("bad magic"),
        });
    }
    let version_offset = r.pos;
    let version = r.u16("format version")?;
    if version != FORMAT_VERSION {
        return Err(CodecError::Format {
            offset: version_offset,
            reason: format!("unsupported format version {version}"),
        });
    }

    let model_version = r.u64("model version")?;
    let origin_len = r.u16("origin length")? as usize;
    let origin_offset = r.pos;
    let origin_bytes = r.take(origin_len, "origin")?;
    let origin_node = core::str::from_utf8(origin_bytes)
        .map_err(|_| CodecError::Format {
            offset: origin_offset,
            reason: String::from("origin is not UTF-8"),
        })?
        .to_string();
    let metric_accuracy = r.f64("metric accuracy")?;
    let metric_loss = r.f64("metric loss")?;

    let layer_count = r.u16("layer count")? as usize;
    let arch_offset = r.pos;
    let mut layers = Vec::with_capacity(layer_count);
    for i in 0..layer_count {
        let tag_offset = r.pos;
        let tag = r.u8("layer tag")?;
        let layer = match tag {
            1 => LayerSpec::Dense {
                units: r.u32("dense units")? as usize,
            },
            2 => LayerSpec::Conv2D {
                filters: r.u32("conv filters")? as usize,
                kernel: r.u32("conv kernel")? as usize,
            },
            3 => LayerSpec::MaxPool2D {
                window: r.u32("pool window")? as usize,
            },
            4 => LayerSpec::Flatten,
            5 => match r.u32("activation code")? {
                0 => LayerSpec::Activation(Activation::Relu),
                1 => LayerSpec::Activation(Activation::Sigmoid),
                other => {
                    return Err(CodecError::Format {
                        offset: tag_offset,
                        reason: format!("unknown activation code {other}"),
                    })
                }
            },
            other => {
                return Err(CodecError::Format {
                    offset: tag_offset,
                    reason: format!("unknown layer tag {other} (layer {i})"),
                })
            }
        };
        layers.push(layer);
    }

    let architecture =
        NetworkArchitecture::with_default_input(layers).map_err(|e| CodecError::Integrity {
            offset: arch_offset,
            reason: e.to_string(),
        })?;

    let mut parameters = ModelParameters::new();
    for (i, layer) in architecture.layers().to_vec().iter().enumerate() {
        if !layer.has_params() {
            continue;
        }
        let (w_shape, b_shape) = shapes_for(&architecture, i, layer).map_err(|reason| {
            CodecError::Integrity {
                offset: r.pos,
                reason,
            }
        })?;
        let block_offset = r.pos;
        let w_count = r.u64("weight count")? as usize;
        if w_count != w_shape.iter().product::<usize>() {
            return Err(CodecError::Integrity {
                offset: block_offset,
                reason: format!("layer {i}: {w_count} weights does not match architecture"),
            });
        }
        let weights = r.f64_block(w_count, "weights")?;
        let bias_offset = r.pos;
        let b_count = r.u64("bias count")? as usize;
        if b_count != b_shape.iter().product::<usize>() {
            return Err(CodecError::Integrity {
                offset: bias_offset,
                reason: format!("layer {i}: {b_count} biases does not match architecture"),
            });
        }
        let bias = r.f64_block(b_count, "biases")?;
        parameters.insert(
            i,
            LayerParams {
                weights: Tensor::new(w_shape, weights).expect("counts checked"),
                bias: Tensor::new(b_shape, bias).expect("counts checked"),
            },
        );
    }

    if r.pos != bytes.len() {
        return Err(CodecError::Format {
            offset: r.pos,
            reason: format!("{} trailing bytes", bytes.len() - r.pos),
        });
    }

    ModelArtifact::new(
        architecture,
        parameters,
        ModelMetadata {
            model_version,
            origin_node,
            metric_accuracy,
            metric_loss,
        },
    )
}

fn shapes_for(
    arch: &NetworkArchitecture,
    index: usize,
    layer: &LayerSpec,
) -> Result<(Vec<usize>, Vec<usize>), String> {
    use crate::nn::arch::Shape;
    match (*layer, arch.input_of(index)) {
        (LayerSpec::Dense { units }, Shape::Flat(fan_in)) => {
            Ok((alloc::vec![fan_in, units], alloc::vec![units]))
        }
        (LayerSpec::Conv2D { filters, kernel }, Shape::Spatial { c, .. }) => {
            Ok((alloc::vec![filters, kernel, kernel, c], alloc::vec![filters]))
        }
        _ => Err(format!("layer {index} input mismatch")),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CodecError> {
        if self.pos + n > self.bytes.len() {
            return Err(CodecError::Truncated {
                offset: self.pos,
                reason: format!("need {n} bytes for {what}"),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self, what: &str) -> Result<u8, CodecError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, CodecError> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32, CodecError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self, what: &str) -> Result<u64, CodecError> {
        let b = self.take(8, what)?;
        let mut buf = [0u8; 8];
        buf.copy_from_slice(b);
        Ok(u64::from_le_bytes(buf))
    }

    fn f64(&mut self, what: &str) -> Result<f64, CodecError> {
        Ok(f64::from_bits(self.u64(what)?))
    }

    fn f64_block(&mut self, count: usize, what: &str) -> Result<Vec<f64>, CodecError> {
        // Bound first so a absurd declared count cannot trigger a huge
        // allocation before the truncation check.
        if self
            .pos
            .checked_add(count.checked_mul(8).unwrap_or(usize::MAX))
            .map(|end| end > self.bytes.len())
            .unwrap_or(true)
        {
            return Err(CodecError::Truncated {
                offset: self.pos,
                reason: format!("{what} block declares {count} values past end of input"),
            });
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(self.f64(what)?);
        }
        Ok(out)
    }
}
