//! Labeled 20x20 grayscale datasets: normalization, stratified splitting,
//! node partitioning, and the synthetic two-class task.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::pgm::GrayImage;
use crate::tensor::Tensor;

pub const IMAGE_SIDE: usize = 20;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DataError {
    #[error("image error: {0}")]
    Image(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("partition error: {0}")]
    Partition(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// All pixel scaling goes through this one helper.
pub fn byte_to_unit(b: u8) -> f64 {
    b as f64 / 255.0
}

/// Inverse of `byte_to_unit` on the byte grid; saturates outside [0,1].
pub fn unit_to_byte(v: f64) -> u8 {
    libm::round(v.clamp(0.0, 1.0) * 255.0) as u8
}

/// One normalized training item: 400 pixels in `[0,1]`, a binary label, and
/// the identifier of where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pixels: Vec<f64>,
    label: u8,
    source_id: String,
}

impl LabeledImage {
    pub fn new(pixels: Vec<f64>, label: u8, source_id: String) -> Result<Self, DataError> {
        if pixels.len() != IMAGE_PIXELS {
            return Err(DataError::Image(format!(
                "{}: {} pixels, expected {IMAGE_PIXELS}",
                source_id,
                pixels.len()
            )));
        }
        if !pixels.iter().all(|p| p.is_finite() && (0.0..=1.0).contains(p)) {
            return Err(DataError::Image(format!(
                "{source_id}: pixel outside [0,1]"
            )));
        }
        if label > 1 {
            return Err(DataError::Image(format!(
                "{source_id}: label {label} is not binary"
            )));
        }
        Ok(LabeledImage {
            pixels,
            label,
            source_id,
        })
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn label(&self) -> u8 {
        self.label
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    items: Vec<LabeledImage>,
}

impl Dataset {
    pub fn new(items: Vec<LabeledImage>) -> Self {
        Dataset { items }
    }

    pub fn items(&self) -> &[LabeledImage] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// (class 0 count, class 1 count), always consistent with `items`.
    pub fn class_counts(&self) -> (usize, usize) {
        let ones = self.items.iter().filter(|i| i.label == 1).count();
        (self.items.len() - ones, ones)
    }

    /// Batch tensors in item order, final partial batch included.
    pub fn batch_iter(&self, batch_size: usize) -> impl Iterator<Item = (Tensor, Vec<f64>)> + '_ {
        let size = batch_size.max(1);
        self.items.chunks(size).map(|chunk| {
            let mut values = Vec::with_capacity(chunk.len() * IMAGE_PIXELS);
            let mut labels = Vec::with_capacity(chunk.len());
            for item in chunk {
                values.extend_from_slice(&item.pixels);
                labels.push(item.label as f64);
            }
            (
                Tensor::new(vec![chunk.len(), IMAGE_SIDE, IMAGE_SIDE, 1], values)
                    .expect("chunk is non-empty and sized"),
                labels,
            )
        })
    }

    /// Batch tensor for an index selection.
    pub fn gather(&self, indices: &[usize]) -> (Tensor, Vec<f64>) {
        let mut values = Vec::with_capacity(indices.len() * IMAGE_PIXELS);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(&self.items[i].pixels);
            labels.push(self.items[i].label as f64);
        }
        (
            Tensor::new(vec![indices.len(), IMAGE_SIDE, IMAGE_SIDE, 1], values)
                .expect("indices sized"),
            labels,
        )
    }
}

/// Scales a raw grayscale raster into the unit 20x20 grid.
///
/// A 20x20 input maps pixel for pixel through `byte_to_unit`. Anything else
/// is resampled by area-weighted averaging, aspect ratio preserved, and
/// centered in the 20x20 box with zero padding.
pub fn normalize(raw: &GrayImage) -> Result<Vec<f64>, DataError> {
    if raw.pixels.len() != raw.width * raw.height || raw.width == 0 || raw.height == 0 {
        return Err(DataError::Image(String::from("malformed raster")));
    }
    if raw.width == IMAGE_SIDE && raw.height == IMAGE_SIDE {
        return Ok(raw.pixels.iter().map(|&b| byte_to_unit(b)).collect());
    }

    let scale = (IMAGE_SIDE as f64 / raw.width as f64).min(IMAGE_SIDE as f64 / raw.height as f64);
    let content_w = clamp_extent(raw.width as f64 * scale);
    let content_h = clamp_extent(raw.height as f64 * scale);
    let off_x = (IMAGE_SIDE - content_w) / 2;
    let off_y = (IMAGE_SIDE - content_h) / 2;

    let col_weights = overlap_weights(raw.width, content_w);
    let row_weights = overlap_weights(raw.height, content_h);

    let mut out = vec![0.0; IMAGE_PIXELS];
    for (cy, rows) in row_weights.iter().enumerate() {
        for (cx, cols) in col_weights.iter().enumerate() {
            let mut acc = 0.0;
            let mut area = 0.0;
            for &(y, wy) in rows {
                for &(x, wx) in cols {
                    acc += wy * wx * raw.pixels[y * raw.width + x] as f64;
                    area += wy * wx;
                }
            }
            out[(off_y + cy) * IMAGE_SIDE + off_x + cx] = acc / area / 255.0;
        }
    }
    Ok(out)
}

fn clamp_extent(v: f64) -> usize {
    (libm::round(v) as usize).clamp(1, IMAGE_SIDE)
}

/// For each destination cell, the source cells it overlaps and by how much.
fn overlap_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|j| {
            let start = j as f64 * ratio;
            let end = (j + 1) as f64 * ratio;
            let first = start as usize;
            let last = ((libm::ceil(end) as usize).max(first + 1)).min(src);
            (first..last)
                .filter_map(|y| {
                    let lo = start.max(y as f64);
                    let hi = end.min((y + 1) as f64);
                    let w = hi - lo;
                    (w > 0.0).then_some((y, w))
                })
                .collect()
        })
        .collect()
}

/// Splits per class: shuffle, take `floor(train_fraction * count)` for
/// training, rest for testing. Both sides must stay non-empty per class.
pub fn stratified_holdout(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::Domain(format!(
            "train fraction must be in (0,1), got {train_fraction}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1u8] {
        let mut idxs: Vec<usize> = dataset
            .items
            .iter()
            .enumerate()
            .filter(|(_, it)| it.label == class)
            .map(|(i, _)| i)
            .collect();
        if idxs.is_empty() {
            continue;
        }
        idxs.shuffle(&mut rng);
        let take = (train_fraction * idxs.len() as f64) as usize;
        if take == 0 || take == idxs.len() {
            return Err(DataError::Split(format!(
                "class {class} has {} items, cannot split both ways",
                idxs.len()
            )));
        }
        for (k, &i) in idxs.iter().enumerate() {
            if k < take {
                train.push(dataset.items[i].clone());
            } else {
                test.push(dataset.items[i].clone());
            }
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(DataError::Split(String::from("dataset is empty")));
    }
    Ok((Dataset::new(train), Dataset::new(test)))
}

/// Deals each class round-robin across `n_shards` shuffled shards. Shards
/// are disjoint, cover the input, and per-class sizes differ by at most one.
pub fn partition(dataset: &Dataset, n_shards: usize, seed: u64) -> Result<Vec<Dataset>, DataError> {
    if n_shards == 0 {
        return Err(DataError::Partition(String::from(
            "need at least one shard",
        )));
    }
    let (n0, n1) = dataset.class_counts();
    if n0 < n_shards || n1 < n_shards {
        return Err(DataError::Partition(format!(
            "class counts ({n0}, {n1}) cannot cover {n_shards} shards"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut shards: Vec<Vec<LabeledImage>> = vec![Vec::new(); n_shards];
    for class in [0u8, 1u8] {
        let mut idxs: Vec<usize> = dataset
            .items
            .iter()
            .enumerate()
            .filter(|(_, it)| it.label == class)
            .map(|(i, _)| i)
            .collect();
        idxs.shuffle(&mut rng);
        for (k, &i) in idxs.iter().enumerate() {
            shards[k % n_shards].push(dataset.items[i].clone());
        }
    }
    Ok(shards.into_iter().map(Dataset::new).collect())
}

// The 6x6 blob kernel peaks at exactly +0.5 in its four central cells.
const BLOB_SIDE: usize = 6;
const BLOB_SIGMA: f64 = 1.5;
const BLOB_PEAK: f64 = 0.5;

fn blob_kernel() -> [f64; BLOB_SIDE * BLOB_SIDE] {
    let center = (BLOB_SIDE as f64 - 1.0) / 2.0;
    let mut raw = [0.0; BLOB_SIDE * BLOB_SIDE];
    let mut max = 0.0f64;
    for dy in 0..BLOB_SIDE {
        for dx in 0..BLOB_SIDE {
            let dist2 = (dy as f64 - center) * (dy as f64 - center)
                + (dx as f64 - center) * (dx as f64 - center);
            let v = libm::exp(-dist2 / (2.0 * BLOB_SIGMA * BLOB_SIGMA));
            raw[dy * BLOB_SIDE + dx] = v;
            if v > max {
                max = v;
            }
        }
    }
    for v in raw.iter_mut() {
        *v *= BLOB_PEAK / max;
    }
    raw
}

/// Generates `n_per_class` images per class. Class 0 is clamped Gaussian
/// noise around 0.3; class 1 adds a soft bright blob at a seeded position.
/// Pixels land on the byte grid, so exporting to PGM and re-reading them
/// reproduces the dataset exactly.
pub fn synthesize(n_per_class: usize, seed: u64) -> Result<Dataset, DataError> {
    if n_per_class == 0 {
        return Err(DataError::Domain(String::from(
            "need at least one image per class",
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let noise = Normal::<f64>::new(0.3, 0.1).expect("valid parameters");
    let kernel = blob_kernel();
    let mut items = Vec::with_capacity(2 * n_per_class);
    for class in [0u8, 1u8] {
        for i in 0..n_per_class {
            let mut pixels: Vec<f64> = (0..IMAGE_PIXELS)
                .map(|_| noise.sample(&mut rng).clamp(0.0, 1.0))
                .collect();
            if class == 1 {
                let y0 = rng.gen_range(0..=IMAGE_SIDE - BLOB_SIDE);
                let x0 = rng.gen_range(0..=IMAGE_SIDE - BLOB_SIDE);
                for dy in 0..BLOB_SIDE {
                    for dx in 0..BLOB_SIDE {
                        let p = &mut pixels[(y0 + dy) * IMAGE_SIDE + x0 + dx];
                        *p = (*p + kernel[dy * BLOB_SIDE + dx]).clamp(0.0, 1.0);
                    }
                }
            }
            for p in pixels.iter_mut() {
                *p = byte_to_unit(unit_to_byte(*p));
            }
            let source_id = format!("{class}_synth{i:05}.pgm");
            items.push(LabeledImage::new(pixels, class, source_id)?);
        }
    }
    Ok(Dataset::new(items))
}
