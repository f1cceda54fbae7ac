//! Directory ingestion and export. Files are binary PGM, labeled by their
//! leading filename character: "1" positive, "0" negative, anything else
//! skipped. Ordering is by filename so a directory always ingests the same
//! way.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use silotrain_core::data::{normalize, unit_to_byte, DataError, Dataset, LabeledImage, IMAGE_SIDE};
use silotrain_core::pgm::{encode_pgm, parse_pgm, GrayImage};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("{0}: no usable image files")]
    Empty(PathBuf),
    #[error("data: {0}")]
    Data(#[from] DataError),
}

#[derive(Debug)]
pub struct IngestReport {
    pub dataset: Dataset,
    /// Files present but not ingested: unlabeled names, unparseable images.
    pub skipped: usize,
}

pub fn ingest_directory(path: &Path) -> Result<IngestReport, IngestError> {
    let mut names: Vec<(String, PathBuf)> = Vec::new();
    for entry in fs::read_dir(path)? {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            names.push((entry.file_name().to_string_lossy().into_owned(), entry.path()));
        }
    }
    names.sort();

    let mut items = Vec::new();
    let mut skipped = 0usize;
    for (name, file_path) in names {
        let label = match name.chars().next() {
            Some('1') => 1,
            Some('0') => 0,
            _ => {
                skipped += 1;
                continue;
            }
        };
        let Ok(bytes) = fs::read(&file_path) else {
            skipped += 1;
            continue;
        };
        let Ok(image) = parse_pgm(&bytes) else {
            skipped += 1;
            continue;
        };
        let pixels = normalize(&image)?;
        items.push(LabeledImage::new(pixels, label, name)?);
    }
    if items.is_empty() {
        return Err(IngestError::Empty(path.to_path_buf()));
    }
    Ok(IngestReport {
        dataset: Dataset::new(items),
        skipped,
    })
}

/// Writes every item as a 20x20 PGM named by its source id. The inverse of
/// `ingest_directory` for datasets whose pixels sit on the byte grid.
pub fn export_dataset(dataset: &Dataset, dir: &Path) -> Result<usize, IngestError> {
    fs::create_dir_all(dir)?;
    for item in dataset.items() {
        let pixels: Vec<u8> = item.pixels().iter().map(|&v| unit_to_byte(v)).collect();
        let image = GrayImage {
            width: IMAGE_SIDE,
            height: IMAGE_SIDE,
            pixels,
        };
        fs::write(dir.join(item.source_id()), encode_pgm(&image))?;
    }
    Ok(dataset.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use silotrain_core::data::synthesize;
    use silotrain_core::seed::derive_seed;

    #[test]
    fn export_then_ingest_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let original = synthesize(12, derive_seed(3, "roundtrip")).unwrap();
        let written = export_dataset(&original, dir.path()).unwrap();
        assert_eq!(written, 24);

        let report = ingest_directory(dir.path()).unwrap();
        assert_eq!(report.skipped, 0);
        assert_eq!(report.dataset.len(), original.len());
        // Ingestion sorts by filename; compare as labeled pixel multisets
        // keyed by source id.
        let mut got: Vec<_> = report.dataset.items().to_vec();
        got.sort_by(|a, b| a.source_id().cmp(b.source_id()));
        let mut want: Vec<_> = original.items().to_vec();
        want.sort_by(|a, b| a.source_id().cmp(b.source_id()));
        assert_eq!(got, want);
    }

    #[test]
    fn labels_come_from_the_leading_character() {
        let dir = tempfile::tempdir().unwrap();
        let white = GrayImage {
            width: IMAGE_SIDE,
            height: IMAGE_SIDE,
            pixels: vec![255; IMAGE_SIDE * IMAGE_SIDE],
        };
        fs::write(dir.path().join("1_case.pgm"), encode_pgm(&white)).unwrap();
        fs::write(dir.path().join("0_case.pgm"), encode_pgm(&white)).unwrap();
        fs::write(dir.path().join("notes.txt"), b"not an image").unwrap();
        fs::write(dir.path().join("1_broken.pgm"), b"P5 but nothing else").unwrap();

        let report = ingest_directory(dir.path()).unwrap();
        assert_eq!(report.dataset.len(), 2);
        assert_eq!(report.skipped, 2);
        assert_eq!(report.dataset.class_counts(), (1, 1));
        for item in report.dataset.items() {
            assert!(item.pixels().iter().all(|&p| p == 1.0), "255 scales to one");
        }
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            ingest_directory(dir.path()),
            Err(IngestError::Empty(_))
        ));
    }

    #[test]
    fn oversized_images_are_normalized_on_the_way_in() {
        let dir = tempfile::tempdir().unwrap();
        let big = GrayImage {
            width: 40,
            height: 40,
            pixels: vec![128; 1600],
        };
        fs::write(dir.path().join("0_big.pgm"), encode_pgm(&big)).unwrap();
        let report = ingest_directory(dir.path()).unwrap();
        let item = &report.dataset.items()[0];
        assert_eq!(item.pixels().len(), IMAGE_SIDE * IMAGE_SIDE);
        for &p in item.pixels() {
            assert!((p - 128.0 / 255.0).abs() < 1e-12);
        }
    }
}
