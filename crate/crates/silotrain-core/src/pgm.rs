//! Binary PGM (P5) parsing and encoding, byte level only.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

/// 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, `width * height` bytes.
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, PgmError> {
        if width == 0 || height == 0 {
            return Err(PgmError::Malformed(String::from("zero image dimension")));
        }
        if pixels.len() != width * height {
            return Err(PgmError::Malformed(format!(
                "raster has {} bytes, expected {}",
                pixels.len(),
                width * height
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PgmError {
    #[error("not a binary PGM: {0}")]
    Malformed(String),
    #[error("unsupported maxval {0} (only 255)")]
    UnsupportedMaxval(u32),
}

/// Parses a binary PGM. Header tokens may be separated by any whitespace;
/// `#` comments are honored. Maxval must be 255.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    let mut pos = 0usize;
    let magic = take_token(bytes, &mut pos)
        .ok_or_else(|| PgmError::Malformed(String::from("missing magic")))?;
    if magic != b"P5" {
        return Err(PgmError::Malformed(String::from("magic is not P5")));
    }
    let width = parse_number(bytes, &mut pos, "width")?;
    let height = parse_number(bytes, &mut pos, "height")?;
    let maxval = parse_number(bytes, &mut pos, "maxval")?;
    if maxval != 255 {
        return Err(PgmError::UnsupportedMaxval(maxval as u32));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(PgmError::Malformed(String::from(
            "missing raster separator",
        )));
    }
    pos += 1;
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| PgmError::Malformed(String::from("dimensions overflow")))?;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(PgmError::Malformed(format!(
            "raster has {} bytes, expected {expected}",
            raster.len()
        )));
    }
    if raster.len() > expected {
        return Err(PgmError::Malformed(format!(
            "{} trailing bytes after raster",
            raster.len() - expected
        )));
    }
    GrayImage::new(width, height, raster.to_vec())
}

pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    out
}

/// Skips whitespace and comments, then returns the next token.
fn take_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    if *pos >= bytes.len() {
        return None;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    Some(&bytes[start..*pos])
}

fn parse_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize, PgmError> {
    let token =
        take_token(bytes, pos).ok_or_else(|| PgmError::Malformed(format!("missing {what}")))?;
    let text = core::str::from_utf8(token)
        .map_err(|_| PgmError::Malformed(format!("{what} is not ASCII")))?;
    let value: usize = text
        .parse()
        .map_err(|_| PgmError::Malformed(format!("{what} is not a number: {text:?}")))?;
    if value == 0 {
        return Err(PgmError::Malformed(format!("{what} must be positive")));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let img = GrayImage::new(3, 2, alloc::vec![0, 64, 128, 192, 255, 7]).unwrap();
        let bytes = encode_pgm(&img);
        assert_eq!(parse_pgm(&bytes).unwrap(), img);
    }

    #[test]
    fn parses_comments_and_mixed_whitespace() {
        let mut bytes = b"P5 # comment here\n# another\n 2\t2\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4]);
        let img = parse_pgm(&bytes).unwrap();
        assert_eq!((img.width, img.height), (2, 2));
        assert_eq!(img.pixels, alloc::vec![1, 2, 3, 4]);
    }

    #[test]
    fn rejects_wrong_magic() {
        assert!(matches!(
            parse_pgm(b"P2\n2 2\n255\n1 2 3 4"),
            Err(PgmError::Malformed(_))
        ));
    }

    #[test]
    fn rejects_wrong_maxval() {
        let mut bytes = b"P5\n1 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0, 0]);
        assert_eq!(
            parse_pgm(&bytes).unwrap_err(),
            PgmError::UnsupportedMaxval(65535)
        );
    }

    #[test]
    fn rejects_short_raster() {
        let bytes = b"P5\n2 2\n255\n\x01\x02".to_vec();
        assert!(matches!(parse_pgm(&bytes), Err(PgmError::Malformed(_))));
    }
}
