//! Key files on disk: `<name>.pub` and `<name>.key`, each a 4-byte magic
//! "DKEY", a role byte (0 public, 1 private), and a length-prefixed blob.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use silotrain_core::envelope::{KeyPair, PrivatePart, PublicPart};

const MAGIC: &[u8; 4] = b"DKEY";
const ROLE_PUBLIC: u8 = 0;
const ROLE_PRIVATE: u8 = 1;
const PART_LEN: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum KeyFileError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("{}: not a key file", .0.display())]
    BadMagic(PathBuf),
    #[error("{}: wrong key role (expected {expected})", path.display())]
    WrongRole { path: PathBuf, expected: &'static str },
    #[error("{}: bad key length {got}", path.display())]
    BadLength { path: PathBuf, got: usize },
}

fn write_part(path: &Path, role: u8, bytes: &[u8; PART_LEN]) -> io::Result<()> {
    let mut out = Vec::with_capacity(4 + 1 + 4 + PART_LEN);
    out.extend_from_slice(MAGIC);
    out.push(role);
    out.extend_from_slice(&(PART_LEN as u32).to_le_bytes());
    out.extend_from_slice(bytes);
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    file.flush()
}

fn read_part(path: &Path, role: u8, expected: &'static str) -> Result<[u8; PART_LEN], KeyFileError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 9 || &bytes[..4] != MAGIC {
        return Err(KeyFileError::BadMagic(path.to_path_buf()));
    }
    if bytes[4] != role {
        return Err(KeyFileError::WrongRole {
            path: path.to_path_buf(),
            expected,
        });
    }
    let declared = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let blob = &bytes[9..];
    if declared != PART_LEN || blob.len() != PART_LEN {
        return Err(KeyFileError::BadLength {
            path: path.to_path_buf(),
            got: blob.len(),
        });
    }
    Ok(blob.try_into().unwrap())
}

/// Writes `<base>.pub` and `<base>.key` next to each other, returning both
/// paths (public first).
pub fn save_keypair(base: &Path, keys: &KeyPair) -> io::Result<(PathBuf, PathBuf)> {
    let pub_path = base.with_extension("pub");
    let key_path = base.with_extension("key");
    write_part(&pub_path, ROLE_PUBLIC, keys.public.as_bytes())?;
    write_part(&key_path, ROLE_PRIVATE, keys.private.as_bytes())?;
    Ok((pub_path, key_path))
}

pub fn load_public(path: &Path) -> Result<PublicPart, KeyFileError> {
    Ok(PublicPart::from_bytes(read_part(path, ROLE_PUBLIC, "public")?))
}

pub fn load_private(path: &Path) -> Result<PrivatePart, KeyFileError> {
    Ok(PrivatePart::from_bytes(read_part(path, ROLE_PRIVATE, "private")?))
}

/// Loads `<base>.key` and rebuilds the full pair from the private half.
pub fn load_keypair(base: &Path) -> Result<KeyPair, KeyFileError> {
    let private = load_private(&base.with_extension("key"))?;
    let public = private.public_part();
    Ok(KeyPair { public, private })
}
