//! Authenticity and confidentiality envelopes for model artifacts.
//!
//! Each party holds one hybrid key pair: an Ed25519 half for signatures and
//! an X25519 half for sealing. The public part is the 64-byte concatenation
//! of both public keys; a key id is the first 8 bytes of its SHA-256 digest.
//!
//! Signing covers the full payload with Ed25519. Sealing generates a fresh
//! content key, encrypts the payload with ChaCha20-Poly1305, then wraps the
//! content key for the recipient via an ephemeral X25519 agreement and
//! HKDF-SHA256. Only the recipient's private half can unwrap.

use alloc::string::String;
use alloc::vec::Vec;

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use hkdf::Hkdf;
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use x25519_dalek::{PublicKey as XPublicKey, StaticSecret};

pub const KEY_ID_LEN: usize = 8;
pub type KeyId = [u8; KEY_ID_LEN];

const HALF: usize = 32;
const NONCE_LEN: usize = 12;
const WRAP_INFO: &[u8] = b"silotrain content key wrap v1";

/// Signing + sealing public material: `ed25519 key || x25519 key`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicPart {
    bytes: [u8; 2 * HALF],
}

impl PublicPart {
    pub fn from_bytes(bytes: [u8; 2 * HALF]) -> Self {
        PublicPart { bytes }
    }

    pub fn as_bytes(&self) -> &[u8; 2 * HALF] {
        &self.bytes
    }

    pub fn key_id(&self) -> KeyId {
        let digest = Sha256::digest(self.bytes);
        let mut id = [0u8; KEY_ID_LEN];
        id.copy_from_slice(&digest[..KEY_ID_LEN]);
        id
    }

    fn signing(&self) -> Result<VerifyingKey, EnvelopeError> {
        let mut half = [0u8; HALF];
        half.copy_from_slice(&self.bytes[..HALF]);
        VerifyingKey::from_bytes(&half).map_err(|_| EnvelopeError::MalformedKey)
    }

    fn sealing(&self) -> XPublicKey {
        let mut half = [0u8; HALF];
        half.copy_from_slice(&self.bytes[HALF..]);
        XPublicKey::from(half)
    }
}

/// Private material: `ed25519 seed || x25519 secret`.
#[derive(Clone)]
pub struct PrivatePart {
    bytes: [u8; 2 * HALF],
}

impl PrivatePart {
    pub fn from_bytes(bytes: [u8; 2 * HALF]) -> Self {
        PrivatePart { bytes }
    }

    pub fn as_bytes(&self) -> &[u8; 2 * HALF] {
        &self.bytes
    }

    fn signing(&self) -> SigningKey {
        let mut half = [0u8; HALF];
        half.copy_from_slice(&self.bytes[..HALF]);
        SigningKey::from_bytes(&half)
    }

    fn sealing(&self) -> StaticSecret {
        let mut half = [0u8; HALF];
        half.copy_from_slice(&self.bytes[HALF..]);
        StaticSecret::from(half)
    }

    /// Recomputes the matching public part.
    pub fn public_part(&self) -> PublicPart {
        let mut bytes = [0u8; 2 * HALF];
        bytes[..HALF].copy_from_slice(self.signing().verifying_key().as_bytes());
        bytes[HALF..].copy_from_slice(XPublicKey::from(&self.sealing()).as_bytes());
        PublicPart::from_bytes(bytes)
    }
}

impl core::fmt::Debug for PrivatePart {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "PrivatePart(..)")
    }
}

#[derive(Debug, Clone)]
pub struct KeyPair {
    pub public: PublicPart,
    pub private: PrivatePart,
}

impl KeyPair {
    pub fn key_id(&self) -> KeyId {
        self.public.key_id()
    }
}

/// Deterministic key generation from a seed.
pub fn keygen(seed: u64) -> KeyPair {
    keygen_with(&mut ChaCha20Rng::seed_from_u64(seed))
}

pub fn keygen_with(rng: &mut (impl RngCore + CryptoRng)) -> KeyPair {
    let mut bytes = [0u8; 2 * HALF];
    rng.fill_bytes(&mut bytes);
    let private = PrivatePart::from_bytes(bytes);
    let public = private.public_part();
    KeyPair { public, private }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvelopeError {
    #[error("signature does not verify")]
    BadSignature,
    #[error("artifact was signed by a different key")]
    KeyMismatch,
    #[error("envelope is addressed to a different recipient")]
    RecipientMismatch,
    #[error("envelope failed to decrypt")]
    DecryptionFailure,
    #[error("malformed key material")]
    MalformedKey,
    #[error("malformed envelope: {0}")]
    Malformed(String),
}

/// A payload plus a detached signature and the signer's key id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedArtifact {
    pub payload: Vec<u8>,
    pub signer_key_id: KeyId,
    pub signature: [u8; 64],
}

pub fn sign(payload: &[u8], private: &PrivatePart) -> SignedArtifact {
    let key = private.signing();
    let signature = key.sign(payload);
    SignedArtifact {
        payload: payload.to_vec(),
        signer_key_id: private.public_part().key_id(),
        signature: signature.to_bytes(),
    }
}

/// Checks the key id, then the signature; returns the payload on success.
pub fn verify(artifact: &SignedArtifact, public: &PublicPart) -> Result<Vec<u8>, EnvelopeError> {
    if artifact.signer_key_id != public.key_id() {
        return Err(EnvelopeError::KeyMismatch);
    }
    let key = public.signing()?;
    let signature = Signature::from_bytes(&artifact.signature);
    key.verify(&artifact.payload, &signature)
        .map_err(|_| EnvelopeError::BadSignature)?;
    Ok(artifact.payload.clone())
}

/// Ciphertext addressed to one recipient.
///
/// `wrapped_key` is `ephemeral x25519 key (32) || wrap nonce (12) ||
/// wrapped content key (48)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedEnvelope {
    pub recipient_key_id: KeyId,
    pub wrapped_key: Vec<u8>,
    pub nonce: [u8; NONCE_LEN],
    pub ciphertext: Vec<u8>,
}

pub fn seal(
    payload: &[u8],
    recipient: &PublicPart,
    rng: &mut (impl RngCore + CryptoRng),
) -> SealedEnvelope {
    let mut content_key = [0u8; HALF];
    rng.fill_bytes(&mut content_key);
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let mut eph_secret = [0u8; HALF];
    rng.fill_bytes(&mut eph_secret);
    let mut wrap_nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut wrap_nonce);

    let cipher = ChaCha20Poly1305::new(Key::from_slice(&content_key));
    let ciphertext = cipher
        .encrypt(Nonce::from_slice(&nonce), payload)
        .expect("encryption is infallible for in-memory payloads");

    let eph = StaticSecret::from(eph_secret);
    let eph_public = XPublicKey::from(&eph);
    let shared = eph.diffie_hellman(&recipient.sealing());
    let kek = derive_wrap_key(shared.as_bytes(), &recipient.key_id());
    let wrap_cipher = ChaCha20Poly1305::new(Key::from_slice(&kek));
    let wrapped = wrap_cipher
        .encrypt(Nonce::from_slice(&wrap_nonce), content_key.as_slice())
        .expect("encryption is infallible for in-memory payloads");

    let mut wrapped_key = Vec::with_capacity(HALF + NONCE_LEN + wrapped.len());
    wrapped_key.extend_from_slice(eph_public.as_bytes());
    wrapped_key.extend_from_slice(&wrap_nonce);
    wrapped_key.extend_from_slice(&wrapped);

    SealedEnvelope {
        recipient_key_id: recipient.key_id(),
        wrapped_key,
        nonce,
        ciphertext,
    }
}

/// Unwraps the content key and decrypts. Any tampering anywhere in the
/// envelope surfaces as an error; no partial plaintext escapes.
pub fn open(envelope: &SealedEnvelope, recipient: &PrivatePart) -> Result<Vec<u8>, EnvelopeError> {
    let public = recipient.public_part();
    if envelope.recipient_key_id != public.key_id() {
        return Err(EnvelopeError::RecipientMismatch);
    }
    if envelope.wrapped_key.len() != HALF + NONCE_LEN + HALF + 16 {
        return Err(EnvelopeError::Malformed(String::from(
            "wrapped key block has wrong length",
        )));
    }
    let mut eph_public = [0u8; HALF];
    eph_public.copy_from_slice(&envelope.wrapped_key[..HALF]);
    let wrap_nonce = &envelope.wrapped_key[HALF..HALF + NONCE_LEN];
    let wrapped = &envelope.wrapped_key[HALF + NONCE_LEN..];

    let shared = recipient
        .sealing()
        .diffie_hellman(&XPublicKey::from(eph_public));
    let kek = derive_wrap_key(shared.as_bytes(), &envelope.recipient_key_id);
    let wrap_cipher = ChaCha20Poly1305::new(Key::from_slice(&kek));
    let content_key = wrap_cipher
        .decrypt(Nonce::from_slice(wrap_nonce), wrapped)
        .map_err(|_| EnvelopeError::DecryptionFailure)?;

    let cipher = ChaCha20Poly1305::new(Key::from_slice(&content_key));
    cipher
        .decrypt(Nonce::from_slice(&envelope.nonce), envelope.ciphertext.as_slice())
        .map_err(|_| EnvelopeError::DecryptionFailure)
}

fn derive_wrap_key(shared: &[u8; HALF], recipient_id: &KeyId) -> [u8; HALF] {
    let hk = Hkdf::<Sha256>::new(Some(recipient_id), shared);
    let mut kek = [0u8; HALF];
    hk.expand(WRAP_INFO, &mut kek)
        .expect("output length is valid for HKDF-SHA256");
    kek
}
