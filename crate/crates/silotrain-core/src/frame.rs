//! Message framing and the four-message wire vocabulary.
//!
//! A frame is `length: u32 big-endian` (message type byte plus payload),
//! then `msg_type: u8`, then the payload. Frames are capped at 16 MiB.
//!
//! Message payloads use little-endian integers and length-prefixed byte
//! strings, matching the model codec's conventions.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::envelope::{KeyId, SealedEnvelope, SignedArtifact, KEY_ID_LEN};

pub const MAX_FRAME: usize = 16 * 1024 * 1024;
pub const HEADER_LEN: usize = 4;

pub const MSG_FETCH_MODEL: u8 = 1;
pub const MSG_CURRENT_MODEL: u8 = 2;
pub const MSG_CANDIDATE_MODEL: u8 = 3;
pub const MSG_DECISION: u8 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: u8,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("frame of {0} bytes exceeds the 16 MiB cap")]
    TooLarge(usize),
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("malformed {what}: {reason}")]
    Malformed { what: &'static str, reason: String },
}

impl Frame {
    pub fn encode(&self) -> Result<Vec<u8>, FrameError> {
        let body_len = self.payload.len() + 1;
        if body_len > MAX_FRAME {
            return Err(FrameError::TooLarge(body_len));
        }
        let mut out = Vec::with_capacity(HEADER_LEN + body_len);
        out.extend_from_slice(&(body_len as u32).to_be_bytes());
        out.push(self.msg_type);
        out.extend_from_slice(&self.payload);
        Ok(out)
    }

    /// Parses one frame from the front of `bytes`; returns it and the byte
    /// count consumed. `Ok(None)` means more bytes are needed.
    pub fn decode(bytes: &[u8]) -> Result<Option<(Frame, usize)>, FrameError> {
        if bytes.len() < HEADER_LEN {
            return Ok(None);
        }
        let body_len = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
        if body_len > MAX_FRAME {
            return Err(FrameError::TooLarge(body_len));
        }
        if body_len == 0 {
            return Err(FrameError::Malformed {
                what: "frame",
                reason: String::from("empty body"),
            });
        }
        if bytes.len() < HEADER_LEN + body_len {
            return Ok(None);
        }
        let msg_type = bytes[HEADER_LEN];
        let payload = bytes[HEADER_LEN + 1..HEADER_LEN + body_len].to_vec();
        Ok(Some((Frame { msg_type, payload }, HEADER_LEN + body_len)))
    }
}

/// The complete message vocabulary. Fetches and decisions carry control
/// fields only; models travel as signed bytes from the coordinator and as
/// sealed envelopes toward it. No message carries raw training data.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    FetchModel {
        node_id: String,
    },
    CurrentModel(SignedArtifact),
    CandidateModel {
        node_id: String,
        envelope: SealedEnvelope,
    },
    Decision {
        accepted: bool,
        version: u64,
    },
}

impl Message {
    /// Short variant name for logs and error text; payloads stay out of it.
    pub fn kind(&self) -> &'static str {
        match self {
            Message::FetchModel { .. } => "FetchModel",
            Message::CurrentModel(_) => "CurrentModel",
            Message::CandidateModel { .. } => "CandidateModel",
            Message::Decision { .. } => "Decision",
        }
    }

    pub fn to_frame(&self) -> Result<Frame, FrameError> {
        let mut payload = Vec::new();
        let msg_type = match self {
            Message::FetchModel { node_id } => {
                put_bytes(&mut payload, node_id.as_bytes());
                MSG_FETCH_MODEL
            }
            Message::CurrentModel(signed) => {
                put_bytes(&mut payload, &signed.signer_key_id);
                payload.extend_from_slice(&signed.signature);
                put_bytes(&mut payload, &signed.payload);
                MSG_CURRENT_MODEL
            }
            Message::CandidateModel { node_id, envelope } => {
                put_bytes(&mut payload, node_id.as_bytes());
                put_bytes(&mut payload, &envelope.recipient_key_id);
                put_bytes(&mut payload, &envelope.wrapped_key);
                payload.extend_from_slice(&envelope.nonce);
                put_bytes(&mut payload, &envelope.ciphertext);
                MSG_CANDIDATE_MODEL
            }
            Message::Decision { accepted, version } => {
                payload.push(u8::from(*accepted));
                payload.extend_from_slice(&version.to_le_bytes());
                MSG_DECISION
            }
        };
        Ok(Frame { msg_type, payload })
    }

    pub fn from_frame(frame: &Frame) -> Result<Message, FrameError> {
        let mut r = PayloadReader {
            bytes: &frame.payload,
            pos: 0,
        };
        let message = match frame.msg_type {
            MSG_FETCH_MODEL => Message::FetchModel {
                node_id: r.string("node id")?,
            },
            MSG_CURRENT_MODEL => {
                let key_id = r.key_id("signer key id")?;
                let signature: [u8; 64] = r
                    .fixed::<64>("signature")?;
                let payload = r.bytes_field("model payload")?;
                Message::CurrentModel(SignedArtifact {
                    payload,
                    signer_key_id: key_id,
                    signature,
                })
            }
            MSG_CANDIDATE_MODEL => {
                let node_id = r.string("node id")?;
                let recipient_key_id = r.key_id("recipient key id")?;
                let wrapped_key = r.bytes_field("wrapped key")?;
                let nonce: [u8; 12] = r.fixed::<12>("nonce")?;
                let ciphertext = r.bytes_field("ciphertext")?;
                Message::CandidateModel {
                    node_id,
                    envelope: SealedEnvelope {
                        recipient_key_id,
                        wrapped_key,
                        nonce,
                        ciphertext,
                    },
                }
            }
            MSG_DECISION => {
                let accepted = match r.u8("accepted flag")? {
                    0 => false,
                    1 => true,
                    other => {
                        return Err(FrameError::Malformed {
                            what: "decision",
                            reason: format!("accepted flag {other}"),
                        })
                    }
                };
                let version = r.u64("version")?;
                Message::Decision { accepted, version }
            }
            other => return Err(FrameError::UnknownType(other)),
        };
        if r.pos != frame.payload.len() {
            return Err(FrameError::Malformed {
                what: "payload",
                reason: format!("{} trailing bytes", frame.payload.len() - r.pos),
            });
        }
        Ok(message)
    }
}

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(bytes);
}

struct PayloadReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PayloadReader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], FrameError> {
        if self.pos + n > self.bytes.len() {
            return Err(FrameError::Malformed {
                what,
                reason: format!("needs {n} bytes at offset {}", self.pos),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, FrameError> {
        Ok(self.take(1, what)?[0])
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, FrameError> {
        let b = self.take(8, what)?;
        let mut buf = [0u8; 8];
        buf.copy_from_slice(b);
        Ok(u64::from_le_bytes(buf))
    }

    fn bytes_field(&mut self, what: &'static str) -> Result<Vec<u8>, FrameError> {
        let b = self.take(4, what)?;
        let len = u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize;
        Ok(self.take(len, what)?.to_vec())
    }

    fn string(&mut self, what: &'static str) -> Result<String, FrameError> {
        let bytes = self.bytes_field(what)?;
        core::str::from_utf8(&bytes)
            .map(|s| s.to_string())
            .map_err(|_| FrameError::Malformed {
                what,
                reason: String::from("not UTF-8"),
            })
    }

    fn key_id(&mut self, what: &'static str) -> Result<KeyId, FrameError> {
        let bytes = self.bytes_field(what)?;
        if bytes.len() != KEY_ID_LEN {
            return Err(FrameError::Malformed {
                what,
                reason: format!("key id of {} bytes", bytes.len()),
            });
        }
        let mut id = [0u8; KEY_ID_LEN];
        id.copy_from_slice(&bytes);
        Ok(id)
    }

    fn fixed<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N], FrameError> {
        let b = self.take(N, what)?;
        let mut buf = [0u8; N];
        buf.copy_from_slice(b);
        Ok(buf)
    }
}
