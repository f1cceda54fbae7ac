//! Core building blocks for siloed training with coordinated model exchange.
//!
//! Everything in this crate is `no_std` + `alloc`: the neural network math,
//! the dataset transforms, the model wire format, the signing/sealing
//! envelopes, the role state machines, message framing, and the simulated
//! link. Anything that touches the filesystem, sockets, or wall clocks lives
//! in the companion `silotrain` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod codec;
pub mod data;
pub mod envelope;
pub mod frame;
pub mod nn;
pub mod pgm;
pub mod protocol;
pub mod seed;
pub mod series;
pub mod simnet;
pub mod tensor;
