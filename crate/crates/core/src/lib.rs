//! Low-latency secure data outsourcing.
//!
//! A message is split into one block per level of its access tree. Each
//! block is encrypted under that level alone and carries the unlock element
//! of the next level, so blocks can be encrypted, shipped and decrypted one
//! at a time while later blocks are still in flight.
//!
//! * [`algebra`]: pairing group, hashing to the group, keystream masks.
//! * [`policy`]: threshold access trees, text syntax, level partitioning.
//! * [`scheme`]: setup, key generation, block encryption, decryption, verification.
//! * [`pipeline`]: latency model of the overlapped stages.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod algebra;
pub mod pipeline;
pub mod policy;
pub mod scheme;
pub mod synth;

pub use algebra::{pair, G0Element, GtElement, Scalar};
pub use policy::{parse_policy, AccessTree, AttributeSet};
pub use scheme::{CiphertextBlock, DecryptionState, MasterKey, PublicKey, SecretKey};
