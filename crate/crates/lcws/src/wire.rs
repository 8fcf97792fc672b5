//! Wire format for ciphertext blocks.
//!
//! ```text
//! "LCWS" | version u8 | suite u8 | message id [16] | index u32 | count u32 | flags u8
//! section header      : message_len u64, block_len u32
//! section descriptor  : level u32, entries u32, entry*
//! section c_tilde     : bytes
//! section c           : G0
//! section commitment  : G0                  (only with FLAG_COMMITMENT)
//! section delta       : count u32, (node u32, G0)*
//! section leaves      : count u32, (node u32, G0, G0)*
//! ```
//!
//! Every section is prefixed by a 4-byte big-endian length. Entries are
//! `id u32, parent u32 (0xffffffff for none), index u32, kind u8` followed by
//! `attr_len u16, attr` for leaves or `threshold u32, n u32, child u32*` for
//! gates. Decoding accepts exactly one encoding per block.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use lcws_core::algebra::SUITE_ID;
use lcws_core::policy::{DescriptorEntry, EntryKind, LevelSlice, NodeId};
use lcws_core::scheme::{BlockHeader, CiphertextBlock, LeafComponent};

use crate::codec::{DecodeError, Reader, Writer};

pub const MAGIC: &[u8; 4] = b"LCWS";
pub const VERSION: u8 = 1;

pub const FLAG_COMMITMENT: u8 = 0x01;
/// The last block's trailing unlock slot holds the identity sentinel.
pub const FLAG_SENTINEL_SEC: u8 = 0x02;

const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MessageId(pub [u8; 16]);

impl MessageId {
    pub fn random<R: rand::RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut id = [0u8; 16];
        rng.fill_bytes(&mut id);
        MessageId(id)
    }
}

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl FromStr for MessageId {
    type Err = hex::FromHexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut id = [0u8; 16];
        hex::decode_to_slice(s, &mut id)?;
        Ok(MessageId(id))
    }
}

/// A ciphertext block together with the message it belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireCtb {
    pub message: MessageId,
    pub block: CiphertextBlock,
}

impl WireCtb {
    pub fn flags(&self) -> u8 {
        let mut flags = 0;
        if self.block.commitment.is_some() {
            flags |= FLAG_COMMITMENT;
        }
        if self.block.is_last() {
            flags |= FLAG_SENTINEL_SEC;
        }
        flags
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let b = &self.block;
        let mut w = Writer::default();
        w.bytes(MAGIC);
        w.u8(VERSION);
        w.u8(SUITE_ID);
        w.bytes(&self.message.0);
        w.u32(b.index);
        w.u32(b.block_count);
        w.u8(self.flags());
        w.section(|w| {
            w.u64(b.header.message_len);
            w.u32(b.header.block_len);
        });
        w.section(|w| write_descriptor(w, &b.level));
        w.section(|w| w.bytes(&b.c_tilde));
        w.section(|w| w.g0(&b.c));
        if let Some(commitment) = &b.commitment {
            w.section(|w| w.g0(commitment));
        }
        w.section(|w| {
            w.u32(b.delta.len() as u32);
            for (id, dc) in &b.delta {
                w.u32(id.0);
                w.g0(dc);
            }
        });
        w.section(|w| {
            w.u32(b.leaves.len() as u32);
            for (id, leaf) in &b.leaves {
                w.u32(id.0);
                w.g0(&leaf.c_hat);
                w.g0(&leaf.c_hat_prime);
            }
        });
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(DecodeError::BadMagic);
        }
        match r.u8()? {
            VERSION => {}
            v => return Err(DecodeError::UnsupportedVersion(v)),
        }
        match r.u8()? {
            SUITE_ID => {}
            s => return Err(DecodeError::UnknownSuite(s)),
        }
        let message = MessageId(r.take(16)?.try_into().unwrap());
        let index = r.u32()?;
        let block_count = r.u32()?;
        let flags = r.u8()?;
        if index == 0 || index > block_count {
            return Err(DecodeError::Malformed("block index out of range"));
        }
        if flags & !(FLAG_COMMITMENT | FLAG_SENTINEL_SEC) != 0 {
            return Err(DecodeError::Malformed("unknown flag bits"));
        }
        if (flags & FLAG_COMMITMENT != 0) != (index == 1) {
            return Err(DecodeError::Malformed("commitment flag must be set on block 1 only"));
        }
        if (flags & FLAG_SENTINEL_SEC != 0) != (index == block_count) {
            return Err(DecodeError::Malformed("sentinel flag must be set on the last block only"));
        }

        let mut s = r.section()?;
        let header = BlockHeader {
            message_len: s.u64()?,
            block_len: s.u32()?,
        };
        s.finish()?;

        let mut s = r.section()?;
        let level = read_descriptor(&mut s)?;
        s.finish()?;
        if level.level != index {
            return Err(DecodeError::Malformed("descriptor level differs from block index"));
        }

        let s = r.section()?;
        let c_tilde = s.rest().to_vec();

        let mut s = r.section()?;
        let c = s.g0()?;
        s.finish()?;

        let commitment = if flags & FLAG_COMMITMENT != 0 {
            let mut s = r.section()?;
            let v = s.g0()?;
            s.finish()?;
            Some(v)
        } else {
            None
        };

        let mut s = r.section()?;
        let mut delta = BTreeMap::new();
        for _ in 0..s.u32()? {
            let id = NodeId(s.u32()?);
            if delta.insert(id, s.g0()?).is_some() {
                return Err(DecodeError::Malformed("duplicate delta entry"));
            }
        }
        s.finish()?;

        let mut s = r.section()?;
        let mut leaves = BTreeMap::new();
        for _ in 0..s.u32()? {
            let id = NodeId(s.u32()?);
            let leaf = LeafComponent {
                c_hat: s.g0()?,
                c_hat_prime: s.g0()?,
            };
            if leaves.insert(id, leaf).is_some() {
                return Err(DecodeError::Malformed("duplicate leaf entry"));
            }
        }
        s.finish()?;
        r.finish()?;

        let ctb = WireCtb {
            message,
            block: CiphertextBlock {
                index,
                block_count,
                header,
                level,
                c_tilde,
                c,
                delta,
                leaves,
                commitment,
            },
        };
        // unsorted maps and non-minimal element encodings re-encode differently
        if ctb.to_bytes() != bytes {
            return Err(DecodeError::NonCanonical);
        }
        Ok(ctb)
    }
}

fn write_descriptor(w: &mut Writer, slice: &LevelSlice) {
    w.u32(slice.level);
    w.u32(slice.entries.len() as u32);
    for e in &slice.entries {
        w.u32(e.id.0);
        w.u32(e.parent.map_or(NO_PARENT, |p| p.0));
        w.u32(e.index);
        match &e.kind {
            EntryKind::Leaf { attribute } => {
                w.u8(0);
                w.u16(attribute.len() as u16);
                w.bytes(attribute.as_bytes());
            }
            EntryKind::Gate { threshold, children } => {
                w.u8(1);
                w.u32(*threshold);
                w.u32(children.len() as u32);
                for c in children {
                    w.u32(c.0);
                }
            }
        }
    }
}

fn read_descriptor(r: &mut Reader<'_>) -> Result<LevelSlice, DecodeError> {
    let level = r.u32()?;
    let count = r.u32()?;
    let mut entries = Vec::new();
    for _ in 0..count {
        let id = NodeId(r.u32()?);
        let parent = match r.u32()? {
            NO_PARENT => None,
            p => Some(NodeId(p)),
        };
        let index = r.u32()?;
        let kind = match r.u8()? {
            0 => {
                let len = r.u16()? as usize;
                let attribute = std::str::from_utf8(r.take(len)?)
                    .map_err(|_| DecodeError::Malformed("attribute is not UTF-8"))?;
                EntryKind::Leaf {
                    attribute: attribute.to_owned(),
                }
            }
            1 => {
                let threshold = r.u32()?;
                let n = r.u32()?;
                if threshold == 0 || threshold > n {
                    return Err(DecodeError::Malformed("gate threshold out of range"));
                }
                let children = (0..n).map(|_| r.u32().map(NodeId)).collect::<Result<_, _>>()?;
                EntryKind::Gate { threshold, children }
            }
            _ => return Err(DecodeError::Malformed("unknown descriptor entry kind")),
        };
        entries.push(DescriptorEntry {
            id,
            parent,
            index,
            kind,
        });
    }
    Ok(LevelSlice { level, entries })
}
