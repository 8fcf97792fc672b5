use alloc::vec::Vec;

use super::SchemeError;

/// One XOR-chained plaintext block: `DB_1 = M_1`, `DB_i = M_{i-1} ⊕ M_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataBlock {
    pub index: u32,
    pub payload: Vec<u8>,
}

/// Plaintext framing carried by every ciphertext block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockHeader {
    /// True plaintext length; the last segment is zero-padded up to `block_len`.
    pub message_len: u64,
    pub block_len: u32,
}

/// Segment length for an `len`-byte message split into `n` blocks.
pub fn segment_len(len: usize, n: u32) -> usize {
    len.div_ceil(n as usize)
}

pub fn partition_message(message: &[u8], n: u32) -> Result<Vec<DataBlock>, SchemeError> {
    if n == 0 {
        return Err(SchemeError::ZeroBlocks);
    }
    let seg = segment_len(message.len(), n);
    let segment = |i: usize| -> Vec<u8> {
        let start = (i * seg).min(message.len());
        let end = ((i + 1) * seg).min(message.len());
        let mut out = Vec::with_capacity(seg);
        out.extend_from_slice(&message[start..end]);
        out.resize(seg, 0);
        out
    };
    let mut blocks = Vec::with_capacity(n as usize);
    let mut prev: Option<Vec<u8>> = None;
    for i in 0..n as usize {
        let cur = segment(i);
        let payload = match &prev {
            None => cur.clone(),
            Some(p) => p.iter().zip(&cur).map(|(a, b)| a ^ b).collect(),
        };
        blocks.push(DataBlock {
            index: i as u32 + 1,
            payload,
        });
        prev = Some(cur);
    }
    Ok(blocks)
}

/// Inverse of [`partition_message`]: `M_1 = DB_1`, `M_i = DB_i ⊕ M_{i-1}`,
/// concatenated and truncated to `message_len`.
pub fn unchain(blocks: &[DataBlock], message_len: usize) -> Vec<u8> {
    let total: usize = blocks.iter().map(|b| b.payload.len()).sum();
    let mut out = Vec::with_capacity(total);
    let mut prev: Vec<u8> = Vec::new();
    for (i, b) in blocks.iter().enumerate() {
        let cur: Vec<u8> = if i == 0 {
            b.payload.clone()
        } else {
            b.payload.iter().zip(&prev).map(|(a, p)| a ^ p).collect()
        };
        out.extend_from_slice(&cur);
        prev = cur;
    }
    out.truncate(message_len);
    out
}
