use alloc::borrow::Cow;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand_core::{CryptoRng, RngCore};

use super::message::{partition_message, segment_len, BlockHeader, DataBlock};
use super::verify::data_verification;
use super::{EncryptionContext, PublicKey, SchemeError};
use crate::algebra::{apply_mask, hash_to_g0, G0Element, HashDomain, Scalar, G0_LEN};
use crate::policy::{partition_levels, AccessTree, EntryKind, LevelPartition, LevelSlice, NodeId, Polynomial};

/// Leaf components `Ĉ = g^{q_y(0)}`, `Ĉ' = H_att(att(y))^{q_y(0)}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafComponent {
    pub c_hat: G0Element,
    pub c_hat_prime: G0Element,
}

/// Ciphertext for one level of the access tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CiphertextBlock {
    pub index: u32,
    pub block_count: u32,
    pub header: BlockHeader,
    pub level: LevelSlice,
    /// `(DB_i ∥ Sec_{i+1}) ⊕ KDF(e(g,g)^{α s_i})`
    pub c_tilde: Vec<u8>,
    /// `h^{s_i}`
    pub c: G0Element,
    /// `ΔC_{i,j} = g^{(s_i − q_j(0))/q}` for every gate `j` on this level; empty for block 1.
    pub delta: BTreeMap<NodeId, G0Element>,
    pub leaves: BTreeMap<NodeId, LeafComponent>,
    /// `Č = H_v(M)^k`, block 1 only.
    pub commitment: Option<G0Element>,
}

impl CiphertextBlock {
    pub fn is_last(&self) -> bool {
        self.index == self.block_count
    }
}

/// `H_att` of every attribute of a policy, reusable across messages
/// encrypted under it.
#[derive(Debug, Clone, Default)]
pub struct AttributePoints(BTreeMap<String, G0Element>);

impl AttributePoints {
    pub fn for_tree(tree: &AccessTree) -> Self {
        AttributePoints(
            tree.nodes()
                .iter()
                .filter_map(|n| n.attribute())
                .map(|a| (String::from(a), hash_to_g0(HashDomain::Attribute, a.as_bytes())))
                .collect(),
        )
    }

    /// The cached point, or a fresh hash for an attribute not in the cache.
    pub fn point(&self, attribute: &str) -> G0Element {
        match self.0.get(attribute) {
            Some(p) => *p,
            None => hash_to_g0(HashDomain::Attribute, attribute.as_bytes()),
        }
    }
}

/// Data-owner state carried from one level to the next: the level secrets
/// sampled so far and every node share produced by gate polynomials.
#[derive(Debug, Clone)]
pub struct EncryptionState {
    q_inv: Scalar,
    block_count: u32,
    next_level: u32,
    header: BlockHeader,
    commitment: G0Element,
    level_secrets: Vec<Scalar>,
    shares: BTreeMap<NodeId, Scalar>,
}

impl EncryptionState {
    pub fn new<R: RngCore + CryptoRng + ?Sized>(
        ctx: &EncryptionContext,
        header: BlockHeader,
        commitment: G0Element,
        block_count: u32,
        rng: &mut R,
    ) -> Result<Self, SchemeError> {
        if block_count == 0 {
            return Err(SchemeError::ZeroBlocks);
        }
        Ok(EncryptionState {
            q_inv: ctx.q.invert().expect("q is nonzero"),
            block_count,
            next_level: 1,
            header,
            commitment,
            level_secrets: alloc::vec![Scalar::random_nonzero(rng)],
            shares: BTreeMap::new(),
        })
    }

    pub fn next_level(&self) -> u32 {
        self.next_level
    }

    /// `s_i` for a level already sampled.
    pub fn level_secret(&self, level: u32) -> Option<Scalar> {
        self.level_secrets.get(level.checked_sub(1)? as usize).copied()
    }

    /// `q_x(0)` for node `x`, once its parent level has been encrypted.
    pub fn share(&self, node: NodeId) -> Option<Scalar> {
        self.shares.get(&node).copied()
    }
}

/// Encrypts `db` under one level slice and advances `state` to the next level.
pub fn encrypt_block<R: RngCore + CryptoRng + ?Sized>(
    db: &DataBlock,
    slice: &LevelSlice,
    pk: &PublicKey,
    points: &AttributePoints,
    state: &mut EncryptionState,
    rng: &mut R,
) -> Result<CiphertextBlock, SchemeError> {
    let i = state.next_level;
    if db.index != i || slice.level != i {
        return Err(SchemeError::OutOfOrder {
            expected: i,
            found: if db.index != i { db.index } else { slice.level },
        });
    }
    if db.payload.len() != state.header.block_len as usize {
        return Err(SchemeError::Framing {
            expected: state.header.block_len as usize,
            found: db.payload.len(),
        });
    }
    let s_i = state.level_secrets[i as usize - 1];

    let sec_next = if i < state.block_count {
        let s_next = Scalar::random_nonzero(rng);
        state.level_secrets.push(s_next);
        pk.g.pow(&(s_next * state.q_inv))
    } else {
        G0Element::identity()
    };

    if i == 1 {
        for root in slice.entries.iter().filter(|e| e.parent.is_none()) {
            state.shares.insert(root.id, s_i);
        }
    }

    let mut delta = BTreeMap::new();
    for gate in slice.gates() {
        let EntryKind::Gate { threshold, children } = &gate.kind else {
            unreachable!()
        };
        let share = state.share(gate.id).ok_or(SchemeError::MissingShare(gate.id))?;
        let poly = Polynomial::random(share, *threshold as usize - 1, rng);
        for (pos, child) in children.iter().enumerate() {
            state
                .shares
                .insert(*child, poly.eval(&Scalar::from(pos as u64 + 1)));
        }
        if i >= 2 {
            delta.insert(gate.id, pk.g.pow(&((s_i - share) * state.q_inv)));
        }
    }

    let mut leaves = BTreeMap::new();
    for leaf in slice.leaves() {
        let EntryKind::Leaf { attribute } = &leaf.kind else {
            unreachable!()
        };
        let share = state.share(leaf.id).ok_or(SchemeError::MissingShare(leaf.id))?;
        leaves.insert(
            leaf.id,
            LeafComponent {
                c_hat: pk.g.pow(&share),
                c_hat_prime: points.point(attribute).pow(&share),
            },
        );
    }

    let mut c_tilde = Vec::with_capacity(db.payload.len() + G0_LEN);
    c_tilde.extend_from_slice(&db.payload);
    c_tilde.extend_from_slice(&sec_next.to_bytes());
    apply_mask(&pk.egg_alpha.pow(&s_i), &mut c_tilde);

    state.next_level += 1;
    Ok(CiphertextBlock {
        index: i,
        block_count: state.block_count,
        header: state.header,
        level: slice.clone(),
        c_tilde,
        c: pk.h.pow(&s_i),
        delta,
        leaves,
        commitment: (i == 1).then_some(state.commitment),
    })
}

/// Drives [`encrypt_block`] over a whole message, one level at a time.
pub struct Encryptor<'a> {
    pk: &'a PublicKey,
    points: Cow<'a, AttributePoints>,
    partition: LevelPartition,
    blocks: Vec<DataBlock>,
    state: EncryptionState,
}

impl<'a> Encryptor<'a> {
    /// Computes the commitment, partitions the message by tree depth and
    /// samples `s_1`.
    pub fn new<R: RngCore + CryptoRng + ?Sized>(
        pk: &'a PublicKey,
        ctx: &EncryptionContext,
        tree: &AccessTree,
        message: &[u8],
        rng: &mut R,
    ) -> Result<Self, SchemeError> {
        Self::build(pk, ctx, tree, Cow::Owned(AttributePoints::default()), message, rng)
    }

    /// As [`Encryptor::new`], with attribute points hashed ahead of time.
    pub fn with_points<R: RngCore + CryptoRng + ?Sized>(
        pk: &'a PublicKey,
        ctx: &EncryptionContext,
        tree: &AccessTree,
        points: &'a AttributePoints,
        message: &[u8],
        rng: &mut R,
    ) -> Result<Self, SchemeError> {
        Self::build(pk, ctx, tree, Cow::Borrowed(points), message, rng)
    }

    fn build<R: RngCore + CryptoRng + ?Sized>(
        pk: &'a PublicKey,
        ctx: &EncryptionContext,
        tree: &AccessTree,
        points: Cow<'a, AttributePoints>,
        message: &[u8],
        rng: &mut R,
    ) -> Result<Self, SchemeError> {
        let partition = partition_levels(tree);
        let n = partition.len() as u32;
        let blocks = partition_message(message, n)?;
        let header = BlockHeader {
            message_len: message.len() as u64,
            block_len: segment_len(message.len(), n) as u32,
        };
        let commitment = data_verification(message, ctx);
        let state = EncryptionState::new(ctx, header, commitment, n, rng)?;
        Ok(Encryptor {
            pk,
            points,
            partition,
            blocks,
            state,
        })
    }

    pub fn block_count(&self) -> u32 {
        self.partition.len() as u32
    }

    pub fn state(&self) -> &EncryptionState {
        &self.state
    }

    /// Encrypts the next level, or `None` once every block is done.
    pub fn encrypt_next<R: RngCore + CryptoRng + ?Sized>(
        &mut self,
        rng: &mut R,
    ) -> Option<Result<CiphertextBlock, SchemeError>> {
        let i = self.state.next_level as usize;
        if i > self.blocks.len() {
            return None;
        }
        let db = core::mem::replace(
            &mut self.blocks[i - 1],
            DataBlock {
                index: i as u32,
                payload: Vec::new(),
            },
        );
        Some(encrypt_block(
            &db,
            &self.partition.levels[i - 1],
            self.pk,
            &self.points,
            &mut self.state,
            rng,
        ))
    }
}

pub fn encrypt_message<R: RngCore + CryptoRng + ?Sized>(
    pk: &PublicKey,
    ctx: &EncryptionContext,
    tree: &AccessTree,
    message: &[u8],
    rng: &mut R,
) -> Result<Vec<CiphertextBlock>, SchemeError> {
    let mut enc = Encryptor::new(pk, ctx, tree, message, rng)?;
    let mut out = Vec::with_capacity(enc.block_count() as usize);
    while let Some(ctb) = enc.encrypt_next(rng) {
        out.push(ctb?);
    }
    Ok(out)
}
