//! Level-partitioned CP-ABE: key setup, block encryption, three-stage
//! decryption and the pairing-based integrity check.

use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt;

use rand_core::{CryptoRng, RngCore};

use crate::algebra::{hash_to_g0, pair, AlgebraError, G0Element, GtElement, HashDomain, Scalar};
use crate::policy::{AttributeSet, NodeId};

mod decrypt;
mod encrypt;
mod message;
mod verify;

pub use decrypt::{
    assemble_message, decrypt_block, decrypt_interior, decrypt_leaf, mask_key, unlock_key, DecryptionState,
    OpenedVia, Unlock,
};
pub use encrypt::{encrypt_block, encrypt_message, AttributePoints, CiphertextBlock, EncryptionState, Encryptor, LeafComponent};
pub use message::{partition_message, segment_len, unchain, BlockHeader, DataBlock};
pub use verify::{data_verification, make_challenge, make_challenge_with, verify_message, VerificationTuple};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchemeError {
    EmptyAttributes,
    ZeroBlocks,
    /// Blocks must be encrypted strictly in level order.
    OutOfOrder { expected: u32, found: u32 },
    /// Encryption reached a node whose share was never produced.
    MissingShare(NodeId),
    NotALeaf(NodeId),
    MissingComponent(NodeId),
    /// The unlock does not apply to this block.
    WrongUnlock,
    /// Masked payload length disagrees with the header.
    Framing { expected: usize, found: usize },
    /// Block disagrees with the header or block count seen so far.
    HeaderMismatch,
    DuplicateBlock(u32),
    BlockIndex(u32),
    Algebra(AlgebraError),
}

impl fmt::Display for SchemeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeError::EmptyAttributes => write!(f, "attribute set is empty"),
            SchemeError::ZeroBlocks => write!(f, "block count must be at least 1"),
            SchemeError::OutOfOrder { expected, found } => {
                write!(f, "expected block {expected}, got block {found}")
            }
            SchemeError::MissingShare(id) => write!(f, "no pending share for node {id}"),
            SchemeError::NotALeaf(id) => write!(f, "node {id} is not a leaf of this block"),
            SchemeError::MissingComponent(id) => write!(f, "block has no component for node {id}"),
            SchemeError::WrongUnlock => write!(f, "unlock value does not apply to this block"),
            SchemeError::Framing { expected, found } => {
                write!(f, "masked payload is {found} bytes, expected {expected}")
            }
            SchemeError::HeaderMismatch => write!(f, "block header disagrees with earlier blocks"),
            SchemeError::DuplicateBlock(i) => write!(f, "block {i} received twice"),
            SchemeError::BlockIndex(i) => write!(f, "block index {i} out of range"),
            SchemeError::Algebra(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for SchemeError {}

impl From<AlgebraError> for SchemeError {
    fn from(e: AlgebraError) -> Self {
        SchemeError::Algebra(e)
    }
}

/// `PK = {g, h = g^β, e(g,g)^α}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    pub g: G0Element,
    pub h: G0Element,
    pub egg_alpha: GtElement,
}

/// `MK = {β, g^α, q, k}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MasterKey {
    pub beta: Scalar,
    pub g_alpha: G0Element,
    pub q: Scalar,
    pub k: Scalar,
}

/// The part of the master key a data owner needs: `q` for the level
/// unlock elements and `k` for the message commitment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptionContext {
    pub q: Scalar,
    pub k: Scalar,
}

impl EncryptionContext {
    pub fn from_master(mk: &MasterKey) -> Self {
        EncryptionContext { q: mk.q, k: mk.k }
    }
}

/// Key components for one attribute: `D_j = g^r H(j)^{r_j}`, `D'_j = g^{r_j}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeKey {
    pub d: G0Element,
    pub d_prime: G0Element,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey {
    /// `g^{(α+r)/β}`
    pub d: G0Element,
    /// `g^{rq}`
    pub d_hat: G0Element,
    pub components: BTreeMap<String, AttributeKey>,
}

impl SecretKey {
    pub fn attributes(&self) -> AttributeSet {
        AttributeSet::new(self.components.keys().cloned())
    }
}

/// Master exponents, for deterministic setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MasterExponents {
    pub alpha: Scalar,
    pub beta: Scalar,
    pub q: Scalar,
    pub k: Scalar,
}

impl MasterExponents {
    pub fn random<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Self {
        MasterExponents {
            alpha: Scalar::random_nonzero(rng),
            beta: Scalar::random_nonzero(rng),
            q: Scalar::random_nonzero(rng),
            k: Scalar::random_nonzero(rng),
        }
    }
}

pub fn setup<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> (PublicKey, MasterKey) {
    setup_from_exponents(&MasterExponents::random(rng))
}

/// Panics if `beta`, `q` or `k` is zero.
pub fn setup_from_exponents(x: &MasterExponents) -> (PublicKey, MasterKey) {
    assert!(
        !x.beta.is_zero() && !x.q.is_zero() && !x.k.is_zero(),
        "beta, q and k must be nonzero"
    );
    let g = G0Element::generator();
    let g_alpha = g.pow(&x.alpha);
    let egg_alpha = pair(&g, &g_alpha).expect("generator is mirrored");
    (
        PublicKey {
            g,
            h: g.pow(&x.beta),
            egg_alpha,
        },
        MasterKey {
            beta: x.beta,
            g_alpha,
            q: x.q,
            k: x.k,
        },
    )
}

/// Per-key randomness: `r` and one `r_j` per attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyRandomness {
    pub r: Scalar,
    pub per_attribute: BTreeMap<String, Scalar>,
}

impl KeyRandomness {
    pub fn random<R: RngCore + CryptoRng + ?Sized>(attrs: &AttributeSet, rng: &mut R) -> Self {
        KeyRandomness {
            r: Scalar::random(rng),
            per_attribute: attrs
                .iter()
                .map(|a| (String::from(a), Scalar::random(rng)))
                .collect(),
        }
    }
}

pub fn keygen<R: RngCore + CryptoRng + ?Sized>(
    pk: &PublicKey,
    mk: &MasterKey,
    attrs: &AttributeSet,
    rng: &mut R,
) -> Result<SecretKey, SchemeError> {
    let randomness = KeyRandomness::random(attrs, rng);
    keygen_with_randomness(pk, mk, attrs, &randomness)
}

/// Key generation with caller-chosen randomness. Attributes missing from
/// `randomness.per_attribute` get `r_j = 0`.
pub fn keygen_with_randomness(
    pk: &PublicKey,
    mk: &MasterKey,
    attrs: &AttributeSet,
    randomness: &KeyRandomness,
) -> Result<SecretKey, SchemeError> {
    if attrs.is_empty() {
        return Err(SchemeError::EmptyAttributes);
    }
    let r = randomness.r;
    let g_r = pk.g.pow(&r);
    let beta_inv = mk.beta.invert().expect("beta is nonzero");
    let d = (mk.g_alpha * g_r).pow(&beta_inv);
    let d_hat = pk.g.pow(&(r * mk.q));
    let components = attrs
        .iter()
        .map(|attr| {
            let r_j = randomness
                .per_attribute
                .get(attr)
                .copied()
                .unwrap_or(Scalar::ZERO);
            let key = AttributeKey {
                d: g_r * hash_to_g0(HashDomain::Attribute, attr.as_bytes()).pow(&r_j),
                d_prime: pk.g.pow(&r_j),
            };
            (String::from(attr), key)
        })
        .collect();
    Ok(SecretKey { d, d_hat, components })
}
