use rand_core::{CryptoRng, RngCore};

use super::{EncryptionContext, MasterKey, PublicKey};
use crate::algebra::{hash_to_g0, pair, G0Element, HashDomain, Scalar};

/// Challenge issued by the authority: `V_1 = H_v(M)^t`, `V_2 = g^t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerificationTuple {
    pub v1: G0Element,
    pub v2: G0Element,
}

/// Commitment `Č = H_v(M)^k` placed in the first ciphertext block.
pub fn data_verification(message: &[u8], ctx: &EncryptionContext) -> G0Element {
    hash_to_g0(HashDomain::Message, message).pow(&ctx.k)
}

pub fn make_challenge<R: RngCore + CryptoRng + ?Sized>(
    commitment: &G0Element,
    mk: &MasterKey,
    rng: &mut R,
) -> VerificationTuple {
    make_challenge_with(commitment, mk, &Scalar::random_nonzero(rng))
}

/// `(Č^{t/k}, g^t)` for a caller-chosen `t`.
pub fn make_challenge_with(commitment: &G0Element, mk: &MasterKey, t: &Scalar) -> VerificationTuple {
    let k_inv = mk.k.invert().expect("k is nonzero");
    VerificationTuple {
        v1: commitment.pow(&(*t * k_inv)),
        v2: G0Element::generator().pow(t),
    }
}

/// Checks `e(H_v(M), V_2) = e(V_1, g)`.
pub fn verify_message(message: &[u8], v: &VerificationTuple, pk: &PublicKey) -> bool {
    let hm = hash_to_g0(HashDomain::Message, message);
    match (pair(&hm, &v.v2), pair(&v.v1, &pk.g)) {
        (Ok(lhs), Ok(rhs)) => lhs == rhs,
        _ => false,
    }
}
