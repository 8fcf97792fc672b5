#![allow(dead_code)]

use std::path::PathBuf;

use lcws::wire::{MessageId, WireCtb};
use lcws_core::policy::{parse_policy, AccessTree};
use lcws_core::scheme::{encrypt_message, setup, EncryptionContext, MasterKey, PublicKey};
use lcws_core::synth::random_expr;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub const GOLDEN_SEED: u64 = 0x6c63_7773;
pub const GOLDEN_POLICY: &str = "(x AND (2 of (b, c, d)) AND (e OR f))";

pub fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_ctbs.bin")
}

/// Serialized CTBs of a fixed message under [`GOLDEN_POLICY`], everything
/// drawn from one seeded stream.
pub fn golden_ctbs() -> Vec<Vec<u8>> {
    let mut rng = ChaCha20Rng::seed_from_u64(GOLDEN_SEED);
    let (pk, mk) = setup(&mut rng);
    let ctx = EncryptionContext::from_master(&mk);
    let tree = parse_policy(GOLDEN_POLICY).unwrap();
    let mut message = vec![0u8; 333];
    rng.fill_bytes(&mut message);
    let id = MessageId::random(&mut rng);
    encrypt_message(&pk, &ctx, &tree, &message, &mut rng)
        .unwrap()
        .into_iter()
        .map(|block| WireCtb { message: id, block }.to_bytes())
        .collect()
}

/// `count u32, (len u32, bytes)*`, all big-endian.
pub fn golden_file(ctbs: &[Vec<u8>]) -> Vec<u8> {
    let mut out = (ctbs.len() as u32).to_be_bytes().to_vec();
    for c in ctbs {
        out.extend_from_slice(&(c.len() as u32).to_be_bytes());
        out.extend_from_slice(c);
    }
    out
}

pub struct Keys {
    pub pk: PublicKey,
    pub mk: MasterKey,
    pub ctx: EncryptionContext,
}

pub fn keys(seed: u64) -> Keys {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (pk, mk) = setup(&mut rng);
    let ctx = EncryptionContext::from_master(&mk);
    Keys { pk, mk, ctx }
}

/// Random policies and messages encrypted under `keys`.
pub fn corpus(keys: &Keys, count: usize, seed: u64) -> Vec<(AccessTree, Vec<u8>, Vec<WireCtb>)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let expr = random_expr(&mut rng, 4, 10, 8);
            let tree = AccessTree::from_expr(&expr).unwrap();
            let mut message = vec![0u8; rng.gen_range(1..2048)];
            rng.fill_bytes(&mut message);
            let id = MessageId::random(&mut rng);
            let ctbs = encrypt_message(&keys.pk, &keys.ctx, &tree, &message, &mut rng)
                .unwrap()
                .into_iter()
                .map(|block| WireCtb { message: id, block })
                .collect();
            (tree, message, ctbs)
        })
        .collect()
}
