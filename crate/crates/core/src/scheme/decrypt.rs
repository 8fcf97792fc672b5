use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::encrypt::CiphertextBlock;
use super::message::{unchain, BlockHeader, DataBlock};
use super::{SchemeError, SecretKey};
use crate::algebra::{apply_mask, pair, pair_ratio, G0Element, GtElement, Scalar, G0_LEN};
use crate::policy::{lagrange_coeff, DescriptorEntry, EntryKind, NodeId};

/// `F_z = e(D_j, Ĉ_z) / e(D'_j, Ĉ'_z) = e(g,g)^{r q_z(0)}`, or `None` when
/// the key lacks `att(z)`.
pub fn decrypt_leaf(ctb: &CiphertextBlock, sk: &SecretKey, z: NodeId) -> Result<Option<GtElement>, SchemeError> {
    let attribute = match ctb.level.entry(z).map(|e| &e.kind) {
        Some(EntryKind::Leaf { attribute }) => attribute,
        _ => return Err(SchemeError::NotALeaf(z)),
    };
    let comp = ctb.leaves.get(&z).ok_or(SchemeError::MissingComponent(z))?;
    let Some(key) = sk.components.get(attribute) else {
        return Ok(None);
    };
    Ok(Some(pair_ratio(&key.d, &comp.c_hat, &key.d_prime, &comp.c_hat_prime)?))
}

/// Lagrange combination of child values keyed by sibling index. Uses the
/// `threshold` smallest indices; `None` if fewer are available.
pub fn decrypt_interior(children: &BTreeMap<u32, GtElement>, threshold: usize) -> Option<GtElement> {
    if threshold == 0 || children.len() < threshold {
        return None;
    }
    let chosen: Vec<(u32, &GtElement)> = children.iter().take(threshold).map(|(i, v)| (*i, v)).collect();
    let set: Vec<u32> = chosen.iter().map(|(i, _)| *i).collect();
    let mut acc = GtElement::identity();
    for (i, value) in chosen {
        let coeff = lagrange_coeff(i, &set, &Scalar::ZERO).ok()?;
        acc = acc * value.pow(&coeff);
    }
    Some(acc)
}

/// What lets a block be opened.
#[derive(Debug, Clone, Copy)]
pub enum Unlock<'a> {
    /// `F_R` for the root; block 1 only.
    Root(&'a GtElement),
    /// `F_x` for a gate on this block's level, combined with its `ΔC`.
    Gate { node: NodeId, value: &'a GtElement },
    /// `Sec_i = g^{s_i/q}` recovered from the previous block.
    Sec(&'a G0Element),
}

/// `A = e(g,g)^{r s_i}` from an unlock.
pub fn unlock_key(ctb: &CiphertextBlock, sk: &SecretKey, unlock: Unlock<'_>) -> Result<GtElement, SchemeError> {
    match unlock {
        Unlock::Root(f) => {
            if ctb.index != 1 {
                return Err(SchemeError::WrongUnlock);
            }
            Ok(*f)
        }
        Unlock::Gate { node, value } => {
            let dc = ctb.delta.get(&node).ok_or(SchemeError::WrongUnlock)?;
            Ok(*value * pair(dc, &sk.d_hat)?)
        }
        Unlock::Sec(sec) => Ok(pair(sec, &sk.d_hat)?),
    }
}

/// `e(C_i, D) / A = e(g,g)^{α s_i}`.
pub fn mask_key(ctb: &CiphertextBlock, sk: &SecretKey, a: &GtElement) -> Result<GtElement, SchemeError> {
    Ok(pair(&ctb.c, &sk.d)?.div(a))
}

/// Strips the mask and splits `DB_i ∥ Sec_{i+1}`. The trailing unlock is
/// `None` for the last block, whose slot holds the identity sentinel.
pub fn decrypt_block(
    ctb: &CiphertextBlock,
    sk: &SecretKey,
    unlock: Unlock<'_>,
) -> Result<(DataBlock, Option<G0Element>), SchemeError> {
    let expected = ctb.header.block_len as usize + G0_LEN;
    if ctb.c_tilde.len() != expected {
        return Err(SchemeError::Framing {
            expected,
            found: ctb.c_tilde.len(),
        });
    }
    let a = unlock_key(ctb, sk, unlock)?;
    let key = mask_key(ctb, sk, &a)?;
    let mut plain = ctb.c_tilde.clone();
    apply_mask(&key, &mut plain);
    let sec_bytes = plain.split_off(ctb.header.block_len as usize);
    let sec = if ctb.is_last() {
        None
    } else {
        Some(G0Element::from_bytes(&sec_bytes)?)
    };
    Ok((
        DataBlock {
            index: ctb.index,
            payload: plain,
        },
        sec,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpenedVia {
    Root,
    Gate(NodeId),
    Sec,
}

#[derive(Debug, Clone)]
struct KnownNode {
    entry: DescriptorEntry,
    level: u32,
}

/// Receiver-side state: unopened blocks, recovered data blocks, recovered
/// level unlocks and every node value computed so far.
///
/// Blocks may arrive in any order. Each arrival evaluates the leaves it
/// carries, re-evaluates gates bottom-up, then opens whatever blocks have
/// become openable, following `Sec` links as they appear.
pub struct DecryptionState<'k> {
    sk: &'k SecretKey,
    frame: Option<(u32, BlockHeader)>,
    pending: BTreeMap<u32, CiphertextBlock>,
    opened: BTreeMap<u32, (DataBlock, OpenedVia)>,
    secs: BTreeMap<u32, G0Element>,
    nodes: BTreeMap<NodeId, KnownNode>,
    values: BTreeMap<NodeId, GtElement>,
    root: Option<NodeId>,
}

impl<'k> DecryptionState<'k> {
    pub fn new(sk: &'k SecretKey) -> Self {
        DecryptionState {
            sk,
            frame: None,
            pending: BTreeMap::new(),
            opened: BTreeMap::new(),
            secs: BTreeMap::new(),
            nodes: BTreeMap::new(),
            values: BTreeMap::new(),
            root: None,
        }
    }

    pub fn block_count(&self) -> Option<u32> {
        self.frame.map(|(n, _)| n)
    }

    pub fn header(&self) -> Option<BlockHeader> {
        self.frame.map(|(_, h)| h)
    }

    pub fn node_value(&self, id: NodeId) -> Option<&GtElement> {
        self.values.get(&id)
    }

    pub fn data_block(&self, index: u32) -> Option<&DataBlock> {
        self.opened.get(&index).map(|(db, _)| db)
    }

    pub fn opened_via(&self, index: u32) -> Option<OpenedVia> {
        self.opened.get(&index).map(|(_, via)| *via)
    }

    /// `Sec_i` once recovered from block `i - 1`.
    pub fn sec(&self, index: u32) -> Option<&G0Element> {
        self.secs.get(&index)
    }

    pub fn unopened(&self) -> impl Iterator<Item = u32> + '_ {
        self.pending.keys().copied()
    }

    pub fn receive(&mut self, ctb: CiphertextBlock) -> Result<(), SchemeError> {
        match self.frame {
            None => {
                if ctb.block_count == 0 {
                    return Err(SchemeError::ZeroBlocks);
                }
                self.frame = Some((ctb.block_count, ctb.header));
            }
            Some((n, h)) => {
                if n != ctb.block_count || h != ctb.header {
                    return Err(SchemeError::HeaderMismatch);
                }
            }
        }
        if ctb.index == 0 || ctb.index > ctb.block_count || ctb.level.level != ctb.index {
            return Err(SchemeError::BlockIndex(ctb.index));
        }
        if self.pending.contains_key(&ctb.index) || self.opened.contains_key(&ctb.index) {
            return Err(SchemeError::DuplicateBlock(ctb.index));
        }

        for entry in &ctb.level.entries {
            if ctb.index == 1 && entry.parent.is_none() {
                self.root = Some(entry.id);
            }
            self.nodes.insert(
                entry.id,
                KnownNode {
                    entry: entry.clone(),
                    level: ctb.index,
                },
            );
        }
        for leaf in ctb.level.leaves() {
            if let Some(f) = decrypt_leaf(&ctb, self.sk, leaf.id)? {
                self.values.insert(leaf.id, f);
            }
        }
        self.evaluate_gates();
        self.pending.insert(ctb.index, ctb);
        self.open_ready()
    }

    fn evaluate_gates(&mut self) {
        let mut gates: Vec<(u32, NodeId)> = self
            .nodes
            .values()
            .filter(|n| matches!(n.entry.kind, EntryKind::Gate { .. }) && !self.values.contains_key(&n.entry.id))
            .map(|n| (n.level, n.entry.id))
            .collect();
        // deepest first so children are settled before their parents
        gates.sort_by(|a, b| b.cmp(a));
        for (_, id) in gates {
            let EntryKind::Gate { threshold, children } = &self.nodes[&id].entry.kind else {
                continue;
            };
            let available: BTreeMap<u32, GtElement> = children
                .iter()
                .enumerate()
                .filter_map(|(pos, c)| self.values.get(c).map(|v| (pos as u32 + 1, *v)))
                .collect();
            if let Some(f) = decrypt_interior(&available, *threshold as usize) {
                self.values.insert(id, f);
            }
        }
    }

    fn open_ready(&mut self) -> Result<(), SchemeError> {
        loop {
            let mut progress = false;
            let indices: Vec<u32> = self.pending.keys().copied().collect();
            for i in indices {
                let ctb = &self.pending[&i];
                let root_value = self.root.and_then(|r| self.values.get(&r));
                let gate = ctb
                    .level
                    .gates()
                    .find(|g| ctb.delta.contains_key(&g.id) && self.values.contains_key(&g.id))
                    .map(|g| g.id);
                let (unlock, via) = if let (1, Some(f)) = (i, root_value) {
                    (Unlock::Root(f), OpenedVia::Root)
                } else if let Some(node) = gate {
                    (
                        Unlock::Gate {
                            node,
                            value: &self.values[&node],
                        },
                        OpenedVia::Gate(node),
                    )
                } else if let Some(sec) = self.secs.get(&i) {
                    (Unlock::Sec(sec), OpenedVia::Sec)
                } else {
                    continue;
                };
                let (db, sec_next) = decrypt_block(ctb, self.sk, unlock)?;
                if let Some(sec) = sec_next {
                    self.secs.insert(i + 1, sec);
                }
                self.opened.insert(i, (db, via));
                self.pending.remove(&i);
                progress = true;
            }
            if !progress {
                return Ok(());
            }
        }
    }

    /// Opens what remains through the `Sec` chain and reassembles `M`.
    /// `None` unless `DB_1` and every other block were recovered.
    pub fn assemble(&mut self) -> Option<Vec<u8>> {
        self.open_ready().ok()?;
        let (n, header) = self.frame?;
        if !self.opened.contains_key(&1) {
            return None;
        }
        let blocks: Option<Vec<DataBlock>> = (1..=n).map(|i| self.data_block(i).cloned()).collect();
        Some(unchain(&blocks?, header.message_len as usize))
    }
}

pub fn assemble_message(state: &mut DecryptionState<'_>) -> Option<Vec<u8>> {
    state.assemble()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{GtElement, Scalar};
    use crate::policy::{parse_policy, AttributeSet};
    use crate::scheme::{
        encrypt_message, keygen, keygen_with_randomness, setup, setup_from_exponents, EncryptionContext,
        KeyRandomness, MasterExponents,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn egg() -> GtElement {
        GtElement::generator()
    }

    #[test]
    fn interior_singleton_and_threshold() {
        let f = egg().pow(&Scalar::from(9));
        let one: BTreeMap<u32, GtElement> = [(1, f)].into_iter().collect();
        assert_eq!(decrypt_interior(&one, 1), Some(f));
        // q_x(x) = 5 + 2x, r = 3: children hold e^{3·7}, e^{3·9}
        let r = Scalar::from(3);
        let kids: BTreeMap<u32, GtElement> = [
            (1, egg().pow(&(r * Scalar::from(7)))),
            (2, egg().pow(&(r * Scalar::from(9)))),
        ]
        .into_iter()
        .collect();
        assert_eq!(decrypt_interior(&kids, 2), Some(egg().pow(&Scalar::from(15))));
        assert_eq!(decrypt_interior(&kids, 3), None);
        assert_eq!(decrypt_interior(&BTreeMap::new(), 1), None);
    }

    #[test]
    fn interior_any_subset_interpolates_same_value() {
        // q(x) = 4 + x + 2x^2, threshold 3 over 5 children
        let q = |x: u64| Scalar::from(4 + x + 2 * x * x);
        let all: BTreeMap<u32, GtElement> = (1..=5).map(|i| (i as u32, egg().pow(&q(i)))).collect();
        let expected = egg().pow(&Scalar::from(4));
        for skip in [[1u32, 2], [2, 4], [3, 5], [1, 5]] {
            let sub: BTreeMap<u32, GtElement> =
                all.iter().filter(|(i, _)| !skip.contains(i)).map(|(i, v)| (*i, *v)).collect();
            assert_eq!(decrypt_interior(&sub, 3), Some(expected));
        }
    }

    #[test]
    fn leaf_value_independent_of_rj_and_absent_attribute() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let (pk, mk) = setup(&mut rng);
        let ctx = EncryptionContext::from_master(&mk);
        let tree = parse_policy("(a AND b)").unwrap();
        let ctbs = encrypt_message(&pk, &ctx, &tree, b"xy", &mut rng).unwrap();
        let attrs = AttributeSet::new(["a"]);
        let with = |rj: u64| KeyRandomness {
            r: Scalar::from(21),
            per_attribute: [("a".into(), Scalar::from(rj))].into_iter().collect(),
        };
        let k1 = keygen_with_randomness(&pk, &mk, &attrs, &with(1)).unwrap();
        let k2 = keygen_with_randomness(&pk, &mk, &attrs, &with(2)).unwrap();
        let leaf_a = NodeId(1);
        let f1 = decrypt_leaf(&ctbs[1], &k1, leaf_a).unwrap().unwrap();
        let f2 = decrypt_leaf(&ctbs[1], &k2, leaf_a).unwrap().unwrap();
        assert_eq!(f1, f2);
        assert_eq!(decrypt_leaf(&ctbs[1], &k1, NodeId(2)).unwrap(), None);
        assert_eq!(decrypt_leaf(&ctbs[1], &k1, NodeId(0)), Err(SchemeError::NotALeaf(NodeId(0))));
    }

    #[test]
    fn delta_path_with_fixture_scalars() {
        // s_i = 9, q_x(0) = 4: A = e^{4r} · e(g^{5/q}, g^{rq}) = e^{9r}
        let x = MasterExponents {
            alpha: Scalar::from(2),
            beta: Scalar::from(3),
            q: Scalar::from(5),
            k: Scalar::from(7),
        };
        let (pk, mk) = setup_from_exponents(&x);
        let r = Scalar::from(6);
        let sk = keygen_with_randomness(
            &pk,
            &mk,
            &AttributeSet::new(["a"]),
            &KeyRandomness {
                r,
                per_attribute: BTreeMap::new(),
            },
        )
        .unwrap();
        let g = G0Element::generator();
        let dc = g.pow(&(Scalar::from(5) * x.q.invert().unwrap()));
        let f = egg().pow(&(r * Scalar::from(4)));
        let a = f * pair(&dc, &sk.d_hat).unwrap();
        assert_eq!(a, egg().pow(&(r * Scalar::from(9))));
        // Sec path: e(g^{s/q}, g^{rq}) = e^{rs}
        let sec = g.pow(&(Scalar::from(9) * x.q.invert().unwrap()));
        assert_eq!(pair(&sec, &sk.d_hat).unwrap(), a);
    }

    #[test]
    fn round_trip_and_rejection() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let (pk, mk) = setup(&mut rng);
        let ctx = EncryptionContext::from_master(&mk);
        let tree = parse_policy("(a AND (2 of (b, c, d)))").unwrap();
        let msg: Vec<u8> = (0..1000u32).map(|i| (i % 251) as u8).collect();
        let ctbs = encrypt_message(&pk, &ctx, &tree, &msg, &mut rng).unwrap();

        let good = keygen(&pk, &mk, &AttributeSet::new(["a", "c", "d"]), &mut rng).unwrap();
        let mut st = DecryptionState::new(&good);
        for c in ctbs.iter().cloned() {
            st.receive(c).unwrap();
        }
        assert_eq!(st.opened_via(1), Some(OpenedVia::Root));
        assert_eq!(assemble_message(&mut st).unwrap(), msg);

        let bad = keygen(&pk, &mk, &AttributeSet::new(["b", "c", "d"]), &mut rng).unwrap();
        let mut st = DecryptionState::new(&bad);
        for c in ctbs.iter().cloned() {
            st.receive(c).unwrap();
        }
        assert_eq!(st.data_block(1), None);
        // the (2 of ...) gate on level 2 is satisfied, so DB_2 opens via ΔC
        assert_eq!(st.opened_via(2), Some(OpenedVia::Gate(NodeId(2))));
        assert_eq!(assemble_message(&mut st), None);
    }

    #[test]
    fn reverse_arrival_order_still_decrypts() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let (pk, mk) = setup(&mut rng);
        let ctx = EncryptionContext::from_master(&mk);
        let tree = parse_policy("(a OR (b AND (c OR d)))").unwrap();
        let msg = b"reverse order delivery";
        let ctbs = encrypt_message(&pk, &ctx, &tree, msg, &mut rng).unwrap();
        let sk = keygen(&pk, &mk, &AttributeSet::new(["b", "d"]), &mut rng).unwrap();
        let mut st = DecryptionState::new(&sk);
        for c in ctbs.into_iter().rev() {
            st.receive(c).unwrap();
        }
        assert_eq!(st.assemble().unwrap(), msg);
    }

    #[test]
    fn receive_rejects_inconsistent_blocks() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let (pk, mk) = setup(&mut rng);
        let ctx = EncryptionContext::from_master(&mk);
        let tree = parse_policy("(a AND b)").unwrap();
        let ctbs = encrypt_message(&pk, &ctx, &tree, b"abcd", &mut rng).unwrap();
        let other = encrypt_message(&pk, &ctx, &tree, b"abcdefgh", &mut rng).unwrap();
        let sk = keygen(&pk, &mk, &AttributeSet::new(["z"]), &mut rng).unwrap();
        let mut st = DecryptionState::new(&sk);
        st.receive(ctbs[0].clone()).unwrap();
        assert_eq!(st.receive(ctbs[0].clone()), Err(SchemeError::DuplicateBlock(1)));
        assert_eq!(st.receive(other[1].clone()), Err(SchemeError::HeaderMismatch));
        let mut bad = ctbs[1].clone();
        bad.c_tilde.pop();
        let sec = G0Element::identity();
        assert!(matches!(
            decrypt_block(&bad, &sk, Unlock::Sec(&sec)),
            Err(SchemeError::Framing { .. })
        ));
        let f = GtElement::identity();
        assert_eq!(
            decrypt_block(&ctbs[1], &sk, Unlock::Root(&f)).unwrap_err(),
            SchemeError::WrongUnlock
        );
    }
}
