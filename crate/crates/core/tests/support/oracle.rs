//! Brute-force exponent oracle.
//!
//! Encrypts with known master exponents and key randomness, keeps every
//! level secret and node share, and checks each pairing-side intermediate
//! against `e(g,g)^x` computed directly from the scalars.

use std::collections::BTreeMap;

use lcws_core::algebra::{GtElement, G0Element, Scalar};
use lcws_core::policy::{
    lagrange_coeff, partition_levels, satisfies, AccessNode, AccessTree, AttributeSet, NodeId, NodeKind, PolicyExpr,
};
use lcws_core::scheme::{
    keygen_with_randomness, mask_key, setup_from_exponents, unlock_key, CiphertextBlock, DecryptionState,
    EncryptionContext, Encryptor, KeyRandomness, MasterExponents, SecretKey, Unlock,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Every tree with exactly `nodes` nodes, every threshold choice, leaves
/// named `a0, a1, ...` left to right.
pub fn trees_with(nodes: usize) -> Vec<PolicyExpr> {
    fn shapes(nodes: usize) -> Vec<Shape> {
        if nodes == 1 {
            return vec![Shape::Leaf];
        }
        forests(nodes - 1)
            .into_iter()
            .flat_map(|children| {
                (1..=children.len()).map(move |k| Shape::Gate(k, children.clone()))
            })
            .collect()
    }
    fn forests(nodes: usize) -> Vec<Vec<Shape>> {
        if nodes == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for first in 1..=nodes {
            for head in shapes(first) {
                for tail in forests(nodes - first) {
                    let mut f = vec![head.clone()];
                    f.extend(tail);
                    out.push(f);
                }
            }
        }
        out
    }
    fn label(s: &Shape, next: &mut usize) -> PolicyExpr {
        match s {
            Shape::Leaf => {
                *next += 1;
                PolicyExpr::attr(format!("a{}", *next - 1))
            }
            Shape::Gate(k, children) => PolicyExpr::Threshold(*k, children.iter().map(|c| label(c, next)).collect()),
        }
    }
    shapes(nodes).iter().map(|s| label(s, &mut 0)).collect()
}

#[derive(Clone)]
enum Shape {
    Leaf,
    Gate(usize, Vec<Shape>),
}

fn gt(x: Scalar) -> GtElement {
    GtElement::generator().pow(&x)
}

fn leaf_names(tree: &AccessTree) -> Vec<String> {
    let mut names: Vec<String> = tree
        .nodes()
        .iter()
        .filter_map(|n| n.attribute().map(String::from))
        .collect();
    names.sort();
    names.dedup();
    names
}

fn node_satisfied(node: &AccessNode, attrs: &AttributeSet) -> bool {
    match &node.kind {
        NodeKind::Leaf { attribute } => attrs.contains(attribute),
        NodeKind::Gate { threshold, children } => {
            children.iter().filter(|c| node_satisfied(c, attrs)).count() >= *threshold
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Tally {
    pub trees: usize,
    pub keys: usize,
    pub checks: usize,
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*));
        }
    };
}

/// Runs the oracle on one tree against every nonempty attribute subset of
/// its leaves. `only_satisfying` skips keys that fail the root.
pub fn check_tree(expr: &PolicyExpr, seed: u64, only_satisfying: bool, tally: &mut Tally) -> Result<(), String> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let tree = AccessTree::from_expr(expr).map_err(|e| e.to_string())?;
    let x = MasterExponents::random(&mut rng);
    let (pk, mk) = setup_from_exponents(&x);
    let ctx = EncryptionContext::from_master(&mk);
    let q_inv = x.q.invert().unwrap();

    let message: Vec<u8> = (0..37u8).map(|b| b.wrapping_mul(29) ^ seed as u8).collect();
    let mut enc = Encryptor::new(&pk, &ctx, &tree, &message, &mut rng).map_err(|e| e.to_string())?;
    let mut ctbs: Vec<CiphertextBlock> = Vec::new();
    while let Some(ctb) = enc.encrypt_next(&mut rng) {
        ctbs.push(ctb.map_err(|e| e.to_string())?);
    }
    let state = enc.state();
    let n = ctbs.len() as u32;
    ensure!(n == tree.depth(), "block count {n} vs depth {}", tree.depth());
    let s: Vec<Scalar> = (1..=n).map(|i| state.level_secret(i).unwrap()).collect();
    let share = |id: NodeId| state.share(id).unwrap();

    // encryption side: share polynomials, ciphertext components
    ensure!(share(tree.root().id) == s[0], "root share is not s_1");
    let g = G0Element::generator();
    for node in tree.nodes() {
        if let NodeKind::Gate { threshold, children } = &node.kind {
            let set: Vec<u32> = (1..=*threshold as u32).collect();
            let mut acc = Scalar::ZERO;
            for (pos, c) in children.iter().take(*threshold).enumerate() {
                acc = acc + share(c.id) * lagrange_coeff(pos as u32 + 1, &set, &Scalar::ZERO).unwrap();
            }
            ensure!(acc == share(node.id), "children of {} do not interpolate its share", node.id);
        }
    }
    let partition = partition_levels(&tree);
    for (ctb, slice) in ctbs.iter().zip(&partition.levels) {
        let i = ctb.index as usize;
        ensure!(ctb.c == g.pow(&(x.beta * s[i - 1])), "C_{i} != g^(beta s_i)");
        for gate in slice.gates() {
            match ctb.delta.get(&gate.id) {
                Some(dc) => ensure!(
                    i >= 2 && *dc == g.pow(&((s[i - 1] - share(gate.id)) * q_inv)),
                    "delta of {} on level {i}",
                    gate.id
                ),
                None => ensure!(i == 1, "gate {} on level {i} lacks a delta", gate.id),
            }
        }
        for leaf in slice.leaves() {
            let comp = &ctb.leaves[&leaf.id];
            ensure!(comp.c_hat == g.pow(&share(leaf.id)), "C-hat of leaf {}", leaf.id);
        }
        tally.checks += 1;
    }

    let names = leaf_names(&tree);
    let full = AttributeSet::new(names.iter().cloned());
    let randomness = KeyRandomness::random(&full, &mut rng);
    let r = randomness.r;
    let full_key = keygen_with_randomness(&pk, &mk, &full, &randomness).map_err(|e| e.to_string())?;
    tally.trees += 1;

    // closed-form values every key is compared against
    let node_values: BTreeMap<NodeId, GtElement> = tree.nodes().iter().map(|n| (n.id, gt(r * share(n.id)))).collect();
    let secs: Vec<G0Element> = s.iter().map(|si| g.pow(&(*si * q_inv))).collect();
    let unlock: Vec<GtElement> = s.iter().map(|si| gt(r * *si)).collect();

    // Unlocks and mask keys depend on the key only through D and D-hat,
    // which every restriction of the full key shares; check them once.
    let mut by_level: BTreeMap<u32, Vec<&AccessNode>> = BTreeMap::new();
    for node in tree.nodes() {
        by_level.entry(node.depth).or_default().push(node);
    }
    for ctb in &ctbs {
        let i = ctb.index as usize;
        let a_expected = &unlock[i - 1];
        let open = |u: Unlock<'_>| unlock_key(ctb, &full_key, u).map_err(|e| e.to_string());
        if i == 1 {
            ensure!(
                open(Unlock::Root(&node_values[&tree.root().id]))? == *a_expected,
                "root unlock on block 1"
            );
        } else {
            for node in by_level[&ctb.index].iter().filter(|n| !n.is_leaf()) {
                let value = &node_values[&node.id];
                let a = open(Unlock::Gate { node: node.id, value })?;
                ensure!(a == *a_expected, "gate {} unlock on block {i}", node.id);
            }
            ensure!(open(Unlock::Sec(&secs[i - 1]))? == *a_expected, "Sec unlock on block {i}");
        }
        let key = mask_key(ctb, &full_key, a_expected).map_err(|e| e.to_string())?;
        ensure!(key == gt(x.alpha * s[i - 1]), "mask key on block {i}");
        tally.checks += 1;
    }
    let expected = Expected {
        nodes: node_values,
        secs,
    };

    for mask in 1u32..(1 << names.len()) {
        let attrs: AttributeSet = names
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, a)| a.clone())
            .collect();
        let authorized = satisfies(&tree, &attrs);
        if only_satisfying && !authorized {
            continue;
        }
        let sk = SecretKey {
            d: full_key.d,
            d_hat: full_key.d_hat,
            components: full_key
                .components
                .iter()
                .filter(|(a, _)| attrs.contains(a))
                .map(|(a, k)| (a.clone(), k.clone()))
                .collect(),
        };
        check_key(&tree, &ctbs, &sk, &attrs, authorized, &message, &expected)
            .map_err(|e| format!("policy {expr}, key {{{}}}: {e}", attrs.iter().collect::<Vec<_>>().join(",")))?;
        tally.keys += 1;
        tally.checks += tree.nodes().len() + n as usize;
    }
    Ok(())
}

struct Expected {
    /// `e(g,g)^(r q_x(0))` per node
    nodes: BTreeMap<NodeId, GtElement>,
    /// `g^(s_i / q)` per level
    secs: Vec<G0Element>,
}

fn check_key(
    tree: &AccessTree,
    ctbs: &[CiphertextBlock],
    sk: &SecretKey,
    attrs: &AttributeSet,
    authorized: bool,
    message: &[u8],
    expected: &Expected,
) -> Result<(), String> {
    let mut state = DecryptionState::new(sk);
    for ctb in ctbs {
        state.receive(ctb.clone()).map_err(|e| e.to_string())?;
    }

    for node in tree.nodes() {
        let want = node_satisfied(node, attrs).then(|| expected.nodes[&node.id]);
        ensure!(
            state.node_value(node.id).copied() == want,
            "F of node {} disagrees with e(g,g)^(r q(0))",
            node.id
        );
    }
    for ctb in &ctbs[1..] {
        if let Some(recovered) = state.sec(ctb.index) {
            ensure!(*recovered == expected.secs[ctb.index as usize - 1], "recovered Sec_{}", ctb.index);
        }
    }

    let out = state.assemble();
    if authorized {
        ensure!(out.as_deref() == Some(message), "authorized key did not recover M");
        ensure!(state.data_block(1).is_some(), "DB_1 missing");
    } else {
        ensure!(out.is_none(), "unauthorized key recovered M");
    }
    Ok(())
}
