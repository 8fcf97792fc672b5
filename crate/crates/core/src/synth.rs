//! Synthetic access policies for benchmarks and randomized tests.

use alloc::format;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::policy::PolicyExpr;

/// A spine of gates, one per level, with `leaves` attribute leaves spread
/// over levels `2..=levels` (later levels take the remainder). Each gate
/// needs a majority of its children. Attributes are `l{level}_{k}`.
///
/// Returns `None` when the shape is impossible: `levels == 0`, fewer
/// leaves than levels below the root, or a single level with more than
/// one leaf.
pub fn layered(levels: u32, leaves: u32) -> Option<PolicyExpr> {
    if levels == 0 {
        return None;
    }
    if levels == 1 {
        return (leaves == 1).then(|| PolicyExpr::attr("l1_0"));
    }
    let slots = levels - 1;
    if leaves < slots {
        return None;
    }
    let base = leaves / slots;
    let extra = leaves % slots;
    // leaves on level d (2..=levels); the last `extra` levels get one more
    let count = |d: u32| base + u32::from(d > levels - extra);

    // the gate on level d holds the leaves of level d + 1 and the next gate
    let mut below: Option<PolicyExpr> = None;
    for d in (1..levels).rev() {
        let mut children: Vec<PolicyExpr> = (0..count(d + 1))
            .map(|k| PolicyExpr::attr(format!("l{}_{k}", d + 1)))
            .collect();
        if let Some(gate) = below.take() {
            children.push(gate);
        }
        let k = children.len() / 2 + 1;
        below = Some(PolicyExpr::Threshold(k, children));
    }
    below
}

fn below(rng: &mut (impl RngCore + ?Sized), n: u32) -> u32 {
    rng.next_u32() % n
}

/// Random tree with at most `max_depth` levels and `max_leaves` leaves over
/// the attribute pool `a0..a{pool-1}`. Attributes may repeat.
pub fn random_expr<R: RngCore + ?Sized>(rng: &mut R, max_depth: u32, max_leaves: u32, pool: u32) -> PolicyExpr {
    assert!(max_depth >= 1 && max_leaves >= 1 && pool >= 1);
    fn leaf<R: RngCore + ?Sized>(rng: &mut R, pool: u32) -> PolicyExpr {
        PolicyExpr::attr(format!("a{}", below(rng, pool)))
    }
    fn node<R: RngCore + ?Sized>(rng: &mut R, level: u32, max_depth: u32, budget: &mut u32, pool: u32) -> PolicyExpr {
        let room = level < max_depth && *budget >= 2;
        // root is always a gate when there is room for one
        if !room || (level > 1 && below(rng, 3) == 0) {
            *budget -= 1;
            return leaf(rng, pool);
        }
        let want = (1 + below(rng, 4)).min(*budget);
        let mut children = Vec::new();
        for c in 0..want {
            // keep at least one leaf of budget per remaining sibling
            let remaining = want - c - 1;
            if *budget <= remaining {
                break;
            }
            let mut share = *budget - remaining;
            let spent_before = share;
            children.push(node(rng, level + 1, max_depth, &mut share, pool));
            *budget -= spent_before - share;
        }
        let k = 1 + below(rng, children.len() as u32) as usize;
        PolicyExpr::Threshold(k, children)
    }
    let mut budget = max_leaves;
    node(rng, 1, max_depth, &mut budget, pool)
}
