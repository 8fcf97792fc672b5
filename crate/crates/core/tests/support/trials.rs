//! Random trial inputs shared by the scheme tests.

use lcws_core::policy::{satisfies, AccessTree, AttributeSet};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn attributes_of(tree: &AccessTree) -> Vec<String> {
    let mut names: Vec<String> = tree
        .nodes()
        .iter()
        .filter_map(|n| n.attribute().map(String::from))
        .collect();
    names.sort();
    names.dedup();
    names
}

/// A random satisfying set: a random subset grown until the root holds.
pub fn satisfying_set<R: Rng>(tree: &AccessTree, rng: &mut R) -> AttributeSet {
    let mut names = attributes_of(tree);
    names.shuffle(rng);
    let mut chosen: Vec<String> = names.iter().filter(|_| rng.gen_bool(0.3)).cloned().collect();
    for a in &names {
        if satisfies(tree, &AttributeSet::new(chosen.iter().cloned())) {
            break;
        }
        if !chosen.contains(a) {
            chosen.push(a.clone());
        }
    }
    let set = AttributeSet::new(chosen);
    assert!(satisfies(tree, &set));
    set
}

/// A random nonempty set that fails the root. Starts from a random subset
/// and drops attributes until the root fails; falls back to an attribute
/// foreign to the tree.
pub fn unsatisfying_set<R: Rng>(tree: &AccessTree, rng: &mut R) -> AttributeSet {
    let mut names = attributes_of(tree);
    names.shuffle(rng);
    let mut chosen: Vec<String> = names.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect();
    while satisfies(tree, &AttributeSet::new(chosen.iter().cloned())) {
        chosen.pop();
    }
    if chosen.is_empty() {
        chosen.push(String::from("outsider"));
    }
    let set = AttributeSet::new(chosen);
    assert!(!satisfies(tree, &set));
    set
}
