use lcws_core::algebra::Scalar;
use lcws_core::policy::{
    lagrange_coeff, parse_expr, parse_policy, partition_levels, satisfies, AccessTree, AttributeSet, Polynomial,
};
use lcws_core::synth::random_expr;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn tree(seed: u64) -> AccessTree {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    AccessTree::from_expr(&random_expr(&mut rng, 6, 40, 12)).unwrap()
}

fn subset(mask: u16) -> AttributeSet {
    (0..12).filter(|b| mask >> b & 1 == 1).map(|b| format!("a{b}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn interpolation_recovers_constant(
        seed in any::<u64>(),
        degree in 0usize..8,
        offset in 1u32..1000,
        stride in 1u32..50,
    ) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let constant = Scalar::random(&mut rng);
        let poly = Polynomial::random(constant, degree, &mut rng);
        let set: Vec<u32> = (0..=degree as u32).map(|j| offset + j * stride).collect();
        let mut acc = Scalar::ZERO;
        for &i in &set {
            acc = acc + poly.eval(&Scalar::from(i as u64)) * lagrange_coeff(i, &set, &Scalar::ZERO).unwrap();
        }
        prop_assert_eq!(acc, constant);
    }

    #[test]
    fn partition_is_complete_and_reassembles(seed in any::<u64>()) {
        let t = tree(seed);
        let p = partition_levels(&t);
        prop_assert_eq!(p.len() as u32, t.depth());
        prop_assert_eq!(p.levels[0].entries.iter().filter(|e| e.parent.is_none()).count(), 1);
        let mut ids: Vec<u32> = p.levels.iter().flat_map(|l| l.entries.iter().map(|e| e.id.0)).collect();
        ids.sort();
        prop_assert_eq!(ids, (0..t.nodes().len() as u32).collect::<Vec<_>>());
        prop_assert_eq!(p.reassemble().unwrap(), t);
    }

    #[test]
    fn satisfaction_is_monotone(seed in any::<u64>(), small in any::<u16>(), more in any::<u16>()) {
        let t = tree(seed);
        let a = subset(small);
        let b = subset(small | more);
        prop_assert!(a.is_subset(&b));
        prop_assert!(!satisfies(&t, &a) || satisfies(&t, &b));
    }

    #[test]
    fn print_parse_fixpoint(seed in any::<u64>()) {
        let t = tree(seed);
        let text = t.to_string();
        let again = parse_policy(&text).unwrap();
        prop_assert_eq!(&again, &t);
        prop_assert_eq!(again.to_string(), text);
    }

    #[test]
    fn expr_print_parse_fixpoint(seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let e = random_expr(&mut rng, 5, 20, 6);
        let text = e.to_string();
        prop_assert_eq!(parse_expr(&text).unwrap(), e.clone());
    }
}

#[test]
fn spec_partition_example() {
    let t = parse_policy("(a AND (b OR c))").unwrap();
    let p = partition_levels(&t);
    let names = |i: usize| -> Vec<String> {
        p.levels[i]
            .entries
            .iter()
            .map(|e| match &e.kind {
                lcws_core::policy::EntryKind::Leaf { attribute } => attribute.clone(),
                lcws_core::policy::EntryKind::Gate { threshold, children } => {
                    format!("{threshold}/{}", children.len())
                }
            })
            .collect()
    };
    assert_eq!(names(0), ["2/2"]);
    assert_eq!(names(1), ["a", "1/2"]);
    assert_eq!(names(2), ["b", "c"]);
}

#[test]
fn two_of_three_brute_force() {
    let t = parse_policy("(2 of (a, b, c))").unwrap();
    for mask in 0u16..8 {
        let attrs: AttributeSet = ["a", "b", "c"]
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, a)| *a)
            .collect();
        assert_eq!(satisfies(&t, &attrs), mask.count_ones() >= 2, "{mask:03b}");
    }
}
