use lcws_core::algebra::{hash_to_g0, kdf_mask, pair, G0Element, GtElement, HashDomain, Scalar};
use proptest::prelude::*;

fn scalar() -> impl Strategy<Value = Scalar> {
    any::<[u8; 31]>().prop_map(|b| {
        let mut wide = [0u8; 32];
        wide[1..].copy_from_slice(&b);
        Scalar::from_bytes(&wide).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn bilinear(a in scalar(), b in scalar()) {
        let g = G0Element::generator();
        let lhs = pair(&g.pow(&a), &g.pow(&b)).unwrap();
        prop_assert_eq!(lhs, GtElement::generator().pow(&(a * b)));
    }

    #[test]
    fn hashed_side_is_bilinear(a in scalar(), b in scalar(), msg in proptest::collection::vec(any::<u8>(), 0..64)) {
        let g = G0Element::generator();
        let h = hash_to_g0(HashDomain::Attribute, &msg);
        let lhs = pair(&h.pow(&a), &g.pow(&b)).unwrap();
        prop_assert_eq!(lhs, pair(&h, &g).unwrap().pow(&(a * b)));
    }

    #[test]
    fn encodings_round_trip(a in scalar()) {
        prop_assert_eq!(Scalar::from_bytes(&a.to_bytes()).unwrap(), a);
        let p = G0Element::generator_pow(&a);
        prop_assert_eq!(G0Element::from_bytes(&p.to_bytes()).unwrap(), p);
        let h = hash_to_g0(HashDomain::Message, &a.to_bytes()).pow(&a);
        prop_assert_eq!(G0Element::from_bytes(&h.to_bytes()).unwrap(), h);
        let t = GtElement::generator().pow(&a);
        prop_assert_eq!(GtElement::from_bytes(&t.to_bytes()).unwrap(), t);
    }

    #[test]
    fn mask_prefixes_agree(a in scalar(), short in 0usize..200, extra in 0usize..200) {
        let key = GtElement::generator().pow(&a);
        let long = kdf_mask(&key, short + extra);
        prop_assert_eq!(&long[..short], &kdf_mask(&key, short)[..]);
    }
}
