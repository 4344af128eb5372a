use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tiwork::boolfunc::{
    affine_conjugate, anf_to_tt, compose, degree, is_bijection, tt_to_anf, AffineMap, TruthTable,
};

fn table4() -> impl Strategy<Value = TruthTable> {
    proptest::collection::vec(0u8..16, 16).prop_map(|e| TruthTable::new(4, 4, e).unwrap())
}

fn permutation4() -> impl Strategy<Value = TruthTable> {
    Just((0u8..16).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_map(|e| TruthTable::new(4, 4, e).unwrap())
}

proptest! {
    #[test]
    fn anf_round_trip(t in table4()) {
        prop_assert_eq!(anf_to_tt(&tt_to_anf(&t)), t);
    }

    #[test]
    fn anf_evaluates_to_table(t in table4(), x in 0u8..16) {
        prop_assert_eq!(tt_to_anf(&t).eval(x), t.get(x));
    }

    #[test]
    fn compose_is_associative(a in table4(), b in table4(), c in table4()) {
        let left = compose(&compose(&a, &b).unwrap(), &c).unwrap();
        let right = compose(&a, &compose(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn bijection_iff_sorted_entries(t in prop_oneof![table4(), permutation4()]) {
        let mut e = t.entries().to_vec();
        e.sort();
        prop_assert_eq!(is_bijection(&t).unwrap(), e == (0..16).collect::<Vec<u8>>());
    }

    #[test]
    fn degree_is_affine_invariant(t in table4(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = AffineMap::random_invertible(4, &mut rng).unwrap();
        let b = AffineMap::random_invertible(4, &mut rng).unwrap();
        let c = affine_conjugate(&a, &t, &b).unwrap();
        prop_assert_eq!(degree(&tt_to_anf(&c)), degree(&tt_to_anf(&t)));
    }

    #[test]
    fn affine_inverse_round_trips(seed in any::<u64>(), x in 0u8..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = AffineMap::random_invertible(4, &mut rng).unwrap();
        prop_assert_eq!(a.inverse().unwrap().apply(a.apply(x)), x);
    }
}
