mod common;

use autoderive::encoding::{distance, encoded_len, EncodingError, FeatureVector, SymbolTable};
use autoderive::expr::build::*;
use autoderive::expr::{Formula, NodeTag};
use proptest::prelude::*;

/// Independent encoder: each operator node's code followed by its children's
/// codes, in depth-first order. `Sym` and `Num` contribute nothing of their
/// own; an argument-less function application still counts as an operator.
fn reference_encode(f: &Formula, code: &dyn Fn(NodeTag) -> u32, out: &mut Vec<u32>) {
    if matches!(f.tag(), NodeTag::Sym | NodeTag::Num) {
        return;
    }
    out.push(code(f.tag()));
    for c in f.children() {
        out.push(code(c.tag()));
    }
    for c in f.children() {
        reference_encode(c, code, out);
    }
}

fn rename_leaves(f: &Formula) -> Formula {
    if f.is_leaf() {
        return sym("q");
    }
    Formula::new(f.kind().clone(), f.children().iter().map(rename_leaves).collect()).unwrap()
}

#[test]
fn worked_pair_encodings_and_distance() {
    let table = SymbolTable::default();
    // t·e^x + m·cos x
    let f1 = plus(times(sym("t"), exp(sym("x"))), times(sym("m"), cos(sym("x"))));
    // t·e^(−x) − a·sin x
    let f2 = minus(
        times(sym("t"), exp(times(num("-1"), sym("x")))),
        times(sym("a"), sin(sym("x"))),
    );
    let e1 = table.encode(&f1).unwrap();
    let e2 = table.encode(&f2).unwrap();
    assert_eq!(&e1.values()[..13], [1, 3, 3, 3, 0, 12, 12, 0, 3, 0, 15, 15, 0]);
    assert_eq!(&e2.values()[..16], [2, 3, 3, 3, 0, 12, 12, 3, 3, 0, 0, 3, 0, 14, 14, 0]);
    // position-by-position count, written out rather than calling the library
    let by_hand = e1.values().iter().zip(e2.values()).filter(|(a, b)| a != b).count();
    assert_eq!(distance(&e1, &e2).unwrap(), by_hand);
    assert_eq!(by_hand, 6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_the_reference_encoder(f in common::formula(6)) {
        let table = SymbolTable::default();
        let mut expected = Vec::new();
        reference_encode(&f, &|t| table.code(t), &mut expected);
        prop_assert_eq!(expected.len(), encoded_len(&f));
        match table.encode(&f) {
            Ok(v) => {
                prop_assert!(expected.len() <= 64);
                prop_assert_eq!(&v.values()[..expected.len()], &expected[..]);
                prop_assert!(v.values()[expected.len()..].iter().all(|&x| x == 0));
                prop_assert_eq!(table.encode(&f).unwrap(), v);
            }
            Err(EncodingError::Overflow { len, l_max }) => {
                prop_assert_eq!(len, expected.len());
                prop_assert!(len > l_max);
            }
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn overflow_exactly_above_the_limit(f in common::formula(5), l_max in 0usize..40) {
        let table = SymbolTable::canonical(l_max);
        let len = encoded_len(&f);
        prop_assert_eq!(table.encode(&f).is_err(), len > l_max);
    }

    #[test]
    fn leaves_are_invisible(f in common::formula(6)) {
        let table = SymbolTable::canonical(256);
        prop_assert_eq!(table.encode(&f).unwrap(), table.encode(&rename_leaves(&f)).unwrap());
    }

    #[test]
    fn hamming_axioms(
        a in prop::collection::vec(0u32..18, 64),
        b in prop::collection::vec(0u32..18, 64),
        c in prop::collection::vec(0u32..18, 64),
    ) {
        let (a, b, c) = (FeatureVector::from_values(a), FeatureVector::from_values(b), FeatureVector::from_values(c));
        let ab = distance(&a, &b).unwrap();
        prop_assert_eq!(distance(&a, &a).unwrap(), 0);
        prop_assert_eq!(ab, distance(&b, &a).unwrap());
        prop_assert!(ab <= distance(&a, &c).unwrap() + distance(&c, &b).unwrap());
        prop_assert!(ab <= 64);
        prop_assert_eq!(ab == 0, a == b);
    }

    #[test]
    fn vector_text_round_trip(v in prop::collection::vec(0u32..18, 0..70)) {
        let fv = FeatureVector::from_values(v);
        prop_assert_eq!(fv.to_string().parse::<FeatureVector>().unwrap(), fv);
    }
}

#[test]
fn thousand_random_vector_triples_satisfy_the_axioms() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
        // sparse vectors, like real encodings, so that small distances occur
        FeatureVector::from_values((0..64).map(|_| if rng.random_bool(0.7) { 0 } else { rng.random_range(1..18) }).collect())
    };
    for _ in 0..1000 {
        let (a, b, c) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let ab = distance(&a, &b).unwrap();
        assert_eq!(ab, distance(&b, &a).unwrap());
        assert_eq!(distance(&a, &a).unwrap(), 0);
        assert!(ab <= distance(&a, &c).unwrap() + distance(&c, &b).unwrap());
    }
}
