//! Property tests for the value model and the ingestion round trip.

use proptest::prelude::*;

use objql::ingest::{json_to_value, value_to_json};
use objql::value::{MapKey, Value};

fn arb_value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(Value::Int),
        any::<f64>().prop_map(Value::Float),
        "[a-z$]{0,8}".prop_map(Value::text),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::List),
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::set),
            prop::collection::vec(("[a-z]{0,4}", inner.clone()), 0..4).prop_map(|kvs| {
                Value::map(
                    kvs.into_iter()
                        .map(|(k, v)| (MapKey::Text(k), v))
                        .collect(),
                )
            }),
            prop::collection::vec((any::<i64>(), inner), 0..4).prop_map(|kvs| {
                Value::map(kvs.into_iter().map(|(k, v)| (MapKey::Int(k), v)).collect())
            }),
        ]
    })
}

/// Values the line-oriented JSON format can represent: text map keys
/// only, and none of the reserved wrapper keys.
fn arb_representable() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(Value::Int),
        any::<f64>().prop_map(Value::Float),
        "[a-z]{0,8}".prop_map(Value::text),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::List),
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::set),
            prop::collection::vec(("[a-z]{1,4}", inner), 0..4).prop_map(|kvs| {
                Value::map(
                    kvs.into_iter()
                        .map(|(k, v)| (MapKey::Text(k), v))
                        .collect(),
                )
            }),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn comparison_is_reflexive_and_antisymmetric(a in arb_value(), b in arb_value()) {
        prop_assert_eq!(a.compare(&a), std::cmp::Ordering::Equal);
        prop_assert_eq!(a.compare(&b), b.compare(&a).reverse());
    }

    #[test]
    fn comparison_is_transitive(a in arb_value(), b in arb_value(), c in arb_value()) {
        use std::cmp::Ordering::Greater;
        let mut xs = [a, b, c];
        xs.sort_by(|x, y| x.compare(y));
        prop_assert!(xs[0].compare(&xs[1]) != Greater);
        prop_assert!(xs[1].compare(&xs[2]) != Greater);
        prop_assert!(xs[0].compare(&xs[2]) != Greater);
    }

    #[test]
    fn equality_agrees_with_comparison_and_encoding(a in arb_value(), b in arb_value()) {
        let eq = a.equals(&b);
        prop_assert_eq!(eq, a.compare(&b) == std::cmp::Ordering::Equal);
        prop_assert_eq!(eq, a.canonical_encode() == b.canonical_encode());
    }

    #[test]
    fn sets_are_sorted_and_deduplicated(xs in prop::collection::vec(arb_value(), 0..8)) {
        let Value::Set(elems) = Value::set(xs) else { unreachable!() };
        for w in elems.windows(2) {
            prop_assert_eq!(w[0].compare(&w[1]), std::cmp::Ordering::Less);
        }
    }

    #[test]
    fn json_round_trip_is_identity(v in arb_representable()) {
        let j = value_to_json(&v).unwrap();
        let reparsed: serde_json::Value = serde_json::from_str(&j.to_string()).unwrap();
        let back = json_to_value(&reparsed).unwrap();
        prop_assert!(v.equals(&back), "{v:?} -> {j} -> {back:?}");
    }
}
