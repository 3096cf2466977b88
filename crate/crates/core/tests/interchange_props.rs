use std::collections::HashSet;

use foodbench::interchange::{
    compare, read_predictions, write_predictions, InterchangeError, PredictionFile, PredictionHeader,
    PredictionRecord,
};
use indexmap::IndexMap;
use proptest::prelude::*;
use serde_json::{json, Map};

#[derive(Debug, Clone)]
struct Pair {
    a: PredictionFile,
    b: PredictionFile,
}

fn names(k: usize) -> Vec<String> {
    // unicode and punctuation survive the JSON layer
    (0..k).map(|c| format!("klasse-{c}-é\"/{c}")).collect()
}

fn file_strategy() -> impl Strategy<Value = Pair> {
    (1usize..=5, prop::collection::hash_set("[a-z0-9_/\\-]{1,12}", 1..40))
        .prop_flat_map(|(k, ids)| {
            let ids: Vec<String> = ids.into_iter().collect();
            let n = ids.len();
            (
                Just(k),
                Just(ids),
                prop::collection::vec(0..k, n),
                prop::collection::vec((0..k, any::<bool>(), prop::collection::vec(0.0f64..1.0, k)), n),
                prop::collection::vec((0..k, any::<bool>(), prop::collection::vec(0.0f64..1.0, k)), n),
                any::<bool>(),
            )
        })
        .prop_map(|(k, ids, truth, pa, pb, extra)| {
            let make = |producer: &str, preds: &[(usize, bool, Vec<f64>)]| {
                let cls = names(k);
                let mut header = PredictionHeader::new(producer, cls.clone());
                if extra {
                    header.created_at = Some("2024-01-01T00:00:00Z".into());
                    header.extra.insert("notes".into(), json!({"run": [1, 2.5, null]}));
                }
                let records = ids
                    .iter()
                    .zip(&truth)
                    .zip(preds)
                    .map(|((id, &a), (p, with_scores, raw))| {
                        let mut r = PredictionRecord::new(id.clone(), cls[a].clone(), cls[*p].clone());
                        if *with_scores {
                            let mut s = raw.clone();
                            s[*p] = 1.0 + raw[*p];
                            r.scores = Some(cls.iter().cloned().zip(s).collect::<IndexMap<_, _>>());
                        }
                        if extra {
                            r.extra.insert("fold".into(), json!(a));
                        }
                        r
                    })
                    .collect();
                PredictionFile::new(header, records).unwrap()
            };
            Pair {
                a: make("a", &pa),
                b: make("b", &pb),
            }
        })
}

fn bytes(f: &PredictionFile) -> Vec<u8> {
    let mut buf = Vec::new();
    write_predictions(f, &mut buf).unwrap();
    buf
}

proptest! {
    #[test]
    fn write_read_is_identity(pair in file_strategy()) {
        let buf = bytes(&pair.a);
        let back = read_predictions(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &pair.a);
        prop_assert_eq!(bytes(&back), buf);
    }

    #[test]
    fn compare_is_antisymmetric(pair in file_strategy()) {
        let ab = compare(&pair.a, &pair.b).unwrap();
        let ba = compare(&pair.b, &pair.a).unwrap();
        prop_assert_eq!(ab.accuracy_delta, -ba.accuracy_delta);
        for (name, d) in &ab.per_class_delta {
            let e = ba.delta_for(name).unwrap();
            prop_assert_eq!((d.precision, d.recall, d.f1), (-e.precision, -e.recall, -e.f1));
        }
        prop_assert_eq!(ab.macro_delta.f1, -ba.macro_delta.f1);
        prop_assert_eq!(ab.weighted_delta.precision, -ba.weighted_delta.precision);
        prop_assert_eq!(&ab.systems[0].1, &ba.systems[1].1);
    }

    #[test]
    fn dropping_a_record_is_a_sample_mismatch(pair in file_strategy()) {
        let mut b = pair.b.clone();
        let dropped = b.records.pop().unwrap().sample_id;
        match compare(&pair.a, &b) {
            Err(InterchangeError::SampleSetMismatch { only_in_a, only_in_b }) => {
                prop_assert_eq!(only_in_a, vec![dropped]);
                prop_assert!(only_in_b.is_empty());
            }
            other => prop_assert!(false, "unexpected {other:?}"),
        }
    }

    #[test]
    fn class_order_does_not_change_deltas(pair in file_strategy()) {
        let mut b = pair.b.clone();
        b.header.classes.reverse();
        let forward = compare(&pair.a, &pair.b).unwrap();
        let shuffled = compare(&pair.a, &b).unwrap();
        prop_assert_eq!(forward.per_class_delta, shuffled.per_class_delta);
    }
}

#[test]
fn duplicate_header_class_rejected() {
    let text = "{\"schema_version\":1,\"producer\":\"p\",\"classes\":[\"a\",\"a\"]}\n";
    assert!(matches!(read_predictions(text.as_bytes()), Err(InterchangeError::InvalidHeader(_))));
}

#[test]
fn ground_truth_disagreement_rejected() {
    let header = PredictionHeader::new("p", vec!["a".into(), "b".into()]);
    let a = PredictionFile::new(header.clone(), vec![PredictionRecord::new("s", "a", "a")]).unwrap();
    let b = PredictionFile::new(header, vec![PredictionRecord::new("s", "b", "a")]).unwrap();
    assert!(matches!(compare(&a, &b), Err(InterchangeError::GroundTruthMismatch { .. })));
}

#[test]
fn non_finite_scores_rejected() {
    let header = PredictionHeader::new("p", vec!["a".into()]);
    let mut r = PredictionRecord::new("s", "a", "a");
    r.scores = Some(IndexMap::from([("a".to_string(), f64::NAN)]));
    assert!(matches!(
        PredictionFile::new(header, vec![r]),
        Err(InterchangeError::InvalidScores { .. })
    ));
}

#[test]
fn unknown_header_fields_are_kept() {
    let text = "{\"schema_version\":1,\"producer\":\"p\",\"classes\":[\"a\"],\"extra\":{\"x\":1}}\n";
    let f = read_predictions(text.as_bytes()).unwrap();
    let keys: HashSet<&str> = f.header.extra.keys().map(String::as_str).collect();
    assert_eq!(keys, HashSet::from(["extra"]));
    let _: Map<String, serde_json::Value> = f.header.extra;
}
