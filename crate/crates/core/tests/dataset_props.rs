use std::collections::HashSet;
use std::path::PathBuf;

use foodbench::dataset::{
    allocate, merge_train_validation, read_manifest, stratified_split, write_manifest, ClassLabel,
    DatasetError, DatasetManifest, SampleRef, Split,
};
use proptest::prelude::*;

const SPLITS: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

fn fractions() -> impl Strategy<Value = [f64; 3]> {
    (1u32..=100, 0u32..=100, 0u32..=100).prop_map(|(a, b, c)| {
        let t = (a + b + c) as f64;
        [a as f64 / t, b as f64 / t, c as f64 / t]
    })
}

/// Per-class sample counts and split tags.
fn manifest_strategy() -> impl Strategy<Value = DatasetManifest> {
    prop::collection::vec(prop::collection::vec(0usize..3, 1..25), 1..6).prop_map(|classes| {
        let labels = ClassLabel::from_names((0..classes.len()).map(|c| format!("class{c}")));
        let mut samples = Vec::new();
        for (c, splits) in classes.iter().enumerate() {
            for (i, &s) in splits.iter().enumerate() {
                let id = format!("{}/class{c}/img{i}.png", SPLITS[s].as_str());
                samples.push(SampleRef {
                    path: PathBuf::from("/data").join(&id),
                    sample_id: id,
                    label: labels[c].clone(),
                    split: SPLITS[s],
                });
            }
        }
        DatasetManifest::new(labels, samples).unwrap()
    })
}

fn split_set(m: &DatasetManifest, split: Split) -> HashSet<String> {
    m.samples_in(split).map(|s| s.sample_id.clone()).collect()
}

proptest! {
    #[test]
    fn allocation_is_within_one_of_exact(n in 0usize..500, f in fractions()) {
        let counts = allocate(n, f);
        prop_assert_eq!(counts.iter().sum::<usize>(), n);
        for s in 0..3 {
            prop_assert!((counts[s] as f64 - f[s] * n as f64).abs() < 1.0);
            if f[s] == 0.0 {
                prop_assert_eq!(counts[s], 0);
            }
        }
    }

    #[test]
    fn stratified_split_partitions_and_replays(m in manifest_strategy(), f in fractions(), seed: u64) {
        match stratified_split(m.samples(), f, seed) {
            Ok(out) => {
                prop_assert_eq!(out.len(), m.len());
                let all: HashSet<String> = m.samples().iter().map(|s| s.sample_id.clone()).collect();
                let parts: Vec<HashSet<String>> = SPLITS.iter().map(|&s| split_set(&out, s)).collect();
                prop_assert_eq!(parts.iter().map(HashSet::len).sum::<usize>(), all.len());
                let union: HashSet<String> = parts.iter().flatten().cloned().collect();
                prop_assert_eq!(union, all);
                for c in out.classes() {
                    let n = m.counts().class_total(c.id);
                    prop_assert_eq!(out.counts().class_total(c.id), n);
                    for (si, &s) in SPLITS.iter().enumerate() {
                        let got = out.counts().get(c.id, s) as f64;
                        prop_assert!((got - f[si] * n as f64).abs() < 1.0);
                    }
                }
                prop_assert_eq!(stratified_split(m.samples(), f, seed).unwrap(), out);
            }
            Err(DatasetError::InsufficientClassSamples { class, available }) => {
                let c = m.class_by_name(&class).unwrap();
                prop_assert_eq!(m.counts().class_total(c.id), available);
                let counts = allocate(available, f);
                prop_assert!((0..3).any(|s| f[s] > 0.0 && counts[s] == 0));
            }
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn merge_conserves_class_totals_and_is_idempotent(m in manifest_strategy()) {
        let merged = merge_train_validation(&m);
        prop_assert_eq!(merged.counts().split_total(Split::Validation), 0);
        prop_assert_eq!(split_set(&merged, Split::Test), split_set(&m, Split::Test));
        for c in m.classes() {
            prop_assert_eq!(merged.counts().class_total(c.id), m.counts().class_total(c.id));
            prop_assert_eq!(
                merged.counts().get(c.id, Split::Train),
                m.counts().get(c.id, Split::Train) + m.counts().get(c.id, Split::Validation)
            );
        }
        prop_assert_eq!(merge_train_validation(&merged), merged);
    }

    #[test]
    fn manifest_file_round_trip(m in manifest_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("manifest.json");
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        write_manifest(&m, &path).unwrap();
        prop_assert_eq!(read_manifest(&path).unwrap(), m);
    }
}

#[test]
fn six_class_merge_counts() {
    let rows = [
        ("ekwang", 142, 30, 31),
        ("eru", 145, 30, 31),
        ("jollof-ghana", 243, 52, 52),
        ("ndole", 144, 30, 31),
        ("palm-nut-soup", 274, 59, 59),
        ("waakye", 214, 45, 47),
    ];
    let labels = ClassLabel::from_names(rows.iter().map(|r| r.0));
    let mut samples = Vec::new();
    for (c, &(name, tr, va, te)) in rows.iter().enumerate() {
        for (split, n) in [(Split::Train, tr), (Split::Validation, va), (Split::Test, te)] {
            for i in 0..n {
                let id = format!("{}/{name}/{i}", split.as_str());
                samples.push(SampleRef {
                    path: PathBuf::from(&id),
                    sample_id: id,
                    label: labels[c].clone(),
                    split,
                });
            }
        }
    }
    let m = DatasetManifest::new(labels, samples).unwrap();
    assert_eq!(
        [Split::Train, Split::Validation, Split::Test].map(|s| m.counts().split_total(s)),
        [1162, 246, 251]
    );
    let merged = merge_train_validation(&m);
    let train: Vec<usize> = (0..6).map(|c| merged.counts().get(c, Split::Train)).collect();
    assert_eq!(train, [172, 175, 295, 174, 333, 259]);
    assert_eq!(merged.counts().split_total(Split::Train), 1408);
    assert_eq!(merged.counts().split_total(Split::Test), 251);
}

#[test]
fn thirty_one_samples_split_22_5_4() {
    assert_eq!(allocate(31, [0.7, 0.15, 0.15]), [22, 5, 4]);
    assert_eq!(allocate(100, [0.7, 0.15, 0.15]), [70, 15, 15]);
}
