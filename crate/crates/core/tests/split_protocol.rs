use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rpca::data::table::{class_sizes, WOMENSPORTS, WOMENSPORTS_IMAGES};
use rpca::data::{stratified_split, DatasetManifest, Record, Split, SplitPolicy};
use rpca::Error;

/// Manifest with `sizes[class]` unassigned records per class; no files.
fn synthetic_manifest(sizes: &BTreeMap<String, usize>) -> DatasetManifest {
    let classes: Vec<String> = sizes.keys().cloned().collect();
    let mut records = Vec::new();
    for (index, class) in classes.iter().enumerate() {
        for i in 0..sizes[class] {
            records.push(Record {
                relative_path: format!("{class}/{i:05}.jpg"),
                class_name: class.clone(),
                class_index: index,
                split: Split::Unassigned,
            });
        }
    }
    DatasetManifest::from_records("/nonexistent", classes, records).unwrap()
}

fn counts_by_name(m: &DatasetManifest, split: Split) -> BTreeMap<String, usize> {
    m.classes.iter().cloned().zip(m.class_counts(split)).collect()
}

fn members(m: &DatasetManifest, split: Split) -> BTreeSet<String> {
    m.records.iter().filter(|r| r.split == split).map(|r| r.relative_path.clone()).collect()
}

#[test]
fn count_table_reproduces_every_class_row() {
    let manifest = synthetic_manifest(&class_sizes(&WOMENSPORTS));
    assert_eq!(manifest.records.len(), WOMENSPORTS_IMAGES);
    assert_eq!(manifest.num_classes(), 50);
    let split = stratified_split(&manifest, &SplitPolicy::named_table("womensports", 1).unwrap()).unwrap();
    let train = counts_by_name(&split, Split::Train);
    let test = counts_by_name(&split, Split::Test);
    for row in WOMENSPORTS {
        assert_eq!(train[row.class_name], row.train, "{}", row.class_name);
        assert_eq!(test[row.class_name], row.test, "{}", row.class_name);
    }
    assert_eq!((train["Archery"], test["Archery"]), (30, 574));
    assert_eq!((train["Basketball"], test["Basketball"]), (40, 757));
    // The published per-class train column sums to 1675.
    assert_eq!(split.split_len(Split::Train), 1675);
    assert_eq!(split.split_len(Split::Val), 0);
}

#[test]
fn mirrored_validation_doubles_train_counts() {
    let manifest = synthetic_manifest(&class_sizes(&WOMENSPORTS));
    let policy = SplitPolicy::named_table("womensports", 1).unwrap().with_mirrored_val();
    let split = stratified_split(&manifest, &policy).unwrap();
    assert_eq!(split.class_counts(Split::Train), split.class_counts(Split::Val));
    assert_eq!(split.split_len(Split::Val), 1675);
    assert_eq!(split.split_len(Split::Test), WOMENSPORTS_IMAGES - 2 * 1675);
}

#[test]
fn identical_seed_gives_identical_membership() {
    let manifest = synthetic_manifest(&class_sizes(&WOMENSPORTS));
    let policy = SplitPolicy::named_table("womensports", 42).unwrap().with_mirrored_val();
    let a = stratified_split(&manifest, &policy).unwrap();
    let b = stratified_split(&manifest, &policy).unwrap();
    assert_eq!(a, b);
    let other = SplitPolicy::named_table("womensports", 43).unwrap().with_mirrored_val();
    let c = stratified_split(&manifest, &other).unwrap();
    assert_ne!(members(&a, Split::Train), members(&c, Split::Train));
    assert_eq!(a.class_counts(Split::Train), c.class_counts(Split::Train));
}

#[test]
fn full_train_ratio_takes_everything() {
    let sizes = BTreeMap::from([("toy".to_string(), 3)]);
    let split = stratified_split(&synthetic_manifest(&sizes), &SplitPolicy::ratio(1.0, 0.0, 0)).unwrap();
    assert_eq!(split.split_len(Split::Train), 3);
    assert_eq!(split.split_len(Split::Val) + split.split_len(Split::Test), 0);
}

#[test]
fn oversized_request_names_the_class() {
    let sizes = BTreeMap::from([("small".to_string(), 3), ("big".to_string(), 10)]);
    let counts = BTreeMap::from([("small".to_string(), 4), ("big".to_string(), 2)]);
    let err = stratified_split(&synthetic_manifest(&sizes), &SplitPolicy::count_table(counts, 0)).unwrap_err();
    assert!(matches!(&err, Error::Split(msg) if msg.contains("small")), "{err}");
}

#[test]
fn invalid_ratios_rejected() {
    let sizes = BTreeMap::from([("a".to_string(), 4)]);
    let m = synthetic_manifest(&sizes);
    assert!(stratified_split(&m, &SplitPolicy::ratio(0.7, 0.4, 0)).is_err());
    assert!(stratified_split(&m, &SplitPolicy::ratio(-0.1, 0.0, 0)).is_err());
}

fn sizes_strategy() -> impl Strategy<Value = BTreeMap<String, usize>> {
    prop::collection::vec(1usize..40, 1..6)
        .prop_map(|v| v.into_iter().enumerate().map(|(i, n)| (format!("class{i}"), n)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_is_a_partition_with_exact_counts(sizes in sizes_strategy(), seed in any::<u64>(), frac in 0.0f64..0.5) {
        let manifest = synthetic_manifest(&sizes);
        let counts: BTreeMap<String, usize> = sizes.iter().map(|(k, &n)| (k.clone(), (n as f64 * frac) as usize)).collect();
        let policy = SplitPolicy::count_table(counts.clone(), seed).with_mirrored_val();
        let split = stratified_split(&manifest, &policy).unwrap();
        let (tr, va, te) = (members(&split, Split::Train), members(&split, Split::Val), members(&split, Split::Test));
        prop_assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
        prop_assert_eq!(tr.len() + va.len() + te.len(), manifest.records.len());
        prop_assert_eq!(split.split_len(Split::Unassigned), 0);
        let train = counts_by_name(&split, Split::Train);
        let val = counts_by_name(&split, Split::Val);
        for (class, &n) in &counts {
            prop_assert_eq!(train[class], n);
            prop_assert_eq!(val[class], n);
        }
    }

    #[test]
    fn seed_changes_never_change_counts(sizes in sizes_strategy(), a in any::<u64>(), b in any::<u64>()) {
        let manifest = synthetic_manifest(&sizes);
        let x = stratified_split(&manifest, &SplitPolicy::ratio(0.3, 0.2, a)).unwrap();
        let y = stratified_split(&manifest, &SplitPolicy::ratio(0.3, 0.2, b)).unwrap();
        for s in [Split::Train, Split::Val, Split::Test] {
            prop_assert_eq!(x.class_counts(s), y.class_counts(s));
        }
    }
}
