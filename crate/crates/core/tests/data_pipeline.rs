use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};
use proptest::prelude::*;
use rpca::data::augment::{augment, eval_transform, AugmentConfig, Regime};
use rpca::data::synthetic::write_position_fixture;
use rpca::data::{batch_iterator, build_manifest, stratified_split, DatasetManifest, Split, SplitPolicy, Transform};
use rpca::imaging::ImageTensor;
use rpca::Error;

fn write_png(path: &Path, side: u32, shade: u8) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    RgbImage::from_fn(side, side, |x, y| Rgb([shade, (x % 256) as u8, (y % 256) as u8]))
        .save(path)
        .unwrap();
}

#[test]
fn truncated_image_goes_to_skip_report() {
    let dir = tempfile::tempdir().unwrap();
    for i in 0..10 {
        write_png(&dir.path().join(format!("cls/{i:02}.png")), 24, i as u8 * 10);
    }
    let victim = dir.path().join("cls/03.png");
    let bytes = fs::read(&victim).unwrap();
    fs::write(&victim, &bytes[..bytes.len() / 2]).unwrap();
    let m = build_manifest(dir.path()).unwrap();
    assert_eq!(m.records.len(), 9);
    assert_eq!(m.skipped.len(), 1);
    assert_eq!(m.skipped[0].path, "cls/03.png");
    assert!(m.skip_report().starts_with("cls/03.png\t"));
}

#[test]
fn minimal_dataset_and_class_order() {
    let dir = tempfile::tempdir().unwrap();
    for i in 0..3 {
        write_png(&dir.path().join(format!("only/{i}.png")), 8, 50);
    }
    let m = build_manifest(dir.path()).unwrap();
    assert_eq!(m.records.len(), 3);
    assert_eq!(m.classes, vec!["only".to_string()]);

    let dir = tempfile::tempdir().unwrap();
    for class in ["zebra", "Alpha", "mid"] {
        write_png(&dir.path().join(format!("{class}/a.png")), 8, 1);
    }
    fs::create_dir_all(dir.path().join("empty")).unwrap();
    fs::write(dir.path().join("mid/notes.txt"), "x").unwrap();
    let m = build_manifest(dir.path()).unwrap();
    assert_eq!(m.classes, ["Alpha", "empty", "mid", "zebra"]);
    assert_eq!(m.warnings.len(), 1);
    assert_eq!(m.skipped.len(), 1);
    for r in &m.records {
        assert_eq!(m.classes[r.class_index], r.class_name);
        assert!(m.path_of(r).is_file());
    }
}

#[test]
fn empty_root_is_an_ingestion_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(build_manifest(dir.path()), Err(Error::Ingestion(_))));
    fs::create_dir_all(dir.path().join("a")).unwrap();
    assert!(matches!(build_manifest(dir.path()), Err(Error::Ingestion(_))));
}

#[test]
fn manifest_csv_round_trips_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    write_position_fixture(dir.path(), 3, 4, 32, 5).unwrap();
    let m = build_manifest(dir.path()).unwrap();
    let m = stratified_split(&m, &SplitPolicy::ratio(0.5, 0.25, 3)).unwrap();
    let path = dir.path().join("manifest.csv");
    m.write_csv(&path).unwrap();
    let first = fs::read(&path).unwrap();
    assert!(first.starts_with(b"relative_path,class_name,class_index,split\n"));
    assert!(!first.contains(&b'\r'));
    let back = DatasetManifest::read_csv(&path, dir.path()).unwrap();
    assert_eq!(back.classes, m.classes);
    assert_eq!(back.records, m.records);
    back.write_csv(&path).unwrap();
    assert_eq!(fs::read(&path).unwrap(), first);
}

#[test]
fn batches_cover_the_split_once() {
    let dir = tempfile::tempdir().unwrap();
    write_position_fixture(dir.path(), 1, 7, 32, 1).unwrap();
    let m = stratified_split(&build_manifest(dir.path()).unwrap(), &SplitPolicy::ratio(1.0, 0.0, 0)).unwrap();
    let run = |seed| {
        batch_iterator(&m, Split::Train, 3, seed, Transform::eval())
            .unwrap()
            .map(|b| b.unwrap().record_ids)
            .collect::<Vec<_>>()
    };
    let batches = run(11);
    assert_eq!(batches.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 3, 1]);
    let seen: BTreeSet<usize> = batches.iter().flatten().copied().collect();
    assert_eq!(seen, m.split_indices(Split::Train).into_iter().collect());
    assert_eq!(run(11), batches);
    assert!(matches!(
        batch_iterator(&m, Split::Test, 3, 0, Transform::eval()),
        Err(Error::Iteration(_))
    ));
}

#[test]
fn parallel_workers_do_not_change_batches() {
    let dir = tempfile::tempdir().unwrap();
    write_position_fixture(dir.path(), 2, 5, 64, 2).unwrap();
    let m = stratified_split(&build_manifest(dir.path()).unwrap(), &SplitPolicy::ratio(1.0, 0.0, 0)).unwrap();
    let transform = Transform::Augment(AugmentConfig::for_regime(Regime::Extended));
    let collect = |workers| {
        batch_iterator(&m, Split::Train, 4, 9, transform.clone())
            .unwrap()
            .with_workers(workers)
            .unwrap()
            .map(|b| b.unwrap().images)
            .collect::<Vec<_>>()
    };
    assert_eq!(collect(1), collect(3));
}

/// Half-pixel-center bilinear resize evaluated in double precision.
fn reference_resize(img: &ImageTensor, side: usize) -> Vec<f64> {
    let (h, w) = (img.height(), img.width());
    let at = |y: isize, x: isize, c: usize| {
        let y = y.clamp(0, h as isize - 1) as usize;
        let x = x.clamp(0, w as isize - 1) as usize;
        img.get(y, x, c) as f64
    };
    let mut out = Vec::new();
    for i in 0..side {
        let fy = (i as f64 + 0.5) * h as f64 / side as f64 - 0.5;
        for j in 0..side {
            let fx = (j as f64 + 0.5) * w as f64 / side as f64 - 0.5;
            let (y0, x0) = (fy.floor(), fx.floor());
            let (dy, dx) = (fy - y0, fx - x0);
            let (y0, x0) = (y0 as isize, x0 as isize);
            for c in 0..3 {
                out.push(
                    at(y0, x0, c) * (1.0 - dy) * (1.0 - dx)
                        + at(y0, x0 + 1, c) * (1.0 - dy) * dx
                        + at(y0 + 1, x0, c) * dy * (1.0 - dx)
                        + at(y0 + 1, x0 + 1, c) * dy * dx,
                );
            }
        }
    }
    out
}

#[test]
fn eval_transform_upscales_then_crops_center() {
    let data = (0..224 * 224 * 3).map(|i| ((i * 7919) % 256) as f32).collect();
    let img = ImageTensor::new(224, 224, data).unwrap();
    let out = eval_transform(&img).unwrap();
    assert_eq!((out.height(), out.width()), (224, 224));
    let full = reference_resize(&img, 256);
    for y in 0..224 {
        for x in 0..224 {
            for c in 0..3 {
                let want = full[((y + 16) * 256 + x + 16) * 3 + c];
                assert!((out.get(y, x, c) as f64 - want).abs() <= 1e-3);
            }
        }
    }
    assert_eq!(eval_transform(&img).unwrap(), out);

    let src = ImageTensor::new(256, 256, (0..256 * 256 * 3).map(|i| (i % 251) as f32).collect()).unwrap();
    assert_eq!(eval_transform(&src).unwrap(), src.crop(16, 16, 224, 224).unwrap());
}

#[test]
fn double_flip_restores_crop() {
    let img = ImageTensor::new(256, 256, (0..256 * 256 * 3).map(|i| (i % 253) as f32).collect()).unwrap();
    let crop = augment(&img, &AugmentConfig::identity(), 4).unwrap();
    assert_eq!(crop.hflip().hflip(), crop);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn augmentation_keeps_shape_and_range(seed in any::<u64>(), extended in any::<bool>(), shade in 0u8..=255) {
        let data = (0..256 * 256 * 3).map(|i| ((i as u32 * 31 + shade as u32) % 256) as f32).collect();
        let img = ImageTensor::new(256, 256, data).unwrap();
        let regime = if extended { Regime::Extended } else { Regime::Basic };
        let cfg = AugmentConfig::for_regime(regime);
        let out = augment(&img, &cfg, seed).unwrap();
        prop_assert_eq!((out.height(), out.width()), (224, 224));
        let (lo, hi) = out.value_range();
        prop_assert!(lo >= 0.0 && hi <= 255.0);
        prop_assert_eq!(augment(&img, &cfg, seed).unwrap(), out);
    }
}
