use candle_core::DType;
use proptest::prelude::*;
use rpca::backbone::{
    architecture_params, deprocess, preprocess, Backbone, BackboneInit, BackboneKind, BackboneSpec, PreprocessMode,
};
use rpca::imaging::ImageTensor;
use rpca::train::{build_model, ModelVariant, VariantKind};

fn noise_image(seed: u32) -> ImageTensor {
    let data = (0..224 * 224 * 3)
        .map(|i: u32| ((i.wrapping_mul(2_654_435_761).wrapping_add(seed.wrapping_mul(40_503))) % 256) as f32)
        .collect();
    ImageTensor::new(224, 224, data).unwrap()
}

fn classes(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("class{i:02}")).collect()
}

#[test]
fn backbone_parameter_counts_within_five_percent() {
    for kind in BackboneKind::PRETRAINED {
        let spec = BackboneSpec::new(kind);
        let reference = kind.reference_params_millions().unwrap();
        let counted = architecture_params(&spec).unwrap().total() as f64 / 1e6;
        let rel = (counted - reference).abs() / reference;
        eprintln!("{kind}: {counted:.3}M vs {reference}M ({:.2}%)", rel * 100.0);
        assert!(rel <= 0.05, "{kind}: {counted:.3}M vs {reference}M");
        assert!((spec.base_param_count - reference).abs() / reference <= 0.05);
    }
}

#[test]
fn baseline_model_size_matches_reference_column() {
    for kind in BackboneKind::PRETRAINED {
        let variant = ModelVariant::new(VariantKind::Baseline, BackboneSpec::new(kind));
        let model = build_model(&variant, classes(50), &BackboneInit::Deferred, 0, DType::F32).unwrap();
        let reg = model.registry();
        let c = kind.default_channels();
        assert_eq!(reg.head_total(), c * 50 + 50);
        let reference = kind.reference_params_millions().unwrap();
        assert!((reg.millions() - reference).abs() / reference <= 0.05, "{kind}: {}", reg.millions());
    }
}

#[test]
fn output_shapes_and_channels() {
    let expected = [
        (BackboneKind::Resnet50, (2048, 7, 7)),
        (BackboneKind::Mobilenetv2, (1280, 7, 7)),
        (BackboneKind::Xception, (2048, 7, 7)),
        (BackboneKind::Inceptionv3, (2048, 5, 5)),
    ];
    for (kind, (c, h, w)) in expected {
        let variant = ModelVariant::new(VariantKind::Baseline, BackboneSpec::new(kind));
        let model = build_model(&variant, classes(3), &BackboneInit::Seeded { seed: 1 }, 0, DType::F32).unwrap();
        let xs = model.input_tensor(&[noise_image(1)]).unwrap();
        let f = model.features(&xs, false, false).unwrap();
        assert_eq!(f.dims(), &[1, c, h, w], "{kind}");
        assert_eq!(c, model.variant().backbone.feature_channels);
    }
}

#[test]
fn batching_does_not_change_inference() {
    for kind in [BackboneKind::Mobilenetv2, BackboneKind::TinyConv] {
        let spec = BackboneSpec::new(kind);
        let variant = ModelVariant::new(VariantKind::Baseline, spec.clone());
        let model = build_model(&variant, classes(3), &BackboneInit::Seeded { seed: 2 }, 0, DType::F32).unwrap();
        let images: Vec<ImageTensor> = (0..3).map(noise_image).collect();
        let pre: Vec<ImageTensor> = images.iter().map(|i| preprocess(i, spec.preprocessing).unwrap()).collect();
        let backbone: &Backbone = model.backbone();
        let batch = backbone.extract_features(&pre, false, DType::F32).unwrap();
        for (i, img) in pre.iter().enumerate() {
            let single = backbone.extract_features(std::slice::from_ref(img), false, DType::F32).unwrap();
            let a = batch.get(i).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
            let b = single.flatten_all().unwrap().to_vec1::<f32>().unwrap();
            assert_eq!(a, b, "{kind} image {i}");
        }
        let again = backbone.extract_features(&pre, false, DType::F32).unwrap();
        assert_eq!(
            again.flatten_all().unwrap().to_vec1::<f32>().unwrap(),
            batch.flatten_all().unwrap().to_vec1::<f32>().unwrap()
        );
    }
}

#[test]
fn unpreprocessed_input_rejected() {
    let spec = BackboneSpec::new(BackboneKind::TinyConv);
    let variant = ModelVariant::new(VariantKind::Baseline, spec);
    let model = build_model(&variant, classes(2), &BackboneInit::Seeded { seed: 0 }, 0, DType::F32).unwrap();
    assert!(model.backbone().extract_features(&[noise_image(0)], false, DType::F32).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn preprocessing_round_trips(pixels in prop::collection::vec(0u8..=255, 12)) {
        let img = ImageTensor::new(2, 2, pixels.iter().map(|&p| p as f32).collect()).unwrap();
        for mode in [PreprocessMode::BgrZeroCenter, PreprocessMode::ScaleSignedUnit] {
            let back = deprocess(&preprocess(&img, mode).unwrap(), mode).unwrap();
            for (a, b) in back.data().iter().zip(img.data()) {
                prop_assert!((a - b).abs() <= 1e-4, "{mode:?}: {a} vs {b}");
            }
        }
    }
}
