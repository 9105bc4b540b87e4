use candle_core::{DType, Device, Tensor};
use rpca::backbone::{BackboneInit, BackboneKind, BackboneSpec, IMAGENET_BGR_MEAN};
use rpca::gradcam::gradcam;
use rpca::imaging::ImageTensor;
use rpca::train::{build_model, Model, ModelVariant, VariantKind};
use rpca::Error;

const PATCH: usize = 32;
const GRID: usize = 7;

/// Patch intensities; several fall below the mean so their activation is
/// clipped to zero, and the maximum is unique.
fn intensities() -> [[f32; GRID]; GRID] {
    let mut v = [[0.0; GRID]; GRID];
    for (i, row) in v.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = ((i * 37 + j * 23) % 97) as f32 * 2.5;
        }
    }
    v[4][2] = 250.0;
    v
}

fn patch_image(v: &[[f32; GRID]; GRID]) -> ImageTensor {
    let side = PATCH * GRID;
    let mut img = ImageTensor::filled(side, side, [0.0; 3]);
    for y in 0..side {
        for x in 0..side {
            let p = v[y / PATCH][x / PATCH];
            for c in 0..3 {
                img.set(y, x, c, p);
            }
        }
    }
    img
}

/// One-channel tiny-conv backbone whose filter averages the patch; the
/// baseline head reads the spatial mean of that single channel.
fn fixture(class_weights: [f64; 2]) -> Model {
    let spec = BackboneSpec::new(BackboneKind::TinyConv).with_channels(1).unwrap();
    let variant = ModelVariant::new(VariantKind::Baseline, spec);
    let classes = vec!["other".to_string(), "target".to_string()];
    let model = build_model(&variant, classes, &BackboneInit::Seeded { seed: 0 }, 0, DType::F64).unwrap();
    let dev = Device::Cpu;
    let w = Tensor::full(1.0 / (3 * PATCH * PATCH) as f64, (1, 3, PATCH, PATCH), &dev).unwrap();
    model.set_parameter("backbone.conv.weight", &w).unwrap();
    model.set_parameter("backbone.conv.bias", &Tensor::zeros(1, DType::F64, &dev).unwrap()).unwrap();
    let dense = Tensor::from_vec(class_weights.to_vec(), (1, 2), &dev).unwrap();
    model.set_parameter("head.dense.weight", &dense).unwrap();
    model.set_parameter("head.dense.bias", &Tensor::zeros(2, DType::F64, &dev).unwrap()).unwrap();
    model
}

/// Activation of the averaging filter on a uniform patch of intensity `p`.
fn activation(p: f32) -> f64 {
    let mean: f64 = IMAGENET_BGR_MEAN.iter().map(|&m| p as f64 - m as f64).sum::<f64>() / 3.0;
    mean.max(0.0)
}

fn reference_bilinear(src: &[Vec<f64>], side: usize) -> Vec<f64> {
    let n = src.len();
    let coord = |i: usize| i as f64 * (n - 1) as f64 / (side - 1) as f64;
    let mut out = Vec::with_capacity(side * side);
    for i in 0..side {
        let y = coord(i);
        let (y0, dy) = (y.floor() as usize, y - y.floor());
        let y1 = (y0 + 1).min(n - 1);
        for j in 0..side {
            let x = coord(j);
            let (x0, dx) = (x.floor() as usize, x - x.floor());
            let x1 = (x0 + 1).min(n - 1);
            out.push(
                src[y0][x0] * (1.0 - dy) * (1.0 - dx)
                    + src[y0][x1] * (1.0 - dy) * dx
                    + src[y1][x0] * dy * (1.0 - dx)
                    + src[y1][x1] * dy * dx,
            );
        }
    }
    out
}

/// Known heatmap: the channel-0 activation map, resized and divided by its
/// maximum (its minimum is zero).
fn expected_heatmap() -> (Vec<f64>, (usize, usize)) {
    let v = intensities();
    let a: Vec<Vec<f64>> = v.iter().map(|row| row.iter().map(|&p| activation(p)).collect()).collect();
    assert!(a.iter().flatten().any(|&x| x == 0.0));
    let up = reference_bilinear(&a, PATCH * GRID);
    let max = up.iter().copied().fold(0.0, f64::max);
    (up.iter().map(|u| u / max).collect(), (4, 2))
}

#[test]
fn heatmap_equals_analytic_map() {
    let model = fixture([0.0, 1.0]);
    let image = patch_image(&intensities());
    let hm = gradcam(&model, &image, Some(1)).unwrap();
    let (want, peak) = expected_heatmap();
    assert!(!hm.all_zero);
    assert_eq!((hm.height, hm.width), (224, 224));
    let worst = hm.data.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-6, "max deviation {worst}");
    assert_eq!(hm.predicted_class, 1);
    let (y, x) = hm.argmax();
    let scale = (GRID - 1) as f64 / (PATCH * GRID - 1) as f64;
    assert_eq!(((y as f64 * scale).round() as usize, (x as f64 * scale).round() as usize), peak);
}

#[test]
fn defaults_to_predicted_class_and_is_deterministic() {
    let model = fixture([0.0, 1.0]);
    let image = patch_image(&intensities());
    let a = gradcam(&model, &image, None).unwrap();
    let b = gradcam(&model, &image, None).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.target_class, 1);
}

#[test]
fn zero_gradient_gives_flagged_zero_map() {
    let model = fixture([0.0, 0.0]);
    let hm = gradcam(&model, &patch_image(&intensities()), Some(1)).unwrap();
    assert!(hm.all_zero);
    assert!(hm.data.iter().all(|&v| v == 0.0));
}

#[test]
fn zero_activation_gives_flagged_zero_map() {
    let model = fixture([0.0, 1.0]);
    let hm = gradcam(&model, &ImageTensor::filled(224, 224, [0.0; 3]), Some(1)).unwrap();
    assert!(hm.all_zero);
}

#[test]
fn positive_weight_scaling_leaves_map_unchanged() {
    let image = patch_image(&intensities());
    let a = gradcam(&fixture([0.0, 1.0]), &image, Some(1)).unwrap();
    let b = gradcam(&fixture([0.0, 3.7]), &image, Some(1)).unwrap();
    let worst = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-6);
}

#[test]
fn projection_backbone_is_unsupported() {
    let spec = BackboneSpec::new(BackboneKind::RandomProjection);
    let variant = ModelVariant::new(VariantKind::Baseline, spec);
    let model = build_model(&variant, vec!["a".into(), "b".into()], &BackboneInit::Seeded { seed: 0 }, 0, DType::F32).unwrap();
    let err = gradcam(&model, &ImageTensor::filled(224, 224, [9.0; 3]), None).unwrap_err();
    assert!(matches!(err, Error::UnsupportedModel(_)), "{err}");
}
