use candle_core::{DType, Device, Tensor};
use candle_nn::{VarBuilder, VarMap};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpca::head::{
    channel_attention, global_pool, head_forward, region_pool, upsample_bilinear, HeadConfig, HeadParameters,
    PooledFeatures, Region, RegionSpec, Stage, GRID_SIDE,
};

/// Corner-aligned bilinear interpolation of one channel, evaluated cell by
/// cell from the four neighbouring samples.
fn reference_bilinear(src: &[Vec<f64>], side: usize) -> Vec<Vec<f64>> {
    let (h, w) = (src.len(), src[0].len());
    let coord = |i: usize, n: usize| {
        if side == 1 || n == 1 {
            0.0
        } else {
            i as f64 * (n - 1) as f64 / (side - 1) as f64
        }
    };
    let mut out = vec![vec![0.0; side]; side];
    for (i, row) in out.iter_mut().enumerate() {
        let y = coord(i, h);
        let y0 = y.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let dy = y - y0 as f64;
        for (j, cell) in row.iter_mut().enumerate() {
            let x = coord(j, w);
            let x0 = x.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let dx = x - x0 as f64;
            *cell = src[y0][x0] * (1.0 - dy) * (1.0 - dx)
                + src[y0][x1] * (1.0 - dy) * dx
                + src[y1][x0] * dy * (1.0 - dx)
                + src[y1][x1] * dy * dx;
        }
    }
    out
}

/// Nested-loop mean over each rectangle, per channel.
fn reference_pool(map: &[f64], c: usize, h: usize, w: usize, regions: &[Region]) -> Vec<Vec<f64>> {
    regions
        .iter()
        .map(|r| {
            (0..c)
                .map(|k| {
                    let mut sum = 0.0;
                    let mut n = 0usize;
                    for y in r.row0..r.row1 {
                        for x in r.col0..r.col1 {
                            sum += map[(k * h + y) * w + x];
                            n += 1;
                        }
                    }
                    sum / n as f64
                })
                .collect()
        })
        .collect()
}

fn random_map(rng: &mut ChaCha8Rng, shape: (usize, usize, usize, usize)) -> Vec<f64> {
    (0..shape.0 * shape.1 * shape.2 * shape.3).map(|_| rng.random_range(-3.0..3.0)).collect()
}

#[test]
fn bilinear_two_by_two_matches_reference() {
    let src = vec![vec![0.0, 1.0], vec![2.0, 3.0]];
    let t = Tensor::from_vec(vec![0.0f64, 1.0, 2.0, 3.0], (1, 1, 2, 2), &Device::Cpu).unwrap();
    let up = upsample_bilinear(&t, 32).unwrap();
    assert_eq!(up.dims(), &[1, 1, 32, 32]);
    let got = up.squeeze(0).unwrap().squeeze(0).unwrap().to_vec2::<f64>().unwrap();
    let want = reference_bilinear(&src, 32);
    for i in 0..32 {
        for j in 0..32 {
            assert!((got[i][j] - want[i][j]).abs() <= 1e-6, "cell ({i},{j})");
        }
    }
}

#[test]
fn bilinear_random_maps_match_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (h, w) in [(7, 7), (5, 3), (1, 4), (8, 8)] {
        let data = random_map(&mut rng, (1, 1, h, w));
        let src: Vec<Vec<f64>> = data.chunks(w).map(|r| r.to_vec()).collect();
        let t = Tensor::from_vec(data, (1, 1, h, w), &Device::Cpu).unwrap();
        let got = upsample_bilinear(&t, 32).unwrap().flatten_all().unwrap().to_vec1::<f64>().unwrap();
        let want: Vec<f64> = reference_bilinear(&src, 32).concat();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn one_by_one_map_broadcasts() {
    let t = Tensor::from_vec(vec![2.5f64], (1, 1, 1, 1), &Device::Cpu).unwrap();
    let up = upsample_bilinear(&t, 32).unwrap().flatten_all().unwrap().to_vec1::<f64>().unwrap();
    assert!(up.iter().all(|&v| v == 2.5));
}

#[test]
fn region_pool_matches_nested_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (c, h, w) = (2, 4, 4);
    let data = random_map(&mut rng, (1, c, h, w));
    let spec = RegionSpec::halves(4);
    let t = Tensor::from_vec(data.clone(), (1, c, h, w), &Device::Cpu).unwrap();
    let got = region_pool(&t, &spec).unwrap().tensor().squeeze(0).unwrap().to_vec2::<f64>().unwrap();
    let want = reference_pool(&data, c, h, w, spec.regions());
    for (gr, wr) in got.iter().zip(&want) {
        for (a, b) in gr.iter().zip(wr) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn region_pool_default_grid_matches_nested_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (c, s) = (3, GRID_SIDE);
    let data = random_map(&mut rng, (1, c, s, s));
    let spec = RegionSpec::default();
    let t = Tensor::from_vec(data.clone(), (1, c, s, s), &Device::Cpu).unwrap();
    let got = region_pool(&t, &spec).unwrap().tensor().squeeze(0).unwrap().to_vec2::<f64>().unwrap();
    let want = reference_pool(&data, c, s, s, spec.regions());
    for (gr, wr) in got.iter().zip(&want) {
        for (a, b) in gr.iter().zip(wr) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn attention_closed_forms() {
    let xs = [0.0, 3f64.ln(), 100.0, -100.0];
    let want = [0.0, 0.75 * 3f64.ln(), 100.0, 0.0];
    let t = Tensor::from_vec(xs.to_vec(), (1, 4, 1), &Device::Cpu).unwrap();
    let pooled = PooledFeatures::new(t, Stage::Pooled).unwrap();
    let got = channel_attention(&pooled).unwrap().tensor().flatten_all().unwrap().to_vec1::<f64>().unwrap();
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }
    assert!((got[1] - 0.8239592).abs() < 1e-7);
}

fn head_with(config: HeadConfig, seed: u64) -> (VarMap, HeadParameters) {
    let varmap = VarMap::new();
    let vb = VarBuilder::from_varmap(&varmap, DType::F64, &Device::Cpu);
    let head = HeadParameters::new(config, vb.pp("head")).unwrap();
    rpca::backbone::seeded_init(&varmap, "head", seed).unwrap();
    (varmap, head)
}

fn pipeline(map: &Tensor, spec: &RegionSpec, head: &HeadParameters) -> Vec<f64> {
    let pooled = region_pool(&upsample_bilinear(map, GRID_SIDE).unwrap(), spec).unwrap();
    let attended = channel_attention(&pooled).unwrap();
    head_forward(&attended, head, false, 0).unwrap().flatten_all().unwrap().to_vec1::<f64>().unwrap()
}

#[test]
fn constant_map_pipeline_is_scale_free() {
    let c = 3;
    let config = HeadConfig {
        num_regions: 4,
        channels: c,
        num_classes: 4,
        dropout: Some(0.5),
        layer_norm: true,
        hidden: None,
    };
    let (_vm, head) = head_with(config, 3);
    let values: Vec<f64> = (0..c).map(|k| 0.3 + k as f64).collect();
    let big: Vec<f64> = values.iter().flat_map(|&v| std::iter::repeat_n(v, 49)).collect();
    let big = Tensor::from_vec(big, (1, c, 7, 7), &Device::Cpu).unwrap();
    let small = Tensor::from_vec(values, (1, c, 1, 1), &Device::Cpu).unwrap();
    let spec = RegionSpec::default();
    let a = pipeline(&big, &spec, &head);
    let b = pipeline(&small, &spec, &head);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-6);
    }
}

fn map_strategy(c: usize, h: usize, w: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, c * h * w)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn full_frame_region_is_gap(data in map_strategy(3, 6, 5)) {
        let t = Tensor::from_vec(data, (1, 3, 6, 5), &Device::Cpu).unwrap();
        let spec = RegionSpec::new(vec![Region::new(0, 6, 0, 5)]).unwrap();
        let a = region_pool(&t, &spec).unwrap().tensor().flatten_all().unwrap().to_vec1::<f64>().unwrap();
        let b = global_pool(&t).unwrap().tensor().flatten_all().unwrap().to_vec1::<f64>().unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn attention_shape_properties(x in -200.0f64..200.0, y in 0.0f64..50.0) {
        let f = rpca::head::attention_gate;
        prop_assert!(f(x).abs() <= x.abs());
        prop_assert_eq!(f(x) < 0.0, x < 0.0);
        prop_assert!(f(y + 0.01) >= f(y));
    }

    #[test]
    fn softmax_output_is_a_distribution(data in map_strategy(4, 3, 3), seed in 0u64..1000) {
        let config = HeadConfig { num_regions: 4, channels: 4, num_classes: 6, dropout: Some(0.5), layer_norm: true, hidden: None };
        let (_vm, head) = head_with(config, seed);
        let t = Tensor::from_vec(data, (1, 4, 3, 3), &Device::Cpu).unwrap();
        let p = pipeline(&t, &RegionSpec::default(), &head);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        prop_assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn region_permutation_equivariance(data in map_strategy(2, 4, 4), perm_seed in 0u64..100) {
        let c = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
        let mut perm: Vec<usize> = (0..4).collect();
        for i in (1..4).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let spec = RegionSpec::default();
        let permuted = spec.permuted(&perm).unwrap();
        let t = Tensor::from_vec(data, (1, c, 4, 4), &Device::Cpu).unwrap();
        let up = upsample_bilinear(&t, GRID_SIDE).unwrap();
        let rows = region_pool(&up, &spec).unwrap().tensor().squeeze(0).unwrap().to_vec2::<f64>().unwrap();
        let prows = region_pool(&up, &permuted).unwrap().tensor().squeeze(0).unwrap().to_vec2::<f64>().unwrap();
        for (i, &p) in perm.iter().enumerate() {
            prop_assert_eq!(&prows[i], &rows[p]);
        }

        // No layer norm: its per-element gain/bias would also need permuting.
        let config = HeadConfig { num_regions: 4, channels: c, num_classes: 3, dropout: None, layer_norm: false, hidden: None };
        let (_a, head) = head_with(config.clone(), 9);
        let w = head.dense_weights.to_vec2::<f64>().unwrap();
        let mut pw = Vec::new();
        for &p in &perm {
            for k in 0..c {
                pw.extend_from_slice(&w[p * c + k]);
            }
        }
        let (pvm, phead) = head_with(config, 9);
        let dense = Tensor::from_vec(pw, (4 * c, 3), &Device::Cpu).unwrap();
        pvm.data().lock().unwrap().get("head.dense.weight").unwrap().set(&dense).unwrap();
        let a = pipeline(&t, &spec, &head);
        let b = pipeline(&t, &permuted, &phead);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn upsample_preserves_constants(v in -10.0f64..10.0, h in 1usize..9, w in 1usize..9) {
        let t = Tensor::from_vec(vec![v; h * w], (1, 1, h, w), &Device::Cpu).unwrap();
        let up = upsample_bilinear(&t, 32).unwrap().flatten_all().unwrap().to_vec1::<f64>().unwrap();
        prop_assert!(up.iter().all(|&u| (u - v).abs() <= 1e-12));
    }
}
