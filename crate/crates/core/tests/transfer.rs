mod common;

use common::*;
use ndarray::Array2;
use seawatch::dataset::NormStats;
use seawatch::raster::{ms_band_ids, window_average, GRID, TARGET_GSD};
use seawatch::regressor::{MlpParams, Regressor, DEFAULT_LAYER_DIMS};
use seawatch::transfer::{
    fc_reference_map, fc_to_cnn, infer_patches, verify_equivalence, ConvNet, AVERAGING_WEIGHT,
};
use seawatch::{BandStack, Error, Parameter, Patch};

fn band_selector(band: usize) -> Regressor {
    let mut params = MlpParams::<f32>::new(&[7, 1], 0).unwrap();
    params.dense[0].weight = Array2::from_shape_fn((1, 7), |(_, j)| (j == band) as u8 as f32);
    params.bn_updates = 1;
    Regressor {
        parameter: Parameter::Turbidity,
        params,
        norm: NormStats::identity(),
        provenance: Default::default(),
    }
}

#[test]
fn identity_transfer_yields_window_means() {
    let patch = random_patch(4, 0.0, 0.2);
    let means = window_average(patch.raster(), 10).unwrap();
    for band in 0..7 {
        let net = fc_to_cnn(&band_selector(band)).unwrap();
        let map = net.infer_patch(&patch).unwrap();
        for r in 0..GRID {
            for c in 0..GRID {
                let d = (map.get(r, c) - means.get(band, r, c)).abs();
                assert!(d < 1e-7, "band {band} ({r},{c}) off by {d}");
            }
        }
    }
}

#[test]
fn full_size_architecture_shape() {
    let reg = random_regressor(Parameter::Ph, &DEFAULT_LAYER_DIMS, 1);
    let net = fc_to_cnn(&reg).unwrap();
    assert_eq!(net.depth(), reg.params.n_dense() + 1);
    assert_eq!(net.channel_chain(), DEFAULT_LAYER_DIMS.to_vec());
    assert_eq!(net.layer0.weight, AVERAGING_WEIGHT);
    assert!(!net.layers.last().unwrap().relu);
    assert!(net.layers[..net.layers.len() - 1].iter().all(|l| l.relu));
    for p in [random_patch(1, 0.0, 0.1), random_patch(2, 0.02, 0.08)] {
        let m = net.infer_patch(&p).unwrap();
        assert_eq!(m.values.len(), 625);
        assert_eq!(m.window_gsd, 47.5);
    }
}

#[test]
fn equivalence_on_scene_patches() {
    let reg = random_regressor(Parameter::Turbidity, &DEFAULT_LAYER_DIMS, 7);
    let net = fc_to_cnn(&reg).unwrap();
    let patches = scene_patches(512, 512, 11);
    let rep = verify_equivalence(&reg, &net, &patches, 1e-4).unwrap();
    assert_eq!(rep.n_cells, 4 * 625);
    assert!(rep.passed && !rep.vacuous, "{rep:?}");
}

#[test]
fn trained_regressor_equivalence() {
    let reg = quick_regressor(Parameter::Ph, &[7, 64, 32, 1], 3);
    let net = fc_to_cnn(&reg).unwrap();
    let patches = scene_patches(512, 512, 5);
    let rep = verify_equivalence(&reg, &net, &patches, 1e-4).unwrap();
    assert!(rep.passed, "{rep:?}");
}

#[test]
fn perturbed_weight_fails_and_is_located() {
    let reg = random_regressor(Parameter::Turbidity, &[7, 16, 8, 1], 3);
    let mut net = fc_to_cnn(&reg).unwrap();
    net.layers[0].weight[[2, 3]] += 1e-2 / AVERAGING_WEIGHT;
    let patches = vec![random_patch(8, 0.0, 0.1), random_patch(9, 0.0, 0.1)];
    let rep = verify_equivalence(&reg, &net, &patches, 1e-4).unwrap();
    assert!(!rep.passed);
    let w = rep.worst.unwrap();
    assert!(w.patch < 2 && w.row < GRID && w.col < GRID);
    assert!(((w.cnn - w.fc).abs() - rep.max_abs_deviation).abs() < 1e-12);
}

#[test]
fn empty_patch_list_is_vacuous() {
    let reg = random_regressor(Parameter::Ph, &[7, 4, 1], 0);
    let net = fc_to_cnn(&reg).unwrap();
    let rep = verify_equivalence(&reg, &net, &[], 1e-4).unwrap();
    assert!(rep.passed && rep.vacuous && rep.n_cells == 0);
    assert!(rep.worst.is_none());
}

#[test]
fn constant_patch_gives_constant_map() {
    let reg = random_regressor(Parameter::Ph, &[7, 32, 16, 1], 5);
    let net = fc_to_cnn(&reg).unwrap();
    let value = [0.06f32, 0.05, 0.04, 0.03, 0.03, 0.02, 0.02];
    let r = BandStack::from_fn(256, 256, TARGET_GSD, ms_band_ids(), |b, _, _| value[b]).unwrap();
    let map = net.infer_patch(&Patch::new(r, georef()).unwrap()).unwrap();
    let fc = reg.predict_features(&[value.map(f64::from)]).unwrap()[0];
    for &v in &map.values {
        assert_eq!(v, map.values[0]);
        assert!((v as f64 - fc).abs() < 1e-4);
    }
}

#[test]
fn block_constant_patch_matches_block_oracle() {
    let reg = random_regressor(Parameter::Turbidity, &[7, 32, 16, 1], 6);
    let net = fc_to_cnn(&reg).unwrap();
    let block = |b: usize, i: usize, j: usize| 0.02 + 0.001 * ((i * 7 + j * 3 + b * 5) % 31) as f32;
    let r = BandStack::from_fn(256, 256, TARGET_GSD, ms_band_ids(), |b, r, c| {
        block(b, (r / 10).min(GRID - 1), (c / 10).min(GRID - 1))
    })
    .unwrap();
    let map = net.infer_patch(&Patch::new(r, georef()).unwrap()).unwrap();
    for i in 0..GRID {
        for j in 0..GRID {
            let x: [f64; 7] = std::array::from_fn(|b| block(b, i, j) as f64);
            let fc = reg.predict_features(&[x]).unwrap()[0];
            assert!((map.get(i, j) as f64 - fc).abs() < 1e-4, "({i},{j})");
        }
    }
}

#[test]
fn ten_pixel_shift_moves_one_cell() {
    let reg = random_regressor(Parameter::Ph, &[7, 16, 1], 2);
    let net = fc_to_cnn(&reg).unwrap();
    let big = scene(512, 512, 9).raster;
    let a = Patch::new(big.crop(0, 0, 256, 256).unwrap(), georef()).unwrap();
    let b = Patch::new(big.crop(10, 10, 256, 256).unwrap(), georef()).unwrap();
    let (ma, mb) = (net.infer_patch(&a).unwrap(), net.infer_patch(&b).unwrap());
    for i in 0..GRID - 1 {
        for j in 0..GRID - 1 {
            assert_eq!(mb.get(i, j), ma.get(i + 1, j + 1));
        }
    }
}

#[test]
fn deterministic_and_parallel_consistent() {
    let reg = random_regressor(Parameter::Ph, &[7, 32, 1], 2);
    let net = fc_to_cnn(&reg).unwrap();
    let patches: Vec<Patch> = (0..6).map(|s| random_patch(s, 0.0, 0.1)).collect();
    let serial = infer_patches(&net, &patches, 1).unwrap();
    let parallel = infer_patches(&net, &patches, 3).unwrap();
    assert_eq!(serial, parallel);
    assert_eq!(serial[0], net.infer_patch(&patches[0]).unwrap());
}

#[test]
fn overflow_reports_layer() {
    let reg = random_regressor(Parameter::Ph, &[7, 8, 4, 1], 2);
    let mut net = fc_to_cnn(&reg).unwrap();
    net.layers[1].weight.fill(3e38);
    net.layers[1].bias.fill(3e38);
    let err = net.infer_patch(&random_patch(0, 0.0, 0.1)).unwrap_err();
    assert!(matches!(err, Error::Numeric { layer: 2, .. }), "{err}");
}

#[test]
fn cnn1_round_trip_and_corruption() {
    let reg = random_regressor(Parameter::Turbidity, &[7, 16, 8, 1], 4);
    let mut net = fc_to_cnn(&reg).unwrap();
    net.equivalence_report_sha256 = Some("ab".repeat(32));
    let bytes = net.encode().unwrap();
    assert_eq!(&bytes[..4], b"CNN1");
    let back = ConvNet::decode(&bytes).unwrap();
    assert_eq!(back, net);

    let mut flipped = bytes.clone();
    *flipped.last_mut().unwrap() ^= 1;
    let err = ConvNet::decode(&flipped).unwrap_err();
    assert!(matches!(&err, Error::Invariant(m) if m.contains("checksum")), "{err}");
    let err = ConvNet::decode(&bytes[..bytes.len() - 4]).unwrap_err();
    assert!(matches!(&err, Error::Invariant(m) if m.contains("blob length")), "{err}");

    let mut bad = net.clone();
    bad.layer0.weight = 0.011;
    assert!(matches!(bad.encode(), Err(Error::Invariant(m)) if m.contains("layer0")));
}

#[test]
fn fc_reference_uses_window_means() {
    let reg = band_selector(3);
    let p = random_patch(3, 0.0, 1.0);
    let fc = fc_reference_map(&reg, &p).unwrap();
    let expect = window_average(p.raster(), 10).unwrap();
    assert_eq!(fc[26] as f32, expect.get(3, 1, 1));
}
