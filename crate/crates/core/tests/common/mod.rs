#![allow(dead_code)]

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seawatch::dataset::{split, window_samples, NormStats, SplitSpec, TargetTransform};
use seawatch::raster::{ms_band_ids, tile_scene, TARGET_GSD};
use seawatch::regressor::{train_regressor, MlpParams, Regressor, TrainConfig};
use seawatch::sensor_sim::{generate_synthetic_scene, SceneSpec, SyntheticScene};
use seawatch::{BandStack, GeoRef, Parameter, Patch};

pub fn date() -> chrono::NaiveDate {
    chrono::NaiveDate::from_ymd_opt(2024, 7, 1).unwrap()
}

pub fn georef() -> GeoRef {
    GeoRef::new(44.1, 9.8, TARGET_GSD, date()).unwrap()
}

pub fn scene_spec(width: usize, height: usize) -> SceneSpec {
    serde_json::from_value(serde_json::json!({
        "width": width, "height": height, "center_lat": 44.1, "center_lon": 9.8,
        "acquisition_date": "2024-07-01",
        "turbidity": {"base": 6.0, "gradient": [0.004, -0.003],
                      "random_waves": {"count": 6, "amplitude": 2.0, "min_wavelength_px": 80, "max_wavelength_px": 600},
                      "min": 0.0},
        "ph": {"base": 8.1, "random_waves": {"count": 4, "amplitude": 0.15, "min_wavelength_px": 100, "max_wavelength_px": 700}}
    }))
    .unwrap()
}

pub fn scene(width: usize, height: usize, seed: u64) -> SyntheticScene {
    generate_synthetic_scene(&scene_spec(width, height), seed).unwrap()
}

pub fn scene_patches(width: usize, height: usize, seed: u64) -> Vec<Patch> {
    let s = scene(width, height, seed);
    tile_scene(&s.raster, &s.georef).unwrap().patches
}

/// Patch with independent uniform reflectances in [lo, hi).
pub fn random_patch(seed: u64, lo: f32, hi: f32) -> Patch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = BandStack::from_fn(256, 256, TARGET_GSD, ms_band_ids(), |_, _, _| {
        rng.random_range(lo..hi)
    })
    .unwrap();
    Patch::new(r, georef()).unwrap()
}

/// Small regressor trained briefly on a synthetic scene.
pub fn quick_regressor(parameter: Parameter, dims: &[usize], epochs: usize) -> Regressor {
    let s = scene(512, 512, 3);
    let samples = window_samples(&s, parameter, "q").unwrap();
    let parts = split(&samples, &SplitSpec::with_seed(0)).unwrap();
    let cfg = TrainConfig {
        epochs,
        layer_dims: dims.to_vec(),
        batch_size: 128,
        seed: 2,
        ..TrainConfig::default()
    };
    train_regressor(&parts.train, &parts.val, &cfg, TargetTransform::Identity)
        .unwrap()
        .regressor
}

/// Untrained weights with randomized, populated batch-norm statistics.
pub fn random_regressor(parameter: Parameter, dims: &[usize], seed: u64) -> Regressor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = MlpParams::<f32>::new(dims, seed).unwrap();
    for n in &mut params.norms {
        let k = n.gamma.len();
        n.gamma = Array1::from_shape_simple_fn(k, || rng.random_range(0.5..1.5));
        n.beta = Array1::from_shape_simple_fn(k, || rng.random_range(-0.2..0.2));
        n.running_mean = Array1::from_shape_simple_fn(k, || rng.random_range(-0.5..0.5));
        n.running_var = Array1::from_shape_simple_fn(k, || rng.random_range(0.5..2.0));
    }
    params.bn_updates = 1;
    let mut norm = NormStats::identity();
    norm.feature_mean = [0.065, 0.055, 0.045, 0.035, 0.028, 0.024, 0.02];
    norm.feature_std = [0.004, 0.005, 0.006, 0.005, 0.004, 0.003, 0.003];
    norm.target_mean = 6.0;
    norm.target_std = 2.0;
    Regressor {
        parameter,
        params,
        norm,
        provenance: Default::default(),
    }
}

/// Exact linear inverse of the synthetic band mixing for `parameter`, as a [7, 1] regressor.
pub fn analytic_regressor(parameter: Parameter, mixing: &seawatch::sensor_sim::Mixing) -> Regressor {
    let (g, h) = (&mixing.turbidity_gain, &mixing.ph_gain);
    let dot = |a: &[f64; 7], b: &[f64; 7]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (gg, hh, gh) = (dot(g, g), dot(h, h), dot(g, h));
    let det = gg * hh - gh * gh;
    // rows of (G^T G)^-1 G^T
    let row: [f64; 7] = match parameter {
        Parameter::Turbidity => std::array::from_fn(|b| (hh * g[b] - gh * h[b]) / det),
        Parameter::Ph => std::array::from_fn(|b| (gg * h[b] - gh * g[b]) / det),
    };
    let mut bias = -dot(&row, &mixing.offset);
    if parameter == Parameter::Ph {
        bias += mixing.ph_reference;
    }
    let mut params = MlpParams::<f32>::new(&[7, 1], 0).unwrap();
    // weights act on standardized inputs with std 0.01, mean 0
    let mut norm = NormStats::identity();
    norm.feature_std = [0.01; 7];
    params.dense[0].weight = ndarray::Array2::from_shape_fn((1, 7), |(_, b)| (row[b] * 0.01) as f32);
    params.dense[0].bias = ndarray::Array1::from(vec![bias as f32]);
    params.bn_updates = 1;
    Regressor {
        parameter,
        params,
        norm,
        provenance: Default::default(),
    }
}
