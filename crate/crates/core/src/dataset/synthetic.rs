//! Corpus builders over synthetic scenes with known ground truth.

use chrono::Duration;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::matching::{grid_features, Sample};
use super::records::InSituRecord;
use crate::error::{Error, Result};
use crate::parameter::Parameter;
use crate::raster::{tile_scene, window_average, GRID, PATCH_SIZE, WINDOW};
use crate::sensor_sim::SyntheticScene;

/// Cloud fraction at or above which a window is excluded.
pub const MAX_WINDOW_CLOUD_FRACTION: f64 = 0.5;

/// Patch ids follow `{scene_id}_p{k}` in tiling order.
pub fn patch_id(scene_id: &str, k: usize) -> String {
    format!("{scene_id}_p{k}")
}

/// One sample per clear 10x10 window of every patch, targeted at the window-mean truth.
pub fn window_samples(
    scene: &SyntheticScene,
    parameter: Parameter,
    scene_id: &str,
) -> Result<Vec<Sample>> {
    let tiling = tile_scene(&scene.raster, &scene.georef)?;
    let truth = scene.truth.patch_grids(parameter, &tiling.index)?;
    let cloud = scene.masks.any();
    let mut out = Vec::with_capacity(tiling.patches.len() * GRID * GRID);
    for (k, ((patch, grid_t), &(r0, c0))) in tiling
        .patches
        .iter()
        .zip(&truth)
        .zip(&tiling.index.placements)
        .enumerate()
    {
        let grid = window_average(patch.raster(), WINDOW)?;
        for r in 0..GRID {
            for c in 0..GRID {
                let flagged = cloud
                    .crop(r0 + r * WINDOW, c0 + c * WINDOW, WINDOW, WINDOW)?
                    .fraction();
                if flagged >= MAX_WINDOW_CLOUD_FRACTION {
                    continue;
                }
                out.push(Sample {
                    features: grid_features(&grid, r, c),
                    target: grid_t.get(0, r, c) as f64,
                    parameter,
                    patch_id: patch_id(scene_id, k),
                    window: (r, c),
                    station_id: format!("{scene_id}_w{k}_{r}_{c}"),
                    date: scene.georef.acquisition_date,
                });
            }
        }
    }
    Ok(out)
}

/// Add zero-mean Gaussian noise of standard deviation `sd` to every target.
pub fn add_label_noise(samples: &mut [Sample], sd: f64, seed: u64) -> Result<()> {
    if sd == 0.0 {
        return Ok(());
    }
    let normal =
        Normal::new(0.0, sd).map_err(|e| Error::invalid(format!("label noise sd {sd}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in samples {
        s.target += normal.sample(&mut rng);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StationPlan {
    pub stations: usize,
    /// Dates are drawn uniformly in acquisition +/- this many days.
    pub max_day_offset: i64,
    /// Fraction of stations that also report a deeper sample (removed by `select_surface`).
    pub deep_fraction: f64,
    pub label_noise: f64,
}

impl Default for StationPlan {
    fn default() -> Self {
        Self {
            stations: 200,
            max_day_offset: 2,
            deep_fraction: 0.2,
            label_noise: 0.0,
        }
    }
}

/// Emulated station network: each station sits at the center of a distinct window, and
/// its surface value is the window-mean truth (plus optional noise).
pub fn synthetic_records(
    scene: &SyntheticScene,
    parameter: Parameter,
    plan: &StationPlan,
    seed: u64,
) -> Result<Vec<InSituRecord>> {
    let tiling = tile_scene(&scene.raster, &scene.georef)?;
    let truth = scene.truth.patch_grids(parameter, &tiling.index)?;
    let mut slots: Vec<(usize, usize, usize)> = (0..tiling.patches.len())
        .flat_map(|k| (0..GRID).flat_map(move |r| (0..GRID).map(move |c| (k, r, c))))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    slots.shuffle(&mut rng);
    let noise = if plan.label_noise > 0.0 {
        Some(Normal::new(0.0, plan.label_noise).map_err(|e| Error::invalid(e.to_string()))?)
    } else {
        None
    };
    let half = PATCH_SIZE as f64 / 2.0;
    let mut out = Vec::new();
    for (i, &(k, r, c)) in slots.iter().take(plan.stations).enumerate() {
        let g = tiling.patches[k].georef();
        let center = |w: usize| (w * WINDOW) as f64 + WINDOW as f64 / 2.0 - half;
        let moved = g.offset(center(c) * g.gsd, -center(r) * g.gsd);
        let date = g.acquisition_date
            + Duration::days(rng.random_range(-plan.max_day_offset..=plan.max_day_offset));
        let mut value = truth[k].get(0, r, c) as f64;
        if let Some(n) = &noise {
            value += n.sample(&mut rng);
        }
        let value = clamp_to_range(parameter, value);
        let record = InSituRecord {
            station_id: format!("ST{i:04}"),
            municipality: "Synthetic".into(),
            location_name: format!("window {k}/{r}/{c}"),
            distance_from_coast_m: 100.0 + 10.0 * i as f64,
            date,
            depth_m: 0.5,
            parameter,
            value,
            lat: moved.center_lat,
            lon: moved.center_lon,
        };
        if rng.random_bool(plan.deep_fraction.clamp(0.0, 1.0)) {
            out.push(InSituRecord {
                depth_m: 5.0,
                value: clamp_to_range(parameter, value * 0.8),
                ..record.clone()
            });
        }
        out.push(record);
    }
    Ok(out)
}

fn clamp_to_range(parameter: Parameter, v: f64) -> f64 {
    match parameter {
        Parameter::Turbidity => v.max(0.0),
        Parameter::Ph => v.clamp(0.0, 14.0),
    }
}
