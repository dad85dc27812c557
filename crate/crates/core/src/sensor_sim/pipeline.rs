use serde::{Deserialize, Serialize};

use super::degrade::{degrade, DegradeConfig};
use super::misalign::{apply_misalignment, MisalignReport};
use super::pan::{default_pan_weights, synthesize_pan};
use super::radiometry::{scene_to_radiance, scene_to_reflectance, SolarContext};
use super::resample::resample;
use super::{Mask, MaskSet};
use crate::error::{Error, Result};
use crate::raster::{
    tile_scene, BandStack, GeoRef, Patch, TileIndex, PATCH_BANDS, PATCH_SIZE, TARGET_GSD,
};

/// Input scene: 7-band L1C reflectances, scene-center georeference and optional masks.
#[derive(Debug, Clone)]
pub struct Scene {
    pub raster: BandStack,
    pub georef: GeoRef,
    pub masks: Option<MaskSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    #[serde(default = "default_target_gsd")]
    pub target_gsd: f64,
    /// PAN weights; bandwidth-proportional over the PAN pass band when absent.
    #[serde(default)]
    pub pan_weights: Option<Vec<f64>>,
    /// Drop chips whose unflagged fraction falls below this value. No filtering when absent.
    #[serde(default)]
    pub min_clear_fraction: Option<f64>,
}

fn default_target_gsd() -> f64 {
    TARGET_GSD
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            target_gsd: TARGET_GSD,
            pan_weights: None,
            min_clear_fraction: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedChip {
    pub patch: Patch,
    pub pan: BandStack,
    pub masks: MaskSet,
    pub origin: (usize, usize),
    pub cloud_fraction: f64,
    pub clear_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    /// Simulated L1C reflectances over the whole resampled scene.
    pub scene: BandStack,
    pub pan: BandStack,
    pub masks: MaskSet,
    pub index: TileIndex,
    pub misalignment: MisalignReport,
    pub chips: Vec<SimulatedChip>,
    /// Chips removed by the clear-fraction filter (their origins).
    pub dropped: Vec<(usize, usize)>,
}

/// reflectance -> radiance -> PAN -> resample -> misalign -> degrade -> reflectance -> chips.
pub fn simulate_l1c(
    scene: &Scene,
    ctx: &SolarContext,
    cfg: &DegradeConfig,
    seed: u64,
    options: &SimOptions,
) -> Result<Simulation> {
    if scene.raster.bands() != PATCH_BANDS {
        return Err(Error::dim(format!(
            "simulator expects {PATCH_BANDS} multispectral bands, got {}",
            scene.raster.bands()
        )));
    }
    ctx.validate()?;
    cfg.validate(PATCH_BANDS)?;

    let radiance = scene_to_radiance(&scene.raster, ctx)?;
    let weights = options
        .pan_weights
        .clone()
        .unwrap_or_else(default_pan_weights);
    let pan = synthesize_pan(&radiance, &weights)?;

    let radiance = resample(&radiance, options.target_gsd)?;
    let pan = resample(&pan, options.target_gsd)?;
    let (w, h) = (radiance.width(), radiance.height());
    if w < PATCH_SIZE || h < PATCH_SIZE {
        return Err(Error::dim(format!(
            "resampled scene {h}x{w} is smaller than one {PATCH_SIZE}px chip"
        )));
    }

    let (radiance, misalignment) = apply_misalignment(&radiance, cfg)?;
    let radiance = degrade(&radiance, cfg, seed)?;
    let reflectance = scene_to_reflectance(&radiance, ctx)?;

    let masks = match &scene.masks {
        Some(m) => {
            if (m.width(), m.height()) != (scene.raster.width(), scene.raster.height()) {
                return Err(Error::dim("masks must share the scene extent"));
            }
            m.map(|x| Ok(x.resample_nearest(w, h)))?
        }
        None => MaskSet::clear(w, h),
    };

    let mut georef = scene.georef.clone();
    georef.gsd = options.target_gsd;
    let tiling = tile_scene(&reflectance, &georef)?;
    let mut chips = Vec::new();
    let mut dropped = Vec::new();
    for (patch, &(r0, c0)) in tiling.patches.into_iter().zip(&tiling.index.placements) {
        let crop = |m: &Mask| m.crop(r0, c0, PATCH_SIZE, PATCH_SIZE);
        let chip_masks = masks.map(crop)?;
        let cloud_fraction = chip_masks.cloud.fraction();
        let clear_fraction = 1.0 - chip_masks.any().fraction();
        if let Some(min) = options.min_clear_fraction {
            if clear_fraction < min {
                dropped.push((r0, c0));
                continue;
            }
        }
        chips.push(SimulatedChip {
            patch,
            pan: pan.crop(r0, c0, PATCH_SIZE, PATCH_SIZE)?,
            masks: chip_masks,
            origin: (r0, c0),
            cloud_fraction,
            clear_fraction,
        });
    }

    Ok(Simulation {
        scene: reflectance,
        pan,
        masks,
        index: tiling.index,
        misalignment,
        chips,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::ms_band_ids;
    use chrono::NaiveDate;

    fn scene(w: usize, h: usize, gsd: f64) -> Scene {
        let raster = BandStack::from_fn(w, h, gsd, ms_band_ids(), |b, r, c| {
            (0.03 + 0.01 * b as f64 + 0.02 * ((r as f64 / 17.0).sin() * (c as f64 / 23.0).cos()))
                as f32
        })
        .unwrap();
        Scene {
            raster,
            georef: GeoRef::new(44.2, 9.5, gsd, NaiveDate::from_ymd_opt(2024, 8, 1).unwrap())
                .unwrap(),
            masks: None,
        }
    }

    #[test]
    fn neutral_pipeline_returns_input() {
        let s = scene(256, 256, TARGET_GSD);
        let sim = simulate_l1c(
            &s,
            &SolarContext::default(),
            &DegradeConfig::identity(7),
            0,
            &SimOptions::default(),
        )
        .unwrap();
        assert_eq!(sim.chips.len(), 1);
        let out = sim.chips[0].patch.raster();
        for (a, b) in out.data().iter().zip(s.raster.data()) {
            assert!((a - b).abs() < 1e-5);
        }
        assert_eq!(sim.chips[0].pan.bands(), 1);
        assert_eq!(out.bands(), 7);
    }

    #[test]
    fn large_scene_gives_four_chips() {
        let s = scene(512, 512, TARGET_GSD);
        let sim = simulate_l1c(
            &s,
            &SolarContext::default(),
            &DegradeConfig::identity(7),
            0,
            &SimOptions::default(),
        )
        .unwrap();
        assert_eq!(sim.chips.len(), 4);
        for c in &sim.chips {
            assert_eq!(c.patch.raster().gsd(), TARGET_GSD);
            assert_eq!(c.patch.georef().gsd, TARGET_GSD);
        }
    }

    #[test]
    fn ten_meter_scene_is_resampled() {
        // 122 px at 10 m covers 1220 m -> 257 px at 4.75 m
        let s = scene(122, 122, 10.0);
        let sim = simulate_l1c(
            &s,
            &SolarContext::default(),
            &DegradeConfig::identity(7),
            0,
            &SimOptions::default(),
        )
        .unwrap();
        assert_eq!(sim.scene.width(), 257);
        assert_eq!(sim.chips.len(), 1);
    }

    #[test]
    fn masks_follow_chips_and_filter() {
        let mut s = scene(512, 256, TARGET_GSD);
        let mut cloud = Mask::clear(512, 256);
        for r in 0..256 {
            for c in 256..512 {
                cloud.set(r, c, true);
            }
        }
        s.masks = Some(MaskSet::new(cloud, Mask::clear(512, 256), Mask::clear(512, 256)).unwrap());
        let sim = simulate_l1c(
            &s,
            &SolarContext::default(),
            &DegradeConfig::identity(7),
            0,
            &SimOptions::default(),
        )
        .unwrap();
        assert_eq!(sim.chips[0].cloud_fraction, 0.0);
        assert_eq!(sim.chips[1].cloud_fraction, 1.0);

        let opts = SimOptions {
            min_clear_fraction: Some(0.5),
            ..SimOptions::default()
        };
        let sim = simulate_l1c(
            &s,
            &SolarContext::default(),
            &DegradeConfig::identity(7),
            0,
            &opts,
        )
        .unwrap();
        assert_eq!(sim.chips.len(), 1);
        assert_eq!(sim.dropped, vec![(0, 256)]);
    }
}
