use super::map::{threshold, window_cloud_fractions, AlertMap};
use super::message::AlertMessage;
use super::policy::ThresholdPolicy;
use crate::error::Result;
use crate::raster::{mosaic, tile_scene, BandStack, GeoRef, TileIndex, GRID, PATCH_SIZE, WINDOW};
use crate::sensor_sim::Mask;
use crate::transfer::{infer_patches, ContaminantMap, ConvNet};

/// Band order of the alert mosaic.
pub const ALERT_BANDS: [&str; 2] = ["alert", "invalid"];

#[derive(Debug, Clone)]
pub struct SceneAlerts {
    pub index: TileIndex,
    pub maps: Vec<ContaminantMap>,
    pub alert_maps: Vec<AlertMap>,
    /// Ordered by patch index.
    pub messages: Vec<AlertMessage>,
    /// Two u8-valued bands (`ALERT_BANDS`) at window resolution.
    pub mosaic: BandStack,
}

/// Threshold each patch map; `clouds[k]` holds per-window cloud fractions of patch k.
pub fn alert_maps(
    maps: &[ContaminantMap],
    clouds: &[Option<Vec<f64>>],
    policy: &ThresholdPolicy,
) -> Result<Vec<AlertMap>> {
    maps.iter()
        .enumerate()
        .map(|(k, m)| threshold(m, policy, clouds.get(k).and_then(|c| c.as_deref())))
        .collect()
}

pub fn mosaic_alerts(alerts: &[AlertMap], index: &TileIndex, window_gsd: f64) -> Result<BandStack> {
    let ids: Vec<String> = ALERT_BANDS.iter().map(|s| s.to_string()).collect();
    let grids = alerts
        .iter()
        .map(|a| {
            let mut data: Vec<f32> = a.cells.iter().map(|&c| c as f32).collect();
            data.extend(a.invalid.iter().map(|&i| i as u8 as f32));
            BandStack::new(GRID, GRID, window_gsd, ids.clone(), data)
        })
        .collect::<Result<Vec<_>>>()?;
    mosaic(&grids, index)
}

fn messages(
    scene_id: &str,
    maps: &[ContaminantMap],
    alerts: &[AlertMap],
    policy: &ThresholdPolicy,
) -> Vec<AlertMessage> {
    maps.iter()
        .zip(alerts)
        .enumerate()
        .filter_map(|(k, (m, a))| {
            AlertMessage::from_patch(scene_id, k, m, a, policy.min_exceed_fraction)
        })
        .collect()
}

/// Alerts over precomputed patch maps laid out by `index`.
pub fn alerts_from_maps(
    scene_id: &str,
    maps: Vec<ContaminantMap>,
    clouds: &[Option<Vec<f64>>],
    index: TileIndex,
    policy: &ThresholdPolicy,
) -> Result<SceneAlerts> {
    super::message::check_id("scene_id", scene_id)?;
    let alert_maps = alert_maps(&maps, clouds, policy)?;
    let gsd = maps
        .first()
        .map(|m| m.window_gsd)
        .unwrap_or(WINDOW as f64 * crate::raster::TARGET_GSD);
    let mosaic = mosaic_alerts(&alert_maps, &index, gsd)?;
    let messages = messages(scene_id, &maps, &alert_maps, policy);
    Ok(SceneAlerts {
        index,
        maps,
        alert_maps,
        messages,
        mosaic,
    })
}

/// Tile, infer every patch on `jobs` workers, threshold and mosaic. `cloud` is a
/// scene-sized mask of flagged pixels.
pub fn run_scene(
    scene_id: &str,
    scene: &BandStack,
    georef: &GeoRef,
    cloud: Option<&Mask>,
    net: &ConvNet,
    policy: &ThresholdPolicy,
    jobs: usize,
) -> Result<SceneAlerts> {
    policy.validate()?;
    let tiling = tile_scene(scene, georef)?;
    let clouds = match cloud {
        Some(mask) => tiling
            .index
            .placements
            .iter()
            .map(|&(r, c)| {
                window_cloud_fractions(&mask.crop(r, c, PATCH_SIZE, PATCH_SIZE)?).map(Some)
            })
            .collect::<Result<Vec<_>>>()?,
        None => vec![None; tiling.patches.len()],
    };
    let maps = infer_patches(net, &tiling.patches, jobs)?;
    alerts_from_maps(scene_id, maps, &clouds, tiling.index, policy)
}
