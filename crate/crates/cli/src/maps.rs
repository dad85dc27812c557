//! infer, alert and plot.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use seawatch::alerting::{alerts_from_maps, serialize_alert, window_cloud_fractions, ThresholdPolicy};
use seawatch::pat1::{Dtype, Sidecar};
use seawatch::raster::{tile_scene, TileIndex, PATCH_SIZE};
use seawatch::sensor_sim::MaskSet;
use seawatch::transfer::{infer_patches, ContaminantMap, ConvNet};
use seawatch::{BandStack, GeoRef, Parameter};

use crate::io::{create_dir, pgm, read_json, read_pat1, write_json, write_pat1};

pub const CLOUD_BAND: &str = "cloud_fraction";

/// `index.json` written next to the per-patch maps.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapIndex {
    pub scene_id: String,
    pub parameter: Parameter,
    pub scene_georef: GeoRef,
    pub window_gsd: f64,
    pub index: TileIndex,
    /// File names, in patch order.
    pub maps: Vec<String>,
    pub cloud_fractions: bool,
}

fn pool(jobs: usize) -> anyhow::Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building the worker pool")
}

pub fn infer(net: &Path, scene: &Path, mask: Option<&Path>, out: &Path, jobs: usize) -> anyhow::Result<()> {
    let net = ConvNet::read(net).with_context(|| format!("loading network {}", net.display()))?;
    let (raster, sidecar, _) = read_pat1(scene)?;
    let georef = sidecar
        .georef
        .clone()
        .with_context(|| format!("{} has no georeference", scene.display()))?;
    let scene_id = sidecar
        .attributes
        .get("scene_id")
        .and_then(|v| v.as_str())
        .unwrap_or("scene")
        .to_string();
    let mask = match mask {
        Some(p) => {
            let m = MaskSet::from_raster(&read_pat1(p)?.0)?.any();
            if (m.width, m.height) != (raster.width(), raster.height()) {
                bail!(
                    "mask is {}x{} but the scene is {}x{}",
                    m.height,
                    m.width,
                    raster.height(),
                    raster.width()
                );
            }
            Some(m)
        }
        None => None,
    };
    let tiling = tile_scene(&raster, &georef)?;
    let maps = infer_patches(&net, &tiling.patches, jobs)?;
    let clouds = match &mask {
        Some(m) => tiling
            .index
            .placements
            .iter()
            .map(|&(r0, c0)| Ok(Some(window_cloud_fractions(&m.crop(r0, c0, PATCH_SIZE, PATCH_SIZE)?)?)))
            .collect::<anyhow::Result<Vec<_>>>()?,
        None => vec![None; maps.len()],
    };
    create_dir(out)?;
    let mut names = Vec::new();
    for (k, (map, cloud)) in maps.iter().zip(&clouds).enumerate() {
        let mut data = map.values.clone();
        data.extend(cloud.iter().flatten().map(|&f| f as f32));
        let bands = if cloud.is_some() {
            vec![map.parameter.to_string(), CLOUD_BAND.to_string()]
        } else {
            vec![map.parameter.to_string()]
        };
        let grid = BandStack::new(25, 25, map.window_gsd, bands, data)?;
        let side = Sidecar::for_raster(&grid, Some(map.georef.clone()))
            .with_attribute("scene_id", &scene_id)
            .with_attribute("patch_index", k)
            .with_attribute("parameter", map.parameter);
        let name = format!("map_{k:03}.pat1");
        write_pat1(&out.join(&name), &grid, Dtype::F32, &side)?;
        names.push(name);
    }
    write_json(
        &out.join("index.json"),
        &MapIndex {
            scene_id,
            parameter: net.parameter,
            scene_georef: georef,
            window_gsd: maps.first().map(|m| m.window_gsd).unwrap_or(47.5),
            index: tiling.index,
            maps: names,
            cloud_fractions: mask.is_some(),
        },
    )?;
    println!("wrote {} {} maps into {}", maps.len(), net.parameter, out.display());
    Ok(())
}

pub fn alert(
    dir: &Path,
    policy: &str,
    out: &Path,
    mosaic: Option<&Path>,
    min_exceed_fraction: Option<f64>,
    jobs: usize,
) -> anyhow::Result<()> {
    let index: MapIndex = read_json(&dir.join("index.json"))?;
    let mut policy = if policy == "default" {
        ThresholdPolicy::default_for(index.parameter)
    } else {
        read_json::<ThresholdPolicy>(Path::new(policy))?
    };
    if let Some(f) = min_exceed_fraction {
        policy.min_exceed_fraction = f;
    }
    policy.validate()?;
    let read_one = |name: &String| -> anyhow::Result<(ContaminantMap, Option<Vec<f64>>)> {
        let (grid, side, _) = read_pat1(&dir.join(name))?;
        let georef = side.georef.with_context(|| format!("{name} has no georeference"))?;
        let map = ContaminantMap::from_band_stack(&grid.select_bands(&[0])?, index.parameter, georef)?;
        let cloud = (index.cloud_fractions && grid.bands() > 1).then(|| grid.band(1).iter().map(|&v| v as f64).collect());
        Ok((
            ContaminantMap {
                window_gsd: grid.gsd(),
                ..map
            },
            cloud,
        ))
    };
    let loaded: Vec<(ContaminantMap, Option<Vec<f64>>)> = if jobs == 1 {
        index.maps.iter().map(read_one).collect::<anyhow::Result<_>>()?
    } else {
        pool(jobs)?.install(|| index.maps.par_iter().map(read_one).collect::<anyhow::Result<_>>())?
    };
    let (maps, clouds): (Vec<_>, Vec<_>) = loaded.into_iter().unzip();
    let res = alerts_from_maps(&index.scene_id, maps, &clouds, index.index.clone(), &policy)?;
    let mut text = Vec::new();
    for m in &res.messages {
        text.extend(serialize_alert(m)?);
    }
    fs::write(out, &text).with_context(|| format!("writing {}", out.display()))?;
    if let Some(path) = mosaic {
        let side = Sidecar::for_raster(&res.mosaic, Some(index.scene_georef.clone()))
            .with_attribute("scene_id", &index.scene_id)
            .with_attribute("policy_id", &policy.policy_id);
        write_pat1(path, &res.mosaic, Dtype::U8, &side)?;
    }
    let cells: usize = res.alert_maps.iter().map(|a| a.exceed_count()).sum();
    println!(
        "{} message(s), {} exceeding cells under policy {}",
        res.messages.len(),
        cells,
        policy.policy_id
    );
    Ok(())
}

pub fn plot(map: &Path, band: usize, out: &Path) -> anyhow::Result<()> {
    let (raster, _, _) = read_pat1(map)?;
    if band >= raster.bands() {
        bail!("{} has {} band(s); band {band} does not exist", map.display(), raster.bands());
    }
    let bytes = pgm(raster.band(band), raster.width(), raster.height());
    fs::write(out, bytes).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "wrote {}x{} image of band {:?} to {}",
        raster.width(),
        raster.height(),
        raster.band_ids()[band],
        out.display()
    );
    Ok(())
}
