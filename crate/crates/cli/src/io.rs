use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use seawatch::dataset::CatalogPatch;
use seawatch::pat1::{self, Dtype, Sidecar};
use seawatch::raster::{ms_band_ids, PATCH_BANDS, PATCH_SIZE, TARGET_GSD};
use seawatch::{BandStack, GeoRef, Patch};

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// `*.pat1` files of a directory in name order.
pub fn pat1_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pat1"))
        .collect();
    out.sort();
    Ok(out)
}

/// Every georeferenced 256x256x7 raster of `dir`; ids come from the
/// `patch_id` sidecar attribute, else the file stem.
pub fn read_patch_dir(dir: &Path) -> anyhow::Result<Vec<CatalogPatch>> {
    let mut out = Vec::new();
    for path in pat1_files(dir)? {
        let (raster, sidecar, _) = pat1::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let georef = sidecar
            .georef
            .clone()
            .with_context(|| format!("{} has no georeference", path.display()))?;
        let id = sidecar
            .attributes
            .get("patch_id")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .unwrap_or_else(|| path.file_stem().unwrap_or_default().to_string_lossy().into_owned());
        let patch = Patch::new(raster, georef).with_context(|| format!("{} is not a patch", path.display()))?;
        out.push(CatalogPatch { id, patch });
    }
    if out.is_empty() {
        bail!("no .pat1 patches in {}", dir.display());
    }
    Ok(out)
}

pub fn load_patches(dir: Option<&Path>, count: usize, seed: u64) -> anyhow::Result<Vec<Patch>> {
    match dir {
        Some(d) => Ok(read_patch_dir(d)?.into_iter().map(|c| c.patch).collect()),
        None => random_patches(count, seed),
    }
}

/// Patches of smooth per-window reflectances with pixel noise, inside the
/// range of sea-surface L1C values.
pub fn random_patches(count: usize, seed: u64) -> anyhow::Result<Vec<Patch>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let date = NaiveDate::from_ymd_opt(2024, 7, 1).expect("valid date");
    (0..count)
        .map(|_| {
            let base: Vec<f32> = (0..PATCH_BANDS).map(|_| rng.random_range(0.01..0.09)).collect();
            let tilt: Vec<f32> = (0..PATCH_BANDS).map(|_| rng.random_range(-1e-4..1e-4)).collect();
            let raster = BandStack::from_fn(PATCH_SIZE, PATCH_SIZE, TARGET_GSD, ms_band_ids(), |b, r, c| {
                base[b] + tilt[b] * (r as f32 - c as f32) + rng.random_range(-0.002..0.002)
            })?;
            let georef = GeoRef::new(44.1, 9.8, TARGET_GSD, date)?;
            Ok(Patch::new(raster, georef)?)
        })
        .collect()
}

pub fn write_pat1(path: &Path, raster: &BandStack, dtype: Dtype, sidecar: &Sidecar) -> anyhow::Result<()> {
    pat1::write(path, raster, dtype, sidecar).with_context(|| format!("writing {}", path.display()))
}

pub fn read_pat1(path: &Path) -> anyhow::Result<(BandStack, Sidecar, Dtype)> {
    pat1::read(path).with_context(|| format!("reading {}", path.display()))
}

/// Binary greyscale image: values {0, 1} map to 0 / 255, anything else is
/// stretched from its finite minimum to maximum; non-finite cells are 0.
pub fn pgm(plane: &[f32], width: usize, height: usize) -> Vec<u8> {
    let finite = plane.iter().copied().filter(|v| v.is_finite());
    let binary = plane.iter().all(|&v| v == 0.0 || v == 1.0);
    let (lo, hi) = finite.fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let scale = |v: f32| -> u8 {
        if !v.is_finite() {
            0
        } else if binary {
            (v * 255.0) as u8
        } else if hi > lo {
            ((v - lo) / (hi - lo) * 255.0).round() as u8
        } else {
            128
        }
    };
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(plane.iter().map(|&v| scale(v)));
    out
}
