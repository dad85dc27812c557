//! Raster containers and the spatial operations shared by the whole pipeline:
//! block averaging, scene tiling and mosaic reconstruction.
//!
//! Rasters are stored band-planar: all of band 0 row-major, then band 1, and so on.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length of an inference patch in pixels.
pub const PATCH_SIZE: usize = 256;
/// Multispectral bands per patch (PAN excluded).
pub const PATCH_BANDS: usize = 7;
/// Averaging window applied before regression, in pixels.
pub const WINDOW: usize = 10;
/// Cells per axis of a window-averaged patch: floor((256 - 10) / 10) + 1.
pub const GRID: usize = (PATCH_SIZE - WINDOW) / WINDOW + 1;
/// Target ground sampling distance in meters.
pub const TARGET_GSD: f64 = 4.75;
/// Ground extent of a patch side: 256 px at 4.75 m.
pub const PATCH_EXTENT_M: f64 = PATCH_SIZE as f64 * TARGET_GSD;

/// Canonical multispectral band order, ascending centre wavelength.
pub const MS_BAND_IDS: [&str; PATCH_BANDS] = ["MS1", "MS2", "MS3", "MS4", "MS5", "MS6", "MS7"];

/// Accepted reflectance range; values outside are counted, not rejected.
pub const REFLECTANCE_RANGE: (f32, f32) = (0.0, 1.2);

pub fn ms_band_ids() -> Vec<String> {
    MS_BAND_IDS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandStack {
    width: usize,
    height: usize,
    gsd: f64,
    band_ids: Vec<String>,
    data: Vec<f32>,
}

impl BandStack {
    pub fn new(
        width: usize,
        height: usize,
        gsd: f64,
        band_ids: Vec<String>,
        data: Vec<f32>,
    ) -> Result<Self> {
        if width == 0 || height == 0 || band_ids.is_empty() {
            return Err(Error::dim(format!(
                "raster must be non-empty, got {width}x{height}x{}",
                band_ids.len()
            )));
        }
        if !(gsd > 0.0 && gsd.is_finite()) {
            return Err(Error::invalid(format!("gsd must be positive, got {gsd}")));
        }
        let expected = width * height * band_ids.len();
        if data.len() != expected {
            return Err(Error::dim(format!(
                "data length {} does not match {width}x{height}x{} = {expected}",
                data.len(),
                band_ids.len()
            )));
        }
        for (i, id) in band_ids.iter().enumerate() {
            if band_ids[..i].contains(id) {
                return Err(Error::invalid(format!("duplicate band id {id:?}")));
            }
        }
        Ok(Self {
            width,
            height,
            gsd,
            band_ids,
            data,
        })
    }

    pub fn filled(
        width: usize,
        height: usize,
        gsd: f64,
        band_ids: Vec<String>,
        value: f32,
    ) -> Result<Self> {
        let n = width * height * band_ids.len();
        Self::new(width, height, gsd, band_ids, vec![value; n])
    }

    /// Build a raster from `f(band, row, col)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        gsd: f64,
        band_ids: Vec<String>,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let bands = band_ids.len();
        let mut data = Vec::with_capacity(width * height * bands);
        for b in 0..bands {
            for r in 0..height {
                for c in 0..width {
                    data.push(f(b, r, c));
                }
            }
        }
        Self::new(width, height, gsd, band_ids, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.band_ids.len()
    }

    pub fn gsd(&self) -> f64 {
        self.gsd
    }

    pub fn band_ids(&self) -> &[String] {
        &self.band_ids
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn band(&self, b: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn band_mut(&mut self, b: usize) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.data[b * n..(b + 1) * n]
    }

    #[inline]
    pub fn get(&self, band: usize, row: usize, col: usize) -> f32 {
        self.data[(band * self.height + row) * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, band: usize, row: usize, col: usize, value: f32) {
        self.data[(band * self.height + row) * self.width + col] = value;
    }

    /// Pixel vector across bands at (row, col).
    pub fn pixel(&self, row: usize, col: usize) -> Vec<f32> {
        (0..self.bands()).map(|b| self.get(b, row, col)).collect()
    }

    pub fn with_gsd(mut self, gsd: f64) -> Result<Self> {
        if !(gsd > 0.0 && gsd.is_finite()) {
            return Err(Error::invalid(format!("gsd must be positive, got {gsd}")));
        }
        self.gsd = gsd;
        Ok(self)
    }

    /// Copy out a `height` x `width` sub-raster with its top-left corner at (row0, col0).
    pub fn crop(&self, row0: usize, col0: usize, height: usize, width: usize) -> Result<Self> {
        if row0 + height > self.height || col0 + width > self.width {
            return Err(Error::dim(format!(
                "crop {height}x{width} at ({row0},{col0}) exceeds raster {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(width * height * self.bands());
        for b in 0..self.bands() {
            let plane = self.band(b);
            for r in row0..row0 + height {
                let start = r * self.width + col0;
                data.extend_from_slice(&plane[start..start + width]);
            }
        }
        Self::new(width, height, self.gsd, self.band_ids.clone(), data)
    }

    /// Keep only the listed bands, in the given order.
    pub fn select_bands(&self, bands: &[usize]) -> Result<Self> {
        let mut ids = Vec::with_capacity(bands.len());
        let mut data = Vec::with_capacity(bands.len() * self.plane_len());
        for &b in bands {
            if b >= self.bands() {
                return Err(Error::dim(format!("band {b} out of range")));
            }
            ids.push(self.band_ids[b].clone());
            data.extend_from_slice(self.band(b));
        }
        Self::new(self.width, self.height, self.gsd, ids, data)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }
}

/// Center-point georeference of a patch or scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoRef {
    pub center_lat: f64,
    pub center_lon: f64,
    pub gsd: f64,
    pub acquisition_date: NaiveDate,
}

impl GeoRef {
    pub fn new(
        center_lat: f64,
        center_lon: f64,
        gsd: f64,
        acquisition_date: NaiveDate,
    ) -> Result<Self> {
        let g = Self {
            center_lat,
            center_lon,
            gsd,
            acquisition_date,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.center_lat) {
            return Err(Error::invalid(format!(
                "latitude {} outside [-90, 90]",
                self.center_lat
            )));
        }
        if !(-180.0..=180.0).contains(&self.center_lon) {
            return Err(Error::invalid(format!(
                "longitude {} outside [-180, 180]",
                self.center_lon
            )));
        }
        if !(self.gsd > 0.0 && self.gsd.is_finite()) {
            return Err(Error::invalid(format!(
                "gsd must be positive, got {}",
                self.gsd
            )));
        }
        Ok(())
    }

    /// Georeference of a point displaced by (east, north) meters from this center.
    pub fn offset(&self, east_m: f64, north_m: f64) -> GeoRef {
        let (lat, lon) = geo::offset(self.center_lat, self.center_lon, east_m, north_m);
        GeoRef {
            center_lat: lat,
            center_lon: lon,
            ..self.clone()
        }
    }
}

/// Local flat-earth conversions around a reference point. Adequate over patch-sized extents.
pub mod geo {
    pub const METERS_PER_DEG_LAT: f64 = 111_320.0;

    /// Displace (lat, lon) by east/north meters.
    pub fn offset(lat: f64, lon: f64, east_m: f64, north_m: f64) -> (f64, f64) {
        let dlat = north_m / METERS_PER_DEG_LAT;
        let dlon = east_m / (METERS_PER_DEG_LAT * lat.to_radians().cos());
        (lat + dlat, lon + dlon)
    }

    /// East/north meters of (lat, lon) relative to (lat0, lon0).
    pub fn displacement(lat0: f64, lon0: f64, lat: f64, lon: f64) -> (f64, f64) {
        let north = (lat - lat0) * METERS_PER_DEG_LAT;
        let east = (lon - lon0) * METERS_PER_DEG_LAT * lat0.to_radians().cos();
        (east, north)
    }
}

/// A 256x256x7 reflectance chip, the unit of inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    raster: BandStack,
    georef: GeoRef,
}

impl Patch {
    pub fn new(raster: BandStack, georef: GeoRef) -> Result<Self> {
        if raster.width() != PATCH_SIZE
            || raster.height() != PATCH_SIZE
            || raster.bands() != PATCH_BANDS
        {
            return Err(Error::dim(format!(
                "patch must be {PATCH_SIZE}x{PATCH_SIZE}x{PATCH_BANDS}, got {}x{}x{}",
                raster.width(),
                raster.height(),
                raster.bands()
            )));
        }
        if let Some(i) = raster.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite reflectance at flat index {i}"
            )));
        }
        georef.validate()?;
        Ok(Self { raster, georef })
    }

    pub fn raster(&self) -> &BandStack {
        &self.raster
    }

    pub fn georef(&self) -> &GeoRef {
        &self.georef
    }

    pub fn into_raster(self) -> BandStack {
        self.raster
    }

    /// Number of reflectance values outside the accepted range.
    pub fn out_of_range_count(&self) -> usize {
        let (lo, hi) = REFLECTANCE_RANGE;
        self.raster
            .data()
            .iter()
            .filter(|&&v| v < lo || v > hi)
            .count()
    }
}

/// Placement of patches inside a scene, row-major with stride 256.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileIndex {
    pub scene_width: usize,
    pub scene_height: usize,
    /// (row origin, column origin) per patch.
    pub placements: Vec<(usize, usize)>,
}

impl TileIndex {
    pub fn for_scene(scene_width: usize, scene_height: usize) -> Result<Self> {
        if scene_width < PATCH_SIZE || scene_height < PATCH_SIZE {
            return Err(Error::dim(format!(
                "scene {scene_height}x{scene_width} is smaller than one {PATCH_SIZE}px patch"
            )));
        }
        let mut placements = Vec::new();
        for tr in 0..scene_height / PATCH_SIZE {
            for tc in 0..scene_width / PATCH_SIZE {
                placements.push((tr * PATCH_SIZE, tc * PATCH_SIZE));
            }
        }
        Ok(Self {
            scene_width,
            scene_height,
            placements,
        })
    }

    pub fn tiles_y(&self) -> usize {
        self.scene_height / PATCH_SIZE
    }

    pub fn tiles_x(&self) -> usize {
        self.scene_width / PATCH_SIZE
    }

    /// Uncovered (rows, cols) at the bottom and right edges.
    pub fn margins(&self) -> (usize, usize) {
        (
            self.scene_height - self.tiles_y() * PATCH_SIZE,
            self.scene_width - self.tiles_x() * PATCH_SIZE,
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (k, &(r, c)) in self.placements.iter().enumerate() {
            if r % PATCH_SIZE != 0 || c % PATCH_SIZE != 0 {
                return Err(Error::Inconsistent(format!(
                    "placement {k} at ({r},{c}) is not {PATCH_SIZE}-aligned"
                )));
            }
            if r + PATCH_SIZE > self.scene_height || c + PATCH_SIZE > self.scene_width {
                return Err(Error::Inconsistent(format!(
                    "placement {k} at ({r},{c}) exceeds the scene"
                )));
            }
        }
        Ok(())
    }
}

/// Non-overlapping block mean with stride `window`.
///
/// Output is floor((n - window) / window) + 1 cells per axis; trailing rows and
/// columns that do not fill a whole window are dropped (256 px -> 25 cells, the
/// last 6 px unused).
pub fn window_average(raster: &BandStack, window: usize) -> Result<BandStack> {
    if window == 0 {
        return Err(Error::dim("window must be at least 1"));
    }
    if raster.width() < window || raster.height() < window {
        return Err(Error::dim(format!(
            "window {window} larger than raster {}x{}",
            raster.height(),
            raster.width()
        )));
    }
    let out_w = (raster.width() - window) / window + 1;
    let out_h = (raster.height() - window) / window + 1;
    let count = (window * window) as f64;
    let w = raster.width();
    let mut data = Vec::with_capacity(out_w * out_h * raster.bands());
    let mut row_acc = vec![0f64; out_w];
    for b in 0..raster.bands() {
        let plane = raster.band(b);
        for oy in 0..out_h {
            row_acc.iter_mut().for_each(|a| *a = 0.0);
            for r in oy * window..(oy + 1) * window {
                let line = &plane[r * w..r * w + out_w * window];
                for (acc, block) in row_acc.iter_mut().zip(line.chunks_exact(window)) {
                    *acc += block.iter().map(|&v| v as f64).sum::<f64>();
                }
            }
            data.extend(row_acc.iter().map(|&s| (s / count) as f32));
        }
    }
    BandStack::new(
        out_w,
        out_h,
        raster.gsd() * window as f64,
        raster.band_ids().to_vec(),
        data,
    )
}

#[derive(Debug, Clone)]
pub struct Tiling {
    pub patches: Vec<Patch>,
    pub index: TileIndex,
}

impl Tiling {
    /// Uncovered (rows, cols) that were excluded from tiling.
    pub fn margins(&self) -> (usize, usize) {
        self.index.margins()
    }
}

/// Cut a 7-band scene into 256x256 patches over its maximal 256-aligned sub-scene.
/// Patch georefs are displaced from `scene_georef`, which locates the scene center.
pub fn tile_scene(scene: &BandStack, scene_georef: &GeoRef) -> Result<Tiling> {
    if scene.bands() != PATCH_BANDS {
        return Err(Error::dim(format!(
            "scene must have {PATCH_BANDS} multispectral bands, got {}",
            scene.bands()
        )));
    }
    let index = TileIndex::for_scene(scene.width(), scene.height())?;
    let half = PATCH_SIZE as f64 / 2.0;
    let mut patches = Vec::with_capacity(index.placements.len());
    for &(r0, c0) in &index.placements {
        let raster = scene.crop(r0, c0, PATCH_SIZE, PATCH_SIZE)?;
        let east = (c0 as f64 + half - scene.width() as f64 / 2.0) * scene.gsd();
        let north = -(r0 as f64 + half - scene.height() as f64 / 2.0) * scene.gsd();
        let mut georef = scene_georef.offset(east, north);
        georef.gsd = scene.gsd();
        patches.push(Patch::new(raster, georef)?);
    }
    Ok(Tiling { patches, index })
}

/// Reassemble per-patch grids into a scene-level grid following `index`.
pub fn mosaic(grids: &[BandStack], index: &TileIndex) -> Result<BandStack> {
    if grids.len() != index.placements.len() {
        return Err(Error::Inconsistent(format!(
            "{} grids for {} placements",
            grids.len(),
            index.placements.len()
        )));
    }
    let first = grids
        .first()
        .ok_or_else(|| Error::Inconsistent("cannot mosaic an empty tiling".into()))?;
    index.validate()?;
    let (gw, gh, bands) = (first.width(), first.height(), first.bands());
    for (k, g) in grids.iter().enumerate() {
        if g.width() != gw || g.height() != gh || g.bands() != bands {
            return Err(Error::Inconsistent(format!(
                "grid {k} is {}x{}x{}, expected {gh}x{gw}x{bands}",
                g.height(),
                g.width(),
                g.bands()
            )));
        }
    }
    let out_w = gw * index.tiles_x();
    let out_h = gh * index.tiles_y();
    let plane = out_w * out_h;
    let mut data = vec![0f32; plane * bands];
    for (grid, &(r0, c0)) in grids.iter().zip(&index.placements) {
        let ty = r0 / PATCH_SIZE;
        let tx = c0 / PATCH_SIZE;
        for b in 0..bands {
            let src = grid.band(b);
            for r in 0..gh {
                let dst = b * plane + (ty * gh + r) * out_w + tx * gw;
                data[dst..dst + gw].copy_from_slice(&src[r * gw..(r + 1) * gw]);
            }
        }
    }
    BandStack::new(out_w, out_h, first.gsd(), first.band_ids().to_vec(), data)
}
