//! Desk-scale simulator turning Sentinel-2-like L1C reflectance scenes into
//! 4.75 m multispectral chips: ToA radiometry, PAN synthesis, resampling,
//! band-to-band misalignment, MTF blur with SNR noise, and chipping.

mod bands;
mod degrade;
mod misalign;
mod pan;
mod pipeline;
mod radiometry;
mod resample;
mod synthetic;

pub use bands::{SpectralBand, MS_BANDS, PAN_BAND};
pub use degrade::{blur_sigma_px, degrade, gaussian_kernel, DegradeConfig, Snr};
pub use misalign::{apply_misalignment, estimate_shift, shift_plane, MisalignReport};
pub use pan::{default_pan_weights, synthesize_pan};
pub use pipeline::{simulate_l1c, Scene, SimOptions, SimulatedChip, Simulation};
pub use radiometry::{
    radiance_to_reflectance, reflectance_to_radiance, scene_to_radiance, scene_to_reflectance,
    SolarContext,
};
pub use resample::{bilinear_at, resample};
pub use synthetic::{
    generate_synthetic_scene, FieldSpec, GroundTruth, MaskKind, MaskRect, Mixing, Plume,
    RandomWaves, SceneSpec, SyntheticScene, Wave,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::BandStack;

/// Boolean raster (true = flagged).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::dim(format!(
                "mask data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn clear(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.data[row * self.width + col] = v;
    }

    pub fn fraction(&self) -> f64 {
        self.data.iter().filter(|&&v| v).count() as f64 / self.data.len() as f64
    }

    pub fn crop(&self, row0: usize, col0: usize, height: usize, width: usize) -> Result<Self> {
        if row0 + height > self.height || col0 + width > self.width {
            return Err(Error::dim("mask crop exceeds extent"));
        }
        let mut data = Vec::with_capacity(width * height);
        for r in row0..row0 + height {
            data.extend_from_slice(
                &self.data[r * self.width + col0..r * self.width + col0 + width],
            );
        }
        Self::new(width, height, data)
    }

    /// Nearest-neighbour resampling between pixel-center grids.
    pub fn resample_nearest(&self, width: usize, height: usize) -> Self {
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            let sr = (((r as f64 + 0.5) * sy) as usize).min(self.height - 1);
            for c in 0..width {
                let sc = (((c as f64 + 0.5) * sx) as usize).min(self.width - 1);
                data.push(self.get(sr, sc));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn union(&self, other: &Mask) -> Result<Self> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::dim("mask extents differ"));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| *a || *b)
            .collect();
        Self::new(self.width, self.height, data)
    }
}

/// Cloud, cloud-shadow and cirrus flags sharing one extent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSet {
    pub cloud: Mask,
    pub cloud_shadow: Mask,
    pub cirrus: Mask,
}

impl MaskSet {
    pub const BAND_IDS: [&'static str; 3] = ["cloud", "cloud_shadow", "cirrus"];

    pub fn new(cloud: Mask, cloud_shadow: Mask, cirrus: Mask) -> Result<Self> {
        let dims = (cloud.width, cloud.height);
        if (cloud_shadow.width, cloud_shadow.height) != dims
            || (cirrus.width, cirrus.height) != dims
        {
            return Err(Error::dim(
                "cloud, shadow and cirrus masks must share scene dimensions",
            ));
        }
        Ok(Self {
            cloud,
            cloud_shadow,
            cirrus,
        })
    }

    pub fn clear(width: usize, height: usize) -> Self {
        Self {
            cloud: Mask::clear(width, height),
            cloud_shadow: Mask::clear(width, height),
            cirrus: Mask::clear(width, height),
        }
    }

    pub fn width(&self) -> usize {
        self.cloud.width
    }

    pub fn height(&self) -> usize {
        self.cloud.height
    }

    /// Pixels flagged by any of the three masks.
    pub fn any(&self) -> Mask {
        self.cloud
            .union(&self.cloud_shadow)
            .and_then(|m| m.union(&self.cirrus))
            .expect("extents checked at construction")
    }

    pub fn map(&self, f: impl Fn(&Mask) -> Result<Mask>) -> Result<Self> {
        Self::new(f(&self.cloud)?, f(&self.cloud_shadow)?, f(&self.cirrus)?)
    }

    /// Three-band 0/1 raster, suitable for PAT1 u8 storage.
    pub fn to_raster(&self, gsd: f64) -> Result<BandStack> {
        let mut data = Vec::with_capacity(3 * self.cloud.data.len());
        for m in [&self.cloud, &self.cloud_shadow, &self.cirrus] {
            data.extend(m.data.iter().map(|&v| if v { 1.0 } else { 0.0 }));
        }
        BandStack::new(
            self.width(),
            self.height(),
            gsd,
            Self::BAND_IDS.iter().map(|s| s.to_string()).collect(),
            data,
        )
    }

    pub fn from_raster(r: &BandStack) -> Result<Self> {
        if r.bands() != 3 {
            return Err(Error::dim(format!(
                "mask raster must have 3 bands, got {}",
                r.bands()
            )));
        }
        let band = |b: usize| {
            Mask::new(
                r.width(),
                r.height(),
                r.band(b).iter().map(|&v| v != 0.0).collect(),
            )
        };
        Self::new(band(0)?, band(1)?, band(2)?)
    }
}
