//! Synthetic reflectance scenes with analytically known turbidity and pH fields.
//!
//! Each pixel's reflectance is `offset + turbidity_gain * turbidity + ph_gain * (ph - ph_reference)`
//! plus optional Gaussian noise, so window means of the reflectances are the same linear
//! mixing of window means of the fields.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Mask, MaskSet};
use crate::error::{Error, Result};
use crate::parameter::Parameter;
use crate::raster::{
    mosaic, ms_band_ids, window_average, BandStack, GeoRef, TileIndex, PATCH_BANDS, PATCH_SIZE,
    TARGET_GSD, WINDOW,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub amplitude: f64,
    pub wavelength_px: f64,
    #[serde(default)]
    pub angle_deg: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Sinusoids with seed-drawn orientation, phase and wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomWaves {
    pub count: usize,
    pub amplitude: f64,
    pub min_wavelength_px: f64,
    pub max_wavelength_px: f64,
}

/// base + gradient + waves, optionally clamped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub base: f64,
    /// Change per pixel along (rows, cols).
    #[serde(default)]
    pub gradient: (f64, f64),
    #[serde(default)]
    pub waves: Vec<Wave>,
    #[serde(default)]
    pub random_waves: Option<RandomWaves>,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

impl FieldSpec {
    pub fn constant(value: f64) -> Self {
        Self {
            base: value,
            ..Self::default()
        }
    }
}

/// Disk of constant value overriding a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plume {
    #[serde(default = "default_plume_parameter")]
    pub parameter: Parameter,
    pub row: f64,
    pub col: f64,
    pub radius_px: f64,
    pub value: f64,
}

fn default_plume_parameter() -> Parameter {
    Parameter::Turbidity
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    Cloud,
    CloudShadow,
    Cirrus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRect {
    pub kind: MaskKind,
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixing {
    pub offset: [f64; PATCH_BANDS],
    /// Reflectance per NTU.
    pub turbidity_gain: [f64; PATCH_BANDS],
    /// Reflectance per pH unit away from `ph_reference`.
    pub ph_gain: [f64; PATCH_BANDS],
    pub ph_reference: f64,
}

impl Default for Mixing {
    fn default() -> Self {
        Self {
            offset: [0.060, 0.045, 0.030, 0.025, 0.020, 0.018, 0.015],
            turbidity_gain: [0.0008, 0.0012, 0.0016, 0.0014, 0.0010, 0.0008, 0.0006],
            ph_gain: [0.004, 0.002, -0.001, -0.002, 0.001, 0.003, -0.003],
            ph_reference: 8.0,
        }
    }
}

impl Mixing {
    pub fn reflectance(&self, band: usize, turbidity: f64, ph: f64) -> f64 {
        self.offset[band]
            + self.turbidity_gain[band] * turbidity
            + self.ph_gain[band] * (ph - self.ph_reference)
    }

    /// The two gain columns must be linearly independent for the fields to be recoverable.
    pub fn validate(&self) -> Result<()> {
        let (a, b) = (&self.turbidity_gain, &self.ph_gain);
        let aa: f64 = a.iter().map(|v| v * v).sum();
        let bb: f64 = b.iter().map(|v| v * v).sum();
        let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let gram = aa * bb - ab * ab;
        if !(gram > 1e-12 * aa * bb) || aa == 0.0 || bb == 0.0 {
            return Err(Error::invalid(
                "band mixing is not invertible: gain columns are dependent",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_gsd")]
    pub gsd: f64,
    pub center_lat: f64,
    pub center_lon: f64,
    pub acquisition_date: NaiveDate,
    pub turbidity: FieldSpec,
    pub ph: FieldSpec,
    #[serde(default)]
    pub mixing: Mixing,
    /// Standard deviation of additive per-pixel reflectance noise.
    #[serde(default)]
    pub reflectance_noise: f64,
    #[serde(default)]
    pub plumes: Vec<Plume>,
    #[serde(default)]
    pub masks: Vec<MaskRect>,
}

fn default_gsd() -> f64 {
    TARGET_GSD
}

/// Pixel-resolution parameter fields.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub turbidity: BandStack,
    pub ph: BandStack,
}

impl GroundTruth {
    pub fn field(&self, parameter: Parameter) -> &BandStack {
        match parameter {
            Parameter::Turbidity => &self.turbidity,
            Parameter::Ph => &self.ph,
        }
    }

    /// Per-patch 10x10-window means for each placement of `index`.
    pub fn patch_grids(&self, parameter: Parameter, index: &TileIndex) -> Result<Vec<BandStack>> {
        let field = self.field(parameter);
        index
            .placements
            .iter()
            .map(|&(r, c)| window_average(&field.crop(r, c, PATCH_SIZE, PATCH_SIZE)?, WINDOW))
            .collect()
    }

    /// Window-resolution truth aligned with the patch tiling of the scene; scenes
    /// smaller than a patch are averaged directly.
    pub fn windowed(&self, parameter: Parameter) -> Result<BandStack> {
        let field = self.field(parameter);
        if field.width() < PATCH_SIZE || field.height() < PATCH_SIZE {
            return window_average(field, WINDOW);
        }
        let index = TileIndex::for_scene(field.width(), field.height())?;
        mosaic(&self.patch_grids(parameter, &index)?, &index)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub raster: BandStack,
    pub truth: GroundTruth,
    pub masks: MaskSet,
    pub georef: GeoRef,
}

struct PlacedWave {
    amplitude: f64,
    kx: f64,
    ky: f64,
    phase: f64,
}

fn place_waves(spec: &FieldSpec, rng: &mut ChaCha8Rng) -> Result<Vec<PlacedWave>> {
    let mut waves: Vec<PlacedWave> = Vec::new();
    let mut push = |amplitude: f64, wavelength: f64, angle_deg: f64, phase: f64| -> Result<()> {
        if !(wavelength > 0.0) {
            return Err(Error::invalid(format!(
                "wave wavelength {wavelength} must be positive"
            )));
        }
        let k = std::f64::consts::TAU / wavelength;
        let a = angle_deg.to_radians();
        waves.push(PlacedWave {
            amplitude,
            kx: k * a.cos(),
            ky: k * a.sin(),
            phase,
        });
        Ok(())
    };
    for w in &spec.waves {
        push(w.amplitude, w.wavelength_px, w.angle_deg, w.phase)?;
    }
    if let Some(rw) = &spec.random_waves {
        if !(rw.min_wavelength_px > 0.0 && rw.max_wavelength_px >= rw.min_wavelength_px) {
            return Err(Error::invalid(
                "random wave wavelengths must satisfy 0 < min <= max",
            ));
        }
        for _ in 0..rw.count {
            let wl = rng.random_range(rw.min_wavelength_px..=rw.max_wavelength_px);
            let angle = rng.random_range(0.0..360.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let amp = rw.amplitude * rng.random_range(0.5..1.0);
            push(amp, wl, angle, phase)?;
        }
    }
    Ok(waves)
}

fn render_field(
    spec: &FieldSpec,
    plumes: impl Iterator<Item = Plume> + Clone,
    width: usize,
    height: usize,
    gsd: f64,
    name: &str,
    rng: &mut ChaCha8Rng,
) -> Result<BandStack> {
    let waves = place_waves(spec, rng)?;
    BandStack::from_fn(width, height, gsd, vec![name.to_string()], |_, r, c| {
        let (y, x) = (r as f64, c as f64);
        let mut v = spec.base + spec.gradient.0 * y + spec.gradient.1 * x;
        for w in &waves {
            v += w.amplitude * (w.kx * x + w.ky * y + w.phase).sin();
        }
        if let Some(lo) = spec.min {
            v = v.max(lo);
        }
        if let Some(hi) = spec.max {
            v = v.min(hi);
        }
        for p in plumes.clone() {
            if (y - p.row).powi(2) + (x - p.col).powi(2) <= p.radius_px * p.radius_px {
                v = p.value;
            }
        }
        v as f32
    })
}

/// Render the scene described by `spec`. Deterministic for a fixed seed.
pub fn generate_synthetic_scene(spec: &SceneSpec, seed: u64) -> Result<SyntheticScene> {
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::dim("synthetic scene must be non-empty"));
    }
    spec.mixing.validate()?;
    if !(spec.reflectance_noise >= 0.0) {
        return Err(Error::invalid("reflectance noise must be non-negative"));
    }
    let georef = GeoRef::new(
        spec.center_lat,
        spec.center_lon,
        spec.gsd,
        spec.acquisition_date,
    )?;
    let mut field_rng = ChaCha8Rng::seed_from_u64(seed);
    let plumes_for = |p: Parameter| {
        spec.plumes
            .iter()
            .filter(move |x| x.parameter == p)
            .cloned()
    };
    let turbidity = render_field(
        &spec.turbidity,
        plumes_for(Parameter::Turbidity),
        spec.width,
        spec.height,
        spec.gsd,
        "turbidity",
        &mut field_rng,
    )?;
    let ph = render_field(
        &spec.ph,
        plumes_for(Parameter::Ph),
        spec.width,
        spec.height,
        spec.gsd,
        "ph",
        &mut field_rng,
    )?;
    if let Some(v) = turbidity.data().iter().find(|&&v| v < 0.0) {
        return Err(Error::invalid(format!(
            "turbidity field reaches negative value {v}; set `min`"
        )));
    }

    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let noise = if spec.reflectance_noise > 0.0 {
        Some(Normal::new(0.0, spec.reflectance_noise).map_err(|e| Error::invalid(e.to_string()))?)
    } else {
        None
    };
    let mut raster = BandStack::from_fn(
        spec.width,
        spec.height,
        spec.gsd,
        ms_band_ids(),
        |b, r, c| {
            spec.mixing
                .reflectance(b, turbidity.get(0, r, c) as f64, ph.get(0, r, c) as f64)
                as f32
        },
    )?;
    if let Some(n) = noise {
        for b in 0..PATCH_BANDS {
            for v in raster.band_mut(b) {
                *v = (*v as f64 + n.sample(&mut noise_rng)) as f32;
            }
        }
    }

    let mut masks = MaskSet::clear(spec.width, spec.height);
    for rect in &spec.masks {
        let target: &mut Mask = match rect.kind {
            MaskKind::Cloud => &mut masks.cloud,
            MaskKind::CloudShadow => &mut masks.cloud_shadow,
            MaskKind::Cirrus => &mut masks.cirrus,
        };
        for r in rect.row..(rect.row + rect.height).min(spec.height) {
            for c in rect.col..(rect.col + rect.width).min(spec.width) {
                target.set(r, c, true);
            }
        }
    }

    Ok(SyntheticScene {
        raster,
        truth: GroundTruth { turbidity, ph },
        masks,
        georef,
    })
}
