//! MTF blur and SNR noise.
//!
//! The optical transfer function is modelled as a Gaussian PSF. A Gaussian with
//! standard deviation sigma (pixels) has MTF(f) = exp(-2 pi^2 sigma^2 f^2); at
//! Nyquist (f = 0.5 cycles/px) that gives sigma = sqrt(-2 ln MTF) / pi.

use std::f64::consts::PI;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::raster::BandStack;

/// Maximum band-to-band misalignment accepted at L1C level, meters.
pub const MAX_MISALIGNMENT_M: f64 = 10.0;

/// Signal-to-noise ratio. `Snr::INFINITE` disables noise; serialized as `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snr(pub f64);

impl Snr {
    pub const INFINITE: Snr = Snr(f64::INFINITY);

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl Serialize for Snr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Snr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct SnrVisitor;
        impl Visitor<'_> for SnrVisitor {
            type Value = Snr;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Snr, E> {
                Ok(Snr(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Snr, E> {
                Ok(Snr(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Snr, E> {
                Ok(Snr(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Snr, E> {
                match v {
                    "inf" | "infinity" => Ok(Snr::INFINITE),
                    other => Err(E::custom(format!("unknown SNR sentinel {other:?}"))),
                }
            }
        }
        d.deserialize_any(SnrVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradeConfig {
    pub snr_per_band: Vec<Snr>,
    /// MTF value at Nyquist per band, in (0, 1].
    pub mtf_at_nyquist: Vec<f64>,
    /// (dx, dy) shift per band in meters along image columns and rows.
    pub misalignment_per_band: Vec<(f64, f64)>,
}

impl DegradeConfig {
    /// No blur, no noise, no shifts.
    pub fn identity(bands: usize) -> Self {
        Self {
            snr_per_band: vec![Snr::INFINITE; bands],
            mtf_at_nyquist: vec![1.0; bands],
            misalignment_per_band: vec![(0.0, 0.0); bands],
        }
    }

    pub fn bands(&self) -> usize {
        self.snr_per_band.len()
    }

    pub fn validate(&self, bands: usize) -> Result<()> {
        if self.snr_per_band.len() != bands
            || self.mtf_at_nyquist.len() != bands
            || self.misalignment_per_band.len() != bands
        {
            return Err(Error::invalid(format!(
                "degrade config must list exactly {bands} bands"
            )));
        }
        for (b, s) in self.snr_per_band.iter().enumerate() {
            if !(s.0 > 0.0) {
                return Err(Error::invalid(format!(
                    "band {b}: snr must be positive, got {}",
                    s.0
                )));
            }
        }
        for (b, &m) in self.mtf_at_nyquist.iter().enumerate() {
            if !(m > 0.0 && m <= 1.0) {
                return Err(Error::invalid(format!(
                    "band {b}: mtf at nyquist {m} outside (0, 1]"
                )));
            }
        }
        for (b, &(dx, dy)) in self.misalignment_per_band.iter().enumerate() {
            let mag = dx.hypot(dy);
            if !(mag <= MAX_MISALIGNMENT_M) {
                return Err(Error::invalid(format!(
                    "band {b}: misalignment {mag:.3} m exceeds {MAX_MISALIGNMENT_M} m"
                )));
            }
        }
        Ok(())
    }
}

pub fn blur_sigma_px(mtf_at_nyquist: f64) -> f64 {
    (-2.0 * mtf_at_nyquist.ln()).max(0.0).sqrt() / PI
}

/// Unit-sum 1-D Gaussian kernel with radius ceil(4 sigma).
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (4.0 * sigma).ceil().max(1.0) as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable convolution with replicate-edge padding.
fn blur_plane(plane: &[f32], width: usize, height: usize, kernel: &[f64]) -> Vec<f32> {
    let radius = (kernel.len() / 2) as i64;
    let clamp = |i: i64, n: usize| i.clamp(0, n as i64 - 1) as usize;
    let mut tmp = vec![0f64; plane.len()];
    for r in 0..height {
        let row = &plane[r * width..(r + 1) * width];
        for c in 0..width {
            let mut acc = 0.0;
            for (k, &w) in kernel.iter().enumerate() {
                acc += w * row[clamp(c as i64 + k as i64 - radius, width)] as f64;
            }
            tmp[r * width + c] = acc;
        }
    }
    let mut out = vec![0f32; plane.len()];
    for r in 0..height {
        for c in 0..width {
            let mut acc = 0.0;
            for (k, &w) in kernel.iter().enumerate() {
                acc += w * tmp[clamp(r as i64 + k as i64 - radius, height) * width + c];
            }
            out[r * width + c] = acc as f32;
        }
    }
    out
}

/// Blur every band with its MTF-derived Gaussian, then add N(0, (band mean / snr)^2)
/// noise. Bit-reproducible for a fixed seed.
pub fn degrade(scene: &BandStack, cfg: &DegradeConfig, seed: u64) -> Result<BandStack> {
    cfg.validate(scene.bands())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = scene.clone();
    let (w, h) = (scene.width(), scene.height());
    for b in 0..scene.bands() {
        let mtf = cfg.mtf_at_nyquist[b];
        if mtf < 1.0 {
            let kernel = gaussian_kernel(blur_sigma_px(mtf));
            let blurred = blur_plane(scene.band(b), w, h, &kernel);
            out.band_mut(b).copy_from_slice(&blurred);
        }
        let snr = cfg.snr_per_band[b];
        if !snr.is_infinite() {
            let band = out.band_mut(b);
            let mean = band.iter().map(|&v| v as f64).sum::<f64>() / band.len() as f64;
            let sigma = mean.abs() / snr.0;
            if sigma > 0.0 {
                let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
                for v in band.iter_mut() {
                    *v = (*v as f64 + normal.sample(&mut rng)) as f32;
                }
            }
        }
    }
    Ok(out)
}
