//! Top-of-atmosphere conversions: L = rho * ESUN * cos(theta_s) / (pi * d^2).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::bands::MS_BANDS;
use crate::error::{Error, Result};
use crate::raster::BandStack;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolarContext {
    /// W m^-2 um^-1, one entry per band.
    pub esun_per_band: Vec<f64>,
    /// Astronomical units.
    pub earth_sun_distance: f64,
    /// Degrees.
    pub solar_zenith: f64,
}

impl Default for SolarContext {
    fn default() -> Self {
        Self {
            esun_per_band: MS_BANDS.iter().map(|b| b.esun).collect(),
            earth_sun_distance: 1.0,
            solar_zenith: 30.0,
        }
    }
}

impl SolarContext {
    pub fn validate(&self) -> Result<()> {
        if self
            .esun_per_band
            .iter()
            .any(|&e| !(e > 0.0 && e.is_finite()))
        {
            return Err(Error::invalid("esun must be positive for every band"));
        }
        if !(0.98..=1.02).contains(&self.earth_sun_distance) {
            return Err(Error::invalid(format!(
                "earth-sun distance {} AU outside [0.98, 1.02]",
                self.earth_sun_distance
            )));
        }
        if !(0.0..90.0).contains(&self.solar_zenith) {
            return Err(Error::invalid(format!(
                "solar zenith {} outside [0, 90)",
                self.solar_zenith
            )));
        }
        Ok(())
    }

    fn esun(&self, band: usize) -> Result<f64> {
        self.esun_per_band
            .get(band)
            .copied()
            .ok_or_else(|| Error::invalid(format!("band {band} has no solar irradiance entry")))
    }

    /// Radiance per unit reflectance for `band`.
    fn gain(&self, band: usize) -> Result<f64> {
        let d = self.earth_sun_distance;
        Ok(self.esun(band)? * self.solar_zenith.to_radians().cos() / (PI * d * d))
    }
}

pub fn reflectance_to_radiance(rho: f64, ctx: &SolarContext, band: usize) -> Result<f64> {
    if !rho.is_finite() {
        return Err(Error::invalid(format!("reflectance {rho} is not finite")));
    }
    Ok(rho * ctx.gain(band)?)
}

pub fn radiance_to_reflectance(radiance: f64, ctx: &SolarContext, band: usize) -> Result<f64> {
    let gain = ctx.gain(band)?;
    if gain == 0.0 || !gain.is_finite() {
        return Err(Error::SingularContext(format!(
            "band {band}: esun {} with solar zenith {} deg has no inverse",
            ctx.esun(band)?,
            ctx.solar_zenith
        )));
    }
    Ok(radiance / gain)
}

fn convert(
    scene: &BandStack,
    ctx: &SolarContext,
    f: fn(f64, &SolarContext, usize) -> Result<f64>,
) -> Result<BandStack> {
    if ctx.esun_per_band.len() != scene.bands() {
        return Err(Error::invalid(format!(
            "solar context has {} bands, scene has {}",
            ctx.esun_per_band.len(),
            scene.bands()
        )));
    }
    let mut out = scene.clone();
    for b in 0..scene.bands() {
        for v in out.band_mut(b) {
            *v = f(*v as f64, ctx, b)? as f32;
        }
    }
    Ok(out)
}

pub fn scene_to_radiance(scene: &BandStack, ctx: &SolarContext) -> Result<BandStack> {
    convert(scene, ctx, reflectance_to_radiance)
}

pub fn scene_to_reflectance(scene: &BandStack, ctx: &SolarContext) -> Result<BandStack> {
    convert(scene, ctx, radiance_to_reflectance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx(zenith: f64, d: f64) -> SolarContext {
        SolarContext {
            earth_sun_distance: d,
            solar_zenith: zenith,
            ..SolarContext::default()
        }
    }

    #[test]
    fn zero_reflectance_is_zero_radiance() {
        assert_eq!(
            reflectance_to_radiance(0.0, &SolarContext::default(), 3).unwrap(),
            0.0
        );
        assert_eq!(
            radiance_to_reflectance(0.0, &SolarContext::default(), 3).unwrap(),
            0.0
        );
    }

    #[test]
    fn analytic_inversion_gives_unit_radiance() {
        let c = ctx(0.0, 1.0);
        for b in 0..7 {
            let rho = PI / c.esun_per_band[b];
            assert!((reflectance_to_radiance(rho, &c, b).unwrap() - 1.0).abs() < 1e-12);
            assert!((radiance_to_reflectance(1.0, &c, b).unwrap() - rho).abs() < 1e-15);
        }
    }

    #[test]
    fn random_round_trip_within_1e6_relative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let c = ctx(rng.random_range(0.0..89.0), rng.random_range(0.98..1.02));
            let b = rng.random_range(0..7);
            let rho: f64 = rng.random_range(-0.1..1.2);
            let back = radiance_to_reflectance(reflectance_to_radiance(rho, &c, b).unwrap(), &c, b)
                .unwrap();
            assert!((back - rho).abs() <= 1e-6 * rho.abs().max(1e-12));
        }
    }

    #[test]
    fn context_validation_and_singularity() {
        assert!(ctx(90.0, 1.0).validate().is_err());
        assert!(ctx(10.0, 1.1).validate().is_err());
        let mut c = SolarContext::default();
        c.esun_per_band[2] = 0.0;
        assert!(c.validate().is_err());
        assert!(matches!(
            radiance_to_reflectance(5.0, &c, 2),
            Err(Error::SingularContext(_))
        ));
        assert!(reflectance_to_radiance(f64::NAN, &SolarContext::default(), 0).is_err());
        assert!(reflectance_to_radiance(0.1, &SolarContext::default(), 7).is_err());
    }
}
