use serde::{Deserialize, Serialize};

use super::degrade::{DegradeConfig, MAX_MISALIGNMENT_M};
use super::resample::bilinear_at;
use crate::error::{Error, Result};
use crate::raster::BandStack;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisalignReport {
    /// Applied (dx, dy) per band, meters.
    pub offsets_m: Vec<(f64, f64)>,
    /// Root-mean-square offset magnitude across bands, meters.
    pub rms_m: f64,
    pub bound_m: f64,
}

/// out(r, c) = in(r - dy, c - dx), bilinear with replicate edges.
pub fn shift_plane(plane: &[f32], width: usize, height: usize, dx_px: f64, dy_px: f64) -> Vec<f32> {
    let mut out = Vec::with_capacity(plane.len());
    for r in 0..height {
        let y = r as f64 - dy_px;
        for c in 0..width {
            out.push(bilinear_at(plane, width, height, c as f64 - dx_px, y) as f32);
        }
    }
    out
}

pub fn apply_misalignment(
    scene: &BandStack,
    cfg: &DegradeConfig,
) -> Result<(BandStack, MisalignReport)> {
    cfg.validate(scene.bands())?;
    let mut out = scene.clone();
    let gsd = scene.gsd();
    for (b, &(dx, dy)) in cfg.misalignment_per_band.iter().enumerate() {
        if dx == 0.0 && dy == 0.0 {
            continue;
        }
        let shifted = shift_plane(
            scene.band(b),
            scene.width(),
            scene.height(),
            dx / gsd,
            dy / gsd,
        );
        out.band_mut(b).copy_from_slice(&shifted);
    }
    let n = cfg.misalignment_per_band.len() as f64;
    let rms_m = (cfg
        .misalignment_per_band
        .iter()
        .map(|&(dx, dy)| dx * dx + dy * dy)
        .sum::<f64>()
        / n)
        .sqrt();
    Ok((
        out,
        MisalignReport {
            offsets_m: cfg.misalignment_per_band.clone(),
            rms_m,
            bound_m: MAX_MISALIGNMENT_M,
        },
    ))
}

/// Estimate the (dx, dy) pixel shift taking `reference` to `moved` by normalized
/// cross-correlation over integer shifts up to `max_shift`, refined with a
/// parabolic fit around the peak.
pub fn estimate_shift(
    reference: &[f32],
    moved: &[f32],
    width: usize,
    height: usize,
    max_shift: usize,
) -> Result<(f64, f64)> {
    if reference.len() != width * height || moved.len() != width * height {
        return Err(Error::dim(
            "registration planes must match the stated extent",
        ));
    }
    if width <= 2 * max_shift + 2 || height <= 2 * max_shift + 2 {
        return Err(Error::dim(
            "extent too small for the requested search radius",
        ));
    }
    let m = max_shift as i64;
    let ncc = |sx: i64, sy: i64| -> f64 {
        let (mut sa, mut sb, mut saa, mut sbb, mut sab, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for r in m..height as i64 - m {
            for c in m..width as i64 - m {
                let a = reference[((r - sy) as usize) * width + (c - sx) as usize] as f64;
                let b = moved[r as usize * width + c as usize] as f64;
                sa += a;
                sb += b;
                saa += a * a;
                sbb += b * b;
                sab += a * b;
                n += 1.0;
            }
        }
        let cov = sab - sa * sb / n;
        let va = saa - sa * sa / n;
        let vb = sbb - sb * sb / n;
        if va <= 0.0 || vb <= 0.0 {
            0.0
        } else {
            cov / (va * vb).sqrt()
        }
    };
    let inner = m - 1;
    let mut best = (0i64, 0i64, f64::NEG_INFINITY);
    for sy in -inner..=inner {
        for sx in -inner..=inner {
            let v = ncc(sx, sy);
            if v > best.2 {
                best = (sx, sy, v);
            }
        }
    }
    let (bx, by, peak) = best;
    let refine = |lo: f64, hi: f64| {
        let denom = lo - 2.0 * peak + hi;
        if denom.abs() < 1e-15 {
            0.0
        } else {
            (0.5 * (lo - hi) / denom).clamp(-0.5, 0.5)
        }
    };
    let fx = refine(ncc(bx - 1, by), ncc(bx + 1, by));
    let fy = refine(ncc(bx, by - 1), ncc(bx, by + 1));
    Ok((bx as f64 + fx, by as f64 + fy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::ms_band_ids;

    fn textured(w: usize, h: usize) -> BandStack {
        BandStack::from_fn(w, h, 4.75, ms_band_ids(), |b, r, c| {
            let (x, y) = (c as f64, r as f64);
            (0.2 + 0.05 * (x / 5.3 + b as f64).sin() * (y / 4.1).cos()
                + 0.03 * ((x + 2.0 * y) / 7.7).sin()) as f32
        })
        .unwrap()
    }

    #[test]
    fn zero_offsets_are_identity() {
        let s = textured(40, 30);
        let (out, rep) = apply_misalignment(&s, &DegradeConfig::identity(7)).unwrap();
        assert_eq!(out, s);
        assert_eq!(rep.rms_m, 0.0);
    }

    #[test]
    fn integer_shift_moves_columns_with_edge_fill() {
        let s = textured(20, 10);
        let mut cfg = DegradeConfig::identity(7);
        cfg.misalignment_per_band[0] = (4.75, 0.0);
        let (out, _) = apply_misalignment(&s, &cfg).unwrap();
        for r in 0..10 {
            assert_eq!(out.get(0, r, 0), s.get(0, r, 0));
            for c in 1..20 {
                assert_eq!(out.get(0, r, c), s.get(0, r, c - 1));
            }
        }
        assert_eq!(out.band(1), s.band(1));
    }

    #[test]
    fn cross_correlation_recovers_known_shifts() {
        let s = textured(96, 96);
        let gsd = s.gsd();
        let offsets = [(5.0, -3.0), (-6.5, 2.5), (1.2, 7.9)];
        for (dx, dy) in offsets {
            let moved = shift_plane(s.band(0), 96, 96, dx / gsd, dy / gsd);
            let (ex, ey) = estimate_shift(s.band(0), &moved, 96, 96, 5).unwrap();
            assert!(
                (ex * gsd - dx).abs() < 0.5 * gsd,
                "dx {dx} estimated {}",
                ex * gsd
            );
            assert!(
                (ey * gsd - dy).abs() < 0.5 * gsd,
                "dy {dy} estimated {}",
                ey * gsd
            );
        }
    }
}
