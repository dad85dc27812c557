use crate::error::{Error, Result};
use crate::raster::BandStack;

/// Bilinear sample of a row-major plane at fractional pixel coordinates,
/// replicating edge pixels outside the extent.
#[inline]
pub fn bilinear_at(plane: &[f32], width: usize, height: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (width - 1) as f64);
    let y = y.clamp(0.0, (height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let p = |r: usize, c: usize| plane[r * width + c] as f64;
    let top = p(y0, x0) + fx * (p(y0, x1) - p(y0, x0));
    let bottom = p(y1, x0) + fx * (p(y1, x1) - p(y1, x0));
    top + fy * (bottom - top)
}

/// Bilinear resampling onto a `target_gsd` grid covering the same ground extent.
///
/// Pixel centers are aligned: output pixel i maps to source coordinate
/// (i + 0.5) * target_gsd / gsd - 0.5.
pub fn resample(raster: &BandStack, target_gsd: f64) -> Result<BandStack> {
    if !(target_gsd > 0.0 && target_gsd.is_finite()) {
        return Err(Error::invalid(format!(
            "target gsd must be positive, got {target_gsd}"
        )));
    }
    if target_gsd == raster.gsd() {
        return Ok(raster.clone());
    }
    let scale = target_gsd / raster.gsd();
    let out_w = (raster.width() as f64 / scale).round() as usize;
    let out_h = (raster.height() as f64 / scale).round() as usize;
    if out_w == 0 || out_h == 0 {
        return Err(Error::dim(format!(
            "resampling {}x{} from {} m to {target_gsd} m leaves no pixels",
            raster.height(),
            raster.width(),
            raster.gsd()
        )));
    }
    let (w, h) = (raster.width(), raster.height());
    let mut data = Vec::with_capacity(out_w * out_h * raster.bands());
    for b in 0..raster.bands() {
        let plane = raster.band(b);
        for r in 0..out_h {
            let y = (r as f64 + 0.5) * scale - 0.5;
            for c in 0..out_w {
                let x = (c as f64 + 0.5) * scale - 0.5;
                data.push(bilinear_at(plane, w, h, x, y) as f32);
            }
        }
    }
    BandStack::new(out_w, out_h, target_gsd, raster.band_ids().to_vec(), data)
}
