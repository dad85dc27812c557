use half::f16;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Patch;
use crate::transfer::{ConvNet, NetDtype};

/// Default pass threshold on the per-cell map deviation, physical units.
pub const DEFAULT_MAX_DEVIATION: f64 = 0.05;

/// Round to the nearest binary16 (ties to even) and expand back to f32.
pub fn quantize_value(v: f32) -> Result<f32> {
    let q = f16::from_f32(v).to_f32();
    if v.is_finite() && !q.is_finite() {
        return Err(Error::Quantization(format!(
            "{v} overflows binary16 (max {})",
            f16::MAX
        )));
    }
    Ok(q)
}

/// Every 1x1 weight and bias rounded to binary16. Layer 0 is a fixed constant
/// applied by the averaging operator and is not part of the blob.
pub fn quantize_fp16(net: &ConvNet) -> Result<ConvNet> {
    let mut out = net.clone();
    // the rounding of the layer-0 bias is absorbed into layer 1 before that is rounded
    let mut delta = [0.0f64; crate::raster::PATCH_BANDS];
    for (d, v) in delta.iter_mut().zip(out.layer0.bias.iter_mut()) {
        let q = quantize_value(*v).map_err(|e| match e {
            Error::Quantization(m) => Error::Quantization(format!("layer 0: {m}")),
            other => other,
        })?;
        *d = q as f64 - *v as f64;
        *v = q;
    }
    if let Some(l) = out.layers.first_mut() {
        for (b, row) in l.bias.iter_mut().zip(l.weight.outer_iter()) {
            let shift: f64 = row.iter().zip(&delta).map(|(&w, d)| quantize_value(w).map_or(w as f64, f64::from) * d).sum();
            *b = (*b as f64 - shift) as f32;
        }
    }
    for (k, l) in out.layers.iter_mut().enumerate() {
        for v in l.weight.iter_mut().chain(l.bias.iter_mut()) {
            *v = quantize_value(*v).map_err(|e| match e {
                Error::Quantization(m) => Error::Quantization(format!("layer {}: {m}", k + 1)),
                other => other,
            })?;
        }
    }
    out.dtype = NetDtype::F16;
    out.equivalence_report_sha256 = None;
    out.provenance
        .insert("quantized_from".into(), "f32".into());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantReport {
    pub model_bytes_fp32: usize,
    pub model_bytes_fp16: usize,
    pub max_map_deviation: f64,
    pub mean_map_deviation: f64,
    pub patches_tested: usize,
    pub threshold: f64,
    pub passed: bool,
}

/// Encoded sizes of both nets plus per-cell deviation statistics of their maps.
pub fn compare_quantized(
    net32: &ConvNet,
    net16: &ConvNet,
    patches: &[Patch],
    threshold: f64,
) -> Result<QuantReport> {
    if net32.channel_chain() != net16.channel_chain() {
        return Err(Error::Inconsistent(format!(
            "channel chains differ: {:?} vs {:?}",
            net32.channel_chain(),
            net16.channel_chain()
        )));
    }
    let model_bytes_fp32 = net32.encode()?.len();
    let model_bytes_fp16 = net16.encode()?.len();
    let mut max = 0.0f64;
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for p in patches {
        let a = net32.infer_patch(p)?;
        let b = net16.infer_patch(p)?;
        for (x, y) in a.values.iter().zip(&b.values) {
            let d = (*x as f64 - *y as f64).abs();
            max = max.max(d);
            sum += d;
            n += 1;
        }
    }
    Ok(QuantReport {
        model_bytes_fp32,
        model_bytes_fp16,
        max_map_deviation: max,
        mean_map_deviation: if n > 0 { sum / n as f64 } else { 0.0 },
        patches_tested: patches.len(),
        threshold,
        passed: max < threshold,
    })
}
