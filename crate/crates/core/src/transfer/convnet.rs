use std::collections::BTreeMap;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::map::ContaminantMap;
use crate::dataset::TargetTransform;
use crate::error::{Error, Result};
use crate::parameter::Parameter;
use crate::raster::{Patch, GRID, PATCH_BANDS, PATCH_SIZE, WINDOW};

pub const AVERAGING_WEIGHT: f32 = 1.0 / (WINDOW * WINDOW) as f32;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetDtype {
    #[default]
    F32,
    F16,
}

impl NetDtype {
    pub fn bytes(self) -> usize {
        match self {
            NetDtype::F32 => 4,
            NetDtype::F16 => 2,
        }
    }
}

/// Layer 0: fixed depthwise 10x10 stride-10 convolution with uniform weight 1/100.
///
/// `bias` is added per channel in f64 before the activations drop to f32; the
/// transfer sets it to minus the training feature mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averaging {
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub weight: f32,
    #[serde(default)]
    pub bias: [f32; PATCH_BANDS],
}

impl Default for Averaging {
    fn default() -> Self {
        Self {
            channels: PATCH_BANDS,
            kernel: WINDOW,
            stride: WINDOW,
            weight: AVERAGING_WEIGHT,
            bias: [0.0; PATCH_BANDS],
        }
    }
}

fn is_f16(v: f32) -> bool {
    half::f16::from_f32(v).to_f32().to_bits() == v.to_bits()
}

/// 1x1 convolution; `weight` is out-channels x in-channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1x1 {
    pub weight: Array2<f32>,
    pub bias: Array1<f32>,
    pub relu: bool,
}

impl Conv1x1 {
    pub fn in_channels(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_channels(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvNet {
    pub parameter: Parameter,
    pub layer0: Averaging,
    /// Layers 1..=N.
    pub layers: Vec<Conv1x1>,
    /// Inverse applied to the last layer's output.
    pub output_transform: TargetTransform,
    /// Storage precision; f16 nets hold f16-representable values in f32 tensors.
    pub dtype: NetDtype,
    /// sha256 of the equivalence report that certified this net.
    pub equivalence_report_sha256: Option<String>,
    pub provenance: BTreeMap<String, serde_json::Value>,
}

impl ConvNet {
    /// Layer count including the averaging layer.
    pub fn depth(&self) -> usize {
        self.layers.len() + 1
    }

    /// Channel count after each layer, starting with the input.
    pub fn channel_chain(&self) -> Vec<usize> {
        let mut chain = vec![self.layer0.channels];
        chain.extend(self.layers.iter().map(|l| l.out_channels()));
        chain
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invariant(m));
        let a = &self.layer0;
        if a.kernel != WINDOW || a.stride != WINDOW || a.channels != PATCH_BANDS {
            return bad(format!(
                "layer0 must be a {WINDOW}x{WINDOW} stride-{WINDOW} averaging over {PATCH_BANDS} channels, got kernel {} stride {} channels {}",
                a.kernel, a.stride, a.channels
            ));
        }
        if a.weight.to_bits() != AVERAGING_WEIGHT.to_bits() {
            return bad(format!("layer0 weight must be exactly 1/100, got {}", a.weight));
        }
        if a.bias.iter().any(|v| !v.is_finite()) {
            return bad("layer0 has a non-finite bias".into());
        }
        if self.layers.is_empty() {
            return bad("network has no 1x1 layers".into());
        }
        let mut prev = a.channels;
        for (k, l) in self.layers.iter().enumerate() {
            if l.in_channels() != prev {
                return bad(format!(
                    "layer {} expects {} channels but receives {prev}",
                    k + 1,
                    l.in_channels()
                ));
            }
            if l.bias.len() != l.out_channels() {
                return bad(format!("layer {} bias length mismatch", k + 1));
            }
            if l.weight.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return bad(format!("layer {} has non-finite parameters", k + 1));
            }
            let last = k + 1 == self.layers.len();
            if l.relu == last {
                return bad(format!(
                    "layer {}: ReLU must follow every layer except the last",
                    k + 1
                ));
            }
            prev = l.out_channels();
        }
        if prev != 1 {
            return bad(format!("output has {prev} channels, expected 1"));
        }
        if self.dtype == NetDtype::F16 {
            if !a.bias.iter().all(|&v| is_f16(v)) {
                return bad("layer0 bias holds values not representable in f16".into());
            }
            if let Some((k, _)) = self.layers.iter().enumerate().find(|(_, l)| {
                l.weight
                    .iter()
                    .chain(&l.bias)
                    .any(|&v| !is_f16(v))
            }) {
                return bad(format!(
                    "layer {} holds values not representable in f16",
                    k + 1
                ));
            }
        }
        Ok(())
    }

    /// Layer 0 on a patch: channels x (25 * 25) window means.
    pub fn average(&self, patch: &Patch) -> Array2<f32> {
        let r = patch.raster();
        let (k, s) = (self.layer0.kernel, self.layer0.stride);
        let out = (PATCH_SIZE - k) / s + 1;
        let w = self.layer0.weight as f64;
        let bias = self.layer0.bias;
        let mut acts = Array2::zeros((self.layer0.channels, out * out));
        let mut acc = vec![0f64; out];
        for (b, mut row) in acts.outer_iter_mut().enumerate() {
            let plane = r.band(b);
            for oy in 0..out {
                acc.iter_mut().for_each(|a| *a = 0.0);
                for y in oy * s..oy * s + k {
                    let line = &plane[y * PATCH_SIZE..];
                    for (ox, a) in acc.iter_mut().enumerate() {
                        *a += line[ox * s..ox * s + k]
                            .iter()
                            .map(|&v| v as f64)
                            .sum::<f64>();
                    }
                }
                for (ox, a) in acc.iter().enumerate() {
                    row[oy * out + ox] = (a * w + bias[b] as f64) as f32;
                }
            }
        }
        acts
    }

    /// Layers 1..=N on channel-major activations (channels x cells).
    pub fn apply_layers(&self, mut acts: Array2<f32>) -> Result<Array2<f32>> {
        for (k, l) in self.layers.iter().enumerate() {
            let mut out = Array2::zeros((l.out_channels(), acts.ncols()));
            general_mat_mul(1.0, &l.weight, &acts, 0.0, &mut out);
            for (mut row, &b) in out.outer_iter_mut().zip(&l.bias) {
                if l.relu {
                    row.mapv_inplace(|v| (v + b).max(0.0));
                } else {
                    row.mapv_inplace(|v| v + b);
                }
            }
            if let Some(i) = out.iter().position(|v| !v.is_finite()) {
                return Err(Error::Numeric {
                    layer: k + 1,
                    detail: format!(
                        "channel {} cell {} is {}",
                        i / out.ncols(),
                        i % out.ncols(),
                        out.as_slice().map(|s| s[i]).unwrap_or(f32::NAN)
                    ),
                });
            }
            acts = out;
        }
        Ok(acts)
    }

    /// One forward pass over a 256x256x7 patch.
    pub fn infer_patch(&self, patch: &Patch) -> Result<ContaminantMap> {
        let out = self.apply_layers(self.average(patch))?;
        debug_assert_eq!(out.dim(), (1, GRID * GRID));
        let t = self.output_transform;
        let values = out.iter().map(|&v| t.inverse(v as f64) as f32).collect();
        ContaminantMap::new(values, self.parameter, patch.georef().clone())
    }
}

/// Per-patch inference on `jobs` worker threads (0 = all cores); output order follows input.
pub fn infer_patches(net: &ConvNet, patches: &[Patch], jobs: usize) -> Result<Vec<ContaminantMap>> {
    if jobs == 1 {
        return patches.iter().map(|p| net.infer_patch(p)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| patches.par_iter().map(|p| net.infer_patch(p)).collect())
}
