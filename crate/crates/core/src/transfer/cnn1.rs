//! CNN1 layout: magic `CNN1`, u32 little-endian manifest length, JSON manifest,
//! then per 1x1 layer its weight (out x in, row-major) and bias, little-endian
//! f32 or f16 according to the manifest dtype.

use std::collections::BTreeMap;
use std::path::Path;

use half::f16;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::convnet::{Averaging, Conv1x1, ConvNet, NetDtype};
use crate::dataset::TargetTransform;
use crate::error::{Error, Result};
use crate::parameter::Parameter;
use crate::regressor::TensorSpec;

pub const CNN1_MAGIC: &[u8; 4] = b"CNN1";

pub const FOLDING_ALGEBRA: &str = "layer 0: bias <- -f32(mu_x) per channel; \
layer 1: W1 <- W1 / sigma_x (per input column), b1 <- b1 - W1 (mu_x - f32(mu_x)); \
hidden layer k: W <- W * s, b <- (b - running_mean) * s + beta, s = gamma / sqrt(running_var + eps); \
last layer: W <- W * sigma_y, b <- b * sigma_y + mu_y; output <- inverse target transform";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub relu: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cnn1Manifest {
    pub format: String,
    pub version: u32,
    pub parameter: Parameter,
    pub dtype: NetDtype,
    pub layer0: Averaging,
    pub layers: Vec<LayerSpec>,
    pub tensors: Vec<TensorSpec>,
    pub output_transform: TargetTransform,
    pub blob_len: usize,
    pub blob_sha256: String,
    pub equivalence_report_sha256: Option<String>,
    pub folding: String,
    #[serde(default)]
    pub provenance: BTreeMap<String, serde_json::Value>,
}

impl ConvNet {
    fn tensor_layout(&self) -> Vec<TensorSpec> {
        let mut out = Vec::new();
        for (k, l) in self.layers.iter().enumerate() {
            out.push(TensorSpec {
                name: format!("conv{}.weight", k + 1),
                shape: l.weight.shape().to_vec(),
            });
            out.push(TensorSpec {
                name: format!("conv{}.bias", k + 1),
                shape: l.bias.shape().to_vec(),
            });
        }
        out
    }

    pub fn manifest(&self, blob: &[u8]) -> Cnn1Manifest {
        Cnn1Manifest {
            format: "CNN1".into(),
            version: 1,
            parameter: self.parameter,
            dtype: self.dtype,
            layer0: self.layer0,
            layers: self
                .layers
                .iter()
                .enumerate()
                .map(|(k, l)| LayerSpec {
                    name: format!("conv{}", k + 1),
                    in_channels: l.in_channels(),
                    out_channels: l.out_channels(),
                    kernel: 1,
                    relu: l.relu,
                })
                .collect(),
            tensors: self.tensor_layout(),
            output_transform: self.output_transform,
            blob_len: blob.len(),
            blob_sha256: hex::encode(Sha256::digest(blob)),
            equivalence_report_sha256: self.equivalence_report_sha256.clone(),
            folding: FOLDING_ALGEBRA.into(),
            provenance: self.provenance.clone(),
        }
    }

    fn blob(&self) -> Result<Vec<u8>> {
        let mut blob = Vec::with_capacity(self.parameter_count() * self.dtype.bytes());
        for l in &self.layers {
            for &v in l.weight.iter().chain(&l.bias) {
                match self.dtype {
                    NetDtype::F32 => blob.extend_from_slice(&v.to_le_bytes()),
                    NetDtype::F16 => {
                        let h = f16::from_f32(v);
                        if h.to_f32().to_bits() != v.to_bits() {
                            return Err(Error::Quantization(format!(
                                "{v} is not representable in f16; quantize before writing"
                            )));
                        }
                        blob.extend_from_slice(&h.to_le_bytes())
                    }
                }
            }
        }
        Ok(blob)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let blob = self.blob()?;
        let json = serde_json::to_vec(&self.manifest(&blob))?;
        let mut out = Vec::with_capacity(8 + json.len() + blob.len());
        out.extend_from_slice(CNN1_MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&blob);
        Ok(out)
    }

    /// Structural problems surface as `Error::Invariant` naming the failed check.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let inv = |m: String| Error::Invariant(m);
        if bytes.len() < 8 || &bytes[..4] != CNN1_MAGIC {
            return Err(inv("CNN1 magic bytes".into()));
        }
        let mlen = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        if bytes.len() < 8 + mlen {
            return Err(inv(format!(
                "CNN1 manifest length {mlen} exceeds file size {}",
                bytes.len()
            )));
        }
        let m: Cnn1Manifest = serde_json::from_slice(&bytes[8..8 + mlen])
            .map_err(|e| inv(format!("CNN1 manifest is valid JSON: {e}")))?;
        let blob = &bytes[8 + mlen..];
        if blob.len() != m.blob_len {
            return Err(inv(format!(
                "CNN1 blob length {} matches manifest {}",
                blob.len(),
                m.blob_len
            )));
        }
        if hex::encode(Sha256::digest(blob)) != m.blob_sha256 {
            return Err(inv("CNN1 blob checksum matches manifest".into()));
        }
        let width = m.dtype.bytes();
        let declared: usize = m.layers.iter().map(|l| l.out_channels * (l.in_channels + 1)).sum();
        if declared * width != blob.len() {
            return Err(inv(format!(
                "CNN1 blob holds {} bytes of declared layers",
                declared * width
            )));
        }
        let mut values = blob.chunks_exact(width).map(|c| match m.dtype {
            NetDtype::F32 => f32::from_le_bytes(c.try_into().expect("4 bytes")),
            NetDtype::F16 => f16::from_le_bytes(c.try_into().expect("2 bytes")).to_f32(),
        });
        let mut layers = Vec::with_capacity(m.layers.len());
        for spec in &m.layers {
            if spec.kernel != 1 {
                return Err(inv(format!("CNN1 layer {} is 1x1", spec.name)));
            }
            let w: Vec<f32> = values
                .by_ref()
                .take(spec.out_channels * spec.in_channels)
                .collect();
            let b: Vec<f32> = values.by_ref().take(spec.out_channels).collect();
            layers.push(Conv1x1 {
                weight: Array2::from_shape_vec((spec.out_channels, spec.in_channels), w)
                    .map_err(|e| inv(format!("CNN1 layer {} shape: {e}", spec.name)))?,
                bias: Array1::from(b),
                relu: spec.relu,
            });
        }
        let net = ConvNet {
            parameter: m.parameter,
            layer0: m.layer0,
            layers,
            output_transform: m.output_transform,
            dtype: m.dtype,
            equivalence_report_sha256: m.equivalence_report_sha256,
            provenance: m.provenance,
        };
        if net.tensor_layout() != m.tensors {
            return Err(inv("CNN1 tensor layout matches layers".into()));
        }
        net.validate()?;
        Ok(net)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}
