//! Trained contaminant regressor and its MDL1 file.
//!
//! MDL1 layout: magic `MDL1`, u32 little-endian manifest length, JSON manifest,
//! then every tensor of `MlpParams::layout()` as little-endian f32, in order.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::network::predict;
use super::params::{MlpParams, TensorSpec};
use super::real::Real;
use super::train::{fit, History, TrainConfig, TrainData};
use crate::dataset::{NormStats, Sample, TargetTransform};
use crate::error::{Error, Result};
use crate::parameter::Parameter;
use crate::raster::PATCH_BANDS;

pub const MDL1_MAGIC: &[u8; 4] = b"MDL1";

#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    pub parameter: Parameter,
    pub params: MlpParams<f32>,
    pub norm: NormStats,
    pub provenance: BTreeMap<String, serde_json::Value>,
}

/// Standardized design matrix and targets.
pub fn design_matrix<T: Real>(samples: &[Sample], norm: &NormStats) -> (Array2<T>, Array1<T>) {
    let x = Array2::from_shape_fn((samples.len(), PATCH_BANDS), |(i, j)| {
        T::of((samples[i].features[j] - norm.feature_mean[j]) / norm.feature_std[j])
    });
    let y = samples
        .iter()
        .map(|s| T::of(norm.normalize_target(s.target)))
        .collect();
    (x, y)
}

fn check_parameter(samples: &[Sample], parameter: Parameter) -> Result<()> {
    match samples.iter().find(|s| s.parameter != parameter) {
        Some(s) => Err(Error::invalid(format!(
            "sample from {} is {} but the model predicts {parameter}",
            s.station_id, s.parameter
        ))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub regressor: Regressor,
    pub history: History,
}

/// Fit normalization on `train`, build the configured architecture and train it.
pub fn train_regressor(
    train: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
    transform: TargetTransform,
) -> Result<TrainOutcome> {
    let parameter = train
        .first()
        .ok_or_else(|| Error::invalid("empty training split"))?
        .parameter;
    check_parameter(train, parameter)?;
    check_parameter(val, parameter)?;
    cfg.validate()?;
    if cfg.layer_dims.first() != Some(&PATCH_BANDS) || cfg.layer_dims.last() != Some(&1) {
        return Err(Error::invalid(format!(
            "layer dims {:?} must run from {PATCH_BANDS} to 1",
            cfg.layer_dims
        )));
    }
    let norm = NormStats::fit(train, transform)?;
    let (x, y) = design_matrix::<f32>(train, &norm);
    let (xv, yv) = design_matrix::<f32>(val, &norm);
    let mut params = MlpParams::<f32>::new(&cfg.layer_dims, cfg.seed)?;
    let data = TrainData {
        x: x.view(),
        y: y.view(),
        val: (!val.is_empty()).then(|| (xv.view(), yv.view())),
        target_scale: norm.target_std,
    };
    let history = fit(&mut params, &data, cfg)?;
    let mut provenance = BTreeMap::new();
    provenance.insert("train_config".into(), serde_json::to_value(cfg)?);
    provenance.insert("train_samples".into(), train.len().into());
    provenance.insert("val_samples".into(), val.len().into());
    provenance.insert("epochs_run".into(), history.epochs.len().into());
    if let Some(b) = history.best_epoch {
        provenance.insert("best_epoch".into(), b.into());
    }
    Ok(TrainOutcome {
        regressor: Regressor {
            parameter,
            params,
            norm,
            provenance,
        },
        history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Validation,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse: f64,
    pub mae: f64,
    pub split: Split,
    pub n: usize,
}

/// (rmse, mae) of predictions against targets.
pub fn metrics(pred: &[f64], target: &[f64]) -> Result<(f64, f64)> {
    if pred.is_empty() || pred.len() != target.len() {
        return Err(Error::invalid(format!(
            "metrics need equal non-empty inputs, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    let (sq, ab) = pred.iter().zip(target).fold((0.0, 0.0), |(s, a), (p, t)| {
        (s + (p - t).powi(2), a + (p - t).abs())
    });
    Ok(((sq / n).sqrt(), ab / n))
}

impl Regressor {
    /// Physical-unit predictions for raw (unnormalized) feature vectors.
    pub fn predict_features(&self, features: &[[f64; PATCH_BANDS]]) -> Result<Vec<f64>> {
        if features.is_empty() {
            return Ok(Vec::new());
        }
        let x = Array2::from_shape_fn((features.len(), PATCH_BANDS), |(i, j)| {
            ((features[i][j] - self.norm.feature_mean[j]) / self.norm.feature_std[j]) as f32
        });
        Ok(predict(&self.params, x.view())?
            .iter()
            .map(|&z| self.norm.denormalize_target(z as f64))
            .collect())
    }

    pub fn evaluate(&self, samples: &[Sample], split: Split) -> Result<EvalReport> {
        check_parameter(samples, self.parameter)?;
        let feats: Vec<[f64; PATCH_BANDS]> = samples.iter().map(|s| s.features).collect();
        let pred = self.predict_features(&feats)?;
        let target: Vec<f64> = samples.iter().map(|s| s.target).collect();
        let (rmse, mae) = metrics(&pred, &target)?;
        Ok(EvalReport {
            rmse,
            mae,
            split,
            n: samples.len(),
        })
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        self.params.validate()?;
        let mut blob = Vec::with_capacity(
            4 * self
                .params
                .all_tensors()
                .iter()
                .map(|t| t.len())
                .sum::<usize>(),
        );
        for t in self.params.all_tensors() {
            for v in t {
                blob.extend_from_slice(&v.to_le_bytes());
            }
        }
        let manifest = Mdl1Manifest {
            format: "MDL1".into(),
            version: 1,
            parameter: self.parameter,
            architecture: Architecture::of(&self.params),
            dtype: "f32".into(),
            tensors: self.params.layout(),
            blob_len: blob.len(),
            blob_sha256: hex::encode(Sha256::digest(&blob)),
            normalization: self.norm.clone(),
            provenance: self.provenance.clone(),
        };
        let json = serde_json::to_vec(&manifest)?;
        let mut out = Vec::with_capacity(8 + json.len() + blob.len());
        out.extend_from_slice(MDL1_MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&blob);
        Ok(out)
    }

    /// Every structural problem surfaces as `Error::Invariant` naming the check that failed.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let inv = |m: String| Error::Invariant(m);
        if bytes.len() < 8 || &bytes[..4] != MDL1_MAGIC {
            return Err(inv("MDL1 magic bytes".into()));
        }
        let mlen = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        if bytes.len() < 8 + mlen {
            return Err(inv(format!(
                "MDL1 manifest length {mlen} exceeds file size {}",
                bytes.len()
            )));
        }
        let manifest: Mdl1Manifest = serde_json::from_slice(&bytes[8..8 + mlen])
            .map_err(|e| inv(format!("MDL1 manifest is valid JSON: {e}")))?;
        if manifest.dtype != "f32" {
            return Err(inv(format!("MDL1 dtype is f32 (found {})", manifest.dtype)));
        }
        let blob = &bytes[8 + mlen..];
        if blob.len() != manifest.blob_len {
            return Err(inv(format!(
                "MDL1 blob length {} matches manifest {}",
                blob.len(),
                manifest.blob_len
            )));
        }
        if hex::encode(Sha256::digest(blob)) != manifest.blob_sha256 {
            return Err(inv("MDL1 blob checksum matches manifest".into()));
        }
        let a = &manifest.architecture;
        let mut params = MlpParams::<f32>::new(&a.layer_dims, 0)
            .map_err(|e| inv(format!("MDL1 architecture: {e}")))?;
        if params.layout() != manifest.tensors {
            return Err(inv("MDL1 tensor layout matches architecture".into()));
        }
        let expected: usize = 4 * manifest
            .tensors
            .iter()
            .map(|t| t.shape.iter().product::<usize>())
            .sum::<usize>();
        if expected != blob.len() {
            return Err(inv(format!(
                "MDL1 blob holds {expected} bytes of declared tensors"
            )));
        }
        let mut off = 0;
        for t in params.all_tensors_mut() {
            for v in t.iter_mut() {
                *v = f32::from_le_bytes(blob[off..off + 4].try_into().expect("4 bytes"));
                off += 4;
            }
        }
        params.dropout_p = a.dropout_p;
        params.bn_eps = a.bn_eps;
        params.bn_momentum = a.bn_momentum;
        params.bn_updates = a.bn_updates;
        params.validate()?;
        manifest
            .normalization
            .validate()
            .map_err(|e| inv(format!("MDL1 normalization: {e}")))?;
        Ok(Self {
            parameter: manifest.parameter,
            params,
            norm: manifest.normalization,
            provenance: manifest.provenance,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub layer_dims: Vec<usize>,
    pub block: String,
    pub dropout_p: f64,
    pub bn_eps: f64,
    pub bn_momentum: f64,
    pub bn_updates: u64,
}

impl Architecture {
    fn of(p: &MlpParams<f32>) -> Self {
        Self {
            layer_dims: p.layer_dims.clone(),
            block: "linear-batchnorm-relu-dropout".into(),
            dropout_p: p.dropout_p,
            bn_eps: p.bn_eps,
            bn_momentum: p.bn_momentum,
            bn_updates: p.bn_updates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mdl1Manifest {
    pub format: String,
    pub version: u32,
    pub parameter: Parameter,
    pub architecture: Architecture,
    pub dtype: String,
    pub tensors: Vec<TensorSpec>,
    pub blob_len: usize,
    pub blob_sha256: String,
    pub normalization: NormStats,
    #[serde(default)]
    pub provenance: BTreeMap<String, serde_json::Value>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn samples(n: usize) -> Vec<Sample> {
        (0..n)
            .map(|i| {
                let t = i as f64 / n as f64;
                Sample {
                    features: std::array::from_fn(|b| {
                        0.03 + 0.01 * b as f64 + 0.002 * t * (b as f64 - 3.0)
                    }),
                    target: 2.0 + 5.0 * t,
                    parameter: Parameter::Turbidity,
                    patch_id: "p".into(),
                    window: (i % 25, i / 25),
                    station_id: format!("s{i}"),
                    date: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
                }
            })
            .collect()
    }

    fn small() -> Regressor {
        let cfg = TrainConfig {
            epochs: 3,
            layer_dims: vec![7, 16, 8, 1],
            batch_size: 16,
            ..TrainConfig::default()
        };
        train_regressor(&samples(64), &samples(16), &cfg, TargetTransform::Identity)
            .unwrap()
            .regressor
    }

    #[test]
    fn metrics_closed_form() {
        assert_eq!(metrics(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), (0.0, 0.0));
        // constant predictor 3 against {1, 2, 6}: residuals 2, 1, -3
        let (rmse, mae) = metrics(&[3.0; 3], &[1.0, 2.0, 6.0]).unwrap();
        assert!((rmse - (14.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((mae - 2.0).abs() < 1e-12);
        assert!(rmse >= mae);
    }

    #[test]
    fn mdl1_round_trip() {
        let r = small();
        let back = Regressor::decode(&r.encode().unwrap()).unwrap();
        assert_eq!(back, r);
        let s = samples(10);
        assert_eq!(
            back.evaluate(&s, Split::Test).unwrap(),
            r.evaluate(&s, Split::Test).unwrap()
        );
    }

    #[test]
    fn corrupted_mdl1_names_invariant() {
        let bytes = small().encode().unwrap();
        let mut flipped = bytes.clone();
        let last = flipped.len() - 3;
        flipped[last] ^= 0x40;
        let msg = Regressor::decode(&flipped).unwrap_err().to_string();
        assert!(
            msg.contains("invariant violated") && msg.contains("checksum"),
            "{msg}"
        );
        let msg = Regressor::decode(&bytes[..bytes.len() - 4])
            .unwrap_err()
            .to_string();
        assert!(msg.contains("blob length"), "{msg}");
        assert!(Regressor::decode(b"MDL0\0\0\0\0")
            .unwrap_err()
            .to_string()
            .contains("magic"));
    }

    #[test]
    fn mixed_parameters_rejected() {
        let mut s = samples(8);
        s[3].parameter = Parameter::Ph;
        let cfg = TrainConfig {
            epochs: 1,
            layer_dims: vec![7, 4, 1],
            ..TrainConfig::default()
        };
        assert!(train_regressor(&s, &[], &cfg, TargetTransform::Identity).is_err());
    }

    #[test]
    fn independent_models_share_hyperparameters() {
        let cfg = TrainConfig {
            epochs: 2,
            layer_dims: vec![7, 16, 8, 1],
            batch_size: 16,
            ..TrainConfig::default()
        };
        let turb = train_regressor(&samples(64), &[], &cfg, TargetTransform::Identity)
            .unwrap()
            .regressor;
        let mut ph_samples = samples(64);
        for s in &mut ph_samples {
            s.parameter = Parameter::Ph;
            s.target = 7.5 + 0.1 * s.features[0];
        }
        let ph = train_regressor(&ph_samples, &[], &cfg, TargetTransform::Identity)
            .unwrap()
            .regressor;
        assert_eq!(turb.params.layout(), ph.params.layout());
        assert_ne!(turb.params, ph.params);
    }
}
