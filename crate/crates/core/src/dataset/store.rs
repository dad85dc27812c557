//! SMP1 sample store: 32-byte header, fixed 80-byte records, trailing JSON manifest.
//!
//! Header: magic `SMP1`, u32 count, u32 feature count (7), u32 record length (80),
//! u64 manifest length, 8 reserved bytes. Record: 7 x f64 features, f64 target,
//! u32 patch index, u16 window row, u16 window col, u32 record-ref index,
//! u8 parameter code, 3 pad bytes. All little-endian.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::matching::Sample;
use super::normalize::NormStats;
use crate::error::{Error, Result};
use crate::parameter::Parameter;
use crate::raster::PATCH_BANDS;

pub const MAGIC: &[u8; 4] = b"SMP1";
pub const HEADER_LEN: usize = 32;
pub const RECORD_LEN: usize = 80;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RecordRef {
    pub station_id: String,
    pub date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub patch_ids: Vec<String>,
    pub records: Vec<RecordRef>,
    #[serde(default)]
    pub normalization: Option<NormStats>,
    #[serde(default)]
    pub provenance: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleStore {
    pub samples: Vec<Sample>,
    pub normalization: Option<NormStats>,
    pub provenance: BTreeMap<String, serde_json::Value>,
}

impl SampleStore {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self {
            samples,
            normalization: None,
            provenance: BTreeMap::new(),
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut manifest = Manifest {
            normalization: self.normalization.clone(),
            provenance: self.provenance.clone(),
            ..Manifest::default()
        };
        let mut patch_idx: HashMap<&str, u32> = HashMap::new();
        let mut rec_idx: HashMap<RecordRef, u32> = HashMap::new();
        let mut body = Vec::with_capacity(self.samples.len() * RECORD_LEN);
        for s in &self.samples {
            if s.features.iter().any(|v| !v.is_finite()) || !s.target.is_finite() {
                return Err(Error::invalid(format!(
                    "sample from {} has non-finite values",
                    s.station_id
                )));
            }
            let (row, col) = (u16::try_from(s.window.0), u16::try_from(s.window.1));
            let (Ok(row), Ok(col)) = (row, col) else {
                return Err(Error::invalid(format!(
                    "window index {:?} exceeds u16",
                    s.window
                )));
            };
            let next = patch_idx.len() as u32;
            let p = *patch_idx.entry(s.patch_id.as_str()).or_insert_with(|| {
                manifest.patch_ids.push(s.patch_id.clone());
                next
            });
            let key = RecordRef {
                station_id: s.station_id.clone(),
                date: s.date,
            };
            let next = rec_idx.len() as u32;
            let r = *rec_idx.entry(key.clone()).or_insert_with(|| {
                manifest.records.push(key);
                next
            });
            for f in &s.features {
                body.extend_from_slice(&f.to_le_bytes());
            }
            body.extend_from_slice(&s.target.to_le_bytes());
            body.extend_from_slice(&p.to_le_bytes());
            body.extend_from_slice(&row.to_le_bytes());
            body.extend_from_slice(&col.to_le_bytes());
            body.extend_from_slice(&r.to_le_bytes());
            body.push(s.parameter.code());
            body.extend_from_slice(&[0u8; 3]);
        }
        let manifest = serde_json::to_vec(&manifest)?;
        let mut out = Vec::with_capacity(HEADER_LEN + body.len() + manifest.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.samples.len() as u32).to_le_bytes());
        out.extend_from_slice(&(PATCH_BANDS as u32).to_le_bytes());
        out.extend_from_slice(&(RECORD_LEN as u32).to_le_bytes());
        out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
        out.extend_from_slice(&[0u8; 8]);
        out.extend_from_slice(&body);
        out.extend_from_slice(&manifest);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(Error::format("not an SMP1 sample store"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let count = u32_at(4) as usize;
        if u32_at(8) as usize != PATCH_BANDS || u32_at(12) as usize != RECORD_LEN {
            return Err(Error::format(
                "SMP1 feature count or record length mismatch",
            ));
        }
        let manifest_len = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
        let body_end = HEADER_LEN + count * RECORD_LEN;
        if bytes.len() != body_end + manifest_len {
            return Err(Error::format(format!(
                "SMP1 length {} does not match header ({count} records, {manifest_len} manifest bytes)",
                bytes.len()
            )));
        }
        let manifest: Manifest = serde_json::from_slice(&bytes[body_end..])?;
        let mut samples = Vec::with_capacity(count);
        for i in 0..count {
            let rec = &bytes[HEADER_LEN + i * RECORD_LEN..HEADER_LEN + (i + 1) * RECORD_LEN];
            let f64_at = |o: usize| f64::from_le_bytes(rec[o..o + 8].try_into().expect("8 bytes"));
            let u32_at =
                |o: usize| u32::from_le_bytes(rec[o..o + 4].try_into().expect("4 bytes")) as usize;
            let u16_at =
                |o: usize| u16::from_le_bytes(rec[o..o + 2].try_into().expect("2 bytes")) as usize;
            let (p, r) = (u32_at(64), u32_at(72));
            let (Some(patch_id), Some(rref)) = (manifest.patch_ids.get(p), manifest.records.get(r))
            else {
                return Err(Error::format(format!(
                    "SMP1 record {i} references missing manifest entries"
                )));
            };
            let parameter = Parameter::from_code(rec[76])?;
            samples.push(Sample {
                features: std::array::from_fn(|b| f64_at(8 * b)),
                target: f64_at(56),
                parameter,
                patch_id: patch_id.clone(),
                window: (u16_at(68), u16_at(70)),
                station_id: rref.station_id.clone(),
                date: rref.date,
            });
        }
        Ok(Self {
            samples,
            normalization: manifest.normalization,
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

#[cfg(test)]
mod tests {
    use super::*;

    fn samples() -> Vec<Sample> {
        (0..6)
            .map(|i| Sample {
                features: std::array::from_fn(|b| 0.01 * (i * 7 + b) as f64),
                target: i as f64 * 1.5,
                parameter: if i % 2 == 0 {
                    Parameter::Turbidity
                } else {
                    Parameter::Ph
                },
                patch_id: format!("patch_{}", i / 3),
                window: (i, 24 - i),
                station_id: format!("st{}", i % 4),
                date: NaiveDate::from_ymd_opt(2023, 5, 1 + i as u32).unwrap(),
            })
            .collect()
    }

    #[test]
    fn round_trip_with_manifest() {
        let mut store = SampleStore::new(samples());
        store.normalization = Some(NormStats::identity());
        store.provenance.insert("seed".into(), 7.into());
        let bytes = store.encode().unwrap();
        assert_eq!(&bytes[..4], b"SMP1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 6);
        assert_eq!(SampleStore::decode(&bytes).unwrap(), store);
    }

    #[test]
    fn truncated_file_rejected() {
        let bytes = SampleStore::new(samples()).encode().unwrap();
        assert!(matches!(
            SampleStore::decode(&bytes[..bytes.len() - 1]),
            Err(Error::Format(_))
        ));
        assert!(SampleStore::decode(b"SMP0").is_err());
    }

    #[test]
    fn empty_store() {
        let bytes = SampleStore::new(vec![]).encode().unwrap();
        assert!(SampleStore::decode(&bytes).unwrap().samples.is_empty());
    }
}
