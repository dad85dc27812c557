//! PAT1 raster files.
//!
//! Layout (little-endian):
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 4    | magic `PAT1`                           |
//! | 4      | 4    | u32 width                              |
//! | 8      | 4    | u32 height                             |
//! | 12     | 4    | u32 bands                              |
//! | 16     | 4    | f32 gsd (m/px)                         |
//! | 20     | 4    | u32 dtype tag (0 = f32, 1 = u8)        |
//! | 24     | 8    | reserved, zero                         |
//! | 32     | ...  | band-planar payload, row-major per band |
//!
//! Georeference and band ids live in a JSON sidecar with the same basename and
//! a `.json` extension.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BandStack, GeoRef};

pub const MAGIC: &[u8; 4] = b"PAT1";
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 0,
    U8 = 1,
}

impl Dtype {
    fn from_tag(tag: u32) -> Result<Self> {
        match tag {
            0 => Ok(Dtype::F32),
            1 => Ok(Dtype::U8),
            t => Err(Error::format(format!("unknown PAT1 dtype tag {t}"))),
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub width: u32,
    pub height: u32,
    pub bands: u32,
    pub gsd: f32,
    pub dtype: Dtype,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub georef: Option<GeoRef>,
    pub band_ids: Vec<String>,
    /// Free-form annotations (mask fractions, map parameter, tile origin, ...).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, serde_json::Value>,
}

impl Sidecar {
    pub fn for_raster(raster: &BandStack, georef: Option<GeoRef>) -> Self {
        Self {
            georef,
            band_ids: raster.band_ids().to_vec(),
            attributes: BTreeMap::new(),
        }
    }

    pub fn with_attribute(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).expect("attribute values are plain data");
        self.attributes.insert(key.to_string(), v);
        self
    }
}

pub fn encode(raster: &BandStack, dtype: Dtype) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + raster.data().len() * dtype.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(raster.width() as u32).to_le_bytes());
    out.extend_from_slice(&(raster.height() as u32).to_le_bytes());
    out.extend_from_slice(&(raster.bands() as u32).to_le_bytes());
    out.extend_from_slice(&(raster.gsd() as f32).to_le_bytes());
    out.extend_from_slice(&(dtype as u32).to_le_bytes());
    out.extend_from_slice(&[0u8; 8]);
    match dtype {
        Dtype::F32 => {
            for v in raster.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Dtype::U8 => {
            for (i, &v) in raster.data().iter().enumerate() {
                if !(0.0..=255.0).contains(&v) || v.fract() != 0.0 {
                    return Err(Error::format(format!(
                        "value {v} at index {i} is not representable as u8"
                    )));
                }
                out.push(v as u8);
            }
        }
    }
    Ok(out)
}

pub fn decode_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(format!(
            "PAT1 file truncated: {} bytes",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format("bad magic, expected PAT1"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    Ok(Header {
        width: u32_at(4),
        height: u32_at(8),
        bands: u32_at(12),
        gsd: f32::from_le_bytes(bytes[16..20].try_into().unwrap()),
        dtype: Dtype::from_tag(u32_at(20))?,
    })
}

/// Decode header + payload. Band ids default to `B0..Bn` when `band_ids` is `None`.
pub fn decode(bytes: &[u8], band_ids: Option<Vec<String>>) -> Result<(Header, BandStack)> {
    let h = decode_header(bytes)?;
    let n = h.width as usize * h.height as usize * h.bands as usize;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != n * h.dtype.size() {
        return Err(Error::format(format!(
            "payload is {} bytes, header declares {} values of {} bytes",
            payload.len(),
            n,
            h.dtype.size()
        )));
    }
    let data: Vec<f32> = match h.dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        Dtype::U8 => payload.iter().map(|&b| b as f32).collect(),
    };
    let ids = band_ids.unwrap_or_else(|| (0..h.bands).map(|b| format!("B{b}")).collect());
    if ids.len() != h.bands as usize {
        return Err(Error::format(format!(
            "sidecar lists {} band ids for {} bands",
            ids.len(),
            h.bands
        )));
    }
    let raster = BandStack::new(h.width as usize, h.height as usize, h.gsd as f64, ids, data)?;
    Ok((h, raster))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write(path: &Path, raster: &BandStack, dtype: Dtype, sidecar: &Sidecar) -> Result<()> {
    if sidecar.band_ids != raster.band_ids() {
        return Err(Error::Inconsistent(
            "sidecar band ids differ from raster".into(),
        ));
    }
    fs::write(path, encode(raster, dtype)?)?;
    fs::write(sidecar_path(path), serde_json::to_vec_pretty(sidecar)?)?;
    Ok(())
}

/// Read a PAT1 raster and its sidecar. A missing sidecar yields default band ids and no georef.
pub fn read(path: &Path) -> Result<(BandStack, Sidecar, Dtype)> {
    let bytes = fs::read(path)?;
    let side_path = sidecar_path(path);
    let sidecar: Option<Sidecar> = if side_path.exists() {
        Some(serde_json::from_slice(&fs::read(side_path)?)?)
    } else {
        None
    };
    let (h, raster) = decode(&bytes, sidecar.as_ref().map(|s| s.band_ids.clone()))?;
    let sidecar = sidecar.unwrap_or_else(|| Sidecar::for_raster(&raster, None));
    Ok((raster, sidecar, h.dtype))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    #[test]
    fn header_is_32_bytes_with_golden_prefix() {
        let r = BandStack::filled(3, 2, 4.75, vec!["MS1".into()], 1.0).unwrap();
        let bytes = encode(&r, Dtype::F32).unwrap();
        assert_eq!(bytes.len(), 32 + 6 * 4);
        assert_eq!(
            &bytes[..32],
            &[
                b'P', b'A', b'T', b'1', 3, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, // dims
                0x00, 0x00, 0x98, 0x40, // 4.75f32
                0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0,
            ]
        );
        assert_eq!(&bytes[32..36], &1.0f32.to_le_bytes());
    }

    #[test]
    fn u8_rejects_fractional_values() {
        let r = BandStack::filled(2, 2, 1.0, vec!["m".into()], 0.5).unwrap();
        assert!(encode(&r, Dtype::U8).is_err());
        let r = BandStack::filled(2, 2, 1.0, vec!["m".into()], 1.0).unwrap();
        let bytes = encode(&r, Dtype::U8).unwrap();
        assert_eq!(bytes.len(), 36);
        assert_eq!(bytes[20], 1);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let r = BandStack::filled(2, 2, 1.0, vec!["m".into()], 0.5).unwrap();
        let mut bytes = encode(&r, Dtype::F32).unwrap();
        assert!(decode(&bytes[..40], None).is_err());
        bytes[0] = b'X';
        assert!(decode(&bytes, None).is_err());
        let mut bytes = encode(&r, Dtype::F32).unwrap();
        bytes[20] = 9;
        assert!(decode(&bytes, None).is_err());
    }

    #[test]
    fn file_round_trip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.pat1");
        let r = BandStack::from_fn(5, 4, 10.0, vec!["MS1".into(), "MS2".into()], |b, r, c| {
            (b + r * c) as f32 * 0.1
        })
        .unwrap();
        let g = GeoRef::new(
            44.1,
            9.8,
            10.0,
            NaiveDate::from_ymd_opt(2024, 3, 9).unwrap(),
        )
        .unwrap();
        let side = Sidecar::for_raster(&r, Some(g)).with_attribute("cloud_fraction", 0.25);
        write(&path, &r, Dtype::F32, &side).unwrap();
        assert!(dir.path().join("scene.json").exists());
        let (back, back_side, dtype) = read(&path).unwrap();
        assert_eq!(back, r);
        assert_eq!(back_side, side);
        assert_eq!(dtype, Dtype::F32);
    }

    proptest! {
        #[test]
        fn f32_payload_round_trips(w in 1usize..6, h in 1usize..6, vals in proptest::collection::vec(-1e6f32..1e6, 36)) {
            let data: Vec<f32> = vals.iter().copied().take(w * h).collect();
            let r = BandStack::new(w, h, 4.75, vec!["x".into()], data).unwrap();
            let (_, back) = decode(&encode(&r, Dtype::F32).unwrap(), Some(vec!["x".into()])).unwrap();
            prop_assert_eq!(back, r);
        }
    }
}
