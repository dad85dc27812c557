use serde::{Deserialize, Serialize};

use super::map::AlertMap;
use crate::error::{Error, Result};
use crate::parameter::Parameter;
use crate::transfer::ContaminantMap;

pub const MAX_MESSAGE_BYTES: usize = 512;
/// Longest accepted scene or policy id; ids use `[A-Za-z0-9._-]` so JSON needs no escapes.
pub const MAX_ID_LEN: usize = 32;

pub(crate) fn check_id(what: &str, id: &str) -> Result<()> {
    if id.is_empty() || id.len() > MAX_ID_LEN {
        return Err(Error::invalid(format!(
            "{what} must have 1..={MAX_ID_LEN} characters, got {}",
            id.len()
        )));
    }
    if let Some(c) = id
        .chars()
        .find(|c| !(c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-')))
    {
        return Err(Error::invalid(format!("{what} contains {c:?}")));
    }
    Ok(())
}

/// Patch-level downlink record; carries statistics of violating cells only.
/// Field order is the serialization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlertMessage {
    pub scene_id: String,
    pub patch_index: u32,
    pub center_lat: f64,
    pub center_lon: f64,
    pub parameter: Parameter,
    pub policy_id: String,
    pub exceed_count: u32,
    pub valid_count: u32,
    pub invalid_count: u32,
    pub exceed_fraction: f64,
    pub min_value: f64,
    pub max_value: f64,
    pub mean_value: f64,
    /// Acquisition time of the scene, RFC 3339.
    pub timestamp: String,
}

impl AlertMessage {
    /// None when the patch has no violating cell or does not exceed `min_exceed_fraction`.
    pub fn from_patch(
        scene_id: &str,
        patch_index: usize,
        map: &ContaminantMap,
        alerts: &AlertMap,
        min_exceed_fraction: f64,
    ) -> Option<Self> {
        if alerts.exceed_count() == 0 || alerts.exceed_fraction() <= min_exceed_fraction {
            return None;
        }
        let violating: Vec<f64> = map
            .values
            .iter()
            .zip(&alerts.cells)
            .filter(|(_, &c)| c == 1)
            .map(|(&v, _)| v as f64)
            .collect();
        let n = violating.len() as f64;
        Some(Self {
            scene_id: scene_id.to_string(),
            patch_index: patch_index as u32,
            center_lat: alerts.georef.center_lat,
            center_lon: alerts.georef.center_lon,
            parameter: alerts.parameter,
            policy_id: alerts.policy_id.clone(),
            exceed_count: alerts.exceed_count() as u32,
            valid_count: alerts.valid_count() as u32,
            invalid_count: alerts.invalid_count() as u32,
            exceed_fraction: alerts.exceed_fraction(),
            min_value: violating.iter().cloned().fold(f64::INFINITY, f64::min),
            max_value: violating.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            mean_value: violating.iter().sum::<f64>() / n,
            timestamp: format!("{}T00:00:00Z", alerts.georef.acquisition_date),
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_id("scene_id", &self.scene_id)?;
        check_id("policy_id", &self.policy_id)?;
        if self.exceed_count == 0 {
            return Err(Error::invalid("alert message without violating cells"));
        }
        let floats = [
            self.center_lat,
            self.center_lon,
            self.exceed_fraction,
            self.min_value,
            self.max_value,
            self.mean_value,
        ];
        if floats.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("alert message holds a non-finite number"));
        }
        if chrono::DateTime::parse_from_rfc3339(&self.timestamp).is_err() || self.timestamp.len() > 32
        {
            return Err(Error::invalid(format!(
                "timestamp {:?} is not a short RFC 3339 time",
                self.timestamp
            )));
        }
        Ok(())
    }
}

/// One JSON line (newline-terminated), at most `MAX_MESSAGE_BYTES` bytes.
pub fn serialize_alert(msg: &AlertMessage) -> Result<Vec<u8>> {
    msg.validate()?;
    let mut out = serde_json::to_vec(msg)?;
    out.push(b'\n');
    if out.len() > MAX_MESSAGE_BYTES {
        return Err(Error::format(format!(
            "alert message is {} bytes, limit {MAX_MESSAGE_BYTES}",
            out.len()
        )));
    }
    Ok(out)
}

pub fn parse_alert(line: &[u8]) -> Result<AlertMessage> {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    let msg: AlertMessage = serde_json::from_slice(line)?;
    msg.validate()?;
    Ok(msg)
}
