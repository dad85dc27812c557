use serde::{Deserialize, Serialize};

use super::policy::ThresholdPolicy;
use crate::error::{Error, Result};
use crate::raster::{GeoRef, GRID, PATCH_SIZE, WINDOW};
use crate::sensor_sim::Mask;
use crate::transfer::ContaminantMap;
use crate::Parameter;

/// Binary anomaly map of one patch, row-major 25x25.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertMap {
    /// 1 where the cell is valid and violates the policy.
    pub cells: Vec<u8>,
    /// Cells excluded from thresholding (non-finite value or cloud-covered window).
    pub invalid: Vec<bool>,
    pub policy_id: String,
    pub parameter: Parameter,
    pub georef: GeoRef,
}

impl AlertMap {
    pub fn exceed_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == 1).count()
    }

    pub fn invalid_count(&self) -> usize {
        self.invalid.iter().filter(|&&i| i).count()
    }

    pub fn valid_count(&self) -> usize {
        self.cells.len() - self.invalid_count()
    }

    /// Alerting cells over valid cells (0 when none are valid).
    pub fn exceed_fraction(&self) -> f64 {
        match self.valid_count() {
            0 => 0.0,
            n => self.exceed_count() as f64 / n as f64,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * GRID + col]
    }
}

/// Cloud-flagged fraction of each 10x10 window of a patch-sized mask.
pub fn window_cloud_fractions(mask: &Mask) -> Result<Vec<f64>> {
    if mask.width != PATCH_SIZE || mask.height != PATCH_SIZE {
        return Err(Error::dim(format!(
            "cloud mask must be {PATCH_SIZE}x{PATCH_SIZE}, got {}x{}",
            mask.height, mask.width
        )));
    }
    let mut out = vec![0.0; GRID * GRID];
    for (i, f) in out.iter_mut().enumerate() {
        let (r0, c0) = ((i / GRID) * WINDOW, (i % GRID) * WINDOW);
        let flagged = (r0..r0 + WINDOW)
            .flat_map(|r| (c0..c0 + WINDOW).map(move |c| (r, c)))
            .filter(|&(r, c)| mask.get(r, c))
            .count();
        *f = flagged as f64 / (WINDOW * WINDOW) as f64;
    }
    Ok(out)
}

/// Cell-wise bound check. Non-finite cells and windows whose cloud fraction
/// reaches `policy.max_cloud_fraction` are invalid and never alert.
pub fn threshold(
    map: &ContaminantMap,
    policy: &ThresholdPolicy,
    cloud_fractions: Option<&[f64]>,
) -> Result<AlertMap> {
    policy.validate()?;
    if map.parameter != policy.parameter {
        return Err(Error::Inconsistent(format!(
            "policy {} is for {} but the map holds {}",
            policy.policy_id, policy.parameter, map.parameter
        )));
    }
    if map.values.len() != GRID * GRID {
        return Err(Error::dim(format!(
            "map has {} cells, expected {}",
            map.values.len(),
            GRID * GRID
        )));
    }
    if let Some(c) = cloud_fractions {
        if c.len() != map.values.len() {
            return Err(Error::dim(format!(
                "{} cloud fractions for {} cells",
                c.len(),
                map.values.len()
            )));
        }
    }
    let mut cells = Vec::with_capacity(map.values.len());
    let mut invalid = Vec::with_capacity(map.values.len());
    for (i, &v) in map.values.iter().enumerate() {
        let cloudy = cloud_fractions.is_some_and(|c| c[i] >= policy.max_cloud_fraction);
        let bad = !v.is_finite() || cloudy;
        invalid.push(bad);
        cells.push((!bad && policy.violates(v as f64)) as u8);
    }
    Ok(AlertMap {
        cells,
        invalid,
        policy_id: policy.policy_id.clone(),
        parameter: map.parameter,
        georef: map.georef.clone(),
    })
}
