use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::convnet::ConvNet;
use crate::dataset::grid_features;
use crate::error::{Error, Result};
use crate::raster::{window_average, Patch, GRID, PATCH_BANDS, WINDOW};
use crate::regressor::Regressor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub patch: usize,
    pub row: usize,
    pub col: usize,
    pub cnn: f64,
    pub fc: f64,
}

/// Cell-wise comparison of a ConvNet against its source regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub n_patches: usize,
    pub n_cells: usize,
    pub max_abs_deviation: f64,
    pub mean_abs_deviation: f64,
    /// Location of the largest deviation.
    pub worst: Option<Deviation>,
    pub tol: f64,
    pub passed: bool,
    /// No cells were compared; `passed` holds vacuously.
    pub vacuous: bool,
}

impl EquivalenceReport {
    /// Hex sha256 of the canonical JSON encoding.
    pub fn sha256(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(self)?)))
    }
}

/// The regressor applied to every 10x10 window mean of `patch`, row-major.
pub fn fc_reference_map(reg: &Regressor, patch: &Patch) -> Result<Vec<f64>> {
    let grid = window_average(patch.raster(), WINDOW)?;
    let feats: Vec<[f64; PATCH_BANDS]> = (0..GRID * GRID)
        .map(|i| grid_features(&grid, i / GRID, i % GRID))
        .collect();
    reg.predict_features(&feats)
}

pub fn verify_equivalence(
    reg: &Regressor,
    net: &ConvNet,
    patches: &[Patch],
    tol: f64,
) -> Result<EquivalenceReport> {
    if !(tol >= 0.0) {
        return Err(Error::invalid(format!("tolerance must be >= 0, got {tol}")));
    }
    if reg.parameter != net.parameter {
        return Err(Error::Inconsistent(format!(
            "regressor predicts {} but the network predicts {}",
            reg.parameter, net.parameter
        )));
    }
    let mut max = 0.0f64;
    let mut sum = 0.0f64;
    let mut worst = None;
    for (k, patch) in patches.iter().enumerate() {
        let fc = fc_reference_map(reg, patch)?;
        let cnn = net.infer_patch(patch)?;
        for (i, (&c, &f)) in cnn.values.iter().zip(&fc).enumerate() {
            let d = (c as f64 - f).abs();
            sum += d;
            if d > max || worst.is_none() {
                max = max.max(d);
                worst = Some(Deviation {
                    patch: k,
                    row: i / GRID,
                    col: i % GRID,
                    cnn: c as f64,
                    fc: f,
                });
            }
        }
    }
    let n_cells = patches.len() * GRID * GRID;
    Ok(EquivalenceReport {
        n_patches: patches.len(),
        n_cells,
        max_abs_deviation: max,
        mean_abs_deviation: if n_cells > 0 { sum / n_cells as f64 } else { 0.0 },
        worst,
        tol,
        passed: max <= tol,
        vacuous: n_cells == 0,
    })
}
