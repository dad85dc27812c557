use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parameter::Parameter;
use crate::raster::{BandStack, GeoRef, GRID, PATCH_SIZE, WINDOW};

/// One contaminant estimate per 10x10 window of a patch, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminantMap {
    pub values: Vec<f32>,
    pub parameter: Parameter,
    /// Georeference of the patch center.
    pub georef: GeoRef,
    pub window_gsd: f64,
}

impl ContaminantMap {
    pub fn new(values: Vec<f32>, parameter: Parameter, georef: GeoRef) -> Result<Self> {
        if values.len() != GRID * GRID {
            return Err(Error::dim(format!(
                "contaminant map needs {} cells, got {}",
                GRID * GRID,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                layer: 0,
                detail: format!("map cell {} ({}, {}) is not finite", i, i / GRID, i % GRID),
            });
        }
        let window_gsd = georef.gsd * WINDOW as f64;
        Ok(Self {
            values,
            parameter,
            georef,
            window_gsd,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * GRID + col]
    }

    /// Georeference of the center of window (row, col).
    pub fn cell_georef(&self, row: usize, col: usize) -> GeoRef {
        let half = PATCH_SIZE as f64 / 2.0;
        let center = |i: usize| (i as f64 + 0.5) * WINDOW as f64 - half;
        let mut g = self
            .georef
            .offset(center(col) * self.georef.gsd, -center(row) * self.georef.gsd);
        g.gsd = self.window_gsd;
        g
    }

    pub fn to_band_stack(&self) -> Result<BandStack> {
        BandStack::new(
            GRID,
            GRID,
            self.window_gsd,
            vec![self.parameter.to_string()],
            self.values.clone(),
        )
    }

    pub fn from_band_stack(
        grid: &BandStack,
        parameter: Parameter,
        patch_georef: GeoRef,
    ) -> Result<Self> {
        if grid.width() != GRID || grid.height() != GRID || grid.bands() != 1 {
            return Err(Error::dim(format!(
                "contaminant map raster must be {GRID}x{GRID}x1, got {}x{}x{}",
                grid.height(),
                grid.width(),
                grid.bands()
            )));
        }
        Self::new(grid.band(0).to_vec(), parameter, patch_georef)
    }
}
