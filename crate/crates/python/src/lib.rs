//! Python bindings: sample sets, the regressor, the transferred network,
//! contaminant maps and alert messages.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use seawatch::alerting::{serialize_alert, threshold, AlertMessage, ThresholdPolicy};
use seawatch::dataset::{split, window_samples, Sample, SampleStore, SplitSpec, TargetTransform};
use seawatch::quantbench::quantize_fp16;
use seawatch::raster::{ms_band_ids, tile_scene, PATCH_BANDS, PATCH_SIZE, TARGET_GSD};
use seawatch::regressor::{self, train_regressor, Split, TrainConfig};
use seawatch::sensor_sim::{generate_synthetic_scene, SceneSpec};
use seawatch::transfer::{self, fc_to_cnn, verify_equivalence};
use seawatch::{BandStack, GeoRef, Parameter};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parameter(name: &str) -> PyResult<Parameter> {
    name.parse().map_err(err)
}

#[pyclass(name = "Patch", module = "seawatch_py", from_py_object)]
#[derive(Clone)]
pub struct PyPatch {
    pub inner: seawatch::Patch,
}

#[pymethods]
impl PyPatch {
    /// Band-major 7 x 256 x 256 reflectances.
    #[staticmethod]
    pub fn from_values(values: Vec<f32>, lat: f64, lon: f64, date: &str) -> PyResult<Self> {
        let date = date.parse().map_err(err)?;
        let raster = BandStack::new(PATCH_SIZE, PATCH_SIZE, TARGET_GSD, ms_band_ids(), values).map_err(err)?;
        let georef = GeoRef::new(lat, lon, TARGET_GSD, date).map_err(err)?;
        Ok(Self {
            inner: seawatch::Patch::new(raster, georef).map_err(err)?,
        })
    }

    #[staticmethod]
    pub fn load(path: &str) -> PyResult<Self> {
        let (raster, side, _) = seawatch::pat1::read(path.as_ref()).map_err(err)?;
        let georef = side.georef.ok_or_else(|| err("raster has no georeference"))?;
        Ok(Self {
            inner: seawatch::Patch::new(raster, georef).map_err(err)?,
        })
    }

    #[getter]
    pub fn center(&self) -> (f64, f64) {
        let g = self.inner.georef();
        (g.center_lat, g.center_lon)
    }

    /// Per-band means of every 10 x 10 window, row-major, 625 x 7.
    pub fn window_means(&self) -> PyResult<Vec<[f64; PATCH_BANDS]>> {
        let grid = seawatch::raster::window_average(self.inner.raster(), seawatch::raster::WINDOW).map_err(err)?;
        Ok((0..625).map(|i| seawatch::dataset::grid_features(&grid, i / 25, i % 25)).collect())
    }
}

/// Patches of a synthetic scene described by a scene-spec JSON string.
#[pyfunction]
pub fn synthetic_patches(spec_json: &str, seed: u64) -> PyResult<Vec<PyPatch>> {
    let spec: SceneSpec = serde_json::from_str(spec_json).map_err(err)?;
    let scene = generate_synthetic_scene(&spec, seed).map_err(err)?;
    let tiling = tile_scene(&scene.raster, &scene.georef).map_err(err)?;
    Ok(tiling.patches.into_iter().map(|inner| PyPatch { inner }).collect())
}

#[pyclass(name = "SampleSet", module = "seawatch_py", from_py_object)]
#[derive(Clone)]
pub struct PySampleSet {
    pub samples: Vec<Sample>,
}

#[pymethods]
impl PySampleSet {
    /// One sample per clear window of a synthetic scene, targeted at the window-mean truth.
    #[staticmethod]
    pub fn synthetic(spec_json: &str, parameter_name: &str, seed: u64) -> PyResult<Self> {
        let spec: SceneSpec = serde_json::from_str(spec_json).map_err(err)?;
        let scene = generate_synthetic_scene(&spec, seed).map_err(err)?;
        Ok(Self {
            samples: window_samples(&scene, parameter(parameter_name)?, "py").map_err(err)?,
        })
    }

    #[staticmethod]
    pub fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            samples: SampleStore::read(path).map_err(err)?.samples,
        })
    }

    pub fn save(&self, path: &str) -> PyResult<()> {
        SampleStore::new(self.samples.clone()).write(path).map_err(err)
    }

    pub fn __len__(&self) -> usize {
        self.samples.len()
    }

    pub fn features(&self) -> Vec<[f64; PATCH_BANDS]> {
        self.samples.iter().map(|s| s.features).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.target).collect()
    }

    /// (train, val, test) with the 55 / 25 / 20 proportions.
    pub fn split(&self, seed: u64) -> PyResult<(Self, Self, Self)> {
        let s = split(&self.samples, &SplitSpec::with_seed(seed)).map_err(err)?;
        Ok((Self { samples: s.train }, Self { samples: s.val }, Self { samples: s.test }))
    }
}

#[pyclass(name = "Regressor", module = "seawatch_py", from_py_object)]
#[derive(Clone)]
pub struct PyRegressor {
    pub inner: regressor::Regressor,
}

#[pymethods]
impl PyRegressor {
    /// Train on `train`, validating on `val`; `config_json` overrides training defaults.
    #[staticmethod]
    #[pyo3(signature = (train, val, config_json=None, seed=0))]
    pub fn train(train: &PySampleSet, val: &PySampleSet, config_json: Option<&str>, seed: u64) -> PyResult<Self> {
        let mut cfg: TrainConfig = match config_json {
            Some(s) => serde_json::from_str(s).map_err(err)?,
            None => TrainConfig::default(),
        };
        cfg.seed = seed;
        let out = train_regressor(&train.samples, &val.samples, &cfg, TargetTransform::Identity).map_err(err)?;
        Ok(Self { inner: out.regressor })
    }

    #[staticmethod]
    pub fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: regressor::Regressor::read(path).map_err(err)?,
        })
    }

    pub fn save(&self, path: &str) -> PyResult<()> {
        self.inner.write(path).map_err(err)
    }

    #[getter]
    pub fn parameter(&self) -> String {
        self.inner.parameter.to_string()
    }

    #[getter]
    pub fn layer_dims(&self) -> Vec<usize> {
        self.inner.params.layer_dims.clone()
    }

    pub fn predict(&self, features: Vec<[f64; PATCH_BANDS]>) -> PyResult<Vec<f64>> {
        self.inner.predict_features(&features).map_err(err)
    }

    /// (rmse, mae) in physical units.
    pub fn evaluate(&self, samples: &PySampleSet) -> PyResult<(f64, f64)> {
        let r = self.inner.evaluate(&samples.samples, Split::Test).map_err(err)?;
        Ok((r.rmse, r.mae))
    }
}

#[pyclass(name = "ContaminantMap", module = "seawatch_py", from_py_object)]
#[derive(Clone)]
pub struct PyContaminantMap {
    pub inner: transfer::ContaminantMap,
}

#[pymethods]
impl PyContaminantMap {
    #[getter]
    pub fn values(&self) -> Vec<f32> {
        self.inner.values.clone()
    }

    #[getter]
    pub fn parameter(&self) -> String {
        self.inner.parameter.to_string()
    }

    pub fn get(&self, row: usize, col: usize) -> PyResult<f32> {
        if row >= 25 || col >= 25 {
            return Err(err(format!("cell ({row}, {col}) outside the 25 x 25 map")));
        }
        Ok(self.inner.get(row, col))
    }

    /// JSON alert message for patch `patch_index`, or None when nothing exceeds the policy.
    #[pyo3(signature = (scene_id, patch_index, policy_json=None))]
    pub fn alert(&self, scene_id: &str, patch_index: usize, policy_json: Option<&str>) -> PyResult<Option<String>> {
        let policy = match policy_json {
            Some(s) => serde_json::from_str(s).map_err(err)?,
            None => ThresholdPolicy::default_for(self.inner.parameter),
        };
        let a = threshold(&self.inner, &policy, None).map_err(err)?;
        AlertMessage::from_patch(scene_id, patch_index, &self.inner, &a, policy.min_exceed_fraction)
            .map(|m| {
                let bytes = serialize_alert(&m).map_err(err)?;
                Ok(String::from_utf8_lossy(&bytes).trim_end().to_string())
            })
            .transpose()
    }
}

#[pyclass(name = "ConvNet", module = "seawatch_py", from_py_object)]
#[derive(Clone)]
pub struct PyConvNet {
    pub inner: transfer::ConvNet,
}

#[pymethods]
impl PyConvNet {
    #[staticmethod]
    pub fn from_regressor(reg: &PyRegressor) -> PyResult<Self> {
        Ok(Self {
            inner: fc_to_cnn(&reg.inner).map_err(err)?,
        })
    }

    #[staticmethod]
    pub fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: transfer::ConvNet::read(path).map_err(err)?,
        })
    }

    pub fn save(&self, path: &str) -> PyResult<()> {
        self.inner.write(path).map_err(err)
    }

    pub fn quantize_fp16(&self) -> PyResult<Self> {
        Ok(Self {
            inner: quantize_fp16(&self.inner).map_err(err)?,
        })
    }

    #[getter]
    pub fn dtype(&self) -> String {
        serde_json::to_value(self.inner.dtype)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default()
    }

    #[getter]
    pub fn channel_chain(&self) -> Vec<usize> {
        self.inner.channel_chain()
    }

    pub fn infer(&self, patch: &PyPatch) -> PyResult<PyContaminantMap> {
        Ok(PyContaminantMap {
            inner: self.inner.infer_patch(&patch.inner).map_err(err)?,
        })
    }

    /// (passed, max absolute deviation) against the source regressor.
    pub fn verify(&self, reg: &PyRegressor, patches: Vec<PyPatch>, tol: f64) -> PyResult<(bool, f64)> {
        let patches: Vec<_> = patches.into_iter().map(|p| p.inner).collect();
        let r = verify_equivalence(&reg.inner, &self.inner, &patches, tol).map_err(err)?;
        Ok((r.passed, r.max_abs_deviation))
    }
}

#[pymodule]
fn seawatch_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPatch>()?;
    m.add_class::<PySampleSet>()?;
    m.add_class::<PyRegressor>()?;
    m.add_class::<PyConvNet>()?;
    m.add_class::<PyContaminantMap>()?;
    m.add_function(wrap_pyfunction!(synthetic_patches, m)?)?;
    Ok(())
}
