//! simulate, build-dataset and train.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::json;

use seawatch::dataset::{
    ingest_records, match_records, patch_id, select_surface, split, synthetic_records,
    write_records, SampleStore, SplitSpec, StationPlan, TargetTransform,
};
use seawatch::pat1::{Dtype, Sidecar};
use seawatch::regressor::{train_regressor, Split, TrainConfig};
use seawatch::sensor_sim::{
    generate_synthetic_scene, simulate_l1c, DegradeConfig, Scene, SceneSpec, SimOptions,
    SolarContext,
};
use seawatch::{BandStack, GeoRef, Parameter};

use crate::io::{create_dir, read_json, read_patch_dir, write_json, write_pat1};

pub const BUNDLED_SPEC: &str = include_str!("../specs/ligurian_demo.json");

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub scene_id: String,
    pub scene: SceneSpec,
    #[serde(default)]
    pub solar: SolarContext,
    /// Identity (no blur, noise or shift) when absent.
    #[serde(default)]
    pub degrade: Option<DegradeConfig>,
    #[serde(default)]
    pub options: SimOptions,
    #[serde(default)]
    pub stations: StationPlan,
    #[serde(default = "all_parameters")]
    pub parameters: Vec<Parameter>,
}

fn all_parameters() -> Vec<Parameter> {
    Parameter::ALL.to_vec()
}

pub fn simulate(spec: &str, out: &Path, seed: u64) -> anyhow::Result<()> {
    let spec: SimulationSpec = if spec == "bundled" {
        serde_json::from_str(BUNDLED_SPEC).context("bundled spec")?
    } else {
        read_json(Path::new(spec))?
    };
    let truth = generate_synthetic_scene(&spec.scene, seed)?;
    let degrade = spec
        .degrade
        .clone()
        .unwrap_or_else(|| DegradeConfig::identity(truth.raster.bands()));
    let sim = simulate_l1c(
        &Scene {
            raster: truth.raster.clone(),
            georef: truth.georef.clone(),
            masks: Some(truth.masks.clone()),
        },
        &spec.solar,
        &degrade,
        seed,
        &spec.options,
    )?;
    create_dir(out)?;
    let gsd = sim.scene.gsd();
    let g = &truth.georef;
    let scene_georef = GeoRef::new(g.center_lat, g.center_lon, gsd, g.acquisition_date)?;
    let side = |raster: &BandStack| -> Sidecar {
        Sidecar::for_raster(raster, Some(scene_georef.clone())).with_attribute("scene_id", &spec.scene_id)
    };
    write_pat1(&out.join("scene.pat1"), &sim.scene, Dtype::F32, &side(&sim.scene))?;
    let masks = sim.masks.to_raster(gsd)?;
    write_pat1(&out.join("masks.pat1"), &masks, Dtype::U8, &side(&masks))?;
    for p in Parameter::ALL {
        let t = truth.truth.windowed(p)?;
        write_pat1(&out.join(format!("truth_{p}.pat1")), &t, Dtype::F32, &side(&t))?;
    }

    let chips = out.join("patches");
    create_dir(&chips)?;
    let mut chip_info = Vec::new();
    for (k, chip) in sim.chips.iter().enumerate() {
        let id = patch_id(&spec.scene_id, k);
        let sidecar = Sidecar::for_raster(chip.patch.raster(), Some(chip.patch.georef().clone()))
            .with_attribute("patch_id", &id)
            .with_attribute("origin", chip.origin)
            .with_attribute("cloud_fraction", chip.cloud_fraction)
            .with_attribute("clear_fraction", chip.clear_fraction);
        write_pat1(&chips.join(format!("{id}.pat1")), chip.patch.raster(), Dtype::F32, &sidecar)?;
        chip_info.push(json!({"patch_id": id, "origin": chip.origin, "cloud_fraction": chip.cloud_fraction}));
    }

    let mut records = Vec::new();
    for (i, &p) in spec.parameters.iter().enumerate() {
        records.extend(synthetic_records(&truth, p, &spec.stations, seed.wrapping_add(i as u64 + 1))?);
    }
    let csv = out.join("in_situ.csv");
    write_records(BufWriter::new(File::create(&csv)?), &records)?;

    write_json(
        &out.join("simulation.json"),
        &json!({
            "scene_id": spec.scene_id,
            "seed": seed,
            "spec": spec,
            "index": sim.index,
            "misalignment": sim.misalignment,
            "chips": chip_info,
            "dropped": sim.dropped,
            "records": records.len(),
        }),
    )?;
    println!(
        "simulated {} chips and {} in-situ records into {}",
        sim.chips.len(),
        records.len(),
        out.display()
    );
    Ok(())
}

pub fn build_dataset(
    records: &Path,
    patches: &Path,
    parameter: Parameter,
    tolerance_days: i64,
    out: &Path,
    report: Option<&Path>,
) -> anyhow::Result<()> {
    let ingest = ingest_records(File::open(records).with_context(|| format!("opening {}", records.display()))?)?;
    let surface: Vec<_> = select_surface(&ingest.records)
        .into_iter()
        .filter(|r| r.parameter == parameter)
        .collect();
    let catalog = read_patch_dir(patches)?;
    let matched = match_records(&surface, &catalog, tolerance_days)?;
    if matched.samples.is_empty() {
        bail!("no {parameter} record matched any patch within {tolerance_days} days");
    }
    SampleStore::new(matched.samples.clone()).write(out)?;
    let summary = json!({
        "parameter": parameter,
        "tolerance_days": tolerance_days,
        "records_ingested": ingest.records.len(),
        "rows_rejected": ingest.rejected.len(),
        "duplicates_removed": ingest.duplicates_removed,
        "surface_records": surface.len(),
        "patches": catalog.len(),
        "samples": matched.samples.len(),
        "unmatched": matched.unmatched.len(),
        "rejected": ingest.rejected,
    });
    if let Some(path) = report {
        write_json(path, &summary)?;
    }
    println!(
        "{} samples from {} surface records ({} unmatched)",
        matched.samples.len(),
        surface.len(),
        matched.unmatched.len()
    );
    Ok(())
}

pub fn train(
    samples: &Path,
    config: Option<&Path>,
    transform: &str,
    out: &Path,
    report: Option<&Path>,
    seed: u64,
) -> anyhow::Result<()> {
    let store = SampleStore::read(samples)?;
    let mut cfg: TrainConfig = match config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    cfg.seed = seed;
    let transform: TargetTransform = serde_json::from_value(json!(transform))
        .with_context(|| format!("unknown target transform {transform:?}"))?;
    let parts = split(&store.samples, &SplitSpec::with_seed(seed))?;
    let outcome = train_regressor(&parts.train, &parts.val, &cfg, transform)?;
    let reg = &outcome.regressor;
    reg.write(out)?;
    let val = (!parts.val.is_empty()).then(|| reg.evaluate(&parts.val, Split::Validation)).transpose()?;
    let test = (!parts.test.is_empty()).then(|| reg.evaluate(&parts.test, Split::Test)).transpose()?;
    if let Some(path) = report {
        write_json(
            path,
            &json!({
                "parameter": reg.parameter,
                "config": cfg,
                "target_transform": transform,
                "splits": {"train": parts.train.len(), "val": parts.val.len(), "test": parts.test.len()},
                "val": val,
                "test": test,
                "history": outcome.history,
            }),
        )?;
    }
    match &test {
        Some(t) => println!("trained {} model: test RMSE {:.4} MAE {:.4} {}", reg.parameter, t.rmse, t.mae, reg.parameter.units()),
        None => println!("trained {} model (no test split)", reg.parameter),
    }
    Ok(())
}
