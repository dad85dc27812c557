use seawatch_py::{synthetic_patches, PyConvNet, PyRegressor, PySampleSet};

const SCENE: &str = r#"{"width": 256, "height": 256, "center_lat": 44.1, "center_lon": 9.8,
    "acquisition_date": "2024-07-01",
    "turbidity": {"base": 4.0, "gradient": [0.004, -0.003], "min": 0.0},
    "ph": {"base": 8.1},
    "plumes": [{"parameter": "turbidity", "row": 128.0, "col": 128.0, "radius_px": 15.0, "value": 60.0}]}"#;

#[test]
fn train_transfer_and_alert_through_the_bindings() {
    let samples = PySampleSet::synthetic(SCENE, "turbidity", 1).unwrap();
    assert_eq!(samples.__len__(), 625);
    let (train, val, test) = samples.split(3).unwrap();
    assert_eq!(train.__len__() + val.__len__() + test.__len__(), 625);

    let cfg = r#"{"epochs": 20, "layer_dims": [7, 8, 1], "batch_size": 32, "output_calibration": "readout"}"#;
    let reg = PyRegressor::train(&train, &val, Some(cfg), 4).unwrap();
    assert_eq!(reg.layer_dims(), vec![7, 8, 1]);
    let (rmse, mae) = reg.evaluate(&test).unwrap();
    assert!(mae <= rmse && rmse.is_finite());

    let patches = synthetic_patches(SCENE, 1).unwrap();
    let net = PyConvNet::from_regressor(&reg).unwrap();
    let (ok, dev) = net.verify(&reg, patches.clone(), 1e-4).unwrap();
    assert!(ok, "{dev}");

    let map = net.infer(&patches[0]).unwrap();
    let msg = map.alert("bindings", 0, None).unwrap().expect("the plume exceeds the default policy");
    assert!(!msg.ends_with('\n'));
    let v: serde_json::Value = serde_json::from_str(&msg).unwrap();
    assert_eq!(v["scene_id"], "bindings");
    assert!(map.get(0, 25).is_err());
    assert!(PySampleSet::synthetic(SCENE, "salinity", 1).is_err());
}
