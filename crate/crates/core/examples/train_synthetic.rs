//! Train the full-size regressor on a noise-free synthetic corpus and print the
//! learning curve. Usage: train_synthetic [epochs] [label_noise_fraction] [batch] [cosine_final_lr] [lr]

use std::time::Instant;

use seawatch::dataset::{add_label_noise, split, window_samples, SplitSpec, TargetTransform};
use seawatch::regressor::{calibrate_output, design_matrix, recalibrate_batch_norm, refit_readout, train_regressor, BnRecalibration, EarlyStopping, LrSchedule, Split, TrainConfig};
use seawatch::sensor_sim::{generate_synthetic_scene, SceneSpec};
use seawatch::Parameter;

fn main() -> seawatch::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let noise_frac: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let batch: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(64);
    let final_lr: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let lr: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let passes: usize = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(0);
    let dropout: f64 = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(0.25);
    let restore_best = args.get(8).map(|s| s != "0").unwrap_or(true);
    let spec: SceneSpec = serde_json::from_value(serde_json::json!({
        "width": 1024, "height": 512, "center_lat": 44.1, "center_lon": 9.8,
        "acquisition_date": "2024-07-01",
        "turbidity": {"base": 6.0, "gradient": [0.004, -0.003],
                      "random_waves": {"count": 6, "amplitude": 2.0, "min_wavelength_px": 80, "max_wavelength_px": 600},
                      "min": 0.0},
        "ph": {"base": 8.1, "random_waves": {"count": 4, "amplitude": 0.15, "min_wavelength_px": 100, "max_wavelength_px": 700}}
    }))?;
    let scene = generate_synthetic_scene(&spec, 7)?;
    let mut samples = window_samples(&scene, Parameter::Turbidity, "acc")?;
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.target).sum::<f64>() / n;
    let sd = (samples
        .iter()
        .map(|s| (s.target - mean).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    add_label_noise(&mut samples, noise_frac * sd, 99)?;
    let parts = split(&samples, &SplitSpec::with_seed(1))?;
    println!(
        "samples {} target sd {sd:.4} noise sd {:.4}",
        samples.len(),
        noise_frac * sd
    );
    let cfg = TrainConfig {
        epochs,
        seed: 5,
        batch_size: batch,
        bn_recalibration: if passes > 0 { BnRecalibration::WithDropout { passes } } else { BnRecalibration::None },
        learning_rate: lr,
        dropout_p: dropout,
        lr_schedule: if final_lr > 0.0 { LrSchedule::Cosine { final_lr } } else { LrSchedule::Constant },
        early_stopping: restore_best.then_some(EarlyStopping {
            patience: Some(epochs),
            target_val_rmse: None,
            min_delta: 0.0,
        }),
        ..TrainConfig::default()
    };
    let t0 = Instant::now();
    let out = train_regressor(&parts.train, &parts.val, &cfg, TargetTransform::Identity)?;
    let secs = t0.elapsed().as_secs_f64();
    for e in out
        .history
        .epochs
        .iter()
        .filter(|e| e.epoch % 10 == 0 || e.epoch <= 5)
    {
        println!(
            "epoch {:5} train {:.5} val {:.5}",
            e.epoch,
            e.train_rmse,
            e.val_rmse.unwrap_or(f64::NAN)
        );
    }
    let test = out.regressor.evaluate(&parts.test, Split::Test)?;
    println!(
        "{secs:.1}s ({:.3} s/epoch) best epoch {:?} test rmse {:.5} = {:.3}% of sd",
        secs / out.history.epochs.len() as f64,
        out.history.best_epoch,
        test.rmse,
        100.0 * test.rmse / sd
    );
    let (xt, yt) = design_matrix::<f32>(&parts.train, &out.regressor.norm);
    for how in [BnRecalibration::None, BnRecalibration::DropoutFree] {
        let mut r = out.regressor.clone();
        recalibrate_batch_norm(&mut r.params, xt.view(), how, 11)?;
        let mut a = r.clone();
        calibrate_output(&mut a.params, xt.view(), yt.view())?;
        let mut b = r.clone();
        refit_readout(&mut b.params, xt.view(), yt.view())?;
        println!(
            "recal {how:?}: raw {:.3}%  affine {:.3}%  readout {:.3}% of sd",
            100.0 * r.evaluate(&parts.test, Split::Test)?.rmse / sd,
            100.0 * a.evaluate(&parts.test, Split::Test)?.rmse / sd,
            100.0 * b.evaluate(&parts.test, Split::Test)?.rmse / sd
        );
    }
    Ok(())
}
