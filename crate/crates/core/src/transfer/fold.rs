use std::collections::BTreeMap;

use ndarray::{Array1, Array2};

use super::convnet::{Averaging, Conv1x1, ConvNet, NetDtype};
use crate::dataset::NormStats;
use crate::error::{Error, Result};
use crate::raster::PATCH_BANDS;
use crate::regressor::{BatchNorm, Dense, Regressor};

/// Fold an eval-mode batch norm into the preceding affine map:
/// w' = w * s, b' = (b - mean) * s + beta with s = gamma / sqrt(var + eps), per output row.
pub fn fold_batch_norm(
    weight: &Array2<f64>,
    bias: &Array1<f64>,
    bn: &BatchNorm<f64>,
    eps: f64,
) -> (Array2<f64>, Array1<f64>) {
    let scale: Array1<f64> = bn
        .gamma
        .iter()
        .zip(&bn.running_var)
        .map(|(g, v)| g / (v + eps).sqrt())
        .collect();
    let mut w = weight.clone();
    for (mut row, s) in w.outer_iter_mut().zip(&scale) {
        row *= *s;
    }
    let b = (bias - &bn.running_mean) * &scale + &bn.beta;
    (w, b)
}

/// Absorb x_n = (x - mu) / sigma into the first affine map so it takes raw features.
/// The layer-0 bias, then `weight`, `bias` for inputs `x + shift` standardized by `norm`.
pub fn fold_input_normalization(
    weight: &Array2<f64>,
    bias: &Array1<f64>,
    norm: &NormStats,
) -> ([f32; PATCH_BANDS], Array2<f64>, Array1<f64>) {
    let shift = norm.feature_mean.map(|m| -m as f32);
    let mut w = weight.clone();
    for (mut col, s) in w.columns_mut().into_iter().zip(&norm.feature_std) {
        col /= *s;
    }
    // x - mu = (x + shift) - (shift + mu), and shift + mu is only the f32 rounding of mu
    let residual: Array1<f64> = (0..PATCH_BANDS)
        .map(|j| shift[j] as f64 + norm.feature_mean[j])
        .collect();
    let b = bias - &w.dot(&residual);
    (shift, w, b)
}

fn dense64(d: &Dense<f32>) -> (Array2<f64>, Array1<f64>) {
    (d.weight.mapv(f64::from), d.bias.mapv(f64::from))
}

/// Transfer a trained regressor into the fully-convolutional network, without retraining.
pub fn fc_to_cnn(reg: &Regressor) -> Result<ConvNet> {
    let p = &reg.params;
    p.validate()
        .map_err(|e| Error::Transfer(format!("regressor parameters: {e}")))?;
    if p.bn_updates == 0 {
        return Err(Error::Transfer(
            "batch-norm running statistics were never populated (untrained model)".into(),
        ));
    }
    if p.input_dim() != PATCH_BANDS {
        return Err(Error::Transfer(format!(
            "regressor takes {} inputs, the averaging layer yields {PATCH_BANDS}",
            p.input_dim()
        )));
    }
    reg.norm
        .validate()
        .map_err(|e| Error::Transfer(format!("normalization: {e}")))?;
    let n = p.n_dense();
    let mut layers = Vec::with_capacity(n);
    let mut layer0 = Averaging::default();
    for k in 0..n {
        let (mut w, mut b) = dense64(&p.dense[k]);
        if k == 0 {
            (layer0.bias, w, b) = fold_input_normalization(&w, &b, &reg.norm);
        }
        if let Some(bn) = p.norms.get(k) {
            let bn = BatchNorm {
                gamma: bn.gamma.mapv(f64::from),
                beta: bn.beta.mapv(f64::from),
                running_mean: bn.running_mean.mapv(f64::from),
                running_var: bn.running_var.mapv(f64::from),
            };
            (w, b) = fold_batch_norm(&w, &b, &bn, p.bn_eps);
        }
        let last = k + 1 == n;
        if last {
            // target standardization: y = z * std + mean
            let (s, m) = (reg.norm.target_std, reg.norm.target_mean);
            w *= s;
            b = b * s + m;
        }
        layers.push(Conv1x1 {
            weight: w.mapv(|v| v as f32),
            bias: b.mapv(|v| v as f32),
            relu: !last,
        });
    }
    let mut provenance = BTreeMap::new();
    provenance.insert("source".into(), "fc_to_cnn".into());
    provenance.insert(
        "source_layer_dims".into(),
        serde_json::to_value(&p.layer_dims)?,
    );
    provenance.insert("source_bn_updates".into(), p.bn_updates.into());
    let net = ConvNet {
        parameter: reg.parameter,
        layer0,
        layers,
        output_transform: reg.norm.target_transform,
        dtype: NetDtype::F32,
        equivalence_report_sha256: None,
        provenance,
    };
    net.validate()
        .map_err(|e| Error::Transfer(format!("transferred network: {e}")))?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regressor::MlpParams;
    use ndarray::array;

    #[test]
    fn folding_matches_eval_batch_norm() {
        let w = array![[1.0, -2.0], [0.5, 3.0], [0.0, 1.0]];
        let b = array![0.1, -0.2, 0.3];
        let bn = BatchNorm {
            gamma: array![1.5, 0.5, -1.0],
            beta: array![0.2, 0.0, 1.0],
            running_mean: array![0.3, -1.0, 2.0],
            running_var: array![4.0, 0.25, 1.0],
        };
        let (wf, bf) = fold_batch_norm(&w, &b, &bn, 1e-5);
        let x = array![0.7, -1.3];
        let z = w.dot(&x) + &b;
        for j in 0..3 {
            let expect = bn.gamma[j] * (z[j] - bn.running_mean[j])
                / (bn.running_var[j] + 1e-5).sqrt()
                + bn.beta[j];
            let got = wf.row(j).dot(&x) + bf[j];
            assert!((got - expect).abs() < 1e-12, "{got} {expect}");
        }
    }

    #[test]
    fn input_normalization_absorbed() {
        let w = Array2::from_shape_fn((3, 7), |(i, j)| (i as f64 - j as f64) * 0.1);
        let b = array![0.5, 0.0, -0.5];
        let mut norm = NormStats::identity();
        norm.feature_mean = [0.05, 0.04, 0.03, 0.02, 0.01, 0.02, 0.03];
        norm.feature_std = [0.01, 0.02, 0.005, 0.01, 0.01, 0.03, 0.02];
        let (shift, wf, bf) = fold_input_normalization(&w, &b, &norm);
        assert_eq!(shift[0], -0.05f32);
        let x = [0.051, 0.03, 0.035, 0.021, 0.0, 0.05, 0.01];
        let xn = Array1::from(norm.normalize_features(&x).to_vec());
        let expect = w.dot(&xn) + &b;
        let shifted: Array1<f64> = (0..7).map(|j| x[j] + shift[j] as f64).collect();
        let got = wf.dot(&shifted) + &bf;
        for j in 0..3 {
            assert!((got[j] - expect[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn untrained_model_refused() {
        let reg = Regressor {
            parameter: crate::Parameter::Ph,
            params: MlpParams::new(&[7, 4, 1], 0).unwrap(),
            norm: NormStats::identity(),
            provenance: Default::default(),
        };
        let err = fc_to_cnn(&reg).unwrap_err();
        assert!(matches!(err, Error::Transfer(m) if m.contains("running statistics")));
    }
}
