use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{backward, forward, predict, rmse_loss, update_running_stats, Mode};
use super::params::{MlpParams, DROPOUT_P, DEFAULT_LAYER_DIMS};
use super::real::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam state over a list of parameter tensors.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    cfg: AdamConfig,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: i32,
}

impl<T: Real> Adam<T> {
    pub fn new(cfg: AdamConfig, shapes: &[usize]) -> Self {
        Self {
            cfg,
            m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            step: 0,
        }
    }

    pub fn step(&mut self, params: Vec<&mut [T]>, grads: &[Vec<T>], lr: f64) {
        self.step += 1;
        let (b1, b2) = (T::of(self.cfg.beta1), T::of(self.cfg.beta2));
        let c1 = T::of(1.0 - self.cfg.beta1.powi(self.step));
        let c2 = T::of(1.0 - self.cfg.beta2.powi(self.step));
        let (lr, eps) = (T::of(lr), T::of(self.cfg.eps));
        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        }
    }
}

/// Stop on a validation plateau or once a target is reached; the best
/// validation epoch is restored either way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopping {
    /// Epochs without improvement before stopping.
    #[serde(default)]
    pub patience: Option<usize>,
    /// Stop as soon as validation RMSE (target units) falls below this.
    #[serde(default)]
    pub target_val_rmse: Option<f64>,
    #[serde(default)]
    pub min_delta: f64,
}

/// Per-epoch learning rate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Half-cosine from the base rate at epoch 1 down to `final_lr` at the last epoch.
    Cosine { final_lr: f64 },
}

impl LrSchedule {
    pub fn rate(&self, base: f64, epoch: usize, epochs: usize) -> f64 {
        match *self {
            LrSchedule::Constant => base,
            LrSchedule::Cosine { final_lr } => {
                let t = if epochs > 1 { (epoch - 1) as f64 / (epochs - 1) as f64 } else { 1.0 };
                final_lr + 0.5 * (base - final_lr) * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }
}

/// Replacement of the moving-average batch-norm statistics by full-pass
/// statistics of the training set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BnRecalibration {
    #[default]
    None,
    /// Statistics with dropout off.
    DropoutFree,
    /// Statistics with dropout on, averaged over `passes` mask draws; these are
    /// the statistics the downstream layers were trained against.
    WithDropout { passes: usize },
}

/// Post-training refit of the last dense layer. Both variants only change that
/// layer, so the network stays a plain MLP and transfers unchanged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputCalibration {
    #[default]
    None,
    /// Scale and shift of the current output.
    Affine,
    /// Every weight and the bias of the output layer, by ridge-stabilized least
    /// squares on the eval-mode activations of the last hidden layer.
    Readout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub kind: OutputCalibration,
    /// Eval-mode training RMSE before and after, target units.
    pub train_rmse_before: f64,
    pub train_rmse_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub lr_schedule: LrSchedule,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub layer_dims: Vec<usize>,
    pub dropout_p: f64,
    pub early_stopping: Option<EarlyStopping>,
    /// Replace the running batch-norm estimates after the last epoch.
    pub bn_recalibration: BnRecalibration,
    /// Least-squares refit of the output layer on the training set in eval
    /// mode, after any batch-norm recalibration.
    pub output_calibration: OutputCalibration,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            learning_rate: 1e-3,
            lr_schedule: LrSchedule::Constant,
            batch_size: 64,
            seed: 0,
            adam: AdamConfig::default(),
            layer_dims: DEFAULT_LAYER_DIMS.to_vec(),
            dropout_p: DROPOUT_P,
            early_stopping: None,
            bn_recalibration: BnRecalibration::None,
            output_calibration: OutputCalibration::None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid(format!(
                "learning rate {} must be finite and >= 0",
                self.learning_rate
            )));
        }
        if self.batch_size < 2 {
            return Err(Error::invalid(
                "batch size must be >= 2 for batch normalization",
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::invalid(format!(
                "dropout {} outside [0, 1)",
                self.dropout_p
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Train-mode (dropout on) RMSE over the epoch, target units.
    pub train_rmse: f64,
    /// Eval-mode RMSE on the validation set, target units.
    pub val_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    pub output_calibration: Option<CalibrationReport>,
}

/// Normalized training arrays; `target_scale` converts losses back to target units.
#[derive(Debug, Clone)]
pub struct TrainData<'a, T> {
    pub x: ArrayView2<'a, T>,
    pub y: ArrayView1<'a, T>,
    pub val: Option<(ArrayView2<'a, T>, ArrayView1<'a, T>)>,
    pub target_scale: f64,
}

fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    // batch norm needs two samples; fold a trailing singleton into its neighbour
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let n = out.len();
        out[n - 1] = &order[(n - 1) * size..];
    }
    out
}

fn rows<T: Real>(x: &ArrayView2<T>, idx: &[usize]) -> Array2<T> {
    x.select(Axis(0), idx)
}

/// Eval-mode RMSE in target units.
pub fn eval_rmse<T: Real>(
    params: &MlpParams<T>,
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    scale: f64,
) -> Result<f64> {
    let p = predict(params, x)?;
    let (l, _) = rmse_loss(p.view(), y)?;
    Ok(l.f64() * scale)
}

/// Mini-batch Adam on RMSE loss. Deterministic for a fixed seed.
pub fn fit<T: Real>(
    params: &mut MlpParams<T>,
    data: &TrainData<T>,
    cfg: &TrainConfig,
) -> Result<History> {
    cfg.validate()?;
    params.dropout_p = cfg.dropout_p;
    params.validate()?;
    let n = data.x.nrows();
    if n < 2 || data.y.len() != n {
        return Err(Error::invalid(format!(
            "training needs >= 2 samples with targets, got {n}"
        )));
    }
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(1);
    let shapes: Vec<usize> = params.trainable().iter().map(|t| t.len()).collect();
    let mut adam = Adam::new(cfg.adam, &shapes);
    let mut history = History::default();
    let mut best: Option<(f64, MlpParams<T>)> = None;
    let mut since_best = 0usize;
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let lr = cfg.lr_schedule.rate(cfg.learning_rate, epoch, cfg.epochs);
        let mut sq = 0.0;
        for batch in batches(&order, cfg.batch_size) {
            let xb = rows(&data.x, batch);
            let yb: Array1<T> = batch.iter().map(|&i| data.y[i]).collect();
            let diverged = |loss: f64| Error::Divergence { epoch, loss };
            let (pred, cache) =
                match forward(params, xb.view(), Mode::Train, Some(&mut dropout_rng)) {
                    Ok(r) => r,
                    Err(Error::Numeric { .. }) => return Err(diverged(f64::NAN)),
                    Err(e) => return Err(e),
                };
            let (loss, dpred) = rmse_loss(pred.view(), yb.view())?;
            if !loss.is_finite() {
                return Err(diverged(loss.f64()));
            }
            sq += loss.f64().powi(2) * batch.len() as f64;
            let grads = backward(params, &cache, dpred.view())?;
            if lr > 0.0 {
                adam.step(params.trainable_mut(), &grads, lr);
            }
            update_running_stats(params, &cache);
        }
        let train_rmse = (sq / n as f64).sqrt() * data.target_scale;
        let val_rmse = match &data.val {
            Some((xv, yv)) if xv.nrows() > 0 => {
                Some(eval_rmse(params, xv.view(), yv.view(), data.target_scale)?)
            }
            _ => None,
        };
        history.epochs.push(EpochStats {
            epoch,
            train_rmse,
            val_rmse,
        });

        let Some(es) = &cfg.early_stopping else {
            continue;
        };
        let Some(v) = val_rmse else { continue };
        if best.as_ref().is_none_or(|(b, _)| v < b - es.min_delta) {
            best = Some((v, params.clone()));
            history.best_epoch = Some(epoch);
            since_best = 0;
        } else {
            since_best += 1;
        }
        let reached = es.target_val_rmse.is_some_and(|t| v < t);
        let plateau = es.patience.is_some_and(|p| since_best >= p);
        if reached || plateau {
            history.stopped_early = epoch < cfg.epochs;
            break;
        }
    }
    if let Some((_, p)) = best {
        *params = p;
    }
    recalibrate_batch_norm(params, data.x, cfg.bn_recalibration, cfg.seed)?;
    if cfg.output_calibration != OutputCalibration::None {
        let before = eval_rmse(params, data.x, data.y, data.target_scale)?;
        match cfg.output_calibration {
            OutputCalibration::Affine => {
                calibrate_output(params, data.x, data.y)?;
            }
            _ => refit_readout(params, data.x, data.y)?,
        }
        history.output_calibration = Some(CalibrationReport {
            kind: cfg.output_calibration,
            train_rmse_before: before,
            train_rmse_after: eval_rmse(params, data.x, data.y, data.target_scale)?,
        });
    }
    Ok(history)
}

/// Fit y ~ scale * f(x) + shift over eval-mode predictions and fold it into the
/// last dense layer. Returns (scale, shift).
pub fn calibrate_output<T: Real>(
    params: &mut MlpParams<T>,
    x: ArrayView2<T>,
    y: ArrayView1<T>,
) -> Result<(f64, f64)> {
    if x.nrows() != y.len() || y.is_empty() {
        return Err(Error::invalid("calibration needs matching non-empty x and y"));
    }
    let pred = predict(params, x)?;
    let n = y.len() as f64;
    let mp = pred.iter().map(|v| v.f64()).sum::<f64>() / n;
    let my = y.iter().map(|v| v.f64()).sum::<f64>() / n;
    let (mut cov, mut var) = (0.0, 0.0);
    for (p, t) in pred.iter().zip(y) {
        let dp = p.f64() - mp;
        cov += dp * (t.f64() - my);
        var += dp * dp;
    }
    let scale = if var > 0.0 { cov / var } else { 1.0 };
    let shift = my - scale * mp;
    let last = params.dense.last_mut().expect("at least one layer");
    last.weight.mapv_inplace(|w| T::of(w.f64() * scale));
    last.bias.mapv_inplace(|b| T::of(b.f64() * scale + shift));
    Ok((scale, shift))
}

/// Replace the last dense layer by the least-squares fit of `y` on the eval-mode
/// inputs of that layer (plus a bias column).
pub fn refit_readout<T: Real>(params: &mut MlpParams<T>, x: ArrayView2<T>, y: ArrayView1<T>) -> Result<()> {
    if x.nrows() != y.len() || y.is_empty() {
        return Err(Error::invalid("readout refit needs matching non-empty x and y"));
    }
    let (_, cache) = forward(params, x, Mode::Eval, None)?;
    let h = cache.last_input();
    let d = h.ncols() + 1;
    let mut g = Array2::<f64>::zeros((d, d));
    let mut r = Array1::<f64>::zeros(d);
    let mut row = vec![1.0f64; d];
    for (i, hi) in h.outer_iter().enumerate() {
        for (dst, v) in row.iter_mut().zip(hi) {
            *dst = v.f64();
        }
        let t = y[i].f64();
        for a in 0..d {
            r[a] += row[a] * t;
            for b in a..d {
                g[[a, b]] += row[a] * row[b];
            }
        }
    }
    let ridge = 1e-10 * (0..d).map(|a| g[[a, a]]).sum::<f64>() / d as f64;
    for a in 0..d {
        g[[a, a]] += ridge;
        for b in 0..a {
            g[[a, b]] = g[[b, a]];
        }
    }
    let w = cholesky_solve(g, r).ok_or_else(|| {
        Error::Numeric {
            layer: params.n_dense(),
            detail: "readout normal equations are not positive definite".into(),
        }
    })?;
    let last = params.dense.last_mut().expect("at least one layer");
    if last.weight.nrows() != 1 {
        return Err(Error::invalid("readout refit expects a single output"));
    }
    for (k, v) in last.weight.row_mut(0).iter_mut().enumerate() {
        *v = T::of(w[k]);
    }
    last.bias[0] = T::of(w[d - 1]);
    Ok(())
}

/// Solves `g w = r` for symmetric positive-definite `g`.
fn cholesky_solve(mut g: Array2<f64>, mut r: Array1<f64>) -> Option<Array1<f64>> {
    let d = r.len();
    for j in 0..d {
        let mut s = g[[j, j]];
        for k in 0..j {
            s -= g[[j, k]] * g[[j, k]];
        }
        if !(s > 0.0) {
            return None;
        }
        let l = s.sqrt();
        g[[j, j]] = l;
        for i in j + 1..d {
            let mut s = g[[i, j]];
            for k in 0..j {
                s -= g[[i, k]] * g[[j, k]];
            }
            g[[i, j]] = s / l;
        }
    }
    for i in 0..d {
        let s = r[i] - (0..i).map(|k| g[[i, k]] * r[k]).sum::<f64>();
        r[i] = s / g[[i, i]];
    }
    for i in (0..d).rev() {
        let s = r[i] - (i + 1..d).map(|k| g[[k, i]] * r[k]).sum::<f64>();
        r[i] = s / g[[i, i]];
    }
    Some(r)
}

/// Overwrite running statistics with full-pass statistics of `x`.
pub fn recalibrate_batch_norm<T: Real>(
    params: &mut MlpParams<T>,
    x: ArrayView2<T>,
    how: BnRecalibration,
    seed: u64,
) -> Result<()> {
    let (mode, passes) = match how {
        BnRecalibration::None => return Ok(()),
        BnRecalibration::DropoutFree => (Mode::BatchStats, 1),
        BnRecalibration::WithDropout { passes } => (Mode::Train, passes.max(1)),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let mut work = params.clone();
    for pass in 0..passes {
        // momentum 1 / (pass + 1) keeps a running average over passes
        work.bn_momentum = 1.0 / (pass + 1) as f64;
        let r = (mode == Mode::Train).then_some(&mut rng);
        let (_, cache) = forward(&work, x, mode, r)?;
        update_running_stats(&mut work, &cache);
    }
    for (dst, src) in params.norms.iter_mut().zip(work.norms) {
        dst.running_mean = src.running_mean;
        dst.running_var = src.running_var;
    }
    params.bn_updates += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_data(n: usize) -> (Array2<f64>, Array1<f64>) {
        let x = Array2::from_shape_fn((n, 7), |(i, j)| ((i * 13 + j * 7) % 17) as f64 / 8.0 - 1.0);
        let w = [0.5, -1.0, 0.25, 2.0, 0.0, -0.5, 1.0];
        let y = x
            .rows()
            .into_iter()
            .map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum())
            .collect();
        (x, y)
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            layer_dims: vec![7, 16, 8, 1],
            batch_size: 16,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn cosine_schedule_endpoints() {
        let s = LrSchedule::Cosine { final_lr: 1e-5 };
        assert_eq!(s.rate(1e-3, 1, 11), 1e-3);
        assert!((s.rate(1e-3, 11, 11) - 1e-5).abs() < 1e-18);
        assert!((s.rate(1e-3, 6, 11) - (1e-3 + 1e-5) / 2.0).abs() < 1e-15);
        assert_eq!(LrSchedule::Constant.rate(0.1, 7, 9), 0.1);
    }

    #[test]
    fn trailing_singleton_batch_is_merged() {
        let order: Vec<usize> = (0..129).collect();
        let b = batches(&order, 64);
        assert_eq!(b.iter().map(|b| b.len()).collect::<Vec<_>>(), vec![64, 65]);
        let order: Vec<usize> = (0..130).collect();
        assert_eq!(batches(&order, 64).len(), 3);
    }

    #[test]
    fn same_seed_same_history() {
        let (x, y) = linear_data(100);
        let data = TrainData {
            x: x.view(),
            y: y.view(),
            val: Some((x.view(), y.view())),
            target_scale: 1.0,
        };
        let run = || {
            let mut p = MlpParams::<f64>::new(&[7, 16, 8, 1], 3).unwrap();
            let h = fit(&mut p, &data, &cfg(5)).unwrap();
            (p, h)
        };
        let (p1, h1) = run();
        let (p2, h2) = run();
        assert_eq!(h1, h2);
        assert_eq!(p1, p2);
    }

    #[test]
    fn zero_learning_rate_freezes_weights() {
        let (x, y) = linear_data(100);
        let data = TrainData {
            x: x.view(),
            y: y.view(),
            val: None,
            target_scale: 1.0,
        };
        let mut p = MlpParams::<f64>::new(&[7, 16, 8, 1], 3).unwrap();
        let before = p.clone();
        let c = TrainConfig {
            learning_rate: 0.0,
            ..cfg(20)
        };
        let h = fit(&mut p, &data, &c).unwrap();
        let flat = |q: &MlpParams<f64>| q.trainable().concat();
        assert_eq!(flat(&p), flat(&before));
        let r: Vec<f64> = h.epochs.iter().map(|e| e.train_rmse).collect();
        let (lo, hi) = r
            .iter()
            .fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi / lo < 1.25, "{lo} .. {hi}");
    }

    #[test]
    fn learns_a_linear_map() {
        let (x, y) = linear_data(256);
        let data = TrainData {
            x: x.view(),
            y: y.view(),
            val: Some((x.view(), y.view())),
            target_scale: 1.0,
        };
        let mut p = MlpParams::<f64>::new(&[7, 32, 16, 1], 3).unwrap();
        let c = TrainConfig {
            dropout_p: 0.0,
            learning_rate: 3e-3,
            ..cfg(150)
        };
        let h = fit(&mut p, &data, &c).unwrap();
        let first = h.epochs[0].val_rmse.unwrap();
        let last = h.epochs.last().unwrap().val_rmse.unwrap();
        assert!(last < 0.1 * first, "{first} -> {last}");
    }

    #[test]
    fn early_stopping_restores_best() {
        let (x, y) = linear_data(100);
        let data = TrainData {
            x: x.view(),
            y: y.view(),
            val: Some((x.view(), y.view())),
            target_scale: 1.0,
        };
        let mut p = MlpParams::<f64>::new(&[7, 16, 8, 1], 3).unwrap();
        let c = TrainConfig {
            early_stopping: Some(EarlyStopping {
                patience: Some(3),
                target_val_rmse: Some(10.0),
                min_delta: 0.0,
            }),
            ..cfg(50)
        };
        let h = fit(&mut p, &data, &c).unwrap();
        assert!(h.stopped_early);
        assert_eq!(h.epochs.len(), 1);
        let best = h.epochs[h.best_epoch.unwrap() - 1].val_rmse.unwrap();
        assert!((eval_rmse(&p, x.view(), y.view(), 1.0).unwrap() - best).abs() < 1e-12);
    }

    #[test]
    fn divergence_reports_epoch() {
        let (x, mut y) = linear_data(64);
        y *= 1e300;
        let data = TrainData {
            x: x.view(),
            y: y.view(),
            val: None,
            target_scale: 1.0,
        };
        let mut p = MlpParams::<f64>::new(&[7, 16, 8, 1], 3).unwrap();
        let c = TrainConfig {
            learning_rate: 1e300,
            ..cfg(10)
        };
        match fit(&mut p, &data, &c) {
            Err(Error::Divergence { epoch, .. }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn recalibration_matches_population_statistics() {
        let (x, _) = linear_data(50);
        let mut p = MlpParams::<f64>::new(&[7, 6, 1], 1).unwrap();
        recalibrate_batch_norm(&mut p, x.view(), BnRecalibration::DropoutFree, 0).unwrap();
        let z = x.dot(&p.dense[0].weight.t()) + &p.dense[0].bias;
        for j in 0..6 {
            let col = z.column(j);
            let m = col.mean().unwrap();
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 49.0;
            assert!((p.norms[0].running_mean[j] - m).abs() < 1e-12);
            assert!((p.norms[0].running_var[j] - var).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_solves_a_known_system() {
        let g = ndarray::arr2(&[[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]]);
        let w = ndarray::arr1(&[1.0, -2.0, 0.5]);
        let r = g.dot(&w);
        let got = cholesky_solve(g, r).unwrap();
        for k in 0..3 {
            assert!((got[k] - w[k]).abs() < 1e-12);
        }
        assert!(cholesky_solve(ndarray::arr2(&[[1.0, 2.0], [2.0, 1.0]]), ndarray::arr1(&[1.0, 1.0])).is_none());
    }

    #[test]
    fn readout_refit_recovers_a_linear_readout() {
        let (x, _) = linear_data(80);
        let mut p = MlpParams::<f64>::new(&[7, 6, 4, 1], 2).unwrap();
        recalibrate_batch_norm(&mut p, x.view(), BnRecalibration::DropoutFree, 0).unwrap();
        let (_, cache) = forward(&p, x.view(), Mode::Eval, None).unwrap();
        let w_true = [0.7, -1.3, 0.2, 2.1];
        let y: Array1<f64> = cache.last_input().rows().into_iter().map(|h| h.dot(&ndarray::arr1(&w_true)) + 0.4).collect();
        refit_readout(&mut p, x.view(), y.view()).unwrap();
        let last = p.dense.last().unwrap();
        for k in 0..4 {
            assert!((last.weight[[0, k]] - w_true[k]).abs() < 1e-6, "{}", last.weight);
        }
        assert!((last.bias[0] - 0.4).abs() < 1e-6);
        assert!(eval_rmse(&p, x.view(), y.view(), 1.0).unwrap() < 1e-7);
    }

    #[test]
    fn readout_refit_needs_one_output() {
        let (x, y) = linear_data(20);
        let mut p = MlpParams::<f64>::new(&[7, 4, 2], 2).unwrap();
        assert!(refit_readout(&mut p, x.view(), y.view()).is_err());
        assert!(refit_readout(&mut p, x.view(), y.slice(ndarray::s![..5])).is_err());
    }
}
