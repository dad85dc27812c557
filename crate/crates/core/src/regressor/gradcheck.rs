use ndarray::{ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{backward, forward, rmse_loss, Mode};
use super::params::MlpParams;
use crate::error::{Error, Result};

/// Above this many trainable parameters the check refuses to run.
pub const MAX_CHECK_PARAMS: usize = 1000;
pub const FD_STEP: f64 = 1e-4;
/// Denominator floor of the relative error.
const REL_FLOOR: f64 = 1e-8;
/// Multiple of machine epsilon bounding the rounding error of one loss evaluation.
const ROUNDOFF_ULPS: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckMode {
    /// Frozen batch norm (running statistics), no dropout.
    Eval,
    /// Batch statistics, no dropout.
    TrainBatchStats,
    /// Batch statistics with dropout resampled on every evaluation; the analytic
    /// and numeric gradients then see different networks and the check is flagged.
    TrainWithDropout,
}

impl CheckMode {
    fn forward_mode(self) -> Mode {
        match self {
            CheckMode::Eval => Mode::Eval,
            CheckMode::TrainBatchStats => Mode::BatchStats,
            CheckMode::TrainWithDropout => Mode::Train,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub n_params: usize,
    pub max_rel_error: f64,
    /// Fraction of parameters with relative error <= tol.
    pub fraction_within_tol: f64,
    pub tol: f64,
    /// (tensor index in `trainable()` order, element index) of the worst parameter.
    pub worst: (usize, usize),
    /// Dropout was active, so the comparison is not meaningful.
    pub dropout_flagged: bool,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        !self.dropout_flagged && self.max_rel_error <= self.tol
    }
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Central finite differences (step `FD_STEP`) of the batch RMSE versus backprop.
pub fn gradient_check(
    params: &MlpParams<f64>,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    mode: CheckMode,
    tol: f64,
) -> Result<GradCheckReport> {
    params.validate()?;
    let n_params = params.trainable_count();
    if n_params > MAX_CHECK_PARAMS {
        return Err(Error::invalid(format!(
            "gradient check is for shrunken nets (<= {MAX_CHECK_PARAMS} parameters), got {n_params}"
        )));
    }
    let fmode = mode.forward_mode();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut loss_of = |p: &MlpParams<f64>| -> Result<f64> {
        let r = if fmode == Mode::Train {
            Some(&mut rng)
        } else {
            None
        };
        let (pred, _) = forward(p, x, fmode, r)?;
        Ok(rmse_loss(pred.view(), y)?.0)
    };

    let (pred, cache) = {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        forward(
            params,
            x,
            fmode,
            if fmode == Mode::Train {
                Some(&mut r)
            } else {
                None
            },
        )?
    };
    let (_, dpred) = rmse_loss(pred.view(), y)?;
    let analytic_t = backward(params, &cache, dpred.view())?;

    let mut work = params.clone();
    let mut analytic = Vec::with_capacity(n_params);
    let mut numeric = Vec::with_capacity(n_params);
    let mut index = Vec::with_capacity(n_params);
    let mut resolution = Vec::with_capacity(n_params);
    for (t, grads) in analytic_t.iter().enumerate() {
        for (i, &g) in grads.iter().enumerate() {
            let orig = work.trainable()[t][i];
            work.trainable_mut()[t][i] = orig + FD_STEP;
            let up = loss_of(&work)?;
            work.trainable_mut()[t][i] = orig - FD_STEP;
            let down = loss_of(&work)?;
            work.trainable_mut()[t][i] = orig;
            analytic.push(g);
            numeric.push((up - down) / (2.0 * FD_STEP));
            index.push((t, i));
            resolution.push(ROUNDOFF_ULPS * f64::EPSILON * up.abs().max(down.abs()) / (2.0 * FD_STEP));
        }
    }
    // a gradient the difference quotient cannot tell from zero (e.g. a bias ahead
    // of batch statistics) agrees when the analytic value is also below that level
    let errs: Vec<f64> = analytic
        .iter()
        .zip(&numeric)
        .zip(&resolution)
        .map(|((a, n), r)| {
            if a.abs() <= *r && n.abs() <= *r {
                0.0
            } else {
                relative_error(*a, *n)
            }
        })
        .collect();
    let (wi, max_rel_error) = errs.iter().copied().enumerate().fold(
        (0, 0.0f64),
        |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) },
    );
    let within = errs.iter().filter(|e| **e <= tol).count();
    Ok(GradCheckReport {
        n_params,
        max_rel_error,
        fraction_within_tol: within as f64 / n_params.max(1) as f64,
        tol,
        worst: index.get(wi).copied().unwrap_or((0, 0)),
        dropout_flagged: mode == CheckMode::TrainWithDropout && params.dropout_p > 0.0,
        analytic,
        numeric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2};

    fn setup() -> (MlpParams<f64>, Array2<f64>, Array1<f64>) {
        let mut p = MlpParams::<f64>::new(&[7, 5, 3, 1], 9).unwrap();
        for (k, n) in p.norms.iter_mut().enumerate() {
            n.gamma.mapv_inplace(|_| 1.0 + 0.1 * k as f64);
            n.beta = Array1::from_shape_fn(n.beta.len(), |j| 0.3 - 0.1 * j as f64);
            n.running_mean = Array1::from_shape_fn(n.beta.len(), |j| 0.05 * j as f64);
            n.running_var = Array1::from_shape_fn(n.beta.len(), |j| 0.5 + 0.2 * j as f64);
        }
        let x = Array2::from_shape_fn((16, 7), |(i, j)| ((i * 7 + j * 3) as f64 * 0.37).sin());
        let y = Array1::from_shape_fn(16, |i| (i as f64 * 0.5).cos());
        (p, x, y)
    }

    #[test]
    fn eval_mode_gradients_match() {
        let (p, x, y) = setup();
        let r = gradient_check(&p, x.view(), y.view(), CheckMode::Eval, 1e-5).unwrap();
        assert_eq!(r.n_params, 78);
        assert!(
            r.passed(),
            "max rel err {} at {:?}",
            r.max_rel_error,
            r.worst
        );
    }

    #[test]
    fn batch_stats_gradients_match() {
        let (p, x, y) = setup();
        let r = gradient_check(&p, x.view(), y.view(), CheckMode::TrainBatchStats, 1e-5).unwrap();
        assert!(r.fraction_within_tol >= 0.99, "{}", r.fraction_within_tol);
        assert!(r.max_rel_error < 1e-4, "{}", r.max_rel_error);
    }

    #[test]
    fn dropout_is_flagged() {
        let (p, x, y) = setup();
        let r = gradient_check(&p, x.view(), y.view(), CheckMode::TrainWithDropout, 1e-5).unwrap();
        assert!(r.dropout_flagged);
        assert!(!r.passed());
        assert!(r.max_rel_error > 1e-3);
    }

    #[test]
    fn zero_residual_zero_output_bias_gradient() {
        let (p, x, _) = setup();
        let (pred, _) = forward(&p, x.view(), Mode::Eval, None).unwrap();
        let r = gradient_check(&p, x.view(), pred.view(), CheckMode::Eval, 1e-5).unwrap();
        // output bias is the last trainable tensor
        assert_eq!(*r.analytic.last().unwrap(), 0.0);
    }

    #[test]
    fn bias_before_batch_stats_counts_as_agreeing_zero() {
        let (p, x, y) = setup();
        let r = gradient_check(&p, x.view(), y.view(), CheckMode::TrainBatchStats, 1e-5).unwrap();
        // dense0.bias is the second trainable tensor; batch statistics cancel it
        for k in 35..40 {
            assert!(r.analytic[k].abs() < 1e-14 && r.numeric[k].abs() < 1e-10);
        }
        assert_ne!(r.worst.0, 1);
    }

    #[test]
    fn a_wrong_gradient_is_caught() {
        let (p, x, y) = setup();
        let r = gradient_check(&p, x.view(), y.view(), CheckMode::Eval, 1e-5).unwrap();
        let mut analytic = r.analytic.clone();
        analytic[3] *= 1.001;
        let worst = analytic
            .iter()
            .zip(&r.numeric)
            .map(|(a, n)| relative_error(*a, *n))
            .fold(0.0f64, f64::max);
        assert!(worst > 1e-4);
    }

    #[test]
    fn refuses_large_nets() {
        let p = MlpParams::<f64>::new(&[7, 64, 32, 1], 0).unwrap();
        let x = Array2::zeros((2, 7));
        let y = Array1::zeros(2);
        assert!(gradient_check(&p, x.view(), y.view(), CheckMode::Eval, 1e-5).is_err());
    }
}
