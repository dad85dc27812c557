use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::RngCore;
use rand_chacha::ChaCha8Rng;

use super::params::MlpParams;
use super::real::Real;
use crate::error::{Error, Result};

/// How batch norm and dropout behave during a pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Running statistics, no dropout.
    Eval,
    /// Batch statistics and dropout.
    Train,
    /// Batch statistics without dropout.
    BatchStats,
}

impl Mode {
    fn batch_stats(self) -> bool {
        !matches!(self, Mode::Eval)
    }
}

#[derive(Debug, Clone)]
struct LayerCache<T> {
    input: Array2<T>,
    xhat: Array2<T>,
    inv_std: Array1<T>,
    /// d(output)/d(bn output): ReLU derivative times dropout keep/scale.
    gate: Array2<T>,
    batch_mean: Array1<T>,
    batch_var: Array1<T>,
}

/// Intermediate values of a forward pass, consumed by `backward`.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    mode: Mode,
    hidden: Vec<LayerCache<T>>,
    last_input: Array2<T>,
}

impl<T: Real> ForwardCache<T> {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Input of the last dense layer.
    pub fn last_input(&self) -> ArrayView2<'_, T> {
        self.last_input.view()
    }

    pub fn batch_len(&self) -> usize {
        self.last_input.nrows()
    }

    /// Fraction of hidden activations zeroed by dropout or ReLU in layer `k`.
    pub fn zero_fraction(&self, k: usize) -> f64 {
        let g = &self.hidden[k].gate;
        g.iter().filter(|v| **v == T::zero()).count() as f64 / g.len() as f64
    }
}

fn check_finite<T: Real>(a: &Array2<T>, layer: usize, what: &str) -> Result<()> {
    if let Some(v) = a.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric {
            layer,
            detail: format!("{what} produced {v}"),
        });
    }
    Ok(())
}

fn slice<T>(a: &Array1<T>) -> &[T] {
    a.as_slice().expect("contiguous vector")
}

fn rows<T>(a: &Array2<T>, w: usize) -> std::slice::ChunksExact<'_, T> {
    a.as_slice().expect("standard layout").chunks_exact(w)
}

fn rows_mut<T>(a: &mut Array2<T>, w: usize) -> std::slice::ChunksExactMut<'_, T> {
    a.as_slice_mut()
        .expect("standard layout")
        .chunks_exact_mut(w)
}

/// Per-column mean and population variance of a standard-layout matrix.
fn column_stats<T: Real>(z: &Array2<T>) -> (Array1<T>, Array1<T>) {
    let w = z.ncols();
    let n = T::of(z.nrows() as f64);
    let mut mean = vec![T::zero(); w];
    for r in rows(z, w) {
        for j in 0..w {
            mean[j] += r[j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![T::zero(); w];
    for r in rows(z, w) {
        for j in 0..w {
            let d = r[j] - mean[j];
            var[j] += d * d;
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    (Array1::from(mean), Array1::from(var))
}

/// a . b into a fresh standard-layout matrix.
fn matmul<T: Real>(a: &ArrayView2<T>, b: &ArrayView2<T>) -> Array2<T> {
    let mut c = Array2::zeros((a.nrows(), b.ncols()));
    general_mat_mul(T::one(), a, b, T::zero(), &mut c);
    c
}

fn affine<T: Real>(x: &ArrayView2<T>, w: &Array2<T>, b: &Array1<T>) -> Array2<T> {
    let mut z = Array2::zeros((x.nrows(), w.nrows()));
    general_mat_mul(T::one(), x, &w.t(), T::zero(), &mut z);
    z += b;
    z
}

/// Batched forward pass on an n x in matrix; returns n predictions.
/// `Mode::Train` needs an RNG for the dropout masks.
pub fn forward<T: Real>(
    params: &MlpParams<T>,
    x: ArrayView2<T>,
    mode: Mode,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<(Array1<T>, ForwardCache<T>)> {
    if x.ncols() != params.input_dim() {
        return Err(Error::dim(format!(
            "input has {} features, network expects {}",
            x.ncols(),
            params.input_dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite input features"));
    }
    if x.nrows() == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let mut rng = match (mode, rng) {
        (Mode::Train, None) => {
            return Err(Error::invalid(
                "train-mode forward needs an RNG for dropout",
            ))
        }
        (Mode::Train, r) => r,
        _ => None,
    };
    let eps = T::of(params.bn_eps);
    let keep = 1.0 - params.dropout_p;
    let scale = T::of(1.0 / keep);

    let mut hidden = Vec::with_capacity(params.n_hidden());
    let mut current: Array2<T> = x.to_owned();
    for (k, norm) in params.norms.iter().enumerate() {
        let layer = &params.dense[k];
        let z = affine(&current.view(), &layer.weight, &layer.bias);
        check_finite(&z, k, "linear")?;
        let w = z.ncols();
        let (mean, var) = if mode.batch_stats() {
            column_stats(&z)
        } else {
            (norm.running_mean.clone(), norm.running_var.clone())
        };
        let inv_std = var.mapv(|v| T::one() / (v + eps).sqrt());
        let mut xhat = z;
        let mut out = Array2::zeros(xhat.raw_dim());
        let mut gate = Array2::zeros(xhat.raw_dim());
        let (m, is) = (slice(&mean), slice(&inv_std));
        let (ga, be) = (slice(&norm.gamma), slice(&norm.beta));
        for ((xr, or), gr) in rows_mut(&mut xhat, w)
            .zip(rows_mut(&mut out, w))
            .zip(rows_mut(&mut gate, w))
        {
            for j in 0..w {
                let xh = (xr[j] - m[j]) * is[j];
                xr[j] = xh;
                let y = ga[j] * xh + be[j];
                let on = y > T::zero();
                gr[j] = if on { T::one() } else { T::zero() };
                or[j] = if on { y } else { T::zero() };
            }
        }
        if let Some(r) = rng.as_deref_mut() {
            if params.dropout_p > 0.0 {
                // keep with probability `keep`: compare a uniform u32 against keep * 2^32
                let threshold = (keep * 4_294_967_296.0) as u64;
                Zip::from(&mut out).and(&mut gate).for_each(|o, g| {
                    if (r.next_u32() as u64) < threshold {
                        *o = *o * scale;
                        *g = *g * scale;
                    } else {
                        *o = T::zero();
                        *g = T::zero();
                    }
                });
            }
        }
        check_finite(&out, k, "batch norm")?;
        hidden.push(LayerCache {
            input: current,
            xhat,
            inv_std,
            gate,
            batch_mean: mean,
            batch_var: var,
        });
        current = out;
    }
    let last = params.dense.last().expect("at least one dense layer");
    let z = affine(&current.view(), &last.weight, &last.bias);
    check_finite(&z, params.n_dense() - 1, "output")?;
    let pred = z.column(0).to_owned();
    Ok((
        pred,
        ForwardCache {
            mode,
            hidden,
            last_input: current,
        },
    ))
}

/// Eval-mode predictions in chunks.
pub fn predict<T: Real>(params: &MlpParams<T>, x: ArrayView2<T>) -> Result<Array1<T>> {
    let mut out = Vec::with_capacity(x.nrows());
    for chunk in x.axis_chunks_iter(Axis(0), 1024) {
        out.extend(forward(params, chunk, Mode::Eval, None)?.0);
    }
    Ok(Array1::from(out))
}

/// Gradients of the loss with respect to `params.trainable()`, same order and shapes.
pub fn backward<T: Real>(
    params: &MlpParams<T>,
    cache: &ForwardCache<T>,
    dpred: ArrayView1<T>,
) -> Result<Vec<Vec<T>>> {
    if dpred.len() != cache.batch_len() {
        return Err(Error::dim("gradient length does not match batch"));
    }
    let n = T::of(cache.batch_len() as f64);
    let last = params.n_dense() - 1;
    // per dense layer: (dW, db, Option<(dgamma, dbeta)>)
    let mut grads: Vec<(Array2<T>, Array1<T>, Option<(Array1<T>, Array1<T>)>)> =
        Vec::with_capacity(params.n_dense());

    let dz = dpred.to_owned().insert_axis(Axis(1));
    grads.push((
        matmul(&dz.t(), &cache.last_input.view()),
        dz.sum_axis(Axis(0)),
        None,
    ));
    let mut dx = matmul(&dz.view(), &params.dense[last].weight.view());

    for k in (0..params.n_hidden()).rev() {
        let c = &cache.hidden[k];
        let norm = &params.norms[k];
        let mut dz = std::mem::take(&mut dx);
        let w = dz.ncols();
        let mut dgamma = Array1::zeros(w);
        let mut dbeta = Array1::zeros(w);
        {
            let (dg, db) = (
                dgamma.as_slice_mut().expect("owned"),
                dbeta.as_slice_mut().expect("owned"),
            );
            for ((dr, gr), xr) in rows_mut(&mut dz, w)
                .zip(rows(&c.gate, w))
                .zip(rows(&c.xhat, w))
            {
                for j in 0..w {
                    let dy = dr[j] * gr[j];
                    dr[j] = dy;
                    dg[j] += dy * xr[j];
                    db[j] += dy;
                }
            }
        }
        let coeff: Vec<T> = norm
            .gamma
            .iter()
            .zip(&c.inv_std)
            .map(|(&g, &s)| g * s)
            .collect();
        if cache.mode.batch_stats() {
            // dz = gamma inv_std (dy - dbeta / n - xhat dgamma / n)
            let (dg, db) = (slice(&dgamma), slice(&dbeta));
            for (dr, xr) in rows_mut(&mut dz, w).zip(rows(&c.xhat, w)) {
                for j in 0..w {
                    dr[j] = coeff[j] * (dr[j] - (db[j] + xr[j] * dg[j]) / n);
                }
            }
        } else {
            for dr in rows_mut(&mut dz, w) {
                for j in 0..w {
                    dr[j] *= coeff[j];
                }
            }
        }
        grads.push((
            matmul(&dz.t(), &c.input.view()),
            dz.sum_axis(Axis(0)),
            Some((dgamma, dbeta)),
        ));
        if k > 0 {
            dx = matmul(&dz.view(), &params.dense[k].weight.view());
        }
    }
    grads.reverse();
    let mut flat = Vec::with_capacity(grads.len() * 4);
    for (dw, db, bn) in grads {
        flat.push(dw.into_raw_vec_and_offset().0);
        flat.push(db.to_vec());
        if let Some((g, b)) = bn {
            flat.push(g.to_vec());
            flat.push(b.to_vec());
        }
    }
    Ok(flat)
}

/// Fold this pass's batch statistics into the running estimates
/// (exponential moving average; variance stored unbiased).
pub fn update_running_stats<T: Real>(params: &mut MlpParams<T>, cache: &ForwardCache<T>) {
    if !cache.mode.batch_stats() {
        return;
    }
    let m = T::of(params.bn_momentum);
    let n = cache.batch_len() as f64;
    let unbias = T::of(if n > 1.0 { n / (n - 1.0) } else { 1.0 });
    for (norm, c) in params.norms.iter_mut().zip(&cache.hidden) {
        Zip::from(&mut norm.running_mean)
            .and(&c.batch_mean)
            .for_each(|r, &b| *r = (T::one() - m) * *r + m * b);
        Zip::from(&mut norm.running_var)
            .and(&c.batch_var)
            .for_each(|r, &b| *r = (T::one() - m) * *r + m * b * unbias);
    }
    params.bn_updates += 1;
}

/// sqrt(mean((p - t)^2)) and its gradient (p - t) / (n L); the gradient is 0 when L = 0.
pub fn rmse_loss<T: Real>(pred: ArrayView1<T>, target: ArrayView1<T>) -> Result<(T, Array1<T>)> {
    if pred.is_empty() {
        return Err(Error::invalid("RMSE of an empty batch"));
    }
    if pred.len() != target.len() {
        return Err(Error::dim("prediction and target lengths differ"));
    }
    let r = &pred - &target;
    let n = T::of(r.len() as f64);
    let loss = (r.mapv(|v| v * v).sum() / n).sqrt();
    let grad = if loss > T::zero() {
        r / (n * loss)
    } else {
        Array1::zeros(pred.len())
    };
    Ok((loss, grad))
}
