use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::real::Real;
use crate::error::{Error, Result};

/// 7 band means in, four 512-wide hidden layers, a 43-wide one, one output.
pub const DEFAULT_LAYER_DIMS: [usize; 7] = [7, 512, 512, 512, 512, 43, 1];
pub const DROPOUT_P: f64 = 0.25;
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Fully-connected layer; `weight` is out x in.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Array1<T>,
    pub beta: Array1<T>,
    pub running_mean: Array1<T>,
    pub running_var: Array1<T>,
}

impl<T: Real> BatchNorm<T> {
    pub fn identity(n: usize) -> Self {
        Self {
            gamma: Array1::ones(n),
            beta: Array1::zeros(n),
            running_mean: Array1::zeros(n),
            running_var: Array1::ones(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

/// Linear -> BatchNorm -> ReLU -> Dropout per hidden layer, then a final Linear.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    pub layer_dims: Vec<usize>,
    pub dense: Vec<Dense<T>>,
    /// One per hidden layer.
    pub norms: Vec<BatchNorm<T>>,
    pub dropout_p: f64,
    pub bn_eps: f64,
    pub bn_momentum: f64,
    /// Number of times the running statistics were updated (0 = never trained).
    pub bn_updates: u64,
}

impl<T: Real> MlpParams<T> {
    /// He-uniform weights (bound sqrt(6 / fan_in)), zero biases, identity batch norm.
    pub fn new(layer_dims: &[usize], seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::invalid(format!("invalid layer dims {layer_dims:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dense = Vec::new();
        for w in layer_dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let weight = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                T::of(rng.random_range(-bound..bound))
            });
            dense.push(Dense {
                weight,
                bias: Array1::zeros(fan_out),
            });
        }
        let norms = layer_dims[1..layer_dims.len() - 1]
            .iter()
            .map(|&n| BatchNorm::identity(n))
            .collect();
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            dense,
            norms,
            dropout_p: DROPOUT_P,
            bn_eps: BN_EPS,
            bn_momentum: BN_MOMENTUM,
            bn_updates: 0,
        })
    }

    pub fn full_size(seed: u64) -> Self {
        Self::new(&DEFAULT_LAYER_DIMS, seed).expect("default dims are valid")
    }

    pub fn n_dense(&self) -> usize {
        self.dense.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.norms.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.layer_dims;
        let bad = |m: String| Err(Error::Invariant(m));
        if d.len() < 2 || self.dense.len() != d.len() - 1 || self.norms.len() != d.len() - 2 {
            return bad(format!("layer count does not match dims {d:?}"));
        }
        for (k, l) in self.dense.iter().enumerate() {
            if l.weight.dim() != (d[k + 1], d[k]) || l.bias.len() != d[k + 1] {
                return bad(format!(
                    "layer {k} weight {:?} does not match dims {} -> {}",
                    l.weight.dim(),
                    d[k],
                    d[k + 1]
                ));
            }
        }
        for (k, n) in self.norms.iter().enumerate() {
            let w = d[k + 1];
            if [
                n.gamma.len(),
                n.beta.len(),
                n.running_mean.len(),
                n.running_var.len(),
            ] != [w; 4]
            {
                return bad(format!("batch norm {k} width does not match {w}"));
            }
            if n.running_var.iter().any(|v| !(*v > T::zero())) {
                return bad(format!("batch norm {k} running_var must be > 0"));
            }
        }
        if self
            .all_tensors()
            .iter()
            .any(|t| t.iter().any(|v| !v.is_finite()))
        {
            return bad("non-finite parameter".into());
        }
        if !(0.0..1.0).contains(&self.dropout_p)
            || !(self.bn_eps > 0.0)
            || !(0.0..=1.0).contains(&self.bn_momentum)
        {
            return bad(format!(
                "dropout_p {} / bn_eps {} / bn_momentum {} out of range",
                self.dropout_p, self.bn_eps, self.bn_momentum
            ));
        }
        Ok(())
    }

    /// Trainable tensors, layer by layer: weight, bias, then gamma, beta for hidden layers.
    pub fn trainable(&self) -> Vec<&[T]> {
        let mut out = Vec::new();
        for (k, l) in self.dense.iter().enumerate() {
            out.push(l.weight.as_slice().expect("standard layout"));
            out.push(l.bias.as_slice().expect("standard layout"));
            if let Some(n) = self.norms.get(k) {
                out.push(n.gamma.as_slice().expect("standard layout"));
                out.push(n.beta.as_slice().expect("standard layout"));
            }
        }
        out
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        let mut norms = self.norms.iter_mut();
        for l in self.dense.iter_mut() {
            out.push(l.weight.as_slice_mut().expect("standard layout"));
            out.push(l.bias.as_slice_mut().expect("standard layout"));
            if let Some(n) = norms.next() {
                out.push(n.gamma.as_slice_mut().expect("standard layout"));
                out.push(n.beta.as_slice_mut().expect("standard layout"));
            }
        }
        out
    }

    pub fn trainable_count(&self) -> usize {
        self.trainable().iter().map(|t| t.len()).sum()
    }

    /// Storage order of every tensor, running statistics included.
    pub fn layout(&self) -> Vec<TensorSpec> {
        let mut out = Vec::new();
        let spec = |name: String, shape: &[usize]| TensorSpec {
            name,
            shape: shape.to_vec(),
        };
        for (k, l) in self.dense.iter().enumerate() {
            out.push(spec(format!("dense{k}.weight"), l.weight.shape()));
            out.push(spec(format!("dense{k}.bias"), l.bias.shape()));
            if let Some(n) = self.norms.get(k) {
                for (name, t) in [
                    ("gamma", &n.gamma),
                    ("beta", &n.beta),
                    ("running_mean", &n.running_mean),
                    ("running_var", &n.running_var),
                ] {
                    out.push(spec(format!("bn{k}.{name}"), t.shape()));
                }
            }
        }
        out
    }

    pub fn all_tensors(&self) -> Vec<&[T]> {
        let mut out = Vec::new();
        for (k, l) in self.dense.iter().enumerate() {
            out.push(l.weight.as_slice().expect("standard layout"));
            out.push(l.bias.as_slice().expect("standard layout"));
            if let Some(n) = self.norms.get(k) {
                for t in [&n.gamma, &n.beta, &n.running_mean, &n.running_var] {
                    out.push(t.as_slice().expect("standard layout"));
                }
            }
        }
        out
    }

    pub fn all_tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        let mut norms = self.norms.iter_mut();
        for l in self.dense.iter_mut() {
            out.push(l.weight.as_slice_mut().expect("standard layout"));
            out.push(l.bias.as_slice_mut().expect("standard layout"));
            if let Some(n) = norms.next() {
                for t in [
                    &mut n.gamma,
                    &mut n.beta,
                    &mut n.running_mean,
                    &mut n.running_var,
                ] {
                    out.push(t.as_slice_mut().expect("standard layout"));
                }
            }
        }
        out
    }

    pub fn cast<U: Real>(&self) -> MlpParams<U> {
        let c1 = |a: &Array1<T>| a.mapv(|v| U::of(v.f64()));
        MlpParams {
            layer_dims: self.layer_dims.clone(),
            dense: self
                .dense
                .iter()
                .map(|l| Dense {
                    weight: l.weight.mapv(|v| U::of(v.f64())),
                    bias: c1(&l.bias),
                })
                .collect(),
            norms: self
                .norms
                .iter()
                .map(|n| BatchNorm {
                    gamma: c1(&n.gamma),
                    beta: c1(&n.beta),
                    running_mean: c1(&n.running_mean),
                    running_var: c1(&n.running_var),
                })
                .collect(),
            dropout_p: self.dropout_p,
            bn_eps: self.bn_eps,
            bn_momentum: self.bn_momentum,
            bn_updates: self.bn_updates,
        }
    }
}
