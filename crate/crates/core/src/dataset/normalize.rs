use serde::{Deserialize, Serialize};

use super::matching::Sample;
use crate::error::{Error, Result};
use crate::raster::PATCH_BANDS;

/// Transform applied to targets before standardization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetTransform {
    #[default]
    Identity,
    Log1p,
}

impl TargetTransform {
    pub fn forward(self, v: f64) -> f64 {
        match self {
            Self::Identity => v,
            Self::Log1p => v.ln_1p(),
        }
    }

    pub fn inverse(self, v: f64) -> f64 {
        match self {
            Self::Identity => v,
            Self::Log1p => v.exp_m1(),
        }
    }
}

/// Per-feature and target standardization statistics (population std, computed on train only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub feature_mean: [f64; PATCH_BANDS],
    pub feature_std: [f64; PATCH_BANDS],
    pub target_mean: f64,
    pub target_std: f64,
    #[serde(default)]
    pub target_transform: TargetTransform,
}

impl NormStats {
    pub fn identity() -> Self {
        Self {
            feature_mean: [0.0; PATCH_BANDS],
            feature_std: [1.0; PATCH_BANDS],
            target_mean: 0.0,
            target_std: 1.0,
            target_transform: TargetTransform::Identity,
        }
    }

    /// Statistics of `samples`. A zero-variance column gets std 1 so it maps to 0.
    pub fn fit(samples: &[Sample], transform: TargetTransform) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid(
                "cannot compute normalization statistics from zero samples",
            ));
        }
        let n = samples.len() as f64;
        let mut mean = [0.0; PATCH_BANDS];
        let mut tmean = 0.0;
        for s in samples {
            for (m, f) in mean.iter_mut().zip(&s.features) {
                *m += f;
            }
            tmean += transform.forward(s.target);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        tmean /= n;
        let mut var = [0.0; PATCH_BANDS];
        let mut tvar = 0.0;
        for s in samples {
            for ((v, f), m) in var.iter_mut().zip(&s.features).zip(&mean) {
                *v += (f - m).powi(2);
            }
            tvar += (transform.forward(s.target) - tmean).powi(2);
        }
        let std_of = |v: f64| {
            let s = (v / n).sqrt();
            if s > 0.0 && s.is_finite() {
                s
            } else {
                1.0
            }
        };
        let stats = Self {
            feature_mean: mean,
            feature_std: var.map(std_of),
            target_mean: tmean,
            target_std: std_of(tvar),
            target_transform: transform,
        };
        stats.validate()?;
        Ok(stats)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self
            .feature_mean
            .iter()
            .chain(&[self.target_mean])
            .all(|v| v.is_finite());
        let positive = self
            .feature_std
            .iter()
            .chain(&[self.target_std])
            .all(|v| v.is_finite() && *v > 0.0);
        if !finite || !positive {
            return Err(Error::invalid(
                "normalization statistics must be finite with positive std",
            ));
        }
        Ok(())
    }

    pub fn normalize_features(&self, x: &[f64; PATCH_BANDS]) -> [f64; PATCH_BANDS] {
        std::array::from_fn(|i| (x[i] - self.feature_mean[i]) / self.feature_std[i])
    }

    pub fn denormalize_features(&self, z: &[f64; PATCH_BANDS]) -> [f64; PATCH_BANDS] {
        std::array::from_fn(|i| z[i] * self.feature_std[i] + self.feature_mean[i])
    }

    pub fn normalize_target(&self, y: f64) -> f64 {
        (self.target_transform.forward(y) - self.target_mean) / self.target_std
    }

    pub fn denormalize_target(&self, z: f64) -> f64 {
        self.target_transform
            .inverse(z * self.target_std + self.target_mean)
    }
}

/// Standardize features and targets. Without `stats`, they are fitted on `samples`
/// (pass the train split); otherwise the given statistics are reused verbatim.
pub fn normalize(
    samples: &[Sample],
    stats: Option<&NormStats>,
) -> Result<(Vec<Sample>, NormStats)> {
    let stats = match stats {
        Some(s) => {
            s.validate()?;
            s.clone()
        }
        None => NormStats::fit(samples, TargetTransform::Identity)?,
    };
    let out = samples
        .iter()
        .map(|s| Sample {
            features: stats.normalize_features(&s.features),
            target: stats.normalize_target(s.target),
            ..s.clone()
        })
        .collect();
    Ok((out, stats))
}

pub fn denormalize(samples: &[Sample], stats: &NormStats) -> Vec<Sample> {
    samples
        .iter()
        .map(|s| Sample {
            features: stats.denormalize_features(&s.features),
            target: stats.denormalize_target(s.target),
            ..s.clone()
        })
        .collect()
}
