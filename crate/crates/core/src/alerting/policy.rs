use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parameter::Parameter;

fn default_max_cloud() -> f64 {
    0.5
}

/// Acceptable range of one parameter. A cell violates the policy when its
/// value is below `lower_bound` or above `upper_bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub policy_id: String,
    pub parameter: Parameter,
    #[serde(default)]
    pub lower_bound: Option<f64>,
    #[serde(default)]
    pub upper_bound: Option<f64>,
    /// A patch raises a message only when its exceed fraction is above this.
    #[serde(default)]
    pub min_exceed_fraction: f64,
    /// Windows with at least this cloud-flagged fraction are invalid.
    #[serde(default = "default_max_cloud")]
    pub max_cloud_fraction: f64,
}

impl ThresholdPolicy {
    /// Upper bound of 10 NTU.
    pub fn turbidity_default() -> Self {
        Self {
            policy_id: "turbidity-10ntu".into(),
            parameter: Parameter::Turbidity,
            lower_bound: None,
            upper_bound: Some(10.0),
            min_exceed_fraction: 0.0,
            max_cloud_fraction: default_max_cloud(),
        }
    }

    /// pH within [6.0, 9.0].
    pub fn ph_default() -> Self {
        Self {
            policy_id: "ph-6-9".into(),
            parameter: Parameter::Ph,
            lower_bound: Some(6.0),
            upper_bound: Some(9.0),
            min_exceed_fraction: 0.0,
            max_cloud_fraction: default_max_cloud(),
        }
    }

    pub fn default_for(parameter: Parameter) -> Self {
        match parameter {
            Parameter::Turbidity => Self::turbidity_default(),
            Parameter::Ph => Self::ph_default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        super::message::check_id("policy_id", &self.policy_id)?;
        match (self.lower_bound, self.upper_bound) {
            (None, None) => return Err(Error::invalid("policy needs at least one bound")),
            (Some(l), Some(u)) if !(l < u) => {
                return Err(Error::invalid(format!(
                    "lower bound {l} must be below upper bound {u}"
                )))
            }
            _ => {}
        }
        if self
            .lower_bound
            .iter()
            .chain(&self.upper_bound)
            .any(|b| !b.is_finite())
        {
            return Err(Error::invalid("policy bounds must be finite"));
        }
        if !(0.0..1.0).contains(&self.min_exceed_fraction) {
            return Err(Error::invalid(format!(
                "min_exceed_fraction {} outside [0, 1)",
                self.min_exceed_fraction
            )));
        }
        if !(self.max_cloud_fraction > 0.0 && self.max_cloud_fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "max_cloud_fraction {} outside (0, 1]",
                self.max_cloud_fraction
            )));
        }
        Ok(())
    }

    pub fn violates(&self, v: f64) -> bool {
        self.lower_bound.is_some_and(|l| v < l) || self.upper_bound.is_some_and(|u| v > u)
    }
}
