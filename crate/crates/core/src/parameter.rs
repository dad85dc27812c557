use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Water-quality parameter estimated by a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    /// Nephelometric turbidity units.
    Turbidity,
    Ph,
}

impl Parameter {
    pub const ALL: [Parameter; 2] = [Parameter::Turbidity, Parameter::Ph];

    pub fn units(self) -> &'static str {
        match self {
            Parameter::Turbidity => "NTU",
            Parameter::Ph => "pH",
        }
    }

    /// Identifier used in the in-situ CSV `parameter` column.
    pub fn csv_name(self) -> &'static str {
        match self {
            Parameter::Turbidity => "turbidity_NTU",
            Parameter::Ph => "pH",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Parameter::Turbidity => 0,
            Parameter::Ph => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Parameter::Turbidity),
            1 => Ok(Parameter::Ph),
            c => Err(Error::format(format!("unknown parameter code {c}"))),
        }
    }

    /// Physical validity of a measured value.
    pub fn check_value(self, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::invalid(format!(
                "{self} value {value} is not finite"
            )));
        }
        match self {
            Parameter::Turbidity if value < 0.0 => {
                Err(Error::invalid(format!("turbidity {value} NTU is negative")))
            }
            Parameter::Ph if !(0.0..=14.0).contains(&value) => {
                Err(Error::invalid(format!("pH {value} outside [0, 14]")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parameter::Turbidity => "turbidity",
            Parameter::Ph => "ph",
        })
    }
}

impl FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "turbidity" | "turbidity_ntu" => Ok(Parameter::Turbidity),
            "ph" => Ok(Parameter::Ph),
            other => Err(Error::invalid(format!("unknown parameter {other:?}"))),
        }
    }
}
