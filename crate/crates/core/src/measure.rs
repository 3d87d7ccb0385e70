//! Names of the supported measures of concordance.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::matrix::CandidateMatrix;
use crate::sample::SampleMatrix;
use crate::transforms::{self, EstimateError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// Spearman's rho.
    Spearman,
    /// Blomqvist's beta.
    Beta,
    /// Kendall's tau.
    Tau,
    /// Van der Waerden's coefficient.
    Waerden,
}

impl Measure {
    pub const ALL: [Measure; 4] = [Self::Spearman, Self::Beta, Self::Tau, Self::Waerden];

    pub fn name(self) -> &'static str {
        match self {
            Self::Spearman => "spearman",
            Self::Beta => "beta",
            Self::Tau => "tau",
            Self::Waerden => "waerden",
        }
    }

    /// The sample estimator of this measure.
    pub fn estimate(self, samples: &SampleMatrix) -> Result<CandidateMatrix, EstimateError> {
        match self {
            Self::Spearman => transforms::spearman_matrix(samples),
            Self::Beta => transforms::blomqvist_matrix(samples),
            Self::Tau => transforms::kendall_matrix(samples),
            Self::Waerden => transforms::van_der_waerden_matrix(samples),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("unknown measure {0:?} (expected spearman, beta, tau or waerden)")]
pub struct UnknownMeasure(pub String);

impl FromStr for Measure {
    type Err = UnknownMeasure;

    fn from_str(s: &str) -> Result<Self, UnknownMeasure> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spearman" | "rho" => Ok(Self::Spearman),
            "beta" | "blomqvist" => Ok(Self::Beta),
            "tau" | "kendall" => Ok(Self::Tau),
            "waerden" | "vdw" | "zeta" => Ok(Self::Waerden),
            _ => Err(UnknownMeasure(s.to_string())),
        }
    }
}
