//! Experiment config files: one `[model]` document plus experiment sections.
//!
//! ```toml
//! [model]                 # see the model-file format in the core crate
//! ...
//!
//! [converge]
//! payoff = { name = "cos" }
//! n_list = [4, 16, 64, 256]
//! pde = { x_min = -8.0, x_max = 8.0, h_x = 0.02 }
//!
//! [verify]
//! checks = ["centering", "domination"]   # omit for the full suite
//! instances = 100
//!
//! [tightness]
//! n_list = [1, 4, 16]
//! i_list = [1, 2, 3, 4, 5, 6, 7, 8]
//! cutoff = 4.0
//!
//! [generator_table]
//! a_list = [-2.0, -1.0, 0.0, 1.0, 2.0]
//! p_list = [0.0]
//! regime = "closed-form"                 # or "limit"
//! ```

use crate::{CliError, Result};
use nlexp_core::model::{ModelDoc, PayoffDoc};
use nlexp_core::pde::{AxisSpec, BoundaryRule, PDEGrid};
use nlexp_core::ExpectationSpec;
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub model: ModelDoc,
    pub converge: Option<ConvergeDoc>,
    pub corollary1: Option<ConvergeDoc>,
    pub pde: Option<PdeOnlyDoc>,
    pub verify: Option<VerifyDoc>,
    pub tightness: Option<TightnessDoc>,
    pub generator_table: Option<GeneratorTableDoc>,
}

impl ConfigDoc {
    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: ConfigDoc =
            toml::from_str(text).map_err(|e| CliError::Config(format!("config file: {e}")))?;
        Ok(doc)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn build_spec(&self) -> Result<ExpectationSpec> {
        Ok(self.model.build()?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeDoc {
    pub payoff: PayoffDoc,
    pub n_list: Vec<u32>,
    pub pde: PdeGridDoc,
    /// Generator choice: "closed-form" (penalized sup as given) or "limit"
    /// (sup over the penalty zero set, the fixed-penalty n-limit).  Defaults
    /// by penalty scaling: over-n specs use "closed-form", fixed specs "limit".
    #[serde(default)]
    pub generator: Option<String>,
}

impl ConvergeDoc {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(CliError::Config("n_list must be nonempty".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Config("n_list must be strictly increasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeGridDoc {
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub h_x: Option<f64>,
    pub y_min: Option<f64>,
    pub y_max: Option<f64>,
    pub h_y: Option<f64>,
    pub tau: Option<f64>,
    pub t_end: Option<f64>,
    /// Grid-halving levels for extrapolation; 1 solves once.
    pub richardson_levels: Option<u32>,
}

impl PdeGridDoc {
    pub fn build(&self) -> Result<PDEGrid> {
        let x = match (self.x_min, self.x_max, self.h_x) {
            (Some(min), Some(max), Some(h)) => Some(AxisSpec::new(min, max, h)?),
            (None, None, None) => None,
            _ => {
                return Err(CliError::Config(
                    "x axis needs all of x_min, x_max, h_x (or none of them)".into(),
                ))
            }
        };
        let y = match (self.y_min, self.y_max, self.h_y) {
            (Some(min), Some(max), Some(h)) => Some(AxisSpec::new(min, max, h)?),
            (None, None, None) => None,
            _ => {
                return Err(CliError::Config(
                    "y axis needs all of y_min, y_max, h_y (or none of them)".into(),
                ))
            }
        };
        Ok(PDEGrid {
            x,
            y,
            tau: self.tau,
            t_end: self.t_end.unwrap_or(1.0),
            boundary: BoundaryRule::FreezePayoff,
        })
    }

    pub fn levels(&self) -> u32 {
        self.richardson_levels.unwrap_or(1).max(1)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeOnlyDoc {
    pub payoff: PayoffDoc,
    pub pde: PdeGridDoc,
    #[serde(default)]
    pub generator: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct VerifyDoc {
    /// Named checks to run; omit for the full suite.
    pub checks: Option<Vec<String>>,
    /// Randomized instances per check (default 100).
    pub instances: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TightnessDoc {
    pub n_list: Vec<u32>,
    pub i_list: Vec<f64>,
    pub cutoff: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorTableDoc {
    pub a_list: Vec<f64>,
    #[serde(default)]
    pub p_list: Option<Vec<f64>>,
    #[serde(default)]
    pub regime: Option<String>,
}
