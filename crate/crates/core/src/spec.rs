//! A complete expectation model: family, penalty, and per-step scaling rules.

use crate::error::{Error, Result};
use crate::measure::MeasureFamily;
use crate::penalty::PenaltySpec;
use crate::rational::Rat;

/// Scaling rule for the x-part of a step, `n -> 1/sqrt(n)`.
///
/// The rule is symbolic so that squared scale factors stay exact rationals:
/// `factor_squared(n) = 1/n` exactly, which keeps scaled second moments and
/// truncation functionals exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XScalingRule {
    InvSqrtN,
}

impl XScalingRule {
    pub fn factor(self, n: u32) -> f64 {
        match self {
            XScalingRule::InvSqrtN => 1.0 / (n as f64).sqrt(),
        }
    }

    pub fn factor_squared(self, n: u32) -> Rat {
        match self {
            XScalingRule::InvSqrtN => Rat::new(1, n as i64),
        }
    }

    pub fn name(self) -> &'static str {
        "sqrt-n"
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "sqrt-n" => Ok(XScalingRule::InvSqrtN),
            other => Err(Error::Parse(format!("unknown x-scaling rule {other:?}"))),
        }
    }
}

/// Scaling rule for the y-part of a step, `n -> 1/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YScalingRule {
    InvN,
}

impl YScalingRule {
    pub fn factor_rat(self, n: u32) -> Rat {
        match self {
            YScalingRule::InvN => Rat::new(1, n as i64),
        }
    }

    pub fn factor(self, n: u32) -> f64 {
        match self {
            YScalingRule::InvN => 1.0 / n as f64,
        }
    }

    pub fn name(self) -> &'static str {
        "n"
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "n" => Ok(YScalingRule::InvN),
            other => Err(Error::Parse(format!("unknown y-scaling rule {other:?}"))),
        }
    }
}

/// How the penalty enters the per-step expectation of an n-step run: kept
/// fixed, or divided by n (the scaled-penalty construction whose limit
/// generator is the full penalized sup).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyScaling {
    Fixed,
    OverN,
}

impl PenaltyScaling {
    pub fn step_scale(self, n: u32) -> f64 {
        match self {
            PenaltyScaling::Fixed => 1.0,
            PenaltyScaling::OverN => 1.0 / n as f64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PenaltyScaling::Fixed => "fixed",
            PenaltyScaling::OverN => "over-n",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "fixed" => Ok(PenaltyScaling::Fixed),
            "over-n" => Ok(PenaltyScaling::OverN),
            other => Err(Error::Parse(format!("unknown penalty scaling {other:?}"))),
        }
    }
}

/// One complete model: houses both the penalized expectation and the
/// dominating sublinear expectation (its zero-penalty view).
#[derive(Debug, Clone)]
pub struct ExpectationSpec {
    pub family: MeasureFamily,
    pub penalty: PenaltySpec,
    pub x_scaling: XScalingRule,
    pub y_scaling: YScalingRule,
    pub penalty_scaling: PenaltyScaling,
}

impl ExpectationSpec {
    pub fn new(
        family: MeasureFamily,
        penalty: PenaltySpec,
        x_scaling: XScalingRule,
        y_scaling: YScalingRule,
        penalty_scaling: PenaltyScaling,
    ) -> Result<Self> {
        if let Some(k) = penalty.k() {
            if k != family.len() {
                return Err(Error::DimensionMismatch {
                    expected: family.len(),
                    got: k,
                });
            }
        }
        if let PenaltySpec::InfSupFamily(components) = &penalty {
            if components.is_empty() {
                return Err(Error::PenaltyInvalid {
                    reason: "inf-sup penalty family is empty".into(),
                });
            }
            if components.iter().any(|c| c.k() != family.len()) {
                return Err(Error::PenaltyInvalid {
                    reason: "inf-sup penalty components disagree on family size".into(),
                });
            }
        }
        Ok(ExpectationSpec {
            family,
            penalty,
            x_scaling,
            y_scaling,
            penalty_scaling,
        })
    }

    /// Canonical scaling and fixed penalty handling.
    pub fn with_defaults(family: MeasureFamily, penalty: PenaltySpec) -> Result<Self> {
        ExpectationSpec::new(
            family,
            penalty,
            XScalingRule::InvSqrtN,
            YScalingRule::InvN,
            PenaltyScaling::Fixed,
        )
    }

    pub fn d(&self) -> usize {
        self.family.dim()
    }

    pub fn label(&self) -> &str {
        self.family.label()
    }

    /// The dominating sublinear expectation: same family, no penalty.
    pub fn sublinear_view(&self) -> ExpectationSpec {
        ExpectationSpec {
            family: self.family.clone(),
            penalty: PenaltySpec::Zero,
            x_scaling: self.x_scaling,
            y_scaling: self.y_scaling,
            penalty_scaling: self.penalty_scaling,
        }
    }

    pub fn with_penalty_scaling(&self, penalty_scaling: PenaltyScaling) -> ExpectationSpec {
        ExpectationSpec {
            penalty_scaling,
            ..self.clone()
        }
    }

    /// Penalty multiplier for one step of an n-step run.
    pub fn step_penalty_scale(&self, n: u32) -> f64 {
        self.penalty_scaling.step_scale(n)
    }
}
