//! Declarative model files: one document per expectation spec.
//!
//! ```toml
//! [model]
//! label = "vars-1-4"
//! d = 1
//!
//! [[model.extreme]]
//! atoms = [
//!   { x = ["-1"], w = "1/2" },
//!   { x = ["1"], w = "1/2" },
//! ]
//!
//! [model.penalty]
//! variant = "convex"             # "zero" | "convex" | "inf-sup"
//! pieces = [{ coef = ["0", "1"], offset = "0" }]
//!
//! [model.scaling]
//! x = "sqrt-n"
//! y = "n"
//! penalty = "over-n"             # "fixed" | "over-n"
//! ```
//!
//! Atom coordinates are rationals written as strings (`"1/2"`, `"-3"`,
//! `"0.25"`); weights accept the same strings or plain numbers.  Omitted `y`
//! coordinates default to zero.

use crate::error::{Error, Result};
use crate::measure::{Atom, DiscreteMeasure, MeasureFamily};
use crate::payoff::Payoff;
use crate::penalty::{AffinePiece, ConvexPenalty, PenaltySpec};
use crate::rational::{parse_rat, to_f64, Rat};
use crate::spec::{ExpectationSpec, PenaltyScaling, XScalingRule, YScalingRule};
use num_traits::Zero;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum NumberOrString {
    Number(f64),
    Text(String),
}

impl NumberOrString {
    fn as_f64(&self) -> Result<f64> {
        match self {
            NumberOrString::Number(v) => Ok(*v),
            NumberOrString::Text(s) => Ok(to_f64(&parse_rat(s)?)),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomDoc {
    pub x: Vec<String>,
    #[serde(default)]
    pub y: Option<Vec<String>>,
    pub w: NumberOrString,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtremeDoc {
    pub atoms: Vec<AtomDoc>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceDoc {
    pub coef: Vec<String>,
    #[serde(default)]
    pub offset: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyDoc {
    pub variant: String,
    #[serde(default)]
    pub pieces: Option<Vec<PieceDoc>>,
    #[serde(default)]
    pub component: Option<Vec<ComponentDoc>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDoc {
    pub pieces: Vec<PieceDoc>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingDoc {
    pub x: String,
    pub y: String,
    pub penalty: String,
}

impl Default for ScalingDoc {
    fn default() -> Self {
        ScalingDoc {
            x: "sqrt-n".into(),
            y: "n".into(),
            penalty: "fixed".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub label: String,
    pub d: usize,
    pub extreme: Vec<ExtremeDoc>,
    pub penalty: PenaltyDoc,
    #[serde(default)]
    pub scaling: ScalingDoc,
}

fn parse_coords(raw: &[String], d: usize, what: &str) -> Result<Vec<Rat>> {
    if raw.len() != d {
        return Err(Error::Parse(format!(
            "{what} has {} coordinates, model dimension is {d}",
            raw.len()
        )));
    }
    raw.iter().map(|s| parse_rat(s)).collect()
}

fn build_pieces(docs: &[PieceDoc], k: usize) -> Result<Vec<AffinePiece>> {
    docs.iter()
        .map(|doc| {
            let coef = doc
                .coef
                .iter()
                .map(|s| parse_rat(s).map(|r| to_f64(&r)))
                .collect::<Result<Vec<f64>>>()?;
            if coef.len() != k {
                return Err(Error::PenaltyInvalid {
                    reason: format!(
                        "piece coefficient length {} does not match {k} extremes",
                        coef.len()
                    ),
                });
            }
            let offset = match &doc.offset {
                Some(s) => to_f64(&parse_rat(s)?),
                None => 0.0,
            };
            Ok(AffinePiece { coef, offset })
        })
        .collect()
}

impl ModelDoc {
    pub fn from_toml(text: &str) -> Result<ModelDocRoot> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("model file: {e}")))
    }

    pub fn build(&self) -> Result<ExpectationSpec> {
        let d = self.d;
        let mut extremes = Vec::with_capacity(self.extreme.len());
        for (mi, ex) in self.extreme.iter().enumerate() {
            let mut atoms = Vec::with_capacity(ex.atoms.len());
            let mut weights = Vec::with_capacity(ex.atoms.len());
            for (ai, atom) in ex.atoms.iter().enumerate() {
                let x = parse_coords(&atom.x, d, &format!("extreme {mi} atom {ai} x"))?;
                let y = match &atom.y {
                    Some(raw) => parse_coords(raw, d, &format!("extreme {mi} atom {ai} y"))?,
                    None => vec![Rat::zero(); d],
                };
                atoms.push(Atom { x, y });
                weights.push(atom.w.as_f64()?);
            }
            extremes.push(DiscreteMeasure::new(atoms, weights, d)?);
        }
        let family = MeasureFamily::new(extremes, self.label.clone())?;
        let k = family.len();

        let penalty = match self.penalty.variant.as_str() {
            "zero" => PenaltySpec::Zero,
            "convex" => {
                let docs = self.penalty.pieces.as_deref().ok_or_else(|| {
                    Error::PenaltyInvalid {
                        reason: "convex penalty needs pieces".into(),
                    }
                })?;
                PenaltySpec::Convex(ConvexPenalty::new(build_pieces(docs, k)?, k)?)
            }
            "inf-sup" => {
                let comps = self.penalty.component.as_deref().ok_or_else(|| {
                    Error::PenaltyInvalid {
                        reason: "inf-sup penalty needs [[model.penalty.component]] blocks".into(),
                    }
                })?;
                let built = comps
                    .iter()
                    .map(|c| ConvexPenalty::new(build_pieces(&c.pieces, k)?, k))
                    .collect::<Result<Vec<_>>>()?;
                PenaltySpec::InfSupFamily(built)
            }
            other => {
                return Err(Error::PenaltyInvalid {
                    reason: format!("unknown penalty variant {other:?}"),
                })
            }
        };

        ExpectationSpec::new(
            family,
            penalty,
            XScalingRule::from_name(&self.scaling.x)?,
            YScalingRule::from_name(&self.scaling.y)?,
            PenaltyScaling::from_name(&self.scaling.penalty)?,
        )
    }
}

/// Top-level wrapper so model files read `[model]` tables.
#[derive(Debug, Clone, Deserialize)]
pub struct ModelDocRoot {
    pub model: ModelDoc,
}

/// Parses a model document and builds the spec in one go.
pub fn spec_from_toml(text: &str) -> Result<ExpectationSpec> {
    ModelDoc::from_toml(text)?.model.build()
}

/// Payoff description used by experiment configs: a catalog name plus
/// parameters, with an optional smooth truncation window.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffDoc {
    pub name: String,
    /// Scalar second-order coefficient for "quadratic" (payoff a*x^2/2 + p*y).
    #[serde(default)]
    pub a: Option<f64>,
    /// First-order y coefficient for "quadratic".
    #[serde(default)]
    pub p: Option<f64>,
    /// Shift for "neg-quad-shift".
    #[serde(default)]
    pub shift: Option<f64>,
    /// Coefficients for "poly-x", constant term first.
    #[serde(default)]
    pub coeffs: Option<Vec<f64>>,
    /// Constant value for "constant".
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub truncate: Option<TruncateDoc>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncateDoc {
    pub inner: f64,
    pub outer: f64,
}

impl PayoffDoc {
    pub fn build(&self) -> Result<Payoff> {
        let raw = match self.name.as_str() {
            "cos" => Payoff::cosine(1),
            "quadratic" => {
                let a = self.a.unwrap_or(2.0);
                let p = self.p.unwrap_or(0.0);
                Payoff::quadratic_form(crate::measure::SymMat::scalar(a), vec![p])
            }
            "abs" => Payoff::abs_x(),
            "neg-quad-shift" => Payoff::neg_quad_shift(self.shift.unwrap_or(0.0)),
            "poly-x" => Payoff::poly_x(self.coeffs.clone().unwrap_or_default()),
            "constant" => Payoff::constant(self.value.unwrap_or(0.0)),
            other => {
                return Err(Error::Parse(format!("unknown payoff {other:?}")));
            }
        };
        match self.truncate {
            None => Ok(raw),
            Some(TruncateDoc { inner, outer }) => {
                if !(inner > 0.0 && outer > inner) {
                    return Err(Error::InvalidParameter(format!(
                        "truncation window needs 0 < inner < outer, got [{inner}, {outer}]"
                    )));
                }
                let (bound, lip) = self.window_bounds(outer)?;
                Ok(raw.smooth_truncate(inner, outer, bound, lip))
            }
        }
    }

    /// Sup-norm and Lipschitz constants of the raw payoff on the ball of
    /// radius `r`, per catalog entry.
    fn window_bounds(&self, r: f64) -> Result<(f64, f64)> {
        Ok(match self.name.as_str() {
            "cos" => (1.0, 1.0),
            "quadratic" => {
                let a = self.a.unwrap_or(2.0).abs();
                let p = self.p.unwrap_or(0.0).abs();
                (0.5 * a * r * r + p * r, a * r + p)
            }
            "abs" => (r, 1.0),
            "neg-quad-shift" => {
                let s = self.shift.unwrap_or(0.0).abs();
                ((r + s) * (r + s), 2.0 * (r + s))
            }
            "poly-x" => {
                let coeffs = self.coeffs.clone().unwrap_or_default();
                let bound: f64 = coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c.abs() * r.powi(i as i32))
                    .sum();
                let lip: f64 = coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(i, c)| i as f64 * c.abs() * r.powi(i as i32 - 1))
                    .sum();
                (bound, lip)
            }
            "constant" => (self.value.unwrap_or(0.0).abs(), 0.0),
            other => {
                return Err(Error::Parse(format!("unknown payoff {other:?}")));
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"
[model]
label = "vars-1-4"
d = 1

[[model.extreme]]
atoms = [
  { x = ["-1"], w = "1/2" },
  { x = ["1"], w = "1/2" },
]

[[model.extreme]]
atoms = [
  { x = ["-2"], w = 0.5 },
  { x = ["2"], w = 0.5 },
]

[model.penalty]
variant = "convex"
pieces = [{ coef = ["0", "1"] }]

[model.scaling]
x = "sqrt-n"
y = "n"
penalty = "over-n"
"#;

    #[test]
    fn parses_and_builds_the_spec() {
        let spec = spec_from_toml(DOC).unwrap();
        assert_eq!(spec.family.len(), 2);
        assert_eq!(spec.label(), "vars-1-4");
        assert_eq!(spec.penalty_scaling, PenaltyScaling::OverN);
        assert!(matches!(spec.penalty, PenaltySpec::Convex(_)));
        assert!(spec.family.centering_check().centered);
    }

    #[test]
    fn default_scaling_is_canonical_fixed() {
        let doc = DOC.replace(
            "[model.scaling]\nx = \"sqrt-n\"\ny = \"n\"\npenalty = \"over-n\"\n",
            "",
        );
        let spec = spec_from_toml(&doc).unwrap();
        assert_eq!(spec.penalty_scaling, PenaltyScaling::Fixed);
    }

    #[test]
    fn rejects_unknown_scaling_names() {
        let doc = DOC.replace("sqrt-n", "cbrt-n");
        assert!(spec_from_toml(&doc).is_err());
    }

    #[test]
    fn payoff_doc_builds_truncated_quadratic() {
        let doc = PayoffDoc {
            name: "quadratic".into(),
            a: Some(2.0),
            p: None,
            shift: None,
            coeffs: None,
            value: None,
            truncate: Some(TruncateDoc {
                inner: 10.0,
                outer: 20.0,
            }),
        };
        let payoff = doc.build().unwrap();
        assert!(payoff.bound.is_finite());
        assert_eq!(payoff.eval(&[3.0], &[0.0]), 9.0);
        assert_eq!(payoff.eval(&[30.0], &[0.0]), 0.0);
    }
}
