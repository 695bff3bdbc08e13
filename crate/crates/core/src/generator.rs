//! The limit generator `G(A, p)` driving the limiting parabolic equation.
//!
//! For a mixture weight `lambda` the quadratic moment is linear in (A, p), so
//! every penalized sup over the simplex is a max of finitely many affine
//! functions of (A, p), indexed by the subdivision vertices of the penalty.
//! Two regimes matter:
//!
//! * closed form: `sup over lambda of (moment - rho)` (the scaled-penalty
//!   construction; generally not positively homogeneous);
//! * numeric limit: `lim n -> inf of sup over lambda of (moment - n rho)`
//!   (the fixed-penalty regime; positively homogeneous, collapses onto the
//!   penalty zero set).
//!
//! Inf-sup specs take a min over their penalty components in either regime.

use crate::error::{Error, Result};
use crate::expectation::one_step_value;
use crate::measure::{MeasureFamily, SymMat};
use crate::penalty::{ConvexPenalty, PenaltySpec};
use crate::spec::ExpectationSpec;

/// Tolerance deciding convergence of the limit sequence.
pub const LIMIT_GAP_TOL: f64 = 1e-6;

/// One affine slice of the generator: the moment data of a mixture vertex.
#[derive(Debug, Clone)]
struct Slice {
    /// Mixture second moment `integral of x x^T`, row-major d x d.
    m2: Vec<f64>,
    /// Mixture y-mean.
    y_mean: Vec<f64>,
    /// Penalty at the vertex.
    rho: f64,
}

impl Slice {
    fn linear_part(&self, a: &SymMat, p: &[f64]) -> f64 {
        0.5 * a.frobenius(&self.m2) + p.iter().zip(&self.y_mean).map(|(pi, yi)| pi * yi).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorRegime {
    /// `sup (moment - rho)`, penalties as given.
    ClosedForm,
    /// n-limit of `sup (moment - n rho)` taken along an n-list.
    NumericLimit,
    /// Sup over the penalty zero set: the collapsed n-limit.
    Collapsed,
}

/// Evaluates G(A, p) together with the Lipschitz data the PDE scheme needs.
#[derive(Debug, Clone)]
pub struct GeneratorEval {
    groups: Vec<Vec<Slice>>,
    regime: GeneratorRegime,
    n_list: Vec<u32>,
    d: usize,
    /// `1/2 max_j integral of |x|^2` — bounds the A-increment of G.
    pub lipschitz_a: f64,
    /// `max_j integral of |y|` — bounds the p-increment of G.
    pub lipschitz_p: f64,
}

fn mixture_slice(family: &MeasureFamily, lambda: &[f64], rho: f64) -> Slice {
    let d = family.dim();
    let mut m2 = vec![0.0; d * d];
    let mut y_mean = vec![0.0; d];
    for (weight, measure) in lambda.iter().zip(family.extremes()) {
        if *weight == 0.0 {
            continue;
        }
        for (acc, v) in m2.iter_mut().zip(measure.x_second_moment()) {
            *acc += weight * v;
        }
        for (acc, v) in y_mean.iter_mut().zip(measure.y_mean()) {
            *acc += weight * v;
        }
    }
    Slice { m2, y_mean, rho }
}

fn unit_vertices(k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|j| {
            let mut v = vec![0.0; k];
            v[j] = 1.0;
            v
        })
        .collect()
}

fn groups_for(
    family: &MeasureFamily,
    penalty: &PenaltySpec,
    collapsed: bool,
) -> Result<Vec<Vec<Slice>>> {
    let per_component = |rho: &ConvexPenalty| -> Vec<Slice> {
        if collapsed {
            rho.zero_vertices()
                .iter()
                .map(|lambda| mixture_slice(family, lambda, 0.0))
                .collect()
        } else {
            rho.candidates()
                .iter()
                .map(|cand| mixture_slice(family, &cand.lambda, cand.rho))
                .collect()
        }
    };
    let groups = match penalty {
        PenaltySpec::Zero => vec![unit_vertices(family.len())
            .iter()
            .map(|lambda| mixture_slice(family, lambda, 0.0))
            .collect()],
        PenaltySpec::Convex(rho) => vec![per_component(rho)],
        PenaltySpec::InfSupFamily(rhos) => rhos.iter().map(per_component).collect(),
    };
    if groups.iter().any(Vec::is_empty) {
        return Err(Error::PenaltyInvalid {
            reason: "penalty zero set has no vertices".into(),
        });
    }
    Ok(groups)
}

/// `(1/2 max integral |x|^2, max integral |y|)`, the generator increment
/// bounds used for CFL and influence estimates ("lipschitz_bounds").
pub fn lipschitz_bounds(spec: &ExpectationSpec) -> (f64, f64) {
    let lip_a = spec
        .family
        .extremes()
        .iter()
        .map(|m| 0.5 * m.x_abs2_integral())
        .fold(0.0, f64::max)
        .max(0.0);
    let lip_p = spec
        .family
        .extremes()
        .iter()
        .map(|m| m.y_abs_integral())
        .fold(0.0, f64::max)
        .max(0.0);
    (lip_a, lip_p)
}

impl GeneratorEval {
    /// Generator of the scaled-penalty regime, `sup (moment - rho)`.
    pub fn closed_form(spec: &ExpectationSpec) -> Result<Self> {
        Self::build(spec, GeneratorRegime::ClosedForm, Vec::new())
    }

    /// Generator of the fixed-penalty regime evaluated as an n-limit along
    /// `n_list` (strictly increasing).
    pub fn numeric_limit(spec: &ExpectationSpec, n_list: Vec<u32>) -> Result<Self> {
        if n_list.len() < 2 || n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "n_list must be strictly increasing with at least two entries".into(),
            ));
        }
        Self::build(spec, GeneratorRegime::NumericLimit, n_list)
    }

    /// The collapsed limit: sup of the moment over the penalty zero set.
    pub fn collapsed(spec: &ExpectationSpec) -> Result<Self> {
        Self::build(spec, GeneratorRegime::Collapsed, Vec::new())
    }

    fn build(spec: &ExpectationSpec, regime: GeneratorRegime, n_list: Vec<u32>) -> Result<Self> {
        let collapsed = regime == GeneratorRegime::Collapsed;
        let groups = groups_for(&spec.family, &spec.penalty, collapsed)?;
        let (lipschitz_a, lipschitz_p) = lipschitz_bounds(spec);
        Ok(GeneratorEval {
            groups,
            regime,
            n_list,
            d: spec.d(),
            lipschitz_a,
            lipschitz_p,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn regime(&self) -> GeneratorRegime {
        self.regime
    }

    pub fn evaluate(&self, a: &SymMat, p: &[f64]) -> Result<f64> {
        if a.dim() != self.d || p.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: a.dim().max(p.len()),
            });
        }
        match self.regime {
            GeneratorRegime::ClosedForm | GeneratorRegime::Collapsed => Ok(self
                .groups
                .iter()
                .map(|group| {
                    group
                        .iter()
                        .map(|s| s.linear_part(a, p) - s.rho)
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .fold(f64::INFINITY, f64::min)),
            GeneratorRegime::NumericLimit => Ok(self.limit_sequence(a, p)?.limit),
        }
    }

    pub fn evaluate_scalar(&self, a: f64, p: f64) -> Result<f64> {
        self.evaluate(&SymMat::scalar(a), &[p])
    }

    /// The per-n values `sup (moment - n rho)` (min over groups), their limit
    /// estimate, and the final Cauchy gap.
    pub fn limit_sequence(&self, a: &SymMat, p: &[f64]) -> Result<GeneratorLimit> {
        if self.n_list.is_empty() {
            return Err(Error::InvalidParameter(
                "limit_sequence needs a generator built with numeric_limit".into(),
            ));
        }
        let mut values = Vec::with_capacity(self.n_list.len());
        for &n in &self.n_list {
            let v = self
                .groups
                .iter()
                .map(|group| {
                    group
                        .iter()
                        .map(|s| s.linear_part(a, p) - n as f64 * s.rho)
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .fold(f64::INFINITY, f64::min);
            values.push((n, v));
        }
        let m = values.len();
        let last_gap = (values[m - 1].1 - values[m - 2].1).abs();
        let prev_gap = if m >= 3 {
            (values[m - 2].1 - values[m - 3].1).abs()
        } else {
            f64::INFINITY
        };
        if last_gap > LIMIT_GAP_TOL && prev_gap > LIMIT_GAP_TOL && last_gap >= prev_gap {
            return Err(Error::NonConvergent { prev_gap, last_gap });
        }
        Ok(GeneratorLimit {
            limit: values[m - 1].1,
            cauchy_gap: last_gap,
            values,
        })
    }

    /// d = 1 affine slices `(coef_a, coef_p, offset)` per group, for fast
    /// scalar evaluation in grid sweeps.  `None` for the limit regime (whose
    /// evaluation is a sequence, not a max of affines) and for d > 1.
    pub fn scalar_slices(&self) -> Option<Vec<Vec<(f64, f64, f64)>>> {
        if self.d != 1 || self.regime == GeneratorRegime::NumericLimit {
            return None;
        }
        Some(
            self.groups
                .iter()
                .map(|group| {
                    group
                        .iter()
                        .map(|s| (0.5 * s.m2[0], s.y_mean[0], -s.rho))
                        .collect()
                })
                .collect(),
        )
    }
}

/// The limit-sequence report of the fixed-penalty generator.
#[derive(Debug, Clone)]
pub struct GeneratorLimit {
    pub values: Vec<(u32, f64)>,
    pub limit: f64,
    pub cauchy_gap: f64,
}

/// Closed-form generator value ("generator_closed_form").
pub fn generator_closed_form(spec: &ExpectationSpec, a: &SymMat, p: &[f64]) -> Result<f64> {
    GeneratorEval::closed_form(spec)?.evaluate(a, p)
}

/// Fixed-penalty limit sequence along `n_list` ("generator_limit").
pub fn generator_limit(
    spec: &ExpectationSpec,
    a: &SymMat,
    p: &[f64],
    n_list: &[u32],
) -> Result<GeneratorLimit> {
    GeneratorEval::numeric_limit(spec, n_list.to_vec())?.limit_sequence(a, p)
}

/// Max relative positive-homogeneity residual
/// `|G(t A, t p) - t G(A, p)| / (1 + |t G(A, p)|)` over the scale list.
pub fn homogeneity_check(
    gen: &GeneratorEval,
    a: &SymMat,
    p: &[f64],
    scales: &[f64],
) -> Result<f64> {
    let base = gen.evaluate(a, p)?;
    let mut worst: f64 = 0.0;
    for &t in scales {
        if t < 0.0 {
            return Err(Error::InvalidParameter(
                "homogeneity scales must be nonnegative".into(),
            ));
        }
        let scaled_p: Vec<f64> = p.iter().map(|v| v * t).collect();
        let lhs = gen.evaluate(&a.scaled(t), &scaled_p)?;
        let residual = (lhs - t * base).abs() / (1.0 + (t * base).abs());
        worst = worst.max(residual);
    }
    Ok(worst)
}

/// One-step generator consistency helper: the closed form agrees with routing
/// the quadratic moments through the simplex program.
pub fn closed_form_via_program(spec: &ExpectationSpec, a: &SymMat, p: &[f64]) -> Result<f64> {
    let q: Vec<f64> = spec
        .family
        .extremes()
        .iter()
        .map(|m| m.moment(a, p))
        .collect::<Result<_>>()?;
    Ok(one_step_value(&spec.penalty, 1.0, &q))
}
