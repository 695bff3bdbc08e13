//! One-step nonlinear expectations against a measure family.
//!
//! The sublinear expectation is the max of the linear integrals over the
//! extreme measures.  The convex expectation subtracts a penalty of the
//! mixture weight and maximizes over the simplex; with max-of-affine
//! penalties the objective is concave piecewise linear, so the program is
//! solved exactly by scanning the precomputed subdivision vertices.  The
//! general nonlinear variant takes an inf over a finite family of convex
//! ones.  All variants are dominated by the sublinear expectation and
//! preserve constants because penalties vanish somewhere.

use crate::error::{Error, Result};
use crate::measure::MeasureFamily;
use crate::payoff::Payoff;
use crate::penalty::{ConvexPenalty, PenaltySpec};
use crate::spec::ExpectationSpec;

/// Maximizes `q . lambda - scale * rho(lambda)` over the simplex.
///
/// Returns the optimal value and the lexicographically smallest optimal
/// vertex (candidates are scanned in lexicographic order and only a strict
/// improvement moves the argmax).
pub(crate) fn maximize_penalized(
    q: &[f64],
    penalty: &ConvexPenalty,
    scale: f64,
) -> (f64, Vec<f64>) {
    debug_assert_eq!(q.len(), penalty.k());
    let mut best = f64::NEG_INFINITY;
    let mut arg: &[f64] = &[];
    for cand in penalty.candidates() {
        let v = cand
            .lambda
            .iter()
            .zip(q)
            .map(|(l, qi)| l * qi)
            .sum::<f64>()
            - scale * cand.rho;
        if v > best {
            best = v;
            arg = &cand.lambda;
        }
    }
    (best, arg.to_vec())
}

/// One-step value given the per-extreme integrals `q` of the payoff.
///
/// `penalty_scale` multiplies the penalty (1 for a fixed penalty, 1/n for the
/// per-step penalty of an n-step run).
pub fn one_step_value(penalty: &PenaltySpec, penalty_scale: f64, q: &[f64]) -> f64 {
    match penalty {
        PenaltySpec::Zero => q.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        PenaltySpec::Convex(rho) => maximize_penalized(q, rho, penalty_scale).0,
        PenaltySpec::InfSupFamily(rhos) => rhos
            .iter()
            .map(|rho| maximize_penalized(q, rho, penalty_scale).0)
            .fold(f64::INFINITY, f64::min),
    }
}

fn integrals(family: &MeasureFamily, payoff: &Payoff) -> Vec<f64> {
    family
        .extremes()
        .iter()
        .map(|m| m.integrate(|x, y| payoff.eval(x, y)))
        .collect()
}

/// Worst-case expectation `max over extremes of integral of phi`.
pub fn sublinear_expect(family: &MeasureFamily, payoff: &Payoff) -> Result<f64> {
    Ok(integrals(family, payoff)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Penalized worst case `sup over the simplex of (mixture integral - rho)`,
/// exact via subdivision-vertex enumeration.
pub fn convex_expect(
    family: &MeasureFamily,
    penalty: &ConvexPenalty,
    payoff: &Payoff,
) -> Result<f64> {
    if penalty.k() != family.len() {
        return Err(Error::DimensionMismatch {
            expected: family.len(),
            got: penalty.k(),
        });
    }
    let q = integrals(family, payoff);
    Ok(maximize_penalized(&q, penalty, 1.0).0)
}

/// Dispatches on the spec's penalty variant (unscaled penalty).
pub fn nonlinear_expect(spec: &ExpectationSpec, payoff: &Payoff) -> Result<f64> {
    let q = integrals(&spec.family, payoff);
    Ok(one_step_value(&spec.penalty, 1.0, &q))
}

/// Domination slack `E^[phi1 - phi2] - (E~[phi1] - E~[phi2])`, which is
/// nonnegative for every valid spec (up to roundoff).
pub fn check_domination(spec: &ExpectationSpec, phi1: &Payoff, phi2: &Payoff) -> Result<f64> {
    let diff = Payoff::difference(phi1, phi2);
    let hat = sublinear_expect(&spec.family, &diff)?;
    let tilde1 = nonlinear_expect(spec, phi1)?;
    let tilde2 = nonlinear_expect(spec, phi2)?;
    Ok(hat - (tilde1 - tilde2))
}

/// Residual of the mean-certainty shift identity: for a centered family,
/// `E~[alpha * x + psi(y)] = E~[psi(y)]` because the linear x-term has zero
/// mean under every mixture.  Returns the difference of the two sides.
pub fn mean_certainty_shift_check(
    spec: &ExpectationSpec,
    alpha: f64,
    psi: &Payoff,
) -> Result<f64> {
    let report = spec.family.centering_check();
    if !report.centered {
        return Err(Error::CenteringViolated {
            measure: report.measure,
            component: report.component,
            mean: report.worst,
        });
    }
    let shifted = psi.plus_linear_x(alpha);
    let lhs = nonlinear_expect(spec, &shifted)?;
    let rhs = nonlinear_expect(spec, psi)?;
    Ok(lhs - rhs)
}
