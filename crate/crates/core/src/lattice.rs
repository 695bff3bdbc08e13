//! Exact n-step nested expectations of partial sums.
//!
//! The i.i.d. step structure makes the nested expectation a backward
//! induction: the value at level k is the one-step expectation of the level
//! k+1 values shifted by one step.  Partial sums of rational atoms recombine,
//! so levels are keyed by exact integer numerators over a common denominator
//! and equal sums merge exactly; the per-step scaling (x by 1/sqrt(n), y by
//! 1/n) is applied only when a payoff is evaluated, which keeps keys exact
//! even when sqrt(n) is irrational.
//!
//! Levels are the sequential barrier; nodes within a level are independent
//! and iterated in lexicographic key order for deterministic floating point.

use crate::error::{Error, Result};
use crate::expectation::one_step_value;
use crate::measure::Atom;
use crate::payoff::Payoff;
use crate::penalty::PenaltySpec;
use crate::rational::to_f64;
use crate::spec::ExpectationSpec;
use num_integer::Integer;
use num_traits::Zero;
use std::time::{Duration, Instant};

/// Per-level node cap.
pub const NODE_CAP: usize = 5_000_000;

/// Lattices support d = 1 and d = 2.
const MAX_LATTICE_DIM: usize = 2;

/// Integer numerators (x then y parts, padded) over the context denominators.
type Key = [i64; 2 * MAX_LATTICE_DIM];

#[inline]
fn key_add(a: &Key, b: &Key) -> Key {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

/// Prepared per-step data for an n-step run of a spec.
struct StepContext {
    d: usize,
    /// Union of the step atoms over all extremes, sorted.
    union: Vec<Key>,
    /// Per extreme: (index into `union`, weight).
    extreme_atoms: Vec<Vec<(usize, f64)>>,
    /// Multipliers taking key numerators to real coordinates.
    x_unit: f64,
    y_unit: f64,
    penalty: PenaltySpec,
    penalty_scale: f64,
}

impl StepContext {
    fn new(spec: &ExpectationSpec, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("step count n must be >= 1".into()));
        }
        let d = spec.d();
        if d > MAX_LATTICE_DIM {
            return Err(Error::InvalidParameter(format!(
                "lattice supports dimension <= {MAX_LATTICE_DIM}, got {d}"
            )));
        }
        let mut x_den: i64 = 1;
        let mut y_den: i64 = 1;
        for m in spec.family.extremes() {
            for atom in m.atoms() {
                for c in &atom.x {
                    x_den = x_den.lcm(c.denom());
                }
                for c in &atom.y {
                    y_den = y_den.lcm(c.denom());
                }
            }
        }
        let key_of = |atom: &Atom| -> Key {
            let mut k = [0i64; 2 * MAX_LATTICE_DIM];
            for (i, c) in atom.x.iter().enumerate() {
                k[i] = c.numer() * (x_den / c.denom());
            }
            for (i, c) in atom.y.iter().enumerate() {
                k[MAX_LATTICE_DIM + i] = c.numer() * (y_den / c.denom());
            }
            k
        };
        let mut union: Vec<Key> = spec
            .family
            .extremes()
            .iter()
            .flat_map(|m| m.atoms().iter().map(key_of))
            .collect();
        union.sort_unstable();
        union.dedup();
        let extreme_atoms = spec
            .family
            .extremes()
            .iter()
            .map(|m| {
                m.atoms()
                    .iter()
                    .zip(m.weights())
                    .map(|(atom, &w)| {
                        let idx = union
                            .binary_search(&key_of(atom))
                            .expect("atom key is in the union");
                        (idx, w)
                    })
                    .collect()
            })
            .collect();
        Ok(StepContext {
            d,
            union,
            extreme_atoms,
            x_unit: spec.x_scaling.factor(n) / x_den as f64,
            y_unit: spec.y_scaling.factor(n) / y_den as f64,
            penalty: spec.penalty.clone(),
            penalty_scale: spec.step_penalty_scale(n),
        })
    }

    #[inline]
    fn eval_payoff(&self, payoff: &Payoff, key: &Key) -> f64 {
        let mut x = [0.0; MAX_LATTICE_DIM];
        let mut y = [0.0; MAX_LATTICE_DIM];
        for i in 0..self.d {
            x[i] = key[i] as f64 * self.x_unit;
            y[i] = key[MAX_LATTICE_DIM + i] as f64 * self.y_unit;
        }
        payoff.eval(&x[..self.d], &y[..self.d])
    }

    /// Level-k node sets for k = 0..=steps.
    fn forward_levels(&self, steps: u32, cap: usize) -> Result<Vec<Vec<Key>>> {
        let mut levels: Vec<Vec<Key>> = Vec::with_capacity(steps as usize + 1);
        levels.push(vec![[0; 2 * MAX_LATTICE_DIM]]);
        for level in 0..steps {
            let cur = levels.last().expect("levels nonempty");
            let mut next = Vec::with_capacity(cur.len() * self.union.len());
            for key in cur {
                for delta in &self.union {
                    next.push(key_add(key, delta));
                }
            }
            next.sort_unstable();
            next.dedup();
            if next.len() > cap {
                return Err(Error::LatticeOverflow {
                    level: level + 1,
                    nodes: next.len(),
                    cap,
                });
            }
            levels.push(next);
        }
        Ok(levels)
    }

    /// Backward induction from the payoff at the last level down to level 0.
    fn backward(&self, levels: &[Vec<Key>], payoff: &Payoff) -> f64 {
        let leaves = levels.last().expect("levels nonempty");
        let mut values: Vec<f64> = leaves.iter().map(|k| self.eval_payoff(payoff, k)).collect();
        let mut q = vec![0.0; self.extreme_atoms.len()];
        for lvl in (0..levels.len() - 1).rev() {
            let cur = &levels[lvl];
            let next = &levels[lvl + 1];
            let mut out = Vec::with_capacity(cur.len());
            for key in cur {
                for (qj, atoms) in q.iter_mut().zip(&self.extreme_atoms) {
                    let mut acc = 0.0;
                    for &(ui, w) in atoms {
                        let child = key_add(key, &self.union[ui]);
                        let idx = next
                            .binary_search(&child)
                            .expect("child key is on the next level");
                        acc += w * values[idx];
                    }
                    *qj = acc;
                }
                out.push(one_step_value(&self.penalty, self.penalty_scale, &q));
            }
            values = out;
        }
        values[0]
    }
}

/// Result of an n-step nested evaluation.
#[derive(Debug, Clone)]
pub struct NestedRun {
    pub value: f64,
    /// Total nodes over all levels.
    pub node_count: u64,
    pub wall_time: Duration,
    pub n: u32,
}

fn nested_steps(spec: &ExpectationSpec, n: u32, steps: u32, payoff: &Payoff) -> Result<NestedRun> {
    let start = Instant::now();
    let ctx = StepContext::new(spec, n)?;
    let levels = ctx.forward_levels(steps, NODE_CAP)?;
    let node_count = levels.iter().map(|l| l.len() as u64).sum();
    let value = ctx.backward(&levels, payoff);
    debug_assert!(
        value.abs() <= payoff.bound + 1e-9,
        "nested value {value} exceeds payoff bound {}",
        payoff.bound
    );
    Ok(NestedRun {
        value,
        node_count,
        wall_time: start.elapsed(),
        n,
    })
}

/// n-step nested expectation of `phi(sum X_i, sum Y_i)` under the spec's
/// per-step scaling and penalty rule ("nested_expect").
pub fn nested_expect(spec: &ExpectationSpec, n: u32, payoff: &Payoff) -> Result<NestedRun> {
    nested_steps(spec, n, n, payoff)
}

/// Both sides of the quadratic additivity identity: the nested expectation of
/// `1/2 <A S_k, S_k> + <p, S_k^Y>` equals k times the one-step value, in the
/// penalized and the sublinear variants alike.
#[derive(Debug, Clone)]
pub struct QuadraticIdentity {
    pub nested_penalized: f64,
    pub step_penalized: f64,
    pub nested_sublinear: f64,
    pub step_sublinear: f64,
}

impl QuadraticIdentity {
    pub fn residual_penalized(&self) -> f64 {
        self.nested_penalized - self.step_penalized
    }

    pub fn residual_sublinear(&self) -> f64 {
        self.nested_sublinear - self.step_sublinear
    }

    pub fn worst_residual(&self) -> f64 {
        self.residual_penalized()
            .abs()
            .max(self.residual_sublinear().abs())
    }
}

/// One-step expectation of the quadratic payoff against the n-scaled steps.
fn one_step_quadratic(
    spec: &ExpectationSpec,
    n: u32,
    a: &crate::measure::SymMat,
    p: &[f64],
) -> Result<f64> {
    let xf2 = to_f64(&spec.x_scaling.factor_squared(n));
    let yf = to_f64(&spec.y_scaling.factor_rat(n));
    let q: Vec<f64> = spec
        .family
        .extremes()
        .iter()
        .map(|m| m.moment_split(a, p).map(|(quad, lin)| xf2 * quad + yf * lin))
        .collect::<Result<_>>()?;
    Ok(one_step_value(&spec.penalty, spec.step_penalty_scale(n), &q))
}

/// Evaluates the k-step nested quadratic expectation and k times the one-step
/// value ("quadratic_identity_check").  Requires centering.
pub fn quadratic_identity_check(
    spec: &ExpectationSpec,
    n: u32,
    k: u32,
    a: &crate::measure::SymMat,
    p: &[f64],
) -> Result<QuadraticIdentity> {
    if k > n || k == 0 {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    let report = spec.family.centering_check();
    if !report.centered {
        return Err(Error::CenteringViolated {
            measure: report.measure,
            component: report.component,
            mean: report.worst,
        });
    }
    let payoff = Payoff::quadratic_form(a.clone(), p.to_vec());
    let hat = spec.sublinear_view();
    Ok(QuadraticIdentity {
        nested_penalized: nested_steps(spec, n, k, &payoff)?.value,
        step_penalized: k as f64 * one_step_quadratic(spec, n, a, p)?,
        nested_sublinear: nested_steps(&hat, n, k, &payoff)?.value,
        step_sublinear: k as f64 * one_step_quadratic(&hat, n, a, p)?,
    })
}

/// Slack of the partial-sum truncation estimate: the worst-case tail mass of
/// `(|S_k^X|^2 - N)^+ + (|S_k^Y| - N)^+` (exact lattice evaluation) is at
/// most the one-step tail functional `(k|X|^2 - N/2)^+ + (k|Y| - N)^+` plus
/// `4 (k E^[|X|^2])^2 / N`.  Returns RHS - LHS, nonnegative up to roundoff.
pub fn truncation_estimate_check(spec: &ExpectationSpec, n: u32, k: u32, cut: f64) -> Result<f64> {
    if k > n || k == 0 {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    if cut <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "truncation level must be positive, got {cut}"
        )));
    }
    let hat = spec.sublinear_view();
    let lhs = nested_steps(&hat, n, k, &Payoff::truncation_bracket(cut))?.value;

    let xf = spec.x_scaling.factor(n);
    let yf = spec.y_scaling.factor(n);
    let kf = k as f64;
    let tail_one_step = hat
        .family
        .extremes()
        .iter()
        .map(|m| {
            m.integrate(|x, y| {
                let x2: f64 = x.iter().map(|c| (xf * c) * (xf * c)).sum();
                let ynorm = y.iter().map(|c| (yf * c) * (yf * c)).sum::<f64>().sqrt();
                (kf * x2 - 0.5 * cut).max(0.0) + (kf * ynorm - cut).max(0.0)
            })
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let ex2 = hat
        .family
        .extremes()
        .iter()
        .map(|m| xf * xf * m.x_abs2_integral())
        .fold(f64::NEG_INFINITY, f64::max);
    let rhs = tail_one_step + 4.0 * (kf * ex2) * (kf * ex2) / cut;
    Ok(rhs - lhs)
}

/// Both evaluation orders of the worst-case product of independent factors.
#[derive(Debug, Clone)]
pub struct IndependenceProduct {
    /// Two-step evaluation of the product payoff.
    pub direct: f64,
    /// Outer expectation of `v -> E^[v * eta]` composed with xi.
    pub composed: f64,
}

impl IndependenceProduct {
    pub fn residual(&self) -> f64 {
        (self.direct - self.composed).abs()
    }
}

/// Checks `E^[xi eta] = E^[E^[v eta] at v = xi]` for payoffs xi of the first
/// step and eta of the second, under the sublinear view of the unscaled
/// family ("independence_product_check").
pub fn independence_product_check(
    spec: &ExpectationSpec,
    xi: &Payoff,
    eta: &Payoff,
) -> Result<IndependenceProduct> {
    let extremes = spec.family.extremes();

    // direct: outer step over the first coordinate, inner step over the second
    let direct = extremes
        .iter()
        .map(|outer| {
            outer.integrate(|x1, y1| {
                let xi_v = xi.eval(x1, y1);
                extremes
                    .iter()
                    .map(|inner| inner.integrate(|x2, y2| xi_v * eta.eval(x2, y2)))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
        })
        .fold(f64::NEG_INFINITY, f64::max);

    // composed: the worst-case mean of eta enters through the positive part
    // of xi and the worst-case mean of -eta through the negative part.
    let eta_plus = extremes
        .iter()
        .map(|m| m.integrate(|x, y| eta.eval(x, y)))
        .fold(f64::NEG_INFINITY, f64::max);
    let eta_minus = extremes
        .iter()
        .map(|m| m.integrate(|x, y| -eta.eval(x, y)))
        .fold(f64::NEG_INFINITY, f64::max);
    let composed = extremes
        .iter()
        .map(|m| {
            m.integrate(|x, y| {
                let v = xi.eval(x, y);
                if v >= 0.0 {
                    v * eta_plus
                } else {
                    -v * eta_minus
                }
            })
        })
        .fold(f64::NEG_INFINITY, f64::max);

    Ok(IndependenceProduct { direct, composed })
}

/// One row of the uniform-integrability profile.
#[derive(Debug, Clone, Copy)]
pub struct ProfileRow {
    pub n: u32,
    pub cut: f64,
    pub value: f64,
}

/// Worst-case scaled tail moments `E^[(n |X_{n,1}|^2 - N)^+ + (n |Y_{n,1}| - N)^+]`
/// per (n, N).  The n-fold scale factors are combined with the scaling rule in
/// exact rational arithmetic first, so under the canonical scaling the rows
/// are exactly constant in n and exactly zero once N clears the atom bound.
pub fn uniform_integrability_profile(
    spec: &ExpectationSpec,
    n_list: &[u32],
    cut_list: &[f64],
) -> Result<Vec<ProfileRow>> {
    let mut rows = Vec::with_capacity(n_list.len() * cut_list.len());
    for &n in n_list {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be >= 1".into()));
        }
        // n * (x factor)^2 and n * (y factor), exact.
        let sx = spec.x_scaling.factor_squared(n) * num_rational::Ratio::from_integer(n as i64);
        let sy = spec.y_scaling.factor_rat(n) * num_rational::Ratio::from_integer(n as i64);
        let (sxf, syf) = (to_f64(&sx), to_f64(&sy));
        for &cut in cut_list {
            let value = spec
                .family
                .extremes()
                .iter()
                .map(|m| {
                    m.atoms()
                        .iter()
                        .zip(m.weights())
                        .map(|(atom, w)| {
                            let x2 = if atom.x_norm2().is_zero() {
                                0.0
                            } else {
                                sxf * to_f64(&atom.x_norm2())
                            };
                            let ynorm = if atom.y_norm2().is_zero() {
                                0.0
                            } else {
                                syf * to_f64(&atom.y_norm2()).sqrt()
                            };
                            w * ((x2 - cut).max(0.0) + (ynorm - cut).max(0.0))
                        })
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            rows.push(ProfileRow { n, cut, value });
        }
    }
    Ok(rows)
}
