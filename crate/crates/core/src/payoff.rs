//! Payoffs: bounded Lipschitz test functions and their algebraic relatives.
//!
//! A payoff is an opaque evaluator on (x, y) plus declared sup-norm and
//! Lipschitz metadata.  The metadata is trusted but spot-checked where atoms
//! are integrated; algebraic payoffs (quadratic forms, truncation brackets)
//! may declare infinite bounds and are rejected by consumers that need
//! genuine boundedness, like the PDE solver.

use crate::measure::SymMat;
use std::fmt;
use std::sync::Arc;

type Evaluator = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Payoff {
    label: String,
    eval: Evaluator,
    /// Declared sup-norm bound; `f64::INFINITY` for algebraic payoffs.
    pub bound: f64,
    /// Declared Lipschitz constant with respect to |(x, y)|.
    pub lipschitz: f64,
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Payoff")
            .field("label", &self.label)
            .field("bound", &self.bound)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl Payoff {
    pub fn new(
        label: impl Into<String>,
        bound: f64,
        lipschitz: f64,
        eval: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Payoff {
            label: label.into(),
            eval: Arc::new(eval),
            bound,
            lipschitz,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let v = (self.eval)(x, y);
        debug_assert!(
            v.abs() <= self.bound + 1e-9,
            "payoff {} exceeds its declared bound: |{v}| > {}",
            self.label,
            self.bound
        );
        v
    }

    pub fn constant(c: f64) -> Self {
        Payoff::new(format!("const({c})"), c.abs(), 0.0, move |_, _| c)
    }

    /// cos of the summed x-coordinates.
    pub fn cosine(d: usize) -> Self {
        Payoff::new("cos", 1.0, (d as f64).sqrt(), move |x, _| {
            x.iter().sum::<f64>().cos()
        })
    }

    /// `1/2 <Ax, x> + <p, y>`; unbounded, for algebraic identities.
    pub fn quadratic_form(a: SymMat, p: Vec<f64>) -> Self {
        Payoff::new(
            "quadratic-form",
            f64::INFINITY,
            f64::INFINITY,
            move |x, y| 0.5 * a.quad(x) + p.iter().zip(y).map(|(pi, yi)| pi * yi).sum::<f64>(),
        )
    }

    /// |x|; unbounded.
    pub fn abs_x() -> Self {
        Payoff::new("abs", f64::INFINITY, 1.0, |x, _| {
            x.iter().map(|c| c * c).sum::<f64>().sqrt()
        })
    }

    /// `-(y_1 - shift)^2`; unbounded, truncate before PDE use.
    pub fn neg_quad_shift(shift: f64) -> Self {
        Payoff::new(
            format!("neg-quad-shift({shift})"),
            f64::INFINITY,
            f64::INFINITY,
            move |_, y| -(y[0] - shift) * (y[0] - shift),
        )
    }

    /// Polynomial in the first x-coordinate, `sum coeffs[i] * x^i`.
    pub fn poly_x(coeffs: Vec<f64>) -> Self {
        Payoff::new("poly-x", f64::INFINITY, f64::INFINITY, move |x, _| {
            coeffs.iter().rev().fold(0.0, |acc, c| acc * x[0] + c)
        })
    }

    /// `|(x, y)| ∧ cap`, the clipped norm used by the tightness statistic.
    pub fn clipped_norm(cap: f64) -> Self {
        Payoff::new(format!("norm∧{cap}"), cap, 1.0, move |x, y| {
            let n2: f64 = x.iter().chain(y).map(|c| c * c).sum();
            n2.sqrt().min(cap)
        })
    }

    /// Piecewise-linear hat squeezed between the indicators of
    /// {|(x,y)| >= cut} and {|(x,y)| >= cut - 1}.
    pub fn tail_hat(cut: f64) -> Self {
        Payoff::new(format!("tail-hat({cut})"), 1.0, 1.0, move |x, y| {
            let n2: f64 = x.iter().chain(y).map(|c| c * c).sum();
            (n2.sqrt() - (cut - 1.0)).clamp(0.0, 1.0)
        })
    }

    /// `(|x|^2 - cut)^+ + (|y| - cut)^+`, the tail-truncation bracket.
    pub fn truncation_bracket(cut: f64) -> Self {
        Payoff::new(
            format!("trunc-bracket({cut})"),
            f64::INFINITY,
            f64::INFINITY,
            move |x, y| {
                let x2: f64 = x.iter().map(|c| c * c).sum();
                let ynorm = y.iter().map(|c| c * c).sum::<f64>().sqrt();
                (x2 - cut).max(0.0) + (ynorm - cut).max(0.0)
            },
        )
    }

    /// Pointwise difference of two payoffs.
    pub fn difference(a: &Payoff, b: &Payoff) -> Self {
        let (fa, fb) = (a.eval.clone(), b.eval.clone());
        Payoff::new(
            format!("{} - {}", a.label, b.label),
            a.bound + b.bound,
            a.lipschitz + b.lipschitz,
            move |x, y| fa(x, y) - fb(x, y),
        )
    }

    /// Pointwise combination `self + alpha * (sum of x-coordinates)`.
    pub fn plus_linear_x(&self, alpha: f64) -> Self {
        let f = self.eval.clone();
        Payoff::new(
            format!("{} + {alpha}*x", self.label),
            f64::INFINITY,
            f64::INFINITY,
            move |x, y| f(x, y) + alpha * x.iter().sum::<f64>(),
        )
    }

    /// Multiplies by a smooth radial cutoff in |(x, y)|: identity inside
    /// `inner`, zero outside `outer`, cubic smoothstep between.  The caller
    /// supplies the sup-norm and Lipschitz constants of the raw payoff on the
    /// ball of radius `outer`; the truncated payoff then carries
    /// `bound = bound_on_window` and
    /// `lipschitz = lip_on_window + bound_on_window * 1.5 / (outer - inner)`.
    pub fn smooth_truncate(
        &self,
        inner: f64,
        outer: f64,
        bound_on_window: f64,
        lip_on_window: f64,
    ) -> Self {
        assert!(
            inner > 0.0 && outer > inner,
            "truncation window must satisfy 0 < inner < outer"
        );
        let f = self.eval.clone();
        let width = outer - inner;
        Payoff::new(
            format!("{}|trunc[{inner},{outer}]", self.label),
            bound_on_window,
            lip_on_window + bound_on_window * 1.5 / width,
            move |x, y| {
                let r = x.iter().chain(y).map(|c| c * c).sum::<f64>().sqrt();
                if r >= outer {
                    return 0.0;
                }
                let v = f(x, y);
                if r <= inner {
                    return v;
                }
                let t = (outer - r) / width;
                v * t * t * (3.0 - 2.0 * t)
            },
        )
    }
}
