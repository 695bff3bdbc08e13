//! Finitely supported measures and the ambiguity family they generate.
//!
//! A [`DiscreteMeasure`] is a probability measure on pairs (x, y) in
//! R^d x R^d with finitely many atoms at exact rational coordinates.  A
//! [`MeasureFamily`] lists the extreme measures whose convex hull realizes the
//! weakly compact convex ambiguity set: the sup of any linear functional over
//! the hull is attained at an extreme, and penalized sups become small concave
//! programs over the mixture simplex.

use crate::error::{Error, Result};
use crate::rational::{to_f64, Rat};
use num_traits::Zero;

/// Absolute tolerance for the weight-sum normalization check.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Componentwise tolerance for the zero-x-mean (centering) check.
pub const CENTERING_TOL: f64 = 1e-12;

/// One support point: the x-part and y-part of a (X, Y) pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Atom {
    pub x: Vec<Rat>,
    pub y: Vec<Rat>,
}

impl Atom {
    /// |x|^2 as an exact rational.
    pub fn x_norm2(&self) -> Rat {
        self.x.iter().map(|c| c * c).fold(Rat::zero(), |a, b| a + b)
    }

    /// |y|^2 as an exact rational.
    pub fn y_norm2(&self) -> Rat {
        self.y.iter().map(|c| c * c).fold(Rat::zero(), |a, b| a + b)
    }
}

/// Symmetric d x d matrix used as the second-order argument of moments and
/// generators.  The constructor symmetrizes its input, the canonical
/// projection for quadratic forms (`<Ax, x>` only sees the symmetric part).
#[derive(Debug, Clone)]
pub struct SymMat {
    d: usize,
    data: Vec<f64>,
}

impl SymMat {
    pub fn new(d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: data.len(),
            });
        }
        let mut m = data;
        for i in 0..d {
            for j in (i + 1)..d {
                let s = 0.5 * (m[i * d + j] + m[j * d + i]);
                m[i * d + j] = s;
                m[j * d + i] = s;
            }
        }
        Ok(SymMat { d, data: m })
    }

    pub fn scalar(a: f64) -> Self {
        SymMat { d: 1, data: vec![a] }
    }

    pub fn zeros(d: usize) -> Self {
        SymMat { d, data: vec![0.0; d * d] }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    /// Quadratic form `<Ax, x>`.
    pub fn quad(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            let row: f64 = self.data[i * self.d..(i + 1) * self.d]
                .iter()
                .zip(x)
                .map(|(a, xj)| a * xj)
                .sum();
            acc += row * xi;
        }
        acc
    }

    pub fn scaled(&self, t: f64) -> Self {
        SymMat {
            d: self.d,
            data: self.data.iter().map(|v| v * t).collect(),
        }
    }

    pub fn add(&self, other: &SymMat) -> Result<Self> {
        if other.d != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: other.d,
            });
        }
        Ok(SymMat {
            d: self.d,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Frobenius inner product `<A, M>`.
    pub fn frobenius(&self, m: &[f64]) -> f64 {
        self.data.iter().zip(m).map(|(a, b)| a * b).sum()
    }
}

/// Finitely supported probability measure with exact rational atoms.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    atoms: Vec<Atom>,
    weights: Vec<f64>,
    d: usize,
    // f64 shadows of the atom coordinates, in atom order.
    atoms_f64: Vec<(Vec<f64>, Vec<f64>)>,
}

impl DiscreteMeasure {
    /// Builds and validates a measure ("make_measure").
    ///
    /// Weights must be nonnegative and sum to 1 within 1e-12; every atom must
    /// have x and y parts of length `d`.
    pub fn new(atoms: Vec<Atom>, weights: Vec<f64>, d: usize) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if atoms.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: atoms.len(),
                got: weights.len(),
            });
        }
        for atom in &atoms {
            if atom.x.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: atom.x.len(),
                });
            }
            if atom.y.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: atom.y.len(),
                });
            }
        }
        let mut sum = 0.0;
        for (index, &weight) in weights.iter().enumerate() {
            if weight < 0.0 {
                return Err(Error::NegativeWeight { index, weight });
            }
            sum += weight;
        }
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::WeightsNotNormalized { sum });
        }
        let atoms_f64 = atoms
            .iter()
            .map(|a| {
                (
                    a.x.iter().map(to_f64).collect(),
                    a.y.iter().map(to_f64).collect(),
                )
            })
            .collect();
        Ok(DiscreteMeasure {
            atoms,
            weights,
            d,
            atoms_f64,
        })
    }

    /// Convenience constructor for d = 1 atoms given as (x, y, weight).
    pub fn from_scalar_atoms(points: &[(Rat, Rat, f64)]) -> Result<Self> {
        let atoms = points
            .iter()
            .map(|(x, y, _)| Atom {
                x: vec![*x],
                y: vec![*y],
            })
            .collect();
        let weights = points.iter().map(|&(_, _, w)| w).collect();
        DiscreteMeasure::new(atoms, weights, 1)
    }

    /// Symmetric two-point measure on x in {-a, +a}, y = 0.
    pub fn rademacher(a: Rat) -> Self {
        DiscreteMeasure::from_scalar_atoms(&[
            (-a, Rat::zero(), 0.5),
            (a, Rat::zero(), 0.5),
        ])
        .expect("rademacher atoms are valid")
    }

    /// Point mass at (x, y), d = 1.
    pub fn point_mass(x: Rat, y: Rat) -> Self {
        DiscreteMeasure::from_scalar_atoms(&[(x, y, 1.0)]).expect("point mass is valid")
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Pushforward under (x, y) -> (a_x * x, a_y * y); weights unchanged and
    /// coordinates stay exact rationals ("scale_measure").
    pub fn scale(&self, a_x: Rat, a_y: Rat) -> Result<Self> {
        for (name, s) in [("a_x", a_x), ("a_y", a_y)] {
            if s <= Rat::zero() {
                return Err(Error::NonPositiveScale {
                    value: format!("{name} = {s}"),
                });
            }
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                x: a.x.iter().map(|c| c * a_x).collect(),
                y: a.y.iter().map(|c| c * a_y).collect(),
            })
            .collect();
        DiscreteMeasure::new(atoms, self.weights.clone(), self.d)
    }

    /// Integrates an arbitrary payoff against the measure, in atom order.
    pub fn integrate(&self, f: impl Fn(&[f64], &[f64]) -> f64) -> f64 {
        self.atoms_f64
            .iter()
            .zip(&self.weights)
            .map(|((x, y), w)| w * f(x, y))
            .sum()
    }

    /// `integral of (1/2 <Ax, x> + <p, y>)` ("moment").
    pub fn moment(&self, a: &SymMat, p: &[f64]) -> Result<f64> {
        let (quad, lin) = self.moment_split(a, p)?;
        Ok(quad + lin)
    }

    /// The quadratic and linear parts of `moment` separately; a measure scaled
    /// by (s_x, s_y) has moment `s_x^2 * quad + s_y * lin`.
    pub fn moment_split(&self, a: &SymMat, p: &[f64]) -> Result<(f64, f64)> {
        if a.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: a.dim(),
            });
        }
        if p.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: p.len(),
            });
        }
        let mut quad = 0.0;
        let mut lin = 0.0;
        for ((x, y), w) in self.atoms_f64.iter().zip(&self.weights) {
            quad += w * 0.5 * a.quad(x);
            lin += w * p.iter().zip(y).map(|(pi, yi)| pi * yi).sum::<f64>();
        }
        Ok((quad, lin))
    }

    /// `integral of (|x|^2 - N)^+ + (|y| - N)^+` ("truncated_tail").
    ///
    /// Atom norms are formed in exact rational arithmetic before conversion,
    /// so the tail is exactly zero once N clears the support bound.
    pub fn truncated_tail(&self, n: f64) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(atom, w)| {
                let x2 = to_f64(&atom.x_norm2());
                let ynorm = to_f64(&atom.y_norm2()).sqrt();
                w * ((x2 - n).max(0.0) + (ynorm - n).max(0.0))
            })
            .sum()
    }

    /// Componentwise x-mean.
    pub fn x_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.d];
        for ((x, _), w) in self.atoms_f64.iter().zip(&self.weights) {
            for (m, c) in mean.iter_mut().zip(x) {
                *m += w * c;
            }
        }
        mean
    }

    /// Componentwise y-mean.
    pub fn y_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.d];
        for ((_, y), w) in self.atoms_f64.iter().zip(&self.weights) {
            for (m, c) in mean.iter_mut().zip(y) {
                *m += w * c;
            }
        }
        mean
    }

    /// Second-moment matrix `integral of x x^T`, row-major d x d.
    pub fn x_second_moment(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d * self.d];
        for ((x, _), w) in self.atoms_f64.iter().zip(&self.weights) {
            for i in 0..self.d {
                for j in 0..self.d {
                    m[i * self.d + j] += w * x[i] * x[j];
                }
            }
        }
        m
    }

    /// `integral of |x|^2`.
    pub fn x_abs2_integral(&self) -> f64 {
        self.integrate(|x, _| x.iter().map(|c| c * c).sum())
    }

    /// `integral of |y|`.
    pub fn y_abs_integral(&self) -> f64 {
        self.integrate(|_, y| y.iter().map(|c| c * c).sum::<f64>().sqrt())
    }

    /// Largest |x|^2 over atoms, exact.
    pub fn max_x_norm2(&self) -> Rat {
        self.atoms
            .iter()
            .map(Atom::x_norm2)
            .max()
            .expect("measure is nonempty")
    }

    /// Largest |y|^2 over atoms, exact.
    pub fn max_y_norm2(&self) -> Rat {
        self.atoms
            .iter()
            .map(Atom::y_norm2)
            .max()
            .expect("measure is nonempty")
    }
}

/// Outcome of the componentwise zero-x-mean check over a family.
#[derive(Debug, Clone, Copy)]
pub struct CenteringReport {
    pub centered: bool,
    /// Largest |x-mean component| over all extremes.
    pub worst: f64,
    /// Extreme measure attaining the worst offender.
    pub measure: usize,
    /// Component attaining the worst offender.
    pub component: usize,
}

/// Extreme measures generating a weakly compact convex ambiguity set as their
/// convex hull.
#[derive(Debug, Clone)]
pub struct MeasureFamily {
    extremes: Vec<DiscreteMeasure>,
    label: String,
}

impl MeasureFamily {
    pub fn new(extremes: Vec<DiscreteMeasure>, label: impl Into<String>) -> Result<Self> {
        let Some(first) = extremes.first() else {
            return Err(Error::EmptyFamily);
        };
        let d = first.dim();
        for m in &extremes {
            if m.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: m.dim(),
                });
            }
        }
        Ok(MeasureFamily {
            extremes,
            label: label.into(),
        })
    }

    pub fn extremes(&self) -> &[DiscreteMeasure] {
        &self.extremes
    }

    pub fn len(&self) -> usize {
        self.extremes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.extremes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.extremes[0].dim()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// True iff every extreme has componentwise zero x-mean within 1e-12;
    /// over a convex hull this is equivalent to mean-certainty at zero
    /// (the sup and the inf of the mean over the set both vanish).
    pub fn centering_check(&self) -> CenteringReport {
        let mut report = CenteringReport {
            centered: true,
            worst: 0.0,
            measure: 0,
            component: 0,
        };
        for (mi, m) in self.extremes.iter().enumerate() {
            for (ci, &c) in m.x_mean().iter().enumerate() {
                if c.abs() > report.worst {
                    report.worst = c.abs();
                    report.measure = mi;
                    report.component = ci;
                }
            }
        }
        report.centered = report.worst <= CENTERING_TOL;
        report
    }

    /// Largest |x|^2 over all atoms of all extremes, exact.
    pub fn max_x_norm2(&self) -> Rat {
        self.extremes
            .iter()
            .map(DiscreteMeasure::max_x_norm2)
            .max()
            .expect("family is nonempty")
    }

    /// Largest |y|^2 over all atoms of all extremes, exact.
    pub fn max_y_norm2(&self) -> Rat {
        self.extremes
            .iter()
            .map(DiscreteMeasure::max_y_norm2)
            .max()
            .expect("family is nonempty")
    }
}
