//! Convex penalties on mixture weights.
//!
//! A penalty is the pointwise maximum of finitely many affine functions of
//! the mixture weight vector on the simplex, so convexity and continuity hold
//! by construction (and the lower-semicontinuous envelope is the penalty
//! itself).  Validation checks nonnegativity and the existence of a zero on a
//! simplex grid.
//!
//! The module also enumerates the vertex candidates needed by the penalized
//! concave programs: maximizing `q . lambda - rho(lambda)` over the simplex is
//! exact once the vertices of the polyhedral subdivision induced by the
//! pieces are known, and the penalty zero set is a polytope whose vertices
//! come from the same kind of enumeration.

use crate::error::{Error, Result};

/// Affine function `lambda -> <coef, lambda> + offset` on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePiece {
    pub coef: Vec<f64>,
    pub offset: f64,
}

impl AffinePiece {
    pub fn eval(&self, lambda: &[f64]) -> f64 {
        self.coef
            .iter()
            .zip(lambda)
            .map(|(c, l)| c * l)
            .sum::<f64>()
            + self.offset
    }
}

/// A vertex of the subdivision of the simplex together with the penalty value
/// there.  The list is precomputed per penalty; penalized programs only have
/// to scan it.
#[derive(Debug, Clone)]
pub struct LambdaCandidate {
    pub lambda: Vec<f64>,
    pub rho: f64,
}

/// Penalty attained as the max of affine pieces, validated nonnegative with a
/// zero on the simplex.
#[derive(Debug, Clone)]
pub struct ConvexPenalty {
    pieces: Vec<AffinePiece>,
    k: usize,
    candidates: Vec<LambdaCandidate>,
    zero_vertices: Vec<Vec<f64>>,
}

/// Anything at most this large counts as a zero of the penalty.
pub const ZERO_SET_TOL: f64 = 1e-9;

impl ConvexPenalty {
    /// Builds a penalty over the simplex of dimension `k` (number of extreme
    /// measures) and validates it on a grid: mesh 1e-3 for k = 2, 1e-2 for
    /// k = 3 and 4, and 1/8 for larger k, always including the vertices.
    pub fn new(pieces: Vec<AffinePiece>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::PenaltyInvalid {
                reason: "mixture dimension must be at least 1".into(),
            });
        }
        if pieces.is_empty() {
            return Err(Error::PenaltyInvalid {
                reason: "penalty needs at least one affine piece".into(),
            });
        }
        for piece in &pieces {
            if piece.coef.len() != k {
                return Err(Error::PenaltyInvalid {
                    reason: format!(
                        "piece coefficient length {} does not match family size {k}",
                        piece.coef.len()
                    ),
                });
            }
        }
        let penalty = |lambda: &[f64]| -> f64 {
            pieces
                .iter()
                .map(|p| p.eval(lambda))
                .fold(f64::NEG_INFINITY, f64::max)
        };

        let divisions = match k {
            1 => 1,
            2 => 1000,
            3 | 4 => 100,
            _ => 8,
        };
        let mut min_seen = f64::INFINITY;
        let mut point = vec![0.0; k];
        visit_simplex_grid(k, divisions, &mut point, &mut |lambda| {
            let v = penalty(lambda);
            if v < -1e-12 {
                return Err(Error::PenaltyInvalid {
                    reason: format!("penalty is negative ({v:e}) at lambda = {lambda:?}"),
                });
            }
            if v < min_seen {
                min_seen = v;
            }
            Ok(())
        })?;
        if min_seen > ZERO_SET_TOL {
            return Err(Error::PenaltyInvalid {
                reason: format!("penalty never reaches zero on the validation grid (min {min_seen:e})"),
            });
        }

        let candidates = subdivision_vertices(&pieces, k, &penalty);
        let zero_vertices = zero_set_vertices(&pieces, k, &penalty);
        Ok(ConvexPenalty {
            pieces,
            k,
            candidates,
            zero_vertices,
        })
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn eval(&self, lambda: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.eval(lambda))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Vertices of the piecewise-linear subdivision, sorted lexicographically.
    /// The maximum of any `q . lambda - rho(lambda)` over the simplex is
    /// attained on this list.
    pub fn candidates(&self) -> &[LambdaCandidate] {
        &self.candidates
    }

    /// Vertices of the zero set {rho = 0} (a polytope); the sup of a linear
    /// functional over the zero set is the max over these.
    pub fn zero_vertices(&self) -> &[Vec<f64>] {
        &self.zero_vertices
    }
}

/// Penalty variant carried by an expectation spec.
#[derive(Debug, Clone)]
pub enum PenaltySpec {
    /// No penalty: the sublinear (worst-case) expectation.
    Zero,
    /// Penalized sup: a convex expectation.
    Convex(ConvexPenalty),
    /// Inf over a finite family of penalized sups: a general nonlinear
    /// expectation dominated by the sublinear one.
    InfSupFamily(Vec<ConvexPenalty>),
}

impl PenaltySpec {
    pub fn is_zero(&self) -> bool {
        matches!(self, PenaltySpec::Zero)
    }

    /// Mixture dimension the penalty expects, if it constrains one.
    pub fn k(&self) -> Option<usize> {
        match self {
            PenaltySpec::Zero => None,
            PenaltySpec::Convex(c) => Some(c.k()),
            PenaltySpec::InfSupFamily(cs) => cs.first().map(ConvexPenalty::k),
        }
    }
}

/// Visits the barycentric grid with `divisions` subdivisions per edge.
fn visit_simplex_grid(
    k: usize,
    divisions: usize,
    point: &mut Vec<f64>,
    f: &mut impl FnMut(&[f64]) -> Result<()>,
) -> Result<()> {
    fn rec(
        k: usize,
        divisions: usize,
        coord: usize,
        remaining: usize,
        point: &mut Vec<f64>,
        f: &mut impl FnMut(&[f64]) -> Result<()>,
    ) -> Result<()> {
        if coord == k - 1 {
            point[coord] = remaining as f64 / divisions as f64;
            return f(point);
        }
        for take in 0..=remaining {
            point[coord] = take as f64 / divisions as f64;
            rec(k, divisions, coord + 1, remaining - take, point, f)?;
        }
        Ok(())
    }
    rec(k, divisions, 0, divisions, point, f)
}

/// Solves the square system `m x = rhs` by Gaussian elimination with partial
/// pivoting; `None` when (numerically) singular.
fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| {
            m[a][col]
                .abs()
                .partial_cmp(&m[b][col].abs())
                .expect("finite entries")
        })?;
        if m[pivot][col].abs() < 1e-11 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        let pivot_row = m[col].clone();
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = m[row][col] / pivot_row[col];
            if factor == 0.0 {
                continue;
            }
            for (entry, p) in m[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *entry -= factor * p;
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
}

/// Linear equality constraints on lambda used for vertex enumeration:
/// a facet `lambda_j = 0` or a hyperplane `<coef, lambda> = -offset`.
enum VertexConstraint {
    Facet(usize),
    Plane(Vec<f64>, f64),
}

impl VertexConstraint {
    fn row(&self, k: usize) -> (Vec<f64>, f64) {
        match self {
            VertexConstraint::Facet(j) => {
                let mut row = vec![0.0; k];
                row[*j] = 1.0;
                (row, 0.0)
            }
            VertexConstraint::Plane(coef, rhs) => (coef.clone(), *rhs),
        }
    }
}

/// Enumerates points where `k - 1` constraints are active together with the
/// simplex equality, keeps those inside the simplex, and dedupes.
fn enumerate_vertices(constraints: &[VertexConstraint], k: usize) -> Vec<Vec<f64>> {
    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut push = |lambda: Vec<f64>| {
        if lambda.iter().any(|&l| !(-1e-9..=1.0 + 1e-9).contains(&l)) {
            return;
        }
        let mut clamped: Vec<f64> = lambda.iter().map(|&l| l.clamp(0.0, 1.0)).collect();
        let sum: f64 = clamped.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return;
        }
        for c in clamped.iter_mut() {
            *c /= sum;
        }
        let dup = found
            .iter()
            .any(|v| v.iter().zip(&clamped).all(|(a, b)| (a - b).abs() <= 1e-10));
        if !dup {
            found.push(clamped);
        }
    };

    if k == 1 {
        push(vec![1.0]);
        return found;
    }

    // All (k-1)-subsets of the constraint list.
    let mut index = vec![0usize; k - 1];
    let m = constraints.len();
    if m >= k - 1 {
        for (slot, idx) in index.iter_mut().enumerate() {
            *idx = slot;
        }
        loop {
            let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k);
            let mut rhs: Vec<f64> = Vec::with_capacity(k);
            for &ci in &index {
                let (row, r) = constraints[ci].row(k);
                rows.push(row);
                rhs.push(r);
            }
            rows.push(vec![1.0; k]);
            rhs.push(1.0);
            if let Some(lambda) = solve_dense(rows, rhs) {
                push(lambda);
            }
            // next combination
            let mut slot = k - 1;
            loop {
                if slot == 0 {
                    return found;
                }
                slot -= 1;
                if index[slot] < m - (k - 1 - slot) {
                    index[slot] += 1;
                    for s in slot + 1..k - 1 {
                        index[s] = index[s - 1] + 1;
                    }
                    break;
                }
            }
        }
    }
    found
}

fn sort_points(points: &mut [Vec<f64>]) {
    points.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .find_map(|(x, y)| x.partial_cmp(y).filter(|o| o.is_ne()))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
}

fn subdivision_vertices(
    pieces: &[AffinePiece],
    k: usize,
    penalty: &impl Fn(&[f64]) -> f64,
) -> Vec<LambdaCandidate> {
    let mut constraints: Vec<VertexConstraint> = (0..k).map(VertexConstraint::Facet).collect();
    for i in 0..pieces.len() {
        for j in (i + 1)..pieces.len() {
            let coef: Vec<f64> = pieces[i]
                .coef
                .iter()
                .zip(&pieces[j].coef)
                .map(|(a, b)| a - b)
                .collect();
            let rhs = pieces[j].offset - pieces[i].offset;
            constraints.push(VertexConstraint::Plane(coef, rhs));
        }
    }
    let mut points = enumerate_vertices(&constraints, k);
    // Simplex unit vertices are always candidates.
    for j in 0..k {
        let mut v = vec![0.0; k];
        v[j] = 1.0;
        if !points
            .iter()
            .any(|p| p.iter().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-10))
        {
            points.push(v);
        }
    }
    sort_points(&mut points);
    points
        .into_iter()
        .map(|lambda| {
            let rho = penalty(&lambda);
            LambdaCandidate { lambda, rho }
        })
        .collect()
}

fn zero_set_vertices(
    pieces: &[AffinePiece],
    k: usize,
    penalty: &impl Fn(&[f64]) -> f64,
) -> Vec<Vec<f64>> {
    let mut constraints: Vec<VertexConstraint> = (0..k).map(VertexConstraint::Facet).collect();
    for piece in pieces {
        constraints.push(VertexConstraint::Plane(piece.coef.clone(), -piece.offset));
    }
    let mut points: Vec<Vec<f64>> = enumerate_vertices(&constraints, k)
        .into_iter()
        .filter(|lambda| penalty(lambda) <= ZERO_SET_TOL)
        .collect();
    for j in 0..k {
        let mut v = vec![0.0; k];
        v[j] = 1.0;
        if penalty(&v) <= ZERO_SET_TOL
            && !points
                .iter()
                .any(|p| p.iter().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-10))
        {
            points.push(v);
        }
    }
    sort_points(&mut points);
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weight_on_second() -> ConvexPenalty {
        // rho(lambda) = lambda_2, zero at the first vertex.
        ConvexPenalty::new(
            vec![AffinePiece {
                coef: vec![0.0, 1.0],
                offset: 0.0,
            }],
            2,
        )
        .unwrap()
    }

    #[test]
    fn validates_nonnegativity() {
        let err = ConvexPenalty::new(
            vec![AffinePiece {
                coef: vec![0.0, -1.0],
                offset: 0.0,
            }],
            2,
        )
        .unwrap_err();
        assert!(matches!(err, Error::PenaltyInvalid { .. }));
    }

    #[test]
    fn requires_a_zero() {
        let err = ConvexPenalty::new(
            vec![AffinePiece {
                coef: vec![0.0, 0.0],
                offset: 0.5,
            }],
            2,
        )
        .unwrap_err();
        assert!(matches!(err, Error::PenaltyInvalid { .. }));
    }

    #[test]
    fn candidates_of_affine_penalty_are_the_vertices() {
        let rho = weight_on_second();
        let cands = rho.candidates();
        assert_eq!(cands.len(), 2);
        assert_eq!(cands[0].lambda, vec![0.0, 1.0]);
        assert_eq!(cands[1].lambda, vec![1.0, 0.0]);
        assert_eq!(cands[0].rho, 1.0);
        assert_eq!(cands[1].rho, 0.0);
    }

    #[test]
    fn crossing_point_becomes_a_candidate() {
        // rho = max(lambda_2 - 1/4, 1/4 - lambda_2, 0): zero on no point? min is 0 at lambda_2 = 1/4.
        let rho = ConvexPenalty::new(
            vec![
                AffinePiece { coef: vec![0.0, 1.0], offset: -0.25 },
                AffinePiece { coef: vec![0.0, -1.0], offset: 0.25 },
            ],
            2,
        )
        .unwrap();
        assert!(rho
            .candidates()
            .iter()
            .any(|c| (c.lambda[1] - 0.25).abs() < 1e-12 && c.rho.abs() < 1e-12));
    }

    #[test]
    fn zero_set_of_vee_penalty_is_a_point() {
        let rho = ConvexPenalty::new(
            vec![
                AffinePiece { coef: vec![0.0, 1.0], offset: -0.25 },
                AffinePiece { coef: vec![0.0, -1.0], offset: 0.25 },
            ],
            2,
        )
        .unwrap();
        let zs = rho.zero_vertices();
        assert_eq!(zs.len(), 1);
        assert!((zs[0][1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_set_of_plateau_penalty_is_an_interval() {
        // rho = (lambda_2 - 1/2)^+ : zero set is lambda_2 in [0, 1/2].
        let rho = ConvexPenalty::new(
            vec![
                AffinePiece { coef: vec![0.0, 1.0], offset: -0.5 },
                AffinePiece { coef: vec![0.0, 0.0], offset: 0.0 },
            ],
            2,
        )
        .unwrap();
        let zs = rho.zero_vertices();
        assert_eq!(zs.len(), 2);
        assert!((zs[0][1] - 0.5).abs() < 1e-12 || (zs[1][1] - 0.5).abs() < 1e-12);
        assert!(zs.iter().any(|v| v[1].abs() < 1e-12));
    }

    #[test]
    fn k1_penalty_must_vanish_at_the_point() {
        assert!(ConvexPenalty::new(
            vec![AffinePiece { coef: vec![0.0], offset: 0.0 }],
            1
        )
        .is_ok());
        assert!(ConvexPenalty::new(
            vec![AffinePiece { coef: vec![1.0], offset: 0.0 }],
            1
        )
        .is_err());
    }

    #[test]
    fn three_measure_crossings_are_found() {
        // rho(lambda) = max(lambda_2, lambda_3): zero at e_1, crossings on lambda_2 = lambda_3.
        let rho = ConvexPenalty::new(
            vec![
                AffinePiece { coef: vec![0.0, 1.0, 0.0], offset: 0.0 },
                AffinePiece { coef: vec![0.0, 0.0, 1.0], offset: 0.0 },
            ],
            3,
        )
        .unwrap();
        // Midpoint of the e2-e3 edge is a subdivision vertex.
        assert!(rho.candidates().iter().any(|c| {
            (c.lambda[0]).abs() < 1e-12
                && (c.lambda[1] - 0.5).abs() < 1e-12
                && (c.lambda[2] - 0.5).abs() < 1e-12
        }));
    }
}
