//! Modified convex distance through min-norm points of convex hulls.
//!
//! `dist^c(x, A)` is the Euclidean norm of the shortest vector in the convex
//! hull of `U(x, A) = {(|x_i − y_i|)_i : y ∈ A}`. Both it and the ordinary
//! distance to a hull are computed by [`min_norm_point`], which returns a
//! certificate with the Wolfe duality gap.

mod wolfe;

use std::io::BufRead;
use std::str::FromStr;

use serde::Serialize;

use crate::{Error, Result};

pub use wolfe::min_norm_point;

/// Default relative duality-gap tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// A nonempty finite set of points of a common dimension.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSet {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl PointSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map(Vec::len).ok_or_else(|| Error::param("points", "empty point set"))?;
        if dim == 0 {
            return Err(Error::param("points", "zero-dimensional points"));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("point {p:?}")));
            }
        }
        Ok(Self { dim, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.points.iter().any(|p| p.as_slice() == x)
    }

    /// Reads one whitespace-separated vector per line; blank lines and lines
    /// starting with `#` are skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut points = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let p = line
                .split_whitespace()
                .map(|tok| {
                    f64::from_str(tok).map_err(|_| Error::Config(format!("line {}: `{tok}` is not a number", lineno + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            points.push(p);
        }
        Self::new(points)
    }
}

/// Parses `"x1,x2,..."` (commas and/or whitespace).
pub fn parse_point(s: &str) -> Result<Vec<f64>> {
    let v = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::Config(format!("`{t}` is not a number"))))
        .collect::<Result<Vec<f64>>>()?;
    if v.is_empty() {
        return Err(Error::Config("empty point".into()));
    }
    Ok(v)
}

/// Min-norm point of a hull with its optimality certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceCert {
    pub distance: f64,
    /// Convex weights over the input points, in input order.
    pub weights: Vec<f64>,
    /// The min-norm vector `Σ weights_i · q_i`.
    pub witness: Vec<f64>,
    /// `‖v‖² − min_q ⟨v, q⟩`, clamped at zero.
    pub gap: f64,
}

impl DistanceCert {
    /// Checks the certificate against the points it was computed from.
    pub fn verify(&self, points: &PointSet, gap_tol: f64) -> Result<()> {
        if self.weights.len() != points.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), got: self.weights.len() });
        }
        if self.weights.iter().any(|&w| w < 0.0) {
            return Err(Error::Hypothesis("negative weight".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Hypothesis(format!("weights sum to {total}")));
        }
        let norm2: f64 = self.witness.iter().map(|v| v * v).sum();
        if (norm2.sqrt() - self.distance).abs() > 1e-10 {
            return Err(Error::Hypothesis("witness norm differs from distance".into()));
        }
        for (i, c) in self.witness.iter().enumerate() {
            let combo: f64 = self.weights.iter().zip(points.points()).map(|(w, p)| w * p[i]).sum();
            if (combo - c).abs() > 1e-9 * (1.0 + c.abs()) {
                return Err(Error::Hypothesis("witness is not the weighted combination".into()));
            }
        }
        if self.gap > gap_tol {
            return Err(Error::Hypothesis(format!("duality gap {} above {gap_tol}", self.gap)));
        }
        let slack = 1e-12 * (1.0 + norm2);
        for q in points.points() {
            let dot: f64 = q.iter().zip(&self.witness).map(|(a, b)| a * b).sum();
            if dot < norm2 - self.gap - slack {
                return Err(Error::Hypothesis("a point violates the separating inequality".into()));
            }
        }
        Ok(())
    }
}

fn check_dim(x: &[f64], set: &PointSet) -> Result<()> {
    if x.len() != set.dim() {
        return Err(Error::DimensionMismatch { expected: set.dim(), got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("query point {x:?}")));
    }
    Ok(())
}

/// `U(x, A)`: componentwise absolute differences `|x − y|`, `y ∈ A`.
pub fn difference_set(x: &[f64], a: &PointSet) -> Result<PointSet> {
    check_dim(x, a)?;
    let pts = a.points().iter().map(|y| x.iter().zip(y).map(|(xi, yi)| (xi - yi).abs()).collect()).collect();
    PointSet::new(pts)
}

/// Modified convex distance `dist^c(x, A)` for finite `A`.
pub fn dist_c(x: &[f64], a: &PointSet) -> Result<DistanceCert> {
    dist_c_with_tol(x, a, DEFAULT_TOL)
}

pub fn dist_c_with_tol(x: &[f64], a: &PointSet, tol: f64) -> Result<DistanceCert> {
    if a.contains(x) {
        return Ok(exact_hit(x, a));
    }
    min_norm_point(&difference_set(x, a)?, tol)
}

fn exact_hit(x: &[f64], a: &PointSet) -> DistanceCert {
    let idx = a.points().iter().position(|p| p.as_slice() == x).expect("contained");
    let mut weights = vec![0.0; a.len()];
    weights[idx] = 1.0;
    DistanceCert { distance: 0.0, weights, witness: vec![0.0; a.dim()], gap: 0.0 }
}

/// Euclidean distance from `x` to the convex hull of `s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HullDistance {
    pub cert: DistanceCert,
    pub nearest: Vec<f64>,
}

pub fn dist_to_hull(x: &[f64], s: &PointSet) -> Result<HullDistance> {
    check_dim(x, s)?;
    let shifted = PointSet::new(s.points().iter().map(|p| p.iter().zip(x).map(|(pi, xi)| pi - xi).collect()).collect())?;
    let cert = min_norm_point(&shifted, DEFAULT_TOL)?;
    let nearest = cert.witness.iter().zip(x).map(|(w, xi)| w + xi).collect();
    Ok(HullDistance { cert, nearest })
}

/// Lower bound on `dist^c(x, A)` from one unit direction `a`:
/// `min_{y∈A} Σ a_i |x_i − y_i|` after normalizing `a`.
pub fn directional_lower_bound(x: &[f64], a_set: &PointSet, direction: &[f64]) -> Result<f64> {
    check_dim(x, a_set)?;
    if direction.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: direction.len() });
    }
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::param("direction", "zero vector"));
    }
    Ok(a_set
        .points()
        .iter()
        .map(|y| direction.iter().zip(x.iter().zip(y)).map(|(d, (xi, yi))| d / norm * (xi - yi).abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min))
}
