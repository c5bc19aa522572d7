//! Wolfe's min-norm-point algorithm.
//!
//! A corral `S` of affinely independent points is maintained with convex
//! weights. Each major cycle adds the point most violating the optimality
//! condition; minor cycles move toward the affine minimizer of `S` and drop
//! points whose weight reaches zero.

use nalgebra::{DMatrix, DVector};

use super::{DistanceCert, PointSet};
use crate::{Error, Result};

const WEIGHT_EPS: f64 = 1e-15;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn combine(points: &[Vec<f64>], corral: &[usize], weights: &[f64], dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for (&i, &w) in corral.iter().zip(weights) {
        for (vk, pk) in v.iter_mut().zip(&points[i]) {
            *vk += w * pk;
        }
    }
    v
}

/// Affine combination of the corral with minimum norm, or `None` when the
/// bordered Gram system is numerically singular.
fn affine_minimizer(points: &[Vec<f64>], corral: &[usize]) -> Option<Vec<f64>> {
    let s = corral.len();
    if s == 1 {
        return Some(vec![1.0]);
    }
    let mut m = DMatrix::<f64>::zeros(s + 1, s + 1);
    for (a, &i) in corral.iter().enumerate() {
        for (b, &j) in corral.iter().enumerate().skip(a) {
            let g = dot(&points[i], &points[j]);
            m[(a, b)] = g;
            m[(b, a)] = g;
        }
        m[(a, s)] = 1.0;
        m[(s, a)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(s + 1);
    rhs[s] = 1.0;
    let sol = m.full_piv_lu().solve(&rhs)?;
    let alpha: Vec<f64> = sol.iter().take(s).copied().collect();
    alpha.iter().all(|a| a.is_finite()).then_some(alpha)
}

/// Shortest vector in the convex hull of `points`.
///
/// Stops when `‖v‖² − min_q ⟨v, q⟩ ≤ tol·(1 + ‖v‖²)`.
pub fn min_norm_point(set: &PointSet, tol: f64) -> Result<DistanceCert> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", format!("{tol} must be positive")));
    }
    let points = set.points();
    let dim = set.dim();
    let norms: Vec<f64> = points.iter().map(|p| dot(p, p)).collect();
    let start = norms
        .iter()
        .enumerate()
        .fold(0, |best, (i, &n)| if n < norms[best] { i } else { best });
    let mut corral = vec![start];
    let mut weights = vec![1.0];
    let max_iter = 100 * (points.len() + dim) + 1000;

    let mut iter = 0;
    loop {
        iter += 1;
        if iter > max_iter {
            return Err(Error::NotConverged(format!("min-norm point after {max_iter} cycles")));
        }
        let v = combine(points, &corral, &weights, dim);
        let v2 = dot(&v, &v);
        let (j, best) = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, dot(&v, p)))
            .fold((0, f64::INFINITY), |acc, (i, d)| if d < acc.1 { (i, d) } else { acc });
        let gap = v2 - best;
        if gap <= tol * (1.0 + v2) || corral.contains(&j) {
            return Ok(certificate(points, &corral, &weights, dim));
        }
        corral.push(j);
        weights.push(0.0);

        // Minor cycles.
        loop {
            iter += 1;
            if iter > max_iter {
                return Err(Error::NotConverged(format!("min-norm point after {max_iter} cycles")));
            }
            let alpha = match affine_minimizer(points, &corral) {
                Some(a) => a,
                None => {
                    // Degenerate corral: drop the lightest older point.
                    let drop = (0..corral.len() - 1)
                        .min_by(|&a, &b| weights[a].total_cmp(&weights[b]))
                        .unwrap_or(0);
                    corral.remove(drop);
                    weights.remove(drop);
                    normalize(&mut weights);
                    continue;
                }
            };
            if alpha.iter().all(|&a| a > WEIGHT_EPS) {
                weights = alpha;
                normalize(&mut weights);
                break;
            }
            let mut theta = 1.0f64;
            for (&l, &a) in weights.iter().zip(&alpha) {
                if a <= WEIGHT_EPS && l - a > 0.0 {
                    theta = theta.min(l / (l - a));
                }
            }
            for (l, a) in weights.iter_mut().zip(&alpha) {
                *l = (1.0 - theta) * *l + theta * a;
            }
            // Drop the points whose weight hit zero (at least one).
            let lightest = (0..weights.len()).min_by(|&a, &b| weights[a].total_cmp(&weights[b])).expect("nonempty");
            let mut keep_c = Vec::with_capacity(corral.len());
            let mut keep_w = Vec::with_capacity(corral.len());
            for (i, (&c, &w)) in corral.iter().zip(&weights).enumerate() {
                if i != lightest && w > WEIGHT_EPS {
                    keep_c.push(c);
                    keep_w.push(w);
                }
            }
            if keep_c.is_empty() {
                keep_c.push(corral[lightest]);
                keep_w.push(1.0);
            }
            corral = keep_c;
            weights = keep_w;
            normalize(&mut weights);
        }
    }
}

fn normalize(w: &mut [f64]) {
    for x in w.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let s: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= s;
    }
}

fn certificate(points: &[Vec<f64>], corral: &[usize], weights: &[f64], dim: usize) -> DistanceCert {
    let mut full = vec![0.0; points.len()];
    for (&i, &w) in corral.iter().zip(weights) {
        full[i] += w;
    }
    let witness = combine(points, corral, weights, dim);
    let v2 = dot(&witness, &witness);
    let min_dot = points.iter().map(|p| dot(&witness, p)).fold(f64::INFINITY, f64::min);
    DistanceCert { distance: v2.sqrt(), weights: full, witness, gap: (v2 - min_dot).max(0.0) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Projected-gradient oracle on the simplex of weights.
    fn projected_gradient(points: &[Vec<f64>]) -> f64 {
        let m = points.len();
        let mut w = vec![1.0 / m as f64; m];
        let lip: f64 = points.iter().map(|p| dot(p, p)).sum::<f64>().max(1e-12);
        for _ in 0..200_000 {
            let v = combine(points, &(0..m).collect::<Vec<_>>(), &w, points[0].len());
            let grad: Vec<f64> = points.iter().map(|p| dot(&v, p)).collect();
            let y: Vec<f64> = w.iter().zip(&grad).map(|(wi, g)| wi - g / lip).collect();
            w = project_simplex(&y);
        }
        let v = combine(points, &(0..m).collect::<Vec<_>>(), &w, points[0].len());
        dot(&v, &v).sqrt()
    }

    fn project_simplex(y: &[f64]) -> Vec<f64> {
        let mut u = y.to_vec();
        u.sort_by(|a, b| b.total_cmp(a));
        let mut css = 0.0;
        let mut tau = 0.0;
        for (i, &ui) in u.iter().enumerate() {
            css += ui;
            let t = (css - 1.0) / (i + 1) as f64;
            if ui - t > 0.0 {
                tau = t;
            }
        }
        y.iter().map(|&v| (v - tau).max(0.0)).collect()
    }

    #[test]
    fn matches_projected_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let dim = rng.random_range(2..5);
            let m = rng.random_range(2..8);
            let pts: Vec<Vec<f64>> =
                (0..m).map(|_| (0..dim).map(|_| rng.random_range(-1.0..3.0)).collect()).collect();
            let set = PointSet::new(pts.clone()).unwrap();
            let cert = min_norm_point(&set, 1e-12).unwrap();
            cert.verify(&set, 1e-10).unwrap();
            let oracle = projected_gradient(&pts);
            assert!((cert.distance - oracle).abs() < 1e-6, "{} vs {}", cert.distance, oracle);
        }
    }

    #[test]
    fn duplicate_and_collinear_points() {
        let set = PointSet::new(vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0], vec![1.0, -1.0]])
            .unwrap();
        let cert = min_norm_point(&set, 1e-10).unwrap();
        cert.verify(&set, 1e-10).unwrap();
        assert!((cert.distance - 1.0).abs() < 1e-12);
    }
}
