//! Quadrature on the reference triangle and the reference edge, exact to a
//! requested polynomial degree.
//!
//! Triangle rules are built as a collapsed Gauss product on the square: with
//! the substitution `(x, y) = (s, t(1-s))` the triangle integral becomes
//! `int_0^1 int_0^1 f(s, t(1-s)) (1-s) dt ds`, so a degree-`d` polynomial
//! needs `d+1` degrees of exactness in `s` (the extra Jacobian factor) and
//! `d` in `t`. All weights are strictly positive.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error("unsupported quadrature degree {0} (supported: 1..=20)")]
    UnsupportedDegree(usize),
}

pub const MAX_DEGREE: usize = 20;

/// A quadrature rule on a reference element.
///
/// Triangle rules store barycentric point coordinates and weights summing to
/// 1/2; edge rules store parametric coordinates in [0,1] (as the first
/// barycentric entry, the rest zero) and weights summing to 1.
#[derive(Clone, Debug)]
pub struct QuadRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on [0, 1], exact to degree `2n-1`.
fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton iteration on P_n with the standard Chebyshev initial guess.
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P_n'(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // Map [-1,1] -> [0,1]; emit in increasing order.
    let mut pairs: Vec<(f64, f64)> = nodes
        .into_iter()
        .zip(weights)
        .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// A rule on the reference triangle `{x, y >= 0, x + y <= 1}`, exact for all
/// polynomials of total degree `<= degree`.
pub fn triangle_rule(degree: usize) -> Result<QuadRule, QuadratureError> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(QuadratureError::UnsupportedDegree(degree));
    }
    if degree == 1 {
        // Centroid rule.
        return Ok(QuadRule {
            points: vec![[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
        });
    }
    let ns = (degree + 2).div_ceil(2);
    let nt = (degree + 1).div_ceil(2);
    let (sx, sw) = gauss_legendre_unit(ns);
    let (tx, tw) = gauss_legendre_unit(nt);
    let mut points = Vec::with_capacity(ns * nt);
    let mut weights = Vec::with_capacity(ns * nt);
    for (s, ws) in sx.iter().zip(&sw) {
        for (t, wt) in tx.iter().zip(&tw) {
            let x = *s;
            let y = t * (1.0 - s);
            points.push([1.0 - x - y, x, y]);
            weights.push(ws * wt * (1.0 - s));
        }
    }
    Ok(QuadRule { points, weights })
}

/// A Gauss rule on the reference edge [0, 1], exact to `degree`.
pub fn edge_rule(degree: usize) -> Result<QuadRule, QuadratureError> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(QuadratureError::UnsupportedDegree(degree));
    }
    let n = (degree + 1).div_ceil(2);
    let (nodes, weights) = gauss_legendre_unit(n);
    Ok(QuadRule {
        points: nodes.into_iter().map(|t| [t, 0.0, 0.0]).collect(),
        weights,
    })
}

/// Integrates `f` (given in barycentric coordinates) over a physical
/// triangle with vertices `verts` using `rule`.
pub fn integrate_triangle<F>(rule: &QuadRule, verts: [[f64; 2]; 3], f: F) -> f64
where
    F: Fn([f64; 3], [f64; 2]) -> f64,
{
    let jac2 = ((verts[1][0] - verts[0][0]) * (verts[2][1] - verts[0][1])
        - (verts[1][1] - verts[0][1]) * (verts[2][0] - verts[0][0]))
        .abs();
    let mut sum = 0.0;
    for (lambda, w) in rule.points.iter().zip(&rule.weights) {
        let x = [
            lambda[0] * verts[0][0] + lambda[1] * verts[1][0] + lambda[2] * verts[2][0],
            lambda[0] * verts[0][1] + lambda[1] * verts[1][1] + lambda[2] * verts[2][1],
        ];
        sum += w * f(*lambda, x);
    }
    // Rule weights sum to the reference measure 1/2; |det J| = 2|K|.
    sum * jac2
}

/// Integrates `f(t, x)` over the segment `a -> b`, `t` the arclength
/// parameter in [0, 1].
pub fn integrate_edge<F>(rule: &QuadRule, a: [f64; 2], b: [f64; 2], f: F) -> f64
where
    F: Fn(f64, [f64; 2]) -> f64,
{
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let mut sum = 0.0;
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let t = p[0];
        let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        sum += w * f(t, x);
    }
    sum * len
}
