//! Quadrature on the reference triangle `{x, y >= 0, x + y <= 1}` and the
//! reference interval `[0, 1]`.

use crate::error::{Error, Result};

/// Highest polynomial exactness offered by the rules below.
pub const MAX_ORDER: usize = 6;

#[derive(Debug, Clone)]
pub struct QuadratureRule<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl<const D: usize> QuadratureRule<D> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; D], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

pub type TriangleRule = QuadratureRule<2>;
pub type SegmentRule = QuadratureRule<1>;

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn unsupported(order: usize) -> Error {
    Error::InvalidArgument(format!(
        "quadrature exactness {order} not supported (max {MAX_ORDER})"
    ))
}

/// Gauss rule on `[0, 1]` exact for polynomials of degree `exactness`.
pub fn segment_quadrature(exactness: usize) -> Result<SegmentRule> {
    if exactness > MAX_ORDER {
        return Err(unsupported(exactness));
    }
    let n = (exactness + 2) / 2;
    let (x, w) = gauss_legendre(n);
    Ok(QuadratureRule {
        points: x.iter().map(|&t| [0.5 * (t + 1.0)]).collect(),
        weights: w.iter().map(|&wi| 0.5 * wi).collect(),
        exactness,
    })
}

/// Rule on the reference triangle exact for total degree `exactness`.
///
/// Orders 0-1 use the centroid and order 2 the classical three interior
/// points; higher orders use a collapsed (Duffy) Gauss product rule, which has
/// only positive weights.
pub fn triangle_quadrature(exactness: usize) -> Result<TriangleRule> {
    match exactness {
        0 | 1 => Ok(QuadratureRule {
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
            exactness,
        }),
        2 => Ok(QuadratureRule {
            points: vec![[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]],
            weights: vec![1.0 / 6.0; 3],
            exactness,
        }),
        n if n <= MAX_ORDER => {
            // x = u, y = v (1 - u), dx dy = (1 - u) du dv.
            let m = (n + 3) / 2;
            let (g, gw) = gauss_legendre(m);
            let nodes: Vec<(f64, f64)> = g
                .iter()
                .zip(&gw)
                .map(|(&t, &w)| (0.5 * (t + 1.0), 0.5 * w))
                .collect();
            let mut points = Vec::with_capacity(m * m);
            let mut weights = Vec::with_capacity(m * m);
            for &(u, wu) in &nodes {
                for &(v, wv) in &nodes {
                    points.push([u, v * (1.0 - u)]);
                    weights.push(wu * wv * (1.0 - u));
                }
            }
            Ok(QuadratureRule {
                points,
                weights,
                exactness,
            })
        }
        n => Err(unsupported(n)),
    }
}
