//! Reference-element machinery: bases, quadrature and affine maps.

pub mod basis;
pub mod quadrature;

pub use basis::{cell_dim, eval_cell_basis, CellBasis, FacetBasis};
pub use quadrature::{segment_quadrature, triangle_quadrature, MAX_ORDER, QuadratureRule, SegmentRule, TriangleRule};

use crate::error::Result;
use crate::mesh::Point;

pub const REFERENCE_VERTICES: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Affine map from the reference triangle onto a physical cell.
#[derive(Debug, Clone, Copy)]
pub struct AffineMap {
    origin: Point,
    /// Column-major Jacobian `[[a, b], [c, d]]` = `[x1 - x0, x2 - x0]`.
    jac: [[f64; 2]; 2],
    det: f64,
}

impl AffineMap {
    pub fn new(tri: [Point; 3]) -> Self {
        let [p0, p1, p2] = tri;
        let jac = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        AffineMap { origin: p0, jac, det }
    }

    /// Absolute Jacobian determinant (twice the cell area).
    pub fn det(&self) -> f64 {
        self.det.abs()
    }

    pub fn to_physical(&self, xi: [f64; 2]) -> Point {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, x: Point) -> [f64; 2] {
        let (dx, dy) = (x[0] - self.origin[0], x[1] - self.origin[1]);
        [
            (self.jac[1][1] * dx - self.jac[0][1] * dy) / self.det,
            (-self.jac[1][0] * dx + self.jac[0][0] * dy) / self.det,
        ]
    }

    /// Pulls a reference gradient back to physical coordinates.
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        let [[a, b], [c, d]] = self.jac;
        [(d * g[0] - c * g[1]) / self.det, (-b * g[0] + a * g[1]) / self.det]
    }
}

/// Cell-basis values at a fixed quadrature rule, shared by every cell.
#[derive(Debug, Clone)]
pub struct CellTable {
    pub basis: CellBasis,
    pub rule: TriangleRule,
    pub values: Vec<Vec<f64>>,
    pub ref_grads: Vec<Vec<[f64; 2]>>,
}

impl CellTable {
    pub fn new(degree: usize, exactness: usize) -> Result<Self> {
        let basis = CellBasis::new(degree)?;
        let rule = triangle_quadrature(exactness)?;
        let (values, ref_grads) = rule.points.iter().map(|&p| basis.eval(p)).unzip();
        Ok(CellTable {
            basis,
            rule,
            values,
            ref_grads,
        })
    }
}

/// Cell-basis values at segment quadrature points on each reference edge
/// (local edge `i` runs from reference vertex `i` to `i + 1`).
#[derive(Debug, Clone)]
pub struct EdgeTable {
    pub rule: SegmentRule,
    pub values: [Vec<Vec<f64>>; 3],
}

impl EdgeTable {
    pub fn new(basis: &CellBasis, exactness: usize) -> Result<Self> {
        let rule = segment_quadrature(exactness)?;
        let values = [0, 1, 2].map(|e| {
            let (a, b) = (REFERENCE_VERTICES[e], REFERENCE_VERTICES[(e + 1) % 3]);
            rule.points
                .iter()
                .map(|&[s]| basis.values([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]))
                .collect()
        });
        Ok(EdgeTable { rule, values })
    }
}
