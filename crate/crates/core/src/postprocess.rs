//! Pressure postprocessing, line sampling and solution diagnostics.
//!
//! The diagnostics integrate the recovered fields directly instead of reusing
//! the assembled matrices, so they check the assembly as well as the solve.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::assembly::{edge_aligned, edge_normal, HdgSolution, ReferenceTables};
use crate::error::{Error, Result};
use crate::femcore::{triangle_quadrature, AffineMap, CellBasis, CellTable, MAX_ORDER};
use crate::geometry::{CellClass, FractureKind};
use crate::mesh::{BoundaryTag, Mesh, Point};
use crate::problem::Discretization;
use crate::scenario::LineCut;

/// A piecewise polynomial scalar field, one coefficient vector per cell in the
/// nodal basis of `basis`.
#[derive(Debug, Clone)]
pub struct CellField {
    pub basis: CellBasis,
    pub coeffs: Vec<Vec<f64>>,
}

impl CellField {
    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn eval(&self, mesh: &Mesh, cell: usize, x: Point) -> f64 {
        let xi = AffineMap::new(mesh.cell_points(cell)).to_reference(x);
        dot(&self.basis.values(xi), &self.coeffs[cell])
    }

    /// Integral over one cell.
    pub fn integral(&self, mesh: &Mesh, cell: usize) -> Result<f64> {
        let rule = triangle_quadrature(self.degree())?;
        let det = AffineMap::new(mesh.cell_points(cell)).det();
        Ok(rule
            .iter()
            .map(|(xi, w)| w * det * dot(&self.basis.values(*xi), &self.coeffs[cell]))
            .sum())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The pressure unknown `p` as a [`CellField`].
pub fn pressure_field(sol: &HdgSolution) -> Result<CellField> {
    Ok(CellField {
        basis: CellBasis::new(sol.degree)?,
        coeffs: sol.p.clone(),
    })
}

/// Local `P_{k+1}` pressure with `grad p* = -K^-1 u_tilde` in the least-squares
/// sense and the cell mean of `p`.
pub fn postprocess_pressure(disc: &Discretization, sol: &HdgSolution) -> Result<CellField> {
    let k = sol.degree;
    let star = CellTable::new(k + 1, 2 * k + 2)?;
    let low = CellBasis::new(k)?;
    let low_values: Vec<Vec<f64>> = star.rule.points.iter().map(|&xi| low.values(xi)).collect();
    let n = star.basis.dim();
    let nl = low.dim();
    let coeffs = (0..disc.mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let map = AffineMap::new(disc.mesh.cell_points(c));
            let det = map.det();
            let k_inv = 1.0 / disc.permeability[c];
            let ut = &sol.u_tilde[c];
            let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
            let mut r = DVector::<f64>::zeros(n + 1);
            let mut p_mean = 0.0;
            for (q, (_, w)) in star.rule.iter().enumerate() {
                let w = w * det;
                let grads: Vec<[f64; 2]> = star.ref_grads[q].iter().map(|&g| map.grad(g)).collect();
                let lv = &low_values[q];
                let flux = [k_inv * dot(lv, &ut[..nl]), k_inv * dot(lv, &ut[nl..])];
                p_mean += w * dot(lv, &sol.p[c]);
                for a in 0..n {
                    r[a] -= w * (flux[0] * grads[a][0] + flux[1] * grads[a][1]);
                    m[(a, n)] += w * star.values[q][a];
                    m[(n, a)] += w * star.values[q][a];
                    for b in 0..n {
                        m[(a, b)] += w * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                    }
                }
            }
            r[n] = p_mean;
            let x = m
                .lu()
                .solve(&r)
                .ok_or_else(|| Error::Numerical(format!("cell {c}: postprocessing system is singular")))?;
            Ok(x.rows(0, n).iter().copied().collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(CellField {
        basis: star.basis,
        coeffs,
    })
}

/// Point location via a uniform bucket grid over the domain.
#[derive(Debug, Clone)]
pub struct CellLocator {
    origin: Point,
    cell_size: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

const LOCATE_TOL: f64 = 1e-12;

impl CellLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let d = mesh.domain;
        let side = (mesh.num_cells() as f64).sqrt().ceil().max(1.0) as usize;
        let dims = [side, side];
        let cell_size = [d.width() / side as f64, d.height() / side as f64];
        let mut buckets = vec![Vec::new(); side * side];
        let bin = |v: f64, o: f64, h: f64| (((v - o) / h).floor().max(0.0) as usize).min(side - 1);
        for c in 0..mesh.num_cells() {
            let pts = mesh.cell_points(c);
            let (lo, hi) = pts.iter().fold(([f64::MAX; 2], [f64::MIN; 2]), |(lo, hi), p| {
                ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
            });
            let pad = [LOCATE_TOL * d.width(), LOCATE_TOL * d.height()];
            for i in bin(lo[0] - pad[0], d.x0, cell_size[0])..=bin(hi[0] + pad[0], d.x0, cell_size[0]) {
                for j in bin(lo[1] - pad[1], d.y0, cell_size[1])..=bin(hi[1] + pad[1], d.y0, cell_size[1]) {
                    buckets[j * side + i].push(c);
                }
            }
        }
        CellLocator {
            origin: [d.x0, d.y0],
            cell_size,
            dims,
            buckets,
        }
    }

    /// Cell containing `x` (boundary included). Points shared by several
    /// cells go to the one with the lexicographically smallest centroid, so
    /// the answer does not depend on the cell numbering.
    pub fn locate(&self, mesh: &Mesh, x: Point) -> Option<usize> {
        let bin = |v: f64, o: f64, h: f64, n: usize| {
            let t = ((v - o) / h).floor();
            (t >= -1.0 && t <= n as f64).then(|| (t.max(0.0) as usize).min(n - 1))
        };
        let i = bin(x[0], self.origin[0], self.cell_size[0], self.dims[0])?;
        let j = bin(x[1], self.origin[1], self.cell_size[1], self.dims[1])?;
        self.buckets[j * self.dims[0] + i]
            .iter()
            .copied()
            .filter(|&c| {
                let xi = AffineMap::new(mesh.cell_points(c)).to_reference(x);
                xi[0] >= -LOCATE_TOL && xi[1] >= -LOCATE_TOL && xi[0] + xi[1] <= 1.0 + LOCATE_TOL
            })
            .min_by(|&a, &b| {
                let (ca, cb) = (mesh.centroid(a), mesh.centroid(b));
                ca[0].total_cmp(&cb[0]).then(ca[1].total_cmp(&cb[1]))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSample {
    /// Distance from the start point.
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

/// `n` equispaced samples of `field` from `a` to `b`, endpoints included.
pub fn sample_line(mesh: &Mesh, field: &CellField, cut: &LineCut) -> Result<Vec<LineSample>> {
    if cut.n < 2 {
        return Err(Error::InvalidArgument(format!("line cut needs at least 2 samples, got {}", cut.n)));
    }
    let locator = CellLocator::new(mesh);
    let len = (cut.b[0] - cut.a[0]).hypot(cut.b[1] - cut.a[1]);
    (0..cut.n)
        .map(|i| {
            let t = i as f64 / (cut.n - 1) as f64;
            let x = [cut.a[0] + t * (cut.b[0] - cut.a[0]), cut.a[1] + t * (cut.b[1] - cut.a[1])];
            let c = locator
                .locate(mesh, x)
                .ok_or_else(|| Error::InvalidArgument(format!("sample point ({}, {}) lies outside the mesh", x[0], x[1])))?;
            Ok(LineSample {
                s: t * len,
                x: x[0],
                y: x[1],
                value: field.eval(mesh, c, x),
            })
        })
        .collect()
}

/// Values on one edge quadrature point: weight (times length), `u.n`,
/// `p`, `p_hat` and the numerical flux `u.n + alpha (p - p_hat)`.
struct EdgePoint {
    w: f64,
    p: f64,
    p_hat: f64,
    flux: f64,
}

fn edge_points(disc: &Discretization, t: &ReferenceTables, sol: &HdgSolution, c: usize, e: usize) -> Vec<EdgePoint> {
    let n = t.dim();
    let (normal, len) = edge_normal(disc, c, e);
    let mu_table = &t.facet_values[usize::from(!edge_aligned(disc, c, e))];
    let f = disc.mesh.cell_facets[c][e];
    let alpha = disc.alpha[c];
    t.edge
        .rule
        .iter()
        .enumerate()
        .map(|(q, (_, w))| {
            let phi = &t.edge.values[e][q];
            let un = normal[0] * dot(phi, &sol.u[c][..n]) + normal[1] * dot(phi, &sol.u[c][n..]);
            let p = dot(phi, &sol.p[c]);
            let p_hat = dot(&mu_table[q], &sol.p_hat[f]);
            EdgePoint {
                w: w * len,
                p,
                p_hat,
                flux: un + alpha * (p - p_hat),
            }
        })
        .collect()
}

/// `int_{dK} u_hat.n - int_K f` per cell, with `f` integrated by the
/// assembly's cell rule.
pub fn conservation_residuals(disc: &Discretization, sol: &HdgSolution) -> Result<Vec<f64>> {
    let t = ReferenceTables::new(sol.degree)?;
    Ok((0..disc.mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let boundary: f64 = (0..3)
                .flat_map(|e| edge_points(disc, &t, sol, c, e))
                .map(|q| q.w * q.flux)
                .sum();
            let map = AffineMap::new(disc.mesh.cell_points(c));
            let source: f64 = t
                .cell
                .rule
                .iter()
                .map(|(xi, w)| w * map.det() * disc.source.eval(map.to_physical(*xi)))
                .sum();
            boundary - source
        })
        .collect())
}

/// `int u_hat.n` over the boundary facets carrying `tag` (outward positive).
pub fn boundary_flux(disc: &Discretization, sol: &HdgSolution, tag: BoundaryTag) -> Result<f64> {
    let t = ReferenceTables::new(sol.degree)?;
    let mut total = 0.0;
    for f in disc.mesh.boundary_facets() {
        if disc.mesh.boundary_tags[f] != Some(tag) {
            continue;
        }
        let c = disc.mesh.facets[f].cells.0;
        let e = disc.mesh.cell_facets[c]
            .iter()
            .position(|&g| g == f)
            .ok_or_else(|| Error::Numerical(format!("facet {f} missing from cell {c}")))?;
        total += edge_points(disc, &t, sol, c, e).iter().map(|q| q.w * q.flux).sum::<f64>();
    }
    Ok(total)
}

/// Terms of the discrete energy identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance {
    /// Nonnegative bulk and fracture form of `(u, u_tilde)`.
    pub bulk: f64,
    /// `<alpha (p - p_hat), p - p_hat>` over all cell boundaries.
    pub jump: f64,
    /// `(f, p)`.
    pub source: f64,
    /// `sum over boundary facets of int u_hat.n p_hat`.
    pub boundary: f64,
}

impl EnergyBalance {
    /// Signed defect `bulk + jump - source + boundary`.
    pub fn residual(&self) -> f64 {
        self.bulk + self.jump - self.source + self.boundary
    }
}

pub fn energy_balance(disc: &Discretization, sol: &HdgSolution) -> Result<EnergyBalance> {
    let t = ReferenceTables::new(sol.degree)?;
    let n = t.dim();
    let terms: Vec<[f64; 4]> = (0..disc.mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let map = AffineMap::new(disc.mesh.cell_points(c));
            let k_inv = 1.0 / disc.permeability[c];
            // Conductive cells measure u_tilde, all others u.
            let v = if disc.classification.class_of[c] == CellClass::Conductive { &sol.u_tilde[c] } else { &sol.u[c] };
            let mut bulk = 0.0;
            let mut source = 0.0;
            for (q, (xi, w)) in t.cell.rule.iter().enumerate() {
                let w = w * map.det();
                let phi = &t.cell.values[q];
                let vx = [dot(phi, &v[..n]), dot(phi, &v[n..])];
                bulk += w * k_inv * (vx[0] * vx[0] + vx[1] * vx[1]);
                source += w * disc.source.eval(map.to_physical(*xi)) * dot(phi, &sol.p[c]);
            }
            for cc in &disc.classification.cuts[c] {
                let fr = &disc.fractures[cc.fracture];
                let nrm = fr.normal;
                for (&[s], w) in t.cut_rule.iter() {
                    let (p0, p1) = (cc.cut.p0, cc.cut.p1);
                    let x = [p0[0] + s * (p1[0] - p0[0]), p0[1] + s * (p1[1] - p0[1])];
                    let phi = t.cell.basis.values(map.to_reference(x));
                    let vx = [dot(&phi, &v[..n]), dot(&phi, &v[n..])];
                    let vn = vx[0] * nrm[0] + vx[1] * nrm[1];
                    let w = w * cc.cut.length;
                    bulk += w * match fr.kind() {
                        FractureKind::Blocking => fr.spec.thickness / fr.spec.permeability * vn * vn,
                        FractureKind::Conductive => {
                            fr.spec.thickness * fr.spec.permeability * k_inv * k_inv
                                * (vx[0] * vx[0] + vx[1] * vx[1] - vn * vn)
                        }
                    };
                }
            }
            let mut jump = 0.0;
            let mut boundary = 0.0;
            for e in 0..3 {
                let on_boundary = disc.mesh.facets[disc.mesh.cell_facets[c][e]].is_boundary();
                for q in edge_points(disc, &t, sol, c, e) {
                    jump += q.w * disc.alpha[c] * (q.p - q.p_hat) * (q.p - q.p_hat);
                    if on_boundary {
                        boundary += q.w * q.flux * q.p_hat;
                    }
                }
            }
            [bulk, jump, source, boundary]
        })
        .collect();
    let sum = |i: usize| terms.iter().map(|t| t[i]).sum::<f64>();
    Ok(EnergyBalance {
        bulk: sum(0),
        jump: sum(1),
        source: sum(2),
        boundary: sum(3),
    })
}

/// `max(1, |f|_{L2}, largest boundary datum)`, the reference magnitude for
/// residual tolerances.
pub fn tolerance_scale(disc: &Discretization) -> Result<f64> {
    let rule = triangle_quadrature(MAX_ORDER)?;
    let mut f2 = 0.0;
    for c in 0..disc.mesh.num_cells() {
        let map = AffineMap::new(disc.mesh.cell_points(c));
        for (xi, w) in rule.iter() {
            let v = disc.source.eval(map.to_physical(*xi));
            f2 += w * map.det() * v * v;
        }
    }
    Ok(1f64.max(f2.sqrt()).max(disc.boundary.max_datum(&disc.mesh.domain)))
}

/// `|| v_h - v ||_{L2}` for a piecewise polynomial scalar field.
pub fn l2_error(mesh: &Mesh, field: &CellField, exact: impl Fn(Point) -> f64 + Sync) -> Result<f64> {
    let rule = triangle_quadrature(MAX_ORDER)?;
    let values: Vec<Vec<f64>> = rule.points.iter().map(|&xi| field.basis.values(xi)).collect();
    let sq: f64 = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let map = AffineMap::new(mesh.cell_points(c));
            rule.iter()
                .enumerate()
                .map(|(q, (xi, w))| {
                    let d = dot(&values[q], &field.coeffs[c]) - exact(map.to_physical(*xi));
                    w * map.det() * d * d
                })
                .sum::<f64>()
        })
        .sum();
    Ok(sq.sqrt())
}

/// Splits per-cell vector coefficients into their two component fields.
pub fn vector_components(coeffs: &[Vec<f64>], degree: usize) -> Result<[CellField; 2]> {
    let basis = CellBasis::new(degree)?;
    let n = basis.dim();
    let x = coeffs.iter().map(|v| v[..n].to_vec()).collect();
    let y = coeffs.iter().map(|v| v[n..].to_vec()).collect();
    Ok([
        CellField {
            basis: basis.clone(),
            coeffs: x,
        },
        CellField { basis, coeffs: y },
    ])
}

/// `|| u_h - u ||_{L2}` for a vector field given per component.
pub fn l2_error_vector(
    mesh: &Mesh,
    coeffs: &[Vec<f64>],
    degree: usize,
    exact: impl Fn(Point) -> [f64; 2] + Sync,
) -> Result<f64> {
    let [fx, fy] = vector_components(coeffs, degree)?;
    let ex = l2_error(mesh, &fx, |x| exact(x)[0])?;
    let ey = l2_error(mesh, &fy, |x| exact(x)[1])?;
    Ok(ex.hypot(ey))
}

/// Euclidean norms of the coefficient vectors of `u`, `u_tilde`, `p`, `p_hat`.
pub fn coefficient_norms(sol: &HdgSolution) -> [f64; 4] {
    let norm = |v: &[Vec<f64>]| v.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    [norm(&sol.u), norm(&sol.u_tilde), norm(&sol.p), norm(&sol.p_hat)]
}

/// Magnitude of `u` at each cell centroid.
pub fn velocity_magnitude_at_centroids(mesh: &Mesh, sol: &HdgSolution) -> Result<Vec<f64>> {
    let basis = CellBasis::new(sol.degree)?;
    let phi = basis.values([1.0 / 3.0, 1.0 / 3.0]);
    let n = basis.dim();
    Ok((0..mesh.num_cells())
        .map(|c| dot(&phi, &sol.u[c][..n]).hypot(dot(&phi, &sol.u[c][n..])))
        .collect())
}
