//! Element-local HDG blocks and their static condensation.
//!
//! Cell unknowns are ordered `(u, u_tilde, p)`; each vector field stores its
//! x-components first, then its y-components. Facet unknowns are ordered by
//! local edge, then by facet basis function in the global facet's own
//! parametrization.
//!
//! With `x = (u, u_tilde, p)` and facet trace `l`, the three local equations
//! read `A x + B l = F` and the cell's contribution to the facet equation is
//! `C x - H l`:
//!
//! ```text
//!        u          u_tilde        p           l
//! v~ [ M + Pb     -(M + Pc)        0    |      0  ]
//! v  [   0            M           -D    |      E  ]
//! q  [   D^T          0            S    |     -G  ]
//! mu [   E^T          0           G^T   |     -H  ]
//! ```
//!
//! `M` is the `K^-1`-weighted vector mass matrix, `Pb`/`Pc` the blocking and
//! conductive fracture surface forms, `D_ij = (q_j, div v_i)`,
//! `E = <mu, v.n>`, `G = <alpha mu, q>`, `S = <alpha p, q>` and
//! `H = <alpha l, mu>`. The row for `q` uses `-(u, grad q) + <u.n, q> =
//! (div u, q)`, which is exact for polynomial `u`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::femcore::{AffineMap, CellTable, EdgeTable, FacetBasis, SegmentRule, segment_quadrature};
use crate::geometry::{CellClass, FractureKind};
use crate::problem::Discretization;

/// Basis and quadrature tables for one polynomial degree.
#[derive(Debug, Clone)]
pub struct ReferenceTables {
    pub degree: usize,
    pub cell: CellTable,
    pub edge: EdgeTable,
    pub facet: FacetBasis,
    /// Facet basis at the edge quadrature points, in edge direction and
    /// reversed.
    pub facet_values: [Vec<Vec<f64>>; 2],
    pub cut_rule: SegmentRule,
}

impl ReferenceTables {
    pub fn new(degree: usize) -> Result<Self> {
        let cell = CellTable::new(degree, 2 * degree + 2)?;
        let edge = EdgeTable::new(&cell.basis, 2 * degree + 1)?;
        let facet = FacetBasis::new(degree)?;
        let forward = edge.rule.points.iter().map(|&[s]| facet.values(s)).collect();
        let backward = edge.rule.points.iter().map(|&[s]| facet.values(1.0 - s)).collect();
        Ok(ReferenceTables {
            degree,
            cell,
            edge,
            facet,
            facet_values: [forward, backward],
            cut_rule: segment_quadrature(2 * degree + 1)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.cell.basis.dim()
    }

    pub fn facet_dim(&self) -> usize {
        self.facet.dim()
    }
}

/// Whether local edge `e` of `cell` runs in the same direction as its facet.
pub fn edge_aligned(disc: &Discretization, cell: usize, e: usize) -> bool {
    let verts = disc.mesh.cells[cell];
    let f = disc.mesh.cell_facets[cell][e];
    disc.mesh.facets[f].vertices == [verts[e], verts[(e + 1) % 3]]
}

/// Outward unit normal and length of local edge `e`.
pub fn edge_normal(disc: &Discretization, cell: usize, e: usize) -> ([f64; 2], f64) {
    let pts = disc.mesh.cell_points(cell);
    let (a, b) = (pts[e], pts[(e + 1) % 3]);
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len = dx.hypot(dy);
    ([dy / len, -dx / len], len)
}

#[derive(Debug, Clone)]
pub struct LocalSystem {
    pub cell: usize,
    /// Scalar basis dimension.
    pub dim: usize,
    /// Facet basis dimension.
    pub facet_dim: usize,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    /// `K^-1` vector mass matrix.
    pub mass: DMatrix<f64>,
    /// Blocking fracture form on `(u, v~)`.
    pub phi_b: DMatrix<f64>,
    /// Conductive fracture form on `(u~, v~)`.
    pub phi_c: DMatrix<f64>,
}

impl LocalSystem {
    pub fn vector_dim(&self) -> usize {
        2 * self.dim
    }

    pub fn num_cell_unknowns(&self) -> usize {
        5 * self.dim
    }

    pub fn num_trace_unknowns(&self) -> usize {
        3 * self.facet_dim
    }

    /// Residual of the three local equations `A x + B l - F`.
    pub fn residual(&self, x: &DVector<f64>, trace: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * trace - &self.f
    }
}

pub fn build_local(disc: &Discretization, tables: &ReferenceTables, cell: usize) -> Result<LocalSystem> {
    let k_m = disc.permeability[cell];
    let alpha = disc.alpha[cell];
    if !(k_m > 0.0 && k_m.is_finite()) {
        return Err(Error::Numerical(format!(
            "cell {cell}: matrix permeability {k_m} makes the local block singular"
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Numerical(format!("cell {cell}: stabilization {alpha} is not positive")));
    }
    let n = tables.dim();
    let nv = 2 * n;
    let nf = tables.facet_dim();
    let nl = 3 * nf;
    let map = AffineMap::new(disc.mesh.cell_points(cell));
    let det = map.det();

    let mut scalar_mass = DMatrix::<f64>::zeros(n, n);
    let mut div = DMatrix::<f64>::zeros(nv, n);
    let mut load = DVector::<f64>::zeros(n);
    let ct = &tables.cell;
    for (q, (xi, w)) in ct.rule.iter().enumerate() {
        let w = w * det;
        let phi = &ct.values[q];
        let grads: Vec<[f64; 2]> = ct.ref_grads[q].iter().map(|&g| map.grad(g)).collect();
        let fx = disc.source.eval(map.to_physical(*xi));
        for a in 0..n {
            load[a] += w * fx * phi[a];
            for b in 0..n {
                scalar_mass[(a, b)] += w * phi[a] * phi[b];
                div[(a, b)] += w * phi[b] * grads[a][0];
                div[(n + a, b)] += w * phi[b] * grads[a][1];
            }
        }
    }
    let mut mass = DMatrix::<f64>::zeros(nv, nv);
    for d in 0..2 {
        mass.view_mut((d * n, d * n), (n, n))
            .copy_from(&(&scalar_mass / k_m));
    }

    let mut e_mat = DMatrix::<f64>::zeros(nv, nl);
    let mut g_mat = DMatrix::<f64>::zeros(n, nl);
    let mut s_mat = DMatrix::<f64>::zeros(n, n);
    let mut h_mat = DMatrix::<f64>::zeros(nl, nl);
    let et = &tables.edge;
    for e in 0..3 {
        let (normal, len) = edge_normal(disc, cell, e);
        let mu_table = &tables.facet_values[usize::from(!edge_aligned(disc, cell, e))];
        for (q, (_, w)) in et.rule.iter().enumerate() {
            let w = w * len;
            let phi = &et.values[e][q];
            let mu = &mu_table[q];
            for j in 0..nf {
                let col = e * nf + j;
                for a in 0..n {
                    e_mat[(a, col)] += w * mu[j] * phi[a] * normal[0];
                    e_mat[(n + a, col)] += w * mu[j] * phi[a] * normal[1];
                    g_mat[(a, col)] += alpha * w * phi[a] * mu[j];
                }
                for i in 0..nf {
                    h_mat[(e * nf + i, col)] += alpha * w * mu[i] * mu[j];
                }
            }
            for a in 0..n {
                for b in 0..n {
                    s_mat[(a, b)] += alpha * w * phi[a] * phi[b];
                }
            }
        }
    }

    let mut phi_b = DMatrix::<f64>::zeros(nv, nv);
    let mut phi_c = DMatrix::<f64>::zeros(nv, nv);
    let class = disc.classification.class_of[cell];
    for cc in &disc.classification.cuts[cell] {
        let fr = &disc.fractures[cc.fracture];
        let nrm = fr.normal;
        // Tensor weighting the cell-basis product for the two velocity
        // components.
        let (target, tensor) = match fr.kind() {
            FractureKind::Blocking => {
                let coef = fr.spec.thickness / fr.spec.permeability;
                (&mut phi_b, [[coef * nrm[0] * nrm[0], coef * nrm[0] * nrm[1]], [coef * nrm[1] * nrm[0], coef * nrm[1] * nrm[1]]])
            }
            FractureKind::Conductive => {
                let coef = fr.spec.thickness * fr.spec.permeability / (k_m * k_m);
                (
                    &mut phi_c,
                    [
                        [coef * (1.0 - nrm[0] * nrm[0]), -coef * nrm[0] * nrm[1]],
                        [-coef * nrm[1] * nrm[0], coef * (1.0 - nrm[1] * nrm[1])],
                    ],
                )
            }
        };
        let (p0, p1) = (cc.cut.p0, cc.cut.p1);
        for (&[s], w) in tables.cut_rule.iter() {
            let w = w * cc.cut.length;
            let x = [p0[0] + s * (p1[0] - p0[0]), p0[1] + s * (p1[1] - p0[1])];
            let phi = ct.basis.values(map.to_reference(x));
            for (c1, row) in tensor.iter().enumerate() {
                for (c2, &t) in row.iter().enumerate() {
                    if t == 0.0 {
                        continue;
                    }
                    for a in 0..n {
                        for b in 0..n {
                            target[(c1 * n + a, c2 * n + b)] += w * t * phi[a] * phi[b];
                        }
                    }
                }
            }
        }
    }
    debug_assert!(class != CellClass::Regular || disc.classification.cuts[cell].is_empty());

    let nx = 5 * n;
    let (iu, it, ip) = (0, nv, 2 * nv);
    let mut a = DMatrix::<f64>::zeros(nx, nx);
    a.view_mut((iu, iu), (nv, nv)).copy_from(&(&mass + &phi_b));
    a.view_mut((iu, it), (nv, nv)).copy_from(&(-(&mass + &phi_c)));
    a.view_mut((it, it), (nv, nv)).copy_from(&mass);
    a.view_mut((it, ip), (nv, n)).copy_from(&(-&div));
    a.view_mut((ip, iu), (n, nv)).copy_from(&div.transpose());
    a.view_mut((ip, ip), (n, n)).copy_from(&s_mat);

    let mut b = DMatrix::<f64>::zeros(nx, nl);
    b.view_mut((it, 0), (nv, nl)).copy_from(&e_mat);
    b.view_mut((ip, 0), (n, nl)).copy_from(&(-&g_mat));

    let mut c = DMatrix::<f64>::zeros(nl, nx);
    c.view_mut((0, iu), (nl, nv)).copy_from(&e_mat.transpose());
    c.view_mut((0, ip), (nl, n)).copy_from(&g_mat.transpose());

    let mut f = DVector::<f64>::zeros(nx);
    f.rows_mut(ip, n).copy_from(&load);

    Ok(LocalSystem {
        cell,
        dim: n,
        facet_dim: nf,
        a,
        b,
        c,
        h: h_mat,
        f,
        mass,
        phi_b,
        phi_c,
    })
}

/// Expresses the cell unknowns through the trace: `x = x0 - R l`.
#[derive(Debug, Clone)]
pub struct Recovery {
    pub r: DMatrix<f64>,
    pub x0: DVector<f64>,
}

impl Recovery {
    pub fn apply(&self, trace: &DVector<f64>) -> DVector<f64> {
        &self.x0 - &self.r * trace
    }
}

#[derive(Debug, Clone)]
pub struct Condensed {
    /// `H + C A^-1 B`
    pub schur: DMatrix<f64>,
    /// `C A^-1 F`
    pub rhs: DVector<f64>,
    pub recovery: Recovery,
}

pub fn condense(local: &LocalSystem) -> Result<Condensed> {
    let lu = local.a.clone().lu();
    let singular = || Error::Numerical(format!("cell {}: local (u, u~, p) block is singular", local.cell));
    let r = lu.solve(&local.b).ok_or_else(singular)?;
    let x0 = lu.solve(&local.f).ok_or_else(singular)?;
    if r.iter().chain(x0.iter()).any(|v| !v.is_finite()) {
        return Err(singular());
    }
    let schur = &local.h + &local.c * &r;
    let rhs = &local.c * &x0;
    Ok(Condensed {
        schur,
        rhs,
        recovery: Recovery { r, x0 },
    })
}
