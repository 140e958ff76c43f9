//! Local HDG systems, static condensation and the global trace system.

pub mod local;
pub mod penalty;

pub use local::{build_local, condense, edge_aligned, edge_normal, Condensed, LocalSystem, Recovery, ReferenceTables};
pub use penalty::{stabilization, PenaltyParams};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::femcore::{segment_quadrature, FacetBasis, MAX_ORDER};
use crate::linsolve::{solve_spd, CgOptions, SolveReport, SparseSym};
use crate::problem::Discretization;
use crate::scenario::{BoundaryCondition, Field};

/// How the trace on one facet is determined.
#[derive(Debug, Clone, PartialEq)]
pub enum FacetDofs {
    /// Index of the first global unknown; the facet owns `k + 1` of them.
    Free(usize),
    /// Coefficients of the projected Dirichlet datum.
    Dirichlet(Vec<f64>),
}

/// The condensed global trace system together with the per-cell data needed
/// to recover the cell unknowns.
#[derive(Debug, Clone)]
pub struct CondensedSystem {
    pub degree: usize,
    pub matrix: SparseSym,
    pub rhs: Vec<f64>,
    pub facets: Vec<FacetDofs>,
    pub recovery: Vec<Recovery>,
    pub num_dirichlet_facets: usize,
}

/// Cell and facet coefficients of a discrete solution.
#[derive(Debug, Clone)]
pub struct HdgSolution {
    pub degree: usize,
    /// Per cell: x-components then y-components.
    pub u: Vec<Vec<f64>>,
    pub u_tilde: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    /// Per facet, in facet parametrization.
    pub p_hat: Vec<Vec<f64>>,
}

/// L2 projection of `g` onto `P_k` on the segment `a -> b`.
pub fn project_on_facet(g: &Field, a: [f64; 2], b: [f64; 2], basis: &FacetBasis) -> Result<Vec<f64>> {
    let n = basis.dim();
    let rule = segment_quadrature(MAX_ORDER)?;
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut r = DVector::<f64>::zeros(n);
    for (&[s], w) in rule.iter() {
        let mu = basis.values(s);
        let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
        let gx = g.eval(x);
        for i in 0..n {
            r[i] += w * gx * mu[i];
            for j in 0..n {
                m[(i, j)] += w * mu[i] * mu[j];
            }
        }
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Numerical("facet mass matrix is not positive definite".into()))?;
    Ok(chol.solve(&r).iter().copied().collect())
}

fn trace_numbering(disc: &Discretization, basis: &FacetBasis) -> Result<(Vec<FacetDofs>, usize, usize)> {
    let nf = basis.dim();
    let mut facets = Vec::with_capacity(disc.mesh.num_facets());
    let mut next = 0;
    let mut dirichlet = 0;
    for (f, facet) in disc.mesh.facets.iter().enumerate() {
        let bc = if facet.is_boundary() {
            let tag = disc.mesh.boundary_tags[f]
                .ok_or_else(|| Error::Config(format!("boundary facet {f} has no boundary tag")))?;
            Some(*disc.boundary.get(tag))
        } else {
            None
        };
        match bc {
            Some(BoundaryCondition::Dirichlet(g)) => {
                let [a, b] = facet.vertices.map(|v| disc.mesh.vertices[v]);
                facets.push(FacetDofs::Dirichlet(project_on_facet(&g, a, b, basis)?));
                dirichlet += 1;
            }
            _ => {
                facets.push(FacetDofs::Free(next));
                next += nf;
            }
        }
    }
    Ok((facets, next, dirichlet))
}

/// Builds and condenses every cell and assembles the global trace system.
pub fn assemble(disc: &Discretization) -> Result<CondensedSystem> {
    let tables = ReferenceTables::new(disc.degree)?;
    let nf = tables.facet_dim();
    let (facets, ndofs, num_dirichlet) = trace_numbering(disc, &tables.facet)?;
    if num_dirichlet == 0 {
        return Err(Error::Numerical(
            "no Dirichlet boundary: the trace system is singular (pressure defined up to a constant)".into(),
        ));
    }

    let condensed: Vec<Condensed> = (0..disc.mesh.num_cells())
        .into_par_iter()
        .map(|c| build_local(disc, &tables, c).and_then(|l| condense(&l)))
        .collect::<Result<_>>()?;

    let mut rhs = vec![0.0; ndofs];
    let mut triplets = Vec::with_capacity(condensed.len() * 9 * nf * nf);
    for (c, cond) in condensed.iter().enumerate() {
        let local_facets = disc.mesh.cell_facets[c];
        for ei in 0..3 {
            for i in 0..nf {
                let li = ei * nf + i;
                let FacetDofs::Free(gi) = facets[local_facets[ei]] else {
                    continue;
                };
                let gi = gi + i;
                rhs[gi] += cond.rhs[li];
                for ej in 0..3 {
                    match &facets[local_facets[ej]] {
                        FacetDofs::Free(gj) => {
                            for j in 0..nf {
                                triplets.push((gi, gj + j, cond.schur[(li, ej * nf + j)]));
                            }
                        }
                        FacetDofs::Dirichlet(vals) => {
                            for (j, v) in vals.iter().enumerate() {
                                rhs[gi] -= cond.schur[(li, ej * nf + j)] * v;
                            }
                        }
                    }
                }
            }
        }
    }

    // Neumann data enters as -<g, mu>.
    let rule = segment_quadrature(2 * disc.degree + 1)?;
    for f in disc.mesh.boundary_facets() {
        let FacetDofs::Free(g0) = facets[f] else { continue };
        let Some(tag) = disc.mesh.boundary_tags[f] else { continue };
        if let BoundaryCondition::Neumann(g) = disc.boundary.get(tag) {
            let len = disc.mesh.facet_length(f);
            for (&[s], w) in rule.iter() {
                let mu = tables.facet.values(s);
                for j in 0..nf {
                    rhs[g0 + j] -= w * len * g * mu[j];
                }
            }
        }
    }

    let matrix = SparseSym::from_triplets(ndofs, &triplets)?;
    Ok(CondensedSystem {
        degree: disc.degree,
        matrix,
        rhs,
        facets,
        recovery: condensed.into_iter().map(|c| c.recovery).collect(),
        num_dirichlet_facets: num_dirichlet,
    })
}

impl CondensedSystem {
    pub fn num_dofs(&self) -> usize {
        self.matrix.dim()
    }

    pub fn solve(&self, opts: CgOptions) -> Result<SolveReport> {
        solve_spd(&self.matrix, &self.rhs, opts)
    }

    /// Trace coefficients on every facet, Dirichlet ones included.
    pub fn facet_values(&self, free: &[f64]) -> Vec<Vec<f64>> {
        let nf = self.degree + 1;
        self.facets
            .iter()
            .map(|d| match d {
                FacetDofs::Free(g) => free[*g..*g + nf].to_vec(),
                FacetDofs::Dirichlet(v) => v.clone(),
            })
            .collect()
    }

    /// Recovers the cell unknowns from a solution of the trace system.
    pub fn recover(&self, disc: &Discretization, free: &[f64]) -> Result<HdgSolution> {
        if free.len() != self.num_dofs() {
            return Err(Error::InvalidArgument(format!(
                "trace vector has length {}, expected {}",
                free.len(),
                self.num_dofs()
            )));
        }
        let p_hat = self.facet_values(free);
        let nf = self.degree + 1;
        let n = crate::femcore::cell_dim(self.degree);
        let cells: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..disc.mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let mut trace = DVector::<f64>::zeros(3 * nf);
                for (e, &f) in disc.mesh.cell_facets[c].iter().enumerate() {
                    trace.rows_mut(e * nf, nf).copy_from_slice(&p_hat[f]);
                }
                let x = self.recovery[c].apply(&trace);
                let x = x.as_slice();
                (x[..2 * n].to_vec(), x[2 * n..4 * n].to_vec(), x[4 * n..].to_vec())
            })
            .collect();
        let mut sol = HdgSolution {
            degree: self.degree,
            u: Vec::with_capacity(cells.len()),
            u_tilde: Vec::with_capacity(cells.len()),
            p: Vec::with_capacity(cells.len()),
            p_hat,
        };
        for (u, ut, p) in cells {
            sol.u.push(u);
            sol.u_tilde.push(ut);
            sol.p.push(p);
        }
        Ok(sol)
    }
}

/// Assembles, solves and recovers in one go.
pub fn solve_problem(disc: &Discretization, opts: CgOptions) -> Result<(CondensedSystem, SolveReport, HdgSolution)> {
    let system = assemble(disc).map_err(|e| e.context("assembly"))?;
    let report = system.solve(opts).map_err(|e| e.context("linear solve"))?;
    let sol = system.recover(disc, &report.x)?;
    Ok((system, report, sol))
}
