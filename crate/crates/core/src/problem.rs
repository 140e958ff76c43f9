use crate::assembly::{stabilization, PenaltyParams};
use crate::error::{Error, Result};
use crate::geometry::{classify_cells, discretize_all, refine_near_fractures, CellClassification, DiscreteFracture, FractureSpec};
use crate::mesh::{build_uniform_triangulation, perturb_vertices, Mesh};
use crate::scenario::{BoundarySpec, Field, Permeability, Scenario};

/// Everything the assembly needs about one discrete problem: the mesh, the
/// realized fractures and their classification, and per-cell coefficients.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub fractures: Vec<DiscreteFracture>,
    pub classification: CellClassification,
    pub degree: usize,
    pub penalties: PenaltyParams,
    /// Matrix permeability per cell.
    pub permeability: Vec<f64>,
    /// Stabilization per cell.
    pub alpha: Vec<f64>,
    pub boundary: BoundarySpec,
    pub source: Field,
}

impl Discretization {
    pub fn new(
        mesh: Mesh,
        fractures: &[FractureSpec],
        permeability: &Permeability,
        boundary: BoundarySpec,
        source: Field,
        penalties: PenaltyParams,
        degree: usize,
    ) -> Result<Self> {
        if degree > 2 {
            return Err(Error::InvalidArgument(format!("degree must be 0, 1 or 2, got {degree}")));
        }
        penalties.validate()?;
        let fractures = discretize_all(fractures, &mesh)?;
        let classification = classify_cells(&mesh, &fractures);
        let permeability: Vec<f64> = (0..mesh.num_cells()).map(|c| permeability.at(mesh.centroid(c))).collect();
        let alpha = (0..mesh.num_cells())
            .map(|c| {
                stabilization(
                    mesh.cell_diameters[c],
                    classification.class_of[c],
                    &penalties,
                    permeability[c],
                )
            })
            .collect();
        Ok(Discretization {
            mesh,
            fractures,
            classification,
            degree,
            penalties,
            permeability,
            alpha,
            boundary,
            source,
        })
    }

    /// Builds the background mesh, refines it near the fractures and
    /// classifies the result.
    pub fn from_scenario(s: &Scenario) -> Result<Self> {
        let mesh = build_uniform_triangulation(s.mesh.nx, s.mesh.ny, s.domain)
            .and_then(|m| perturb_vertices(&m, s.mesh.perturbation, s.mesh.seed))
            .map_err(|e| e.context("mesh"))?;
        let mesh = refine_near_fractures(&mesh, &s.fractures, s.mesh.refine_steps).map_err(|e| e.context("refinement"))?;
        Discretization::new(
            mesh,
            &s.fractures,
            &s.matrix_permeability,
            s.boundary,
            s.source,
            s.penalties,
            s.degree,
        )
        .map_err(|e| e.context("geometry"))
    }
}
