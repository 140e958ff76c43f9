//! Unfitted hybridizable discontinuous Galerkin solver for Darcy flow in
//! fractured porous media, with fractures modelled as Dirac-delta
//! permeability perturbations on a background triangulation.

pub mod assembly;
pub mod error;
pub mod femcore;
pub mod geometry;
pub mod linsolve;
pub mod mesh;
pub mod output;
pub mod pipeline;
pub mod postprocess;
pub mod problem;
pub mod scenario;

pub use assembly::{assemble, solve_problem, CondensedSystem, HdgSolution, PenaltyParams};
pub use error::{Error, Result};
pub use geometry::{CellClass, FractureKind, FractureSpec};
pub use linsolve::{CgOptions, SolveReport, SparseSym};
pub use mesh::{BoundaryTag, Mesh, Point, Rect};
pub use problem::Discretization;
pub use scenario::{BoundaryCondition, BoundarySpec, Field, Scenario};
pub use pipeline::{convergence_study, run_scenario, write_outputs, Diagnostics, RunResult};
pub use postprocess::CellField;
