//! End-to-end scenario runs, output emission and the convergence study.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::assembly::{assemble, HdgSolution};
use crate::error::{Error, Result};
use crate::geometry::CellClass;
use crate::linsolve::{is_spd_dense, CgOptions, SolveReport};
use crate::mesh::BoundaryTag;
use crate::output::{write_conservation, write_cuts, write_file, write_line_cut, write_vtk, CellData, Report};
use crate::postprocess::{
    boundary_flux, coefficient_norms, conservation_residuals, energy_balance, l2_error, l2_error_vector,
    postprocess_pressure, pressure_field, sample_line, tolerance_scale, velocity_magnitude_at_centroids, CellField,
    EnergyBalance, LineSample,
};
use crate::problem::Discretization;
use crate::scenario::{builtin_manufactured, OutputKind, Scenario};

/// Largest system for which positive definiteness is confirmed by a dense
/// factorization in addition to the CG run.
pub const DENSE_SPD_CHECK_LIMIT: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub num_cells: usize,
    pub num_facets: usize,
    pub num_dofs: usize,
    pub nnz: usize,
    pub class_counts: [usize; 3],
    pub iterations: usize,
    pub solve_residual: f64,
    pub energy: EnergyBalance,
    pub conservation: Vec<f64>,
    /// Outward `int u_hat.n` per side in [`BoundaryTag::ALL`] order.
    pub fluxes: [f64; 4],
    pub scale: f64,
    pub spd_verified: bool,
    pub solution_norm: f64,
    pub assembly_seconds: f64,
    pub solve_seconds: f64,
    pub total_seconds: f64,
}

impl Diagnostics {
    pub fn energy_residual(&self) -> f64 {
        self.energy.residual()
    }

    pub fn max_conservation(&self) -> f64 {
        self.conservation.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn flux(&self, tag: BoundaryTag) -> f64 {
        self.fluxes[BoundaryTag::ALL.iter().position(|&t| t == tag).unwrap_or(0)]
    }

    /// Inflow through the left side.
    pub fn inflow(&self) -> f64 {
        -self.flux(BoundaryTag::Left)
    }

    pub fn report(&self, scenario: &Scenario) -> Report {
        let mut r = Report::default();
        r.push("scenario", &scenario.name);
        r.push("degree", scenario.degree);
        r.push("cells", self.num_cells);
        r.push("facets", self.num_facets);
        r.push("regular_cells", self.class_counts[0]);
        r.push("blocking_cells", self.class_counts[1]);
        r.push("conductive_cells", self.class_counts[2]);
        r.push("trace_dofs", self.num_dofs);
        r.push("matrix_nonzeros", self.nnz);
        r.push("solve_iterations", self.iterations);
        r.push_float("solve_relative_residual", self.solve_residual);
        r.push("spd_verified", self.spd_verified);
        r.push_float("tolerance_scale", self.scale);
        r.push_float("energy_residual", self.energy_residual());
        r.push_float("max_conservation_residual", self.max_conservation());
        for (tag, f) in BoundaryTag::ALL.iter().zip(self.fluxes) {
            r.push_float(format!("flux_{}", tag.name()), f);
        }
        r.push_float("solution_norm", self.solution_norm);
        r.push_float("assembly_seconds", self.assembly_seconds);
        r.push_float("solve_seconds", self.solve_seconds);
        r.push_float("wall_seconds", self.total_seconds);
        r
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub disc: Discretization,
    pub solve: SolveReport,
    pub solution: HdgSolution,
    pub p_star: CellField,
    pub line_cuts: Vec<Vec<LineSample>>,
    pub diagnostics: Diagnostics,
}

/// Runs the full pipeline on `scenario`. Errors carry the scenario name and
/// the failing stage.
pub fn run_scenario(scenario: &Scenario, cg: CgOptions) -> Result<RunResult> {
    run_inner(scenario, cg).map_err(|e| e.context(format!("scenario '{}'", scenario.name)))
}

fn run_inner(scenario: &Scenario, cg: CgOptions) -> Result<RunResult> {
    let start = Instant::now();
    scenario.validate()?;
    let disc = Discretization::from_scenario(scenario)?;
    let t0 = Instant::now();
    let system = assemble(&disc).map_err(|e| e.context("assembly"))?;
    let assembly_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let solve = system.solve(cg).map_err(|e| e.context("linear solve"))?;
    let solve_seconds = t1.elapsed().as_secs_f64();
    let solution = system.recover(&disc, &solve.x).map_err(|e| e.context("recovery"))?;
    let p_star = postprocess_pressure(&disc, &solution).map_err(|e| e.context("postprocessing"))?;

    let matrix = &system.matrix;
    let symmetric = matrix.symmetry_defect() <= 1e-12 * matrix.max_abs().max(f64::MIN_POSITIVE);
    let spd_verified = symmetric && (matrix.dim() > DENSE_SPD_CHECK_LIMIT || is_spd_dense(matrix));

    let line_cuts = scenario
        .line_cuts
        .iter()
        .map(|cut| sample_line(&disc.mesh, &p_star, cut))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.context("line sampling"))?;

    let mut fluxes = [0.0; 4];
    for (f, &tag) in fluxes.iter_mut().zip(BoundaryTag::ALL.iter()) {
        *f = boundary_flux(&disc, &solution, tag)?;
    }
    let norms = coefficient_norms(&solution);
    let diagnostics = Diagnostics {
        num_cells: disc.mesh.num_cells(),
        num_facets: disc.mesh.num_facets(),
        num_dofs: matrix.dim(),
        nnz: matrix.nnz(),
        class_counts: [CellClass::Regular, CellClass::Blocking, CellClass::Conductive]
            .map(|c| disc.classification.count(c)),
        iterations: solve.iterations,
        solve_residual: solve.residual,
        energy: energy_balance(&disc, &solution)?,
        conservation: conservation_residuals(&disc, &solution)?,
        fluxes,
        scale: tolerance_scale(&disc)?,
        spd_verified,
        solution_norm: norms.iter().fold(0.0, |m, v| m.max(*v)),
        assembly_seconds,
        solve_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(RunResult {
        disc,
        solve,
        solution,
        p_star,
        line_cuts,
        diagnostics,
    })
}

/// Writes the artifacts requested by `scenario.outputs` into `dir` and
/// returns their paths.
pub fn write_outputs(scenario: &Scenario, run: &RunResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::from(e).context(format!("creating {}", dir.display())))?;
    let mut written = Vec::new();
    let name = &scenario.name;
    let mut emit = |file: String, f: &dyn Fn(&mut std::io::BufWriter<std::fs::File>) -> Result<()>| -> Result<()> {
        let path = dir.join(file);
        write_file(&path, |w| f(w)).map_err(|e| e.context(format!("writing {}", path.display())))?;
        written.push(path);
        Ok(())
    };
    let mesh = &run.disc.mesh;
    let classes: Vec<i32> = run.disc.classification.class_of.iter().map(|c| c.code()).collect();
    for kind in &scenario.outputs {
        match kind {
            OutputKind::LineCuts => {
                for (i, samples) in run.line_cuts.iter().enumerate() {
                    emit(format!("{name}_linecut_{i}.csv"), &|w| write_line_cut(w, samples))?;
                }
            }
            OutputKind::FieldVtk => {
                let p_star: Vec<f64> = (0..mesh.num_cells())
                    .map(|c| run.p_star.eval(mesh, c, mesh.centroid(c)))
                    .collect();
                let u_mag = velocity_magnitude_at_centroids(mesh, &run.solution)?;
                emit(format!("{name}_fields.vtk"), &|w| {
                    write_vtk(
                        w,
                        name,
                        mesh,
                        &[
                            CellData::Float("p_star", &p_star),
                            CellData::Int("class", &classes),
                            CellData::Float("u_mag", &u_mag),
                        ],
                    )
                })?;
            }
            OutputKind::MeshVtk => {
                emit(format!("{name}_mesh.vtk"), &|w| write_vtk(w, name, mesh, &[CellData::Int("class", &classes)]))?;
            }
            OutputKind::Diagnostics => {
                let report = run.diagnostics.report(scenario);
                emit(format!("{name}_diagnostics.txt"), &|w| report.write(w))?;
            }
            OutputKind::Conservation => {
                emit(format!("{name}_conservation.csv"), &|w| {
                    write_conservation(w, &run.diagnostics.conservation)
                })?;
            }
            OutputKind::Cuts => {
                emit(format!("{name}_cuts.csv"), &|w| write_cuts(w, &run.disc.classification))?;
            }
        }
    }
    Ok(written)
}

/// Exact solution of the manufactured problem.
pub fn manufactured_pressure(x: [f64; 2]) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).sin()
}

/// `-grad p` for [`manufactured_pressure`] with unit permeability.
pub fn manufactured_velocity(x: [f64; 2]) -> [f64; 2] {
    [
        -PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
        -PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub dofs: usize,
    pub err_p: f64,
    pub err_u: f64,
    pub err_p_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub degree: usize,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Observed orders between consecutive rows for `(p, u, p*)`.
    pub fn orders(&self) -> Vec<[f64; 3]> {
        self.rows
            .windows(2)
            .map(|w| {
                let r = (w[0].h / w[1].h).ln();
                [
                    (w[0].err_p / w[1].err_p).ln() / r,
                    (w[0].err_u / w[1].err_u).ln() / r,
                    (w[0].err_p_star / w[1].err_p_star).ln() / r,
                ]
            })
            .collect()
    }

    /// Orders from the last two meshes.
    pub fn final_orders(&self) -> Option<[f64; 3]> {
        self.orders().last().copied()
    }

    pub fn write(&self, w: &mut impl std::io::Write) -> Result<()> {
        writeln!(w, "n,h,dofs,err_p,err_u,err_p_star,order_p,order_u,order_p_star")?;
        let orders = self.orders();
        for (i, r) in self.rows.iter().enumerate() {
            let o = if i == 0 {
                [String::new(), String::new(), String::new()]
            } else {
                orders[i - 1].map(|v| format!("{v:.4}"))
            };
            writeln!(
                w,
                "{},{},{},{:e},{:e},{:e},{},{},{}",
                r.n, r.h, r.dofs, r.err_p, r.err_u, r.err_p_star, o[0], o[1], o[2]
            )?;
        }
        Ok(())
    }
}

/// Fracture-free manufactured problem on `n x n` meshes for each `n`.
pub fn convergence_study(degree: usize, sizes: &[usize], cg: CgOptions) -> Result<ConvergenceTable> {
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let scenario = builtin_manufactured(n, degree);
        let run = run_scenario(&scenario, cg)?;
        let mesh = &run.disc.mesh;
        rows.push(ConvergenceRow {
            n,
            h: mesh.max_diameter(),
            dofs: run.diagnostics.num_dofs,
            err_p: l2_error(mesh, &pressure_field(&run.solution)?, manufactured_pressure)?,
            err_u: l2_error_vector(mesh, &run.solution.u, degree, manufactured_velocity)?,
            err_p_star: l2_error(mesh, &run.p_star, manufactured_pressure)?,
        });
    }
    Ok(ConvergenceTable { degree, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{builtin_example1, Example1Variant};

    #[test]
    fn cross_benchmark_runs_and_writes_outputs() {
        let mut s = builtin_example1(Example1Variant::Conductive);
        s.mesh.refine_steps = 1;
        s.outputs.extend([OutputKind::Conservation, OutputKind::MeshVtk, OutputKind::Cuts]);
        let run = run_scenario(&s, CgOptions::default()).unwrap();
        assert!(run.diagnostics.spd_verified);
        assert_eq!(run.line_cuts[0].len(), 200);
        let dir = tempfile::tempdir().unwrap();
        let files = write_outputs(&s, &run, dir.path()).unwrap();
        assert_eq!(files.len(), 6);
        let report = Report::parse(&std::fs::read_to_string(dir.path().join("example1a_diagnostics.txt")).unwrap());
        assert_eq!(report.get("scenario"), Some("example1a"));
        assert!(report.get("energy_residual").is_some());
    }

    #[test]
    fn convergence_table_orders() {
        let t = convergence_study(1, &[4, 8], CgOptions::default()).unwrap();
        let o = t.final_orders().unwrap();
        assert!(o[1] > 1.5 && o[2] > 2.5, "{o:?}");
    }
}
