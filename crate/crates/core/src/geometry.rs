//! Piecewise-linear level-set fractures and cell classification.
//!
//! A fracture segment `[a, b]` is represented on the mesh by the nodal
//! interpolant of its line's signed distance `phi` and by two clipping level
//! sets `psi` whose negative parts bound the segment. Inside a cell all three
//! are affine, so the discrete fracture restricted to a cell is a single
//! line segment or empty.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{bisect, Mesh, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FractureKind {
    Blocking,
    Conductive,
}

/// A physical fracture segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractureSpec {
    pub a: Point,
    pub b: Point,
    pub thickness: f64,
    pub permeability: f64,
    pub kind: FractureKind,
}

impl FractureSpec {
    pub fn new(a: Point, b: Point, thickness: f64, permeability: f64, kind: FractureKind) -> Self {
        FractureSpec {
            a,
            b,
            thickness,
            permeability,
            kind,
        }
    }

    pub fn length(&self) -> f64 {
        (self.b[0] - self.a[0]).hypot(self.b[1] - self.a[1])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length() > 0.0) || !self.a.iter().chain(&self.b).all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("fracture endpoints must be distinct and finite".into()));
        }
        if !(self.thickness > 0.0 && self.thickness.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "fracture thickness must be positive, got {}",
                self.thickness
            )));
        }
        if !(self.permeability > 0.0 && self.permeability.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "fracture permeability must be positive, got {}",
                self.permeability
            )));
        }
        Ok(())
    }
}

/// A fracture realized by nodal level-set values on a particular mesh.
#[derive(Debug, Clone)]
pub struct DiscreteFracture {
    pub spec: FractureSpec,
    /// Signed distance to the fracture's supporting line, per vertex.
    pub phi: Vec<f64>,
    /// Clipping level sets; the fracture is where every `psi < 0`.
    pub psi: Vec<Vec<f64>>,
    pub normal: [f64; 2],
    /// `normal` rotated by +90 degrees.
    pub tangent: [f64; 2],
    /// Nodal values with magnitude at or below this lie on the fracture line:
    /// positive for the sign test, exactly zero when locating crossings.
    pub eps_geom: f64,
}

/// Relative geometric tolerance, scaled by the domain's characteristic length.
pub const EPS_GEOM_REL: f64 = 1e-10;

/// Cuts shorter than this fraction of the cell diameter are discarded.
pub const MIN_CUT_REL: f64 = 1e-6;

pub fn discretize_fracture(spec: &FractureSpec, mesh: &Mesh) -> Result<DiscreteFracture> {
    spec.validate()?;
    let len = spec.length();
    let dir = [(spec.b[0] - spec.a[0]) / len, (spec.b[1] - spec.a[1]) / len];
    let mut normal = [-dir[1], dir[0]];
    // Canonical sign so that the endpoint order does not matter.
    if normal[0] < 0.0 || (normal[0] == 0.0 && normal[1] < 0.0) {
        normal = [-normal[0], -normal[1]];
    }
    let normal = [normal[0] + 0.0, normal[1] + 0.0];
    let tangent = [-normal[1], normal[0]];
    let dot = |u: [f64; 2], v: [f64; 2]| u[0] * v[0] + u[1] * v[1];
    let sub = |u: Point, v: Point| [u[0] - v[0], u[1] - v[1]];

    let phi = mesh.vertices.iter().map(|&x| dot(sub(x, spec.a), normal)).collect();
    let psi_a = mesh.vertices.iter().map(|&x| dot(sub(spec.a, x), dir)).collect();
    let psi_b = mesh.vertices.iter().map(|&x| dot(sub(x, spec.b), dir)).collect();
    Ok(DiscreteFracture {
        spec: spec.clone(),
        phi,
        psi: vec![psi_a, psi_b],
        normal,
        tangent,
        eps_geom: EPS_GEOM_REL * mesh.domain.longest_side(),
    })
}

/// Intersection of a fracture with one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub p0: Point,
    pub p1: Point,
    pub length: f64,
}

/// Nodal values within `eps` of zero count as zero for interpolation and
/// as positive for the sign test.
fn clamp(v: f64, eps: f64) -> f64 {
    if v.abs() <= eps {
        0.0
    } else {
        v
    }
}

/// Cuts the triangle `tri` by `{phi = 0} ∩ {psi_j < 0}` for affine
/// interpolants of the given nodal values.
pub fn cut_segment(tri: [Point; 3], phi: [f64; 3], psi: &[[f64; 3]], eps_geom: f64) -> Option<Cut> {
    let phi = phi.map(|v| clamp(v, eps_geom));
    let bary_on_edge = |i: usize, j: usize| -> [f64; 3] {
        let t = phi[i] / (phi[i] - phi[j]);
        let mut l = [0.0; 3];
        l[i] = 1.0 - t;
        l[j] = t;
        l
    };
    let mut ends: Vec<[f64; 3]> = Vec::with_capacity(2);
    for i in 0..3 {
        let j = (i + 1) % 3;
        if (phi[i] < 0.0) != (phi[j] < 0.0) {
            ends.push(bary_on_edge(i, j));
        }
    }
    if ends.len() != 2 {
        return None;
    }
    let (mut l0, mut l1) = (ends[0], ends[1]);

    let eval = |l: &[f64; 3], nodal: &[f64; 3]| l[0] * nodal[0] + l[1] * nodal[1] + l[2] * nodal[2];
    for nodal in psi {
        let nodal = nodal.map(|v| clamp(v, eps_geom));
        let (s0, s1) = (eval(&l0, &nodal), eval(&l1, &nodal));
        match (s0 < 0.0, s1 < 0.0) {
            (true, true) => {}
            (false, false) => return None,
            (inside0, _) => {
                let t = s0 / (s0 - s1);
                let mid = [0, 1, 2].map(|k| l0[k] + t * (l1[k] - l0[k]));
                if inside0 {
                    l1 = mid;
                } else {
                    l0 = mid;
                }
            }
        }
    }

    let point = |l: &[f64; 3]| -> Point {
        [
            l[0] * tri[0][0] + l[1] * tri[1][0] + l[2] * tri[2][0],
            l[0] * tri[0][1] + l[1] * tri[1][1] + l[2] * tri[2][1],
        ]
    };
    let (p0, p1) = (point(&l0), point(&l1));
    let length = (p1[0] - p0[0]).hypot(p1[1] - p0[1]);
    let diam = (0..3)
        .map(|i| {
            let (a, b) = (tri[i], tri[(i + 1) % 3]);
            (b[0] - a[0]).hypot(b[1] - a[1])
        })
        .fold(0.0, f64::max);
    if length < eps_geom.max(MIN_CUT_REL * diam) {
        return None;
    }
    Some(Cut { p0, p1, length })
}

impl DiscreteFracture {
    pub fn kind(&self) -> FractureKind {
        self.spec.kind
    }

    pub fn cut_cell(&self, mesh: &Mesh, cell: usize) -> Option<Cut> {
        let vs = mesh.cells[cell];
        let phi = vs.map(|v| self.phi[v]);
        let psi: Vec<[f64; 3]> = self.psi.iter().map(|p| vs.map(|v| p[v])).collect();
        cut_segment(mesh.cell_points(cell), phi, &psi, self.eps_geom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellClass {
    Regular,
    Blocking,
    Conductive,
}

impl CellClass {
    pub fn code(self) -> i32 {
        match self {
            CellClass::Regular => 0,
            CellClass::Blocking => 1,
            CellClass::Conductive => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellCut {
    pub fracture: usize,
    pub cut: Cut,
}

#[derive(Debug, Clone)]
pub struct CellClassification {
    pub class_of: Vec<CellClass>,
    /// Cuts that enter the discretization. Conductive cuts inside blocking
    /// cells are dropped.
    pub cuts: Vec<Vec<CellCut>>,
}

impl CellClassification {
    pub fn count(&self, class: CellClass) -> usize {
        self.class_of.iter().filter(|&&c| c == class).count()
    }

    pub fn fractured_cells(&self) -> BTreeSet<usize> {
        (0..self.class_of.len())
            .filter(|&c| self.class_of[c] != CellClass::Regular)
            .collect()
    }
}

pub fn classify_cells(mesh: &Mesh, fractures: &[DiscreteFracture]) -> CellClassification {
    let per_cell: Vec<(CellClass, Vec<CellCut>)> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let cuts: Vec<CellCut> = fractures
                .iter()
                .enumerate()
                .filter_map(|(i, fr)| fr.cut_cell(mesh, c).map(|cut| CellCut { fracture: i, cut }))
                .collect();
            let has = |kind| cuts.iter().any(|cc| fractures[cc.fracture].kind() == kind);
            if has(FractureKind::Blocking) {
                let kept = cuts
                    .into_iter()
                    .filter(|cc| fractures[cc.fracture].kind() == FractureKind::Blocking)
                    .collect();
                (CellClass::Blocking, kept)
            } else if has(FractureKind::Conductive) {
                (CellClass::Conductive, cuts)
            } else {
                (CellClass::Regular, Vec::new())
            }
        })
        .collect();
    let (class_of, cuts) = per_cell.into_iter().unzip();
    CellClassification { class_of, cuts }
}

pub fn discretize_all(specs: &[FractureSpec], mesh: &Mesh) -> Result<Vec<DiscreteFracture>> {
    specs
        .iter()
        .enumerate()
        .map(|(i, s)| discretize_fracture(s, mesh).map_err(|e| e.context(format!("fracture {i}"))))
        .collect()
}

/// Repeatedly classifies the mesh and bisects every fractured cell.
pub fn refine_near_fractures(mesh: &Mesh, specs: &[FractureSpec], steps: usize) -> Result<Mesh> {
    let mut current = mesh.clone();
    for _ in 0..steps {
        let fractures = discretize_all(specs, &current)?;
        let marked = classify_cells(&current, &fractures).fractured_cells();
        if marked.is_empty() {
            break;
        }
        current = bisect(&current, &marked)?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_uniform_triangulation, Rect};

    const TRI: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    fn close(a: Point, b: Point) -> bool {
        (a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14
    }

    fn same_segment(cut: &Cut, a: Point, b: Point) -> bool {
        (close(cut.p0, a) && close(cut.p1, b)) || (close(cut.p0, b) && close(cut.p1, a))
    }

    #[test]
    fn horizontal_cut_through_reference_triangle() {
        let phi = TRI.map(|p| p[1] - 0.25);
        let cut = cut_segment(TRI, phi, &[], 1e-10).unwrap();
        assert!(same_segment(&cut, [0.0, 0.25], [0.75, 0.25]));
        assert!((cut.length - 0.75).abs() < 1e-14);
    }

    #[test]
    fn clipped_cut() {
        let phi = TRI.map(|p| p[1] - 0.25);
        let psi = [TRI.map(|p| p[0] - 0.5)];
        let cut = cut_segment(TRI, phi, &psi, 1e-10).unwrap();
        assert!(same_segment(&cut, [0.0, 0.25], [0.5, 0.25]));
        assert!((cut.length - 0.5).abs() < 1e-14);
    }

    #[test]
    fn level_set_outside() {
        let phi = TRI.map(|p| p[1] - 2.0);
        assert!(cut_segment(TRI, phi, &[], 1e-10).is_none());
        let psi = [TRI.map(|p| 2.0 - p[0])];
        let phi = TRI.map(|p| p[1] - 0.25);
        assert!(cut_segment(TRI, phi, &psi, 1e-10).is_none());
    }

    #[test]
    fn cross_fracture_level_sets() {
        let mesh = build_uniform_triangulation(4, 4, Rect::unit_square()).unwrap();
        let h = FractureSpec::new([0.25, 0.5], [0.75, 0.5], 1e-3, 1e3, FractureKind::Conductive);
        let d = discretize_fracture(&h, &mesh).unwrap();
        assert_eq!(d.normal, [0.0, 1.0]);
        for (v, x) in mesh.vertices.iter().enumerate() {
            assert!((d.phi[v] - (x[1] - 0.5)).abs() < 1e-15);
            assert!((d.psi[0][v] - (0.25 - x[0])).abs() < 1e-15);
            assert!((d.psi[1][v] - (x[0] - 0.75)).abs() < 1e-15);
        }
        let v = FractureSpec::new([0.5, 0.25], [0.5, 0.75], 1e-3, 1e3, FractureKind::Conductive);
        let d = discretize_fracture(&v, &mesh).unwrap();
        assert_eq!(d.normal[0].abs(), 1.0);
        assert_eq!(d.normal[1], 0.0);
    }

    #[test]
    fn rotated_normal_is_orthogonal() {
        let mesh = build_uniform_triangulation(2, 2, Rect::unit_square()).unwrap();
        let s = FractureSpec::new([0.1, 0.1], [0.9, 0.9], 1e-3, 1.0, FractureKind::Blocking);
        let d = discretize_fracture(&s, &mesh).unwrap();
        let dot = d.normal[0] * d.tangent[0] + d.normal[1] * d.tangent[1];
        assert!(dot.abs() < 1e-15);
        assert!((d.normal[0].hypot(d.normal[1]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_segment_rejected() {
        let mesh = build_uniform_triangulation(1, 1, Rect::unit_square()).unwrap();
        let s = FractureSpec::new([0.3, 0.3], [0.3, 0.3], 1e-3, 1.0, FractureKind::Blocking);
        assert!(matches!(discretize_fracture(&s, &mesh), Err(Error::InvalidArgument(_))));
        let s = FractureSpec::new([0.3, 0.3], [0.5, 0.3], -1.0, 1.0, FractureKind::Blocking);
        assert!(discretize_fracture(&s, &mesh).is_err());
    }

    #[test]
    fn crossing_blocking_fractures_tile_their_length() {
        let mesh = build_uniform_triangulation(10, 10, Rect::unit_square()).unwrap();
        let specs = [
            FractureSpec::new([0.25, 0.5], [0.75, 0.5], 1e-3, 1e-3, FractureKind::Blocking),
            FractureSpec::new([0.5, 0.25], [0.5, 0.75], 1e-3, 1e-3, FractureKind::Blocking),
        ];
        let fr = discretize_all(&specs, &mesh).unwrap();
        let cls = classify_cells(&mesh, &fr);
        for i in 0..2 {
            let total: f64 = cls.cuts.iter().flatten().filter(|c| c.fracture == i).map(|c| c.cut.length).sum();
            assert!((total - 0.5).abs() < 1e-10, "fracture {i}: {total}");
        }
        for c in cls.fractured_cells() {
            assert_eq!(cls.class_of[c], CellClass::Blocking);
        }
    }

    #[test]
    fn mixed_cell_drops_conductive_cut() {
        let mesh = build_uniform_triangulation(5, 5, Rect::unit_square()).unwrap();
        let specs = [
            FractureSpec::new([0.13, 0.37], [0.87, 0.41], 1e-3, 1e3, FractureKind::Conductive),
            FractureSpec::new([0.43, 0.11], [0.47, 0.83], 1e-3, 1e-3, FractureKind::Blocking),
        ];
        let fr = discretize_all(&specs, &mesh).unwrap();
        let cls = classify_cells(&mesh, &fr);
        let mixed: Vec<usize> = (0..mesh.num_cells())
            .filter(|&c| fr.iter().all(|f| f.cut_cell(&mesh, c).is_some()))
            .collect();
        assert!(!mixed.is_empty());
        for c in mixed {
            assert_eq!(cls.class_of[c], CellClass::Blocking);
            assert_eq!(cls.cuts[c].len(), 1);
            assert_eq!(cls.cuts[c][0].fracture, 1);
        }
        // Cell at the lower-left corner is far from both fractures.
        assert_eq!(cls.class_of[0], CellClass::Regular);
        assert!(cls.cuts[0].is_empty());
    }

    #[test]
    fn fracture_outside_domain_marks_nothing() {
        let mesh = build_uniform_triangulation(4, 4, Rect::unit_square()).unwrap();
        let specs = [FractureSpec::new([2.0, 2.0], [3.0, 2.5], 1e-3, 1e3, FractureKind::Conductive)];
        let refined = refine_near_fractures(&mesh, &specs, 3).unwrap();
        assert_eq!(refined.cells, mesh.cells);
    }

    #[test]
    fn zero_steps_is_identity() {
        let mesh = build_uniform_triangulation(4, 4, Rect::unit_square()).unwrap();
        let specs = [FractureSpec::new([0.2, 0.3], [0.7, 0.6], 1e-3, 1e3, FractureKind::Conductive)];
        let refined = refine_near_fractures(&mesh, &specs, 0).unwrap();
        assert_eq!(refined.cells, mesh.cells);
    }
}
