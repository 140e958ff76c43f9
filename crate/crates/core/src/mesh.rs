//! Conforming triangulations of rectangular domains.
//!
//! Cells are stored counter-clockwise. Local edge `i` of a cell runs from
//! vertex `i` to vertex `(i + 1) % 3`; `cell_facets[c][i]` is the global
//! facet on that edge.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn unit_square() -> Self {
        Rect::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn longest_side(&self) -> f64 {
        self.width().max(self.height())
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        p[0] >= self.x0 - tol && p[0] <= self.x1 + tol && p[1] >= self.y0 - tol && p[1] <= self.y1 + tol
    }

    /// Which side of the rectangle a boundary segment lies on, if any.
    pub fn side_of(&self, a: Point, b: Point) -> Option<BoundaryTag> {
        let tol = 1e-12 * self.longest_side();
        let on = |u: f64, v: f64| (u - v).abs() <= tol;
        if on(a[0], self.x0) && on(b[0], self.x0) {
            Some(BoundaryTag::Left)
        } else if on(a[0], self.x1) && on(b[0], self.x1) {
            Some(BoundaryTag::Right)
        } else if on(a[1], self.y0) && on(b[1], self.y0) {
            Some(BoundaryTag::Bottom)
        } else if on(a[1], self.y1) && on(b[1], self.y1) {
            Some(BoundaryTag::Top)
        } else {
            None
        }
    }
}

/// Named side of the rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTag {
    Left,
    Right,
    Bottom,
    Top,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [
        BoundaryTag::Left,
        BoundaryTag::Right,
        BoundaryTag::Bottom,
        BoundaryTag::Top,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Left => "left",
            BoundaryTag::Right => "right",
            BoundaryTag::Bottom => "bottom",
            BoundaryTag::Top => "top",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        BoundaryTag::ALL.into_iter().find(|t| t.name() == s)
    }
}

impl std::fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Endpoints, ordered as seen from `cells.0`.
    pub vertices: [usize; 2],
    pub cells: (usize, Option<usize>),
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.cells.1.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub domain: Rect,
    pub vertices: Vec<Point>,
    pub cells: Vec<[usize; 3]>,
    pub facets: Vec<Facet>,
    pub cell_facets: Vec<[usize; 3]>,
    /// Indexed by facet; `None` for interior facets.
    pub boundary_tags: Vec<Option<BoundaryTag>>,
    /// Longest edge length of each cell.
    pub cell_diameters: Vec<f64>,
}

/// Unordered edge, smaller vertex first.
pub type EdgeKey = (usize, usize);

fn edge_key(a: usize, b: usize) -> EdgeKey {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    /// Builds a mesh from raw cells. Cells with negative orientation are
    /// flipped; `tags` labels boundary edges by their (unordered) endpoints.
    pub fn from_parts(
        domain: Rect,
        vertices: Vec<Point>,
        mut cells: Vec<[usize; 3]>,
        tags: &HashMap<EdgeKey, BoundaryTag>,
    ) -> Result<Self> {
        for (c, cell) in cells.iter_mut().enumerate() {
            if cell.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidArgument(format!("cell {c} references a missing vertex")));
            }
            let area = signed_area(vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]);
            if area == 0.0 {
                return Err(Error::InvalidArgument(format!("cell {c} is degenerate")));
            }
            if area < 0.0 {
                cell.swap(1, 2);
            }
        }

        let mut facets: Vec<Facet> = Vec::with_capacity(cells.len() * 3 / 2 + 8);
        let mut lookup: HashMap<EdgeKey, usize> = HashMap::with_capacity(cells.len() * 2);
        let mut cell_facets = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let mut cf = [0; 3];
            for i in 0..3 {
                let (a, b) = (cell[i], cell[(i + 1) % 3]);
                let key = edge_key(a, b);
                let id = match lookup.get(&key) {
                    Some(&f) => {
                        let facet = &mut facets[f];
                        if facet.cells.1.is_some() {
                            return Err(Error::InvalidArgument(format!(
                                "edge ({a}, {b}) shared by more than two cells"
                            )));
                        }
                        facet.cells.1 = Some(c);
                        f
                    }
                    None => {
                        facets.push(Facet {
                            vertices: [a, b],
                            cells: (c, None),
                        });
                        lookup.insert(key, facets.len() - 1);
                        facets.len() - 1
                    }
                };
                cf[i] = id;
            }
            cell_facets.push(cf);
        }

        let boundary_tags = facets
            .iter()
            .map(|f| {
                if f.is_boundary() {
                    tags.get(&edge_key(f.vertices[0], f.vertices[1])).copied()
                } else {
                    None
                }
            })
            .collect();

        let cell_diameters = cells
            .iter()
            .map(|cell| {
                (0..3)
                    .map(|i| dist(vertices[cell[i]], vertices[cell[(i + 1) % 3]]))
                    .fold(0.0, f64::max)
            })
            .collect();

        Ok(Mesh {
            domain,
            vertices,
            cells,
            facets,
            cell_facets,
            boundary_tags,
            cell_diameters,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn cell_points(&self, c: usize) -> [Point; 3] {
        let [a, b, d] = self.cells[c];
        [self.vertices[a], self.vertices[b], self.vertices[d]]
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        let [a, b, d] = self.cell_points(c);
        signed_area(a, b, d)
    }

    pub fn centroid(&self, c: usize) -> Point {
        let [a, b, d] = self.cell_points(c);
        [(a[0] + b[0] + d[0]) / 3.0, (a[1] + b[1] + d[1]) / 3.0]
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.cell_area(c)).sum()
    }

    pub fn facet_length(&self, f: usize) -> f64 {
        let [a, b] = self.facets[f].vertices;
        dist(self.vertices[a], self.vertices[b])
    }

    pub fn boundary_facets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.facets.len()).filter(|&f| self.facets[f].is_boundary())
    }

    pub fn min_diameter(&self) -> f64 {
        self.cell_diameters.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_diameter(&self) -> f64 {
        self.cell_diameters.iter().copied().fold(0.0, f64::max)
    }

    /// Checks orientation, facet adjacency and conformity. A hanging vertex
    /// leaves an interior edge with a single incident cell, so conformity
    /// reduces to: every single-cell facet lies on the domain boundary.
    pub fn check_conforming(&self) -> Result<()> {
        for c in 0..self.num_cells() {
            if self.cell_area(c) <= 0.0 {
                return Err(Error::Numerical(format!("cell {c} has non-positive area")));
            }
        }
        let mut seen = vec![0usize; self.facets.len()];
        for cf in &self.cell_facets {
            for &f in cf {
                seen[f] += 1;
            }
        }
        for (f, facet) in self.facets.iter().enumerate() {
            let expected = if facet.is_boundary() { 1 } else { 2 };
            if seen[f] != expected {
                return Err(Error::Numerical(format!("facet {f} has inconsistent adjacency")));
            }
            if facet.is_boundary() {
                let [a, b] = facet.vertices;
                if self.domain.side_of(self.vertices[a], self.vertices[b]).is_none() {
                    return Err(Error::Numerical(format!(
                        "facet {f} has one incident cell but is interior (hanging vertex)"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Local edge of `cell` chosen for bisection: the longest, ties broken
    /// by the smaller sorted vertex pair so that the choice is deterministic.
    fn refinement_edge(&self, cell: [usize; 3]) -> usize {
        let mut best = 0;
        let mut best_len = -1.0;
        let mut best_key = (usize::MAX, usize::MAX);
        for i in 0..3 {
            let (a, b) = (cell[i], cell[(i + 1) % 3]);
            let len = dist(self.vertices[a], self.vertices[b]);
            let key = edge_key(a, b);
            let tie = (len - best_len).abs() <= 1e-12 * len.max(best_len);
            if (!tie && len > best_len) || (tie && key < best_key) {
                best = i;
                best_len = len;
                best_key = key;
            }
        }
        best
    }

    /// Boundary tags keyed by edge, as accepted by [`Mesh::from_parts`].
    pub fn tag_map(&self) -> HashMap<EdgeKey, BoundaryTag> {
        self.boundary_facets()
            .filter_map(|f| {
                let [a, b] = self.facets[f].vertices;
                self.boundary_tags[f].map(|t| (edge_key(a, b), t))
            })
            .collect()
    }
}

/// Structured mesh: each of the `nx * ny` rectangles is split along the
/// diagonal from its lower-left to its upper-right corner.
pub fn build_uniform_triangulation(nx: usize, ny: usize, domain: Rect) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument(format!(
            "subdivision counts must be positive, got nx={nx}, ny={ny}"
        )));
    }
    if !(domain.width() > 0.0 && domain.height() > 0.0) {
        return Err(Error::InvalidArgument("domain must have positive width and height".into()));
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = if j == ny {
            domain.y1
        } else {
            domain.y0 + domain.height() * j as f64 / ny as f64
        };
        for i in 0..=nx {
            let x = if i == nx {
                domain.x1
            } else {
                domain.x0 + domain.width() * i as f64 / nx as f64
            };
            vertices.push([x, y]);
        }
    }
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v11, v01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            cells.push([v00, v10, v11]);
            cells.push([v00, v11, v01]);
        }
    }
    let mut tags = HashMap::new();
    for i in 0..nx {
        tags.insert(edge_key(idx(i, 0), idx(i + 1, 0)), BoundaryTag::Bottom);
        tags.insert(edge_key(idx(i, ny), idx(i + 1, ny)), BoundaryTag::Top);
    }
    for j in 0..ny {
        tags.insert(edge_key(idx(0, j), idx(0, j + 1)), BoundaryTag::Left);
        tags.insert(edge_key(idx(nx, j), idx(nx, j + 1)), BoundaryTag::Right);
    }
    Mesh::from_parts(domain, vertices, cells, &tags)
}

/// Largest accepted vertex perturbation, as a fraction of the shortest edge
/// at a vertex. Below a quarter no cell of a structured mesh can invert.
pub const MAX_PERTURBATION: f64 = 0.25;

/// Moves every vertex by a seeded random offset of at most `amplitude` times
/// the shortest edge at that vertex in each coordinate. Vertices on a side
/// of the domain slide along it and corners stay fixed, so boundary tags
/// remain valid.
///
/// This turns a structured grid into a background mesh in general position
/// with respect to axis-aligned features at grid-line coordinates.
pub fn perturb_vertices(mesh: &Mesh, amplitude: f64, seed: u64) -> Result<Mesh> {
    if !(0.0..MAX_PERTURBATION).contains(&amplitude) {
        return Err(Error::InvalidArgument(format!(
            "perturbation amplitude must lie in [0, {MAX_PERTURBATION}), got {amplitude}"
        )));
    }
    if amplitude == 0.0 {
        return Ok(mesh.clone());
    }
    let mut shortest = vec![f64::INFINITY; mesh.vertices.len()];
    for f in &mesh.facets {
        let [a, b] = f.vertices;
        let len = dist(mesh.vertices[a], mesh.vertices[b]);
        shortest[a] = shortest[a].min(len);
        shortest[b] = shortest[b].min(len);
    }
    let d = mesh.domain;
    let tol = 1e-12 * d.longest_side();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertices: Vec<Point> = mesh
        .vertices
        .iter()
        .zip(&shortest)
        .map(|(&v, &h)| {
            let offset: [f64; 2] = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
            let fixed_x = (v[0] - d.x0).abs() <= tol || (v[0] - d.x1).abs() <= tol;
            let fixed_y = (v[1] - d.y0).abs() <= tol || (v[1] - d.y1).abs() <= tol;
            [
                if fixed_x { v[0] } else { v[0] + amplitude * h * offset[0] },
                if fixed_y { v[1] } else { v[1] + amplitude * h * offset[1] },
            ]
        })
        .collect();
    for (c, cell) in mesh.cells.iter().enumerate() {
        if signed_area(vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]) <= 0.0 {
            return Err(Error::InvalidArgument(format!("perturbation inverts cell {c}")));
        }
    }
    Mesh::from_parts(d, vertices, mesh.cells.clone(), &mesh.tag_map())
}

/// Longest-edge bisection of the marked cells.
///
/// Every edge of a marked cell is bisected, so a marked cell is split into
/// four children whose diameters are at most half of the parent's for
/// right-isosceles cells. Closure: any cell with a bisected edge also has its
/// longest edge bisected. Cells are then split first along their longest
/// edge and the children along the remaining bisected edge, which keeps the
/// result conforming.
pub fn bisect(mesh: &Mesh, marked: &BTreeSet<usize>) -> Result<Mesh> {
    if let Some(&bad) = marked.iter().find(|&&c| c >= mesh.num_cells()) {
        return Err(Error::InvalidArgument(format!("marked cell {bad} does not exist")));
    }
    if marked.is_empty() {
        return Ok(mesh.clone());
    }

    let cell_edges = |c: usize| -> [EdgeKey; 3] {
        let cell = mesh.cells[c];
        [0, 1, 2].map(|i| edge_key(cell[i], cell[(i + 1) % 3]))
    };

    let mut split_edges: BTreeSet<EdgeKey> = BTreeSet::new();
    let mut queue: Vec<usize> = Vec::new();

    let mark_edge = |f: usize, split: &mut BTreeSet<EdgeKey>, queue: &mut Vec<usize>| {
        let facet = &mesh.facets[f];
        if split.insert(edge_key(facet.vertices[0], facet.vertices[1])) {
            queue.push(facet.cells.0);
            if let Some(other) = facet.cells.1 {
                queue.push(other);
            }
        }
    };

    for &c in marked {
        for &f in &mesh.cell_facets[c] {
            mark_edge(f, &mut split_edges, &mut queue);
        }
    }
    while let Some(c) = queue.pop() {
        let e = mesh.refinement_edge(mesh.cells[c]);
        mark_edge(mesh.cell_facets[c][e], &mut split_edges, &mut queue);
    }

    let mut vertices = mesh.vertices.clone();
    let mut tags = mesh.tag_map();
    let mut midpoints: HashMap<EdgeKey, usize> = HashMap::new();
    for &(a, b) in &split_edges {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        let m = vertices.len() - 1;
        midpoints.insert((a, b), m);
        if let Some(tag) = tags.remove(&(a, b)) {
            tags.insert(edge_key(a, m), tag);
            tags.insert(edge_key(m, b), tag);
        }
    }

    let mut cells = Vec::with_capacity(mesh.num_cells() + 4 * marked.len());
    for c in 0..mesh.num_cells() {
        let cell = mesh.cells[c];
        if cell_edges(c).iter().any(|e| midpoints.contains_key(e)) {
            let first = mesh.refinement_edge(cell);
            split_cell(cell, Some(first), &midpoints, &mut cells);
        } else {
            cells.push(cell);
        }
    }
    Mesh::from_parts(mesh.domain, vertices, cells, &tags)
}

fn split_cell(
    cell: [usize; 3],
    edge: Option<usize>,
    midpoints: &HashMap<EdgeKey, usize>,
    out: &mut Vec<[usize; 3]>,
) {
    let edge = edge.or_else(|| {
        (0..3).find(|&i| midpoints.contains_key(&edge_key(cell[i], cell[(i + 1) % 3])))
    });
    let Some(i) = edge else {
        out.push(cell);
        return;
    };
    let (a, b, c) = (cell[i], cell[(i + 1) % 3], cell[(i + 2) % 3]);
    let m = midpoints[&edge_key(a, b)];
    split_cell([a, m, c], None, midpoints, out);
    split_cell([m, b, c], None, midpoints, out);
}
