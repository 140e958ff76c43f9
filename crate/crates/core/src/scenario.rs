//! Scenario description, TOML file format and built-in benchmarks.
//!
//! A scenario file is TOML. Every table except `domain`, `matrix_permeability`,
//! `boundary` and `mesh` is optional:
//!
//! ```toml
//! name = "cross"
//! degree = 1
//! source = 0.0                      # number, "manufactured_source" or { c0, cx, cy }
//! allow_pure_neumann = false
//! outputs = ["line_cuts", "field_vtk", "diagnostics"]
//!
//! [domain]
//! x0 = 0.0
//! y0 = 0.0
//! x1 = 1.0
//! y1 = 1.0
//!
//! [matrix_permeability]             # or simply: matrix_permeability = 1.0
//! value = 1.0
//! regions = [{ rect = { x0 = 0.0, y0 = 0.0, x1 = 0.5, y1 = 1.0 }, value = 10.0 }]
//!
//! [boundary]
//! left = { dirichlet = 1.0 }
//! right = { dirichlet = 0.0 }
//! bottom = { neumann = 0.0 }        # outward normal flux
//! top = { neumann = 0.0 }
//!
//! [penalties]                       # all keys optional
//! c_b = 1.0
//! s_b = 0.0
//! c_c = 1.0
//! s_c = 3.0
//! length = 1.0
//!
//! [mesh]
//! nx = 10
//! ny = 10
//! refine_steps = 3                  # optional, default 0
//! perturbation = 0.2                # optional vertex jitter, fraction of h in [0, 0.25)
//! seed = 1                          # optional, seeds the jitter
//!
//! [[fractures]]
//! a = [0.25, 0.5]
//! b = [0.75, 0.5]
//! thickness = 1e-3
//! permeability = 1e3
//! kind = "conductive"               # or "blocking"
//!
//! [[line_cuts]]
//! a = [0.5, 0.0]
//! b = [0.5, 1.0]
//! n = 200
//! ```

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assembly::PenaltyParams;
use crate::error::{Error, Result};
use crate::geometry::{FractureKind, FractureSpec};
use crate::mesh::{BoundaryTag, Point, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinField {
    /// `sin(pi x) sin(pi y)`
    ManufacturedPressure,
    /// `2 pi^2 sin(pi x) sin(pi y)`, the source matching the pressure above
    /// for unit permeability.
    ManufacturedSource,
}

/// Scalar field over the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Field {
    Constant(f64),
    Builtin(BuiltinField),
    Affine { c0: f64, cx: f64, cy: f64 },
}

impl Field {
    pub fn eval(&self, p: Point) -> f64 {
        match *self {
            Field::Constant(c) => c,
            Field::Affine { c0, cx, cy } => c0 + cx * p[0] + cy * p[1],
            Field::Builtin(BuiltinField::ManufacturedPressure) => (PI * p[0]).sin() * (PI * p[1]).sin(),
            Field::Builtin(BuiltinField::ManufacturedSource) => {
                2.0 * PI * PI * (PI * p[0]).sin() * (PI * p[1]).sin()
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Field::Constant(c) if *c == 0.0)
    }

    /// Upper bound of `|field|` used for tolerance scaling.
    pub fn sup_bound(&self, domain: &Rect) -> f64 {
        match *self {
            Field::Constant(c) => c.abs(),
            Field::Affine { .. } => [
                [domain.x0, domain.y0],
                [domain.x1, domain.y0],
                [domain.x0, domain.y1],
                [domain.x1, domain.y1],
            ]
            .iter()
            .map(|&p| self.eval(p).abs())
            .fold(0.0, f64::max),
            Field::Builtin(BuiltinField::ManufacturedPressure) => 1.0,
            Field::Builtin(BuiltinField::ManufacturedSource) => 2.0 * PI * PI,
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            Field::Constant(c) => c.is_finite(),
            Field::Affine { c0, cx, cy } => c0.is_finite() && cx.is_finite() && cy.is_finite(),
            Field::Builtin(_) => true,
        }
    }

    /// Multiplies the field by `c`; returns `None` for built-in fields.
    pub fn scaled(&self, c: f64) -> Option<Field> {
        match *self {
            Field::Constant(v) => Some(Field::Constant(c * v)),
            Field::Affine { c0, cx, cy } => Some(Field::Affine {
                c0: c * c0,
                cx: c * cx,
                cy: c * cy,
            }),
            Field::Builtin(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    /// Prescribed pressure.
    Dirichlet(Field),
    /// Prescribed outward normal flux `u . n`.
    Neumann(f64),
}

impl BoundaryCondition {
    pub fn is_dirichlet(&self) -> bool {
        matches!(self, BoundaryCondition::Dirichlet(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub left: BoundaryCondition,
    pub right: BoundaryCondition,
    pub bottom: BoundaryCondition,
    pub top: BoundaryCondition,
}

impl BoundarySpec {
    pub fn uniform(bc: BoundaryCondition) -> Self {
        BoundarySpec {
            left: bc,
            right: bc,
            bottom: bc,
            top: bc,
        }
    }

    pub fn get(&self, tag: BoundaryTag) -> &BoundaryCondition {
        match tag {
            BoundaryTag::Left => &self.left,
            BoundaryTag::Right => &self.right,
            BoundaryTag::Bottom => &self.bottom,
            BoundaryTag::Top => &self.top,
        }
    }

    pub fn has_dirichlet(&self) -> bool {
        BoundaryTag::ALL.iter().any(|&t| self.get(t).is_dirichlet())
    }

    /// Largest magnitude of any boundary datum.
    pub fn max_datum(&self, domain: &Rect) -> f64 {
        BoundaryTag::ALL
            .iter()
            .map(|&t| match self.get(t) {
                BoundaryCondition::Dirichlet(f) => f.sup_bound(domain),
                BoundaryCondition::Neumann(g) => g.abs(),
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermeabilityRegion {
    pub rect: Rect,
    pub value: f64,
}

/// Scalar matrix permeability with optional rectangular overrides; the last
/// region containing a point wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Permeability {
    pub value: f64,
    #[serde(default)]
    pub regions: Vec<PermeabilityRegion>,
}

impl Permeability {
    pub fn constant(value: f64) -> Self {
        Permeability {
            value,
            regions: Vec::new(),
        }
    }

    pub fn at(&self, p: Point) -> f64 {
        self.regions
            .iter()
            .rev()
            .find(|r| r.rect.contains(p, 0.0))
            .map_or(self.value, |r| r.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshSettings {
    pub nx: usize,
    pub ny: usize,
    #[serde(default)]
    pub refine_steps: usize,
    /// Random vertex displacement of the background grid as a fraction of
    /// the local edge length; 0 keeps the grid structured.
    #[serde(default)]
    pub perturbation: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineCut {
    pub a: Point,
    pub b: Point,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    LineCuts,
    FieldVtk,
    Diagnostics,
    Conservation,
    MeshVtk,
    Cuts,
}

impl OutputKind {
    pub fn defaults() -> Vec<OutputKind> {
        vec![OutputKind::LineCuts, OutputKind::FieldVtk, OutputKind::Diagnostics]
    }
}

/// A validated scenario with all defaults resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub degree: usize,
    pub domain: Rect,
    pub matrix_permeability: Permeability,
    pub fractures: Vec<FractureSpec>,
    pub boundary: BoundarySpec,
    pub source: Field,
    pub penalties: PenaltyParams,
    pub mesh: MeshSettings,
    pub line_cuts: Vec<LineCut>,
    pub outputs: Vec<OutputKind>,
    /// Lets a scenario without Dirichlet boundaries through validation so
    /// that the singular system is reported by the assembly.
    pub allow_pure_neumann: bool,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
enum PermeabilityFile {
    Scalar(f64),
    Full(Permeability),
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct BoundaryFile {
    left: Option<BoundaryCondition>,
    right: Option<BoundaryCondition>,
    bottom: Option<BoundaryCondition>,
    top: Option<BoundaryCondition>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct PenaltyFile {
    c_b: Option<f64>,
    s_b: Option<f64>,
    c_c: Option<f64>,
    s_c: Option<f64>,
    length: Option<f64>,
    global_scale: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    name: Option<String>,
    #[serde(default = "default_degree")]
    degree: usize,
    #[serde(default = "zero_field")]
    source: Field,
    #[serde(default)]
    allow_pure_neumann: bool,
    #[serde(default = "OutputKind::defaults")]
    outputs: Vec<OutputKind>,
    domain: Rect,
    matrix_permeability: PermeabilityFile,
    #[serde(default)]
    boundary: BoundaryFile,
    #[serde(default)]
    penalties: PenaltyFile,
    mesh: MeshSettings,
    #[serde(default)]
    fractures: Vec<FractureSpec>,
    #[serde(default)]
    line_cuts: Vec<LineCut>,
}

fn default_degree() -> usize {
    1
}

fn zero_field() -> Field {
    Field::Constant(0.0)
}

impl ScenarioFile {
    fn resolve(self, fallback_name: &str) -> Result<Scenario> {
        let missing = |side: &str| Error::Config(format!("boundary.{side}: no boundary condition given"));
        let boundary = BoundarySpec {
            left: self.boundary.left.ok_or_else(|| missing("left"))?,
            right: self.boundary.right.ok_or_else(|| missing("right"))?,
            bottom: self.boundary.bottom.ok_or_else(|| missing("bottom"))?,
            top: self.boundary.top.ok_or_else(|| missing("top"))?,
        };
        let defaults = PenaltyParams::defaults(self.degree, self.domain.longest_side());
        let p = self.penalties;
        let penalties = PenaltyParams {
            c_b: p.c_b.unwrap_or(defaults.c_b),
            s_b: p.s_b.unwrap_or(defaults.s_b),
            c_c: p.c_c.unwrap_or(defaults.c_c),
            s_c: p.s_c.unwrap_or(defaults.s_c),
            length: p.length.unwrap_or(defaults.length),
            global_scale: p.global_scale,
        };
        let matrix_permeability = match self.matrix_permeability {
            PermeabilityFile::Scalar(v) => Permeability::constant(v),
            PermeabilityFile::Full(p) => p,
        };
        let scenario = Scenario {
            name: self.name.unwrap_or_else(|| fallback_name.to_string()),
            degree: self.degree,
            domain: self.domain,
            matrix_permeability,
            fractures: self.fractures,
            boundary,
            source: self.source,
            penalties,
            mesh: self.mesh,
            line_cuts: self.line_cuts,
            outputs: self.outputs,
            allow_pure_neumann: self.allow_pure_neumann,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    fn from_scenario(s: &Scenario) -> Self {
        let bc = Some;
        ScenarioFile {
            name: Some(s.name.clone()),
            degree: s.degree,
            source: s.source,
            allow_pure_neumann: s.allow_pure_neumann,
            outputs: s.outputs.clone(),
            domain: s.domain,
            matrix_permeability: PermeabilityFile::Full(s.matrix_permeability.clone()),
            boundary: BoundaryFile {
                left: bc(s.boundary.left),
                right: bc(s.boundary.right),
                bottom: bc(s.boundary.bottom),
                top: bc(s.boundary.top),
            },
            penalties: PenaltyFile {
                c_b: Some(s.penalties.c_b),
                s_b: Some(s.penalties.s_b),
                c_c: Some(s.penalties.c_c),
                s_c: Some(s.penalties.s_c),
                length: Some(s.penalties.length),
                global_scale: s.penalties.global_scale,
            },
            mesh: s.mesh,
            fractures: s.fractures.clone(),
            line_cuts: s.line_cuts.clone(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.degree > 2 {
            return cfg(format!("degree: must be 0, 1 or 2, got {}", self.degree));
        }
        if !(self.domain.width() > 0.0 && self.domain.height() > 0.0) {
            return cfg("domain: must have positive width and height".into());
        }
        if self.mesh.nx == 0 || self.mesh.ny == 0 {
            return cfg("mesh: nx and ny must be positive".into());
        }
        if !(0.0..crate::mesh::MAX_PERTURBATION).contains(&self.mesh.perturbation) {
            return cfg(format!(
                "mesh.perturbation must lie in [0, {}), got {}",
                crate::mesh::MAX_PERTURBATION,
                self.mesh.perturbation
            ));
        }
        let k = &self.matrix_permeability;
        if !(k.value > 0.0 && k.value.is_finite()) {
            return cfg(format!("matrix_permeability.value: must be positive, got {}", k.value));
        }
        for (i, r) in k.regions.iter().enumerate() {
            if !(r.value > 0.0 && r.value.is_finite()) {
                return cfg(format!("matrix_permeability.regions[{i}].value: must be positive"));
            }
        }
        for (i, f) in self.fractures.iter().enumerate() {
            f.validate()
                .map_err(|e| Error::Config(format!("fractures[{i}]: {}", e.root())))?;
        }
        for tag in BoundaryTag::ALL {
            match self.boundary.get(tag) {
                BoundaryCondition::Dirichlet(f) if !f.is_finite() => {
                    return cfg(format!("boundary.{tag}: non-finite Dirichlet value"))
                }
                BoundaryCondition::Neumann(g) if !g.is_finite() => {
                    return cfg(format!("boundary.{tag}: non-finite Neumann value"))
                }
                _ => {}
            }
        }
        if !self.boundary.has_dirichlet() && !self.allow_pure_neumann {
            return cfg("boundary: at least one side must be Dirichlet (set allow_pure_neumann to override)".into());
        }
        if !self.source.is_finite() {
            return cfg("source: non-finite value".into());
        }
        self.penalties
            .validate()
            .map_err(|e| Error::Config(format!("penalties: {}", e.root())))?;
        let tol = 1e-12 * self.domain.longest_side();
        for (i, c) in self.line_cuts.iter().enumerate() {
            if c.n < 2 {
                return cfg(format!("line_cuts[{i}].n: need at least 2 samples"));
            }
            if !self.domain.contains(c.a, tol) || !self.domain.contains(c.b, tol) {
                return cfg(format!("line_cuts[{i}]: endpoints must lie in the domain"));
            }
        }
        Ok(())
    }

    pub fn has_output(&self, kind: OutputKind) -> bool {
        self.outputs.contains(&kind)
    }
}

pub fn parse_scenario(text: &str, fallback_name: &str) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.resolve(fallback_name)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    parse_scenario(&text, stem).map_err(|e| e.context(path.display().to_string()))
}

pub fn scenario_to_toml(s: &Scenario) -> Result<String> {
    toml::to_string(&ScenarioFile::from_scenario(s)).map_err(|e| Error::Parse(e.to_string()))
}

pub fn save_scenario(s: &Scenario, path: &Path) -> Result<()> {
    std::fs::write(path, scenario_to_toml(s)?)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example1Variant {
    Conductive,
    Blocking,
}

/// Cross-shaped fractures in the unit square.
pub fn builtin_example1(variant: Example1Variant) -> Scenario {
    let (kind, permeability, name) = match variant {
        Example1Variant::Conductive => (FractureKind::Conductive, 1e3, "example1a"),
        Example1Variant::Blocking => (FractureKind::Blocking, 1e-3, "example1b"),
    };
    let degree = 1;
    Scenario {
        name: name.into(),
        degree,
        domain: Rect::unit_square(),
        matrix_permeability: Permeability::constant(1.0),
        fractures: vec![
            FractureSpec::new([0.25, 0.5], [0.75, 0.5], 1e-3, permeability, kind),
            FractureSpec::new([0.5, 0.25], [0.5, 0.75], 1e-3, permeability, kind),
        ],
        boundary: BoundarySpec {
            left: BoundaryCondition::Dirichlet(Field::Constant(1.0)),
            right: BoundaryCondition::Dirichlet(Field::Constant(0.0)),
            bottom: BoundaryCondition::Neumann(0.0),
            top: BoundaryCondition::Neumann(0.0),
        },
        source: Field::Constant(0.0),
        penalties: PenaltyParams::defaults(degree, 1.0),
        // An odd, jittered grid keeps the fractures off the mesh lines, as
        // on an unstructured background mesh of the same size.
        mesh: MeshSettings {
            nx: 11,
            ny: 11,
            refine_steps: 3,
            perturbation: 0.2,
            seed: 1,
        },
        line_cuts: vec![LineCut {
            a: [0.5, 0.0],
            b: [0.5, 1.0],
            n: 200,
        }],
        outputs: OutputKind::defaults(),
        allow_pure_neumann: false,
    }
}

/// Fracture-free unit square with `p = sin(pi x) sin(pi y)`.
pub fn builtin_manufactured(n: usize, degree: usize) -> Scenario {
    Scenario {
        name: format!("manufactured_n{n}_k{degree}"),
        degree,
        domain: Rect::unit_square(),
        matrix_permeability: Permeability::constant(1.0),
        fractures: Vec::new(),
        boundary: BoundarySpec::uniform(BoundaryCondition::Dirichlet(Field::Constant(0.0))),
        source: Field::Builtin(BuiltinField::ManufacturedSource),
        penalties: PenaltyParams::defaults(degree, 1.0),
        mesh: MeshSettings {
            nx: n,
            ny: n,
            refine_steps: 0,
            perturbation: 0.0,
            seed: 0,
        },
        line_cuts: Vec::new(),
        outputs: vec![OutputKind::Diagnostics],
        allow_pure_neumann: false,
    }
}

impl Scenario {
    /// Same scenario with the degree changed and the degree-dependent
    /// default for `s_c` re-applied.
    pub fn with_degree(mut self, degree: usize) -> Self {
        self.degree = degree;
        self.penalties.s_c = PenaltyParams::defaults(degree, self.penalties.length).s_c;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
degree = 1
matrix_permeability = 1.0
[domain]
x0 = 0.0
y0 = 0.0
x1 = 2.0
y1 = 1.0
[mesh]
nx = 4
ny = 2
[boundary]
left = { dirichlet = 1.0 }
right = { dirichlet = 0.0 }
bottom = { neumann = 0.0 }
top = { neumann = 0.0 }
"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let s = parse_scenario(MINIMAL, "minimal").unwrap();
        assert_eq!(s.name, "minimal");
        assert_eq!(s.penalties.length, 2.0);
        assert_eq!(s.penalties.s_c, 3.0);
        assert_eq!(s.mesh.refine_steps, 0);
        assert!(s.fractures.is_empty());
        assert_eq!(s.source, Field::Constant(0.0));
    }

    #[test]
    fn missing_side_is_named() {
        let text = MINIMAL.replace("top = { neumann = 0.0 }\n", "");
        match parse_scenario(&text, "x") {
            Err(Error::Config(msg)) => assert!(msg.contains("top"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_scenario("degree = = 1", "x").unwrap_err();
        match err {
            Error::Parse(msg) => assert!(msg.contains("line 1"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_values_rejected() {
        let text = MINIMAL.replace("degree = 1", "degree = 3");
        assert!(matches!(parse_scenario(&text, "x"), Err(Error::Config(_))));
        let text = MINIMAL.replace("matrix_permeability = 1.0", "matrix_permeability = -1.0");
        assert!(matches!(parse_scenario(&text, "x"), Err(Error::Config(_))));
        let text = MINIMAL
            .replace("left = { dirichlet = 1.0 }", "left = { neumann = 1.0 }")
            .replace("right = { dirichlet = 0.0 }", "right = { neumann = -1.0 }");
        assert!(matches!(parse_scenario(&text, "x"), Err(Error::Config(_))));
    }

    #[test]
    fn example1_variants() {
        let a = builtin_example1(Example1Variant::Conductive);
        assert_eq!(a.fractures.len(), 2);
        assert!(a.fractures.iter().all(|f| f.kind == FractureKind::Conductive && f.permeability == 1e3));
        let b = builtin_example1(Example1Variant::Blocking);
        assert!(b.fractures.iter().all(|f| f.kind == FractureKind::Blocking && f.permeability == 1e-3));
        a.validate().unwrap();
        b.validate().unwrap();
        assert_eq!(a.line_cuts[0].n, 200);
    }

    #[test]
    fn example1_round_trip_through_toml() {
        let s = builtin_example1(Example1Variant::Blocking);
        let text = scenario_to_toml(&s).unwrap();
        let back = parse_scenario(&text, "other").unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn permeability_regions_override() {
        let k = Permeability {
            value: 1.0,
            regions: vec![
                PermeabilityRegion {
                    rect: Rect::new(0.0, 0.0, 0.5, 1.0),
                    value: 10.0,
                },
                PermeabilityRegion {
                    rect: Rect::new(0.0, 0.0, 0.25, 0.25),
                    value: 100.0,
                },
            ],
        };
        assert_eq!(k.at([0.75, 0.5]), 1.0);
        assert_eq!(k.at([0.4, 0.5]), 10.0);
        assert_eq!(k.at([0.1, 0.1]), 100.0);
    }

    #[test]
    fn field_forms_parse() {
        let text = MINIMAL
            .replace("degree = 1", "degree = 1\nsource = \"manufactured_source\"")
            .replace("left = { dirichlet = 1.0 }", "left = { dirichlet = { c0 = 1.0, cx = -1.0, cy = 0.0 } }");
        let s = parse_scenario(&text, "x").unwrap();
        assert_eq!(s.source, Field::Builtin(BuiltinField::ManufacturedSource));
        assert_eq!(
            s.boundary.left,
            BoundaryCondition::Dirichlet(Field::Affine {
                c0: 1.0,
                cx: -1.0,
                cy: 0.0
            })
        );
    }
}
