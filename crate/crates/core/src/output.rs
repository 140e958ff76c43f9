//! CSV, legacy ASCII VTK and `key: value` diagnostics writers.
//!
//! Floating-point values are printed with Rust's shortest round-trip
//! formatting, so identical results give byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::geometry::CellClassification;
use crate::mesh::Mesh;
use crate::postprocess::LineSample;

pub fn write_line_cut(w: &mut impl Write, samples: &[LineSample]) -> Result<()> {
    writeln!(w, "s,x,y,p_star")?;
    for s in samples {
        writeln!(w, "{},{},{},{}", s.s, s.x, s.y, s.value)?;
    }
    Ok(())
}

pub fn write_conservation(w: &mut impl Write, residuals: &[f64]) -> Result<()> {
    writeln!(w, "cell,residual")?;
    for (c, r) in residuals.iter().enumerate() {
        writeln!(w, "{c},{r}")?;
    }
    Ok(())
}

pub fn write_cuts(w: &mut impl Write, classification: &CellClassification) -> Result<()> {
    writeln!(w, "cell,fracture,x0,y0,x1,y1,length")?;
    for (c, cuts) in classification.cuts.iter().enumerate() {
        for cc in cuts {
            let (a, b) = (cc.cut.p0, cc.cut.p1);
            writeln!(w, "{c},{},{},{},{},{},{}", cc.fracture, a[0], a[1], b[0], b[1], cc.cut.length)?;
        }
    }
    Ok(())
}

/// One cell-data array of a VTK file.
pub enum CellData<'a> {
    Float(&'a str, &'a [f64]),
    Int(&'a str, &'a [i32]),
}

/// Legacy ASCII `UNSTRUCTURED_GRID` with piecewise constant cell data.
pub fn write_vtk(w: &mut impl Write, title: &str, mesh: &Mesh, data: &[CellData]) -> Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.vertices.len())?;
    for v in &mesh.vertices {
        writeln!(w, "{} {} 0", v[0], v[1])?;
    }
    let nc = mesh.num_cells();
    writeln!(w, "CELLS {nc} {}", 4 * nc)?;
    for c in &mesh.cells {
        writeln!(w, "3 {} {} {}", c[0], c[1], c[2])?;
    }
    writeln!(w, "CELL_TYPES {nc}")?;
    for _ in 0..nc {
        writeln!(w, "5")?;
    }
    if !data.is_empty() {
        writeln!(w, "CELL_DATA {nc}")?;
    }
    for d in data {
        match d {
            CellData::Float(name, values) => {
                writeln!(w, "SCALARS {name} double 1")?;
                writeln!(w, "LOOKUP_TABLE default")?;
                for v in values.iter() {
                    writeln!(w, "{v}")?;
                }
            }
            CellData::Int(name, values) => {
                writeln!(w, "SCALARS {name} int 1")?;
                writeln!(w, "LOOKUP_TABLE default")?;
                for v in values.iter() {
                    writeln!(w, "{v}")?;
                }
            }
        }
    }
    Ok(())
}

/// Ordered `key: value` report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub entries: Vec<(String, String)>,
}

impl Report {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    /// Floats are written in exponent form so that tiny residuals stay short.
    pub fn push_float(&mut self, key: impl Into<String>, value: f64) {
        self.entries.push((key.into(), format!("{value:e}")));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        for (k, v) in &self.entries {
            writeln!(w, "{k}: {v}")?;
        }
        Ok(())
    }

    /// Parses the output of [`Report::write`].
    pub fn parse(text: &str) -> Report {
        Report {
            entries: text
                .lines()
                .filter_map(|l| l.split_once(": "))
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}
