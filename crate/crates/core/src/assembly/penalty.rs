use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CellClass;

/// Penalty parameters of the stabilization function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub c_b: f64,
    pub s_b: f64,
    pub c_c: f64,
    pub s_c: f64,
    /// Characteristic length `L`.
    pub length: f64,
    /// Optional multiplier applied to the stabilization on every cell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_scale: Option<f64>,
}

impl PenaltyParams {
    /// `C_b = C_c = 1`, `s_b = 0`, `s_c = 2` for `k = 0` and `3` otherwise.
    pub fn defaults(degree: usize, length: f64) -> Self {
        PenaltyParams {
            c_b: 1.0,
            s_b: 0.0,
            c_c: 1.0,
            s_c: if degree == 0 { 2.0 } else { 3.0 },
            length,
            global_scale: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, v: f64| Error::Config(format!("penalty parameter {name} = {v} is out of range"));
        if !(self.c_b > 0.0 && self.c_b.is_finite()) {
            return Err(bad("c_b", self.c_b));
        }
        if !(self.c_c > 0.0 && self.c_c.is_finite()) {
            return Err(bad("c_c", self.c_c));
        }
        if !(self.s_b >= 0.0 && self.s_b.is_finite()) {
            return Err(bad("s_b", self.s_b));
        }
        if !(self.s_c >= 0.0 && self.s_c.is_finite()) {
            return Err(bad("s_c", self.s_c));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(bad("length", self.length));
        }
        if let Some(g) = self.global_scale {
            if !(g > 0.0 && g.is_finite()) {
                return Err(bad("global_scale", g));
            }
        }
        Ok(())
    }
}

/// Stabilization `alpha` on a cell of diameter `h` and matrix permeability
/// `k_m`: `k_m` on regular cells, `C_b (h/L)^{s_b} k_m` on blocking cells
/// and `C_c (h/L)^{-s_c} k_m` on conductive cells.
pub fn stabilization(h: f64, class: CellClass, params: &PenaltyParams, k_m: f64) -> f64 {
    let ratio = h / params.length;
    let alpha = match class {
        CellClass::Regular => k_m,
        CellClass::Blocking => params.c_b * ratio.powf(params.s_b) * k_m,
        CellClass::Conductive => params.c_c * ratio.powf(-params.s_c) * k_m,
    };
    alpha * params.global_scale.unwrap_or(1.0)
}
