//! Lagrange bases on the reference triangle and interval.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Highest cell degree; degree 3 is only used by the pressure postprocessing
/// at `k = 2`.
pub const MAX_CELL_DEGREE: usize = 3;

pub fn cell_dim(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Nodal basis of `P_k` on the reference triangle.
///
/// For `k >= 1` the nodes are the equispaced lattice `(i/k, j/k)` ordered by
/// `j` then `i`, so the first three nodes of `P_1` are the vertices. `P_0`
/// is the constant function.
#[derive(Debug, Clone)]
pub struct CellBasis {
    degree: usize,
    exponents: Vec<(i32, i32)>,
    /// `coeffs[(m, a)]`: coefficient of monomial `m` in basis function `a`.
    coeffs: DMatrix<f64>,
}

impl CellBasis {
    pub fn new(degree: usize) -> Result<Self> {
        if degree > MAX_CELL_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "cell basis degree {degree} not supported (max {MAX_CELL_DEGREE})"
            )));
        }
        let exponents: Vec<(i32, i32)> = (0..=degree as i32)
            .flat_map(|total| (0..=total).map(move |q| (total - q, q)))
            .collect();
        let nodes = Self::nodes(degree);
        let n = exponents.len();
        let vandermonde = DMatrix::from_fn(n, n, |a, m| {
            let (p, q) = exponents[m];
            nodes[a][0].powi(p) * nodes[a][1].powi(q)
        });
        let coeffs = vandermonde
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular Vandermonde matrix".into()))?;
        Ok(CellBasis {
            degree,
            exponents,
            coeffs,
        })
    }

    pub fn nodes(degree: usize) -> Vec<[f64; 2]> {
        if degree == 0 {
            return vec![[1.0 / 3.0, 1.0 / 3.0]];
        }
        let k = degree as f64;
        (0..=degree)
            .flat_map(|j| (0..=degree - j).map(move |i| [i as f64 / k, j as f64 / k]))
            .collect()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn values(&self, xi: [f64; 2]) -> Vec<f64> {
        let mono: Vec<f64> = self
            .exponents
            .iter()
            .map(|&(p, q)| xi[0].powi(p) * xi[1].powi(q))
            .collect();
        (0..self.dim())
            .map(|a| (0..self.dim()).map(|m| mono[m] * self.coeffs[(m, a)]).sum())
            .collect()
    }

    /// Values and reference gradients of all basis functions at `xi`.
    pub fn eval(&self, xi: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let n = self.dim();
        let pw = |x: f64, e: i32| if e < 0 { 0.0 } else { x.powi(e) };
        let mut mono = vec![0.0; n];
        let mut dmono = vec![[0.0; 2]; n];
        for (m, &(p, q)) in self.exponents.iter().enumerate() {
            mono[m] = pw(xi[0], p) * pw(xi[1], q);
            dmono[m] = [
                p as f64 * pw(xi[0], p - 1) * pw(xi[1], q),
                q as f64 * pw(xi[0], p) * pw(xi[1], q - 1),
            ];
        }
        let mut values = vec![0.0; n];
        let mut grads = vec![[0.0; 2]; n];
        for a in 0..n {
            for m in 0..n {
                let c = self.coeffs[(m, a)];
                values[a] += c * mono[m];
                grads[a][0] += c * dmono[m][0];
                grads[a][1] += c * dmono[m][1];
            }
        }
        (values, grads)
    }
}

/// Values and reference gradients of the degree-`k` cell basis at `xi`.
pub fn eval_cell_basis(k: usize, xi: [f64; 2]) -> Result<(Vec<f64>, Vec<[f64; 2]>)> {
    Ok(CellBasis::new(k)?.eval(xi))
}

/// Nodal basis of `P_k` on `[0, 1]` with equispaced nodes.
#[derive(Debug, Clone, Copy)]
pub struct FacetBasis {
    degree: usize,
}

impl FacetBasis {
    pub fn new(degree: usize) -> Result<Self> {
        if degree > MAX_CELL_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "facet basis degree {degree} not supported"
            )));
        }
        Ok(FacetBasis { degree })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn values(&self, t: f64) -> Vec<f64> {
        if self.degree == 0 {
            return vec![1.0];
        }
        let k = self.degree as f64;
        let nodes: Vec<f64> = (0..=self.degree).map(|i| i as f64 / k).collect();
        (0..=self.degree)
            .map(|i| {
                (0..=self.degree)
                    .filter(|&j| j != i)
                    .map(|j| (t - nodes[j]) / (nodes[i] - nodes[j]))
                    .product()
            })
            .collect()
    }
}
