//! Sparse symmetric storage and the SPD solvers for the condensed system.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest system accepted by the dense Cholesky path.
pub const DENSE_LIMIT: usize = 2000;

const PARALLEL_MATVEC: usize = 20_000;

/// Structurally symmetric sparse matrix in CSR form. Both triangles are
/// stored so that matrix-vector products need no transposed access.
#[derive(Debug, Clone)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSym {
    /// Builds the matrix from `(row, col, value)` triplets; duplicates are
    /// summed. Fails if the sparsity pattern is not symmetric or an entry is
    /// not finite.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; n + 1];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!("entry ({i}, {j}) outside {n}x{n}")));
            }
            if !v.is_finite() {
                return Err(Error::Numerical(format!("non-finite matrix entry at ({i}, {j})")));
            }
            counts[i + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut raw = vec![(0usize, 0.0f64); triplets.len()];
        for &(i, j, v) in triplets {
            raw[fill[i]] = (j, v);
            fill[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for i in 0..n {
            let row = &mut raw[counts[i]..counts[i + 1]];
            row.sort_by_key(|e| e.0);
            for &(j, v) in row.iter() {
                if cols.len() > row_ptr[i] && *cols.last().unwrap() == j {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        let m = SparseSym {
            n,
            row_ptr,
            cols,
            vals,
        };
        for i in 0..n {
            for &j in m.row_cols(i) {
                if m.find(j, i).is_none() {
                    return Err(Error::InvalidArgument(format!(
                        "pattern not symmetric: ({i}, {j}) stored without ({j}, {i})"
                    )));
                }
            }
        }
        Ok(m)
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        let mut t = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != 0.0 || i == j {
                    t.push((i, j, a[(i, j)]));
                }
            }
        }
        SparseSym::from_triplets(a.nrows(), &t)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn row_cols(&self, i: usize) -> &[usize] {
        &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    fn find(&self, i: usize, j: usize) -> Option<usize> {
        self.row_cols(i).binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.find(i, j).map_or(0.0, |k| self.vals[k])
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        let row = |i: usize| -> f64 { self.row(i).map(|(j, v)| v * x[j]).sum() };
        if self.n > PARALLEL_MATVEC {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = row(i);
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |a_ij - a_ji| / max |a_ij|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d = d.max((v - self.get(j, i)).abs());
            }
        }
        d / self.max_abs().max(f64::MIN_POSITIVE)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                a[(i, j)] = v;
            }
        }
        a
    }

    /// Necessary conditions for positive definiteness: positive diagonal and
    /// positive 2x2 principal minors on every stored off-diagonal pair.
    pub fn screen_spd(&self) -> Result<()> {
        let diag = self.diagonal();
        for (i, &d) in diag.iter().enumerate() {
            if !(d > 0.0) {
                return Err(Error::NotSpd(format!("diagonal entry {i} is {d:e}")));
            }
        }
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                if j > i && diag[i] * diag[j] - v * self.get(j, i) <= 0.0 {
                    return Err(Error::NotSpd(format!("principal minor ({i}, {j}) is not positive")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    /// Relative residual target `|Ax - b| / |b|`.
    pub tol: f64,
    /// Defaults to `20 n` when `None`.
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            tol: 1e-12,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Recomputed relative residual of the returned `x`.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `b - A x` with compensated products and sums, accurate well below the
/// rounding level of a plain matrix-vector product.
fn residual(a: &SparseSym, x: &[f64], b: &[f64], r: &mut [f64]) {
    let row = |i: usize| {
        let (mut s, mut c) = (b[i], 0.0);
        for (j, v) in a.row(i) {
            let p = -v * x[j];
            let ep = (-v).mul_add(x[j], -p);
            let (t, e) = two_sum(s, p);
            s = t;
            c += e + ep;
        }
        s + c
    };
    if a.dim() > PARALLEL_MATVEC {
        r.par_iter_mut().enumerate().for_each(|(i, ri)| *ri = row(i));
    } else {
        r.iter_mut().enumerate().for_each(|(i, ri)| *ri = row(i));
    }
}

/// Normwise backward error accepted as "solved to working precision".
const ROUNDING_BACKWARD_ERROR: f64 = 64.0 * f64::EPSILON;

/// Whether `|r| / (|A| |x| + |b|)` (infinity norms) is at rounding level,
/// i.e. `x` solves the system to working precision. A double-precision
/// iterate cannot push the residual much below `eps |A| |x|`.
fn at_rounding_floor(a: &SparseSym, x: &[f64], b: &[f64], r: &[f64]) -> bool {
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let a_inf = (0..a.dim()).map(|i| a.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    inf(r) <= ROUNDING_BACKWARD_ERROR * (a_inf * inf(x) + inf(b))
}

/// Jacobi-preconditioned conjugate gradients.
///
/// When the recursive residual reaches the target the true residual is
/// recomputed with compensated arithmetic; CG restarts from the current
/// iterate if the two disagree, which amounts to iterative refinement.
/// An iterate whose backward error is at rounding level is returned even if
/// the target is not met; the report carries the residual actually reached.
pub fn solve_spd(a: &SparseSym, b: &[f64], opts: CgOptions) -> Result<SolveReport> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::InvalidArgument(format!("rhs has length {}, expected {n}", b.len())));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite right-hand side".into()));
    }
    a.screen_spd()?;
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(SolveReport {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let max_iter = opts.max_iter.unwrap_or(20 * n.max(1));
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let mut restarts = 0;

    'outer: loop {
        for i in 0..n {
            z[i] = inv_diag[i] * r[i];
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        loop {
            if rz == 0.0 || norm(&r) <= opts.tol * bnorm {
                break;
            }
            if iterations >= max_iter {
                residual(a, &x, b, &mut r);
                if at_rounding_floor(a, &x, b, &r) {
                    return Ok(SolveReport {
                        x,
                        iterations,
                        residual: norm(&r) / bnorm,
                    });
                }
                return Err(Error::NotConverged {
                    iterations,
                    residual: norm(&r) / bnorm,
                });
            }
            a.mul_vec(&p, &mut ap);
            let curvature = dot(&p, &ap);
            if !(curvature > 0.0) {
                return Err(Error::NotSpd(format!(
                    "non-positive curvature {curvature:e} at iteration {iterations}"
                )));
            }
            let step = rz / curvature;
            for i in 0..n {
                x[i] += step * p[i];
                r[i] -= step * ap[i];
            }
            for i in 0..n {
                z[i] = inv_diag[i] * r[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            iterations += 1;
        }
        residual(a, &x, b, &mut r);
        let rel = norm(&r) / bnorm;
        if rel <= opts.tol || at_rounding_floor(a, &x, b, &r) {
            return Ok(SolveReport {
                x,
                iterations,
                residual: rel,
            });
        }
        restarts += 1;
        if restarts > 10 {
            break 'outer;
        }
    }
    Err(Error::NotConverged {
        iterations,
        residual: norm(&r) / bnorm,
    })
}

/// Dense Cholesky solve; used as an oracle and SPD certificate for small
/// systems.
pub fn solve_dense_cholesky(a: &SparseSym, b: &[f64]) -> Result<Vec<f64>> {
    if a.dim() > DENSE_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "dense path limited to n <= {DENSE_LIMIT}, got {}",
            a.dim()
        )));
    }
    let dense = a.to_dense();
    let sym = (&dense + dense.transpose()) * 0.5;
    let chol = sym
        .cholesky()
        .ok_or_else(|| Error::NotSpd("Cholesky factorization failed".into()))?;
    Ok(chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec())
}

/// Whether the symmetric part of `a` admits a Cholesky factorization.
pub fn is_spd_dense(a: &SparseSym) -> bool {
    let dense = a.to_dense();
    ((&dense + dense.transpose()) * 0.5).cholesky().is_some()
}
