//! Dense linear algebra: correlation matrices, cyclic Jacobi
//! eigendecomposition and least squares through the normal equations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Data(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Data("ragged matrix rows".into()));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Data(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Square symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix(Matrix);

pub const SYMMETRY_TOL: f64 = 1e-9;

impl SymMatrix {
    /// Wraps `m`, rejecting non-square input or asymmetry above `SYMMETRY_TOL`.
    pub fn new(m: Matrix) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::Data(format!("{}x{} matrix is not square", m.rows, m.cols)));
        }
        for i in 0..m.rows {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::Data(format!(
                        "matrix not symmetric at ({i},{j}): {} vs {}",
                        m[(i, j)],
                        m[(j, i)]
                    )));
                }
            }
        }
        Ok(SymMatrix(m))
    }

    pub fn order(&self) -> usize {
        self.0.rows
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        let k = idx.len();
        let mut m = Matrix::zeros(k, k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(a, b)] = self.0[(i, j)];
            }
        }
        SymMatrix(m)
    }

    pub fn trace(&self) -> f64 {
        (0..self.order()).map(|i| self.0[(i, i)]).sum()
    }
}

/// Pearson correlation matrix of equally long columns.
///
/// `names` is used only for error messages.
pub fn correlation_matrix(columns: &[&[f64]], names: &[String]) -> Result<SymMatrix> {
    let p = columns.len();
    let n = columns.first().map_or(0, |c| c.len());
    if n < 2 {
        return Err(Error::Data(format!("correlation needs at least 2 rows, got {n}")));
    }
    let mut centered = Vec::with_capacity(p);
    for (j, c) in columns.iter().enumerate() {
        if c.len() != n {
            return Err(Error::Data("columns differ in length".into()));
        }
        let mean = c.iter().sum::<f64>() / n as f64;
        let d: Vec<f64> = c.iter().map(|v| v - mean).collect();
        let ss = dot(&d, &d);
        if ss <= (f64::EPSILON * mean.abs()).powi(2) * n as f64 || ss == 0.0 {
            let name = names.get(j).cloned().unwrap_or_else(|| format!("#{j}"));
            return Err(Error::Data(format!("column `{name}` has zero variance")));
        }
        let inv = 1.0 / ss.sqrt();
        centered.push(d.into_iter().map(|v| v * inv).collect::<Vec<f64>>());
    }
    let mut m = Matrix::identity(p);
    for i in 0..p {
        for j in 0..i {
            let r = dot(&centered[i], &centered[j]).clamp(-1.0, 1.0);
            m[(i, j)] = r;
            m[(j, i)] = r;
        }
    }
    Ok(SymMatrix(m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    /// Sorted descending.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: Matrix,
    pub sweeps: usize,
}

impl EigenResult {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k)
    }
}

pub const JACOBI_MAX_SWEEPS: usize = 100;
pub const JACOBI_REL_TOL: f64 = 1e-12;

/// Cyclic Jacobi eigendecomposition.
///
/// Sweeps until every off-diagonal entry is below `1e-12 * max|a_ii|` or 100
/// sweeps have run. Each eigenvector is signed so that its largest-magnitude
/// component is positive.
pub fn eigen_sym(m: &SymMatrix) -> Result<EigenResult> {
    let n = m.order();
    let mut a = SymMatrix::new(m.0.clone())?.0;
    let mut v = Matrix::identity(n);
    let mut sweeps = 0;
    while sweeps < JACOBI_MAX_SWEEPS {
        let diag_max = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
        let off_max = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].abs())
            .fold(0.0, f64::max);
        if off_max == 0.0 || off_max < JACOBI_REL_TOL * diag_max {
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        let mut col = v.column(src);
        let mut lead = 0;
        for i in 1..n {
            if col[i].abs() > col[lead].abs() {
                lead = i;
            }
        }
        if n > 0 && col[lead] < 0.0 {
            col.iter_mut().for_each(|x| *x = -*x);
        }
        for i in 0..n {
            vectors[(i, k)] = col[i];
        }
    }
    Ok(EigenResult {
        values,
        vectors,
        sweeps,
    })
}

/// Solves `a x = b` for symmetric positive definite `a` by Cholesky.
/// Returns `None` when a pivot falls below `tol`.
fn cholesky_solve(a: &Matrix, b: &[f64], tol: f64) -> Option<Vec<f64>> {
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > tol) {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Some(x)
}

/// Ridge added to the Gram diagonal when it is singular to working precision.
pub const RIDGE_JITTER: f64 = 1e-10;

/// Solves the SPD system, retrying with `RIDGE_JITTER` (scaled by the largest
/// diagonal entry) on the diagonal when a pivot collapses. The flag reports
/// whether the jitter was used.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<(Vec<f64>, bool)> {
    let n = a.rows;
    let diag_max = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let scale = if diag_max > 0.0 { diag_max } else { 1.0 };
    if let Some(x) = cholesky_solve(a, b, 1e-11 * scale) {
        return Ok((x, false));
    }
    let mut j = a.clone();
    for i in 0..n {
        j[(i, i)] += RIDGE_JITTER * scale;
    }
    cholesky_solve(&j, b, 0.0)
        .map(|x| (x, true))
        .ok_or_else(|| Error::Numerical("matrix is not positive semi-definite".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
    pub jittered: bool,
}

/// Ordinary least squares on a design matrix that already carries its
/// intercept column. `r_squared` is relative to the mean of `y` and is zero
/// when `y` is constant.
pub fn least_squares(x: &Matrix, y: &[f64]) -> Result<LeastSquares> {
    let (n, p) = (x.rows, x.cols);
    if y.len() != n {
        return Err(Error::Data(format!("{} targets for {n} rows", y.len())));
    }
    if n < p {
        return Err(Error::Data(format!("{n} rows cannot fit {p} coefficients")));
    }
    let mut gram = Matrix::zeros(p, p);
    let mut rhs = vec![0.0; p];
    for i in 0..n {
        let row = x.row(i);
        for a in 0..p {
            let ra = row[a];
            rhs[a] += ra * y[i];
            for b in 0..=a {
                gram[(a, b)] += ra * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
    }
    let (mut beta, jittered) = solve_spd(&gram, &rhs)?;

    // one step of iterative refinement against the original residual
    let resid: Vec<f64> = (0..n).map(|i| y[i] - dot(x.row(i), &beta)).collect();
    let mut xtr = vec![0.0; p];
    for i in 0..n {
        for (a, v) in x.row(i).iter().enumerate() {
            xtr[a] += v * resid[i];
        }
    }
    let (delta, _) = solve_spd(&gram_with_jitter(&gram, jittered), &xtr)?;
    for (b, d) in beta.iter_mut().zip(delta) {
        *b += d;
    }

    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ssr: f64 = (0..n).map(|i| (y[i] - dot(x.row(i), &beta)).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { 0.0 };
    Ok(LeastSquares {
        coefficients: beta,
        r_squared,
        jittered,
    })
}

fn gram_with_jitter(gram: &Matrix, jittered: bool) -> Matrix {
    if !jittered {
        return gram.clone();
    }
    let n = gram.rows;
    let diag_max = (0..n).map(|i| gram[(i, i)].abs()).fold(0.0, f64::max);
    let mut g = gram.clone();
    for i in 0..n {
        g[(i, i)] += RIDGE_JITTER * if diag_max > 0.0 { diag_max } else { 1.0 };
    }
    g
}

/// Design matrix `[1, columns...]` in row-major order.
pub fn design_with_intercept(columns: &[&[f64]]) -> Matrix {
    let n = columns.first().map_or(0, |c| c.len());
    let p = columns.len() + 1;
    let mut data = Vec::with_capacity(n * p);
    for i in 0..n {
        data.push(1.0);
        data.extend(columns.iter().map(|c| c[i]));
    }
    Matrix {
        rows: n,
        cols: p,
        data,
    }
}
