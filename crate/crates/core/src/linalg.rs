//! Dense linear-algebra primitives.
//!
//! Matrices here are small (k ≤ 64 rows), so everything is stored densely in
//! row-major order. Symmetric eigendecompositions are delegated to
//! `nalgebra`; the rest (Gram matrices, log-determinants, square roots,
//! signed-permutation matching) is built on top of those eigenpairs.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Negative eigenvalues above `-PSD_TOLERANCE * max(1, λ_1)` are roundoff and get clamped to zero.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// `λ_1 ≥ 1 - BOUNDARY_LOWER` is treated as lying on the boundary of the unit operator ball.
pub const BOUNDARY_LOWER: f64 = 1e-12;

const EIGEN_MAX_ITER: usize = 10_000;

/// Real `rows × cols` matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::InvalidInput(
                "matrix must have at least one row".into(),
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::dims(rows * cols, data.len()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0, "matrix must have at least one row");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::dims(cols, bad.len()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[j * self.rows + i] = self.get(i, j);
            }
        }
        DenseMatrix {
            rows: self.cols,
            cols: self.rows,
            data: t,
        }
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::dims(
                format!("{} rows", self.cols),
                format!("{} rows", other.rows),
            ));
        }
        let mut out = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(l);
                let dst = &mut out[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        DenseMatrix::new(self.rows, other.cols, out)
    }

    /// Matrix-vector product `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "vector length must equal column count");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// The first `k` rows.
    pub fn leading_rows(&self, k: usize) -> Result<DenseMatrix> {
        if k == 0 || k > self.rows {
            return Err(Error::dims(format!("1..={} rows", self.rows), k));
        }
        DenseMatrix::new(k, self.cols, self.data[..k * self.cols].to_vec())
    }

    /// The first `l` columns.
    pub fn leading_cols(&self, l: usize) -> Result<DenseMatrix> {
        if l > self.cols {
            return Err(Error::dims(format!("0..={} columns", self.cols), l));
        }
        let mut data = Vec::with_capacity(self.rows * l);
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[..l]);
        }
        DenseMatrix::new(self.rows, l, data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dims(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        DenseMatrix::new(self.rows, self.cols, data)
    }

    pub fn scaled(&self, factor: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    /// The determinant of a square matrix (LU with partial pivoting).
    pub fn determinant(&self) -> Result<f64> {
        if self.rows != self.cols {
            return Err(Error::dims(
                "square matrix",
                format!("{}x{}", self.rows, self.cols),
            ));
        }
        Ok(self.to_nalgebra().determinant())
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// The columns as a [`ColumnList`], dropping zero columns.
    pub fn to_column_list(&self) -> Result<ColumnList> {
        ColumnList::new(self.rows, (0..self.cols).map(|j| self.column(j)).collect())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A finite list of nonzero columns in `R^k`, standing for a `k × ∞` matrix
/// padded with zero columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnList {
    dim: usize,
    columns: Vec<Vec<f64>>,
}

impl ColumnList {
    /// Zero columns are dropped; they do not change the padded matrix.
    pub fn new(dim: usize, columns: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput(
                "column dimension must be positive".into(),
            ));
        }
        let bound = (dim as f64).sqrt() * (1.0 + 1e-12);
        let mut kept = Vec::with_capacity(columns.len());
        for c in columns {
            if c.len() != dim {
                return Err(Error::dims(dim, c.len()));
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("column entries must be finite".into()));
            }
            let n = norm2(&c);
            if n == 0.0 {
                continue;
            }
            if n > bound {
                return Err(Error::DomainError(format!(
                    "column norm {n} exceeds sqrt(k) = {}",
                    (dim as f64).sqrt()
                )));
            }
            kept.push(c);
        }
        Ok(Self { dim, columns: kept })
    }

    pub fn empty(dim: usize) -> Self {
        assert!(dim > 0);
        Self {
            dim,
            columns: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// The first `l` columns (all of them when `l` exceeds the length).
    pub fn truncated(&self, l: usize) -> ColumnList {
        ColumnList {
            dim: self.dim,
            columns: self.columns.iter().take(l).cloned().collect(),
        }
    }

    /// Appends a column; zero columns are ignored.
    pub fn push(&mut self, column: Vec<f64>) -> Result<()> {
        let extra = ColumnList::new(self.dim, vec![column])?;
        self.columns.extend(extra.columns);
        Ok(())
    }

    /// The `k × len` matrix with these columns (`k × 0` when empty).
    pub fn to_matrix(&self) -> DenseMatrix {
        let m = self.columns.len();
        let mut data = vec![0.0; self.dim * m];
        for (j, c) in self.columns.iter().enumerate() {
            for (i, &x) in c.iter().enumerate() {
                data[i * m + j] = x;
            }
        }
        DenseMatrix {
            rows: self.dim,
            cols: m,
            data,
        }
    }

    /// `A A*` accumulated column by column in list order.
    pub fn gram(&self) -> Result<SymmetricPSD> {
        let k = self.dim;
        let mut upper = vec![0.0; k * k];
        for c in &self.columns {
            for i in 0..k {
                for j in i..k {
                    upper[i * k + j] += c[i] * c[j];
                }
            }
        }
        SymmetricPSD::from_upper(k, upper)
    }

    /// Sum of squared entries.
    pub fn squared_mass(&self) -> f64 {
        self.columns.iter().map(|c| dot(c, c)).sum()
    }
}

/// Symmetric positive semi-definite matrix with its eigenvalues computed at
/// construction time (non-increasing, clamped at zero).
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricPSD {
    dim: usize,
    entries: Vec<f64>,
    eigenvalues: Vec<f64>,
}

impl SymmetricPSD {
    /// Builds from the upper triangle of `entries` (row-major `k × k`); the
    /// lower triangle is overwritten with the mirrored values.
    pub fn from_upper(dim: usize, mut entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::dims(dim * dim, entries.len()));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("entries must be finite".into()));
        }
        for i in 0..dim {
            for j in 0..i {
                entries[i * dim + j] = entries[j * dim + i];
            }
        }
        let (values, _) = eigen_decompose(dim, &entries)?;
        let scale = values.first().copied().unwrap_or(0.0).abs().max(1.0);
        let min = values.last().copied().unwrap_or(0.0);
        if min < -PSD_TOLERANCE * scale {
            return Err(Error::DomainError(format!(
                "matrix is not positive semi-definite (eigenvalue {min})"
            )));
        }
        let eigenvalues = values.into_iter().map(|v| v.max(0.0)).collect();
        Ok(Self {
            dim,
            entries,
            eigenvalues,
        })
    }

    /// Builds from a full matrix that must be exactly symmetric.
    pub fn from_matrix(m: &DenseMatrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::dims(
                "square matrix",
                format!("{}x{}", m.rows(), m.cols()),
            ));
        }
        let k = m.rows();
        for i in 0..k {
            for j in 0..i {
                if m.get(i, j) != m.get(j, i) {
                    return Err(Error::DomainError("matrix is not symmetric".into()));
                }
            }
        }
        Self::from_upper(k, m.as_slice().to_vec())
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![0.0; dim * dim],
            eigenvalues: vec![0.0; dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            entries: DenseMatrix::identity(dim).into_vec(),
            eigenvalues: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix {
            rows: self.dim,
            cols: self.dim,
            data: self.entries.clone(),
        }
    }

    /// Cached eigenvalues, non-increasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `Id - self`, clamping the eigenvalues of the result at zero. Used for
    /// `Id - AA*` when `‖AA*‖ ≤ 1` holds only up to roundoff.
    pub fn complement(&self) -> Result<SymmetricPSD> {
        let k = self.dim;
        let mut upper = vec![0.0; k * k];
        for i in 0..k {
            for j in i..k {
                upper[i * k + j] = if i == j { 1.0 } else { 0.0 } - self.get(i, j);
            }
        }
        let (values, vectors) = eigen_decompose(k, &upper_mirrored(k, upper))?;
        let clamped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
        Ok(reassemble(k, &clamped, &vectors))
    }

    /// Sum of two PSD matrices.
    pub fn add(&self, other: &SymmetricPSD) -> Result<SymmetricPSD> {
        if self.dim != other.dim {
            return Err(Error::dims(self.dim, other.dim));
        }
        let data = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        SymmetricPSD::from_upper(self.dim, data)
    }

    /// `self^{-1/2}` as a dense matrix.
    pub fn inverse_sqrt(&self) -> Result<DenseMatrix> {
        let (values, vectors) = eigen_decompose(self.dim, &self.entries)?;
        let top = values.first().copied().unwrap_or(0.0);
        if values
            .iter()
            .any(|&v| v <= top * 1e-15 || v <= f64::MIN_POSITIVE)
        {
            return Err(Error::NumericalFailure("matrix is singular".into()));
        }
        let inv: Vec<f64> = values.iter().map(|v| 1.0 / v.sqrt()).collect();
        Ok(reassemble(self.dim, &inv, &vectors).to_dense())
    }
}

fn upper_mirrored(k: usize, mut entries: Vec<f64>) -> Vec<f64> {
    for i in 0..k {
        for j in 0..i {
            entries[i * k + j] = entries[j * k + i];
        }
    }
    entries
}

/// `Q diag(values) Q*` with symmetric storage. Skips the eigen-solve in the
/// constructor because the spectrum is already known.
fn reassemble(k: usize, values: &[f64], vectors: &DenseMatrix) -> SymmetricPSD {
    let mut upper = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let mut s = 0.0;
            for (l, &v) in values.iter().enumerate() {
                s += vectors.get(i, l) * v * vectors.get(j, l);
            }
            upper[i * k + j] = s;
        }
    }
    let entries = upper_mirrored(k, upper);
    let mut eigenvalues = values.to_vec();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    SymmetricPSD {
        dim: k,
        entries,
        eigenvalues,
    }
}

/// Eigenpairs of a symmetric matrix: values non-increasing, vectors as the
/// matching columns of the returned matrix.
fn eigen_decompose(k: usize, entries: &[f64]) -> Result<(Vec<f64>, DenseMatrix)> {
    if k == 1 {
        return Ok((vec![entries[0]], DenseMatrix::identity(1)));
    }
    let m = DMatrix::from_row_slice(k, k, entries);
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DenseMatrix::zeros(k, k);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..k {
            vectors.set(i, dst, eig.eigenvectors[(i, src)]);
        }
    }
    Ok((values, vectors))
}

/// `A A*`, accumulated left to right over the columns.
pub fn gram(a: &DenseMatrix) -> SymmetricPSD {
    let k = a.rows();
    let mut upper = vec![0.0; k * k];
    for i in 0..k {
        let ri = a.row(i);
        for j in i..k {
            upper[i * k + j] = dot(ri, a.row(j));
        }
    }
    // A Gram matrix is PSD by construction; only a failed eigensolve can error.
    SymmetricPSD::from_upper(k, upper).expect("Gram matrix eigendecomposition failed")
}

/// Eigenvalues of `s`, non-increasing.
pub fn sym_eigenvalues(s: &SymmetricPSD) -> Vec<f64> {
    s.eigenvalues().to_vec()
}

/// Full eigendecomposition `(λ, Q)` with `s = Q diag(λ) Q*`.
pub fn sym_eigen(s: &SymmetricPSD) -> Result<(Vec<f64>, DenseMatrix)> {
    let (values, vectors) = eigen_decompose(s.dim(), s.entries())?;
    Ok((values.into_iter().map(|v| v.max(0.0)).collect(), vectors))
}

/// `Σ log(1 - λ_i)`, or `-∞` once `λ_1` reaches the unit boundary.
pub fn log_det_complement(s: &SymmetricPSD) -> f64 {
    let top = operator_norm(s);
    if top >= 1.0 - BOUNDARY_LOWER {
        return f64::NEG_INFINITY;
    }
    s.eigenvalues().iter().map(|&l| (-l).ln_1p()).sum()
}

/// The PSD square root `R` with `R R = S`.
pub fn psd_sqrt(s: &SymmetricPSD) -> Result<SymmetricPSD> {
    let (values, vectors) = sym_eigen(s)?;
    let roots: Vec<f64> = values.iter().map(|v| v.sqrt()).collect();
    Ok(reassemble(s.dim(), &roots, &vectors))
}

pub fn operator_norm(s: &SymmetricPSD) -> f64 {
    s.eigenvalues().first().copied().unwrap_or(0.0)
}

/// Whether the columns of `p` and `q` agree up to a signed permutation, each
/// column matched to `±` its partner within Euclidean distance `tol`.
///
/// Columns are sorted by norm and only pairs with compatible norms are
/// considered; the matching itself is an augmenting-path bipartite search,
/// which settles ties between equal-norm columns exhaustively.
pub fn signed_permutation_equal(p: &ColumnList, q: &ColumnList, tol: f64) -> Result<bool> {
    if p.dim() != q.dim() {
        return Err(Error::dims(p.dim(), q.dim()));
    }
    if p.len() != q.len() {
        return Ok(false);
    }
    fn sort(cl: &ColumnList) -> Vec<(f64, &Vec<f64>)> {
        let mut cols: Vec<(f64, &Vec<f64>)> = cl.columns().iter().map(|c| (norm2(c), c)).collect();
        cols.sort_by(|a, b| {
            b.0.total_cmp(&a.0).then_with(|| {
                let aa = a.1.iter().map(|x| x.abs());
                let bb = b.1.iter().map(|x| x.abs());
                aa.zip(bb)
                    .map(|(x, y)| x.total_cmp(&y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        });
        cols
    }
    let ps = sort(p);
    let qs = sort(q);
    let n = ps.len();
    let close = |a: &[f64], b: &[f64]| {
        let minus: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let plus: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x + y).powi(2))
            .sum::<f64>()
            .sqrt();
        minus.min(plus) <= tol
    };
    // Candidate partners: only columns whose norms differ by at most tol.
    let adjacency: Vec<Vec<usize>> = ps
        .iter()
        .map(|(np, cp)| {
            qs.iter()
                .enumerate()
                .filter(|(_, (nq, cq))| (np - nq).abs() <= tol && close(cp, cq))
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    if adjacency.iter().any(Vec::is_empty) {
        return Ok(false);
    }
    let mut owner: Vec<Option<usize>> = vec![None; n];
    fn augment(
        i: usize,
        adjacency: &[Vec<usize>],
        owner: &mut [Option<usize>],
        seen: &mut [bool],
    ) -> bool {
        for &j in &adjacency[i] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none_or(|o| augment(o, adjacency, owner, seen)) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }
    for i in 0..n {
        let mut seen = vec![false; n];
        if !augment(i, &adjacency, &mut owner, &mut seen) {
            return Ok(false);
        }
    }
    Ok(true)
}
