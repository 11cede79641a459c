//! Dense and sparse vector kernels plus the matrix-free coupling operator.
//!
//! Every reduction accumulates in ascending index order so that repeated
//! calls on identical inputs are bit-identical.

use crate::error::{check_dim, Error, Result};
use nalgebra::DMatrix;

/// A dense real vector. Dimension is the length.
pub type DenseVec = Vec<f64>;

/// `Σ a_i b_i`, checked.
pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    Ok(inner(a, b))
}

/// Returns `y + alpha * x`, checked.
pub fn axpy(alpha: f64, x: &[f64], y: &[f64]) -> Result<DenseVec> {
    check_dim(y.len(), x.len())?;
    let mut out = y.to_vec();
    add_scaled(&mut out, alpha, x);
    Ok(out)
}

/// `Σ_k values[k] * w[indices[k]]`, checked.
pub fn sparse_dot(row: &SparseRow, w: &[f64]) -> Result<f64> {
    check_dim(row.dim, w.len())?;
    Ok(row.dot_dense(w))
}

/// Unchecked inner product.
#[inline]
pub fn inner(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    inner(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn norm_l1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

/// `‖a − b‖²`.
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// `y += alpha * x` in place.
#[inline]
pub fn add_scaled(y: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `a − b`.
pub fn sub(a: &[f64], b: &[f64]) -> DenseVec {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `alpha * a`.
pub fn scaled(alpha: f64, a: &[f64]) -> DenseVec {
    a.iter().map(|x| alpha * x).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// A sparse row with strictly increasing 0-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    indices: Vec<usize>,
    values: Vec<f64>,
    dim: usize,
}

impl SparseRow {
    pub fn new(indices: Vec<usize>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "sparse row dimension must be positive".into(),
            ));
        }
        check_dim(indices.len(), values.len())?;
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "sparse indices must be strictly increasing".into(),
            ));
        }
        if indices.last().is_some_and(|&i| i >= dim) {
            return Err(Error::InvalidParameter(format!(
                "sparse index out of range for dimension {dim}"
            )));
        }
        if !all_finite(&values) {
            return Err(Error::InvalidParameter(
                "sparse values must be finite".into(),
            ));
        }
        Ok(Self {
            indices,
            values,
            dim,
        })
    }

    /// Stores every entry of `dense`, including zeros.
    pub fn from_dense(dense: &[f64]) -> Result<Self> {
        Self::new((0..dense.len()).collect(), dense.to_vec(), dense.len())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Changes the declared dimension; fails if an index would fall outside.
    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        if dim == 0 || self.indices.last().is_some_and(|&i| i >= dim) {
            return Err(Error::InvalidParameter(format!(
                "dimension {dim} too small for row"
            )));
        }
        self.dim = dim;
        Ok(self)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    pub(crate) fn dot_dense(&self, w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            acc += v * w[i];
        }
        acc
    }

    /// `y += alpha * row`.
    pub(crate) fn add_scaled_into(&self, y: &mut [f64], alpha: f64) {
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            y[i] += alpha * v;
        }
    }
}

/// The coupling operator `K`, mapping the dual space `R^q` into the range of `F`, `R^m`.
pub trait LinearOperator: Send + Sync + std::fmt::Debug {
    /// Dimension `q` of the vectors `K` acts on.
    fn domain_dim(&self) -> usize;
    /// Dimension `m` of `K u`.
    fn range_dim(&self) -> usize;
    /// `K u`.
    fn apply(&self, u: &[f64]) -> DenseVec;
    /// `Kᵀ v`.
    fn apply_transpose(&self, v: &[f64]) -> DenseVec;
    /// An upper bound on the spectral norm `‖K‖`.
    fn norm_bound(&self) -> f64;
}

/// The identity on `R^dim`.
#[derive(Debug, Clone)]
pub struct IdentityOperator {
    dim: usize,
}

impl IdentityOperator {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl LinearOperator for IdentityOperator {
    fn domain_dim(&self) -> usize {
        self.dim
    }
    fn range_dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, u: &[f64]) -> DenseVec {
        u.to_vec()
    }
    fn apply_transpose(&self, v: &[f64]) -> DenseVec {
        v.to_vec()
    }
    fn norm_bound(&self) -> f64 {
        1.0
    }
}

/// An explicit `m × q` matrix with its exact spectral norm.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    matrix: DMatrix<f64>,
    norm: f64,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::InvalidParameter("operator must be non-empty".into()));
        }
        if !matrix.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter(
                "operator entries must be finite".into(),
            ));
        }
        let norm = spectral_norm(&matrix);
        Ok(Self { matrix, norm })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl LinearOperator for DenseOperator {
    fn domain_dim(&self) -> usize {
        self.matrix.ncols()
    }
    fn range_dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn apply(&self, u: &[f64]) -> DenseVec {
        matvec(&self.matrix, u)
    }
    fn apply_transpose(&self, v: &[f64]) -> DenseVec {
        matvec_transpose(&self.matrix, v)
    }
    fn norm_bound(&self) -> f64 {
        self.norm
    }
}

/// Largest singular value.
pub fn spectral_norm(matrix: &DMatrix<f64>) -> f64 {
    if matrix.is_empty() {
        return 0.0;
    }
    matrix.singular_values().max()
}

/// `M x` with ascending-index accumulation.
pub fn matvec(matrix: &DMatrix<f64>, x: &[f64]) -> DenseVec {
    debug_assert_eq!(matrix.ncols(), x.len());
    let mut out = vec![0.0; matrix.nrows()];
    for (r, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, xc) in x.iter().enumerate() {
            acc += matrix[(r, c)] * xc;
        }
        *o = acc;
    }
    out
}

/// `Mᵀ y` with ascending-index accumulation.
pub fn matvec_transpose(matrix: &DMatrix<f64>, y: &[f64]) -> DenseVec {
    debug_assert_eq!(matrix.nrows(), y.len());
    let mut out = vec![0.0; matrix.ncols()];
    for (c, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (r, yr) in y.iter().enumerate() {
            acc += matrix[(r, c)] * yr;
        }
        *o = acc;
    }
    out
}
