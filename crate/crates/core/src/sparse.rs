//! Compressed sparse storage and a reusable sparse LU wrapper.

use std::ops::{Add, Mul};
use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::MatMut;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("matrix is singular")]
    Singular,
    #[error("sparsity pattern does not match the symbolic analysis")]
    PatternMismatch,
    #[error("factorization failed: {0}")]
    Backend(String),
}

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T> CsrMatrix<T>
where
    T: Copy + Default + Add<Output = T>,
{
    /// Builds from triplets, summing duplicates. Explicit zeros are kept.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut raw: Vec<(usize, T)> = vec![(0, T::default()); triplets.len()];
        for &(i, j, v) in triplets {
            raw[next[i]] = (j, v);
            next[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for i in 0..nrows {
            let row = &mut raw[counts[i]..counts[i + 1]];
            row.sort_by_key(|e| e.0);
            for &(j, v) in row.iter() {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == j {
                    let last = values.len() - 1;
                    values[last] = values[last] + v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    /// Storage position of entry (i, j), if it is structurally present.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.position(i, j).map_or(T::default(), |p| self.values[p])
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn to_triplets(&self) -> Vec<(usize, usize, T)> {
        (0..self.nrows).flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v))).collect()
    }

    /// Rows `rows` with columns remapped by `col_map` (unmapped columns dropped). Explicit zeros are kept.
    pub fn select(&self, rows: &[usize], col_map: &[Option<usize>], ncols: usize) -> CsrMatrix<T> {
        let mut trip = Vec::new();
        for (r, &i) in rows.iter().enumerate() {
            for (j, v) in self.row(i) {
                if let Some(c) = col_map[j] {
                    trip.push((r, c, v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), ncols, &trip)
    }

    /// Same pattern, values mapped through `f`.
    pub fn map<U: Copy + Default + Add<Output = U>>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl<T> CsrMatrix<T>
where
    T: Copy + Default + Add<Output = T> + Mul<Output = T>,
{
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).fold(T::default(), |acc, (j, v)| acc + v * x[j]))
            .collect()
    }
}

/// Compressed sparse column real matrix in the layout the LU backend consumes.
#[derive(Clone, Debug, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Builds from triplets, summing duplicates and keeping explicit zeros.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let swapped: Vec<(usize, usize, f64)> = triplets.iter().map(|&(i, j, v)| (j, i, v)).collect();
        let t = CsrMatrix::from_triplets(ncols, nrows, &swapped);
        Self { nrows, ncols, col_ptr: t.row_ptr, row_idx: t.col_idx, values: t.values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (self.col_ptr[j], self.col_ptr[j + 1]);
        self.row_idx[lo..hi].binary_search(&i).map_or(0.0, |k| self.values[lo + k])
    }

    pub fn same_pattern(&self, other: &CscMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.col_ptr == other.col_ptr
            && self.row_idx == other.row_idx
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for j in 0..self.ncols {
            let xj = x[j];
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[k]] += self.values[k] * xj;
            }
        }
        y
    }

    pub fn to_dense(&self) -> crate::dense::DenseMatrix {
        let mut d = crate::dense::DenseMatrix::zeros(self.nrows, self.ncols);
        for j in 0..self.ncols {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                d[(self.row_idx[k], j)] += self.values[k];
            }
        }
        d
    }

    fn as_faer(&self) -> SparseColMatRef<'_, usize, f64> {
        let sym = SymbolicSparseColMatRef::new_checked(self.nrows, self.ncols, &self.col_ptr, None, &self.row_idx);
        SparseColMatRef::new(sym, &self.values)
    }
}

/// Symbolic LU analysis for one fixed sparsity pattern.
#[derive(Clone, Debug)]
pub struct LuSymbolic {
    pattern: Arc<CscMatrix>,
    inner: SymbolicLu<usize>,
}

impl LuSymbolic {
    pub fn analyze(a: &CscMatrix) -> Result<Self, SparseError> {
        if a.nrows != a.ncols {
            return Err(SparseError::Backend("square matrix expected".into()));
        }
        let inner = SymbolicLu::try_new(a.as_faer().symbolic()).map_err(|e| SparseError::Backend(format!("{e:?}")))?;
        let mut pattern = a.clone();
        pattern.values.iter_mut().for_each(|v| *v = 0.0);
        Ok(Self { pattern: Arc::new(pattern), inner })
    }

    pub fn matches(&self, a: &CscMatrix) -> bool {
        self.pattern.same_pattern(a)
    }
}

/// Numeric sparse LU factorization of a square real matrix.
#[derive(Clone, Debug)]
pub struct SparseLu {
    n: usize,
    inner: Lu<usize, f64>,
}

impl SparseLu {
    /// Factors `a`, analysing the pattern from scratch.
    pub fn factor(a: &CscMatrix) -> Result<Self, SparseError> {
        let sym = LuSymbolic::analyze(a)?;
        Self::factor_with(&sym, a)
    }

    /// Factors `a` reusing a symbolic analysis of the same pattern.
    pub fn factor_with(symbolic: &LuSymbolic, a: &CscMatrix) -> Result<Self, SparseError> {
        if !symbolic.matches(a) {
            return Err(SparseError::PatternMismatch);
        }
        let inner = Lu::try_new_with_symbolic(symbolic.inner.clone(), a.as_faer()).map_err(|_| SparseError::Singular)?;
        let lu = Self { n: a.nrows, inner };
        lu.check_nonsingular(a)?;
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        if self.n == 0 {
            return;
        }
        let rhs = MatMut::from_column_major_slice_mut(x, self.n, 1);
        self.inner.solve_in_place(rhs);
    }

    fn check_nonsingular(&self, a: &CscMatrix) -> Result<(), SparseError> {
        if self.n == 0 {
            return Ok(());
        }
        let z: Vec<f64> = (0..self.n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7548776662466927).fract()).collect();
        let b = a.mul_vec(&z);
        let x = self.solve(&b);
        let mut err = 0.0f64;
        let mut nz = 0.0f64;
        for (xi, zi) in x.iter().zip(&z) {
            if !xi.is_finite() {
                return Err(SparseError::Singular);
            }
            err = err.max((xi - zi).abs());
            nz = nz.max(zi.abs());
        }
        if err > 1e-6 * nz {
            return Err(SparseError::Singular);
        }
        Ok(())
    }
}
