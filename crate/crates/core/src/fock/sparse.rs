use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex sparse matrix in sorted coordinate form, duplicates merged.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    /// Sorted by `(row, col)`.
    entries: Vec<(usize, usize, Complex64)>,
    hermitian: bool,
}

impl SparseOperator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
            hermitian: true,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Self {
            dim: diag.len(),
            entries: diag
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i, i, Complex64::new(*v, 0.0)))
                .collect(),
            hermitian: true,
        }
    }

    /// Sorts, merges duplicates and drops exact zeros.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut entries: Vec<(usize, usize, Complex64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            debug_assert!(r < dim && c < dim);
            match entries.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => entries.push((r, c, v)),
            }
        }
        entries.retain(|e| e.2 != Complex64::new(0.0, 0.0));
        Self {
            dim,
            entries,
            hermitian: false,
        }
    }

    pub fn from_dense(m: &DMatrix<Complex64>, tol: f64) -> Self {
        let mut triplets = Vec::new();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                let v = m[(r, c)];
                if v.norm() > tol {
                    triplets.push((r, c, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), triplets)
    }

    /// Marks the operator as Hermitian; checked by `max_hermitian_defect`.
    pub fn flag_hermitian(mut self) -> Self {
        self.hermitian = true;
        self
    }

    pub fn is_flagged_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(r, c)))
            .map(|i| self.entries[i].2)
            .unwrap_or_default()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.dim,
            self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())).collect(),
        )
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_triplets(
            self.dim,
            self.entries.iter().map(|&(r, c, v)| (r, c, v * s)).collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut t = self.entries.clone();
        t.extend_from_slice(&other.entries);
        let mut out = Self::from_triplets(self.dim, t);
        out.hermitian = self.hermitian && other.hermitian;
        Ok(out)
    }

    /// Sum of operators of equal dimension.
    pub fn sum<'a>(dim: usize, ops: impl IntoIterator<Item = &'a SparseOperator>) -> Result<Self> {
        let mut t = Vec::new();
        for op in ops {
            if op.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: op.dim,
                });
            }
            t.extend_from_slice(&op.entries);
        }
        Ok(Self::from_triplets(dim, t))
    }

    pub fn matvec(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        let mut y = DVector::zeros(self.dim);
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    /// `max |M_rc - conj(M_cr)|` over all entries.
    pub fn max_hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for &(r, c, v) in &self.entries {
            worst = worst.max((v - self.get(c, r).conj()).norm());
        }
        worst
    }

    pub fn to_csr(&self) -> Csr {
        let mut row_ptr = vec![0usize; self.dim + 1];
        for &(r, _, _) in &self.entries {
            row_ptr[r + 1] += 1;
        }
        for i in 0..self.dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr {
            dim: self.dim,
            row_ptr,
            cols: self.entries.iter().map(|e| e.1).collect(),
            vals: self.entries.iter().map(|e| e.2).collect(),
        }
    }

    /// Matrix-Market coordinate format, complex general, 1-based indices.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate complex general")?;
        writeln!(w, "{} {} {}", self.dim, self.dim, self.entries.len())?;
        for &(r, c, v) in &self.entries {
            writeln!(w, "{} {} {:e} {:e}", r + 1, c + 1, v.re, v.im)?;
        }
        Ok(())
    }
}

/// Compressed-row view used by the iterative solvers.
#[derive(Debug, Clone)]
pub struct Csr {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<Complex64>,
}

impl Csr {
    /// Rows are summed in stored order, so results do not depend on threads.
    pub fn matvec(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        DVector::from_iterator(
            self.dim,
            (0..self.dim).map(|r| {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.vals[i] * x[self.cols[i]];
                }
                acc
            }),
        )
    }
}
