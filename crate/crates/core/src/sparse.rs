//! Compressed sparse row storage for square weighted adjacency-like matrices.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::matrix::{Matrix, OpTally};

/// Square CSR matrix with sorted column indices in every row.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    pub fn empty(n: usize) -> Self {
        Self {
            offsets: vec![0; n + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds an `n x n` matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; n + 1];
        for &(r, c, _) in triplets {
            if r >= n || c >= n {
                bail!(Validation, "entry ({}, {}) outside a {}-node matrix", r, c, n);
            }
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut cursor = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[cursor[r]] = c;
            vals[cursor[r]] = v;
            cursor[r] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        offsets.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            row.clear();
            row.extend((counts[i]..counts[i + 1]).map(|p| (cols[p], vals[p])));
            row.sort_by_key(|&(c, _)| c);
            for &(c, v) in row.iter() {
                if indices.len() > offsets[i] && *indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        Ok(Self {
            offsets,
            indices,
            values,
        })
    }

    /// Wraps raw CSR arrays. Rows must be sorted; only lengths are checked.
    pub fn from_raw(offsets: Vec<usize>, indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if offsets.is_empty()
            || offsets[0] != 0
            || *offsets.last().unwrap() != indices.len()
            || indices.len() != values.len()
            || offsets.windows(2).any(|w| w[0] > w[1])
        {
            bail!(Validation, "inconsistent CSR arrays");
        }
        let n = offsets.len() - 1;
        if indices.iter().any(|&c| c >= n) {
            bail!(Validation, "column index out of range");
        }
        Ok(Self {
            offsets,
            indices,
            values,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn iter_row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (c, v) = self.row(i);
        c.iter().copied().zip(v.iter().copied())
    }

    /// Stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |i| self.iter_row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map_or(0.0, |p| v[p])
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn bytes(&self) -> u64 {
        let word = core::mem::size_of::<usize>() as u64;
        (self.offsets.len() as u64) * word + (self.indices.len() as u64) * (word + 8)
    }

    /// `self · x`
    pub fn spmm(&self, x: &Matrix, tally: &mut OpTally) -> Result<Matrix> {
        if x.rows() != self.n() {
            bail!(
                Shape,
                "cannot apply a {}-node operator to {} rows",
                self.n(),
                x.rows()
            );
        }
        let cols = x.cols();
        let mut out = Matrix::zeros(self.n(), cols);
        for i in 0..self.n() {
            let o = out.row_mut(i);
            for (j, w) in self.iter_row(i) {
                for (oj, &xj) in o.iter_mut().zip(x.row(j)) {
                    *oj += w * xj;
                }
            }
        }
        tally.add((self.nnz() * cols) as u64);
        Ok(out)
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n(), self.n());
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }
}
