use crate::error::{Error, Result};

use super::LinearOperator;

/// Compressed sparse row matrix with `u32` column indices.
///
/// Columns are sorted within each row and no explicit zeros are stored once a
/// matrix leaves [`CsrMatrix::from_triplets`] or [`CsrMatrix::drop_zeros`].
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from raw CSR arrays; columns must be sorted and in range.
    pub fn from_parts(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<u32>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != nrows + 1 || row_ptr[0] != 0 || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(Error::InvalidArgument("inconsistent CSR row offsets".into()));
        }
        if col_idx.len() != values.len() {
            return Err(Error::ShapeMismatch {
                expected: col_idx.len(),
                found: values.len(),
            });
        }
        for i in 0..nrows {
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if row_ptr[i] > row_ptr[i + 1]
                || cols.windows(2).any(|w| w[0] >= w[1])
                || cols.last().is_some_and(|&c| c as usize >= ncols)
            {
                return Err(Error::InvalidArgument(format!("row {i} has unsorted or out-of-range columns")));
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Sums duplicate entries and drops exact zeros.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if ncols > u32::MAX as usize {
            return Err(Error::InvalidArgument("column count exceeds u32 range".into()));
        }
        if let Some(&(i, j, _)) = triplets.iter().find(|(i, j, _)| *i >= nrows || *j >= ncols) {
            return Err(Error::InvalidArgument(format!(
                "triplet ({i}, {j}) outside a {nrows}x{ncols} matrix"
            )));
        }
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j as u32);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut m = Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        };
        m.drop_zeros();
        Ok(m)
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::ShapeMismatch {
                    expected: ncols,
                    found: row.len(),
                });
            }
            triplets.extend(row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (i, j, *v)));
        }
        Self::from_triplets(nrows, ncols, triplets)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n as u32).collect(),
            values: vec![1.0; n],
        }
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

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .zip(&self.values[r])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn drop_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut write = 0;
        let mut start = 0;
        for i in 0..self.nrows {
            let end = self.row_ptr[i + 1];
            for k in start..end {
                if self.values[k] != 0.0 {
                    self.values[write] = self.values[k];
                    self.col_idx[write] = self.col_idx[k];
                    write += 1;
                }
            }
            start = end;
            self.row_ptr[i + 1] = write;
        }
        self.values.truncate(write);
        self.col_idx.truncate(write);
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut s = 0.0;
            for (c, v) in self.col_idx[a..b].iter().zip(&self.values[a..b]) {
                s += v * x[*c as usize];
            }
            *yi = s;
        }
    }

    /// `y = A' x`.
    pub fn transpose_matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        y.fill(0.0);
        for (i, xi) in x.iter().enumerate() {
            for (c, v) in self.row(i) {
                y[c] += v * xi;
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c as usize + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0u32; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                let k = next[c];
                col_idx[k] = i as u32;
                values[k] = v;
                next[c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Rows `rows` and columns `cols` as a new matrix, re-indexed from zero.
    pub fn submatrix(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Self {
        let mut triplets = Vec::new();
        for i in rows.clone() {
            for (c, v) in self.row(i) {
                if cols.contains(&c) {
                    triplets.push((i - rows.start, c - cols.start, v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), triplets).expect("indices are in range by construction")
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Exact (bitwise) symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.nrows == self.ncols && self.transpose() == *self
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(i) {
                row[c] = v;
            }
        }
        d
    }

    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                d[(i, c)] = v;
            }
        }
        d
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.ncols != other.nrows {
            return Err(Error::ShapeMismatch {
                expected: self.ncols,
                found: other.nrows,
            });
        }
        let mut triplets = Vec::new();
        let mut acc = vec![0.0; other.ncols];
        let mut touched = Vec::new();
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if acc[j] == 0.0 {
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            for &j in &touched {
                triplets.push((i, j, acc[j]));
                acc[j] = 0.0;
            }
            touched.clear();
        }
        CsrMatrix::from_triplets(self.nrows, other.ncols, triplets)
    }
}

impl LinearOperator for CsrMatrix {
    fn nrows(&self) -> usize {
        self.nrows
    }

    fn ncols(&self) -> usize {
        self.ncols
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = CsrMatrix::from_triplets(2, 3, vec![(1, 2, 1.0), (0, 1, 2.0), (1, 2, -1.0), (0, 0, 3.0), (0, 1, 1.0)])
            .unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 2), 0.0);
        assert_eq!(m.to_dense(), vec![vec![3.0, 3.0, 0.0], vec![0.0; 3]]);
    }

    #[test]
    fn transpose_and_products() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0, 0.0], vec![0.0, -1.0, 4.0]]).unwrap();
        let at = a.transpose();
        assert_eq!(at.to_dense(), vec![vec![1.0, 0.0], vec![2.0, -1.0], vec![0.0, 4.0]]);
        let x = [1.0, 2.0, 3.0];
        assert_eq!(a.matvec(&x), vec![5.0, 10.0]);
        let mut y = vec![0.0; 3];
        a.transpose_matvec_into(&[1.0, 1.0], &mut y);
        assert_eq!(y, at.matvec(&[1.0, 1.0]));
        let ata = at.matmul(&a).unwrap();
        assert!(ata.is_symmetric());
        assert_eq!(ata.get(1, 1), 5.0);
    }

    #[test]
    fn rejects_bad_parts() {
        assert!(CsrMatrix::from_parts(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::from_parts(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        assert!(CsrMatrix::from_parts(1, 2, vec![0, 2], vec![0, 1], vec![1.0, 1.0]).is_ok());
    }
}
