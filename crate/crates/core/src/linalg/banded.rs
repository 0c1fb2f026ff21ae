use crate::error::{Error, Result};

use super::LinearOperator;

/// Symmetric band matrix storing the diagonal and `bandwidth` subdiagonals,
/// column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    bandwidth: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            bandwidth,
            data: vec![0.0; n * (bandwidth + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0);
        m.data.fill(1.0);
        m
    }

    /// Lower band of a dense symmetric matrix; the bandwidth is the smallest
    /// one holding every nonzero.
    pub fn from_dense(a: &nalgebra::DMatrix<f64>) -> Self {
        let n = a.nrows();
        let mut bandwidth = 0;
        for j in 0..n {
            for i in j..n {
                if a[(i, j)] != 0.0 || a[(j, i)] != 0.0 {
                    bandwidth = bandwidth.max(i - j);
                }
            }
        }
        let mut m = Self::zeros(n, bandwidth);
        for j in 0..n {
            for i in j..(j + bandwidth + 1).min(n) {
                m.set(i, j, a[(i, j)]);
            }
        }
        m
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        (i - j <= self.bandwidth).then(|| j * (self.bandwidth + 1) + (i - j))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.index(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Sets entry `(i, j)` and its mirror. Panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.index(i, j).expect("entry outside the band");
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.index(i, j).expect("entry outside the band");
        self.data[k] += v;
    }

    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n: self.n,
            bandwidth: self.bandwidth,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.apply_into(x, &mut y);
        y
    }

    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let n = self.n;
        let b = self.bandwidth;
        let w = b + 1;
        let mut l = self.data.clone();
        for j in 0..n {
            let k0 = j.saturating_sub(b);
            let mut d = l[j * w];
            for k in k0..j {
                let v = l[k * w + (j - k)];
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotSpd { pivot: j, value: d });
            }
            let d = d.sqrt();
            l[j * w] = d;
            for i in j + 1..(j + w).min(n) {
                let mut s = l[j * w + (i - j)];
                for k in i.saturating_sub(b)..j {
                    s -= l[k * w + (i - k)] * l[k * w + (j - k)];
                }
                l[j * w + (i - j)] = s / d;
            }
        }
        Ok(BandedCholesky { n, bandwidth: b, l })
    }
}

impl LinearOperator for BandedMatrix {
    fn nrows(&self) -> usize {
        self.n
    }

    fn ncols(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let w = self.bandwidth + 1;
        y.fill(0.0);
        for j in 0..self.n {
            y[j] += self.data[j * w] * x[j];
            for i in j + 1..(j + w).min(self.n) {
                let v = self.data[j * w + (i - j)];
                y[i] += v * x[j];
                y[j] += v * x[i];
            }
        }
    }
}

/// Cholesky factor `L` of a [`BandedMatrix`], `A = L L'`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedCholesky {
    n: usize,
    bandwidth: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn order(&self) -> usize {
        self.n
    }

    /// Entry `(i, j)` of the lower factor.
    pub fn factor_entry(&self, i: usize, j: usize) -> f64 {
        if i < j || i - j > self.bandwidth {
            0.0
        } else {
            self.l[j * (self.bandwidth + 1) + (i - j)]
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_fibers(&mut x, 1);
        x
    }

    /// Solves in place for `post` right-hand sides stored interleaved: entry
    /// `k` of right-hand side `q` sits at `x[k * post + q]`. This is the
    /// layout of one mode fiber bundle of a row-major tensor.
    pub fn solve_fibers(&self, x: &mut [f64], post: usize) {
        let n = self.n;
        let w = self.bandwidth + 1;
        assert_eq!(x.len(), n * post);
        // forward: L y = b, column oriented
        for j in 0..n {
            let d = self.l[j * w];
            let (head, tail) = x.split_at_mut((j + 1) * post);
            let xj = &mut head[j * post..];
            for v in xj.iter_mut() {
                *v /= d;
            }
            for i in j + 1..(j + w).min(n) {
                let lij = self.l[j * w + (i - j)];
                let xi = &mut tail[(i - j - 1) * post..(i - j) * post];
                for (a, b) in xi.iter_mut().zip(xj.iter()) {
                    *a -= lij * b;
                }
            }
        }
        // backward: L' x = y, row oriented
        for j in (0..n).rev() {
            let (head, tail) = x.split_at_mut((j + 1) * post);
            let xj = &mut head[j * post..];
            for i in j + 1..(j + w).min(n) {
                let lij = self.l[j * w + (i - j)];
                let xi = &tail[(i - j - 1) * post..(i - j) * post];
                for (a, b) in xj.iter_mut().zip(xi) {
                    *a -= lij * b;
                }
            }
            let d = self.l[j * w];
            for v in xj.iter_mut() {
                *v /= d;
            }
        }
    }
}
