//! Dense N-way arrays.
//!
//! Storage is column-major over the multi-index: entry `(i_1, .., i_N)` (0-based) lives at
//! offset `i_1 + i_2 n_1 + i_3 n_1 n_2 + ..`, so the first index varies fastest. With this
//! layout the unfolding that groups the first `j` modes into rows is a plain reinterpretation
//! of the flat buffer as a column-major matrix. Every matrix in the crate is a column-major
//! [`RealMatrix`].

use nalgebra::{DMatrix, DMatrixView};

use crate::error::{Error, Result};

/// Column-major dense real matrix used throughout the crate.
pub type RealMatrix = DMatrix<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Which of the three order-3 embeddings of a matrix to build (see [`twist`]).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Twist {
    /// `m x k` matrix becomes shape `(1, m, k)`.
    Leading,
    /// `m x k` matrix becomes shape `(m, 1, k)`.
    Middle,
    /// `m x k` matrix becomes shape `(m, k, 1)`.
    Trailing,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&n| n == 0) {
            return Err(Error::Shape(format!("shape {shape:?} must be non-empty and positive")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = shape.iter().product();
        Self::new(shape, vec![0.0; len])
    }

    /// Builds a tensor by calling `f` on every 0-based multi-index in storage order.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            for (i, n) in idx.iter_mut().zip(&shape) {
                *i += 1;
                if *i < *n {
                    break;
                }
                *i = 0;
            }
        }
        Self::new(shape, data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Flat offset of a 0-based multi-index.
    pub fn offset(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.shape.len() {
            return Err(Error::Index(format!(
                "index of length {} for order-{} tensor",
                idx.len(),
                self.shape.len()
            )));
        }
        let mut off = 0;
        let mut stride = 1;
        for (k, (&i, &n)) in idx.iter().zip(&self.shape).enumerate() {
            if i >= n {
                return Err(Error::Index(format!("index {i} in mode {k} of size {n}")));
            }
            off += i * stride;
            stride *= n;
        }
        Ok(off)
    }

    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        Ok(self.data[self.offset(idx)?])
    }

    pub fn set(&mut self, idx: &[usize], value: f64) -> Result<()> {
        let off = self.offset(idx)?;
        self.data[off] = value;
        Ok(())
    }

    fn split_dims(&self, j: usize) -> Result<(usize, usize)> {
        if j == 0 || j > self.shape.len() {
            return Err(Error::Index(format!(
                "unfolding index {j} outside 1..={}",
                self.shape.len()
            )));
        }
        let rows = self.shape[..j].iter().product();
        let cols = self.shape[j..].iter().product();
        Ok((rows, cols))
    }

    /// Unfolding with the first `j` modes as rows, `1 <= j <= N`. Zero-copy.
    pub fn unfold_view(&self, j: usize) -> Result<DMatrixView<'_, f64>> {
        let (rows, cols) = self.split_dims(j)?;
        Ok(DMatrixView::from_slice(&self.data, rows, cols))
    }

    /// Owned unfolding with the first `j` modes as rows, `1 <= j <= N`.
    pub fn unfold(&self, j: usize) -> Result<RealMatrix> {
        let (rows, cols) = self.split_dims(j)?;
        Ok(RealMatrix::from_column_slice(rows, cols, &self.data))
    }

    /// Inverse of [`DenseTensor::unfold`]: reinterprets a matrix as a tensor of `shape`.
    pub fn fold(m: &RealMatrix, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, m.as_slice().to_vec())
    }

    /// Reinterprets the buffer under a new shape with the same number of entries.
    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    /// Mode-`k` product (`k` 0-based): replaces mode `k` of size `n_k` by `a.nrows()` with
    /// `y[.., j, ..] = sum_i x[.., i, ..] a[j, i]`.
    pub fn mode_product(&self, a: &RealMatrix, k: usize) -> Result<Self> {
        if k >= self.shape.len() {
            return Err(Error::Index(format!("mode {k} of order-{} tensor", self.shape.len())));
        }
        let nk = self.shape[k];
        if a.ncols() != nk {
            return Err(Error::Shape(format!(
                "mode-{k} product needs {nk} columns, matrix has {}",
                a.ncols()
            )));
        }
        let left: usize = self.shape[..k].iter().product();
        let right: usize = self.shape[k + 1..].iter().product();
        let m = a.nrows();
        let mut out = vec![0.0; left * m * right];
        let at = a.transpose();
        for r in 0..right {
            let slab = DMatrixView::from_slice(&self.data[r * left * nk..(r + 1) * left * nk], left, nk);
            let y = slab * &at;
            out[r * left * m..(r + 1) * left * m].copy_from_slice(y.as_slice());
        }
        let mut shape = self.shape.clone();
        shape[k] = m;
        Self::new(shape, out)
    }

    pub fn chebyshev_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Embeds an `m x k` matrix as an order-3 tensor with a singleton mode.
pub fn twist(a: &RealMatrix, which: Twist) -> DenseTensor {
    let (m, k) = a.shape();
    let shape = match which {
        Twist::Leading => vec![1, m, k],
        Twist::Middle => vec![m, 1, k],
        Twist::Trailing => vec![m, k, 1],
    };
    DenseTensor { shape, data: a.as_slice().to_vec() }
}
