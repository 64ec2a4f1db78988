//! Row-major `f64` matrices and the small set of kernels the attention
//! algorithms need. No general BLAS: dot products, norms and seeded Gaussian
//! sampling cover everything.
//!
//! Reductions sum strictly left to right in index order. That fixed order is
//! what lets the sparse attention paths match the dense paths to within
//! `1e-10` (in fact bit for bit: skipping an exact zero term never changes a
//! left-to-right sum).

use crate::error::{Error, Result};
use crate::rng::RngSpec;

/// Dense row-major matrix of `f64` values.
///
/// Immutable by convention once filled: every operation in the crate takes
/// matrices by shared reference, so values are freely shared across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// All-zeros matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from a row-major buffer; `data.len()` must equal `rows × cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                context: "DenseMatrix::from_vec",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Build from explicit rows; convenient in tests.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::Dimension {
                    context: "DenseMatrix::from_rows",
                    expected: c,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row `i` as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Row `i` as a mutable slice.
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    /// Row-major backing buffer.
    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Left-to-right dot product; lengths already validated by the caller.
#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = 0.0;
    for i in 0..x.len() {
        acc += x[i] * y[i];
    }
    acc
}

/// Dot product `Σ xᵢ·yᵢ`, summed left to right in index order.
pub fn row_dot(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            context: "row_dot",
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(dot(x, y))
}

/// Euclidean norm `√(Σ xᵢ²)`.
pub fn l2_norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Largest absolute entry; `0` for an empty matrix.
pub fn linf_matrix_norm(m: &DenseMatrix) -> f64 {
    m.data().iter().fold(0.0, |acc, &v| acc.max(v.abs()))
}

/// Sample `rows × cols` i.i.d. `N(0, sigma²)` entries in row-major draw
/// order. The standard-normal variate is drawn first and then scaled, so a
/// `sigma` matrix equals the `sigma = 1` matrix times `sigma`, bit for bit.
pub fn sample_gaussian_matrix(rows: usize, cols: usize, sigma: f64, rng: &RngSpec) -> DenseMatrix {
    assert!(sigma >= 0.0, "sigma must be non-negative");
    let mut stream = rng.gaussian_stream();
    let data = (0..rows * cols).map(|_| sigma * stream.next_gaussian()).collect();
    DenseMatrix {
        rows,
        cols,
        data,
    }
}
