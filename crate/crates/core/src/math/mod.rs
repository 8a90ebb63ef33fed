//! Dense-network numerical core: matrices, layers, activations, a gradient
//! tape and plain SGD.

mod activation;
mod sgd;
mod tape;

pub use activation::{elu, elu_grad, relu, relu_grad, softmax, ProbVector};
pub use sgd::{sgd_step, FlatParams};
pub use tape::{GradTape, Op, Parameters};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Dense vector of reals.
pub type RealVec = Vec<f64>;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix data",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "matrix row",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Glorot-uniform entries in `±sqrt(6 / (rows + cols))`.
    pub fn glorot(rows: usize, cols: usize, rng: &mut RngStream) -> Self {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.uniform(-limit, limit))
            .collect();
        Self { rows, cols, data }
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

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `self · x`
    pub fn matvec(&self, x: &[f64]) -> Result<RealVec> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "matrix-vector product",
                expected: self.cols,
                found: x.len(),
            });
        }
        Ok(self
            .data
            .chunks_exact(self.cols)
            .map(|row| dot(row, x))
            .collect())
    }

    /// `selfᵀ · g`
    pub fn matvec_transposed(&self, g: &[f64]) -> Result<RealVec> {
        if g.len() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "transposed matrix-vector product",
                expected: self.rows,
                found: g.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (row, &gi) in self.data.chunks_exact(self.cols).zip(g) {
            axpy(gi, row, &mut out);
        }
        Ok(out)
    }

    /// `self += g ⊗ x`
    pub fn add_outer(&mut self, g: &[f64], x: &[f64]) {
        debug_assert_eq!(g.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for (row, &gi) in self.data.chunks_exact_mut(self.cols).zip(g) {
            if gi != 0.0 {
                axpy(gi, x, row);
            }
        }
    }
}

impl std::ops::Index<(usize, usize)> for RealMat {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RealMat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Inner product over the common length. Eight interleaved partial sums let
/// the compiler vectorize; the summation order is fixed, so results are
/// still reproducible.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().min(b.len());
    let (a, b) = (&a[..len], &b[..len]);
    let mut acc = [0.0; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += a · x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Weights (out × in) and bias (out) of an affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: RealMat,
    pub bias: RealVec,
}

impl LayerParams {
    pub fn new(weights: RealMat, bias: RealVec) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::DimensionMismatch {
                context: "layer bias",
                expected: weights.rows(),
                found: bias.len(),
            });
        }
        Ok(Self { weights, bias })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weights: RealMat::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(in_dim: usize, out_dim: usize, rng: &mut RngStream) -> Self {
        Self {
            weights: RealMat::glorot(out_dim, in_dim, rng),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// `p.weights · x + p.bias`
pub fn dense_forward(p: &LayerParams, x: &[f64]) -> Result<RealVec> {
    let mut out = p.weights.matvec(x)?;
    for (o, b) in out.iter_mut().zip(&p.bias) {
        *o += b;
    }
    Ok(out)
}

/// Rescales `v` so that `|v|² = target`.
pub fn power_normalize(v: &[f64], target: f64) -> Result<RealVec> {
    let energy: f64 = v.iter().map(|x| x * x).sum();
    if energy == 0.0 {
        return Err(Error::ZeroVector);
    }
    let scale = (target / energy).sqrt();
    Ok(v.iter().map(|x| x * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_identity() {
        let p = LayerParams::new(RealMat::identity(2), vec![0.0, 0.0]).unwrap();
        assert_eq!(dense_forward(&p, &[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn dense_hand_product() {
        let w = RealMat::from_rows(&[&[1.0, 1.0], &[0.0, 2.0]]).unwrap();
        let p = LayerParams::new(w, vec![1.0, 0.0]).unwrap();
        assert_eq!(dense_forward(&p, &[1.0, 2.0]).unwrap(), vec![4.0, 4.0]);
    }

    #[test]
    fn dense_zero_weights() {
        let p = LayerParams::new(RealMat::zeros(2, 3), vec![5.0, 6.0]).unwrap();
        assert_eq!(dense_forward(&p, &[9.0, -1.0, 0.5]).unwrap(), vec![5.0, 6.0]);
    }

    #[test]
    fn dense_dim_mismatch() {
        let p = LayerParams::zeros(3, 2);
        assert!(matches!(
            dense_forward(&p, &[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 3, found: 2, .. })
        ));
    }

    #[test]
    fn bias_len_checked() {
        assert!(LayerParams::new(RealMat::zeros(2, 2), vec![0.0]).is_err());
    }

    #[test]
    fn transposed_product() {
        let w = RealMat::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(w.matvec_transposed(&[1.0, -1.0]).unwrap(), vec![-3.0, -3.0, -3.0]);
    }

    #[test]
    fn glorot_bounds() {
        let mut rng = RngStream::new(5);
        let m = RealMat::glorot(30, 10, &mut rng);
        let limit = (6.0f64 / 40.0).sqrt();
        assert!(m.as_slice().iter().all(|v| v.abs() <= limit));
    }
}
