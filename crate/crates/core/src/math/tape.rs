//! Reverse-mode gradients for sequential dense networks.
//!
//! A [`GradTape`] records each forward op together with the values its
//! derivative needs. [`GradTape::backward`] replays the record in reverse,
//! accumulating parameter gradients into a gradient store shaped like the
//! parameters, and consumes the record: a second backward call without a new
//! forward pass is an error.

use std::fmt::Debug;

use super::{axpy, elu_grad, relu_grad, LayerParams, RealMat, RealVec};
use crate::error::{Error, Result};

/// Keyed access to the trainable tensors of a model. Gradient stores
/// implement it too, with the same shapes.
pub trait Parameters<K: Copy + Debug> {
    fn dense(&self, key: K) -> &LayerParams;
    fn dense_mut(&mut self, key: K) -> &mut LayerParams;
    fn embedding(&self, key: K) -> &RealMat;
    fn embedding_mut(&mut self, key: K) -> &mut RealMat;
}

#[derive(Debug, Clone)]
pub enum Op<K> {
    /// Row lookup in an embedding table. Has no input gradient.
    Embedding { key: K, row: usize },
    Dense { key: K, input: RealVec },
    Elu { input: RealVec },
    Relu { input: RealVec },
    /// `v · sqrt(target / |v|²)`
    PowerNormalize { input: RealVec, target: f64 },
    /// Adds a constant (e.g. frozen channel noise); gradient passes through.
    AddConstant,
}

#[derive(Debug, Clone)]
pub struct GradTape<K> {
    ops: Vec<Op<K>>,
}

impl<K> Default for GradTape<K> {
    fn default() -> Self {
        Self { ops: Vec::new() }
    }
}

impl<K: Copy + Debug> GradTape<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, op: Op<K>) {
        self.ops.push(op);
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Back-propagates `seed` (the gradient of a scalar loss with respect to
    /// the last op's output), adding parameter gradients into `grads`.
    /// Returns the gradient with respect to the first op's input, which is
    /// empty when the tape starts with an embedding lookup.
    pub fn backward<P: Parameters<K>>(
        &mut self,
        params: &P,
        grads: &mut P,
        seed: &[f64],
    ) -> Result<RealVec> {
        if self.ops.is_empty() {
            return Err(Error::BackwardWithoutForward);
        }
        let mut g = seed.to_vec();
        while let Some(op) = self.ops.pop() {
            g = match op {
                Op::Embedding { key, row } => {
                    let table = grads.embedding_mut(key);
                    check_len("embedding gradient", table.cols(), g.len())?;
                    axpy(1.0, &g, table.row_mut(row));
                    Vec::new()
                }
                Op::Dense { key, input } => {
                    let layer = params.dense(key);
                    check_len("dense gradient", layer.out_dim(), g.len())?;
                    let gl = grads.dense_mut(key);
                    gl.weights.add_outer(&g, &input);
                    axpy(1.0, &g, &mut gl.bias);
                    layer.weights.matvec_transposed(&g)?
                }
                Op::Elu { input } => {
                    check_len("elu gradient", input.len(), g.len())?;
                    g.iter().zip(elu_grad(&input)).map(|(a, b)| a * b).collect()
                }
                Op::Relu { input } => {
                    check_len("relu gradient", input.len(), g.len())?;
                    g.iter().zip(relu_grad(&input)).map(|(a, b)| a * b).collect()
                }
                Op::PowerNormalize { input, target } => {
                    check_len("normalize gradient", input.len(), g.len())?;
                    let energy: f64 = input.iter().map(|v| v * v).sum();
                    let scale = (target / energy).sqrt();
                    let proj = super::dot(&input, &g) / energy;
                    g.iter()
                        .zip(&input)
                        .map(|(gi, vi)| scale * (gi - vi * proj))
                        .collect()
                }
                Op::AddConstant => g,
            };
        }
        Ok(g)
    }
}

fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{dense_forward, elu, relu, FlatParams};
    use crate::rng::RngStream;

    #[derive(Debug, Clone, Copy)]
    struct Only;

    #[derive(Debug, Clone)]
    struct OneLayer(LayerParams);

    impl Parameters<Only> for OneLayer {
        fn dense(&self, _: Only) -> &LayerParams {
            &self.0
        }
        fn dense_mut(&mut self, _: Only) -> &mut LayerParams {
            &mut self.0
        }
        fn embedding(&self, _: Only) -> &RealMat {
            unreachable!()
        }
        fn embedding_mut(&mut self, _: Only) -> &mut RealMat {
            unreachable!()
        }
    }

    #[test]
    fn linear_case() {
        // loss = w·x with x = 2
        let p = OneLayer(LayerParams::new(RealMat::from_vec(1, 1, vec![0.7]).unwrap(), vec![0.0]).unwrap());
        let mut g = OneLayer(LayerParams::zeros(1, 1));
        let mut tape = GradTape::new();
        tape.record(Op::Dense { key: Only, input: vec![2.0] });
        let dx = tape.backward(&p, &mut g, &[1.0]).unwrap();
        assert_eq!(g.0.weights.as_slice(), &[2.0]);
        assert_eq!(g.0.bias, vec![1.0]);
        assert_eq!(dx, vec![0.7]);
    }

    #[test]
    fn backward_without_forward() {
        let p = OneLayer(LayerParams::zeros(1, 1));
        let mut g = p.clone();
        let mut tape: GradTape<Only> = GradTape::new();
        assert!(matches!(
            tape.backward(&p, &mut g, &[1.0]),
            Err(Error::BackwardWithoutForward)
        ));
        tape.record(Op::Dense { key: Only, input: vec![1.0] });
        tape.backward(&p, &mut g, &[1.0]).unwrap();
        assert!(matches!(
            tape.backward(&p, &mut g, &[1.0]),
            Err(Error::BackwardWithoutForward)
        ));
    }

    #[test]
    fn unused_input_has_zero_gradient() {
        // Second input column multiplies a zero input, so its weight gradient
        // vanishes.
        let mut rng = RngStream::new(1);
        let p = OneLayer(LayerParams::glorot(2, 3, &mut rng));
        let mut g = OneLayer(LayerParams::zeros(2, 3));
        let mut tape = GradTape::new();
        tape.record(Op::Dense { key: Only, input: vec![1.5, 0.0] });
        tape.backward(&p, &mut g, &[1.0, -2.0, 0.5]).unwrap();
        for r in 0..3 {
            assert_eq!(g.0.weights[(r, 1)], 0.0);
        }
    }

    /// loss = Σ c_i · act(normalize(W x + b))_i for each activation kind.
    fn scalar_loss(p: &LayerParams, x: &[f64], c: &[f64], kind: u8) -> f64 {
        let z = dense_forward(p, x).unwrap();
        let a = match kind {
            0 => elu(&z),
            1 => relu(&z),
            _ => {
                let e: f64 = z.iter().map(|v| v * v).sum();
                z.iter().map(|v| v * (3.0 / e).sqrt()).collect()
            }
        };
        a.iter().zip(c).map(|(a, c)| a * c).sum()
    }

    #[test]
    fn layer_gradients_match_finite_differences() {
        let mut rng = RngStream::new(11);
        for trial in 0..60 {
            let kind = (trial % 3) as u8;
            let (din, dout) = (4, 3);
            let mut layer = LayerParams::glorot(din, dout, &mut rng);
            for b in &mut layer.bias {
                *b = rng.uniform(-0.5, 0.5);
            }
            let x: Vec<f64> = (0..din).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let c: Vec<f64> = (0..dout).map(|_| rng.uniform(-1.0, 1.0)).collect();

            let p = OneLayer(layer.clone());
            let mut g = OneLayer(LayerParams::zeros(din, dout));
            let mut tape = GradTape::new();
            let z = dense_forward(&layer, &x).unwrap();
            tape.record(Op::Dense { key: Only, input: x.clone() });
            tape.record(match kind {
                0 => Op::Elu { input: z },
                1 => Op::Relu { input: z },
                _ => Op::PowerNormalize { input: z, target: 3.0 },
            });
            let dx = tape.backward(&p, &mut g, &c).unwrap();

            let h = 1e-5;
            let mut probe = layer.clone();
            let analytic: Vec<f64> = g.0.flat().concat();
            for (idx, &a) in analytic.iter().enumerate() {
                let orig = probe.flat_get(idx);
                probe.flat_set(idx, orig + h);
                let up = scalar_loss(&probe, &x, &c, kind);
                probe.flat_set(idx, orig - h);
                let down = scalar_loss(&probe, &x, &c, kind);
                probe.flat_set(idx, orig);
                let fd = (up - down) / (2.0 * h);
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
                assert!(rel < 1e-4, "kind {kind} idx {idx}: {a} vs {fd}");
            }
            for i in 0..din {
                let mut xp = x.clone();
                xp[i] += h;
                let up = scalar_loss(&layer, &xp, &c, kind);
                xp[i] -= 2.0 * h;
                let down = scalar_loss(&layer, &xp, &c, kind);
                let fd = (up - down) / (2.0 * h);
                let rel = (dx[i] - fd).abs() / dx[i].abs().max(fd.abs()).max(1e-6);
                assert!(rel < 1e-4, "kind {kind} input {i}: {} vs {fd}", dx[i]);
            }
        }
    }

    impl LayerParams {
        fn flat_get(&self, idx: usize) -> f64 {
            let nw = self.weights.as_slice().len();
            if idx < nw {
                self.weights.as_slice()[idx]
            } else {
                self.bias[idx - nw]
            }
        }
        fn flat_set(&mut self, idx: usize, v: f64) {
            let nw = self.weights.as_slice().len();
            if idx < nw {
                self.weights.as_mut_slice()[idx] = v;
            } else {
                self.bias[idx - nw] = v;
            }
        }
    }

    impl FlatParams for OneLayer {
        fn flat(&self) -> Vec<&[f64]> {
            self.0.flat()
        }
        fn flat_mut(&mut self) -> Vec<&mut [f64]> {
            self.0.flat_mut()
        }
    }
}
