use super::{LayerParams, RealMat};
use crate::error::{Error, Result};

/// Views of every trainable tensor as flat slices, in a fixed order.
pub trait FlatParams {
    fn flat(&self) -> Vec<&[f64]>;
    fn flat_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.flat().iter().map(|s| s.len()).sum()
    }
}

impl FlatParams for RealMat {
    fn flat(&self) -> Vec<&[f64]> {
        vec![self.as_slice()]
    }

    fn flat_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_mut_slice()]
    }
}

impl FlatParams for LayerParams {
    fn flat(&self) -> Vec<&[f64]> {
        vec![self.weights.as_slice(), &self.bias]
    }

    fn flat_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weights.as_mut_slice(), &mut self.bias]
    }
}

/// `p ← p − lr·g` for every entry. Nothing is modified when the shapes
/// differ or a gradient entry is not finite.
pub fn sgd_step<P: FlatParams>(params: &mut P, grads: &P, lr: f64) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::InvalidLearningRate(lr));
    }
    let g = grads.flat();
    let mut p = params.flat_mut();
    if g.len() != p.len() {
        return Err(Error::DimensionMismatch {
            context: "sgd tensor count",
            expected: p.len(),
            found: g.len(),
        });
    }
    let mut offset = 0;
    for (pt, gt) in p.iter().zip(&g) {
        if pt.len() != gt.len() {
            return Err(Error::DimensionMismatch {
                context: "sgd tensor shape",
                expected: pt.len(),
                found: gt.len(),
            });
        }
        if let Some(i) = gt.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient {
                index: offset + i,
                value: gt[i],
            });
        }
        offset += gt.len();
    }
    for (pt, gt) in p.iter_mut().zip(&g) {
        for (pv, gv) in pt.iter_mut().zip(gt.iter()) {
            *pv -= lr * gv;
        }
    }
    Ok(())
}
