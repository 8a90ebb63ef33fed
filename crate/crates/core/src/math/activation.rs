use super::RealVec;

/// `x` for `x ≥ 0`, `eˣ − 1` otherwise.
pub fn elu(x: &[f64]) -> RealVec {
    x.iter()
        .map(|&v| if v >= 0.0 { v } else { v.exp_m1() })
        .collect()
}

/// Derivative of [`elu`] at each input.
pub fn elu_grad(x: &[f64]) -> RealVec {
    x.iter()
        .map(|&v| if v >= 0.0 { 1.0 } else { v.exp() })
        .collect()
}

pub fn relu(x: &[f64]) -> RealVec {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Derivative of [`relu`]; zero at the kink.
pub fn relu_grad(x: &[f64]) -> RealVec {
    x.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect()
}

/// Receiver output: a probability for each message.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(RealVec);

impl ProbVector {
    /// Wraps probabilities that are already normalized. Returns `None` when
    /// an entry is outside `[0, 1]` or the sum is off by more than 1e-9.
    pub fn new(b: RealVec) -> Option<Self> {
        let sum: f64 = b.iter().sum();
        let in_range = b.iter().all(|&v| (0.0..=1.0).contains(&v));
        (in_range && (sum - 1.0).abs() <= 1e-9 && !b.is_empty()).then_some(Self(b))
    }

    /// All mass on `message` (1-based).
    pub fn one_hot(m: usize, message: usize) -> Self {
        let mut b = vec![0.0; m];
        b[message - 1] = 1.0;
        Self(b)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Probability of the 1-based `message`.
    pub fn prob(&self, message: usize) -> f64 {
        self.0[message - 1]
    }

    /// Hard decision: 1-based index of the largest probability, ties broken
    /// toward the smallest index.
    pub fn classify(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate().skip(1) {
            if v > self.0[best] {
                best = i;
            }
        }
        best + 1
    }
}

/// Max-shifted softmax.
pub fn softmax(z: &[f64]) -> ProbVector {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: RealVec = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    ProbVector(exps.into_iter().map(|e| e / sum).collect())
}
