use crate::channel::ComplexVec;
use crate::error::{Error, Result};
use crate::math::{
    dense_forward, elu, power_normalize, relu, softmax, FlatParams, GradTape, LayerParams, Op,
    Parameters, ProbVector, RealMat, RealVec,
};
use crate::rng::RngStream;

/// Network sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub messages: usize,
    pub channel_uses: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKey {
    TxEmbedding,
    TxDense,
    RxHidden,
    RxOut,
}

/// Trainable weights of both ends of the link.
///
/// Transmitter: embedding table (M × E) → ELU → dense E → 2n → power
/// normalization. Receiver: dense 2n → H → ReLU → dense H → M → softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub tx_embedding: RealMat,
    pub tx_dense: LayerParams,
    pub rx_hidden: LayerParams,
    pub rx_out: LayerParams,
}

/// Anything that maps messages to codewords and received vectors back to
/// message probabilities.
pub trait Transceiver: Sync {
    fn messages(&self) -> usize;
    fn channel_uses(&self) -> usize;
    fn encode(&self, s: usize) -> Result<ComplexVec>;
    fn decode(&self, y: &ComplexVec) -> Result<ProbVector>;
}

/// Rescales `v` to `|v|² = n`.
pub fn normalize(v: &ComplexVec) -> Result<ComplexVec> {
    ComplexVec::from_split(power_normalize(v.as_slice(), v.n() as f64)?)
}

/// 1-based argmax of `b`, ties toward the smallest index.
pub fn classify(b: &ProbVector) -> usize {
    b.classify()
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(dims: ModelDims, rng: &mut RngStream) -> Self {
        let two_n = 2 * dims.channel_uses;
        Self {
            tx_embedding: RealMat::glorot(dims.messages, dims.embed_dim, rng),
            tx_dense: LayerParams::glorot(dims.embed_dim, two_n, rng),
            rx_hidden: LayerParams::glorot(two_n, dims.hidden_dim, rng),
            rx_out: LayerParams::glorot(dims.hidden_dim, dims.messages, rng),
        }
    }

    pub fn zeros(dims: ModelDims) -> Self {
        let two_n = 2 * dims.channel_uses;
        Self {
            tx_embedding: RealMat::zeros(dims.messages, dims.embed_dim),
            tx_dense: LayerParams::zeros(dims.embed_dim, two_n),
            rx_hidden: LayerParams::zeros(two_n, dims.hidden_dim),
            rx_out: LayerParams::zeros(dims.hidden_dim, dims.messages),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims())
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            messages: self.tx_embedding.rows(),
            channel_uses: self.tx_dense.out_dim() / 2,
            embed_dim: self.tx_embedding.cols(),
            hidden_dim: self.rx_hidden.out_dim(),
        }
    }

    /// Checks that the layer shapes chain together and every entry is finite.
    pub fn validate(&self) -> Result<()> {
        let d = self.dims();
        let checks = [
            ("tx.dense input", d.embed_dim, self.tx_dense.in_dim()),
            ("tx.dense output", 2 * d.channel_uses, self.tx_dense.out_dim()),
            ("rx.l1 input", 2 * d.channel_uses, self.rx_hidden.in_dim()),
            ("rx.l2 input", d.hidden_dim, self.rx_out.in_dim()),
            ("rx.l2 output", d.messages, self.rx_out.out_dim()),
            ("tx.dense bias", self.tx_dense.out_dim(), self.tx_dense.bias.len()),
            ("rx.l1 bias", self.rx_hidden.out_dim(), self.rx_hidden.bias.len()),
            ("rx.l2 bias", self.rx_out.out_dim(), self.rx_out.bias.len()),
        ];
        for (context, expected, found) in checks {
            if expected != found {
                return Err(Error::DimensionMismatch {
                    context,
                    expected,
                    found,
                });
            }
        }
        if d.channel_uses == 0 || !self.tx_dense.out_dim().is_multiple_of(2) {
            return Err(Error::DimensionMismatch {
                context: "tx.dense output (2n)",
                expected: 2 * d.channel_uses.max(1),
                found: self.tx_dense.out_dim(),
            });
        }
        for (i, v) in self.flat().concat().iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteParameter { index: i, value: *v });
            }
        }
        Ok(())
    }

    /// `self += other`
    pub fn accumulate(&mut self, other: &Self) {
        for (a, b) in self.flat_mut().into_iter().zip(other.flat()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for t in self.flat_mut() {
            for x in t {
                *x *= c;
            }
        }
    }

    fn check_message(&self, s: usize) -> Result<()> {
        let m = self.tx_embedding.rows();
        if s == 0 || s > m {
            return Err(Error::InvalidMessage { message: s, messages: m });
        }
        Ok(())
    }

    /// Transmitter forward pass, optionally recording onto `tape`.
    pub fn encode_traced(
        &self,
        s: usize,
        tape: Option<&mut GradTape<ParamKey>>,
    ) -> Result<ComplexVec> {
        self.check_message(s)?;
        let e = self.tx_embedding.row(s - 1);
        let a = elu(e);
        let z = dense_forward(&self.tx_dense, &a)?;
        let target = (z.len() / 2) as f64;
        let x = power_normalize(&z, target)?;
        if let Some(tape) = tape {
            tape.record(Op::Embedding {
                key: ParamKey::TxEmbedding,
                row: s - 1,
            });
            tape.record(Op::Elu { input: e.to_vec() });
            tape.record(Op::Dense {
                key: ParamKey::TxDense,
                input: a,
            });
            tape.record(Op::PowerNormalize { input: z, target });
        }
        ComplexVec::from_split(x)
    }

    /// Receiver forward pass up to the logits, optionally recording onto
    /// `tape`.
    pub fn logits_traced(
        &self,
        y: &ComplexVec,
        tape: Option<&mut GradTape<ParamKey>>,
    ) -> Result<RealVec> {
        let input = y.as_slice();
        if input.len() != self.rx_hidden.in_dim() {
            return Err(Error::DimensionMismatch {
                context: "receiver input (2n reals)",
                expected: self.rx_hidden.in_dim(),
                found: input.len(),
            });
        }
        let h_pre = dense_forward(&self.rx_hidden, input)?;
        let h = relu(&h_pre);
        let logits = dense_forward(&self.rx_out, &h)?;
        if let Some(tape) = tape {
            tape.record(Op::Dense {
                key: ParamKey::RxHidden,
                input: input.to_vec(),
            });
            tape.record(Op::Relu { input: h_pre });
            tape.record(Op::Dense {
                key: ParamKey::RxOut,
                input: h,
            });
        }
        Ok(logits)
    }

    pub fn logits(&self, y: &ComplexVec) -> Result<RealVec> {
        self.logits_traced(y, None)
    }
}

impl Transceiver for ModelParams {
    fn messages(&self) -> usize {
        self.tx_embedding.rows()
    }

    fn channel_uses(&self) -> usize {
        self.tx_dense.out_dim() / 2
    }

    fn encode(&self, s: usize) -> Result<ComplexVec> {
        self.encode_traced(s, None)
    }

    fn decode(&self, y: &ComplexVec) -> Result<ProbVector> {
        Ok(softmax(&self.logits(y)?))
    }
}

impl FlatParams for ModelParams {
    fn flat(&self) -> Vec<&[f64]> {
        vec![
            self.tx_embedding.as_slice(),
            self.tx_dense.weights.as_slice(),
            &self.tx_dense.bias,
            self.rx_hidden.weights.as_slice(),
            &self.rx_hidden.bias,
            self.rx_out.weights.as_slice(),
            &self.rx_out.bias,
        ]
    }

    fn flat_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.tx_embedding.as_mut_slice(),
            self.tx_dense.weights.as_mut_slice(),
            &mut self.tx_dense.bias,
            self.rx_hidden.weights.as_mut_slice(),
            &mut self.rx_hidden.bias,
            self.rx_out.weights.as_mut_slice(),
            &mut self.rx_out.bias,
        ]
    }
}

impl Parameters<ParamKey> for ModelParams {
    fn dense(&self, key: ParamKey) -> &LayerParams {
        match key {
            ParamKey::TxDense => &self.tx_dense,
            ParamKey::RxHidden => &self.rx_hidden,
            ParamKey::RxOut => &self.rx_out,
            ParamKey::TxEmbedding => unreachable!("{key:?} is not a dense layer"),
        }
    }

    fn dense_mut(&mut self, key: ParamKey) -> &mut LayerParams {
        match key {
            ParamKey::TxDense => &mut self.tx_dense,
            ParamKey::RxHidden => &mut self.rx_hidden,
            ParamKey::RxOut => &mut self.rx_out,
            ParamKey::TxEmbedding => unreachable!("{key:?} is not a dense layer"),
        }
    }

    fn embedding(&self, key: ParamKey) -> &RealMat {
        match key {
            ParamKey::TxEmbedding => &self.tx_embedding,
            _ => unreachable!("{key:?} is not an embedding"),
        }
    }

    fn embedding_mut(&mut self, key: ParamKey) -> &mut RealMat {
        match key {
            ParamKey::TxEmbedding => &mut self.tx_embedding,
            _ => unreachable!("{key:?} is not an embedding"),
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// M = 2, n = 1, E = 1: embeddings ±1, tx dense maps a ↦ (a, 0), so the
    /// codewords are BPSK points ±1. Receiver logits are (y_re, −y_re).
    pub(crate) fn bpsk_model() -> ModelParams {
        let mut p = ModelParams::zeros(ModelDims {
            messages: 2,
            channel_uses: 1,
            embed_dim: 1,
            hidden_dim: 2,
        });
        p.tx_embedding = RealMat::from_rows(&[&[1.0], &[-1.0]]).unwrap();
        p.tx_dense.weights = RealMat::from_rows(&[&[1.0], &[0.0]]).unwrap();
        p.rx_hidden.weights = RealMat::from_rows(&[&[1.0, 0.0], &[-1.0, 0.0]]).unwrap();
        p.rx_out.weights = RealMat::from_rows(&[&[1.0, -1.0], &[-1.0, 1.0]]).unwrap();
        p
    }

    fn dims(m: usize, n: usize) -> ModelDims {
        ModelDims {
            messages: m,
            channel_uses: n,
            embed_dim: m,
            hidden_dim: m,
        }
    }

    #[test]
    fn normalize_examples() {
        let v = ComplexVec::from_parts(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(normalize(&v).unwrap(), v);
        let v = ComplexVec::from_parts(&[2.0, 0.0], &[0.0, 0.0]).unwrap();
        let out = normalize(&v).unwrap();
        assert_abs_diff_eq!(out.symbol(0).0, std::f64::consts::SQRT_2, epsilon = 1e-15);
        assert_eq!(out.symbol(1), (0.0, 0.0));
        assert!(matches!(normalize(&ComplexVec::zeros(2)), Err(Error::ZeroVector)));
    }

    #[test]
    fn bpsk_encoder() {
        let p = bpsk_model();
        let x1 = p.encode(1).unwrap();
        let x2 = p.encode(2).unwrap();
        assert_abs_diff_eq!(x1.symbol(0).0, 1.0, epsilon = 1e-15);
        assert_eq!(x1.symbol(0).1, 0.0);
        assert_abs_diff_eq!(x2.symbol(0).0, -1.0, epsilon = 1e-15);
        assert_eq!(x2.symbol(0).1, 0.0);
    }

    #[test]
    fn hand_set_receiver() {
        let p = bpsk_model();
        let y = ComplexVec::from_parts(&[3.0], &[0.0]).unwrap();
        let b = p.decode(&y).unwrap();
        assert_abs_diff_eq!(b.as_slice()[0], 0.997_527_376_843_365_2, epsilon = 1e-12);
        assert_abs_diff_eq!(b.as_slice()[1], 0.002_472_623_156_634_8, epsilon = 1e-12);
        assert_eq!(classify(&b), 1);
    }

    #[test]
    fn zero_receiver_is_uniform() {
        let p = ModelParams::zeros(dims(8, 2));
        let b = p.decode(&ComplexVec::from_parts(&[0.3, -1.0], &[0.1, 0.9]).unwrap()).unwrap();
        assert!(b.as_slice().iter().all(|&v| (v - 0.125).abs() < 1e-15));
    }

    #[test]
    fn encode_is_deterministic() {
        let mut rng = RngStream::new(3);
        let p = ModelParams::init(dims(16, 2), &mut rng);
        assert_eq!(p.encode(5).unwrap(), p.encode(5).unwrap());
    }

    #[test]
    fn encode_rejects_out_of_range() {
        let p = bpsk_model();
        assert!(matches!(p.encode(0), Err(Error::InvalidMessage { .. })));
        assert!(matches!(p.encode(3), Err(Error::InvalidMessage { message: 3, messages: 2 })));
    }

    #[test]
    fn decode_dimension_mismatch() {
        let p = bpsk_model();
        let y = ComplexVec::from_parts(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!(matches!(p.decode(&y), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn power_constraint_over_random_models() {
        let mut rng = RngStream::new(99);
        for i in 0..1000 {
            let n = 1 + i % 4;
            let p = ModelParams::init(dims(8, n), &mut rng);
            for s in 1..=8 {
                let e = p.encode(s).unwrap().energy();
                assert!((e - n as f64).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn init_validates() {
        let mut rng = RngStream::new(1);
        ModelParams::init(dims(16, 3), &mut rng).validate().unwrap();
        let mut p = ModelParams::zeros(dims(4, 1));
        p.rx_out.bias[0] = f64::NAN;
        assert!(p.validate().is_err());
    }

    proptest! {
        #[test]
        fn normalize_scale_invariant(
            v in prop::collection::vec(-10.0f64..10.0, 2..12).prop_filter("even", |v| v.len() % 2 == 0),
            c in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0],
        ) {
            let x = ComplexVec::from_split(v).unwrap();
            prop_assume!(x.energy() > 1e-6);
            let a = normalize(&x).unwrap();
            let b = normalize(&x.scaled(c)).unwrap();
            let sign = c.signum();
            for (p, q) in a.as_slice().iter().zip(b.as_slice()) {
                prop_assert!((sign * p - q).abs() < 1e-9);
            }
        }

        #[test]
        fn classify_invariant_to_logit_offset(c in -50.0f64..50.0, seed in 0u64..1000) {
            let mut rng = RngStream::new(seed);
            let mut p = ModelParams::init(dims(8, 2), &mut rng);
            let y = p.encode(3).unwrap();
            let before = classify(&p.decode(&y).unwrap());
            for b in &mut p.rx_out.bias {
                *b += c;
            }
            prop_assert_eq!(classify(&p.decode(&y).unwrap()), before);
        }
    }
}
