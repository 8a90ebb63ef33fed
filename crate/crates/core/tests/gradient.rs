use proptest::prelude::*;

use semlink::channel::{ChannelDraw, ChannelModel};
use semlink::math::FlatParams;
use semlink::trainer::{sample_loss, sample_loss_grad};
use semlink::{LossKind, ModelParams, RngStream, Scenario};

fn check(sc: &Scenario, channel: ChannelModel, kind: LossKind, seed: u64) -> Result<(), TestCaseError> {
    let mut rng = RngStream::new(seed);
    let params = ModelParams::init(sc.dims(), &mut rng);
    let s = rng.message(sc.messages);
    let draw = ChannelDraw::sample(&mut rng, sc.channel_uses);
    let mut grads = params.zeros_like();
    sample_loss_grad(&params, s, &channel, &draw, kind, &mut grads).unwrap();
    let analytic = grads.flat().concat();

    let h = 1e-5;
    let mut probe = params.clone();
    let mut idx = 0;
    for t in 0..params.flat().len() {
        for i in 0..params.flat()[t].len() {
            // Every fifth entry keeps the property test fast.
            if idx % 5 == 0 {
                let orig = probe.flat_mut()[t][i];
                probe.flat_mut()[t][i] = orig + h;
                let up = sample_loss(&probe, s, &channel, &draw, kind).unwrap();
                probe.flat_mut()[t][i] = orig - h;
                let down = sample_loss(&probe, s, &channel, &draw, kind).unwrap();
                probe.flat_mut()[t][i] = orig;
                let fd = (up - down) / (2.0 * h);
                let a = analytic[idx];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
                prop_assert!(rel < 1e-4, "tensor {t} entry {i}: analytic {a}, numeric {fd}");
            }
            idx += 1;
        }
    }
    Ok(())
}

fn scenario(m: usize, n: usize, e: usize, h: usize) -> Scenario {
    Scenario {
        messages: m,
        channel_uses: n,
        embed_dim: e,
        hidden_dim: h,
        ..Scenario::desk()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn semantic_channel_gradients(
        seed in any::<u64>(),
        m in prop::sample::select(vec![4usize, 8, 32]),
        n in 1usize..4,
        e in 2usize..12,
        h in 2usize..12,
        w in -1.0f64..2.0,
    ) {
        let sc = scenario(m, n, e, h);
        for kind in [LossKind::CrossEntropy, LossKind::WeightedSemantic { weight: w }] {
            check(&sc, sc.semantic_channel(), kind, seed)?;
        }
    }

    #[test]
    fn awgn_channel_gradients(seed in any::<u64>(), snr in -5.0f64..30.0) {
        let sc = scenario(8, 2, 8, 8);
        check(&sc, ChannelModel::Awgn { snr_db: snr }, LossKind::CrossEntropy, seed)?;
        check(&sc, ChannelModel::Awgn { snr_db: f64::INFINITY }, LossKind::CrossEntropy, seed)?;
    }
}

#[test]
fn unused_embedding_rows_get_no_gradient() {
    let sc = scenario(8, 2, 4, 4);
    let mut rng = RngStream::new(5);
    let params = ModelParams::init(sc.dims(), &mut rng);
    let draw = ChannelDraw::sample(&mut rng, 2);
    let mut grads = params.zeros_like();
    sample_loss_grad(&params, 3, &sc.semantic_channel(), &draw, LossKind::CrossEntropy, &mut grads).unwrap();
    for s in 1..=8 {
        let row_used = grads.tx_embedding.row(s - 1).iter().any(|&g| g != 0.0);
        assert_eq!(row_used, s == 3, "row {s}");
    }
}
