//! Staged minibatch SGD.
//!
//! Each stage draws a fresh pool of uniformly random messages, then for every
//! step samples a minibatch from the pool, pushes it through
//! encode → channel → decode → loss, and applies one SGD step at the stage's
//! learning rate.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autoencoder::{ModelParams, ParamKey, Scenario};
use crate::channel::{ChannelDraw, ChannelModel};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::loss::{loss_grad, loss_value, LossKind};
use crate::math::{sgd_step, softmax, GradTape, Op};
use crate::rng::{streams, RngStream};

/// Samples per parallel work item. Fixed so the reduction order, and hence
/// every bit of the result, is independent of the thread count.
const CHUNK: usize = 64;

/// Steps between power-constraint spot checks.
const POWER_CHECK_EVERY: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainStage {
    pub pool_size: usize,
    pub steps: u64,
    pub lr: f64,
    pub minibatch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSchedule {
    /// Steps between log records; the last step of every stage is always
    /// logged.
    pub log_every: u64,
    /// Held-out transmissions used for the running BLER in the log.
    pub probe_size: usize,
    pub stages: Vec<TrainStage>,
}

impl TrainSchedule {
    fn ladder(pool_size: usize, steps: u64, minibatch_size: usize, lrs: &[f64]) -> Self {
        Self {
            log_every: 100,
            probe_size: 1000,
            stages: lrs
                .iter()
                .map(|&lr| TrainStage {
                    pool_size,
                    steps,
                    lr,
                    minibatch_size,
                })
                .collect(),
        }
    }

    /// Three stages of 10,000 steps over 200,000-sample pools, minibatch 1000,
    /// learning rate 0.1 → 0.01 → 0.001.
    pub fn paper() -> Self {
        Self::ladder(200_000, 10_000, 1000, &[0.1, 0.01, 0.001])
    }

    /// The same ladder at 20,000-sample pools, 3000 steps, minibatch 500.
    pub fn desk() -> Self {
        Self {
            log_every: 50,
            ..Self::ladder(20_000, 3000, 500, &[0.1, 0.01, 0.001])
        }
    }

    /// Full-scale stages at a constant learning rate of 0.01.
    pub fn constant_lr() -> Self {
        Self::ladder(200_000, 10_000, 1000, &[0.01, 0.01, 0.01])
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "desk" => Ok(Self::desk()),
            "constant-lr" => Ok(Self::constant_lr()),
            other => Err(Error::InvalidConfig {
                key: "schedule.preset".into(),
                reason: format!(
                    "schedule.preset must be one of paper, desk, constant-lr; got `{other}`"
                ),
            }),
        }
    }

    pub fn total_steps(&self) -> u64 {
        self.stages.iter().map(|s| s.steps).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::InvalidSchedule("at least one stage is required".into()));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidSchedule("log_every must be at least 1".into()));
        }
        for (k, st) in self.stages.iter().enumerate() {
            let k = k + 1;
            if !(st.lr > 0.0 && st.lr.is_finite()) {
                return Err(Error::InvalidSchedule(format!(
                    "stage {k}: lr must be positive and finite, got {}",
                    st.lr
                )));
            }
            if st.minibatch_size == 0 {
                return Err(Error::InvalidSchedule(format!(
                    "stage {k}: minibatch_size must be at least 1"
                )));
            }
            if st.minibatch_size > st.pool_size {
                return Err(Error::InvalidSchedule(format!(
                    "stage {k}: minibatch_size {} exceeds pool_size {}",
                    st.minibatch_size, st.pool_size
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    /// Global step, 1-based.
    pub step: u64,
    /// Stage, 1-based.
    pub stage: usize,
    pub lr: f64,
    /// Mean minibatch loss over the steps since the previous record.
    pub loss: f64,
    pub probe_bler: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
}

impl TrainLog {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "stage", "lr", "loss", "probe_bler"])?;
        for r in &self.records {
            w.write_record([
                r.step.to_string(),
                r.stage.to_string(),
                r.lr.to_string(),
                r.loss.to_string(),
                r.probe_bler.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// First- and last-decile mean loss of one stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageCurve {
    pub stage: usize,
    pub records: usize,
    pub first_decile: f64,
    pub last_decile: f64,
}

/// Summarizes the log per stage. A decile is at least one record.
pub fn training_loss_curve(log: &TrainLog) -> Result<Vec<StageCurve>> {
    if log.records.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start < log.records.len() {
        let stage = log.records[start].stage;
        let end = start
            + log.records[start..]
                .iter()
                .take_while(|r| r.stage == stage)
                .count();
        let losses: Vec<f64> = log.records[start..end].iter().map(|r| r.loss).collect();
        let k = (losses.len() / 10).max(1);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        out.push(StageCurve {
            stage,
            records: losses.len(),
            first_decile: mean(&losses[..k]),
            last_decile: mean(&losses[losses.len() - k..]),
        });
        start = end;
    }
    Ok(out)
}

/// Loss of one transmission with the channel randomness fixed by `draw`.
pub fn sample_loss(
    params: &ModelParams,
    s: usize,
    channel: &ChannelModel,
    draw: &ChannelDraw,
    kind: LossKind,
) -> Result<f64> {
    let x = params.encode_traced(s, None)?;
    let (y, _) = channel.apply_draw(&x, s, draw)?;
    Ok(loss_value(kind, &softmax(&params.logits(&y)?), s))
}

/// Like [`sample_loss`], and adds the parameter gradient into `grads`.
pub fn sample_loss_grad(
    params: &ModelParams,
    s: usize,
    channel: &ChannelModel,
    draw: &ChannelDraw,
    kind: LossKind,
    grads: &mut ModelParams,
) -> Result<f64> {
    let mut tape = GradTape::new();
    let x = params.encode_traced(s, Some(&mut tape))?;
    let (y, _) = channel.apply_draw(&x, s, draw)?;
    // The noise is additive, so the channel passes gradients through as is.
    tape.record(Op::<ParamKey>::AddConstant);
    let z = params.logits_traced(&y, Some(&mut tape))?;
    let b = softmax(&z);
    let loss = loss_value(kind, &b, s);
    tape.backward(params, grads, &loss_grad(kind, &b, s))?;
    Ok(loss)
}

struct Sample {
    message: usize,
    draw: ChannelDraw,
}

/// Mean loss and mean gradient over `batch`.
fn batch_gradient(
    params: &ModelParams,
    batch: &[Sample],
    channel: &ChannelModel,
    kind: LossKind,
    exec: Execution,
) -> Result<(f64, ModelParams)> {
    let parts = exec.map_chunks(batch, CHUNK, |chunk| -> Result<(f64, ModelParams)> {
        let mut grads = params.zeros_like();
        let mut loss = 0.0;
        for smp in chunk {
            loss += sample_loss_grad(params, smp.message, channel, &smp.draw, kind, &mut grads)?;
        }
        Ok((loss, grads))
    });
    let mut parts = parts.into_iter();
    let (mut loss, mut grads) = parts.next().expect("non-empty batch")?;
    for part in parts {
        let (l, g) = part?;
        loss += l;
        grads.accumulate(&g);
    }
    let scale = 1.0 / batch.len() as f64;
    grads.scale(scale);
    Ok((loss * scale, grads))
}

fn probe_bler(
    params: &ModelParams,
    probe: &[Sample],
    channel: &ChannelModel,
    exec: Execution,
) -> Result<f64> {
    if probe.is_empty() {
        return Ok(f64::NAN);
    }
    let errors = exec.map_chunks(probe, CHUNK, |chunk| -> Result<usize> {
        let mut errors = 0;
        for smp in chunk {
            let x = params.encode_traced(smp.message, None)?;
            let (y, _) = channel.apply_draw(&x, smp.message, &smp.draw)?;
            if softmax(&params.logits(&y)?).classify() != smp.message {
                errors += 1;
            }
        }
        Ok(errors)
    });
    let mut total = 0;
    for e in errors {
        total += e?;
    }
    Ok(total as f64 / probe.len() as f64)
}

fn check_power(params: &ModelParams) -> Result<()> {
    let d = params.dims();
    let expected = d.channel_uses as f64;
    for s in 1..=d.messages {
        let power = params.encode_traced(s, None)?.energy();
        if (power - expected).abs() > crate::channel::POWER_TOLERANCE {
            return Err(Error::PowerConstraint {
                message: s,
                power,
                expected,
            });
        }
    }
    Ok(())
}

fn draw_samples(
    rng: &mut RngStream,
    count: usize,
    n: usize,
    mut message: impl FnMut(&mut RngStream) -> usize,
) -> Vec<Sample> {
    (0..count)
        .map(|_| {
            let message = message(rng);
            let draw = ChannelDraw::sample(rng, n);
            Sample { message, draw }
        })
        .collect()
}

/// Trains a fresh model for `scenario` under `schedule`.
///
/// The training channel and loss follow the scenario's scheme. All random
/// draws are made sequentially from substreams of `seed`; only the gradient
/// computation runs under `exec`, so the result is identical for either
/// execution mode.
pub fn train(
    scenario: &Scenario,
    schedule: &TrainSchedule,
    seed: u64,
    exec: Execution,
) -> Result<(ModelParams, TrainLog)> {
    scenario.validate()?;
    schedule.validate()?;
    let root = RngStream::new(seed);
    let mut params = ModelParams::init(scenario.dims(), &mut root.substream(streams::INIT));
    let channel = scenario.training_channel();
    let kind = scenario.loss_kind();
    let m = scenario.messages;
    let n = scenario.channel_uses;

    let probe = draw_samples(
        &mut root.substream(streams::PROBE),
        schedule.probe_size,
        n,
        |r| r.message(m),
    );

    let mut log = TrainLog::default();
    let mut step = 0u64;
    for (k, stage) in schedule.stages.iter().enumerate() {
        let stage_no = k + 1;
        let mut rng = root.substream(streams::STAGE + k as u64);
        let pool: Vec<usize> = (0..stage.pool_size).map(|_| rng.message(m)).collect();
        let mut window_loss = 0.0;
        let mut window_len = 0u64;
        for local in 1..=stage.steps {
            step += 1;
            let batch = draw_samples(&mut rng, stage.minibatch_size, n, |r| {
                pool[r.index(pool.len())]
            });
            let (loss, grads) = batch_gradient(&params, &batch, &channel, kind, exec)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    stage: stage_no,
                    step,
                    lr: stage.lr,
                    loss,
                });
            }
            sgd_step(&mut params, &grads, stage.lr)?;
            window_loss += loss;
            window_len += 1;

            if step.is_multiple_of(POWER_CHECK_EVERY) {
                check_power(&params)?;
            }
            if local % schedule.log_every == 0 || local == stage.steps {
                log.records.push(LogRecord {
                    step,
                    stage: stage_no,
                    lr: stage.lr,
                    loss: window_loss / window_len as f64,
                    probe_bler: probe_bler(&params, &probe, &channel, exec)?,
                });
                window_loss = 0.0;
                window_len = 0;
            }
        }
    }
    Ok((params, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::Scheme;
    use crate::math::FlatParams;

    fn tiny() -> Scenario {
        Scenario {
            messages: 8,
            channel_uses: 2,
            embed_dim: 8,
            hidden_dim: 8,
            schedule: TrainSchedule {
                log_every: 10,
                probe_size: 50,
                stages: vec![
                    TrainStage {
                        pool_size: 200,
                        steps: 40,
                        lr: 0.1,
                        minibatch_size: 70,
                    };
                    2
                ],
            },
            ..Scenario::desk()
        }
    }

    #[test]
    fn zero_steps_returns_initialization() {
        let mut sc = tiny();
        for st in &mut sc.schedule.stages {
            st.steps = 0;
        }
        let (p, log) = train(&sc, &sc.schedule, 5, Execution::Sequential).unwrap();
        let init = ModelParams::init(sc.dims(), &mut RngStream::new(5).substream(streams::INIT));
        assert_eq!(p, init);
        assert!(log.records.is_empty());
    }

    #[test]
    fn reproducible_and_mode_independent() {
        let sc = tiny();
        let (a, la) = train(&sc, &sc.schedule, 3, Execution::Sequential).unwrap();
        let (b, lb) = train(&sc, &sc.schedule, 3, Execution::Parallel).unwrap();
        let bits = |p: &ModelParams| -> Vec<u64> { p.flat().concat().iter().map(|v| v.to_bits()).collect() };
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(la, lb);
        let (c, _) = train(&sc, &sc.schedule, 4, Execution::Sequential).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn log_shape() {
        let sc = tiny();
        let (_, log) = train(&sc, &sc.schedule, 1, Execution::default()).unwrap();
        assert_eq!(log.records.len(), 8);
        assert!(log.records.windows(2).all(|w| w[0].step < w[1].step));
        assert_eq!(log.records.last().unwrap().step, 80);
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,stage,lr,loss,probe_bler\n"));
        assert_eq!(text.lines().count(), 9);
    }

    #[test]
    fn baseline_never_touches_distance_map() {
        // A distance map that would fail the link budget for every message.
        let mut sc = tiny().with_scheme(Scheme::Baseline);
        sc.distance_map.offset = -1000.0;
        assert!(matches!(sc.training_channel(), ChannelModel::Awgn { snr_db } if snr_db == 7.0));
        let ch = sc.training_channel();
        let x = ModelParams::init(sc.dims(), &mut RngStream::new(0)).encode_traced(1, None).unwrap();
        ch.apply_draw(&x, 1, &ChannelDraw::zero(2)).unwrap();
    }

    #[test]
    fn schedule_validation() {
        let mut s = TrainSchedule::desk();
        s.validate().unwrap();
        s.stages[1].lr = 0.0;
        assert!(matches!(s.validate(), Err(Error::InvalidSchedule(_))));
        let mut s = TrainSchedule::desk();
        s.stages[0].minibatch_size = s.stages[0].pool_size + 1;
        assert!(s.validate().is_err());
        assert_eq!(TrainSchedule::paper().total_steps(), 30_000);
        assert!(TrainSchedule::preset("constant-lr").unwrap().stages.iter().all(|s| s.lr == 0.01));
    }

    #[test]
    fn loss_curve() {
        assert!(matches!(training_loss_curve(&TrainLog::default()), Err(Error::EmptyLog)));
        let one = TrainLog {
            records: vec![LogRecord {
                step: 1,
                stage: 1,
                lr: 0.1,
                loss: 2.0,
                probe_bler: 0.5,
            }],
        };
        let c = training_loss_curve(&one).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].first_decile, c[0].last_decile), (2.0, 2.0));
    }

    #[test]
    fn constant_loss_gives_flat_curve() {
        let log = TrainLog {
            records: (1..=40)
                .map(|step| LogRecord {
                    step,
                    stage: 1 + (step as usize - 1) / 20,
                    lr: 0.01,
                    loss: 0.75,
                    probe_bler: 0.0,
                })
                .collect(),
        };
        let c = training_loss_curve(&log).unwrap();
        assert_eq!(c.len(), 2);
        for st in c {
            assert_eq!((st.records, st.first_decile, st.last_decile), (20, 0.75, 0.75));
        }
    }
}
