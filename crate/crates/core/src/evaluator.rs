//! Monte-Carlo evaluation: per-message BLER and RMSE, their averages,
//! constellation exports and scheme comparisons.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autoencoder::{Scenario, Scheme, Transceiver};
use crate::channel::{ChannelDraw, ChannelModel};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::{streams, RngStream};

/// Channel used at test time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum EvalChannel {
    /// The scenario's semantic path-loss channel, for every scheme.
    #[default]
    Semantic,
    Awgn { snr_db: f64 },
    Noiseless,
}

impl EvalChannel {
    fn model(self, scenario: &Scenario) -> ChannelModel {
        match self {
            EvalChannel::Semantic => scenario.semantic_channel(),
            EvalChannel::Awgn { snr_db } => ChannelModel::Awgn { snr_db },
            EvalChannel::Noiseless => ChannelModel::Awgn {
                snr_db: f64::INFINITY,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRow {
    pub message: usize,
    pub distance_m: f64,
    pub trials: u32,
    pub bler: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub avg_bler: f64,
    pub avg_rmse: f64,
    pub scheme: Scheme,
    pub scenario_hash: String,
    pub seed: u64,
    pub trials: u32,
}

/// Aggregates of one evaluation, with enough metadata to match it to its
/// scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub scheme: Scheme,
    pub avg_bler: f64,
    pub avg_rmse: f64,
    pub trials: u32,
    #[serde(with = "crate::rng::seed_serde")]
    pub seed: u64,
    pub scenario_hash: String,
}

impl Summary {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("summary serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("bad summary: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

impl EvalReport {
    pub fn row(&self, s: usize) -> &EvalRow {
        &self.rows[s - 1]
    }

    pub fn summary(&self) -> Summary {
        Summary {
            scheme: self.scheme,
            avg_bler: self.avg_bler,
            avg_rmse: self.avg_rmse,
            trials: self.trials,
            seed: self.seed,
            scenario_hash: self.scenario_hash.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["message", "distance_m", "trials", "bler", "rmse"])?;
        for r in &self.rows {
            w.write_record([
                r.message.to_string(),
                r.distance_m.to_string(),
                r.trials.to_string(),
                r.bler.to_string(),
                r.rmse.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Sends every message `trials` times through `channel` and tallies the
/// decisions. Message `s` uses its own substream of `seed`, so the result is
/// the same whatever the execution mode.
pub fn evaluate<T: Transceiver + ?Sized>(
    model: &T,
    scenario: &Scenario,
    trials: u32,
    seed: u64,
    channel: EvalChannel,
    exec: Execution,
) -> Result<EvalReport> {
    if trials == 0 {
        return Err(Error::ZeroTrials);
    }
    for (what, model_dim, requested) in [
        ("M", model.messages(), scenario.messages),
        ("n", model.channel_uses(), scenario.channel_uses),
    ] {
        if model_dim != requested {
            return Err(Error::ModelDimension {
                what,
                model: model_dim,
                requested,
            });
        }
    }
    let ch = channel.model(scenario);
    let root = RngStream::new(seed);
    let m = scenario.messages;
    let n = scenario.channel_uses;

    let rows = exec.map(m, |k| -> Result<EvalRow> {
        let s = k + 1;
        let mut rng = root.substream(streams::EVAL_MESSAGE + s as u64);
        let x = model.encode(s)?;
        let mut errors = 0u64;
        let mut sq = 0.0;
        for _ in 0..trials {
            let draw = ChannelDraw::sample(&mut rng, n);
            let (y, _) = ch.apply_draw(&x, s, &draw)?;
            let s_hat = model.decode(&y)?.classify();
            if s_hat != s {
                errors += 1;
                let d = s_hat as f64 - s as f64;
                sq += d * d;
            }
        }
        let t = f64::from(trials);
        Ok(EvalRow {
            message: s,
            distance_m: scenario.distance_map.distance(s),
            trials,
            bler: errors as f64 / t,
            rmse: (sq / t).sqrt(),
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let avg_bler = rows.iter().map(|r| r.bler).sum::<f64>() / m as f64;
    let avg_rmse = rows.iter().map(|r| r.rmse).sum::<f64>() / m as f64;
    Ok(EvalReport {
        rows,
        avg_bler,
        avg_rmse,
        scheme: scenario.scheme,
        scenario_hash: scenario.hash(),
        seed,
        trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstellationRow {
    pub message: usize,
    /// 1-based channel use.
    pub symbol_index: usize,
    pub re: f64,
    pub im: f64,
}

/// The encoder output of every message, one row per symbol.
pub fn constellation_export<T: Transceiver + ?Sized>(model: &T) -> Result<Vec<ConstellationRow>> {
    let mut rows = Vec::with_capacity(model.messages() * model.channel_uses());
    for s in 1..=model.messages() {
        let x = model.encode(s)?;
        for k in 0..x.n() {
            let (re, im) = x.symbol(k);
            rows.push(ConstellationRow {
                message: s,
                symbol_index: k + 1,
                re,
                im,
            });
        }
    }
    Ok(rows)
}

pub fn write_constellation_csv<W: Write>(rows: &[ConstellationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["message", "symbol_index", "re", "im"])?;
    for r in rows {
        w.write_record([
            r.message.to_string(),
            r.symbol_index.to_string(),
            r.re.to_string(),
            r.im.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub scheme: Scheme,
    pub avg_bler: f64,
    pub avg_rmse: f64,
    /// `100·(base − x)/base`; positive is better than the reference, `None`
    /// when the reference is zero.
    pub bler_improvement_pct: Option<f64>,
    pub rmse_improvement_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub reference: Scheme,
    pub rows: Vec<ComparisonRow>,
}

pub fn improvement_pct(base: f64, x: f64) -> Option<f64> {
    (base != 0.0).then(|| 100.0 * (base - x) / base)
}

/// Tabulates `summaries` against the baseline, or against the first entry
/// when no baseline is present.
pub fn compare(summaries: &[Summary]) -> Result<Comparison> {
    let first = summaries
        .first()
        .ok_or_else(|| Error::Config("nothing to compare".into()))?;
    for s in summaries {
        if s.scenario_hash != first.scenario_hash {
            return Err(Error::MismatchedScenarios {
                expected: first.scenario_hash.clone(),
                found: s.scenario_hash.clone(),
            });
        }
    }
    let base = summaries
        .iter()
        .find(|s| s.scheme == Scheme::Baseline)
        .unwrap_or(first);
    let rows = summaries
        .iter()
        .map(|s| ComparisonRow {
            scheme: s.scheme,
            avg_bler: s.avg_bler,
            avg_rmse: s.avg_rmse,
            bler_improvement_pct: improvement_pct(base.avg_bler, s.avg_bler),
            rmse_improvement_pct: improvement_pct(base.avg_rmse, s.avg_rmse),
        })
        .collect();
    Ok(Comparison {
        reference: base.scheme,
        rows,
    })
}

impl Comparison {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let pct = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "scheme",
            "avg_bler",
            "avg_rmse",
            "bler_improvement_pct",
            "rmse_improvement_pct",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.scheme.to_string(),
                r.avg_bler.to_string(),
                r.avg_rmse.to_string(),
                pct(r.bler_improvement_pct),
                pct(r.rmse_improvement_pct),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Fixed-width text table, e.g. `spl  0.0129  4.79 (76.1%)`.
    pub fn to_table(&self) -> String {
        let cell = |v: f64, p: Option<f64>| match p {
            Some(p) => format!("{v:.4} ({p:+.1}%)"),
            None => format!("{v:.4}"),
        };
        let mut out = format!("{:<14}{:>22}{:>22}\n", "scheme", "avg BLER", "avg RMSE");
        for r in &self.rows {
            out.push_str(&format!(
                "{:<14}{:>22}{:>22}\n",
                r.scheme.as_str(),
                cell(r.avg_bler, r.bler_improvement_pct),
                cell(r.avg_rmse, r.rmse_improvement_pct)
            ));
        }
        out
    }
}
