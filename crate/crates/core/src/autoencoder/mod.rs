//! Transmitter and receiver networks, the experiment scenario they are
//! trained for, and the model file.

mod io;
mod model;

pub use io::{check_compatible, load_model, model_from_str, model_to_string, save_model, FORMAT_VERSION};
#[cfg(test)]
pub(crate) use model::tests as tests_support;
pub use model::{classify, normalize, ModelDims, ModelParams, ParamKey, Transceiver};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ChannelModel, DistanceMap};
use crate::error::{Error, Result};
use crate::link_budget::{mw_to_dbm, LinkConstants};
use crate::loss::LossKind;
use crate::trainer::TrainSchedule;

/// SNR of the fixed AWGN channel the baseline trains on.
pub const BASELINE_SNR_DB: f64 = 7.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Cross-entropy over constant-SNR AWGN.
    Baseline,
    /// Cross-entropy over the semantic path-loss channel.
    Spl,
    /// Distance-weighted loss over the semantic path-loss channel.
    WeightedSpl,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Baseline, Scheme::Spl, Scheme::WeightedSpl];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Baseline => "baseline",
            Scheme::Spl => "spl",
            Scheme::WeightedSpl => "weighted-spl",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Scheme::Baseline),
            "spl" => Ok(Scheme::Spl),
            "weighted-spl" => Ok(Scheme::WeightedSpl),
            other => Err(Error::InvalidConfig {
                key: "scheme".into(),
                reason: format!("scheme must be one of baseline, spl, weighted-spl; got `{other}`"),
            }),
        }
    }
}

/// Full experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Number of messages `M`; a power of two.
    #[serde(rename = "M")]
    pub messages: usize,
    /// Complex channel uses per message `n`.
    #[serde(rename = "n")]
    pub channel_uses: usize,
    /// Transmitter embedding width.
    pub embed_dim: usize,
    /// Receiver hidden width.
    pub hidden_dim: usize,
    pub scheme: Scheme,
    pub tx_power_dbm: f64,
    pub wavelength_m: f64,
    pub pathloss_exponent: f64,
    pub shadow_sigma_db: f64,
    pub noise_floor_dbm: f64,
    /// Training SNR of the baseline; `inf` trains it noiselessly.
    pub baseline_snr_db: f64,
    /// Signed weight of the distance penalty in the weighted-SPL loss.
    pub loss_weight: f64,
    #[serde(with = "crate::rng::seed_serde")]
    pub seed: u64,
    /// Evaluation trials per message.
    pub trials: u32,
    pub distance_map: DistanceMap,
    pub schedule: TrainSchedule,
}

impl Scenario {
    /// M = 256, n = 2, 100 mW, staged paper-scale schedule.
    pub fn scenario1() -> Self {
        let link = LinkConstants::default();
        Self {
            messages: 256,
            channel_uses: 2,
            embed_dim: 256,
            hidden_dim: 256,
            scheme: Scheme::Spl,
            tx_power_dbm: link.tx_power_dbm,
            wavelength_m: link.wavelength_m,
            pathloss_exponent: link.pathloss_exponent,
            shadow_sigma_db: link.shadow_sigma_db,
            noise_floor_dbm: link.noise_floor_dbm,
            baseline_snr_db: BASELINE_SNR_DB,
            loss_weight: 1.0,
            seed: 1,
            trials: 10_000,
            distance_map: DistanceMap::default(),
            schedule: TrainSchedule::paper(),
        }
    }

    /// Scenario 1 at 200 mW.
    pub fn scenario2() -> Self {
        Self {
            tx_power_dbm: mw_to_dbm(200.0).expect("positive power"),
            ..Self::scenario1()
        }
    }

    /// Scenario 1 with n = 4.
    pub fn scenario3() -> Self {
        Self {
            channel_uses: 4,
            ..Self::scenario1()
        }
    }

    /// Scenario 1 with the desk-scale schedule and 1000 trials per message.
    pub fn desk() -> Self {
        Self {
            trials: 1000,
            schedule: TrainSchedule::desk(),
            ..Self::scenario1()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "scenario1" => Ok(Self::scenario1()),
            "scenario2" => Ok(Self::scenario2()),
            "scenario3" => Ok(Self::scenario3()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::InvalidConfig {
                key: "preset".into(),
                reason: format!(
                    "preset must be one of scenario1, scenario2, scenario3, desk; got `{other}`"
                ),
            }),
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Bits per message, `k = log2(M)`.
    pub fn bits(&self) -> u32 {
        self.messages.trailing_zeros()
    }

    /// Rate `R = k/n` in bits per channel use.
    pub fn rate(&self) -> f64 {
        f64::from(self.bits()) / self.channel_uses as f64
    }

    pub fn link(&self) -> LinkConstants {
        LinkConstants {
            wavelength_m: self.wavelength_m,
            pathloss_exponent: self.pathloss_exponent,
            shadow_sigma_db: self.shadow_sigma_db,
            noise_floor_dbm: self.noise_floor_dbm,
            tx_power_dbm: self.tx_power_dbm,
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            messages: self.messages,
            channel_uses: self.channel_uses,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
        }
    }

    /// The semantic path-loss channel; every scheme is evaluated on it.
    pub fn semantic_channel(&self) -> ChannelModel {
        ChannelModel::Semantic {
            link: self.link(),
            map: self.distance_map,
            messages: self.messages,
        }
    }

    /// Baseline trains on fixed-SNR AWGN, the other schemes on the semantic
    /// channel.
    pub fn training_channel(&self) -> ChannelModel {
        match self.scheme {
            Scheme::Baseline => ChannelModel::Awgn {
                snr_db: self.baseline_snr_db,
            },
            Scheme::Spl | Scheme::WeightedSpl => self.semantic_channel(),
        }
    }

    pub fn loss_kind(&self) -> LossKind {
        match self.scheme {
            Scheme::Baseline | Scheme::Spl => LossKind::CrossEntropy,
            Scheme::WeightedSpl => LossKind::WeightedSemantic {
                weight: self.loss_weight,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| {
            Err(Error::InvalidConfig {
                key: key.into(),
                reason,
            })
        };
        if self.messages < 2 || !self.messages.is_power_of_two() {
            return bad("M", format!("M must be a power of two (at least 2), got {}", self.messages));
        }
        if self.channel_uses == 0 {
            return bad("n", "n must be at least 1".into());
        }
        if self.embed_dim == 0 {
            return bad("embed_dim", "embed_dim must be at least 1".into());
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim", "hidden_dim must be at least 1".into());
        }
        if self.baseline_snr_db.is_nan() || self.baseline_snr_db == f64::NEG_INFINITY {
            return bad("baseline_snr_db", "baseline_snr_db must be a number or inf".into());
        }
        if !self.loss_weight.is_finite() {
            return bad("loss_weight", "loss_weight must be finite".into());
        }
        if self.trials == 0 {
            return bad("trials", "trials must be at least 1".into());
        }
        self.link().validate()?;
        self.distance_map.validate(self.messages)?;
        self.schedule.validate()?;
        Ok(())
    }

    /// Short digest of every setting except the scheme, so the three schemes
    /// of one experiment share a hash.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(&Self {
            scheme: Scheme::Baseline,
            ..self.clone()
        })
        .expect("scenario serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
