//! Stochastic channels: constant-SNR AWGN and the semantic path-loss channel,
//! whose SNR is set by the distance the message itself encodes.
//!
//! Signal-power convention: the encoder emits codewords with `|x|² = n`
//! (unit power per complex symbol). Transmit power, path gain, shadowing and
//! the noise floor all fold into one per-symbol noise variance `1/γ`, split
//! evenly between the real and imaginary parts. Noise is additive and does
//! not depend on `x`, so the gradient of `y` with respect to `x` is the
//! identity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link_budget::{self, db_to_linear, LinkConstants, D_MIN_M};
use crate::math::RealVec;
use crate::rng::RngStream;

/// Tolerance on the unit-power precondition of the channel input.
pub const POWER_TOLERANCE: f64 = 1e-6;

/// `n` complex symbols stored as `2n` reals: the `n` real parts followed by
/// the `n` imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVec(RealVec);

impl ComplexVec {
    /// Wraps `[re_1..re_n, im_1..im_n]`.
    pub fn from_split(data: RealVec) -> Result<Self> {
        if data.is_empty() || !data.len().is_multiple_of(2) {
            return Err(Error::DimensionMismatch {
                context: "complex vector (even length expected)",
                expected: data.len() + data.len() % 2,
                found: data.len(),
            });
        }
        Ok(Self(data))
    }

    pub fn from_parts(re: &[f64], im: &[f64]) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::DimensionMismatch {
                context: "complex vector parts",
                expected: re.len(),
                found: im.len(),
            });
        }
        Self::from_split([re, im].concat())
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; 2 * n])
    }

    /// Number of complex symbols.
    pub fn n(&self) -> usize {
        self.0.len() / 2
    }

    /// `(re, im)` of the 0-based symbol `k`.
    pub fn symbol(&self, k: usize) -> (f64, f64) {
        (self.0[k], self.0[self.n() + k])
    }

    /// `|x|² = Σ re² + im²`
    pub fn energy(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> RealVec {
        self.0
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| v * c).collect())
    }
}

/// Affine message-to-distance map `d(s) = offset + step·s` metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceMap {
    pub offset: f64,
    pub step: f64,
}

impl Default for DistanceMap {
    fn default() -> Self {
        Self {
            offset: 0.0,
            step: 1.0,
        }
    }
}

impl DistanceMap {
    pub fn distance(&self, s: usize) -> f64 {
        self.offset + self.step * s as f64
    }

    /// Checks `d(s) ≥ D_MIN_M` for every `s` in `1..=messages`.
    pub fn validate(&self, messages: usize) -> Result<()> {
        if !(self.offset.is_finite() && self.step.is_finite()) {
            return Err(Error::InvalidConfig {
                key: "distance_map".into(),
                reason: "distance_map offset and step must be finite".into(),
            });
        }
        let lo = self.distance(1).min(self.distance(messages));
        if lo < D_MIN_M {
            return Err(Error::InvalidConfig {
                key: "distance_map".into(),
                reason: format!("distance_map gives {lo} m for an endpoint message, below the {D_MIN_M} m minimum"),
            });
        }
        Ok(())
    }
}

/// Everything a single channel use drew or derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRealization {
    /// `None` for the AWGN channel.
    pub distance_m: Option<f64>,
    /// Path gain plus shadowing; `None` for the AWGN channel.
    pub gain_db: Option<f64>,
    pub shadow_db: f64,
    pub snr_db: f64,
    pub snr_linear: f64,
    /// Noise variance per complex symbol, `1/γ`. Zero only for an infinite SNR.
    pub noise_var: f64,
}

impl ChannelRealization {
    fn from_snr_db(snr_db: f64) -> Self {
        let snr_linear = db_to_linear(snr_db);
        Self {
            distance_m: None,
            gain_db: None,
            shadow_db: 0.0,
            snr_db,
            snr_linear,
            noise_var: 1.0 / snr_linear,
        }
    }
}

/// The random inputs of one channel use, drawn ahead of applying them so a
/// batch can be drawn sequentially and then pushed through the network in
/// parallel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    /// Standard-normal shadowing variate (scaled by σ_dB when applied).
    pub shadow: f64,
    /// `2n` standard-normal noise variates, in [`ComplexVec`] layout.
    pub noise: RealVec,
}

impl ChannelDraw {
    /// Always consumes `1 + 2n` normals, whatever the channel, so stream
    /// positions do not depend on the channel settings.
    pub fn sample(rng: &mut RngStream, n: usize) -> Self {
        let shadow = rng.normal();
        let noise = (0..2 * n).map(|_| rng.normal()).collect();
        Self { shadow, noise }
    }

    /// A draw with no shadowing and no noise.
    pub fn zero(n: usize) -> Self {
        Self {
            shadow: 0.0,
            noise: vec![0.0; 2 * n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    /// Constant SNR for every message. `f64::INFINITY` disables the noise.
    Awgn { snr_db: f64 },
    /// SNR from the link budget at distance `map.distance(s)`, plus
    /// log-normal shadowing redrawn for every message.
    Semantic {
        link: LinkConstants,
        map: DistanceMap,
        messages: usize,
    },
}

impl ChannelModel {
    pub fn realize(&self, s: usize, draw: &ChannelDraw) -> Result<ChannelRealization> {
        match *self {
            ChannelModel::Awgn { snr_db } => Ok(ChannelRealization::from_snr_db(snr_db)),
            ChannelModel::Semantic {
                link,
                map,
                messages,
            } => {
                if s == 0 || s > messages {
                    return Err(Error::InvalidMessage { message: s, messages });
                }
                let d = map.distance(s);
                let shadow_db = link.shadow_sigma_db * draw.shadow;
                let path = link_budget::path_gain_db(d, link.wavelength_m, link.pathloss_exponent)?;
                let snr_db = link_budget::snr_db(&link, d, shadow_db)?;
                Ok(ChannelRealization {
                    distance_m: Some(d),
                    gain_db: Some(path + shadow_db),
                    shadow_db,
                    ..ChannelRealization::from_snr_db(snr_db)
                })
            }
        }
    }

    /// `y = x + w` with `w` built from `draw`.
    pub fn apply_draw(
        &self,
        x: &ComplexVec,
        s: usize,
        draw: &ChannelDraw,
    ) -> Result<(ComplexVec, ChannelRealization)> {
        check_normalized(x)?;
        if draw.noise.len() != x.as_slice().len() {
            return Err(Error::DimensionMismatch {
                context: "channel noise draw",
                expected: x.as_slice().len(),
                found: draw.noise.len(),
            });
        }
        let real = self.realize(s, draw)?;
        let y = add_noise(x.as_slice(), &real, draw);
        Ok((ComplexVec(y), real))
    }

    pub fn transmit(
        &self,
        x: &ComplexVec,
        s: usize,
        rng: &mut RngStream,
    ) -> Result<(ComplexVec, ChannelRealization)> {
        let draw = ChannelDraw::sample(rng, x.n());
        self.apply_draw(x, s, &draw)
    }
}

fn add_noise(x: &[f64], real: &ChannelRealization, draw: &ChannelDraw) -> RealVec {
    let sigma = (real.noise_var / 2.0).sqrt();
    x.iter()
        .zip(&draw.noise)
        .map(|(xi, zi)| xi + sigma * zi)
        .collect()
}

fn check_normalized(x: &ComplexVec) -> Result<()> {
    let per_symbol = x.energy() / x.n() as f64;
    if (per_symbol - 1.0).abs() > POWER_TOLERANCE {
        return Err(Error::UnnormalizedInput {
            power_per_symbol: per_symbol,
        });
    }
    Ok(())
}

/// Constant-SNR AWGN channel. `snr_db = f64::INFINITY` returns `y = x`.
pub fn awgn_apply(
    x: &ComplexVec,
    snr_db: f64,
    rng: &mut RngStream,
) -> Result<(ComplexVec, ChannelRealization)> {
    ChannelModel::Awgn { snr_db }.transmit(x, 1, rng)
}

/// Semantic path-loss channel for message `s` out of `messages`.
pub fn semantic_apply(
    x: &ComplexVec,
    s: usize,
    link: &LinkConstants,
    map: &DistanceMap,
    messages: usize,
    rng: &mut RngStream,
) -> Result<(ComplexVec, ChannelRealization)> {
    ChannelModel::Semantic {
        link: *link,
        map: *map,
        messages,
    }
    .transmit(x, s, rng)
}
