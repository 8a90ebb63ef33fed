//! Radio arithmetic: dB/dBm conversion, distance-dependent path gain and the
//! per-message SNR.
//!
//! Path gain uses the exponent-generalized Friis form
//! `10·φ·log10(λ / (4π·d))` dB, which is `10·log10((λ/(4πd))^φ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest distance accepted by [`path_gain_db`]; the model diverges at 0.
pub const D_MIN_M: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConstants {
    pub wavelength_m: f64,
    pub pathloss_exponent: f64,
    pub shadow_sigma_db: f64,
    /// Receiver noise power in dBm.
    pub noise_floor_dbm: f64,
    pub tx_power_dbm: f64,
}

impl Default for LinkConstants {
    /// 802.11p at 5.9 GHz: 5 cm wavelength, exponent 2.8, 3 dB shadowing,
    /// −95 dBm noise floor, 20 dBm (100 mW) transmit power.
    fn default() -> Self {
        Self {
            wavelength_m: 0.05,
            pathloss_exponent: 2.8,
            shadow_sigma_db: 3.0,
            noise_floor_dbm: -95.0,
            tx_power_dbm: 20.0,
        }
    }
}

impl LinkConstants {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| {
            Err(Error::InvalidConfig {
                key: key.to_owned(),
                reason: format!("{key} {reason}"),
            })
        };
        if !(self.wavelength_m > 0.0 && self.wavelength_m.is_finite()) {
            return bad("wavelength_m", "must be positive and finite");
        }
        if !(self.pathloss_exponent > 0.0 && self.pathloss_exponent.is_finite()) {
            return bad("pathloss_exponent", "must be positive and finite");
        }
        if !(self.shadow_sigma_db >= 0.0 && self.shadow_sigma_db.is_finite()) {
            return bad("shadow_sigma_db", "must be non-negative and finite");
        }
        if !self.noise_floor_dbm.is_finite() {
            return bad("noise_floor_dbm", "must be finite");
        }
        if !self.tx_power_dbm.is_finite() {
            return bad("tx_power_dbm", "must be finite");
        }
        Ok(())
    }

    /// SNR in dB at distance `d_m` with the given shadowing draw.
    pub fn snr_db(&self, d_m: f64, shadow_db: f64) -> Result<f64> {
        snr_db(self, d_m, shadow_db)
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> Result<f64> {
    if mw > 0.0 {
        Ok(10.0 * mw.log10())
    } else {
        Err(Error::NonPositivePower(mw))
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Path gain in dB (negative: a loss).
pub fn path_gain_db(d_m: f64, wavelength_m: f64, exponent: f64) -> Result<f64> {
    if d_m.is_nan() || d_m < D_MIN_M {
        return Err(Error::DistanceBelowMinimum {
            distance: d_m,
            min: D_MIN_M,
        });
    }
    if wavelength_m.is_nan() || wavelength_m <= 0.0 {
        return Err(Error::InvalidConfig {
            key: "wavelength_m".into(),
            reason: "wavelength_m must be positive".into(),
        });
    }
    Ok(10.0 * exponent * (wavelength_m / (4.0 * std::f64::consts::PI * d_m)).log10())
}

/// `tx_power + path_gain(d) + shadow − noise_floor`, all in dB.
pub fn snr_db(consts: &LinkConstants, d_m: f64, shadow_db: f64) -> Result<f64> {
    let gain = path_gain_db(d_m, consts.wavelength_m, consts.pathloss_exponent)?;
    Ok(consts.tx_power_dbm + gain + shadow_db - consts.noise_floor_dbm)
}
