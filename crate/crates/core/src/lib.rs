//! End-to-end learned wireless links where the transmitted message (a
//! distance index) determines the statistics of its own channel.
//!
//! The crate trains a transmitter/receiver pair of small dense networks under
//! three schemes:
//!
//! - [`Scheme::Baseline`]: cross-entropy training over a constant-SNR AWGN
//!   channel.
//! - [`Scheme::Spl`]: cross-entropy training over the semantic path-loss
//!   channel, where message `s` is sent over a link of distance `d(s)`.
//! - [`Scheme::WeightedSpl`]: as `Spl`, with a distance-weighted penalty on
//!   the spread of the receiver's probability mass around `s`.
//!
//! Every trained model is evaluated by Monte-Carlo simulation over the
//! semantic path-loss channel, producing per-distance BLER and RMSE curves.
//!
//! Numerics are double precision throughout and every random draw comes from
//! a seeded [`RngStream`], so runs are reproducible bit for bit. With the
//! `parallel` feature (on by default) the evaluator and the minibatch gradient
//! run on rayon; results do not depend on the thread count.

pub mod autoencoder;
pub mod channel;
pub mod cli;
pub mod config;
mod error;
pub mod evaluator;
pub mod exec;
pub mod link_budget;
pub mod loss;
pub mod math;
pub mod rng;
pub mod trainer;

pub use autoencoder::{ModelParams, Scenario, Scheme, Transceiver};
pub use channel::{ChannelModel, ChannelRealization, ComplexVec, DistanceMap};
pub use error::{Error, Result};
pub use evaluator::{EvalChannel, EvalReport};
pub use exec::Execution;
pub use link_budget::LinkConstants;
pub use loss::LossKind;
pub use math::ProbVector;
pub use rng::RngStream;
pub use trainer::{TrainLog, TrainSchedule, TrainStage};
