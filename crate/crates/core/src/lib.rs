//! Anytime-valid calibration monitoring on probability integral transforms.
//!
//! A deployed probabilistic model is calibrated exactly when its PITs
//! `U = F̂(Y)` are Uniform(0,1); any change in the calibration relationship
//! shows up as a distribution shift in the PIT stream. This crate watches for
//! such shifts with an always-valid sequential test:
//!
//! 1. [`pit`] turns each (prediction, outcome) pair into a PIT, tracks the
//!    order statistics of all PITs seen so far, and emits a jittered conformal
//!    p-value that is uniform whenever the stream is i.i.d. from any fixed
//!    continuous law — stable miscalibration stays silent, only *changes*
//!    register.
//! 2. [`betting`] bets an adaptive histogram density against uniformity of
//!    those p-values, yielding one-step e-values with mean one under the null.
//! 3. [`eprocess`] mixes the e-values over all candidate change start times
//!    into a single O(1)-per-update process and raises an alarm when it
//!    crosses `1/α`, which caps the probability of ever falsely alarming at α
//!    with no horizon or stopping rule in sight.
//! 4. [`changepoint`] scans the p-value log after an alarm and localizes the
//!    change with a Dirichlet–multinomial Bayes factor over every split.
//! 5. [`streams`] generates benchmark streams with known ground truth, and
//!    [`monitor`] wires the whole pipeline together with Monte Carlo
//!    calibration/detection harnesses.
//!
//! All statistical state is generic over the [`Real`] scalar (`f32` or
//! `f64`); the aliases at the crate root fix `f64`, which is what the CLI and
//! the documented numerical contracts use.

pub mod betting;
pub mod changepoint;
pub mod error;
pub mod eprocess;
pub mod monitor;
pub mod pit;
pub mod scalar;
mod seeds;
pub mod streams;

pub use error::{Error, Result};
pub use monitor::{
    run_calibration, run_detection, run_monitor, CalibrationSummary, DetectionSummary,
    MonitorConfig, OnAlarm, StagedLocalization,
};
pub use scalar::Real;
pub use streams::{PitLaw, ScenarioKind, ShiftParams, StreamScenario};

/// `f64` instantiations of the generic state types.
pub type PitValue = pit::PitValue<f64>;
pub type ConformalPValue = pit::ConformalPValue<f64>;
pub type RankTracker = pit::RankTracker<f64>;
pub type HistogramBettor = betting::HistogramBettor<f64>;
pub type MeanGainInputs = betting::MeanGainInputs<f64>;
pub type GainBreakdown = betting::GainBreakdown<f64>;
pub type MixtureEProcess = eprocess::MixtureEProcess<f64>;
pub type PValueLog = changepoint::PValueLog<f64>;
pub type ChangepointEstimate = changepoint::ChangepointEstimate<f64>;
pub type StreamRecord = streams::StreamRecord<f64>;
pub type Observation = monitor::Observation<f64>;
pub type Monitor = monitor::Monitor<f64>;
pub type TraceStep = monitor::TraceStep<f64>;
pub type AlarmReport = monitor::AlarmReport<f64>;
pub type MonitorOutcome = monitor::MonitorOutcome<f64>;
