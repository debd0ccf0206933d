//! Monitor engine and Monte Carlo harnesses.
//!
//! Per observation the engine runs rank insertion → jittered p-value →
//! density bet → mixture e-process step, and only then folds the p-value into
//! the bettor, so every bet depends exclusively on past p-values. On the first
//! alarm it localizes the changepoint from the p-value log as of the alarm
//! time and freezes the report; a monitor configured to continue keeps
//! updating its trace but never re-alarms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::betting::HistogramBettor;
use crate::changepoint::{estimate_changepoint, ChangepointEstimate, PValueLog};
use crate::eprocess::MixtureEProcess;
use crate::error::{Error, Result};
use crate::pit::{conformal_pvalue, pit_from_gaussian, PitValue, RankTracker};
use crate::scalar::Real;
use crate::seeds::derive_seed;
use crate::streams::{generate, ScenarioKind, StreamScenario};

/// What the engine does after the first alarm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OnAlarm {
    /// Stop consuming input (the benchmark convention).
    Halt,
    /// Keep updating state and traces; the alarm stays latched.
    Continue,
}

/// Engine configuration.
#[derive(Debug, Clone, Serialize)]
pub struct MonitorConfig {
    /// Significance level; the alarm threshold is `1/alpha`.
    pub alpha: f64,
    /// Histogram bins shared by the bettor and the changepoint scan.
    pub bins: usize,
    /// Dirichlet concentration for changepoint scoring.
    pub kappa: f64,
    /// Base seed; tie-break and jitter streams derive from it independently.
    pub seed: u64,
    pub on_alarm: OnAlarm,
    /// Whether per-step trace records are collected by [`run_monitor`].
    pub trace: bool,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            bins: 100,
            kappa: 0.5,
            seed: 0,
            on_alarm: OnAlarm::Halt,
            trace: false,
        }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha {} must lie in (0, 1)",
                self.alpha
            )));
        }
        if self.bins < 2 {
            return Err(Error::Config(format!(
                "bins {} must be at least 2",
                self.bins
            )));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::Config(format!(
                "kappa {} must be positive",
                self.kappa
            )));
        }
        Ok(())
    }
}

/// One input record: either a precomputed PIT or a Gaussian predictive
/// distribution with its realized outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation<R> {
    Pit(R),
    Gaussian { y: R, mu: R, sigma: R },
}

/// Per-step trace record.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceStep<R> {
    pub t: u64,
    pub u: R,
    pub rank: u64,
    pub p: R,
    pub e: R,
    pub log_m: R,
    pub alarmed: bool,
}

/// Alarm summary: when, the localized changepoint, and the post-change
/// p-value histogram for the segment `[τ̂, T]`.
#[derive(Debug, Clone, Serialize)]
pub struct AlarmReport<R> {
    pub alarm_time: u64,
    pub changepoint_estimate: u64,
    pub log_bf_at_estimate: R,
    pub final_log_m: R,
    pub post_alarm_histogram: Vec<u64>,
}

/// Sequential monitor state for one stream.
#[derive(Debug, Clone)]
pub struct Monitor<R: Real> {
    config: MonitorConfig,
    tracker: RankTracker<R>,
    bettor: HistogramBettor<R>,
    process: MixtureEProcess<R>,
    pvalue_log: PValueLog<R>,
    tie_rng: ChaCha8Rng,
    jitter_rng: ChaCha8Rng,
    alarm: Option<AlarmReport<R>>,
    changepoint: Option<ChangepointEstimate<R>>,
}

const TIE_STREAM: u64 = 0x7131;
const JITTER_STREAM: u64 = 0x9A55;

impl<R: Real> Monitor<R> {
    pub fn new(config: MonitorConfig) -> Result<Self> {
        config.validate()?;
        let tie_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, TIE_STREAM, 0));
        let jitter_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, JITTER_STREAM, 0));
        Ok(Self {
            tracker: RankTracker::new(),
            bettor: HistogramBettor::new(config.bins)?,
            process: MixtureEProcess::new(R::from_f64(config.alpha))?,
            pvalue_log: PValueLog::new(config.bins)?,
            tie_rng,
            jitter_rng,
            alarm: None,
            changepoint: None,
            config,
        })
    }

    /// Processes one observation and returns its trace record.
    pub fn observe(&mut self, obs: Observation<R>) -> Result<TraceStep<R>> {
        let u = match obs {
            Observation::Pit(v) => PitValue::new(v)?,
            Observation::Gaussian { y, mu, sigma } => pit_from_gaussian(y, mu, sigma)?,
        };
        let (rank, time) = self.tracker.insert_and_rank(u, &mut self.tie_rng);
        let pv = conformal_pvalue::<R, _>(rank, time, &mut self.jitter_rng)?;
        let e = self.bettor.bet(pv.p)?;
        let step = self.process.step(e)?;
        // Bettor update comes strictly after betting: the next bet may depend
        // on this p-value, this one must not.
        self.bettor.update(pv.p)?;
        self.pvalue_log.push(pv.p)?;
        if step.alarmed_now {
            self.localize_alarm()?;
        }
        Ok(TraceStep {
            t: time,
            u: u.value(),
            rank,
            p: pv.p,
            e,
            log_m: step.log_m,
            alarmed: self.process.check_alarm(),
        })
    }

    fn localize_alarm(&mut self) -> Result<()> {
        let alarm_time = self.process.time();
        let estimate =
            estimate_changepoint(&self.pvalue_log, alarm_time, R::from_f64(self.config.kappa))?;
        let histogram = self
            .pvalue_log
            .bin_counts((estimate.tau_hat - 1) as usize..alarm_time as usize);
        self.alarm = Some(AlarmReport {
            alarm_time,
            changepoint_estimate: estimate.tau_hat,
            log_bf_at_estimate: estimate.log_bf_at_estimate(),
            final_log_m: self.process.log_m(),
            post_alarm_histogram: histogram,
        });
        self.changepoint = Some(estimate);
        Ok(())
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.config
    }

    /// Observations processed so far.
    pub fn time(&self) -> u64 {
        self.process.time()
    }

    pub fn log_m(&self) -> R {
        self.process.log_m()
    }

    pub fn alarmed(&self) -> bool {
        self.process.check_alarm()
    }

    pub fn alarm_report(&self) -> Option<&AlarmReport<R>> {
        self.alarm.as_ref()
    }

    /// Full Bayes-factor curve from the alarm-time scan, for inspecting
    /// secondary peaks.
    pub fn changepoint(&self) -> Option<&ChangepointEstimate<R>> {
        self.changepoint.as_ref()
    }

    pub fn pvalue_log(&self) -> &PValueLog<R> {
        &self.pvalue_log
    }
}

/// Outcome of a full monitoring run.
#[derive(Debug, Clone)]
pub struct MonitorOutcome<R> {
    /// Per-step records; populated only when `config.trace` is set.
    pub trace: Vec<TraceStep<R>>,
    pub alarm: Option<AlarmReport<R>>,
    /// Observations consumed (smaller than the input when halting on alarm).
    pub observations: u64,
    pub final_log_m: R,
}

/// Runs a monitor over a whole input stream, honoring the halt/continue
/// policy. Empty input completes with no alarm.
pub fn run_monitor<R: Real, I>(input: I, config: &MonitorConfig) -> Result<MonitorOutcome<R>>
where
    I: IntoIterator<Item = Observation<R>>,
{
    let mut monitor = Monitor::new(config.clone())?;
    let mut trace = Vec::new();
    for obs in input {
        let step = monitor.observe(obs)?;
        if config.trace {
            trace.push(step);
        }
        if monitor.alarmed() && config.on_alarm == OnAlarm::Halt {
            break;
        }
    }
    Ok(MonitorOutcome {
        trace,
        alarm: monitor.alarm.take(),
        observations: monitor.time(),
        final_log_m: monitor.log_m(),
    })
}

/// False-alarm estimate over independent null streams.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationSummary {
    pub trials: u64,
    pub length: u64,
    pub alarms: u64,
    pub fpr: f64,
    /// Binomial standard error `sqrt(fpr (1 − fpr) / trials)`.
    pub fpr_stderr: f64,
    /// Alarm times of the trials that alarmed, in trial order.
    pub alarm_times: Vec<u64>,
}

/// Runs `trials` i.i.d. Uniform(0,1) PIT streams of `length` through the full
/// pipeline and reports the fraction that ever alarms. Trials run in parallel
/// with per-trial derived seeds; aggregation is order-independent.
pub fn run_calibration<R: Real>(
    trials: u64,
    length: u64,
    config: &MonitorConfig,
) -> Result<CalibrationSummary> {
    config.validate()?;
    if trials < 1 {
        return Err(Error::InvalidInput {
            field: "trials",
            reason: "need at least one trial".to_string(),
        });
    }
    let outcomes: Vec<Option<u64>> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<Option<u64>> {
            let mut trial_config = config.clone();
            trial_config.seed = derive_seed(config.seed, 0xCA11, trial);
            trial_config.trace = false;
            trial_config.on_alarm = OnAlarm::Halt;
            let mut data = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0xDA7A, trial));
            let mut monitor = Monitor::<R>::new(trial_config)?;
            for _ in 0..length {
                let u = R::from_f64(data.random::<f64>());
                monitor.observe(Observation::Pit(u))?;
                if monitor.alarmed() {
                    break;
                }
            }
            Ok(monitor.alarm_report().map(|r| r.alarm_time))
        })
        .collect::<Result<_>>()?;

    let alarm_times: Vec<u64> = outcomes.iter().filter_map(|t| *t).collect();
    let alarms = alarm_times.len() as u64;
    let fpr = alarms as f64 / trials as f64;
    Ok(CalibrationSummary {
        trials,
        length,
        alarms,
        fpr,
        fpr_stderr: (fpr * (1.0 - fpr) / trials as f64).sqrt(),
        alarm_times,
    })
}

/// Extra localization metrics for staged-intensity runs.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StagedLocalization {
    pub mae_to_onset: f64,
    pub mae_to_final_phase: f64,
    /// Fraction of true positives whose τ̂ is strictly closer to the
    /// final-phase boundary than to onset.
    pub frac_closer_to_final: f64,
}

/// Detection metrics over repeated runs of one scenario.
#[derive(Debug, Clone, Serialize)]
pub struct DetectionSummary {
    pub trials: u64,
    /// Alarms at or after the true changepoint.
    pub true_positives: u64,
    /// Alarms strictly before the true changepoint.
    pub early_alarms: u64,
    pub tpr: f64,
    /// For null scenarios: fraction of trials that alarmed. For drift
    /// scenarios: fraction that alarmed before the changepoint.
    pub fpr: f64,
    /// Mean of `alarm_time − τ` over true positives.
    pub mean_delay: Option<f64>,
    /// Delay distribution over true positives, in trial order.
    pub delays: Vec<u64>,
    /// Mean `|τ̂ − τ|` over true positives.
    pub changepoint_mae: Option<f64>,
    pub staged: Option<StagedLocalization>,
}

/// Runs `trials` independent streams of `scenario` through the monitor and
/// aggregates TPR/FPR, delays, and changepoint error. Delay and localization
/// statistics follow the true-positives-only convention.
pub fn run_detection<R: Real>(
    scenario: &StreamScenario,
    trials: u64,
    config: &MonitorConfig,
) -> Result<DetectionSummary> {
    config.validate()?;
    scenario.validate()?;
    if trials < 1 {
        return Err(Error::InvalidInput {
            field: "trials",
            reason: "need at least one trial".to_string(),
        });
    }

    struct TrialResult {
        alarm_time: Option<u64>,
        tau_hat: Option<u64>,
    }

    let results: Vec<TrialResult> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<TrialResult> {
            let mut trial_scenario = scenario.clone();
            trial_scenario.seed = derive_seed(scenario.seed, 0x5CE0, trial);
            let mut trial_config = config.clone();
            trial_config.seed = derive_seed(config.seed, 0x0B5E, trial);
            trial_config.trace = false;
            trial_config.on_alarm = OnAlarm::Halt;

            let records = generate::<R>(&trial_scenario)?;
            let mut monitor = Monitor::<R>::new(trial_config)?;
            for r in &records {
                monitor.observe(Observation::Gaussian {
                    y: r.y,
                    mu: r.mu,
                    sigma: r.sigma,
                })?;
                if monitor.alarmed() {
                    break;
                }
            }
            Ok(TrialResult {
                alarm_time: monitor.alarm_report().map(|a| a.alarm_time),
                tau_hat: monitor.alarm_report().map(|a| a.changepoint_estimate),
            })
        })
        .collect::<Result<_>>()?;

    let tau = scenario.true_changepoint();
    let mut true_positives = 0u64;
    let mut early_alarms = 0u64;
    let mut delays = Vec::new();
    let mut abs_errors = Vec::new();
    let mut onset_errors = Vec::new();
    let mut final_errors = Vec::new();
    let mut closer_final = 0u64;

    for r in &results {
        let Some(alarm_time) = r.alarm_time else {
            continue;
        };
        match tau {
            None => early_alarms += 1,
            Some(tau) if alarm_time < tau => early_alarms += 1,
            Some(tau) => {
                true_positives += 1;
                delays.push(alarm_time - tau);
                let tau_hat = r.tau_hat.expect("alarm implies estimate") as f64;
                abs_errors.push((tau_hat - tau as f64).abs());
                if let Some(final_start) = scenario.final_phase_start() {
                    let to_onset = (tau_hat - tau as f64).abs();
                    let to_final = (tau_hat - final_start as f64).abs();
                    onset_errors.push(to_onset);
                    final_errors.push(to_final);
                    if to_final < to_onset {
                        closer_final += 1;
                    }
                }
            }
        }
    }

    let mean = |xs: &[f64]| -> Option<f64> {
        if xs.is_empty() {
            None
        } else {
            Some(xs.iter().sum::<f64>() / xs.len() as f64)
        }
    };

    let staged = if scenario.kind == ScenarioKind::StagedIntensity && true_positives > 0 {
        Some(StagedLocalization {
            mae_to_onset: mean(&onset_errors).unwrap_or(f64::NAN),
            mae_to_final_phase: mean(&final_errors).unwrap_or(f64::NAN),
            frac_closer_to_final: closer_final as f64 / true_positives as f64,
        })
    } else {
        None
    };

    Ok(DetectionSummary {
        trials,
        true_positives,
        early_alarms,
        tpr: true_positives as f64 / trials as f64,
        fpr: early_alarms as f64 / trials as f64,
        mean_delay: if delays.is_empty() {
            None
        } else {
            Some(delays.iter().sum::<u64>() as f64 / delays.len() as f64)
        },
        delays,
        changepoint_mae: mean(&abs_errors),
        staged,
    })
}
