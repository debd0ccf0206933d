//! Mixture e-process over all candidate change start times.
//!
//! Rather than storing one e-process per start time τ, the mixture
//! `M_t = Σ_τ w_τ Π_{s=τ}^t e_s` with weights `w_τ = 1/(τ(τ+1))` collapses to
//! the O(1) recursion `M_t = e_t · (M_{t−1} + w_t)` from `M_0 = 0`. The state
//! is kept in log space because `M_t` grows without bound under a shift. An
//! alarm fires at the first time `M_t ≥ 1/α`, which bounds the probability of
//! ever alarming under the null by α over an unbounded horizon.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Mixture weight `w_τ = 1/(τ(τ+1))`. The weights sum to exactly one over
/// all τ ≥ 1, with tail sum `Σ_{τ>t} w_τ = 1/(t+1)`.
pub fn weight<R: Real>(tau: u64) -> Result<R> {
    if tau < 1 {
        return Err(Error::ContractViolation(format!(
            "weight index tau = {tau} must be >= 1"
        )));
    }
    let t = tau as f64;
    Ok(R::from_f64(1.0 / (t * (t + 1.0))))
}

/// Numerically stable `log(exp(a) + exp(b))`; `−∞` encodes a zero term.
pub(crate) fn log_sum_exp<R: Real>(a: R, b: R) -> R {
    if a == R::neg_infinity() {
        return b;
    }
    if b == R::neg_infinity() {
        return a;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// Result of one e-process step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepOutcome<R> {
    /// `log M_t` after the step (`−∞` when `M_t = 0`).
    pub log_m: R,
    /// Whether this step crossed the alarm threshold for the first time.
    pub alarmed_now: bool,
}

/// Log-space mixture e-process state with a latched anytime-valid alarm.
#[derive(Debug, Clone, Serialize)]
pub struct MixtureEProcess<R> {
    log_m: R,
    time: u64,
    alpha: R,
    alarmed: bool,
    alarm_time: Option<u64>,
}

impl<R: Real> MixtureEProcess<R> {
    pub fn new(alpha: R) -> Result<Self> {
        if !alpha.is_finite() || alpha <= R::zero() || alpha >= R::one() {
            return Err(Error::InvalidInput {
                field: "alpha",
                reason: format!("{alpha} is not in (0, 1)"),
            });
        }
        Ok(Self {
            log_m: R::neg_infinity(),
            time: 0,
            alpha,
            alarmed: false,
            alarm_time: None,
        })
    }

    /// Advances the recursion with the next e-value:
    /// `log M_t = log e_t + logsumexp(log M_{t−1}, log w_t)`.
    ///
    /// An e-value of zero sets `M_t = 0` exactly; later weights revive the
    /// mixture. Once alarmed, the state keeps updating (so traces can continue
    /// past the alarm) but the alarm time is immutable.
    pub fn step(&mut self, e_value: R) -> Result<StepOutcome<R>> {
        if !e_value.is_finite() || e_value < R::zero() {
            return Err(Error::ContractViolation(format!(
                "e-value {e_value} must be finite and nonnegative"
            )));
        }
        self.time += 1;
        let w: R = weight(self.time).expect("time >= 1");
        self.log_m = e_value.ln() + log_sum_exp(self.log_m, w.ln());
        let mut alarmed_now = false;
        if !self.alarmed && self.log_m >= self.log_threshold() {
            self.alarmed = true;
            self.alarm_time = Some(self.time);
            alarmed_now = true;
        }
        Ok(StepOutcome {
            log_m: self.log_m,
            alarmed_now,
        })
    }

    /// Whether the alarm has ever fired.
    pub fn check_alarm(&self) -> bool {
        self.alarmed
    }

    /// Alarm boundary in log space, `log(1/α)`.
    pub fn log_threshold(&self) -> R {
        -self.alpha.ln()
    }

    pub fn log_m(&self) -> R {
        self.log_m
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn alpha(&self) -> R {
        self.alpha
    }

    /// First threshold crossing, if any.
    pub fn alarm_time(&self) -> Option<u64> {
        self.alarm_time
    }
}
