//! Adaptive histogram density betting on conformal p-values.
//!
//! The bettor keeps equal-width bin counts over `[0, 1)` seeded with one
//! pseudocount per bin, bets `f̂(p) = B · c_b / Σ_j c_j` on each incoming
//! p-value, and only then folds the p-value into the counts. Because the bet
//! is a density integrating to one and null p-values are uniform, each payoff
//! is a valid e-value; under a shift the histogram learns where p-values
//! concentrate and the expected payoff rises above one.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Equal-width bin assignment on `[0, 1)`: `b = floor(p · B)`, clamped so a
/// rounded-up product can never spill past the last bin.
pub fn bin_index<R: Real>(p: R, bins: usize) -> usize {
    let b = (p * R::from_f64(bins as f64)).floor().to_f64() as usize;
    b.min(bins - 1)
}

/// Histogram density estimator that produces one-step e-values.
#[derive(Debug, Clone, Serialize)]
pub struct HistogramBettor<R> {
    counts: Vec<R>,
    total: R,
}

impl<R: Real> HistogramBettor<R> {
    /// A fresh bettor with `bins` equal-width bins, each holding one
    /// pseudocount so the estimate is a valid density from the start.
    pub fn new(bins: usize) -> Result<Self> {
        if bins < 1 {
            return Err(Error::InvalidInput {
                field: "bins",
                reason: format!("{bins} bins; need at least 1"),
            });
        }
        Ok(Self {
            counts: vec![R::one(); bins],
            total: R::from_f64(bins as f64),
        })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[R] {
        &self.counts
    }

    /// Sum of all bin counts, maintained exactly under unit increments.
    pub fn total(&self) -> R {
        self.total
    }

    fn check_domain(p: R) -> Result<()> {
        if !p.is_finite() || p < R::zero() || p >= R::one() {
            return Err(Error::ContractViolation(format!(
                "p-value {p} outside [0, 1)"
            )));
        }
        Ok(())
    }

    /// The e-value for `p` under the current estimate. Does not mutate the
    /// bettor: callers update *after* betting so the bet depends only on past
    /// p-values.
    pub fn bet(&self, p: R) -> Result<R> {
        Self::check_domain(p)?;
        let b = bin_index(p, self.bins());
        Ok(R::from_f64(self.bins() as f64) * self.counts[b] / self.total)
    }

    /// Folds `p` into the histogram.
    pub fn update(&mut self, p: R) -> Result<()> {
        Self::check_domain(p)?;
        let b = bin_index(p, self.bins());
        self.counts[b] += R::one();
        self.total += R::one();
        Ok(())
    }
}

/// Inputs for the finite-time mean-gain diagnostic: pre-shift bin counts,
/// post-shift bin counts, and the assumed post-shift bin probabilities.
#[derive(Debug, Clone)]
pub struct MeanGainInputs<R> {
    pre_counts: Vec<u64>,
    post_counts: Vec<u64>,
    theta: Vec<R>,
    pre_total: u64,
    post_total: u64,
}

impl<R: Real> MeanGainInputs<R> {
    pub fn new(pre_counts: Vec<u64>, post_counts: Vec<u64>, theta: Vec<R>) -> Result<Self> {
        let bins = theta.len();
        if bins == 0 {
            return Err(Error::InvalidInput {
                field: "theta",
                reason: "empty probability vector".to_string(),
            });
        }
        if pre_counts.len() != bins || post_counts.len() != bins {
            return Err(Error::InvalidInput {
                field: "pre_counts",
                reason: format!(
                    "count vectors of length {}/{} do not match {} bins",
                    pre_counts.len(),
                    post_counts.len(),
                    bins
                ),
            });
        }
        let mut sum = R::zero();
        for &t in &theta {
            if !t.is_finite() || t < R::zero() {
                return Err(Error::InvalidInput {
                    field: "theta",
                    reason: format!("entry {t} is not a probability"),
                });
            }
            sum += t;
        }
        if (sum - R::one()).abs() > R::from_f64(1e-12) {
            return Err(Error::InvalidInput {
                field: "theta",
                reason: format!("entries sum to {sum}, not 1"),
            });
        }
        let pre_total = pre_counts.iter().sum();
        let post_total = post_counts.iter().sum();
        Ok(Self {
            pre_counts,
            post_counts,
            theta,
            pre_total,
            post_total,
        })
    }

    pub fn bins(&self) -> usize {
        self.theta.len()
    }

    pub fn pre_counts(&self) -> &[u64] {
        &self.pre_counts
    }

    pub fn post_counts(&self) -> &[u64] {
        &self.post_counts
    }

    pub fn theta(&self) -> &[R] {
        &self.theta
    }

    /// `m`, the number of pre-shift observations.
    pub fn pre_total(&self) -> u64 {
        self.pre_total
    }

    /// `n`, the number of post-shift observations.
    pub fn post_total(&self) -> u64 {
        self.post_total
    }
}

/// Decomposition of the expected one-step e-value after a shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainBreakdown<R> {
    /// `E[e | A] = 1 + ((B+m)/(B+m+n))·γ + (n/(B+m+n))·B·δ`.
    pub gain: R,
    /// Alignment of θ with the pre-shift histogram: `B·Σ θ_b q̂_b − 1` where
    /// `q̂_b = (1+A_b)/(B+m)`. Zero when the learned prior is uniform.
    pub gamma: R,
    /// Shift intensity `Σ θ_b² − 1/B`; zero iff θ is uniform.
    pub delta: R,
}

/// Expected e-value for the next post-shift p-value, conditioning on the
/// pre-shift counts and assuming i.i.d. post-shift bin probabilities θ.
pub fn expected_gain<R: Real>(inputs: &MeanGainInputs<R>) -> GainBreakdown<R> {
    let bins = R::from_f64(inputs.bins() as f64);
    let m = R::from_f64(inputs.pre_total() as f64);
    let n = R::from_f64(inputs.post_total() as f64);

    let prior_mass = bins + m;
    let mut aligned = R::zero();
    let mut theta_sq = R::zero();
    for (&theta, &pre) in inputs.theta.iter().zip(&inputs.pre_counts) {
        aligned += theta * (R::one() + R::from_f64(pre as f64)) / prior_mass;
        theta_sq += theta * theta;
    }
    let gamma = bins * aligned - R::one();
    let delta = theta_sq - R::one() / bins;

    let total = bins + m + n;
    let gain = R::one() + (prior_mass / total) * gamma + (n / total) * bins * delta;
    GainBreakdown { gain, gamma, delta }
}

/// Post-shift observations needed before the expected e-value exceeds one:
/// `n* = (B+m)·|γ| / (B·δ)`, or zero when the prior is already aligned
/// (γ ≥ 0). Undefined without shift intensity (δ ≤ 0).
pub fn warmup_bound<R: Real>(inputs: &MeanGainInputs<R>) -> Result<R> {
    let GainBreakdown { gamma, delta, .. } = expected_gain(inputs);
    if delta <= R::zero() {
        return Err(Error::NoSignal(format!(
            "shift intensity delta = {delta} is not positive; warmup bound undefined"
        )));
    }
    if gamma >= R::zero() {
        return Ok(R::zero());
    }
    let bins = R::from_f64(inputs.bins() as f64);
    let m = R::from_f64(inputs.pre_total() as f64);
    Ok((bins + m) * gamma.abs() / (bins * delta))
}
