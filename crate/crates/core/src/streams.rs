//! Synthetic benchmark streams with known ground truth.
//!
//! Every scenario pairs a Friedman #1 regression stream with an oracle
//! predictor (`mu` = true conditional mean, `sigma` = true noise scale), so
//! pre-drift PITs are *exactly* Uniform(0,1) and the null holds by
//! construction. Post-drift the outcome law changes while the predictor stays
//! fixed, which is what a deployed model experiences under concept drift.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pit::{standard_normal_cdf, PitValue};
use crate::scalar::Real;

/// Drift shape of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// No change; the PIT law is Uniform(0,1) throughout.
    Null,
    /// All post-onset records switch to the shifted outcome law at once.
    AbruptGlobal,
    /// Records inside the transition window draw from the pre- or post-drift
    /// law with equal probability, then fully post.
    GradualGlobal,
    /// The shift applies only where (x₁, x₂) falls inside a box that expands
    /// at each of `phase_count` evenly spaced changepoints.
    LocalExpanding,
    /// The shift magnitude ramps up at each phase boundary.
    StagedIntensity,
}

/// Post-change emission parameters, applied to the outcome while the
/// predictor keeps reporting the pre-drift (mu, sigma).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShiftParams {
    /// Location offset added to the outcome.
    pub offset: f64,
    /// Multiplier on the outcome noise scale.
    pub scale: f64,
}

impl Default for ShiftParams {
    fn default() -> Self {
        // A one-noise-sigma bias plus mild variance inflation: leaves the
        // triangular/off-center PIT signature of a location shift.
        Self {
            offset: 1.0,
            scale: 1.5,
        }
    }
}

/// Generator configuration for one synthetic stream.
#[derive(Debug, Clone, Serialize)]
pub struct StreamScenario {
    pub kind: ScenarioKind,
    pub pre_length: usize,
    pub post_length: usize,
    /// Gradual drift only: mixing window length (clipped by validation to
    /// `post_length`).
    pub transition_window: usize,
    /// Phase count for local-expanding and staged-intensity drift.
    pub phase_count: usize,
    pub shift: ShiftParams,
    /// Outcome noise standard deviation; the oracle predictor reports it
    /// exactly.
    pub noise_sigma: f64,
    /// Staged-intensity shift multipliers per phase, weakest first. Length
    /// must equal `phase_count`.
    pub stage_multipliers: Vec<f64>,
    pub seed: u64,
}

impl StreamScenario {
    /// A scenario of `kind` with the documented defaults: 500-sample
    /// transition window, 3 phases, staged multipliers (0.15, 0.3, 1.0),
    /// unit noise, and the default shift.
    pub fn new(kind: ScenarioKind, pre_length: usize, post_length: usize, seed: u64) -> Self {
        Self {
            kind,
            pre_length,
            post_length,
            transition_window: 500.min(post_length),
            phase_count: 3,
            shift: ShiftParams::default(),
            noise_sigma: 1.0,
            stage_multipliers: vec![0.15, 0.3, 1.0],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.transition_window > self.post_length {
            return Err(Error::Config(format!(
                "transition window {} exceeds post length {}",
                self.transition_window, self.post_length
            )));
        }
        if self.phase_count == 0 {
            return Err(Error::Config("phase count must be at least 1".to_string()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma > 0.0) {
            return Err(Error::Config(format!(
                "noise sigma {} must be positive",
                self.noise_sigma
            )));
        }
        if !(self.shift.scale.is_finite() && self.shift.scale > 0.0) {
            return Err(Error::Config(format!(
                "shift scale {} must be positive",
                self.shift.scale
            )));
        }
        if !self.shift.offset.is_finite() {
            return Err(Error::Config("shift offset must be finite".to_string()));
        }
        if self.kind == ScenarioKind::StagedIntensity {
            if self.stage_multipliers.len() != self.phase_count {
                return Err(Error::Config(format!(
                    "{} stage multipliers for {} phases",
                    self.stage_multipliers.len(),
                    self.phase_count
                )));
            }
            let ill_formed = self
                .stage_multipliers
                .iter()
                .any(|&m| !m.is_finite() || m <= 0.0)
                || self.stage_multipliers.windows(2).any(|w| w[0] > w[1]);
            if ill_formed {
                return Err(Error::Config(
                    "stage multipliers must be positive and nondecreasing".to_string(),
                ));
            }
        }
        Ok(())
    }

    /// First post-change index τ (1-based), if the scenario drifts at all.
    pub fn true_changepoint(&self) -> Option<u64> {
        if self.kind == ScenarioKind::Null || self.post_length == 0 {
            None
        } else {
            Some(self.pre_length as u64 + 1)
        }
    }

    /// First index of the highest-intensity phase (1-based), for phased kinds.
    pub fn final_phase_start(&self) -> Option<u64> {
        match self.kind {
            ScenarioKind::LocalExpanding | ScenarioKind::StagedIntensity => {
                let len = self.phase_length();
                Some((self.pre_length + (self.phase_count - 1) * len) as u64 + 1)
            }
            _ => None,
        }
    }

    fn phase_length(&self) -> usize {
        (self.post_length / self.phase_count).max(1)
    }

    /// Phase of 0-based stream index `i`: 0 pre-drift, 1..=phase_count after.
    fn phase_of(&self, i: usize) -> u32 {
        if i < self.pre_length {
            return 0;
        }
        let k = (i - self.pre_length) / self.phase_length() + 1;
        (k.min(self.phase_count)) as u32
    }
}

/// One generated observation with its ground truth.
#[derive(Debug, Clone, Serialize)]
pub struct StreamRecord<R> {
    /// 1-based stream index.
    pub t: u64,
    /// Friedman inputs; only the first five coordinates enter the mean.
    pub x: [R; 10],
    pub y: R,
    pub mu: R,
    pub sigma: R,
    pub u: PitValue<R>,
    /// Whether this record was emitted from a shifted law.
    pub is_post_change: bool,
    /// 0 pre-drift, otherwise the 1-based phase index.
    pub phase: u32,
}

/// Friedman #1 regression mean,
/// `10 sin(π x₁ x₂) + 20 (x₃ − ½)² + 10 x₄ + 5 x₅`.
pub fn friedman_mean<R: Real>(x: &[R; 10]) -> R {
    let pi = R::from_f64(std::f64::consts::PI);
    R::from_f64(10.0) * (pi * x[0] * x[1]).sin()
        + R::from_f64(20.0) * (x[2] - R::from_f64(0.5)).powi(2)
        + R::from_f64(10.0) * x[3]
        + R::from_f64(5.0) * x[4]
}

/// Generates the full stream for a scenario, deterministically in the seed.
pub fn generate<R: Real>(scenario: &StreamScenario) -> Result<Vec<StreamRecord<R>>> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let total = scenario.pre_length + scenario.post_length;
    let mut records = Vec::with_capacity(total);

    for i in 0..total {
        let mut x = [R::zero(); 10];
        for slot in &mut x {
            *slot = R::from_f64(rng.random::<f64>());
        }
        let noise: f64 = rng.sample(StandardNormal);

        let phase = scenario.phase_of(i);
        let (shifted, multiplier) = match scenario.kind {
            ScenarioKind::Null => (false, 0.0),
            ScenarioKind::AbruptGlobal => (i >= scenario.pre_length, 1.0),
            ScenarioKind::GradualGlobal => {
                if i < scenario.pre_length {
                    (false, 0.0)
                } else if i < scenario.pre_length + scenario.transition_window {
                    (rng.random::<bool>(), 1.0)
                } else {
                    (true, 1.0)
                }
            }
            ScenarioKind::LocalExpanding => {
                if phase == 0 {
                    (false, 0.0)
                } else {
                    let r = phase as f64 / scenario.phase_count as f64;
                    let inside =
                        x[0].to_f64() <= r && x[1].to_f64() <= r;
                    (inside, 1.0)
                }
            }
            ScenarioKind::StagedIntensity => {
                if phase == 0 {
                    (false, 0.0)
                } else {
                    (true, scenario.stage_multipliers[(phase - 1) as usize])
                }
            }
        };

        let mu = friedman_mean(&x);
        let sigma = R::from_f64(scenario.noise_sigma);
        let y = if shifted {
            let offset = multiplier * scenario.shift.offset;
            let scale = 1.0 + multiplier * (scenario.shift.scale - 1.0);
            mu + R::from_f64(offset) + R::from_f64(scale * scenario.noise_sigma * noise)
        } else {
            mu + R::from_f64(scenario.noise_sigma * noise)
        };

        let u = PitValue::clamped(standard_normal_cdf((y - mu) / sigma));
        records.push(StreamRecord {
            t: (i + 1) as u64,
            x,
            y,
            mu,
            sigma,
            u,
            is_post_change: shifted,
            phase,
        });
    }
    Ok(records)
}

/// Post-change law for PIT-space streams.
#[derive(Debug, Clone, PartialEq)]
pub enum PitLaw {
    Uniform,
    Beta { alpha: f64, beta: f64 },
    TruncatedNormal { mean: f64, stddev: f64 },
    /// Atoms (value, weight); weights are normalized. Exact repeats exercise
    /// tie handling downstream.
    PointMixture { atoms: Vec<(f64, f64)> },
}

impl PitLaw {
    fn validate(&self) -> Result<()> {
        match self {
            PitLaw::Uniform => Ok(()),
            PitLaw::Beta { alpha, beta } => {
                if *alpha > 0.0 && *beta > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "beta({alpha}, {beta}) needs positive shape parameters"
                    )))
                }
            }
            PitLaw::TruncatedNormal { mean, stddev } => {
                if !stddev.is_finite() || *stddev <= 0.0 {
                    return Err(Error::Config(format!(
                        "truncated normal stddev {stddev} must be positive"
                    )));
                }
                // Keep rejection sampling viable.
                let accept = standard_normal_cdf((1.0 - mean) / stddev)
                    - standard_normal_cdf((0.0 - mean) / stddev);
                if accept < 1e-6 {
                    return Err(Error::Config(format!(
                        "truncated normal N({mean}, {stddev}²) has nearly no mass in [0, 1]"
                    )));
                }
                Ok(())
            }
            PitLaw::PointMixture { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::Config("point mixture needs at least one atom".to_string()));
                }
                for &(v, w) in atoms {
                    if !(0.0..1.0).contains(&v) || !w.is_finite() || w <= 0.0 {
                        return Err(Error::Config(format!(
                            "point mixture atom ({v}, {w}) must have value in [0, 1) and positive weight"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            PitLaw::Uniform => rng.random::<f64>(),
            PitLaw::Beta { alpha, beta } => {
                let dist = Beta::new(*alpha, *beta).expect("validated shapes");
                dist.sample(rng).clamp(0.0, 1.0)
            }
            PitLaw::TruncatedNormal { mean, stddev } => loop {
                let z: f64 = rng.sample(StandardNormal);
                let v = mean + stddev * z;
                if (0.0..=1.0).contains(&v) {
                    return v;
                }
            },
            PitLaw::PointMixture { atoms } => {
                let total: f64 = atoms.iter().map(|&(_, w)| w).sum();
                let mut draw = rng.random::<f64>() * total;
                for &(v, w) in atoms {
                    draw -= w;
                    if draw <= 0.0 {
                        return v;
                    }
                }
                atoms.last().expect("validated nonempty").0
            }
        }
    }
}

impl std::str::FromStr for PitLaw {
    type Err = Error;

    /// Parses `uniform`, `beta(a,b)`, `truncnorm(mean,stddev)`, or
    /// `points(v:w,v:w,...)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let unknown = || Error::Config(format!("unknown PIT law `{s}`"));
        if s.eq_ignore_ascii_case("uniform") {
            return Ok(PitLaw::Uniform);
        }
        let (name, args) = s
            .split_once('(')
            .and_then(|(n, rest)| rest.strip_suffix(')').map(|a| (n.trim(), a)))
            .ok_or_else(unknown)?;
        let law = match name.to_ascii_lowercase().as_str() {
            "beta" => {
                let parts: Vec<f64> = parse_f64_list(args, s)?;
                if parts.len() != 2 {
                    return Err(unknown());
                }
                PitLaw::Beta {
                    alpha: parts[0],
                    beta: parts[1],
                }
            }
            "truncnorm" => {
                let parts: Vec<f64> = parse_f64_list(args, s)?;
                if parts.len() != 2 {
                    return Err(unknown());
                }
                PitLaw::TruncatedNormal {
                    mean: parts[0],
                    stddev: parts[1],
                }
            }
            "points" => {
                let atoms = args
                    .split(',')
                    .map(|pair| {
                        let (v, w) = pair.split_once(':').ok_or_else(unknown)?;
                        Ok((
                            v.trim().parse::<f64>().map_err(|_| unknown())?,
                            w.trim().parse::<f64>().map_err(|_| unknown())?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                PitLaw::PointMixture { atoms }
            }
            _ => return Err(unknown()),
        };
        law.validate()?;
        Ok(law)
    }
}

fn parse_f64_list(args: &str, context: &str) -> Result<Vec<f64>> {
    args.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("unknown PIT law `{context}`")))
        })
        .collect()
}

/// Direct PIT-space stream: `pre_length` Uniform(0,1) draws followed by
/// `post_length` draws from `post_law`. Bypasses the regression layer.
pub fn pit_shift_stream<R: Real>(
    pre_length: usize,
    post_length: usize,
    post_law: &PitLaw,
    seed: u64,
) -> Result<Vec<PitValue<R>>> {
    post_law.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(pre_length + post_length);
    for _ in 0..pre_length {
        out.push(PitValue::clamped(R::from_f64(rng.random::<f64>())));
    }
    for _ in 0..post_length {
        out.push(PitValue::clamped(R::from_f64(post_law.sample(&mut rng))));
    }
    Ok(out)
}
