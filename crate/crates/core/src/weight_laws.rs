//! Weight distributions attached to the points of the cloud.
//!
//! A [`WeightLaw`] is validated once at construction and is immutable
//! afterwards, so it can be shared between replica threads freely. Besides
//! sampling it exposes the two functionals of the distribution function that
//! the model cares about: the square-root tail integral
//! `∫_0^∞ √(1 − F(x)) dx` (finite for every shipped kind) and a witness rate
//! for a finite exponential moment.

use std::fmt;

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};

/// The shipped families of weight distributions.
#[derive(Clone, Debug, PartialEq)]
pub enum LawKind {
    /// Point mass at `value`. `Dirac(1.0)` is the classical model.
    Dirac { value: f64 },
    /// Weight 1 with probability `p`, otherwise 0.
    Bernoulli { p: f64 },
    /// Exponential with the given rate (mean `1 / rate`).
    Exponential { rate: f64 },
    /// Uniform on `[lo, hi]`.
    UniformInterval { lo: f64, hi: f64 },
    /// Uniform draw from a fixed sample, kept sorted.
    Empirical { sample: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightLaw {
    kind: LawKind,
}

impl WeightLaw {
    pub fn new(kind: LawKind) -> Result<Self> {
        let kind = match kind {
            LawKind::Dirac { value } => {
                if !(value.is_finite() && value > 0.0) {
                    return Err(Error::config(format!(
                        "dirac value must be > 0, got {value}"
                    )));
                }
                LawKind::Dirac { value }
            }
            LawKind::Bernoulli { p } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::config(format!(
                        "bernoulli p must lie in [0,1], got {p}"
                    )));
                }
                LawKind::Bernoulli { p }
            }
            LawKind::Exponential { rate } => {
                if !(rate.is_finite() && rate > 0.0) {
                    return Err(Error::config(format!(
                        "exponential rate must be > 0, got {rate}"
                    )));
                }
                LawKind::Exponential { rate }
            }
            LawKind::UniformInterval { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
                    return Err(Error::config(format!(
                        "uniform interval needs 0 <= lo < hi, got [{lo}, {hi}]"
                    )));
                }
                LawKind::UniformInterval { lo, hi }
            }
            LawKind::Empirical { mut sample } => {
                if sample.is_empty() {
                    return Err(Error::config("empirical sample is empty"));
                }
                if let Some(bad) = sample.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return Err(Error::config(format!(
                        "empirical sample values must be finite and >= 0, got {bad}"
                    )));
                }
                sample.sort_by(f64::total_cmp);
                LawKind::Empirical { sample }
            }
        };
        Ok(WeightLaw { kind })
    }

    pub fn dirac(value: f64) -> Result<Self> {
        Self::new(LawKind::Dirac { value })
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(LawKind::Bernoulli { p })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(LawKind::Exponential { rate })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(LawKind::UniformInterval { lo, hi })
    }

    pub fn empirical(sample: Vec<f64>) -> Result<Self> {
        Self::new(LawKind::Empirical { sample })
    }

    /// The classical model, every point carrying weight one.
    pub fn classical() -> Self {
        WeightLaw {
            kind: LawKind::Dirac { value: 1.0 },
        }
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    /// One draw from the law. Consumes a deterministic amount of randomness
    /// per kind, so a fixed stream state always yields the same sequence.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            LawKind::Dirac { value } => *value,
            LawKind::Bernoulli { p } => {
                if rng.random::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            LawKind::Exponential { rate } => {
                let e: f64 = rng.sample(Exp1);
                e / rate
            }
            LawKind::UniformInterval { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            LawKind::Empirical { sample } => sample[rng.random_range(0..sample.len())],
        }
    }

    /// `F(x) = P(w <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match &self.kind {
            LawKind::Dirac { value } => step(x >= *value),
            LawKind::Bernoulli { p } => {
                if x < 0.0 {
                    0.0
                } else if x < 1.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
            LawKind::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            LawKind::UniformInterval { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            LawKind::Empirical { sample } => {
                sample.partition_point(|v| *v <= x) as f64 / sample.len() as f64
            }
        }
    }

    /// Left limit `F(x−) = P(w < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match &self.kind {
            LawKind::Dirac { value } => step(x > *value),
            LawKind::Bernoulli { p } => {
                if x <= 0.0 {
                    0.0
                } else if x <= 1.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
            LawKind::Empirical { sample } => {
                sample.partition_point(|v| *v < x) as f64 / sample.len() as f64
            }
            _ => self.cdf(x),
        }
    }

    /// `∫_0^∞ √(1 − F(x)) dx` in closed form.
    pub fn sqrt_tail_integral(&self) -> f64 {
        match &self.kind {
            LawKind::Dirac { value } => *value,
            LawKind::Bernoulli { p } => p.sqrt(),
            LawKind::Exponential { rate } => 2.0 / rate,
            // 1 on [0, lo), then √((hi − x)/(hi − lo)) which integrates to 2/3 (hi − lo).
            LawKind::UniformInterval { lo, hi } => lo + 2.0 * (hi - lo) / 3.0,
            LawKind::Empirical { sample } => {
                let n = sample.len();
                let mut total = 0.0;
                let mut prev = 0.0;
                for (i, &v) in sample.iter().enumerate() {
                    // On [prev, v) exactly n − i sample values exceed x.
                    total += (v - prev) * ((n - i) as f64 / n as f64).sqrt();
                    prev = v;
                }
                total
            }
        }
    }

    /// Returns `Some(a)` with `E exp(a w) < ∞`. Every shipped kind has one.
    pub fn exponential_moment_rate(&self) -> Option<f64> {
        match &self.kind {
            LawKind::Exponential { rate } => Some(rate / 2.0),
            _ => Some(1.0),
        }
    }

    pub fn has_exponential_moment(&self) -> (bool, Option<f64>) {
        let a = self.exponential_moment_rate();
        (a.is_some(), a)
    }

    /// True when every draw is zero.
    pub fn is_zero(&self) -> bool {
        match &self.kind {
            LawKind::Bernoulli { p } => *p == 0.0,
            LawKind::Empirical { sample } => sample.iter().all(|v| *v == 0.0),
            _ => false,
        }
    }

    /// Closed-form mean, used by sanity checks.
    pub fn mean(&self) -> f64 {
        match &self.kind {
            LawKind::Dirac { value } => *value,
            LawKind::Bernoulli { p } => *p,
            LawKind::Exponential { rate } => 1.0 / rate,
            LawKind::UniformInterval { lo, hi } => 0.5 * (lo + hi),
            LawKind::Empirical { sample } => sample.iter().sum::<f64>() / sample.len() as f64,
        }
    }
}

fn step(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl fmt::Display for WeightLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            LawKind::Dirac { value } => write!(f, "dirac(value={value})"),
            LawKind::Bernoulli { p } => write!(f, "bernoulli(p={p})"),
            LawKind::Exponential { rate } => write!(f, "exponential(rate={rate})"),
            LawKind::UniformInterval { lo, hi } => write!(f, "uniform(lo={lo},hi={hi})"),
            LawKind::Empirical { sample } => {
                write!(f, "empirical(n={})", sample.len())
            }
        }
    }
}
