//! Sample correlation estimators over a [`PairedSample`].
//!
//! Five estimators are provided: Pearson's sample correlation, Spearman's
//! rank correlation, the rank-based inverse normal (rankit) correlation, a
//! robust estimator built on the Qn scale, and a bootstrap estimator with
//! modified-percentile confidence intervals.

mod bootstrap;
mod normal;
mod qn;
mod ranks;

pub use bootstrap::{pm1_bootstrap, BOOTSTRAP_REPLICATES};
pub use normal::inverse_normal_cdf;
pub use qn::qn_scale;
pub use ranks::fractional_ranks;

use serde::Serialize;
use thiserror::Error;

use crate::sketch::PairedSample;

/// Which estimator produced a [`CorrelationEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pearson,
    Spearman,
    Rin,
    Qn,
    Pm1,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pearson => "pearson",
            Method::Spearman => "spearman",
            Method::Rin => "rin",
            Method::Qn => "qn",
            Method::Pm1 => "pm1",
        }
    }

    /// Smallest sample size the estimator accepts.
    pub fn min_sample(self) -> usize {
        match self {
            Method::Pearson | Method::Spearman | Method::Rin => 2,
            Method::Qn | Method::Pm1 => 4,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "pearson" => Method::Pearson,
            "spearman" => Method::Spearman,
            "rin" => Method::Rin,
            "qn" => Method::Qn,
            "pm1" => Method::Pm1,
            _ => return Err(format!("unknown estimator `{s}`")),
        })
    }
}

#[derive(Debug, Error)]
pub enum CorrelationError {
    #[error("estimator needs at least {needed} pairs, got {got}")]
    InsufficientSample { needed: usize, got: usize },
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("more than half of the bootstrap resamples were degenerate")]
    DegenerateResamples,
}

/// A correlation point estimate; `value` is NaN when `degenerate`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CorrelationEstimate {
    pub method: Method,
    /// In [-1, 1], or NaN when `degenerate` (serializes as null).
    pub value: f64,
    pub sample_size: usize,
    /// Bootstrap interval bounds, present for PM1 only.
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub degenerate: bool,
}

impl CorrelationEstimate {
    fn from_core(method: Method, core: PearsonCore) -> Self {
        CorrelationEstimate {
            method,
            value: core.r(),
            sample_size: core.n,
            ci_low: None,
            ci_high: None,
            degenerate: core.degenerate(),
        }
    }

    /// Absolute value of the estimate, 0 when degenerate.
    pub fn magnitude(&self) -> f64 {
        if self.degenerate {
            0.0
        } else {
            self.value.abs()
        }
    }
}

/// Dispatches to the estimator selected by `method`.
pub fn estimate(
    sample: &PairedSample,
    method: Method,
    alpha: f64,
    seed: u64,
) -> Result<CorrelationEstimate, CorrelationError> {
    match method {
        Method::Pearson => pearson(sample),
        Method::Spearman => spearman(sample),
        Method::Rin => rin(sample),
        Method::Qn => qn::qn_correlation(sample),
        Method::Pm1 => pm1_bootstrap(sample, alpha, seed),
    }
}

/// Pearson's sample correlation in one numerically stable pass
/// (running-mean shifted accumulation), clamped to [-1, 1].
pub fn pearson(sample: &PairedSample) -> Result<CorrelationEstimate, CorrelationError> {
    require(sample, 2)?;
    let core = PearsonCore::of(sample.pairs().iter().copied());
    Ok(CorrelationEstimate::from_core(Method::Pearson, core))
}

/// Spearman's rank correlation: fractional ranks on both sides (ties get the
/// average rank), then Pearson over the rank vectors.
pub fn spearman(sample: &PairedSample) -> Result<CorrelationEstimate, CorrelationError> {
    require(sample, 2)?;
    let rx = fractional_ranks_of(sample.xs());
    let ry = fractional_ranks_of(sample.ys());
    let core = PearsonCore::of(rx.into_iter().zip(ry));
    Ok(CorrelationEstimate::from_core(Method::Spearman, core))
}

/// Rank-based inverse normal correlation using the rankit transform
/// `invnorm((rank - 1/2) / n)` on both sides, then Pearson.
pub fn rin(sample: &PairedSample) -> Result<CorrelationEstimate, CorrelationError> {
    require(sample, 2)?;
    let n = sample.len() as f64;
    let rankit = |ranks: Vec<f64>| {
        ranks
            .into_iter()
            .map(move |r| inverse_normal_cdf((r - 0.5) / n))
    };
    let rx = rankit(fractional_ranks_of(sample.xs()));
    let ry = rankit(fractional_ranks_of(sample.ys()));
    let core = PearsonCore::of(rx.zip(ry));
    Ok(CorrelationEstimate::from_core(Method::Rin, core))
}

/// Robust correlation via the Qn scale estimator; see [`qn::qn_correlation`].
pub fn qn_correlation(sample: &PairedSample) -> Result<CorrelationEstimate, CorrelationError> {
    qn::qn_correlation(sample)
}

fn require(sample: &PairedSample, needed: usize) -> Result<(), CorrelationError> {
    if sample.len() < needed {
        return Err(CorrelationError::InsufficientSample {
            needed,
            got: sample.len(),
        });
    }
    Ok(())
}

fn fractional_ranks_of(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let v: Vec<f64> = values.collect();
    fractional_ranks(&v)
}

/// Single-pass accumulator for Pearson's correlation (Welford-style mean
/// shifting with co-moment updates).
pub(crate) struct PearsonCore {
    pub n: usize,
    mean_x: f64,
    mean_y: f64,
    m2x: f64,
    m2y: f64,
    cxy: f64,
}

impl PearsonCore {
    pub fn new() -> Self {
        PearsonCore {
            n: 0,
            mean_x: 0.0,
            mean_y: 0.0,
            m2x: 0.0,
            m2y: 0.0,
            cxy: 0.0,
        }
    }

    pub fn of(pairs: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut core = Self::new();
        for (x, y) in pairs {
            core.push(x, y);
        }
        core
    }

    #[inline]
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        let n = self.n as f64;
        let dx = x - self.mean_x;
        let dy = y - self.mean_y;
        self.mean_x += dx / n;
        self.mean_y += dy / n;
        let dy_new = y - self.mean_y;
        self.m2x += dx * (x - self.mean_x);
        self.m2y += dy * dy_new;
        self.cxy += dx * dy_new;
    }

    pub fn degenerate(&self) -> bool {
        !(self.m2x > 0.0 && self.m2y > 0.0)
    }

    /// The correlation, clamped to [-1, 1]; NaN when degenerate.
    pub fn r(&self) -> f64 {
        if self.degenerate() {
            return f64::NAN;
        }
        (self.cxy / (self.m2x.sqrt() * self.m2y.sqrt())).clamp(-1.0, 1.0)
    }
}
