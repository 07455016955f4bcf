//! Recovering token counts from request timing.
//!
//! An on-path observer only sees when a request left and when its response
//! arrived. Generation time is affine in the number of generated tokens, so
//! with estimates of the round trip, the first-token latency and the
//! per-token latency the count can be read back off the duration. Three
//! ways of obtaining those estimates are provided: one regression over a
//! probe trace (naive), the mean of regressions over several historical probe
//! traces (averaged), and a probe stream sampled alongside the victim with a
//! median over the nearest five samples (concurrent).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::ThresholdProfile;
use crate::stats::{linear_fit, mean, median, proportional_fit};
use crate::trace::{DerivedFeatures, ObservationRecord};

/// Samples the concurrent profiler combines per estimate.
pub const WINDOW_SAMPLES: usize = 5;
/// Seconds between concurrent probe rounds.
pub const PROBE_INTERVAL: f64 = 60.0;

#[derive(Debug, Error, PartialEq)]
pub enum TimingError {
    #[error("pearson needs equal-length sequences of at least 2 values, got {0} and {1}")]
    Length(usize, usize),
    #[error("pearson is undefined for a zero-variance sequence")]
    ZeroVariance,
    #[error("need at least {need} probe points, got {got}")]
    TooFewProbes { need: usize, got: usize },
    #[error("probe `{0}` lacks a token count or completion time")]
    BadProbe(String),
    #[error("profile is unusable: per-token latency estimate {0} is not positive")]
    Unusable(f64),
    #[error("record `{0}` has no completion time")]
    MissingTiming(String),
    #[error("record `{0}`: adjusted duration is not positive")]
    NonPositiveDuration(String),
    #[error("concurrent window holds {0} samples, need {WINDOW_SAMPLES}")]
    ShortWindow(usize),
    #[error("no candidate profiles to choose from")]
    NoCandidates,
}

/// Product-moment correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, TimingError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(TimingError::Length(xs.len(), ys.len()));
    }
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(TimingError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation of end-to-end duration with true token count over a trace.
pub fn duration_token_pearson(records: &[ObservationRecord]) -> Result<f64, TimingError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in records {
        let (Some(n), Some(d)) = (r.output_tokens, r.duration()) else {
            return Err(TimingError::BadProbe(r.id.clone()));
        };
        xs.push(n as f64);
        ys.push(d);
    }
    pearson(&xs, &ys)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Naive,
    Averaged,
    Concurrent,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Naive, Strategy::Averaged, Strategy::Concurrent];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Naive => "naive",
            Strategy::Averaged => "averaged",
            Strategy::Concurrent => "concurrent",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(Strategy::Naive),
            "averaged" => Ok(Strategy::Averaged),
            "concurrent" => Ok(Strategy::Concurrent),
            other => Err(format!("unknown strategy `{other}` (naive|averaged|concurrent)")),
        }
    }
}

/// One concurrent probe measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub time: f64,
    pub ttft: f64,
    pub tpot: f64,
}

/// Timing parameters recovered by the attacker, in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkProfile {
    pub strategy: Strategy,
    pub ttft_est: f64,
    pub tpot_est: f64,
    pub rtt_est: f64,
    pub window: Vec<WindowSample>,
}

/// Regression options for turning probes into `(ttft, tpot)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ProfileOptions {
    /// Fit duration as purely proportional to token count (no TTFT term).
    pub through_origin: bool,
}

/// `(ttft, tpot)` from probes with known token counts, after removing the
/// round trip.
pub fn fit_probe_set(
    probes: &[ObservationRecord],
    rtt: f64,
    opts: ProfileOptions,
) -> Result<(f64, f64), TimingError> {
    let mut xs = Vec::with_capacity(probes.len());
    let mut ys = Vec::with_capacity(probes.len());
    for p in probes {
        let (Some(n), Some(d)) = (p.output_tokens, p.duration()) else {
            return Err(TimingError::BadProbe(p.id.clone()));
        };
        xs.push(n as f64);
        ys.push(d - rtt);
    }
    if opts.through_origin {
        let slope = proportional_fit(&xs, &ys).ok_or(TimingError::TooFewProbes { need: 1, got: 0 })?;
        return Ok((0.0, slope));
    }
    if xs.len() < 2 {
        return Err(TimingError::TooFewProbes {
            need: 2,
            got: xs.len(),
        });
    }
    linear_fit(&xs, &ys).ok_or(TimingError::TooFewProbes { need: 2, got: 1 })
}

/// Builds a profile from probe traces and ping measurements.
///
/// `probe_sets` is ordered oldest first. Naive uses only the last set;
/// averaged averages the per-set fits; concurrent treats each set as one
/// probe round, timestamped by its mean send time, and reports the
/// estimates nearest `now`.
pub fn build_profile(
    strategy: Strategy,
    probe_sets: &[Vec<ObservationRecord>],
    pings: &[f64],
    now: f64,
    opts: ProfileOptions,
) -> Result<NetworkProfile, TimingError> {
    let rtt_est = if pings.is_empty() { 0.0 } else { median(pings) };
    let (ttft_est, tpot_est, window) = match strategy {
        Strategy::Naive => {
            let last = probe_sets.last().map_or(&[][..], Vec::as_slice);
            let (ttft, tpot) = fit_probe_set(last, rtt_est, opts)?;
            (ttft, tpot, Vec::new())
        }
        Strategy::Averaged => {
            if probe_sets.is_empty() {
                return Err(TimingError::TooFewProbes { need: 2, got: 0 });
            }
            let fits = probe_sets
                .iter()
                .map(|s| fit_probe_set(s, rtt_est, opts))
                .collect::<Result<Vec<_>, _>>()?;
            let ttfts: Vec<f64> = fits.iter().map(|f| f.0).collect();
            let tpots: Vec<f64> = fits.iter().map(|f| f.1).collect();
            (mean(&ttfts), mean(&tpots), Vec::new())
        }
        Strategy::Concurrent => {
            let mut profiler = ConcurrentProfiler::default();
            for set in probe_sets {
                let (ttft, tpot) = fit_probe_set(set, rtt_est, opts)?;
                let sends: Vec<f64> = set.iter().map(|r| r.t_send.as_secs_f64()).collect();
                profiler.push(WindowSample {
                    time: mean(&sends),
                    ttft,
                    tpot,
                });
            }
            let (ttft, tpot) = profiler.estimate_at(now)?;
            (ttft, tpot, profiler.into_samples())
        }
    };
    if !(tpot_est > 0.0) {
        return Err(TimingError::Unusable(tpot_est));
    }
    Ok(NetworkProfile {
        strategy,
        ttft_est,
        tpot_est,
        rtt_est,
        window,
    })
}

/// Accumulates probe rounds in time order.
#[derive(Clone, Debug, Default)]
pub struct ConcurrentProfiler {
    samples: Vec<WindowSample>,
}

impl ConcurrentProfiler {
    pub fn push(&mut self, sample: WindowSample) {
        let at = self.samples.partition_point(|s| s.time <= sample.time);
        self.samples.insert(at, sample);
    }

    pub fn samples(&self) -> &[WindowSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<WindowSample> {
        self.samples
    }

    /// Medians of TTFT and TPOT over the five samples nearest `t`.
    pub fn estimate_at(&self, t: f64) -> Result<(f64, f64), TimingError> {
        window_estimate(&self.samples, t)
    }
}

fn window_estimate(samples: &[WindowSample], t: f64) -> Result<(f64, f64), TimingError> {
    if samples.len() < WINDOW_SAMPLES {
        return Err(TimingError::ShortWindow(samples.len()));
    }
    // Samples are time-sorted, so the nearest five form a contiguous run.
    let centre = samples.partition_point(|s| s.time < t);
    let mut lo = centre;
    let mut hi = centre;
    while hi - lo < WINDOW_SAMPLES {
        let take_left = match (lo.checked_sub(1), (hi < samples.len()).then_some(hi)) {
            (Some(l), Some(h)) => t - samples[l].time <= samples[h].time - t,
            (Some(_), None) => true,
            (None, _) => false,
        };
        if take_left {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    let run = &samples[lo..hi];
    let ttfts: Vec<f64> = run.iter().map(|s| s.ttft).collect();
    let tpots: Vec<f64> = run.iter().map(|s| s.tpot).collect();
    Ok((median(&ttfts), median(&tpots)))
}

impl NetworkProfile {
    /// `(ttft, tpot)` to apply to a request sent at `t_send` seconds.
    pub fn params_at(&self, t_send: f64) -> Result<(f64, f64), TimingError> {
        match self.strategy {
            Strategy::Concurrent if !self.window.is_empty() => window_estimate(&self.window, t_send),
            _ => Ok((self.ttft_est, self.tpot_est)),
        }
    }

    /// Duration with round trip and first-token latency removed.
    pub fn adjusted_duration(&self, rec: &ObservationRecord) -> Result<(f64, f64), TimingError> {
        let duration = rec
            .duration()
            .ok_or_else(|| TimingError::MissingTiming(rec.id.clone()))?;
        let (ttft, tpot) = self.params_at(rec.t_send.as_secs_f64())?;
        if !(tpot > 0.0) {
            return Err(TimingError::Unusable(tpot));
        }
        Ok((duration - self.rtt_est - ttft, tpot))
    }
}

/// Estimated count, flagged when the adjusted duration had to be clamped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TokenEstimate {
    pub tokens: u64,
    pub clamped: bool,
}

pub fn estimate_tokens(profile: &NetworkProfile, rec: &ObservationRecord) -> Result<TokenEstimate, TimingError> {
    let (adjusted, tpot) = profile.adjusted_duration(rec)?;
    let raw = (adjusted / tpot).round();
    if raw < 1.0 {
        return Ok(TokenEstimate {
            tokens: 1,
            clamped: true,
        });
    }
    Ok(TokenEstimate {
        tokens: raw as u64,
        clamped: false,
    })
}

/// Bytes per token, or bytes per adjusted second when `proportional`.
pub fn estimate_density(
    profile: &NetworkProfile,
    rec: &ObservationRecord,
    proportional: bool,
) -> Result<f64, TimingError> {
    if proportional {
        let (adjusted, _) = profile.adjusted_duration(rec)?;
        if !(adjusted > 0.0) {
            return Err(TimingError::NonPositiveDuration(rec.id.clone()));
        }
        return Ok(rec.output_bytes as f64 / adjusted);
    }
    Ok(rec.output_bytes as f64 / estimate_tokens(profile, rec)?.tokens as f64)
}

/// Side-channel features computed from timing instead of true counts.
pub fn estimate_features(profile: &NetworkProfile, rec: &ObservationRecord) -> Result<DerivedFeatures, TimingError> {
    let tokens = estimate_tokens(profile, rec)?.tokens;
    Ok(DerivedFeatures::from_parts(rec.output_bytes, tokens as f64, rec.input_bytes))
}

/// Copies of the records with `output_tokens` replaced by timing estimates.
/// Also returns how many estimates were clamped.
pub fn with_estimated_tokens(
    profile: &NetworkProfile,
    records: &[ObservationRecord],
) -> Result<(Vec<ObservationRecord>, usize), TimingError> {
    let mut clamped = 0;
    let out = records
        .iter()
        .map(|r| {
            let est = estimate_tokens(profile, r)?;
            clamped += usize::from(est.clamped);
            Ok(ObservationRecord {
                output_tokens: Some(est.tokens),
                ..r.clone()
            })
        })
        .collect::<Result<Vec<_>, TimingError>>()?;
    Ok((out, clamped))
}

/// Among class profiles taken on different days, the one with the best
/// training objective. Earlier candidates win ties.
pub fn select_best_profile(candidates: &[ThresholdProfile]) -> Result<&ThresholdProfile, TimingError> {
    let mut best = candidates.first().ok_or(TimingError::NoCandidates)?;
    for c in &candidates[1..] {
        if c.train_asr > best.train_asr {
            best = c;
        }
    }
    Ok(best)
}
