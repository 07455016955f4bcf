//! Deterministic simulator of an autoregressive serving endpoint.
//!
//! A request is stamped with a first-token time after one network leg plus a
//! load-scaled TTFT, and a completion time after `n` load-scaled per-token
//! decode steps plus the return leg. Noise for a record is drawn from a
//! generator keyed by `(seed, record id)`, so a record simulates to the same
//! timestamps no matter which batch it appears in.

use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::{rng_for, Rng};
use crate::trace::{Mode, ObservationRecord, Timestamp, Trace};

/// Server load multiplier as a function of wall-clock time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LoadProfile {
    /// `(t_start, multiplier)` breakpoints in ascending time order. Before
    /// the first breakpoint the multiplier is 1; an empty list is constant load.
    Piecewise(Vec<(f64, f64)>),
    /// `1 + amplitude * (1 + sin(2*pi*t/period + phase)) / 2`.
    Sinusoidal {
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl Default for LoadProfile {
    fn default() -> Self {
        LoadProfile::Piecewise(Vec::new())
    }
}

impl LoadProfile {
    pub fn constant() -> Self {
        LoadProfile::default()
    }

    pub fn step(at: f64, multiplier: f64) -> Self {
        LoadProfile::Piecewise(vec![(at, multiplier)])
    }

    pub fn multiplier(&self, t: f64) -> f64 {
        match self {
            LoadProfile::Piecewise(points) => points
                .iter()
                .take_while(|(start, _)| *start <= t)
                .last()
                .map_or(1.0, |&(_, m)| m),
            LoadProfile::Sinusoidal {
                amplitude,
                period,
                phase,
            } => {
                let angle = std::f64::consts::TAU * t / period + phase;
                1.0 + amplitude * (1.0 + angle.sin()) / 2.0
            }
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        match self {
            LoadProfile::Piecewise(points) => {
                if points.iter().any(|&(t, m)| !t.is_finite() || !(m >= 1.0 && m.is_finite())) {
                    return Err(SimError::InvalidModel(
                        "load multipliers must be finite and >= 1".into(),
                    ));
                }
                if points.windows(2).any(|w| w[1].0 < w[0].0) {
                    return Err(SimError::InvalidModel(
                        "load breakpoints must be in ascending time order".into(),
                    ));
                }
            }
            LoadProfile::Sinusoidal {
                amplitude, period, ..
            } => {
                if !(*amplitude >= 0.0 && *period > 0.0) {
                    return Err(SimError::InvalidModel(
                        "sinusoidal load needs amplitude >= 0 and period > 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Timing parameters of the simulated server and network path, in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingModel {
    pub ttft_mean: f64,
    pub tpot_mean: f64,
    pub noise_sd_ttft: f64,
    pub noise_sd_tpot: f64,
    pub net_delay_oneway: f64,
    /// Jitter on ping round trips only.
    #[serde(default)]
    pub noise_sd_ping: f64,
    #[serde(default)]
    pub load_profile: LoadProfile,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("record `{0}` has no output token count to simulate")]
    MissingTokens(String),
    #[error("invalid timing model: {0}")]
    InvalidModel(String),
    #[error("cannot read timing model {path}: {message}")]
    Load { path: String, message: String },
}

impl TimingModel {
    /// Noise-free model with constant load.
    pub fn ideal(ttft: f64, tpot: f64, net_delay_oneway: f64) -> Self {
        TimingModel {
            ttft_mean: ttft,
            tpot_mean: tpot,
            noise_sd_ttft: 0.0,
            noise_sd_tpot: 0.0,
            net_delay_oneway,
            noise_sd_ping: 0.0,
            load_profile: LoadProfile::constant(),
            seed: 0,
        }
    }

    /// Open model on a dedicated GPU behind a cross-region link: small
    /// jitter, near-perfect token/time linearity.
    pub fn local_machine(seed: u64) -> Self {
        TimingModel {
            ttft_mean: 0.04,
            tpot_mean: 0.025,
            noise_sd_ttft: 0.01,
            noise_sd_tpot: 0.003,
            net_delay_oneway: 0.03,
            noise_sd_ping: 0.002,
            load_profile: LoadProfile::constant(),
            seed,
        }
    }

    /// Shared commercial endpoint: noisy decode steps and a slowly drifting
    /// server load.
    pub fn remote_api(seed: u64) -> Self {
        TimingModel {
            ttft_mean: 0.35,
            tpot_mean: 0.012,
            noise_sd_ttft: 0.25,
            noise_sd_tpot: 0.02,
            net_delay_oneway: 0.02,
            noise_sd_ping: 0.004,
            load_profile: LoadProfile::Sinusoidal {
                amplitude: 1.0,
                period: 3600.0,
                phase: 0.0,
            },
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let params = [
            self.ttft_mean,
            self.tpot_mean,
            self.noise_sd_ttft,
            self.noise_sd_tpot,
            self.net_delay_oneway,
            self.noise_sd_ping,
        ];
        if params.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(SimError::InvalidModel(
                "means, noise levels and delays must be finite and >= 0".into(),
            ));
        }
        self.load_profile.validate()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let err = |message: String| SimError::Load {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let model: TimingModel = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    fn noise_rng(&self, id: &str) -> Rng {
        rng_for(self.seed, &["serve", id])
    }

    /// Seconds from effective send to first token, and from first token to
    /// completion, for `tokens` generated tokens.
    fn service_offsets(&self, id: &str, tokens: u64, send: f64) -> (f64, f64) {
        let mut rng = self.noise_rng(id);
        let load = self.load_profile.multiplier(send);
        let z: f64 = rng.sample(StandardNormal);
        let ttft = (self.ttft_mean + self.noise_sd_ttft * z).max(0.0);
        let mut decode = 0.0;
        for _ in 0..tokens {
            let z: f64 = rng.sample(StandardNormal);
            decode += (self.tpot_mean + self.noise_sd_tpot * z).max(0.0);
        }
        (
            self.net_delay_oneway + load * ttft,
            load * decode + self.net_delay_oneway,
        )
    }
}

fn stamp(
    model: &TimingModel,
    rec: &ObservationRecord,
    effective_send: Timestamp,
    mode: Mode,
) -> Result<ObservationRecord, SimError> {
    let tokens = rec
        .output_tokens
        .ok_or_else(|| SimError::MissingTokens(rec.id.clone()))?;
    let (to_first, to_done) = model.service_offsets(&rec.id, tokens, effective_send.as_secs_f64());
    let t_first = effective_send.offset_secs(to_first);
    let t_done = t_first.offset_secs(to_done);
    Ok(ObservationRecord {
        t_first: (mode == Mode::Streaming).then_some(t_first),
        t_done: Some(t_done),
        ..rec.clone()
    })
}

/// Stamps one record as if the server were idle when it arrived.
pub fn simulate(
    model: &TimingModel,
    rec: &ObservationRecord,
    mode: Mode,
) -> Result<ObservationRecord, SimError> {
    stamp(model, rec, rec.t_send, mode)
}

/// Simulates a whole trace on a server with batch size one. Requests are
/// served in `t_send` order; a request that arrives while the previous one
/// is still decoding waits for it. Output keeps the input record order.
pub fn simulate_batch(model: &TimingModel, trace: &Trace) -> Result<Trace, SimError> {
    let mut order: Vec<usize> = (0..trace.records.len()).collect();
    order.sort_by_key(|&i| (trace.records[i].t_send, i));
    let two_legs = Timestamp::from_secs_f64(2.0 * model.net_delay_oneway).micros();

    let mut out: Vec<Option<ObservationRecord>> = vec![None; trace.records.len()];
    let mut prev_done: Option<Timestamp> = None;
    for i in order {
        let rec = &trace.records[i];
        // The server frees up one network leg before the previous response
        // lands; this request reaches the server one leg after it is sent.
        let effective = match prev_done {
            Some(done) => rec.t_send.max(Timestamp::from_micros(done.micros() - two_legs)),
            None => rec.t_send,
        };
        let stamped = stamp(model, rec, effective, trace.mode)?;
        prev_done = stamped.t_done;
        out[i] = Some(stamped);
    }
    Ok(Trace::new(trace.mode, out.into_iter().flatten().collect()))
}

/// Round-trip probe: two network legs plus jitter, never negative.
pub fn ping(model: &TimingModel, probe: u64) -> f64 {
    let mut rng = rng_for(model.seed, &["ping", &probe.to_string()]);
    let z: f64 = rng.sample(StandardNormal);
    (2.0 * model.net_delay_oneway + model.noise_sd_ping * z).max(0.0)
}

/// `count` consecutive pings starting at probe index zero.
pub fn pings(model: &TimingModel, count: u64) -> Vec<f64> {
    (0..count).map(|i| ping(model, i)).collect()
}

/// Sends the records one every `interval` seconds starting at `start`.
pub fn schedule(records: &mut [ObservationRecord], start: f64, interval: f64) {
    for (i, r) in records.iter_mut().enumerate() {
        r.t_send = Timestamp::from_secs_f64(start + interval * i as f64);
    }
}
