//! Countermeasures against the output-length channel and their cost.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::{ClassError, ClassTaskSpec, FixedLength};
use crate::servesim::{simulate, SimError, TimingModel};
use crate::tokenizer::{DensityError, DensityModel, LanguageDensity};
use crate::trace::{Mode, ObservationRecord, Timestamp};

#[derive(Debug, Error)]
pub enum DefenseError {
    #[error("cannot pad an empty trace")]
    EmptyTrace,
    #[error("padding needs a non-empty reference trace")]
    EmptyReference,
    #[error("record `{0}` has no output token count")]
    MissingTokens(String),
    #[error("record `{0}` carries timestamps but no timing model was given to re-time it")]
    TimingRequired(String),
    #[error("original and padded traces differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("tolerance must be finite and non-negative, got {0}")]
    BadTolerance(f64),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Class(#[from] ClassError),
    #[error(transparent)]
    Density(#[from] DensityError),
}

/// How the per-record padding target is chosen from the reference trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PadRule {
    /// Maximum over reference records whose input length is within
    /// `tolerance` (relative) of the padded record's input length.
    InputConditioned { tolerance: f64 },
    /// Maximum over the whole reference trace.
    GlobalMax,
}

impl Default for PadRule {
    fn default() -> Self {
        PadRule::InputConditioned { tolerance: 0.1 }
    }
}

struct Targets {
    /// `(input_bytes, output_tokens, output_bytes)` sorted by input length.
    by_input: Vec<(u64, u64, u64)>,
    global: (u64, u64),
}

impl Targets {
    fn new(reference: &[ObservationRecord]) -> Result<Self, DefenseError> {
        if reference.is_empty() {
            return Err(DefenseError::EmptyReference);
        }
        let mut by_input = reference
            .iter()
            .map(|r| {
                let tokens = r.output_tokens.ok_or_else(|| DefenseError::MissingTokens(r.id.clone()))?;
                Ok((r.input_bytes, tokens, r.output_bytes))
            })
            .collect::<Result<Vec<_>, DefenseError>>()?;
        by_input.sort_unstable();
        let global = by_input
            .iter()
            .fold((0, 0), |acc, &(_, t, b)| (acc.0.max(t), acc.1.max(b)));
        Ok(Targets { by_input, global })
    }

    fn for_input(&self, input: u64, rule: PadRule) -> (u64, u64) {
        match rule {
            PadRule::GlobalMax => self.global,
            PadRule::InputConditioned { tolerance } => {
                let lo = (input as f64 * (1.0 - tolerance)).ceil().max(0.0) as u64;
                let hi = (input as f64 * (1.0 + tolerance)).floor() as u64;
                let start = self.by_input.partition_point(|r| r.0 < lo);
                let end = self.by_input.partition_point(|r| r.0 <= hi);
                if start == end {
                    // Nothing comparable was profiled; fall back to the safe bound.
                    return self.global;
                }
                self.by_input[start..end]
                    .iter()
                    .fold((0, 0), |acc, &(_, t, b)| (acc.0.max(t), acc.1.max(b)))
            }
        }
    }
}

/// Raises every record's token count and byte length to the padding target
/// derived from `reference`. Timed records are delayed by the decode time of
/// the extra tokens under `timing`.
pub fn pad_trace(
    trace: &[ObservationRecord],
    reference: &[ObservationRecord],
    rule: PadRule,
    timing: Option<&TimingModel>,
) -> Result<Vec<ObservationRecord>, DefenseError> {
    if trace.is_empty() {
        return Err(DefenseError::EmptyTrace);
    }
    if let PadRule::InputConditioned { tolerance } = rule {
        if !(tolerance >= 0.0 && tolerance.is_finite()) {
            return Err(DefenseError::BadTolerance(tolerance));
        }
    }
    let targets = Targets::new(reference)?;
    trace
        .iter()
        .map(|rec| {
            let tokens = rec
                .output_tokens
                .ok_or_else(|| DefenseError::MissingTokens(rec.id.clone()))?;
            let (token_target, byte_target) = targets.for_input(rec.input_bytes, rule);
            let padded_tokens = tokens.max(token_target);
            let mut out = ObservationRecord {
                output_tokens: Some(padded_tokens),
                output_bytes: rec.output_bytes.max(byte_target),
                ..rec.clone()
            };
            if let Some(done) = rec.t_done {
                if padded_tokens > tokens {
                    let model = timing.ok_or_else(|| DefenseError::TimingRequired(rec.id.clone()))?;
                    let base = simulate(model, rec, Mode::NonStreaming)?;
                    let longer = simulate(model, &out, Mode::NonStreaming)?;
                    let extra = longer.t_done.expect("simulated").micros() - base.t_done.expect("simulated").micros();
                    out.t_done = Some(Timestamp::from_micros(done.micros() + extra.max(0)));
                }
            }
            Ok(out)
        })
        .collect()
}

/// Latency and byte overheads of a padded trace relative to the original.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Penalties {
    /// Fractional increase of mean duration; `None` without timestamps.
    pub latency_penalty: Option<f64>,
    /// Fractional increase of mean output bytes.
    pub byte_padding: f64,
}

pub fn penalty_report(
    original: &[ObservationRecord],
    padded: &[ObservationRecord],
) -> Result<Penalties, DefenseError> {
    if original.len() != padded.len() {
        return Err(DefenseError::LengthMismatch(original.len(), padded.len()));
    }
    if original.is_empty() {
        return Err(DefenseError::EmptyTrace);
    }
    let sum_bytes = |t: &[ObservationRecord]| t.iter().map(|r| r.output_bytes as f64).sum::<f64>();
    let byte_padding = sum_bytes(padded) / sum_bytes(original) - 1.0;
    let durations = |t: &[ObservationRecord]| t.iter().map(ObservationRecord::duration).sum::<Option<f64>>();
    let latency_penalty = match (durations(original), durations(padded)) {
        (Some(a), Some(b)) => Some(b / a - 1.0),
        _ => None,
    };
    Ok(Penalties {
        latency_penalty,
        byte_padding: if byte_padding.is_nan() { 0.0 } else { byte_padding },
    })
}

/// Attack success before and after a defense, with its overheads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefenseReport {
    pub defense: String,
    pub pre_asr: f64,
    pub post_asr: f64,
    pub latency_penalty: Option<f64>,
    pub byte_padding: Option<f64>,
}

/// Models a fixed-length instruction that a share `compliance` of responses
/// obey.
pub fn fixed_length_transform(
    spec: &ClassTaskSpec,
    target_tokens: f64,
    compliance: f64,
) -> Result<ClassTaskSpec, DefenseError> {
    if !(0.0..=1.0).contains(&compliance) {
        return Err(ClassError::BadCompliance(compliance).into());
    }
    let mut out = spec.clone();
    out.fixed_length = (compliance > 0.0).then_some(FixedLength {
        target_tokens,
        compliance,
    });
    Ok(out)
}

/// Replaces every language's density distribution with the pooled one,
/// leaving the byte-ratio distributions alone.
pub fn uniform_tokenizer_model(model: &DensityModel) -> Result<DensityModel, DefenseError> {
    let langs = model.languages();
    let first = &langs[0];
    let already = langs
        .iter()
        .all(|l| l.mean_density == first.mean_density && l.sd_density == first.sd_density);
    if already {
        return Ok(model.clone());
    }
    let k = langs.len() as f64;
    let mean = langs.iter().map(|l| l.mean_density).sum::<f64>() / k;
    // Moments of the equal-weight mixture.
    let second = langs
        .iter()
        .map(|l| l.sd_density * l.sd_density + (l.mean_density - mean).powi(2))
        .sum::<f64>()
        / k;
    let sd = second.sqrt();
    let pooled: Vec<LanguageDensity> = langs
        .iter()
        .map(|l| LanguageDensity {
            mean_density: mean,
            sd_density: sd,
            ..l.clone()
        })
        .collect();
    Ok(DensityModel::new(pooled)?.with_floor(model.floor())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::servesim::simulate_batch;
    use crate::trace::Trace;

    fn rec(id: &str, input: u64, bytes: u64, tokens: u64) -> ObservationRecord {
        ObservationRecord::with_counts(id, Some("x"), input, bytes, tokens)
    }

    #[test]
    fn already_at_max_is_identity() {
        let t = vec![rec("a", 100, 300, 100), rec("b", 100, 300, 100)];
        assert_eq!(pad_trace(&t, &t, PadRule::default(), None).unwrap(), t);
        let p = penalty_report(&t, &t).unwrap();
        assert_eq!(p.byte_padding, 0.0);
        assert_eq!(p.latency_penalty, None);
    }

    #[test]
    fn token_inflation_for_short_language() {
        let t = vec![rec("a", 100, 300, 100), rec("b", 100, 300, 200)];
        let padded = pad_trace(&t, &t, PadRule::GlobalMax, None).unwrap();
        assert_eq!(padded[0].output_tokens, Some(200));
        let inflation = padded[0].output_tokens.unwrap() as f64 / t[0].output_tokens.unwrap() as f64 - 1.0;
        assert_eq!(inflation, 1.0);
    }

    #[test]
    fn conditioned_rule_uses_nearby_inputs() {
        let reference = vec![rec("a", 100, 150, 50), rec("b", 108, 400, 90), rec("c", 300, 900, 400)];
        let t = vec![rec("x", 100, 100, 10)];
        let padded = pad_trace(&t, &reference, PadRule::default(), None).unwrap();
        assert_eq!((padded[0].output_tokens, padded[0].output_bytes), (Some(90), 400));
        let padded = pad_trace(&t, &reference, PadRule::GlobalMax, None).unwrap();
        assert_eq!((padded[0].output_tokens, padded[0].output_bytes), (Some(400), 900));
        // Nothing within 10% of 1000 bytes: the global bound applies.
        let far = pad_trace(&[rec("y", 1000, 1, 1)], &reference, PadRule::default(), None).unwrap();
        assert_eq!(far[0].output_tokens, Some(400));
    }

    #[test]
    fn retiming_never_shortens() {
        let model = TimingModel::local_machine(3);
        let mut recs = vec![rec("a", 100, 300, 20), rec("b", 100, 300, 80), rec("c", 105, 310, 50)];
        crate::servesim::schedule(&mut recs, 0.0, 1.0);
        let timed = simulate_batch(&model, &Trace::new(Mode::NonStreaming, recs)).unwrap().records;
        let padded = pad_trace(&timed, &timed, PadRule::default(), Some(&model)).unwrap();
        for (o, p) in timed.iter().zip(&padded) {
            assert!(p.output_tokens >= o.output_tokens);
            assert!(p.output_bytes >= o.output_bytes);
            assert!(p.duration().unwrap() >= o.duration().unwrap());
        }
        assert_eq!((padded[1].output_tokens, padded[1].t_done), (timed[1].output_tokens, timed[1].t_done));
        let pen = penalty_report(&timed, &padded).unwrap();
        assert!(pen.latency_penalty.unwrap() > 0.0);
        assert!(matches!(
            pad_trace(&timed, &timed, PadRule::default(), None),
            Err(DefenseError::TimingRequired(_))
        ));
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(pad_trace(&[], &[rec("a", 1, 1, 1)], PadRule::default(), None), Err(DefenseError::EmptyTrace)));
        assert!(matches!(pad_trace(&[rec("a", 1, 1, 1)], &[], PadRule::default(), None), Err(DefenseError::EmptyReference)));
    }

    #[test]
    fn uniform_model() {
        let m = DensityModel::new(vec![
            LanguageDensity::new("a", (2.0, 0.5), (1.0, 0.1), 0.2),
            LanguageDensity::new("b", (4.0, 0.5), (1.5, 0.1), 0.0),
        ])
        .unwrap();
        let u = uniform_tokenizer_model(&m).unwrap();
        for l in u.languages() {
            assert_eq!(l.mean_density, 3.0);
            assert!((l.sd_density - (0.25f64 + 1.0).sqrt()).abs() < 1e-12);
        }
        assert_eq!(u.get("b").unwrap().mean_ratio, 1.5);
        assert_eq!(uniform_tokenizer_model(&u).unwrap(), u);
    }

    #[test]
    fn zero_compliance_is_identity() {
        let spec: ClassTaskSpec = serde_json::from_str(
            r#"{"task":"t","classes":[{"label":"a","base_tokens":10,"sd_tokens":1},{"label":"b","base_tokens":20,"sd_tokens":1}],"input_lengths":{"kind":"fixed","bytes":50},"bytes_per_token":4}"#,
        )
        .unwrap();
        assert_eq!(fixed_length_transform(&spec, 60.0, 0.0).unwrap(), spec);
        assert!(fixed_length_transform(&spec, 60.0, 1.5).is_err());
        assert_eq!(
            fixed_length_transform(&spec, 60.0, 0.5).unwrap().fixed_length,
            Some(FixedLength { target_tokens: 60.0, compliance: 0.5 })
        );
    }
}
