//! Output-class recovery for two-class classification workloads.
//!
//! The attacker separates the classes with a line in (input bytes, output
//! tokens) space: a response is assigned the second class when its token
//! count exceeds `alpha * input_bytes + beta`. The line is chosen to
//! maximize a precision objective that penalizes unequal per-class
//! precision.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::AsrReport;
use crate::seed::rng_for;
use crate::tokenizer::{DensityError, InputLengthSampler};
use crate::trace::ObservationRecord;

pub const THRESHOLD_FORMAT: &str = "tokenleak-threshold/1";
pub const DEFAULT_THETA: f64 = 0.5;

// Objective values closer than this are treated as ties.
const SCORE_TIE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ClassError {
    #[error("need exactly 2 class labels, found {0:?}")]
    LabelCount(Vec<String>),
    #[error("class `{0}` needs at least 2 records")]
    SmallClass(String),
    #[error("record `{0}` has no label")]
    MissingLabel(String),
    #[error("record `{0}` has no output token count")]
    MissingTokens(String),
    #[error("theta must be finite and non-negative, got {0}")]
    BadTheta(f64),
    #[error("bias magnitude must be finite and non-negative, got {0}")]
    BadMagnitude(f64),
    #[error("compliance must lie in [0, 1], got {0}")]
    BadCompliance(f64),
    #[error("empty test trace")]
    EmptyTest,
    #[error(transparent)]
    Sampler(#[from] DensityError),
    #[error("cannot read {path}: {message}")]
    Load { path: String, message: String },
}

/// Balanced-precision objective: the mean precision minus `theta` times the
/// precision gap.
pub fn optimal_asr(prec1: f64, prec2: f64, theta: f64) -> f64 {
    (prec1 + prec2) / 2.0 - theta * (prec1 - prec2).abs()
}

/// Fitted linear token-count threshold for one task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdProfile {
    pub task: String,
    /// `[below, above]`: the second class is predicted above the threshold.
    pub labels: [String; 2],
    /// Tokens per input byte.
    pub alpha: f64,
    /// Tokens.
    pub beta: f64,
    pub theta: f64,
    pub train_precisions: [f64; 2],
    /// Objective value reached on the profiling data.
    pub train_asr: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThresholdHeader {
    format: String,
}

impl ThresholdProfile {
    pub fn threshold(&self, input_bytes: u64) -> f64 {
        self.alpha * input_bytes as f64 + self.beta
    }

    pub fn to_file_string(&self) -> String {
        let header = ThresholdHeader {
            format: THRESHOLD_FORMAT.into(),
        };
        format!(
            "{}\n{}\n",
            serde_json::to_string(&header).expect("serializable"),
            serde_json::to_string(self).expect("serializable")
        )
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: ThresholdHeader = serde_json::from_str(lines.next().ok_or("missing header")?)
            .map_err(|e| format!("line 1: {e}"))?;
        if header.format != THRESHOLD_FORMAT {
            return Err(format!("line 1: unsupported format `{}`", header.format));
        }
        let body: ThresholdProfile = serde_json::from_str(lines.next().ok_or("missing profile line")?)
            .map_err(|e| format!("line 2: {e}"))?;
        if lines.next().is_some() {
            return Err("unexpected content after the profile line".into());
        }
        if !(body.theta >= 0.0) {
            return Err("theta must be non-negative".into());
        }
        Ok(body)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClassError> {
        let path = path.as_ref();
        let err = |message: String| ClassError::Load {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        ThresholdProfile::parse(&text).map_err(err)
    }
}

#[derive(Clone, Copy)]
struct Point {
    input: i64,
    tokens: i64,
    class: usize,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Every slope at which the projection order of two points flips, plus one
/// slope strictly inside each gap between them and one beyond either end,
/// plus zero. Each open slope interval has a fixed projection order, so this
/// set reaches every labelling a line can induce.
fn candidate_slopes(points: &[Point]) -> Vec<f64> {
    let mut exact = BTreeSet::new();
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let dx = b.input - a.input;
            if dx == 0 {
                continue;
            }
            let dy = b.tokens - a.tokens;
            let g = gcd(dy, dx).max(1);
            let (num, den) = if dx < 0 { (-dy / g, -dx / g) } else { (dy / g, dx / g) };
            exact.insert((num, den));
        }
    }
    let mut critical: Vec<f64> = exact.iter().map(|&(n, d)| n as f64 / d as f64).collect();
    critical.sort_by(f64::total_cmp);
    critical.dedup();

    let mut out = vec![0.0];
    if let (Some(&lo), Some(&hi)) = (critical.first(), critical.last()) {
        out.push(lo - 1.0);
        out.push(hi + 1.0);
    }
    for w in critical.windows(2) {
        out.push((w[0] + w[1]) / 2.0);
    }
    out.extend_from_slice(&critical);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    score: f64,
    alpha: f64,
    beta: f64,
    /// Index of the class predicted above the threshold.
    above: usize,
    precisions: [f64; 2],
}

impl Candidate {
    /// Higher score, then smaller |alpha|, then smaller beta, then the
    /// natural label order.
    fn better_than(&self, other: &Candidate) -> bool {
        if (self.score - other.score).abs() > SCORE_TIE {
            return self.score > other.score;
        }
        if self.alpha.abs() != other.alpha.abs() {
            return self.alpha.abs() < other.alpha.abs();
        }
        if self.beta != other.beta {
            return self.beta < other.beta;
        }
        self.above > other.above
    }
}

/// Best threshold at a fixed slope, over both class orientations.
fn best_at_slope(points: &[Point], alpha: f64, theta: f64) -> Candidate {
    let mut z: Vec<(f64, usize)> = points
        .iter()
        .map(|p| (p.tokens as f64 - alpha * p.input as f64, p.class))
        .collect();
    z.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = z.len();
    let total = [
        z.iter().filter(|p| p.1 == 0).count(),
        z.iter().filter(|p| p.1 == 1).count(),
    ];

    let mut best: Option<Candidate> = None;
    let mut below = [0usize; 2];
    // k = number of points at or below the threshold.
    let mut k = 0;
    loop {
        let beta = if k == 0 {
            z[0].0 - 1.0
        } else if k == n {
            z[n - 1].0 + 1.0
        } else {
            (z[k - 1].0 + z[k].0) / 2.0
        };
        for above in [1usize, 0] {
            let below_class = 1 - above;
            let prec_below = if k > 0 { below[below_class] as f64 / k as f64 } else { 0.0 };
            let prec_above = if k < n {
                (total[above] - below[above]) as f64 / (n - k) as f64
            } else {
                0.0
            };
            let mut precisions = [0.0; 2];
            precisions[below_class] = prec_below;
            precisions[above] = prec_above;
            let cand = Candidate {
                score: optimal_asr(prec_below, prec_above, theta),
                alpha,
                beta,
                above,
                precisions,
            };
            if best.as_ref().is_none_or(|b| cand.better_than(b)) {
                best = Some(cand);
            }
        }
        if k == n {
            break;
        }
        // Advance past every point tied with z[k].
        let v = z[k].0;
        while k < n && z[k].0 == v {
            below[z[k].1] += 1;
            k += 1;
        }
    }
    best.expect("at least one candidate")
}

/// Labelled `(input_bytes, output_tokens)` data for one task.
fn collect_points(records: &[ObservationRecord]) -> Result<(Vec<String>, Vec<Point>), ClassError> {
    let labels: BTreeSet<&str> = records
        .iter()
        .map(|r| r.label.as_deref().ok_or_else(|| ClassError::MissingLabel(r.id.clone())))
        .collect::<Result<_, _>>()?;
    let labels: Vec<String> = labels.into_iter().map(str::to_owned).collect();
    if labels.len() != 2 {
        return Err(ClassError::LabelCount(labels));
    }
    let points = records
        .iter()
        .map(|r| {
            let tokens = r.output_tokens.ok_or_else(|| ClassError::MissingTokens(r.id.clone()))?;
            let class = usize::from(r.label.as_deref() == Some(labels[1].as_str()));
            Ok(Point {
                input: r.input_bytes as i64,
                tokens: tokens as i64,
                class,
            })
        })
        .collect::<Result<Vec<_>, ClassError>>()?;
    for (c, label) in labels.iter().enumerate() {
        if points.iter().filter(|p| p.class == c).count() < 2 {
            return Err(ClassError::SmallClass(label.clone()));
        }
    }
    Ok((labels, points))
}

/// Sweeps candidate slopes and thresholds for the line with the best
/// balanced-precision objective on labelled profiling data.
pub fn fit_threshold(
    task: &str,
    records: &[ObservationRecord],
    theta: f64,
) -> Result<ThresholdProfile, ClassError> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(ClassError::BadTheta(theta));
    }
    let (labels, points) = collect_points(records)?;
    let slopes = candidate_slopes(&points);
    let per_slope: Vec<Candidate> = slopes
        .par_iter()
        .map(|&alpha| best_at_slope(&points, alpha, theta))
        .collect();
    let mut best = per_slope[0];
    for c in &per_slope[1..] {
        if c.better_than(&best) {
            best = *c;
        }
    }
    let below = 1 - best.above;
    Ok(ThresholdProfile {
        task: task.to_owned(),
        labels: [labels[below].clone(), labels[best.above].clone()],
        alpha: best.alpha,
        beta: best.beta,
        theta,
        train_precisions: [best.precisions[below], best.precisions[best.above]],
        train_asr: best.score,
    })
}

pub fn predict_class<'a>(
    profile: &'a ThresholdProfile,
    rec: &ObservationRecord,
) -> Result<&'a str, ClassError> {
    let tokens = rec
        .output_tokens
        .ok_or_else(|| ClassError::MissingTokens(rec.id.clone()))?;
    let above = tokens as f64 > profile.threshold(rec.input_bytes);
    Ok(&profile.labels[usize::from(above)])
}

/// Per-class precision over a labelled test trace and their mean.
pub fn evaluate_class_asr(
    profile: &ThresholdProfile,
    test: &[ObservationRecord],
) -> Result<AsrReport, ClassError> {
    if test.is_empty() {
        return Err(ClassError::EmptyTest);
    }
    let outcomes = test
        .iter()
        .map(|r| {
            let truth = r.label.clone().ok_or_else(|| ClassError::MissingLabel(r.id.clone()))?;
            Ok((truth, predict_class(profile, r)?.to_owned()))
        })
        .collect::<Result<Vec<_>, ClassError>>()?;
    Ok(AsrReport::from_predictions(&profile.labels, &outcomes))
}

/// Token-count distribution of one class: `base + slope * input + noise`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassLengthSpec {
    pub label: String,
    pub base_tokens: f64,
    #[serde(default)]
    pub tokens_per_input_byte: f64,
    pub sd_tokens: f64,
}

/// A share of responses that follow a fixed-length instruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedLength {
    pub target_tokens: f64,
    pub compliance: f64,
}

/// Generator for one planted two-class task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassTaskSpec {
    pub task: String,
    pub classes: [ClassLengthSpec; 2],
    pub input_lengths: InputLengthSampler,
    /// Output bytes per generated token.
    pub bytes_per_token: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_length: Option<FixedLength>,
}

impl ClassTaskSpec {
    /// Signed difference of the class intercepts, second minus first.
    pub fn gap(&self) -> f64 {
        self.classes[1].base_tokens - self.classes[0].base_tokens
    }

    pub fn load_all(path: impl AsRef<Path>) -> Result<Vec<ClassTaskSpec>, ClassError> {
        let path = path.as_ref();
        let err = |message: String| ClassError::Load {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| err(format!("line {}: {e}", i + 1))))
            .collect()
    }
}

/// Direction of few-shot example bias relative to a task's inherent bias.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasShift {
    #[serde(rename = "augment")]
    Augmenting,
    #[serde(rename = "diminish")]
    Diminishing,
    #[default]
    #[serde(rename = "none")]
    Unbiased,
}

impl BiasShift {
    pub fn as_str(self) -> &'static str {
        match self {
            BiasShift::Augmenting => "augment",
            BiasShift::Diminishing => "diminish",
            BiasShift::Unbiased => "none",
        }
    }
}

impl fmt::Display for BiasShift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BiasShift {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "augment" | "augmenting" => Ok(BiasShift::Augmenting),
            "diminish" | "diminishing" => Ok(BiasShift::Diminishing),
            "none" | "unbiased" => Ok(BiasShift::Unbiased),
            other => Err(format!("unknown bias `{other}` (augment|diminish|none)")),
        }
    }
}

/// Moves the class intercepts apart (augmenting) or together (diminishing)
/// by `magnitude` times the inherent gap, symmetrically about their midpoint.
pub fn bias_transform(
    spec: &ClassTaskSpec,
    shift: BiasShift,
    magnitude: f64,
) -> Result<ClassTaskSpec, ClassError> {
    if !(magnitude >= 0.0 && magnitude.is_finite()) {
        return Err(ClassError::BadMagnitude(magnitude));
    }
    let half = magnitude * spec.gap() / 2.0;
    let delta = match shift {
        BiasShift::Unbiased => return Ok(spec.clone()),
        BiasShift::Augmenting => half,
        BiasShift::Diminishing => -half,
    };
    let mut out = spec.clone();
    out.classes[0].base_tokens -= delta;
    out.classes[1].base_tokens += delta;
    Ok(out)
}

/// Draws `per_class` records per class. Ids are `{task}-{label}-{index}`.
pub fn synth_class_trace(
    spec: &ClassTaskSpec,
    per_class: usize,
    seed: u64,
) -> Result<Vec<ObservationRecord>, ClassError> {
    spec.input_lengths.validate()?;
    if let Some(f) = &spec.fixed_length {
        if !(0.0..=1.0).contains(&f.compliance) {
            return Err(ClassError::BadCompliance(f.compliance));
        }
    }
    let pooled_sd = (spec.classes[0].sd_tokens + spec.classes[1].sd_tokens) / 2.0;
    let mut out = Vec::with_capacity(2 * per_class);
    for class in &spec.classes {
        let mut rng = rng_for(seed, &["class-synth", &spec.task, &class.label]);
        for i in 0..per_class {
            let input = spec.input_lengths.sample(&mut rng);
            let z: f64 = rng.sample(StandardNormal);
            // Always drawn so that compliance changes never shift the stream.
            let u: f64 = rng.random();
            let z_fixed: f64 = rng.sample(StandardNormal);
            let mut tokens = class.base_tokens + class.tokens_per_input_byte * input as f64 + class.sd_tokens * z;
            if let Some(f) = &spec.fixed_length {
                if u < f.compliance {
                    tokens = f.target_tokens + pooled_sd * z_fixed;
                }
            }
            let tokens = (tokens.round().max(1.0)) as u64;
            let output_bytes = (tokens as f64 * spec.bytes_per_token).round() as u64;
            out.push(ObservationRecord::with_counts(
                format!("{}-{}-{i:05}", spec.task, class.label),
                Some(&class.label),
                input,
                output_bytes,
                tokens,
            ));
        }
    }
    Ok(out)
}
