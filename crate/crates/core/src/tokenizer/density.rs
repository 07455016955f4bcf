//! Generative per-language model of the two length features.
//!
//! Each language draws `(token density, output/input ratio)` from a
//! correlated bivariate Gaussian. Traces synthesized from it stand in for
//! real model outputs when profiling and attacking.

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::rng_for;
use crate::trace::ObservationRecord;

pub const DEFAULT_FLOOR: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanguageDensity {
    pub language: String,
    /// Mean output bytes per token.
    pub mean_density: f64,
    pub sd_density: f64,
    /// Mean output bytes per input byte.
    pub mean_ratio: f64,
    pub sd_ratio: f64,
    /// Correlation between density and ratio draws.
    pub correlation: f64,
}

impl LanguageDensity {
    pub fn new(language: &str, density: (f64, f64), ratio: (f64, f64), correlation: f64) -> Self {
        LanguageDensity {
            language: language.to_owned(),
            mean_density: density.0,
            sd_density: density.1,
            mean_ratio: ratio.0,
            sd_ratio: ratio.1,
            correlation,
        }
    }
}

#[derive(Debug, Error)]
pub enum DensityError {
    #[error("language `{0}` is not in the density model")]
    UnknownLanguage(String),
    #[error("sample count must be positive")]
    NonPositiveCount,
    #[error("language `{language}`: {message}")]
    InvalidParameter { language: String, message: String },
    #[error("duplicate language `{0}`")]
    DuplicateLanguage(String),
    #[error("truncation floor must be positive, got {0}")]
    BadFloor(f64),
    #[error("cannot read density model {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("density model line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("input length sampler: {0}")]
    BadSampler(String),
}

/// Per-language feature distributions, sorted by language name.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityModel {
    languages: Vec<LanguageDensity>,
    /// Lower bound applied to sampled densities and ratios.
    floor: f64,
}

impl DensityModel {
    pub fn new(mut languages: Vec<LanguageDensity>) -> Result<Self, DensityError> {
        languages.sort_by(|a, b| a.language.cmp(&b.language));
        let mut seen = BTreeSet::new();
        for l in &languages {
            if !seen.insert(l.language.as_str()) {
                return Err(DensityError::DuplicateLanguage(l.language.clone()));
            }
            let bad = |message: &str| {
                Err(DensityError::InvalidParameter {
                    language: l.language.clone(),
                    message: message.to_owned(),
                })
            };
            let finite = [l.mean_density, l.sd_density, l.mean_ratio, l.sd_ratio, l.correlation]
                .iter()
                .all(|v| v.is_finite());
            if !finite {
                return bad("parameters must be finite");
            }
            if l.sd_density < 0.0 || l.sd_ratio < 0.0 {
                return bad("standard deviations must be non-negative");
            }
            if !(-1.0..=1.0).contains(&l.correlation) {
                return bad("correlation must lie in [-1, 1]");
            }
            if l.mean_density <= 0.0 || l.mean_ratio <= 0.0 {
                return bad("means must be positive");
            }
        }
        Ok(DensityModel {
            languages,
            floor: DEFAULT_FLOOR,
        })
    }

    pub fn with_floor(mut self, floor: f64) -> Result<Self, DensityError> {
        if !(floor > 0.0 && floor.is_finite()) {
            return Err(DensityError::BadFloor(floor));
        }
        self.floor = floor;
        Ok(self)
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn languages(&self) -> &[LanguageDensity] {
        &self.languages
    }

    pub fn language_names(&self) -> Vec<String> {
        self.languages.iter().map(|l| l.language.clone()).collect()
    }

    pub fn get(&self, language: &str) -> Option<&LanguageDensity> {
        self.languages.iter().find(|l| l.language == language)
    }

    /// One JSON object per line, one line per language.
    pub fn parse(text: &str) -> Result<Self, DensityError> {
        let mut langs = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let l: LanguageDensity = serde_json::from_str(line).map_err(|e| DensityError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            langs.push(l);
        }
        DensityModel::new(langs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DensityError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| DensityError::Io {
            path: path.display().to_string(),
            source,
        })?;
        DensityModel::parse(&text)
    }

    pub fn to_file_string(&self) -> String {
        self.languages
            .iter()
            .map(|l| serde_json::to_string(l).expect("serializable") + "\n")
            .collect()
    }
}

/// Distribution of request input lengths in bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InputLengthSampler {
    Fixed { bytes: u64 },
    /// Inclusive on both ends.
    Uniform { min: u64, max: u64 },
    /// Rounded and clamped to at least one byte.
    Normal { mean: f64, sd: f64 },
}

impl InputLengthSampler {
    pub fn validate(&self) -> Result<(), DensityError> {
        match *self {
            InputLengthSampler::Fixed { bytes: 0 } => {
                Err(DensityError::BadSampler("fixed length must be positive".into()))
            }
            InputLengthSampler::Uniform { min, max } if min == 0 || min > max => Err(
                DensityError::BadSampler("uniform bounds need 1 <= min <= max".into()),
            ),
            InputLengthSampler::Normal { mean, sd } if !(mean.is_finite() && sd >= 0.0) => Err(
                DensityError::BadSampler("normal needs finite mean and sd >= 0".into()),
            ),
            _ => Ok(()),
        }
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            InputLengthSampler::Fixed { bytes } => bytes,
            InputLengthSampler::Uniform { min, max } => rng.random_range(min..=max),
            InputLengthSampler::Normal { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                (mean + sd * z).round().max(1.0) as u64
            }
        }
    }
}

/// Draws `count` labelled records for one language. Ids are
/// `{language}-{index}` with a zero-padded index.
pub fn synth_trace(
    model: &DensityModel,
    language: &str,
    count: usize,
    input_lengths: &InputLengthSampler,
    seed: u64,
) -> Result<Vec<ObservationRecord>, DensityError> {
    let lang = model
        .get(language)
        .ok_or_else(|| DensityError::UnknownLanguage(language.to_owned()))?;
    if count == 0 {
        return Err(DensityError::NonPositiveCount);
    }
    input_lengths.validate()?;

    let mut rng = rng_for(seed, &["synth", language]);
    let rho = lang.correlation;
    let orth = (1.0 - rho * rho).max(0.0).sqrt();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let density = (lang.mean_density + lang.sd_density * z1).max(model.floor);
        let ratio = (lang.mean_ratio + lang.sd_ratio * (rho * z1 + orth * z2)).max(model.floor);
        let input_bytes = input_lengths.sample(&mut rng);
        let output_bytes = (ratio * input_bytes as f64).round() as u64;
        let output_tokens = ((output_bytes as f64 / density).round() as u64).max(1);
        out.push(ObservationRecord::with_counts(
            format!("{language}-{i:05}"),
            Some(language),
            input_bytes,
            output_bytes,
            output_tokens,
        ));
    }
    Ok(out)
}

/// `synth_trace` for every language in the model, concatenated in language order.
pub fn synth_all(
    model: &DensityModel,
    count_per_language: usize,
    input_lengths: &InputLengthSampler,
    seed: u64,
) -> Result<Vec<ObservationRecord>, DensityError> {
    let mut out = Vec::new();
    for lang in model.languages() {
        out.extend(synth_trace(model, &lang.language, count_per_language, input_lengths, seed)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::derive_features;

    fn two_lang(sd: f64) -> DensityModel {
        DensityModel::new(vec![
            LanguageDensity::new("a", (1.0, sd), (1.0, sd), 0.0),
            LanguageDensity::new("b", (4.0, sd), (1.0, sd), 0.0),
        ])
        .unwrap()
    }

    #[test]
    fn degenerate_gaussian_is_exact() {
        let m = DensityModel::new(vec![LanguageDensity::new("x", (2.0, 0.0), (1.0, 0.0), 0.3)]).unwrap();
        let recs = synth_trace(&m, "x", 20, &InputLengthSampler::Fixed { bytes: 100 }, 1).unwrap();
        for r in recs {
            assert_eq!((r.output_bytes, r.output_tokens), (100, Some(50)));
        }
    }

    #[test]
    fn seeded_determinism() {
        let m = two_lang(0.3);
        let s = InputLengthSampler::Uniform { min: 20, max: 200 };
        assert_eq!(
            synth_trace(&m, "a", 50, &s, 9).unwrap(),
            synth_trace(&m, "a", 50, &s, 9).unwrap()
        );
        assert_ne!(
            synth_trace(&m, "a", 50, &s, 9).unwrap(),
            synth_trace(&m, "a", 50, &s, 10).unwrap()
        );
    }

    #[test]
    fn sample_means_match_configuration() {
        let m = two_lang(0.1);
        // Long inputs keep rounding error far below the 0.1 spread.
        let s = InputLengthSampler::Fixed { bytes: 4000 };
        for (lang, target) in [("a", 1.0), ("b", 4.0)] {
            let recs = synth_trace(&m, lang, 1000, &s, 3).unwrap();
            let d: Vec<f64> = recs.iter().map(|r| derive_features(r).unwrap().token_density).collect();
            let mean = crate::stats::mean(&d);
            let se = 0.1 / (1000f64).sqrt();
            assert!((mean - target).abs() < 3.0 * se + 1e-3, "{lang}: {mean}");
        }
    }

    #[test]
    fn errors() {
        let m = two_lang(0.1);
        let s = InputLengthSampler::Fixed { bytes: 10 };
        assert!(matches!(synth_trace(&m, "zz", 1, &s, 0), Err(DensityError::UnknownLanguage(_))));
        assert!(matches!(synth_trace(&m, "a", 0, &s, 0), Err(DensityError::NonPositiveCount)));
        assert!(DensityModel::new(vec![LanguageDensity::new("x", (2.0, -1.0), (1.0, 0.0), 0.0)]).is_err());
        assert!(DensityModel::new(vec![LanguageDensity::new("x", (2.0, 1.0), (1.0, 0.0), 1.5)]).is_err());
        assert!(m.clone().with_floor(0.0).is_err());
    }

    #[test]
    fn floor_truncates() {
        let m = DensityModel::new(vec![LanguageDensity::new("x", (0.01, 0.0), (1.0, 0.0), 0.0)])
            .unwrap()
            .with_floor(0.5)
            .unwrap();
        let recs = synth_trace(&m, "x", 3, &InputLengthSampler::Fixed { bytes: 10 }, 0).unwrap();
        assert!(recs.iter().all(|r| r.output_tokens == Some(20)));
    }

    #[test]
    fn file_round_trip() {
        let m = two_lang(0.25);
        assert_eq!(DensityModel::parse(&m.to_file_string()).unwrap(), m);
    }
}
