//! Target-language recovery for translation workloads.
//!
//! The attacker profiles each target language as a bivariate Gaussian over
//! (output token density, output/input byte ratio). A victim's batch of
//! observations is fitted the same way and matched to the profile at the
//! smallest Bhattacharyya distance. A single observation has no covariance,
//! so it is scored by its negative log-density under each profile instead.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::AsrReport;
use crate::seed::rng_for;
use crate::trace::{derive_features, DerivedFeatures, MissingTokens, ObservationRecord};

pub const PROFILE_FORMAT: &str = "tokenleak-profile2d/1";

#[derive(Debug, Error)]
pub enum LangError {
    #[error("profile `{label}` needs at least 2 records, got {count}")]
    TooFewRecords { label: String, count: usize },
    #[error("records mix labels `{0}` and `{1}`")]
    MixedLabels(String, String),
    #[error("record `{0}` has no label")]
    MissingLabel(String),
    #[error(transparent)]
    MissingTokens(#[from] MissingTokens),
    #[error("attack sample set is empty")]
    EmptySamples,
    #[error("a profile set needs at least 2 profiles, got {0}")]
    TooFewProfiles(usize),
    #[error("duplicate profile label `{0}`")]
    DuplicateLabel(String),
    #[error("covariance is singular")]
    Singular,
    #[error("no test records for any label")]
    EmptyTestSet,
    #[error("cannot read profiles {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("profile file line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Which side-channel features the attack may use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMask {
    Density,
    Ratio,
    #[default]
    Both,
}

impl FeatureMask {
    fn dims(self) -> &'static [usize] {
        match self {
            FeatureMask::Density => &[0],
            FeatureMask::Ratio => &[1],
            FeatureMask::Both => &[0, 1],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMask::Density => "density",
            FeatureMask::Ratio => "ratio",
            FeatureMask::Both => "both",
        }
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureMask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "density" => Ok(FeatureMask::Density),
            "ratio" => Ok(FeatureMask::Ratio),
            "both" => Ok(FeatureMask::Both),
            other => Err(format!("unknown feature mask `{other}` (density|ratio|both)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    #[default]
    Full,
    /// Off-diagonal terms forced to zero.
    Diagonal,
}

/// Bivariate Gaussian over (density, ratio) for one label.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassProfile2D {
    pub label: String,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
    pub sample_count: usize,
}

/// Diagonal ridge added to every fitted covariance.
pub fn regularization(cov: &[[f64; 2]; 2]) -> f64 {
    let magnitude = (cov[0][0].abs() + cov[1][1].abs()) / 2.0;
    (1e-6 * magnitude).max(1e-9)
}

impl ClassProfile2D {
    /// Sample mean and unbiased covariance, plus the diagonal ridge.
    pub fn from_features(
        label: &str,
        features: &[DerivedFeatures],
        kind: CovarianceKind,
    ) -> Result<Self, LangError> {
        let n = features.len();
        if n < 2 {
            return Err(LangError::TooFewRecords {
                label: label.to_owned(),
                count: n,
            });
        }
        let mut mean = [0.0; 2];
        for f in features {
            let x = f.as_array();
            mean[0] += x[0];
            mean[1] += x[1];
        }
        mean[0] /= n as f64;
        mean[1] /= n as f64;
        let mut cov = [[0.0; 2]; 2];
        for f in features {
            let x = f.as_array();
            let d = [x[0] - mean[0], x[1] - mean[1]];
            cov[0][0] += d[0] * d[0];
            cov[0][1] += d[0] * d[1];
            cov[1][1] += d[1] * d[1];
        }
        let denom = (n - 1) as f64;
        cov[0][0] /= denom;
        cov[1][1] /= denom;
        cov[0][1] = match kind {
            CovarianceKind::Full => cov[0][1] / denom,
            CovarianceKind::Diagonal => 0.0,
        };
        cov[1][0] = cov[0][1];
        let eps = regularization(&cov);
        cov[0][0] += eps;
        cov[1][1] += eps;
        Ok(ClassProfile2D {
            label: label.to_owned(),
            mean,
            cov,
            sample_count: n,
        })
    }

    /// Marginal (mean, variance) pairs for the masked dimensions.
    fn marginal(&self, mask: FeatureMask) -> Gaussian {
        match mask {
            FeatureMask::Both => Gaussian::Two(self.mean, self.cov),
            _ => {
                let i = mask.dims()[0];
                Gaussian::One(self.mean[i], self.cov[i][i])
            }
        }
    }
}

enum Gaussian {
    One(f64, f64),
    Two([f64; 2], [[f64; 2]; 2]),
}

fn det2(m: &[[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// `dᵀ M⁻¹ d` for a 2×2 matrix.
fn quad_inv(m: &[[f64; 2]; 2], d: [f64; 2]) -> Result<f64, LangError> {
    let det = det2(m);
    if !(det > 0.0) {
        return Err(LangError::Singular);
    }
    let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
    Ok(d[0] * (inv[0][0] * d[0] + inv[0][1] * d[1]) + d[1] * (inv[1][0] * d[0] + inv[1][1] * d[1]))
}

/// Closed-form Bhattacharyya distance between two bivariate Gaussians.
pub fn bhattacharyya(p: &ClassProfile2D, q: &ClassProfile2D) -> Result<f64, LangError> {
    bhattacharyya_masked(p, q, FeatureMask::Both)
}

pub fn bhattacharyya_masked(
    p: &ClassProfile2D,
    q: &ClassProfile2D,
    mask: FeatureMask,
) -> Result<f64, LangError> {
    let d = match (p.marginal(mask), q.marginal(mask)) {
        (Gaussian::One(m1, v1), Gaussian::One(m2, v2)) => {
            if !(v1 > 0.0 && v2 > 0.0) {
                return Err(LangError::Singular);
            }
            let v = (v1 + v2) / 2.0;
            let diff = m1 - m2;
            diff * diff / (8.0 * v) + 0.5 * (v.ln() - 0.5 * (v1.ln() + v2.ln()))
        }
        (Gaussian::Two(m1, s1), Gaussian::Two(m2, s2)) => {
            let avg = [
                [(s1[0][0] + s2[0][0]) / 2.0, (s1[0][1] + s2[0][1]) / 2.0],
                [(s1[1][0] + s2[1][0]) / 2.0, (s1[1][1] + s2[1][1]) / 2.0],
            ];
            let (d1, d2) = (det2(&s1), det2(&s2));
            if !(d1 > 0.0 && d2 > 0.0) {
                return Err(LangError::Singular);
            }
            let diff = [m1[0] - m2[0], m1[1] - m2[1]];
            quad_inv(&avg, diff)? / 8.0 + 0.5 * (det2(&avg).ln() - 0.5 * (d1.ln() + d2.ln()))
        }
        _ => unreachable!("both marginals use the same mask"),
    };
    Ok(d.max(0.0))
}

/// Negative log-density of one point, up to a shared constant.
fn neg_log_density(profile: &ClassProfile2D, x: [f64; 2], mask: FeatureMask) -> Result<f64, LangError> {
    match profile.marginal(mask) {
        Gaussian::One(m, v) => {
            let i = mask.dims()[0];
            if !(v > 0.0) {
                return Err(LangError::Singular);
            }
            Ok(0.5 * (x[i] - m) * (x[i] - m) / v + 0.5 * v.ln())
        }
        Gaussian::Two(m, s) => {
            let d = [x[0] - m[0], x[1] - m[1]];
            Ok(0.5 * quad_inv(&s, d)? + 0.5 * det2(&s).ln())
        }
    }
}

/// Profiles for every target language of one model and source language.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileSet {
    pub model: String,
    pub source_language: String,
    profiles: Vec<ClassProfile2D>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileHeader {
    format: String,
    #[serde(default)]
    model: String,
    #[serde(default)]
    source: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileLine {
    label: String,
    mean: [f64; 2],
    covariance: [f64; 4],
    sample_count: usize,
}

impl ProfileSet {
    pub fn new(
        model: impl Into<String>,
        source_language: impl Into<String>,
        mut profiles: Vec<ClassProfile2D>,
    ) -> Result<Self, LangError> {
        if profiles.len() < 2 {
            return Err(LangError::TooFewProfiles(profiles.len()));
        }
        profiles.sort_by(|a, b| a.label.cmp(&b.label));
        if let Some(w) = profiles.windows(2).find(|w| w[0].label == w[1].label) {
            return Err(LangError::DuplicateLabel(w[0].label.clone()));
        }
        Ok(ProfileSet {
            model: model.into(),
            source_language: source_language.into(),
            profiles,
        })
    }

    /// Profiles in label order.
    pub fn profiles(&self) -> &[ClassProfile2D] {
        &self.profiles
    }

    pub fn labels(&self) -> Vec<String> {
        self.profiles.iter().map(|p| p.label.clone()).collect()
    }

    /// Fits one profile per label found in a labelled profiling trace.
    pub fn fit(
        model: impl Into<String>,
        source_language: impl Into<String>,
        records: &[ObservationRecord],
        kind: CovarianceKind,
    ) -> Result<Self, LangError> {
        let labelled = labelled_features(records)?;
        ProfileSet::fit_features(model, source_language, &labelled, kind)
    }

    pub fn fit_features(
        model: impl Into<String>,
        source_language: impl Into<String>,
        labelled: &[(String, DerivedFeatures)],
        kind: CovarianceKind,
    ) -> Result<Self, LangError> {
        let groups = group_by_label(labelled);
        let profiles = groups
            .iter()
            .map(|(label, feats)| ClassProfile2D::from_features(label, feats, kind))
            .collect::<Result<Vec<_>, _>>()?;
        ProfileSet::new(model, source_language, profiles)
    }

    pub fn to_file_string(&self) -> String {
        let header = ProfileHeader {
            format: PROFILE_FORMAT.into(),
            model: self.model.clone(),
            source: self.source_language.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("serializable") + "\n";
        for p in &self.profiles {
            let line = ProfileLine {
                label: p.label.clone(),
                mean: p.mean,
                covariance: [p.cov[0][0], p.cov[0][1], p.cov[1][0], p.cov[1][1]],
                sample_count: p.sample_count,
            };
            out += &(serde_json::to_string(&line).expect("serializable") + "\n");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, LangError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let perr = |line: usize, message: String| LangError::Parse { line, message };
        let (_, header) = lines.next().ok_or_else(|| perr(1, "missing header".into()))?;
        let header: ProfileHeader =
            serde_json::from_str(header).map_err(|e| perr(1, e.to_string()))?;
        if header.format != PROFILE_FORMAT {
            return Err(perr(1, format!("unsupported format `{}`", header.format)));
        }
        let mut profiles = Vec::new();
        for (idx, line) in lines {
            let l: ProfileLine =
                serde_json::from_str(line).map_err(|e| perr(idx + 1, e.to_string()))?;
            let c = l.covariance;
            if c[1] != c[2] || !(c[0] > 0.0 && c[3] > 0.0 && c[0] * c[3] - c[1] * c[2] > 0.0) {
                return Err(perr(idx + 1, "covariance must be symmetric positive definite".into()));
            }
            if l.sample_count < 2 {
                return Err(perr(idx + 1, "sample_count must be at least 2".into()));
            }
            profiles.push(ClassProfile2D {
                label: l.label,
                mean: l.mean,
                cov: [[c[0], c[1]], [c[2], c[3]]],
                sample_count: l.sample_count,
            });
        }
        ProfileSet::new(header.model, header.source, profiles)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LangError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LangError::Io {
            path: path.display().to_string(),
            source,
        })?;
        ProfileSet::parse(&text)
    }
}

fn labelled_features(records: &[ObservationRecord]) -> Result<Vec<(String, DerivedFeatures)>, LangError> {
    records
        .iter()
        .map(|r| {
            let label = r.label.clone().ok_or_else(|| LangError::MissingLabel(r.id.clone()))?;
            Ok((label, derive_features(r)?))
        })
        .collect()
}

fn group_by_label(labelled: &[(String, DerivedFeatures)]) -> Vec<(String, Vec<DerivedFeatures>)> {
    let mut groups: std::collections::BTreeMap<&str, Vec<DerivedFeatures>> = Default::default();
    for (label, f) in labelled {
        groups.entry(label).or_default().push(*f);
    }
    groups
        .into_iter()
        .map(|(l, f)| (l.to_owned(), f))
        .collect()
}

/// Fits a profile to records that must all carry the same label.
pub fn fit_profile(records: &[ObservationRecord], kind: CovarianceKind) -> Result<ClassProfile2D, LangError> {
    let labelled = labelled_features(records)?;
    let label = labelled.first().map(|(l, _)| l.clone()).unwrap_or_default();
    if let Some((other, _)) = labelled.iter().find(|(l, _)| *l != label) {
        return Err(LangError::MixedLabels(label, other.clone()));
    }
    let feats: Vec<_> = labelled.into_iter().map(|(_, f)| f).collect();
    ClassProfile2D::from_features(&label, &feats, kind)
}

/// How an attack batch is compared against the profiles.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Matcher {
    pub mask: FeatureMask,
    pub covariance: CovarianceKind,
}

impl Matcher {
    pub fn with_mask(mask: FeatureMask) -> Self {
        Matcher {
            mask,
            ..Matcher::default()
        }
    }
}

/// Label of the closest profile. Distance ties go to the smaller label.
pub fn predict_from_features(
    profiles: &ProfileSet,
    samples: &[DerivedFeatures],
    matcher: Matcher,
) -> Result<String, LangError> {
    if samples.is_empty() {
        return Err(LangError::EmptySamples);
    }
    let scores: Vec<f64> = if samples.len() == 1 {
        let x = samples[0].as_array();
        profiles
            .profiles
            .iter()
            .map(|p| neg_log_density(p, x, matcher.mask))
            .collect::<Result<_, _>>()?
    } else {
        // Sorting makes the fitted moments independent of arrival order.
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| {
            a.token_density
                .total_cmp(&b.token_density)
                .then(a.io_ratio.total_cmp(&b.io_ratio))
        });
        let observed = ClassProfile2D::from_features("", &sorted, matcher.covariance)?;
        profiles
            .profiles
            .iter()
            .map(|p| bhattacharyya_masked(&observed, p, matcher.mask))
            .collect::<Result<_, _>>()?
    };
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    Ok(profiles.profiles[best].label.clone())
}

pub fn predict_language(
    profiles: &ProfileSet,
    samples: &[ObservationRecord],
    matcher: Matcher,
) -> Result<String, LangError> {
    let feats = samples
        .iter()
        .map(derive_features)
        .collect::<Result<Vec<_>, _>>()?;
    predict_from_features(profiles, &feats, matcher)
}

/// Repeated attacks per test label. Each prediction draws its sample batch
/// from its own seeded stream, so results do not depend on scheduling.
pub fn evaluate_asr_features(
    profiles: &ProfileSet,
    test: &[(String, DerivedFeatures)],
    samples_per_prediction: usize,
    predictions_per_label: usize,
    matcher: Matcher,
    seed: u64,
) -> Result<AsrReport, LangError> {
    if samples_per_prediction == 0 {
        return Err(LangError::EmptySamples);
    }
    let groups = group_by_label(test);
    if groups.is_empty() {
        return Err(LangError::EmptyTestSet);
    }
    let jobs: Vec<(usize, usize)> = (0..groups.len())
        .flat_map(|g| (0..predictions_per_label).map(move |i| (g, i)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(g, i)| {
            let (label, pool) = &groups[g];
            let mut rng = rng_for(seed, &["asr", label, &i.to_string()]);
            let batch: Vec<DerivedFeatures> = if pool.len() >= samples_per_prediction {
                index::sample(&mut rng, pool.len(), samples_per_prediction)
                    .into_iter()
                    .map(|j| pool[j])
                    .collect()
            } else {
                (0..samples_per_prediction)
                    .map(|_| pool[rng.random_range(0..pool.len())])
                    .collect()
            };
            let predicted = predict_from_features(profiles, &batch, matcher)?;
            Ok((label.clone(), predicted))
        })
        .collect::<Result<Vec<_>, LangError>>()?;
    let labels: Vec<String> = groups.into_iter().map(|(l, _)| l).collect();
    Ok(AsrReport::from_predictions(&labels, &outcomes))
}

pub fn evaluate_asr(
    profiles: &ProfileSet,
    test: &[ObservationRecord],
    samples_per_prediction: usize,
    predictions_per_label: usize,
    matcher: Matcher,
    seed: u64,
) -> Result<AsrReport, LangError> {
    let labelled = labelled_features(test)?;
    evaluate_asr_features(profiles, &labelled, samples_per_prediction, predictions_per_label, matcher, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feat(d: f64, r: f64) -> DerivedFeatures {
        DerivedFeatures {
            token_density: d,
            io_ratio: r,
        }
    }

    fn gaussian(label: &str, mean: [f64; 2], var: [f64; 2]) -> ClassProfile2D {
        ClassProfile2D {
            label: label.into(),
            mean,
            cov: [[var[0], 0.0], [0.0, var[1]]],
            sample_count: 100,
        }
    }

    #[test]
    fn zero_variance_gets_minimum_ridge() {
        let p = ClassProfile2D::from_features("x", &[feat(2.0, 1.0); 5], CovarianceKind::Full).unwrap();
        assert_eq!(p.mean, [2.0, 1.0]);
        assert_eq!(p.cov, [[1e-9, 0.0], [0.0, 1e-9]]);
    }

    #[test]
    fn two_point_covariance() {
        let p = ClassProfile2D::from_features("x", &[feat(1.0, 1.0), feat(3.0, 3.0)], CovarianceKind::Full)
            .unwrap();
        assert_eq!(p.mean, [2.0, 2.0]);
        let eps = 2e-6;
        assert_eq!(p.cov, [[2.0 + eps, 2.0], [2.0, 2.0 + eps]]);
        let d = ClassProfile2D::from_features("x", &[feat(1.0, 1.0), feat(3.0, 3.0)], CovarianceKind::Diagonal)
            .unwrap();
        assert_eq!(d.cov[0][1], 0.0);
    }

    #[test]
    fn fit_errors() {
        let one = [ObservationRecord::with_counts("a", Some("fr"), 10, 10, 5)];
        assert!(matches!(fit_profile(&one, CovarianceKind::Full), Err(LangError::TooFewRecords { .. })));
        let mixed = [
            ObservationRecord::with_counts("a", Some("fr"), 10, 10, 5),
            ObservationRecord::with_counts("b", Some("de"), 10, 10, 5),
        ];
        assert!(matches!(fit_profile(&mixed, CovarianceKind::Full), Err(LangError::MixedLabels(..))));
    }

    #[test]
    fn identical_distributions_have_zero_distance() {
        let p = gaussian("a", [2.0, 1.0], [0.3, 0.2]);
        assert_eq!(bhattacharyya(&p, &p).unwrap(), 0.0);
        let mut full = p.clone();
        full.cov = [[0.3, 0.1], [0.1, 0.2]];
        assert_eq!(bhattacharyya(&full, &full).unwrap(), 0.0);
    }

    #[test]
    fn one_dimensional_reference_value() {
        // mu 0 vs 2, unit variances: (1/8) * 4 / 1 = 0.5.
        let p = gaussian("a", [0.0, 5.0], [1.0, 1.0]);
        let q = gaussian("b", [2.0, 5.0], [1.0, 1.0]);
        assert!((bhattacharyya_masked(&p, &q, FeatureMask::Density).unwrap() - 0.5).abs() < 1e-15);
        assert!((bhattacharyya(&p, &q).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(bhattacharyya_masked(&p, &q, FeatureMask::Ratio).unwrap(), 0.0);
    }

    #[test]
    fn distance_is_symmetric() {
        let p = ClassProfile2D {
            label: "a".into(),
            mean: [1.0, 2.0],
            cov: [[0.5, 0.2], [0.2, 0.4]],
            sample_count: 3,
        };
        let q = ClassProfile2D {
            label: "b".into(),
            mean: [1.7, 1.1],
            cov: [[0.9, -0.3], [-0.3, 0.6]],
            sample_count: 3,
        };
        assert_eq!(bhattacharyya(&p, &q).unwrap(), bhattacharyya(&q, &p).unwrap());
        assert!(bhattacharyya(&p, &q).unwrap() > 0.0);
    }

    #[test]
    fn prediction_ties_go_to_smaller_label() {
        let set = ProfileSet::new(
            "m",
            "en",
            vec![gaussian("zz", [2.0, 1.0], [0.1, 0.1]), gaussian("aa", [2.0, 1.0], [0.1, 0.1])],
        )
        .unwrap();
        let got = predict_from_features(&set, &[feat(2.0, 1.0), feat(2.1, 1.1)], Matcher::default()).unwrap();
        assert_eq!(got, "aa");
        let got = predict_from_features(&set, &[feat(2.0, 1.0)], Matcher::default()).unwrap();
        assert_eq!(got, "aa");
    }

    #[test]
    fn single_sample_uses_log_density() {
        let set = ProfileSet::new(
            "m",
            "en",
            vec![gaussian("a", [2.0, 1.0], [0.01, 0.01]), gaussian("b", [8.0, 3.0], [0.01, 0.01])],
        )
        .unwrap();
        let got = predict_from_features(&set, &[feat(7.9, 3.05)], Matcher::default()).unwrap();
        assert_eq!(got, "b");
        assert!(matches!(
            predict_from_features(&set, &[], Matcher::default()),
            Err(LangError::EmptySamples)
        ));
    }

    #[test]
    fn profile_set_validation_and_file_round_trip() {
        assert!(matches!(
            ProfileSet::new("m", "en", vec![gaussian("a", [1.0, 1.0], [1.0, 1.0])]),
            Err(LangError::TooFewProfiles(1))
        ));
        assert!(matches!(
            ProfileSet::new("m", "en", vec![gaussian("a", [1.0, 1.0], [1.0, 1.0]); 2]),
            Err(LangError::DuplicateLabel(_))
        ));
        let mut b = gaussian("b", [3.5, 0.25], [0.1, 0.3]);
        b.cov = [[0.1, 0.05], [0.05, 0.3]];
        let set = ProfileSet::new("tower", "en", vec![b, gaussian("a", [1.0, 1.0], [1.0, 1.0])]).unwrap();
        let text = set.to_file_string();
        assert!(text.starts_with("{\"format\":\"tokenleak-profile2d/1\""));
        assert_eq!(ProfileSet::parse(&text).unwrap(), set);
    }

    #[test]
    fn asr_table_counts_never_predicted_as_zero() {
        let labels = vec!["a".to_string(), "b".to_string()];
        let outcomes = vec![("a".into(), "a".into()), ("b".into(), "a".into())];
        let r = AsrReport::from_predictions(&labels, &outcomes);
        assert_eq!(r.precision_of("a"), Some(0.5));
        assert_eq!(r.precision_of("b"), None);
        assert_eq!(r.average, 0.25);
    }
}
