use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::defense::PadRule;
use crate::lang::FeatureMask;
use crate::timing::Strategy;
use crate::tokenizer::InputLengthSampler;

use super::ScenarioError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    TranslationPlanted,
    ClassificationPlanted,
    TimingNetwork,
    TimingDrift,
    Defenses,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::TranslationPlanted,
        ScenarioKind::ClassificationPlanted,
        ScenarioKind::TimingNetwork,
        ScenarioKind::TimingDrift,
        ScenarioKind::Defenses,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::TranslationPlanted => "translation-planted",
            ScenarioKind::ClassificationPlanted => "classification-planted",
            ScenarioKind::TimingNetwork => "timing-network",
            ScenarioKind::TimingDrift => "timing-drift",
            ScenarioKind::Defenses => "defenses",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

/// Which defenses the `defenses` scenario evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefenseKind {
    Pad,
    FixedLength,
    UniformTokenizer,
}

impl DefenseKind {
    pub const ALL: [DefenseKind; 3] = [DefenseKind::Pad, DefenseKind::FixedLength, DefenseKind::UniformTokenizer];

    pub fn as_str(self) -> &'static str {
        match self {
            DefenseKind::Pad => "pad",
            DefenseKind::FixedLength => "fixed-length",
            DefenseKind::UniformTokenizer => "uniform-tokenizer",
        }
    }
}

impl FromStr for DefenseKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DefenseKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown defense `{s}` (pad|fixed-length|uniform-tokenizer)"))
    }
}

/// Input files, relative to the config file's directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub density_model: Option<PathBuf>,
    pub timing_model: Option<PathBuf>,
    pub class_tasks: Option<PathBuf>,
    /// Deterministic model for measuring padding cost.
    pub penalty_model: Option<PathBuf>,
    /// Where traces, profiles and the report are written, if anywhere.
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Knobs {
    /// Attack-phase sample counts per prediction.
    pub samples: Vec<usize>,
    pub predictions_per_label: usize,
    pub profiling_per_label: usize,
    pub test_per_label: usize,
    pub input_lengths: InputLengthSampler,
    pub feature: FeatureMask,
    pub theta: f64,
    pub class_profiling_per_class: usize,
    pub class_test_per_class: usize,
    pub bias_magnitude: f64,
    /// Restrict timing scenarios to one strategy.
    pub strategy: Option<Strategy>,
    pub through_origin: bool,
    /// Token counts sent in each probe round.
    pub probe_tokens: Vec<u64>,
    pub pings: u64,
    /// Seconds between victim requests.
    pub victim_interval: f64,
    pub days: usize,
    /// Load multiplier per simulated day; missing days run at 1.
    pub day_load: Vec<f64>,
    pub defense: Option<DefenseKind>,
    pub pad_rule: PadRule,
    pub fixed_length_target: f64,
    pub compliance: Vec<f64>,
    /// Input length used with the penalty model.
    pub penalty_input_bytes: u64,
}

impl Default for Knobs {
    fn default() -> Self {
        Knobs {
            samples: vec![1, 10, 30, 50],
            predictions_per_label: 200,
            profiling_per_label: 1000,
            test_per_label: 1000,
            input_lengths: crate::planted::translation_input_lengths(),
            feature: FeatureMask::Both,
            theta: crate::class::DEFAULT_THETA,
            class_profiling_per_class: 200,
            class_test_per_class: 500,
            bias_magnitude: 0.5,
            strategy: None,
            through_origin: false,
            probe_tokens: vec![20, 60, 100, 140, 180],
            pings: 20,
            victim_interval: 10.0,
            days: 5,
            day_load: Vec::new(),
            defense: None,
            pad_rule: PadRule::default(),
            fixed_length_target: 60.0,
            compliance: vec![0.5, 1.0],
            penalty_input_bytes: 300,
        }
    }
}

impl Knobs {
    pub fn max_samples(&self) -> usize {
        self.samples.iter().copied().max().unwrap_or(1)
    }
}

/// One experiment run, read from a TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub knobs: Knobs,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, ScenarioError> {
        let mut config: ExperimentConfig =
            toml::from_str(text).map_err(|e| ScenarioError::new("config", e.to_string()))?;
        config.base_dir = base_dir.into();
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::new("config", format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        ExperimentConfig::parse(&text, base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// The resolved path of a required input, checked to exist.
    pub fn input(&self, stage: &str, name: &str, p: Option<&PathBuf>) -> Result<PathBuf, ScenarioError> {
        let p = p.ok_or_else(|| ScenarioError::new(stage, format!("config has no `paths.{name}`")))?;
        let full = self.resolve(p);
        if !full.exists() {
            return Err(ScenarioError::new(
                stage,
                format!("{name} `{}` does not exist", full.display()),
            ));
        }
        Ok(full)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let k = &self.knobs;
        let bad = |m: &str| Err(ScenarioError::new("config", m.to_owned()));
        if k.samples.is_empty() || k.samples.contains(&0) {
            return bad("knobs.samples must be non-empty and positive");
        }
        if k.predictions_per_label == 0 || k.profiling_per_label < 2 || k.test_per_label == 0 {
            return bad("per-label counts must be positive (profiling needs at least 2)");
        }
        if k.class_profiling_per_class == 0 || k.class_test_per_class == 0 {
            return bad("per-class counts must be positive");
        }
        if k.probe_tokens.len() < 2 {
            return bad("knobs.probe_tokens needs at least two probe lengths");
        }
        if !(k.victim_interval > 0.0 && k.victim_interval.is_finite()) {
            return bad("knobs.victim_interval must be positive");
        }
        if k.input_lengths.validate().is_err() || k.penalty_input_bytes == 0 {
            return bad("input lengths must be positive");
        }
        if k.days == 0 {
            return bad("knobs.days must be positive");
        }
        if k.compliance.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return bad("knobs.compliance values must lie in [0, 1]");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ExperimentConfig::parse("seed = 3\nscenario = \"timing-drift\"\n", "/cfg").unwrap();
        assert_eq!(c.scenario, ScenarioKind::TimingDrift);
        assert_eq!(c.knobs, Knobs::default());
        assert_eq!(c.resolve(Path::new("m.json")), PathBuf::from("/cfg/m.json"));
        assert_eq!(c.resolve(Path::new("/abs/m.json")), PathBuf::from("/abs/m.json"));
    }

    #[test]
    fn seed_is_required() {
        let e = ExperimentConfig::parse("scenario = \"defenses\"\n", ".").unwrap_err();
        assert_eq!(e.stage, "config");
        assert!(e.to_string().contains("seed"), "{e}");
    }

    #[test]
    fn unknown_keys_and_bad_knobs() {
        assert!(ExperimentConfig::parse("seed = 1\nscenario = \"defenses\"\nbogus = 2\n", ".").is_err());
        assert!(ExperimentConfig::parse("seed = 1\nscenario = \"nope\"\n", ".").is_err());
        let e = ExperimentConfig::parse("seed = 1\nscenario = \"defenses\"\n[knobs]\nsamples = []\n", ".").unwrap_err();
        assert!(e.to_string().contains("samples"));
    }

    #[test]
    fn knobs_parse() {
        let text = r#"
seed = 9
scenario = "translation-planted"
[paths]
density_model = "models/k5.jsonl"
[knobs]
samples = [1, 5]
feature = "density"
strategy = "concurrent"
pad_rule = { kind = "global-max" }
defense = "uniform-tokenizer"
"#;
        let c = ExperimentConfig::parse(text, ".").unwrap();
        assert_eq!(c.knobs.samples, vec![1, 5]);
        assert_eq!(c.knobs.feature, FeatureMask::Density);
        assert_eq!(c.knobs.strategy, Some(Strategy::Concurrent));
        assert_eq!(c.knobs.pad_rule, PadRule::GlobalMax);
        assert_eq!(c.knobs.defense, Some(DefenseKind::UniformTokenizer));
        assert_eq!(c.paths.density_model, Some(PathBuf::from("models/k5.jsonl")));
    }

    #[test]
    fn missing_input_names_stage() {
        let c = ExperimentConfig::parse("seed = 1\nscenario = \"defenses\"\n[paths]\ndensity_model = \"nope.jsonl\"\n", "/nonexistent").unwrap();
        let e = c.input("synthesize", "density_model", c.paths.density_model.as_ref()).unwrap_err();
        assert_eq!(e.stage, "synthesize");
        assert!(e.to_string().contains("nope.jsonl"));
    }
}
