//! Shipped planted distributions used by the scenarios and benchmarks.

use crate::class::{ClassLengthSpec, ClassTaskSpec};
use crate::tokenizer::{DensityModel, InputLengthSampler, LanguageDensity};

/// Five target languages. The CJK pair is well separated from the rest and
/// the three Romance languages overlap heavily.
pub fn translation_benchmark() -> DensityModel {
    DensityModel::new(vec![
        LanguageDensity::new("es", (3.10, 0.60), (1.10, 0.22), 0.25),
        LanguageDensity::new("fr", (3.25, 0.60), (1.18, 0.22), 0.25),
        LanguageDensity::new("pt", (3.00, 0.60), (1.05, 0.22), 0.25),
        LanguageDensity::new("ko", (1.80, 0.45), (0.95, 0.22), 0.10),
        LanguageDensity::new("zh", (1.50, 0.40), (0.80, 0.20), 0.10),
    ])
    .expect("valid planted model")
}

pub fn translation_input_lengths() -> InputLengthSampler {
    InputLengthSampler::Uniform { min: 60, max: 400 }
}

/// Four languages sharing one deterministic distribution and a fifth that
/// needs twice as many tokens and a quarter more bytes for the same text.
pub fn double_token_model() -> DensityModel {
    let same = |l: &str| LanguageDensity::new(l, (3.0, 0.0), (1.2, 0.0), 0.0);
    DensityModel::new(vec![
        same("de"),
        same("es"),
        same("fr"),
        same("it"),
        LanguageDensity::new("ko", (1.875, 0.0), (1.5, 0.0), 0.0),
    ])
    .expect("valid planted model")
}

/// Every language identical, so padding has nothing to hide.
pub fn uniform_density_model() -> DensityModel {
    let same = |l: &str| LanguageDensity::new(l, (3.0, 0.0), (1.2, 0.0), 0.0);
    DensityModel::new(vec![same("de"), same("es"), same("fr")]).expect("valid planted model")
}

/// Input length used with the deterministic planted models.
pub fn fixed_input_lengths() -> InputLengthSampler {
    InputLengthSampler::Fixed { bytes: 300 }
}

fn task(name: &str, labels: [&str; 2], base: [f64; 2], slope: f64, sd: f64) -> ClassTaskSpec {
    let class = |i: usize| ClassLengthSpec {
        label: labels[i].to_owned(),
        base_tokens: base[i],
        tokens_per_input_byte: slope,
        sd_tokens: sd,
    };
    ClassTaskSpec {
        task: name.to_owned(),
        classes: [class(0), class(1)],
        input_lengths: InputLengthSampler::Uniform { min: 80, max: 600 },
        bytes_per_token: 4.2,
        fixed_length: None,
    }
}

/// Two-class tasks whose explanation lengths differ by class.
pub fn classification_tasks() -> Vec<ClassTaskSpec> {
    vec![
        task("sentiment", ["negative", "positive"], [48.0, 58.0], 0.02, 10.0),
        task("spam", ["ham", "spam"], [40.0, 52.0], 0.01, 10.0),
        task("toxicity", ["clean", "toxic"], [55.0, 63.0], 0.03, 10.0),
        task("topic", ["sports", "world"], [60.0, 71.0], 0.0, 10.0),
    ]
}
