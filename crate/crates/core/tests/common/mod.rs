//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tokenleak::lang::ClassProfile2D;
use tokenleak::ObservationRecord;

pub fn diag_profile(label: &str, mean: [f64; 2], var: [f64; 2]) -> ClassProfile2D {
    ClassProfile2D {
        label: label.into(),
        mean,
        cov: [[var[0], 0.0], [0.0, var[1]]],
        sample_count: 100,
    }
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// `-ln ∫∫ sqrt(p q)` by the trapezoid rule on a 2-D grid wide enough to
/// hold both densities. No use is made of the closed form or of
/// separability.
pub fn bhattacharyya_quadrature(p: &ClassProfile2D, q: &ClassProfile2D, steps: usize) -> f64 {
    let axis = |d: usize| {
        let lo = (p.mean[d] - 12.0 * p.cov[d][d].sqrt()).min(q.mean[d] - 12.0 * q.cov[d][d].sqrt());
        let hi = (p.mean[d] + 12.0 * p.cov[d][d].sqrt()).max(q.mean[d] + 12.0 * q.cov[d][d].sqrt());
        let h = (hi - lo) / steps as f64;
        (0..=steps).map(move |i| lo + h * i as f64).collect::<Vec<f64>>()
    };
    let xs = axis(0);
    let ys = axis(1);
    let hx = xs[1] - xs[0];
    let hy = ys[1] - ys[0];
    let px: Vec<f64> = xs.iter().map(|&x| normal_pdf(x, p.mean[0], p.cov[0][0])).collect();
    let qx: Vec<f64> = xs.iter().map(|&x| normal_pdf(x, q.mean[0], q.cov[0][0])).collect();
    let py: Vec<f64> = ys.iter().map(|&y| normal_pdf(y, p.mean[1], p.cov[1][1])).collect();
    let qy: Vec<f64> = ys.iter().map(|&y| normal_pdf(y, q.mean[1], q.cov[1][1])).collect();
    let mut total = 0.0;
    for i in 0..xs.len() {
        let wx = if i == 0 || i == steps { 0.5 } else { 1.0 };
        for j in 0..ys.len() {
            let wy = if j == 0 || j == steps { 0.5 } else { 1.0 };
            total += wx * wy * ((px[i] * py[j]) * (qx[i] * qy[j])).sqrt();
        }
    }
    -(total * hx * hy).ln()
}

/// Random diagonal Gaussian pair with moderate separation.
pub fn random_diag_pair(rng: &mut ChaCha8Rng) -> (ClassProfile2D, ClassProfile2D) {
    let mut one = |label: &str| {
        diag_profile(
            label,
            [rng.random_range(0.0..5.0), rng.random_range(0.0..3.0)],
            [rng.random_range(0.05..4.0), rng.random_range(0.05..2.0)],
        )
    };
    (one("p"), one("q"))
}

fn objective(p1: f64, p2: f64, theta: f64) -> f64 {
    (p1 + p2) / 2.0 - theta * (p1 - p2).abs()
}

/// Best optimal-ASR objective over a fixed grid of slopes, trying every
/// cut between residuals and both assignments of labels to the
/// above-threshold side. `points` are `(input_bytes, tokens, is_second_label)`.
pub fn grid_optimal_asr(points: &[(f64, f64, bool)], alphas: &[f64], theta: f64) -> f64 {
    let prec = |hit: usize, miss: usize| {
        if hit + miss == 0 {
            0.0
        } else {
            hit as f64 / (hit + miss) as f64
        }
    };
    let mut best = f64::NEG_INFINITY;
    for &alpha in alphas {
        let mut r: Vec<(f64, bool)> = points.iter().map(|&(x, t, second)| (t - alpha * x, second)).collect();
        r.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total1 = r.iter().filter(|p| p.1).count();
        let total0 = r.len() - total1;
        let (mut below0, mut below1) = (0, 0);
        for i in 0..=r.len() {
            // Only cut between distinct residuals.
            if i == 0 || i == r.len() || r[i].0 > r[i - 1].0 {
                let (above0, above1) = (total0 - below0, total1 - below1);
                // Label 1 above the line.
                let a = objective(prec(below0, below1), prec(above1, above0), theta);
                // Label 0 above the line.
                let b = objective(prec(below1, below0), prec(above0, above1), theta);
                best = best.max(a).max(b);
            }
            if i < r.len() {
                if r[i].1 {
                    below1 += 1;
                } else {
                    below0 += 1;
                }
            }
        }
    }
    best
}

/// `tokens = slope * input + offset[class] + sd * z`, at least one token.
pub fn planted_class_records(
    seed: u64,
    per_class: usize,
    slope: f64,
    offsets: [f64; 2],
    sd: f64,
) -> Vec<ObservationRecord> {
    use rand_distr::StandardNormal;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (c, label) in ["a", "b"].iter().enumerate() {
        for i in 0..per_class {
            let input: u64 = rng.random_range(80..600);
            let z: f64 = rng.sample(StandardNormal);
            let tokens = (slope * input as f64 + offsets[c] + sd * z).round().max(1.0) as u64;
            out.push(ObservationRecord::with_counts(
                format!("{label}-{i}"),
                Some(label),
                input,
                tokens * 4,
                tokens,
            ));
        }
    }
    out
}

/// Sentences in a made-up language built from a fixed syllable inventory.
pub struct SyntheticLanguage {
    syllables: Vec<String>,
}

impl SyntheticLanguage {
    /// `alphabet` supplies the characters; syllables are 2–3 characters.
    pub fn new(alphabet: &[char], inventory: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let syllables = (0..inventory)
            .map(|_| {
                let len = rng.random_range(2..=3);
                (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
            })
            .collect();
        SyntheticLanguage { syllables }
    }

    pub fn sentence(&self, rng: &mut ChaCha8Rng) -> String {
        let words = rng.random_range(4..12);
        let mut s = String::new();
        for w in 0..words {
            if w > 0 {
                s.push(' ');
            }
            // Zipf-like skew so frequent syllables exist to be merged.
            for _ in 0..rng.random_range(1..=3) {
                let u: f64 = rng.random();
                let idx = ((u * u * u) * self.syllables.len() as f64) as usize;
                s.push_str(&self.syllables[idx.min(self.syllables.len() - 1)]);
            }
        }
        s.push('.');
        s
    }
}

pub fn latin() -> Vec<char> {
    "abcdefghijklmnoprstuvwy".chars().collect()
}

/// Roughly `total_bytes` of text, `majority_share` of it (by bytes) in `a`.
pub fn bilingual_corpus(
    a: &SyntheticLanguage,
    b: &SyntheticLanguage,
    total_bytes: usize,
    majority_share: f64,
    seed: u64,
) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (lang, budget) in [
        (a, (total_bytes as f64 * majority_share) as usize),
        (b, (total_bytes as f64 * (1.0 - majority_share)) as usize),
    ] {
        let mut used = 0;
        while used < budget {
            let s = lang.sentence(&mut rng);
            used += s.len();
            out.push(s);
        }
    }
    out
}

/// Mean bytes per token of `vocab` over the given texts.
pub fn bytes_per_token(vocab: &tokenleak::tokenizer::BpeVocab, texts: &[String]) -> f64 {
    let bytes: usize = texts.iter().map(String::len).sum();
    let tokens: usize = texts.iter().map(|t| vocab.count_tokens(t.as_bytes())).sum();
    bytes as f64 / tokens as f64
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
