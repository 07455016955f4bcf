use proptest::prelude::*;

use tokenleak::class::{evaluate_class_asr, fit_threshold, synth_class_trace};
use tokenleak::defense::{fixed_length_transform, pad_trace, penalty_report, uniform_tokenizer_model, PadRule};
use tokenleak::experiment::score_padding;
use tokenleak::lang::{evaluate_asr, FeatureMask, Matcher, ProfileSet};
use tokenleak::planted;
use tokenleak::servesim::{schedule, simulate_batch, TimingModel};
use tokenleak::tokenizer::{synth_all, DensityModel, InputLengthSampler};
use tokenleak::{Mode, ObservationRecord, Trace};

fn timed(model: &TimingModel, mut records: Vec<ObservationRecord>) -> Vec<ObservationRecord> {
    schedule(&mut records, 0.0, 10.0);
    simulate_batch(model, &Trace::new(Mode::NonStreaming, records)).unwrap().records
}

fn lang_attack(n: usize) -> impl Fn(&ProfileSet, &[ObservationRecord]) -> Result<f64, tokenleak::experiment::ScenarioError> {
    move |p, t| Ok(evaluate_asr(p, t, n, 200, Matcher::default(), 5).unwrap().average)
}

fn pad_benchmark(model: &DensityModel, lengths: &InputLengthSampler, rule: PadRule) -> tokenleak::defense::DefenseReport {
    let timing = TimingModel::local_machine(1);
    let profiling = synth_all(model, 400, lengths, 1).unwrap();
    let test = timed(&timing, synth_all(model, 400, lengths, 2).unwrap());
    score_padding("pad", &profiling, &test, rule, &timing, lang_attack(50)).unwrap().0
}

fn record_strategy() -> impl Strategy<Value = Vec<ObservationRecord>> {
    prop::collection::vec((20u64..500, 1u64..300, 1u64..200), 1..25).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (input, bytes, tokens))| ObservationRecord::with_counts(format!("r{i}"), Some("x"), input, bytes, tokens))
            .collect()
    })
}

fn rule_strategy() -> impl Strategy<Value = PadRule> {
    prop_oneof![
        (0.0f64..0.5).prop_map(|tolerance| PadRule::InputConditioned { tolerance }),
        Just(PadRule::GlobalMax),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn padding_never_shrinks_anything(trace in record_strategy(), reference in record_strategy(), rule in rule_strategy()) {
        let model = TimingModel::local_machine(9);
        let trace = timed(&model, trace);
        let padded = pad_trace(&trace, &reference, rule, Some(&model)).unwrap();
        prop_assert_eq!(padded.len(), trace.len());
        for (a, b) in trace.iter().zip(&padded) {
            prop_assert_eq!(&a.id, &b.id);
            prop_assert!(b.output_tokens >= a.output_tokens);
            prop_assert!(b.output_bytes >= a.output_bytes);
            prop_assert!(b.duration().unwrap() >= a.duration().unwrap());
            prop_assert_eq!(b.t_send, a.t_send);
        }
    }

    #[test]
    fn zero_penalty_iff_identity(trace in record_strategy(), reference in record_strategy(), rule in rule_strategy()) {
        let model = TimingModel::ideal(0.05, 0.02, 0.01);
        let trace = timed(&model, trace);
        let padded = pad_trace(&trace, &reference, rule, Some(&model)).unwrap();
        let pen = penalty_report(&trace, &padded).unwrap();
        let zero = pen.byte_padding == 0.0 && pen.latency_penalty == Some(0.0);
        prop_assert_eq!(zero, padded == trace);
    }
}

#[test]
fn padding_against_itself_with_global_max_equalizes() {
    let trace: Vec<ObservationRecord> = (0..10)
        .map(|i| ObservationRecord::with_counts(format!("r{i}"), None, 100 + i, 50 + 3 * i, 10 + i))
        .collect();
    let padded = pad_trace(&trace, &trace, PadRule::GlobalMax, None).unwrap();
    assert!(padded.iter().all(|r| r.output_tokens == Some(19) && r.output_bytes == 77));
}

#[test]
fn identical_languages_pay_no_padding() {
    let timing = TimingModel::local_machine(2);
    let model = planted::uniform_density_model();
    let lengths = planted::fixed_input_lengths();
    let profiling = synth_all(&model, 100, &lengths, 3).unwrap();
    let test = timed(&timing, synth_all(&model, 100, &lengths, 4).unwrap());
    let padded = pad_trace(&test, &profiling, PadRule::default(), Some(&timing)).unwrap();
    let pen = penalty_report(&test, &padded).unwrap();
    assert!(pen.byte_padding.abs() < 1e-12 && pen.latency_penalty.unwrap().abs() < 1e-12, "{pen:?}");
}

#[test]
fn padding_does_not_help_the_attacker() {
    for (model, lengths) in [
        (planted::translation_benchmark(), planted::translation_input_lengths()),
        (planted::double_token_model(), planted::fixed_input_lengths()),
    ] {
        let k = model.languages().len() as f64;
        for rule in [PadRule::default(), PadRule::GlobalMax] {
            let r = pad_benchmark(&model, &lengths, rule);
            assert!(r.post_asr <= r.pre_asr + 0.03, "{r:?}");
            assert!(r.post_asr <= 1.0 / k + 0.05, "{r:?}");
            assert!(r.byte_padding.unwrap() >= 0.0 && r.latency_penalty.unwrap() >= 0.0);
        }
    }
}

#[test]
fn uniform_tokenizer_removes_only_the_density_channel() {
    let model = planted::translation_benchmark();
    let uniform = uniform_tokenizer_model(&model).unwrap();
    let lengths = planted::translation_input_lengths();
    let profiles =
        ProfileSet::fit("m", "en", &synth_all(&uniform, 1000, &lengths, 6).unwrap(), Default::default()).unwrap();
    let test = synth_all(&uniform, 1000, &lengths, 7).unwrap();
    let asr = |mask| evaluate_asr(&profiles, &test, 50, 200, Matcher::with_mask(mask), 8).unwrap().average;
    let k = model.languages().len() as f64;
    let density = asr(FeatureMask::Density);
    let both = asr(FeatureMask::Both);
    assert!((density - 1.0 / k).abs() <= 0.08, "density-only {density}");
    assert!(both > 1.0 / k + 0.2, "combined {both}");
}

#[test]
fn fixed_length_compliance_flattens_the_gap() {
    for spec in planted::classification_tasks() {
        let asr = |c: f64| {
            let s = fixed_length_transform(&spec, 60.0, c).unwrap();
            let train = synth_class_trace(&s, 200, 1).unwrap();
            let test = synth_class_trace(&s, 500, 2).unwrap();
            evaluate_class_asr(&fit_threshold(&s.task, &train, 0.5).unwrap(), &test).unwrap().average
        };
        let none = asr(0.0);
        let half = asr(0.5);
        let full = asr(1.0);
        assert!((full - 0.5).abs() <= 0.05, "{}: full {full}", spec.task);
        assert!(full < half && half < none, "{}: {none} {half} {full}", spec.task);
    }
}
