use std::fmt::Display;
use std::path::PathBuf;

use crate::class::{
    bias_transform, evaluate_class_asr, fit_threshold, synth_class_trace, BiasShift, ClassTaskSpec,
    ThresholdProfile,
};
use crate::defense::{
    fixed_length_transform, pad_trace, penalty_report, uniform_tokenizer_model, DefenseReport, PadRule,
};
use crate::lang::{evaluate_asr, CovarianceKind, FeatureMask, Matcher, ProfileSet};
use crate::metrics::AsrReport;
use crate::seed::derive_seed;
use crate::servesim::{pings, schedule, simulate_batch, LoadProfile, TimingModel};
use crate::stats::mean;
use crate::timing::{
    build_profile, duration_token_pearson, pearson, with_estimated_tokens, NetworkProfile, ProfileOptions,
    Strategy, PROBE_INTERVAL,
};
use crate::tokenizer::{synth_all, DensityModel, InputLengthSampler};
use crate::trace::{Mode, ObservationRecord, Timestamp, Trace};

use super::config::{DefenseKind, ExperimentConfig, Knobs, ScenarioKind};
use super::report::{report_render, PearsonRow, PrecisionTable, ReportBundle, Row, Series, Table};
use super::ScenarioError;

const DAY: f64 = 86_400.0;
/// Victims start this long after the first probe round of their day.
const VICTIM_OFFSET: f64 = 300.0;

fn at<E: Display>(stage: &str) -> impl Fn(E) -> ScenarioError + '_ {
    move |e| ScenarioError::new(stage, e.to_string())
}

/// Writes artifacts under the configured output directory, if any.
struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    fn put(&self, stage: &str, name: &str, content: &str) -> Result<(), ScenarioError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(at(stage))?;
        }
        std::fs::write(&path, content).map_err(|e| ScenarioError::new(stage, format!("{}: {e}", path.display())))
    }

    fn trace(&self, stage: &str, name: &str, records: &[ObservationRecord]) -> Result<(), ScenarioError> {
        if self.dir.is_none() {
            return Ok(());
        }
        self.put(stage, name, &Trace::new(Mode::NonStreaming, records.to_vec()).to_canonical_string())
    }
}

struct Run<'a> {
    config: &'a ExperimentConfig,
    sink: Sink,
    bundle: ReportBundle,
}

impl Run<'_> {
    fn knobs(&self) -> &Knobs {
        &self.config.knobs
    }

    fn seed(&self, path: &[&str]) -> u64 {
        derive_seed(self.config.seed, path)
    }

    fn density_model(&self, stage: &str) -> Result<DensityModel, ScenarioError> {
        let p = self.config.input(stage, "density_model", self.config.paths.density_model.as_ref())?;
        DensityModel::load(p).map_err(at(stage))
    }

    /// The configured timing model, reseeded from the run seed.
    fn timing_model(&self, stage: &str) -> Result<TimingModel, ScenarioError> {
        let p = self.config.input(stage, "timing_model", self.config.paths.timing_model.as_ref())?;
        let mut m = TimingModel::load(p).map_err(at(stage))?;
        m.seed = self.seed(&["serve"]);
        Ok(m)
    }

    fn class_tasks(&self, stage: &str) -> Result<Vec<ClassTaskSpec>, ScenarioError> {
        let p = self.config.input(stage, "class_tasks", self.config.paths.class_tasks.as_ref())?;
        let tasks = ClassTaskSpec::load_all(p).map_err(at(stage))?;
        if tasks.is_empty() {
            return Err(ScenarioError::new(stage, "class task file is empty".into()));
        }
        Ok(tasks)
    }

    /// Labelled profiling and test traces drawn from a density model.
    fn lang_traces(
        &self,
        model: &DensityModel,
        input_lengths: &InputLengthSampler,
        tag: &str,
    ) -> Result<(Vec<ObservationRecord>, Vec<ObservationRecord>), ScenarioError> {
        let k = self.knobs();
        let profiling = synth_all(model, k.profiling_per_label, input_lengths, self.seed(&[tag, "profiling"]))
            .map_err(at("synthesize"))?;
        let test = synth_all(model, k.test_per_label, input_lengths, self.seed(&[tag, "test"]))
            .map_err(at("synthesize"))?;
        Ok((profiling, test))
    }

    fn lang_asr(
        &self,
        profiles: &ProfileSet,
        test: &[ObservationRecord],
        samples: usize,
        mask: FeatureMask,
        tag: &[&str],
    ) -> Result<AsrReport, ScenarioError> {
        let n = samples.to_string();
        let mut path = tag.to_vec();
        path.extend([mask.as_str(), n.as_str()]);
        evaluate_asr(
            profiles,
            test,
            samples,
            self.knobs().predictions_per_label,
            Matcher::with_mask(mask),
            self.seed(&path),
        )
        .map_err(at("attack"))
    }

    /// ASR for every configured sample count.
    fn sample_series(
        &mut self,
        name: &str,
        profiles: &ProfileSet,
        test: &[ObservationRecord],
        mask: FeatureMask,
        keep_tables: bool,
    ) -> Result<Series, ScenarioError> {
        let mut points = Vec::new();
        for &n in &self.knobs().samples.clone() {
            let report = self.lang_asr(profiles, test, n, mask, &["attack"])?;
            points.push((n as f64, report.average));
            if keep_tables {
                self.bundle.precision_tables.push(PrecisionTable {
                    name: format!("{name} n={n}"),
                    report,
                });
            }
        }
        Ok(Series {
            name: name.to_owned(),
            x_label: "samples".into(),
            points,
        })
    }
}

fn fit_profiles(stage: &str, records: &[ObservationRecord]) -> Result<ProfileSet, ScenarioError> {
    ProfileSet::fit("planted", "en", records, CovarianceKind::Full).map_err(at(stage))
}

/// Runs one configured scenario. Stage seeds are derived from the config
/// seed and the stage name, so the report is a pure function of the config.
pub fn run_scenario(config: &ExperimentConfig) -> Result<ReportBundle, ScenarioError> {
    let sink = Sink {
        dir: config.paths.output_dir.as_ref().map(|d| config.resolve(d)),
    };
    let mut run = Run {
        config,
        sink,
        bundle: ReportBundle::new(config.scenario.as_str(), config.seed),
    };
    match config.scenario {
        ScenarioKind::TranslationPlanted => translation(&mut run)?,
        ScenarioKind::ClassificationPlanted => classification(&mut run)?,
        ScenarioKind::TimingNetwork => timing_network(&mut run)?,
        ScenarioKind::TimingDrift => timing_drift(&mut run)?,
        ScenarioKind::Defenses => defenses(&mut run)?,
    }
    let (text, json) = report_render(&run.bundle)?;
    run.sink.put("report", "report.txt", &text)?;
    run.sink.put("report", "report.json", &json)?;
    Ok(run.bundle)
}

fn translation(run: &mut Run) -> Result<(), ScenarioError> {
    let model = run.density_model("synthesize")?;
    let sampler = run.knobs().input_lengths.clone();
    let (profiling, test) = run.lang_traces(&model, &sampler, "translation")?;
    run.sink.trace("synthesize", "traces/profiling.jsonl", &profiling)?;
    run.sink.trace("synthesize", "traces/test.jsonl", &test)?;

    let profiles = fit_profiles("profile", &profiling)?;
    run.sink.put("profile", "profiles/languages.profile", &profiles.to_file_string())?;

    let feature = run.knobs().feature;
    let mut ablation = Table {
        title: "feature ablation".into(),
        columns: run.knobs().samples.iter().map(|n| format!("n={n}")).collect(),
        rows: Vec::new(),
    };
    for mask in [FeatureMask::Both, FeatureMask::Density, FeatureMask::Ratio] {
        let name = format!("asr-vs-samples/{mask}");
        let series = run.sample_series(&name, &profiles, &test, mask, mask == feature)?;
        ablation.rows.push(Row {
            label: mask.to_string(),
            values: series.points.iter().map(|p| Some(p.1)).collect(),
        });
        run.bundle.series.push(series);
    }
    run.bundle.tables.push(ablation);
    Ok(())
}

fn classification(run: &mut Run) -> Result<(), ScenarioError> {
    let tasks = run.class_tasks("synthesize")?;
    let k = run.knobs().clone();
    let biases = [BiasShift::Augmenting, BiasShift::Unbiased, BiasShift::Diminishing];
    let mut table = Table {
        title: "class asr by bias".into(),
        columns: biases.iter().map(|b| b.as_str().to_owned()).collect(),
        rows: Vec::new(),
    };
    let mut sums = [0.0; 3];
    for spec in &tasks {
        let mut values = Vec::new();
        for (i, &bias) in biases.iter().enumerate() {
            let shifted = bias_transform(spec, bias, k.bias_magnitude).map_err(at("synthesize"))?;
            let tag = ["class", spec.task.as_str(), bias.as_str()];
            let profiling = synth_class_trace(&shifted, k.class_profiling_per_class, run.seed(&[&tag[..], &["profiling"]].concat()))
                .map_err(at("synthesize"))?;
            let test = synth_class_trace(&shifted, k.class_test_per_class, run.seed(&[&tag[..], &["test"]].concat()))
                .map_err(at("synthesize"))?;
            let profile = fit_threshold(&spec.task, &profiling, k.theta).map_err(at("profile"))?;
            let report = evaluate_class_asr(&profile, &test).map_err(at("attack"))?;
            let stem = format!("{}/{}", spec.task, bias.as_str());
            run.sink.trace("synthesize", &format!("traces/{stem}-profiling.jsonl"), &profiling)?;
            run.sink.trace("synthesize", &format!("traces/{stem}-test.jsonl"), &test)?;
            run.sink.put("profile", &format!("profiles/{stem}.threshold"), &profile.to_file_string())?;
            sums[i] += report.average;
            values.push(Some(report.average));
            if bias == BiasShift::Unbiased {
                run.bundle.precision_tables.push(PrecisionTable {
                    name: format!("precision/{}", spec.task),
                    report,
                });
            }
        }
        table.rows.push(Row {
            label: spec.task.clone(),
            values,
        });
    }
    table.rows.push(Row {
        label: "average".into(),
        values: sums.iter().map(|s| Some(s / tasks.len() as f64)).collect(),
    });
    run.bundle.tables.push(table);
    Ok(())
}

/// Probe rounds, one per `PROBE_INTERVAL`, covering `[start, end)`.
fn probe_rounds(k: &Knobs, start: f64, end: f64, tag: &str) -> Vec<Vec<ObservationRecord>> {
    let spacing = PROBE_INTERVAL / k.probe_tokens.len() as f64;
    let rounds = ((end - start) / PROBE_INTERVAL).ceil().max(1.0) as usize;
    (0..rounds)
        .map(|r| {
            k.probe_tokens
                .iter()
                .enumerate()
                .map(|(j, &tokens)| {
                    let mut p = ObservationRecord::with_counts(
                        format!("probe-{tag}-{r:05}-{j}"),
                        Some("probe"),
                        64,
                        tokens * 4,
                        tokens,
                    );
                    p.t_send = Timestamp::from_secs_f64(start + r as f64 * PROBE_INTERVAL + j as f64 * spacing);
                    p
                })
                .collect()
        })
        .collect()
}

fn simulate_records(model: &TimingModel, records: Vec<ObservationRecord>) -> Result<Vec<ObservationRecord>, ScenarioError> {
    Ok(simulate_batch(model, &Trace::new(Mode::NonStreaming, records))
        .map_err(at("simulate"))?
        .records)
}

fn simulate_rounds(
    model: &TimingModel,
    rounds: Vec<Vec<ObservationRecord>>,
) -> Result<Vec<Vec<ObservationRecord>>, ScenarioError> {
    let sizes: Vec<usize> = rounds.iter().map(Vec::len).collect();
    let mut flat = simulate_records(model, rounds.into_iter().flatten().collect())?.into_iter();
    Ok(sizes.into_iter().map(|n| flat.by_ref().take(n).collect()).collect())
}

fn strategies(k: &Knobs) -> Vec<Strategy> {
    match k.strategy {
        Some(s) => vec![s],
        None => Strategy::ALL.to_vec(),
    }
}

/// The probe history a strategy is allowed to use.
fn profile_for(
    strategy: Strategy,
    rounds: &[Vec<ObservationRecord>],
    ping_rtts: &[f64],
    now: f64,
    k: &Knobs,
) -> Result<NetworkProfile, ScenarioError> {
    let sets = match strategy {
        Strategy::Naive => &rounds[..1],
        _ => rounds,
    };
    let opts = ProfileOptions {
        through_origin: k.through_origin,
    };
    build_profile(strategy, sets, ping_rtts, now, opts).map_err(at("profile-network"))
}

fn token_diagnostics(
    name: &str,
    truth: &[ObservationRecord],
    estimated: &[ObservationRecord],
    clamped: usize,
) -> Result<PearsonRow, ScenarioError> {
    let t: Vec<f64> = truth.iter().map(|r| r.output_tokens.unwrap_or(0) as f64).collect();
    let e: Vec<f64> = estimated.iter().map(|r| r.output_tokens.unwrap_or(0) as f64).collect();
    let errors: Vec<f64> = t.iter().zip(&e).map(|(a, b)| (a - b).abs()).collect();
    Ok(PearsonRow {
        name: name.to_owned(),
        duration_tokens: duration_token_pearson(truth).map_err(at("estimate"))?,
        estimate_tokens: pearson(&e, &t).map_err(at("estimate"))?,
        mean_abs_token_error: mean(&errors),
        clamped,
    })
}

fn timing_network(run: &mut Run) -> Result<(), ScenarioError> {
    let model = run.density_model("synthesize")?;
    let timing = run.timing_model("simulate")?;
    let k = run.knobs().clone();
    let (profiling, mut test) = run.lang_traces(&model, &k.input_lengths, "timing")?;

    schedule(&mut test, VICTIM_OFFSET, k.victim_interval);
    let end = VICTIM_OFFSET + k.victim_interval * test.len() as f64;
    let test = simulate_records(&timing, test)?;
    let rounds = simulate_rounds(&timing, probe_rounds(&k, 0.0, end, "net"))?;
    let ping_rtts = pings(&timing, k.pings);
    run.sink.trace("simulate", "traces/test-timed.jsonl", &test)?;
    run.sink.trace("simulate", "traces/probes.jsonl", &rounds.concat())?;

    let profiles = fit_profiles("profile", &profiling)?;
    run.sink.put("profile", "profiles/languages.profile", &profiles.to_file_string())?;
    let truth = run.sample_series("asr-vs-samples/true", &profiles, &test, k.feature, false)?;
    run.bundle.series.push(truth);

    for strategy in strategies(&k) {
        let profile = profile_for(strategy, &rounds, &ping_rtts, end, &k)?;
        let (estimated, clamped) = with_estimated_tokens(&profile, &test).map_err(at("estimate"))?;
        let row = token_diagnostics(strategy.as_str(), &test, &estimated, clamped)?;
        run.bundle.pearson.push(row);
        let series = run.sample_series(&format!("asr-vs-samples/{strategy}"), &profiles, &estimated, k.feature, false)?;
        run.bundle.series.push(series);
    }
    Ok(())
}

fn timing_drift(run: &mut Run) -> Result<(), ScenarioError> {
    let tasks = run.class_tasks("synthesize")?;
    let mut timing = run.timing_model("simulate")?;
    let k = run.knobs().clone();
    if !k.day_load.is_empty() {
        timing.load_profile = LoadProfile::Piecewise(
            k.day_load.iter().enumerate().map(|(d, &m)| (d as f64 * DAY, m)).collect(),
        );
        timing.validate().map_err(at("simulate"))?;
    }

    // The attacker profiles each task offline with true token counts.
    let mut profiles: Vec<ThresholdProfile> = Vec::new();
    for spec in &tasks {
        let profiling = synth_class_trace(spec, k.class_profiling_per_class, run.seed(&["drift", &spec.task, "profiling"]))
            .map_err(at("synthesize"))?;
        let p = fit_threshold(&spec.task, &profiling, k.theta).map_err(at("profile"))?;
        run.sink.put("profile", &format!("profiles/{}.threshold", spec.task), &p.to_file_string())?;
        profiles.push(p);
    }

    let names: Vec<&str> = std::iter::once("true").chain(strategies(&k).iter().map(|s| s.as_str())).collect();
    let mut curves: Vec<Vec<(f64, f64)>> = vec![Vec::new(); names.len()];
    let mut history: Vec<Vec<ObservationRecord>> = Vec::new();
    for day in 0..k.days {
        let day_tag = format!("day{}", day + 1);
        let start = day as f64 * DAY;
        let mut victims = Vec::new();
        for spec in &tasks {
            let mut recs = synth_class_trace(spec, k.class_test_per_class, run.seed(&["drift", &spec.task, &day_tag]))
                .map_err(at("synthesize"))?;
            for r in &mut recs {
                r.id = format!("{day_tag}-{}", r.id);
            }
            victims.push(recs);
        }
        let total: usize = victims.iter().map(Vec::len).sum();
        let mut flat: Vec<ObservationRecord> = victims.concat();
        schedule(&mut flat, start + VICTIM_OFFSET, k.victim_interval);
        let end = start + VICTIM_OFFSET + k.victim_interval * total as f64;
        let flat = simulate_records(&timing, flat)?;
        history.extend(simulate_rounds(&timing, probe_rounds(&k, start, end, &day_tag))?);
        let ping_rtts: Vec<f64> = (0..k.pings)
            .map(|i| crate::servesim::ping(&timing, day as u64 * k.pings + i))
            .collect();
        run.sink.trace("simulate", &format!("traces/{day_tag}-victims.jsonl"), &flat)?;

        let mut per_strategy: Vec<Vec<ObservationRecord>> = vec![flat.clone()];
        for strategy in strategies(&k) {
            let profile = profile_for(strategy, &history, &ping_rtts, end, &k)?;
            let (estimated, _) = with_estimated_tokens(&profile, &flat).map_err(at("estimate"))?;
            per_strategy.push(estimated);
        }
        for (curve, records) in curves.iter_mut().zip(&per_strategy) {
            let mut asrs = Vec::new();
            let mut offset = 0;
            for (profile, task_victims) in profiles.iter().zip(&victims) {
                let slice = &records[offset..offset + task_victims.len()];
                offset += task_victims.len();
                asrs.push(evaluate_class_asr(profile, slice).map_err(at("attack"))?.average);
            }
            curve.push(((day + 1) as f64, mean(&asrs)));
        }
    }

    let mut table = Table {
        title: "day asr".into(),
        columns: (1..=k.days).map(|d| format!("day{d}")).collect(),
        rows: Vec::new(),
    };
    for (name, points) in names.iter().zip(curves) {
        table.rows.push(Row {
            label: (*name).to_owned(),
            values: points.iter().map(|p| Some(p.1)).collect(),
        });
        run.bundle.series.push(Series {
            name: format!("day-asr/{name}"),
            x_label: "day".into(),
            points,
        });
    }
    run.bundle.tables.push(table);
    Ok(())
}

/// Lang-attack ASR before and after padding both the profiling and the
/// attack traces. The attack trace is timed so the latency cost is measured.
pub fn score_padding(
    name: &str,
    profiling: &[ObservationRecord],
    test_timed: &[ObservationRecord],
    rule: PadRule,
    timing: &TimingModel,
    attack: impl Fn(&ProfileSet, &[ObservationRecord]) -> Result<f64, ScenarioError>,
) -> Result<(DefenseReport, Vec<ObservationRecord>), ScenarioError> {
    let pre = attack(&fit_profiles("profile", profiling)?, test_timed)?;
    let padded_profiling = pad_trace(profiling, profiling, rule, None).map_err(at("defend"))?;
    let padded_test = pad_trace(test_timed, profiling, rule, Some(timing)).map_err(at("defend"))?;
    let post = attack(&fit_profiles("profile", &padded_profiling)?, &padded_test)?;
    let penalties = penalty_report(test_timed, &padded_test).map_err(at("defend"))?;
    Ok((
        DefenseReport {
            defense: name.to_owned(),
            pre_asr: pre,
            post_asr: post,
            latency_penalty: penalties.latency_penalty,
            byte_padding: Some(penalties.byte_padding),
        },
        padded_test,
    ))
}

fn defenses(run: &mut Run) -> Result<(), ScenarioError> {
    let k = run.knobs().clone();
    let chosen: Vec<DefenseKind> = match k.defense {
        Some(d) => vec![d],
        None => DefenseKind::ALL.to_vec(),
    };
    let n = k.max_samples();

    if chosen.contains(&DefenseKind::Pad) {
        let model = run.density_model("synthesize")?;
        let timing = run.timing_model("simulate")?;
        let (profiling, mut test) = run.lang_traces(&model, &k.input_lengths, "pad")?;
        schedule(&mut test, 0.0, k.victim_interval);
        let test = simulate_records(&timing, test)?;
        let mut rules = vec![(format!("pad/{}", rule_name(k.pad_rule)), k.pad_rule)];
        if k.pad_rule != PadRule::GlobalMax {
            rules.push(("pad/global-max".into(), PadRule::GlobalMax));
        }
        for (name, rule) in rules {
            let attack = |p: &ProfileSet, t: &[ObservationRecord]| {
                Ok(run.lang_asr(p, t, n, k.feature, &["pad", &name])?.average)
            };
            let (report, padded) = score_padding(&name, &profiling, &test, rule, &timing, attack)?;
            run.sink.trace("defend", &format!("traces/{}.jsonl", name.replace('/', "-")), &padded)?;
            run.bundle.defenses.push(report);
        }

        if let Some(p) = run.config.paths.penalty_model.clone() {
            let path = run.config.input("synthesize", "penalty_model", Some(&p))?;
            let cost_model = DensityModel::load(path).map_err(at("synthesize"))?;
            let fixed = InputLengthSampler::Fixed {
                bytes: k.penalty_input_bytes,
            };
            let (profiling, mut test) = run.lang_traces(&cost_model, &fixed, "pad-cost")?;
            schedule(&mut test, 0.0, k.victim_interval);
            let test = simulate_records(&timing, test)?;
            let attack = |p: &ProfileSet, t: &[ObservationRecord]| {
                Ok(run.lang_asr(p, t, n, k.feature, &["pad-cost"])?.average)
            };
            let (report, _) = score_padding("pad/penalty-model", &profiling, &test, k.pad_rule, &timing, attack)?;
            run.bundle.defenses.push(report);
        }
    }

    if chosen.contains(&DefenseKind::UniformTokenizer) {
        let model = run.density_model("synthesize")?;
        let uniform = uniform_tokenizer_model(&model).map_err(at("defend"))?;
        let (profiling, test) = run.lang_traces(&model, &k.input_lengths, "tokenizer")?;
        let (u_profiling, u_test) = run.lang_traces(&uniform, &k.input_lengths, "tokenizer")?;
        let before = fit_profiles("profile", &profiling)?;
        let after = fit_profiles("profile", &u_profiling)?;
        for mask in [FeatureMask::Density, FeatureMask::Both] {
            let pre = run.lang_asr(&before, &test, n, mask, &["tokenizer"])?.average;
            let post = run.lang_asr(&after, &u_test, n, mask, &["tokenizer"])?.average;
            run.bundle.defenses.push(DefenseReport {
                defense: format!("uniform-tokenizer/{mask}"),
                pre_asr: pre,
                post_asr: post,
                latency_penalty: None,
                byte_padding: None,
            });
        }
    }

    if chosen.contains(&DefenseKind::FixedLength) {
        let tasks = run.class_tasks("synthesize")?;
        let mut rows = Vec::new();
        for spec in &tasks {
            let class_asr = |s: &ClassTaskSpec, tag: &str| -> Result<f64, ScenarioError> {
                let profiling =
                    synth_class_trace(s, k.class_profiling_per_class, run.seed(&["fixed", &s.task, tag, "profiling"]))
                        .map_err(at("synthesize"))?;
                let test = synth_class_trace(s, k.class_test_per_class, run.seed(&["fixed", &s.task, tag, "test"]))
                    .map_err(at("synthesize"))?;
                let profile = fit_threshold(&s.task, &profiling, k.theta).map_err(at("profile"))?;
                Ok(evaluate_class_asr(&profile, &test).map_err(at("attack"))?.average)
            };
            let pre = class_asr(spec, "none")?;
            for &c in &k.compliance {
                let defended = fixed_length_transform(spec, k.fixed_length_target, c).map_err(at("defend"))?;
                let post = class_asr(&defended, &format!("c={c}"))?;
                rows.push(DefenseReport {
                    defense: format!("fixed-length/{}/c={c}", spec.task),
                    pre_asr: pre,
                    post_asr: post,
                    latency_penalty: None,
                    byte_padding: None,
                });
            }
        }
        run.bundle.defenses.extend(rows);
    }
    Ok(())
}

fn rule_name(rule: PadRule) -> &'static str {
    match rule {
        PadRule::InputConditioned { .. } => "input-conditioned",
        PadRule::GlobalMax => "global-max",
    }
}
