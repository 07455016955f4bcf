//! `tokenleak` command-line interface.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tokenleak::class::{
    bias_transform, evaluate_class_asr, fit_threshold, predict_class, synth_class_trace, BiasShift, ClassTaskSpec,
    ThresholdProfile, DEFAULT_THETA,
};
use tokenleak::defense::{fixed_length_transform, pad_trace, penalty_report, uniform_tokenizer_model, PadRule};
use tokenleak::experiment::{report_render, run_scenario, ExperimentConfig, ReportBundle};
use tokenleak::lang::{evaluate_asr, predict_language, CovarianceKind, FeatureMask, Matcher, ProfileSet};
use tokenleak::servesim::{pings, schedule, simulate_batch, TimingModel};
use tokenleak::timing::{build_profile, duration_token_pearson, with_estimated_tokens, ProfileOptions, Strategy, PROBE_INTERVAL};
use tokenleak::tokenizer::{synth_all, synth_trace, train_bpe, BpeVocab, DensityModel, InputLengthSampler};
use tokenleak::{Mode, ObservationRecord, Trace};

#[derive(Parser)]
#[command(name = "tokenleak", version, about = "Token-length side-channel workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a labelled trace from a density model.
    Synth(SynthArgs),
    /// Stamp send and completion times onto a trace.
    Simulate(SimulateArgs),
    /// Language identification from token density and output ratio.
    #[command(subcommand)]
    Lang(LangCommand),
    /// Two-class inference from output length.
    #[command(subcommand)]
    Cls(ClsCommand),
    /// Recover token counts from response times.
    #[command(subcommand)]
    Timing(TimingCommand),
    /// Apply a countermeasure.
    Defend(DefendArgs),
    /// Run or render a configured experiment.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Byte-level BPE tokenizers.
    #[command(subcommand)]
    Bpe(BpeCommand),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    model: PathBuf,
    /// Only this language; every language when omitted.
    #[arg(long)]
    language: Option<String>,
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Fixed input length; uniform 60..=400 bytes when omitted.
    #[arg(long)]
    input_bytes: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Streaming,
    NonStreaming,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    timing: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    /// Reschedule sends this many seconds apart before simulating.
    #[arg(long)]
    interval: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::NonStreaming)]
    mode: ModeArg,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum LangCommand {
    /// Fit one profile per language from a labelled trace.
    Fit {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value = "target")]
        model_name: String,
        #[arg(long, default_value = "en")]
        source_language: String,
        #[arg(long)]
        diagonal: bool,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Guess the language of a batch of observations.
    Attack {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Use the first N records; all when omitted.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value = "both")]
        feature: FeatureMask,
    },
    /// Per-language precision over repeated attacks on a labelled trace.
    Asr {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 200)]
        predictions: usize,
        #[arg(long, default_value = "both")]
        feature: FeatureMask,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum ClsCommand {
    /// Fit a token-count threshold on a two-class labelled trace.
    Fit {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value = "task")]
        task: String,
        #[arg(long, default_value_t = DEFAULT_THETA)]
        theta: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Predict a class for every record.
    Attack {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Synthesize biased profiling and test data for a task and score the attack.
    Asr {
        #[arg(long)]
        tasks: PathBuf,
        /// Task name; every task when omitted.
        #[arg(long)]
        task: Option<String>,
        #[arg(long, default_value = "none")]
        bias: BiasShift,
        #[arg(long, default_value_t = 0.5)]
        magnitude: f64,
        #[arg(long, default_value_t = DEFAULT_THETA)]
        theta: f64,
        #[arg(long, default_value_t = 200)]
        profiling: usize,
        #[arg(long, default_value_t = 500)]
        test: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum TimingCommand {
    /// Replace token counts in a timed trace with timing estimates.
    Estimate {
        /// Timed probe trace; probes are grouped into one-minute rounds.
        #[arg(long)]
        probes: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value = "concurrent")]
        strategy: Strategy,
        /// Measured round-trip time in seconds.
        #[arg(long, default_value_t = 0.0)]
        rtt: f64,
        /// Fit the decode time with no intercept.
        #[arg(long, alias = "proportional")]
        through_origin: bool,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Correlation between duration and true token count.
    Pearson {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Round-trip pings against a timing model.
    Ping {
        #[arg(long)]
        timing: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DefenseArg {
    Pad,
    FixedLength,
    UniformTokenizer,
}

#[derive(Args)]
struct DefendArgs {
    #[arg(long, value_enum)]
    defense: DefenseArg,
    /// Trace to pad.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Padding reference; the trace itself when omitted.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Pad every record to the global maximum.
    #[arg(long)]
    global_max: bool,
    #[arg(long, default_value_t = 0.1)]
    tolerance: f64,
    /// Timing model used to delay padded responses.
    #[arg(long)]
    timing: Option<PathBuf>,
    /// Task specs for the fixed-length defense.
    #[arg(long)]
    tasks: Option<PathBuf>,
    #[arg(long, default_value_t = 60.0)]
    target: f64,
    #[arg(long, default_value_t = 1.0)]
    compliance: f64,
    /// Density model for the uniform-tokenizer defense.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ScenarioCommand {
    Run {
        config: PathBuf,
        /// Overrides the configured output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Print the JSON report instead of the text tables.
        #[arg(long)]
        json: bool,
    },
    /// Print the text tables of a saved JSON report.
    Render { report: PathBuf },
}

#[derive(Subcommand)]
enum BpeCommand {
    Train {
        /// Text files; each line is one training document.
        #[arg(required = true)]
        corpus: Vec<PathBuf>,
        #[arg(long, default_value_t = 1024)]
        vocab_size: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Token count and bytes per token of each input file.
    Count {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

fn load_trace(path: &Path) -> Result<Trace> {
    Trace::load(path).with_context(|| format!("reading trace {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_trace(path: &Path, mode: Mode, records: Vec<ObservationRecord>) -> Result<()> {
    Trace::new(mode, records)
        .write(path)
        .with_context(|| format!("writing {}", path.display()))
}

fn json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let model = DensityModel::load(&a.model)?;
    let lengths = match a.input_bytes {
        Some(bytes) => InputLengthSampler::Fixed { bytes },
        None => InputLengthSampler::Uniform { min: 60, max: 400 },
    };
    let records = match &a.language {
        Some(l) => synth_trace(&model, l, a.count, &lengths, a.seed)?,
        None => synth_all(&model, a.count, &lengths, a.seed)?,
    };
    write_trace(&a.out, Mode::NonStreaming, records)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let model = TimingModel::load(&a.timing)?;
    let mut trace = load_trace(&a.trace)?;
    trace.mode = match a.mode {
        ModeArg::Streaming => Mode::Streaming,
        ModeArg::NonStreaming => Mode::NonStreaming,
    };
    if let Some(interval) = a.interval {
        schedule(&mut trace.records, 0.0, interval);
    }
    let timed = simulate_batch(&model, &trace)?;
    write_trace(&a.out, timed.mode, timed.records)
}

fn lang(cmd: LangCommand) -> Result<()> {
    match cmd {
        LangCommand::Fit {
            trace,
            model_name,
            source_language,
            diagonal,
            out,
        } => {
            let kind = if diagonal { CovarianceKind::Diagonal } else { CovarianceKind::Full };
            let set = ProfileSet::fit(model_name, source_language, &load_trace(&trace)?.records, kind)?;
            write(&out, &set.to_file_string())
        }
        LangCommand::Attack {
            profiles,
            trace,
            samples,
            feature,
        } => {
            let set = ProfileSet::load(&profiles)?;
            let records = load_trace(&trace)?.records;
            let n = samples.unwrap_or(records.len()).min(records.len());
            println!("{}", predict_language(&set, &records[..n], Matcher::with_mask(feature))?);
            Ok(())
        }
        LangCommand::Asr {
            profiles,
            trace,
            samples,
            predictions,
            feature,
            seed,
        } => {
            let set = ProfileSet::load(&profiles)?;
            let records = load_trace(&trace)?.records;
            json(&evaluate_asr(&set, &records, samples, predictions, Matcher::with_mask(feature), seed)?)
        }
    }
}

fn cls(cmd: ClsCommand) -> Result<()> {
    match cmd {
        ClsCommand::Fit { trace, task, theta, out } => {
            let profile = fit_threshold(&task, &load_trace(&trace)?.records, theta)?;
            write(&out, &profile.to_file_string())
        }
        ClsCommand::Attack { profile, trace } => {
            let profile = ThresholdProfile::load(&profile)?;
            for rec in &load_trace(&trace)?.records {
                println!("{}\t{}", rec.id, predict_class(&profile, rec)?);
            }
            Ok(())
        }
        ClsCommand::Asr {
            tasks,
            task,
            bias,
            magnitude,
            theta,
            profiling,
            test,
            seed,
        } => {
            let specs = ClassTaskSpec::load_all(&tasks)?;
            let chosen: Vec<&ClassTaskSpec> = specs
                .iter()
                .filter(|s| task.as_deref().is_none_or(|t| t == s.task))
                .collect();
            if chosen.is_empty() {
                bail!("no task named `{}` in {}", task.unwrap_or_default(), tasks.display());
            }
            let mut rows = Vec::new();
            for spec in chosen {
                let biased = bias_transform(spec, bias, magnitude)?;
                let train = synth_class_trace(&biased, profiling, seed)?;
                let eval = synth_class_trace(&biased, test, seed.wrapping_add(1))?;
                let profile = fit_threshold(&biased.task, &train, theta)?;
                let report = evaluate_class_asr(&profile, &eval)?;
                rows.push(serde_json::json!({ "task": biased.task, "profile": profile, "report": report }));
            }
            json(&rows)
        }
    }
}

/// Groups timed probes into the one-minute rounds they were sent in.
fn probe_rounds(probes: Vec<ObservationRecord>) -> Vec<Vec<ObservationRecord>> {
    let mut rounds: Vec<(i64, Vec<ObservationRecord>)> = Vec::new();
    for p in probes {
        let round = (p.t_send.as_secs_f64() / PROBE_INTERVAL).floor() as i64;
        match rounds.iter_mut().find(|(r, _)| *r == round) {
            Some((_, set)) => set.push(p),
            None => rounds.push((round, vec![p])),
        }
    }
    rounds.sort_by_key(|(r, _)| *r);
    rounds.into_iter().map(|(_, set)| set).collect()
}

fn timing(cmd: TimingCommand) -> Result<()> {
    match cmd {
        TimingCommand::Estimate {
            probes,
            trace,
            strategy,
            rtt,
            through_origin,
            out,
        } => {
            let rounds = probe_rounds(load_trace(&probes)?.records);
            let trace = load_trace(&trace)?;
            let now = trace
                .records
                .iter()
                .map(|r| r.t_send.as_secs_f64())
                .fold(f64::NEG_INFINITY, f64::max);
            let opts = ProfileOptions { through_origin };
            let profile = build_profile(strategy, &rounds, &[rtt], now, opts)?;
            let (estimated, clamped) = with_estimated_tokens(&profile, &trace.records)?;
            eprintln!(
                "ttft {:.4}s tpot {:.5}s rtt {:.4}s, {clamped} estimates clamped",
                profile.ttft_est, profile.tpot_est, profile.rtt_est
            );
            write_trace(&out, trace.mode, estimated)
        }
        TimingCommand::Pearson { trace } => {
            println!("{:.6}", duration_token_pearson(&load_trace(&trace)?.records)?);
            Ok(())
        }
        TimingCommand::Ping { timing, count } => {
            let model = TimingModel::load(&timing)?;
            for rtt in pings(&model, count) {
                println!("{rtt:.6}");
            }
            Ok(())
        }
    }
}

fn defend(a: DefendArgs) -> Result<()> {
    match a.defense {
        DefenseArg::Pad => {
            let Some(trace_path) = &a.trace else {
                bail!("--trace is required for padding");
            };
            let trace = load_trace(trace_path)?;
            let reference = match &a.reference {
                Some(p) => load_trace(p)?.records,
                None => trace.records.clone(),
            };
            let rule = if a.global_max {
                PadRule::GlobalMax
            } else {
                PadRule::InputConditioned { tolerance: a.tolerance }
            };
            let model = a.timing.as_deref().map(TimingModel::load).transpose()?;
            let padded = pad_trace(&trace.records, &reference, rule, model.as_ref())?;
            let pen = penalty_report(&trace.records, &padded)?;
            eprintln!(
                "byte padding {:.1}%, latency penalty {}",
                100.0 * pen.byte_padding,
                pen.latency_penalty
                    .map_or_else(|| "n/a".to_owned(), |l| format!("{:.1}%", 100.0 * l))
            );
            write_trace(&a.out, trace.mode, padded)
        }
        DefenseArg::FixedLength => {
            let Some(tasks) = &a.tasks else {
                bail!("--tasks is required for the fixed-length defense");
            };
            let mut lines = String::new();
            for spec in ClassTaskSpec::load_all(tasks)? {
                let defended = fixed_length_transform(&spec, a.target, a.compliance)?;
                lines.push_str(&serde_json::to_string(&defended)?);
                lines.push('\n');
            }
            write(&a.out, &lines)
        }
        DefenseArg::UniformTokenizer => {
            let Some(model) = &a.model else {
                bail!("--model is required for the uniform-tokenizer defense");
            };
            let uniform = uniform_tokenizer_model(&DensityModel::load(model)?)?;
            write(&a.out, &uniform.to_file_string())
        }
    }
}

fn scenario(cmd: ScenarioCommand) -> Result<()> {
    match cmd {
        ScenarioCommand::Run {
            config,
            output_dir,
            json,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = output_dir {
                cfg.paths.output_dir = Some(std::path::absolute(dir)?);
            }
            let bundle = run_scenario(&cfg)?;
            let (text, json_text) = report_render(&bundle)?;
            print!("{}", if json { json_text } else { text });
            Ok(())
        }
        ScenarioCommand::Render { report } => {
            let text = std::fs::read_to_string(&report).with_context(|| format!("reading {}", report.display()))?;
            let bundle = ReportBundle::from_json(&text)?;
            print!("{}", report_render(&bundle)?.0);
            Ok(())
        }
    }
}

fn bpe(cmd: BpeCommand) -> Result<()> {
    match cmd {
        BpeCommand::Train { corpus, vocab_size, out } => {
            let mut docs = Vec::new();
            for path in &corpus {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                docs.extend(text.lines().filter(|l| !l.is_empty()).map(str::to_owned));
            }
            let vocab = train_bpe(&docs, vocab_size)?;
            write(&out, &vocab.to_file_string())
        }
        BpeCommand::Count { vocab, files } => {
            let vocab = BpeVocab::load(&vocab)?;
            for path in &files {
                let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
                let tokens = vocab.count_tokens(&bytes);
                let density = if tokens == 0 { 0.0 } else { bytes.len() as f64 / tokens as f64 };
                println!("{}\t{tokens}\t{density:.4}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Simulate(a) => simulate(a),
        Command::Lang(c) => lang(c),
        Command::Cls(c) => cls(c),
        Command::Timing(c) => timing(c),
        Command::Defend(a) => defend(a),
        Command::Scenario(c) => scenario(c),
        Command::Bpe(c) => bpe(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
