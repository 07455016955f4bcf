use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tokenleak"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn lang_pipeline_recovers_a_language() {
    let dir = tempfile::tempdir().unwrap();
    let model = configs().join("models/translation-k5.jsonl");
    let train = dir.path().join("train.jsonl");
    let victim = dir.path().join("victim.jsonl");
    let profiles = dir.path().join("langs.profile");
    ok(&["synth", "--model", p(&model), "--count", "300", "--seed", "1", "-o", p(&train)]);
    ok(&["synth", "--model", p(&model), "--language", "zh", "--count", "50", "--seed", "2", "-o", p(&victim)]);
    ok(&["lang", "fit", "--trace", p(&train), "-o", p(&profiles)]);
    let guess = ok(&["lang", "attack", "--profiles", p(&profiles), "--trace", p(&victim), "--samples", "50"]);
    assert_eq!(guess.trim(), "zh");
    let report = ok(&[
        "lang", "asr", "--profiles", p(&profiles), "--trace", p(&train), "--samples", "10", "--predictions", "20",
        "--feature", "density",
    ]);
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(v["per_label"].as_array().unwrap().len(), 5);
}

#[test]
fn timing_pipeline_estimates_tokens() {
    let dir = tempfile::tempdir().unwrap();
    let model = configs().join("models/translation-k5.jsonl");
    let timing = configs().join("timing/local-machine.json");
    let trace = dir.path().join("t.jsonl");
    let timed = dir.path().join("timed.jsonl");
    let est = dir.path().join("est.jsonl");
    ok(&["synth", "--model", p(&model), "--count", "40", "-o", p(&trace)]);
    ok(&["simulate", "--timing", p(&timing), "--trace", p(&trace), "--interval", "15", "-o", p(&timed)]);
    let r: f64 = ok(&["timing", "pearson", "--trace", p(&timed)]).trim().parse().unwrap();
    assert!(r > 0.98, "{r}");
    // The victims double as probes: every minute holds a few of them.
    ok(&[
        "timing", "estimate", "--probes", p(&timed), "--trace", p(&timed), "--strategy", "averaged", "--rtt", "0.06",
        "-o", p(&est),
    ]);
    let text = std::fs::read_to_string(&est).unwrap();
    assert!(text.lines().count() > 40);
}

#[test]
fn cls_commands_round_trip_a_profile() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = configs().join("models/class-tasks.jsonl");
    let out = ok(&["cls", "asr", "--tasks", p(&tasks), "--task", "spam", "--bias", "augment", "--magnitude", "0.5"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v[0]["task"], "spam");
    assert!(v[0]["report"]["average"].as_f64().unwrap() > 0.6);

    let defended = dir.path().join("fixed.jsonl");
    ok(&["defend", "--defense", "fixed-length", "--tasks", p(&tasks), "--compliance", "1.0", "-o", p(&defended)]);
    let out = ok(&["cls", "asr", "--tasks", p(&defended), "--task", "spam"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v[0]["report"]["average"].as_f64().unwrap() - 0.5).abs() < 0.1);
}

#[test]
fn pad_never_shrinks_records() {
    let dir = tempfile::tempdir().unwrap();
    let model = configs().join("models/translation-k5.jsonl");
    let trace = dir.path().join("t.jsonl");
    let padded = dir.path().join("p.jsonl");
    ok(&["synth", "--model", p(&model), "--count", "20", "-o", p(&trace)]);
    ok(&["defend", "--defense", "pad", "--trace", p(&trace), "--global-max", "-o", p(&padded)]);
    let tokens = |path: &Path| -> Vec<u64> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .filter_map(|l| serde_json::from_str::<serde_json::Value>(l).ok())
            .filter_map(|v| v["output_tokens"].as_u64())
            .collect()
    };
    let (before, after) = (tokens(&trace), tokens(&padded));
    assert_eq!(before.len(), 100);
    assert!(after.iter().all(|&t| t == *before.iter().max().unwrap()));
}

#[test]
fn scenario_run_and_render_agree() {
    let dir = tempfile::tempdir().unwrap();
    let config = configs().join("translation-planted.toml");
    let text = ok(&["scenario", "run", p(&config), "--output-dir", p(dir.path())]);
    assert!(text.contains("asr-vs-samples/both"));
    let rendered = ok(&["scenario", "render", p(&dir.path().join("report.json"))]);
    assert_eq!(text, rendered);
}

#[test]
fn bpe_train_and_count() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    std::fs::write(&corpus, "the cat sat on the mat\n".repeat(50)).unwrap();
    let vocab = dir.path().join("v.bpe");
    ok(&["bpe", "train", p(&corpus), "--vocab-size", "300", "-o", p(&vocab)]);
    let out = ok(&["bpe", "count", "--vocab", p(&vocab), p(&corpus)]);
    let density: f64 = out.trim().split('\t').nth(2).unwrap().parse().unwrap();
    assert!(density > 2.0, "{out}");
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let out = run(&["lang", "fit", "--trace", "/nonexistent/trace.jsonl", "-o", "/tmp/x"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonexistent"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seed = 1\nscenario = \"translation-planted\"\n[paths]\ndensity_model = \"missing.jsonl\"\n").unwrap();
    let out = run(&["scenario", "run", p(&bad)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("synthesize"));

    let out = run(&["defend", "--defense", "pad", "-o", "/tmp/x"]);
    assert!(!out.status.success());
}
