use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const FAST: &[&str] = &[
    "--set",
    "train.max_epochs=2",
    "--set",
    "train.hidden=4",
    "--set",
    "featurize.embedding.dim=16",
    "--set",
    "tune_lambda=false",
];

fn ihm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ihm"))
        .args(args)
        .env_remove("IHM_OUT_ROOT")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = ihm(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let out = dir.join(format!("gen-{n}-{seed}"));
    ok(&[
        "generate",
        "--out",
        s(&out),
        "--n-patients",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
    ]);
    out.join("cohort.jsonl")
}

fn stderr_line(out: &Output) -> String {
    let err = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = err.lines().filter(|l| l.starts_with("error[")).collect();
    assert_eq!(lines.len(), 1, "{err}");
    lines[0].to_string()
}

#[test]
fn generate_writes_cohort_and_stats() {
    let tmp = tempfile::tempdir().unwrap();
    let cohort = generate(tmp.path(), 500, 1);
    let text = std::fs::read_to_string(&cohort).unwrap();
    assert_eq!(text.lines().count(), 500);
    let stats: Value =
        serde_json::from_slice(&std::fs::read(cohort.with_file_name("stats.json")).unwrap())
            .unwrap();
    let p = stats["prevalence"].as_f64().unwrap();
    assert!((0.10..=0.16).contains(&p), "{p}");
    let races: u64 = stats["race_counts"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(races, 500);
    let hist: u64 = stats["note_count_histogram"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(hist, 500);
}

#[test]
fn generate_rerun_needs_force_and_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cohort = generate(tmp.path(), 60, 4);
    let first = std::fs::read(&cohort).unwrap();
    let dir = cohort.parent().unwrap();
    let again = ihm(&[
        "generate",
        "--out",
        s(dir),
        "--n-patients",
        "60",
        "--seed",
        "4",
    ]);
    assert_eq!(again.status.code(), Some(2));
    assert!(stderr_line(&again).contains("--force"));
    ok(&[
        "generate",
        "--out",
        s(dir),
        "--n-patients",
        "60",
        "--seed",
        "4",
        "--force",
    ]);
    assert_eq!(std::fs::read(&cohort).unwrap(), first);
}

#[test]
fn zero_patients_is_a_config_error_without_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("empty");
    let out = ihm(&["generate", "--out", s(&out_dir), "--n-patients", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).starts_with("error[config]: "));
    assert!(!out_dir.exists());
}

#[test]
fn default_output_root_comes_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ihm"))
        .args(["generate", "--n-patients", "20"])
        .env("IHM_OUT_ROOT", tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let dirs: Vec<_> = std::fs::read_dir(tmp.path()).unwrap().collect();
    assert_eq!(dirs.len(), 1);
    let dir = dirs[0].as_ref().unwrap().path();
    assert!(dir
        .file_name()
        .unwrap()
        .to_str()
        .unwrap()
        .starts_with("generate-"));
    assert!(dir.join("cohort.jsonl").exists() && dir.join("manifest.json").exists());
}

#[test]
fn config_file_and_flags_combine() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "seed = 3\n[generator]\nn_patients = 40\ntarget_prevalence = 0.2\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("g");
    ok(&[
        "generate",
        "--config",
        s(&cfg),
        "--out",
        s(&out_dir),
        "--n-patients",
        "30",
    ]);
    let manifest: Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["generator"]["n_patients"], 30);
    assert_eq!(manifest["config"]["generator"]["target_prevalence"], 0.2);
    assert_eq!(
        std::fs::read_to_string(out_dir.join("cohort.jsonl"))
            .unwrap()
            .lines()
            .count(),
        30
    );

    std::fs::write(&cfg, "[generator]\nn_patient = 40\n").unwrap();
    let bad = ihm(&[
        "generate",
        "--config",
        s(&cfg),
        "--out",
        s(&tmp.path().join("h")),
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn ablate_then_evaluate_and_project() {
    let tmp = tempfile::tempdir().unwrap();
    let cohort = generate(tmp.path(), 2000, 2);
    let run = tmp.path().join("ablate");
    let mut args = vec![
        "ablate",
        "--cohort",
        s(&cohort),
        "--out",
        s(&run),
        "--parallel",
        "2",
    ];
    args.extend_from_slice(FAST);
    let out = ok(&args);
    assert!(String::from_utf8_lossy(&out.stdout).contains("Time-Series (Only)"));

    let report: Value =
        serde_json::from_slice(&std::fs::read(run.join("report.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    let order: Vec<&str> = rows
        .iter()
        .map(|r| r["variant"].as_str().unwrap())
        .collect();
    assert_eq!(
        order,
        [
            "ts_only",
            "notes_only",
            "expert_only",
            "ts_notes",
            "ts_notes_expert"
        ]
    );
    assert_eq!(rows[0]["delta_auroc_pct"], 0.0);
    assert_eq!(rows[0]["delta_auprc_pct"], 0.0);
    let table = std::fs::read_to_string(run.join("report.txt")).unwrap();
    assert_eq!(table.lines().nth(1).unwrap().matches("0.00").count(), 2);
    for v in order {
        assert!(run.join("checkpoints").join(format!("{v}.json")).exists());
        assert!(run.join("manifests").join(format!("{v}.json")).exists());
    }

    let ckpt = run.join("checkpoints/ts_notes_expert.json");
    let eval = tmp.path().join("eval");
    ok(&[
        "evaluate",
        "--cohort",
        s(&cohort),
        "--checkpoint",
        s(&ckpt),
        "--out",
        s(&eval),
    ]);
    let rep: Value =
        serde_json::from_slice(&std::fs::read(eval.join("report.json")).unwrap()).unwrap();
    assert_eq!(rep["split"], "test");
    for rows in rep["subgroups"].as_object().unwrap().values() {
        for r in rows.as_array().unwrap() {
            for m in ["auroc", "auprc"] {
                if let Some(x) = r[m].as_f64() {
                    assert!((0.0..=1.0).contains(&x));
                }
            }
        }
    }
    for name in ["h", "u", "v"] {
        let csv = std::fs::read_to_string(eval.join(format!("projection_{name}.csv"))).unwrap();
        assert_eq!(csv.lines().next(), Some("episode_id,label,comp1,comp2"));
        assert_eq!(csv.lines().count(), 1 + rows_in_split(&rep));
    }

    let proj = tmp.path().join("proj");
    ok(&[
        "project",
        "--cohort",
        s(&cohort),
        "--checkpoint",
        s(&run.join("checkpoints/notes_only.json")),
        "--out",
        s(&proj),
        "--split",
        "val",
    ]);
    assert!(proj.join("projection_u.csv").exists());
    assert!(!proj.join("projection_h.csv").exists());
}

fn rows_in_split(report: &Value) -> usize {
    report["rows"][0]["n"].as_u64().unwrap() as usize
}

#[test]
fn evaluate_rejects_mismatched_text_width() {
    let tmp = tempfile::tempdir().unwrap();
    let cohort = generate(tmp.path(), 80, 3);
    let train_dir = tmp.path().join("train");
    let mut args = vec![
        "train",
        "--cohort",
        s(&cohort),
        "--out",
        s(&train_dir),
        "--variant",
        "notes_only",
    ];
    args.extend_from_slice(FAST);
    ok(&args);
    let ckpt_path = train_dir.join("checkpoint.json");
    let mut ckpt: Value = serde_json::from_slice(&std::fs::read(&ckpt_path).unwrap()).unwrap();
    ckpt["featurization"]["featurize"]["embedding"]["dim"] = Value::from(32);
    let edited = tmp.path().join("edited.json");
    std::fs::write(&edited, serde_json::to_vec(&ckpt).unwrap()).unwrap();
    let out = ihm(&[
        "evaluate",
        "--cohort",
        s(&cohort),
        "--checkpoint",
        s(&edited),
        "--out",
        s(&tmp.path().join("e")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let line = stderr_line(&out);
    assert!(
        line.contains("dimension mismatch for text width b"),
        "{line}"
    );
}

#[test]
fn train_rejects_bad_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cohort = generate(tmp.path(), 40, 1);
    let out = ihm(&["train", "--cohort", s(&cohort), "--variant", "lstm_only"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ihm(&[
        "train",
        "--cohort",
        s(&cohort),
        "--lambda",
        "-1",
        "--out",
        s(&tmp.path().join("t")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = ihm(&["ablate", "--cohort", s(&tmp.path().join("missing.jsonl"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn strict_loading_rejects_corrupt_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let cohort = generate(tmp.path(), 60, 6);
    let mut text = std::fs::read_to_string(&cohort).unwrap();
    text.push_str("{not json\n");
    std::fs::write(&cohort, text).unwrap();
    let mut lenient = vec![
        "train",
        "--cohort",
        s(&cohort),
        "--variant",
        "ts_only",
        "--out",
    ];
    let out_dir = tmp.path().join("lenient");
    lenient.push(s(&out_dir));
    lenient.extend_from_slice(FAST);
    let out = ok(&lenient);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let strict_dir = tmp.path().join("strict");
    let out = ihm(&[
        "train",
        "--cohort",
        s(&cohort),
        "--strict",
        "--out",
        s(&strict_dir),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_line(&out).contains("line 61"));
}

#[test]
fn preprocess_rebuilds_hourly_cohort() {
    use ihm_core::cohort::{
        generate_synthetic, GeneratorConfig, HourlyVitals, RawEpisode, VitalsSpec,
    };
    let tmp = tempfile::tempdir().unwrap();
    let episodes = generate_synthetic(&GeneratorConfig {
        n_patients: 30,
        ..GeneratorConfig::default()
    })
    .unwrap();
    let spec = VitalsSpec::standard();
    let raw_path = tmp.path().join("raw.jsonl");
    let lines: Vec<String> = episodes
        .iter()
        .map(|e| {
            let raw = RawEpisode {
                episode_id: e.episode_id.clone(),
                measurements: HourlyVitals {
                    vitals: e.vitals.clone(),
                    mask: e.mask.clone(),
                }
                .flatten(&spec),
                notes: e.notes.clone(),
                expert_summary: None,
                label: e.label,
                demographics: e.demographics.clone(),
            };
            serde_json::to_string(&raw).unwrap()
        })
        .collect();
    std::fs::write(&raw_path, lines.join("\n") + "\n").unwrap();
    let out_dir = tmp.path().join("pre");
    ok(&["preprocess", "--input", s(&raw_path), "--out", s(&out_dir)]);
    let text = std::fs::read_to_string(out_dir.join("cohort.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 30);
    for (line, e) in text.lines().zip(&episodes) {
        let got: ihm_core::cohort::Episode = serde_json::from_str(line).unwrap();
        assert_eq!(got.mask, e.mask);
        let observed = e.mask.iter().flatten().map(|&m| m == 1);
        for ((a, b), seen) in got
            .vitals
            .iter()
            .flatten()
            .zip(e.vitals.iter().flatten())
            .zip(observed)
        {
            assert!(!seen || (a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn help_documents_every_flag() {
    for cmd in [
        "generate",
        "preprocess",
        "train",
        "ablate",
        "evaluate",
        "project",
    ] {
        let out = ok(&[cmd, "--help"]);
        let help = String::from_utf8_lossy(&out.stdout);
        for line in help.lines().filter(|l| l.trim_start().starts_with("--")) {
            let flag = line.split_whitespace().next().unwrap();
            let rest = line.trim_start().trim_start_matches(flag).trim();
            let described = rest.split_once("  ").map(|(_, d)| d.trim()).unwrap_or(rest);
            assert!(!described.is_empty(), "{cmd} {flag} lacks help: `{line}`");
        }
    }
    let out = ihm(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}
