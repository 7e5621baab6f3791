//! Acceptance gate: runs each criterion, prints one PASS/FAIL line per
//! criterion and exits nonzero if any fails.

use std::path::Path;
use std::time::Instant;

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ihm_core::cli::{run, Cli};
use ihm_core::cohort::{
    generate_synthetic, prevalence, split_cohort, GeneratorConfig, SplitFractions,
};
use ihm_core::featurizer::NoteEmbedding;
use ihm_core::metrics::{auprc, auroc, format_percent, improvement};
use ihm_core::model::{
    gradient_check, Example, FusionModelParams, ModelDims, ModelInput, ModelVariant,
};
use ihm_core::pipeline::{
    predict, run_ablation, train_variant, ExperimentConfig, PreparedCohort, SplitName,
};
use ihm_core::temporal::aggregate_at;
use ihm_core::trainer::{run_early_stopping, EpochLosses, EpochModel, TrainError};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// 1. Analytic vs central-difference gradients on random tiny models.
fn gradient_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let configs = 25;
    for k in 0..configs {
        let variant = ModelVariant::ALL[k % ModelVariant::ALL.len()];
        let dims = ModelDims {
            d: rng.random_range(1..=3),
            h: rng.random_range(1..=4),
            b: rng.random_range(1..=5),
            t: rng.random_range(1..=6),
        };
        let mut params = FusionModelParams::init(variant, dims, k as u64).unwrap();
        params
            .theta
            .iter_mut()
            .for_each(|w| *w += rng.random_range(-0.5..0.5));
        let n = rng.random_range(1..=4);
        let batch: Vec<Example> = (0..n)
            .map(|i| {
                let mut v = |len: usize| {
                    (0..len)
                        .map(|_| rng.random_range(-1.5..1.5))
                        .collect::<Vec<f64>>()
                };
                Example {
                    input: ModelInput {
                        x: Some((0..dims.t).map(|_| v(dims.din())).collect()),
                        u: Some(v(dims.b)),
                        v: Some(v(dims.b)),
                    },
                    label: (i % 2) as u8,
                }
            })
            .collect();
        let refs: Vec<&Example> = batch.iter().collect();
        let err = gradient_check(&params, &refs, 1e-3, 1e-5).unwrap();
        worst = worst.max(err);
    }
    outcome(
        worst < 1e-4,
        format!("{configs} configs, max relative error {worst:.2e} (< 1e-4)"),
    )
}

fn oracle_auroc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn oracle_ap(scores: &[f64], labels: &[u8]) -> f64 {
    let total_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for tau in thresholds {
        let selected: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= tau).collect();
        let tp = selected.iter().filter(|&&i| labels[i] == 1).count() as f64;
        let recall = tp / total_pos;
        ap += (recall - prev_recall) * tp / selected.len() as f64;
        prev_recall = recall;
    }
    ap
}

// 2. Fast metrics vs exhaustive enumeration, half of the sets tie-heavy.
fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < 1000 {
        let n = rng.random_range(2..80);
        let levels = if checked % 2 == 0 {
            rng.random_range(1..5)
        } else {
            0
        };
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if levels > 0 {
                    f64::from(rng.random_range(0..levels)) / 4.0
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.3))).collect();
        let pos = labels.iter().filter(|&&y| y == 1).count();
        if pos == 0 || pos == n {
            continue;
        }
        worst = worst
            .max((auroc(&scores, &labels).unwrap() - oracle_auroc(&scores, &labels)).abs())
            .max((auprc(&scores, &labels).unwrap() - oracle_ap(&scores, &labels)).abs());
        checked += 1;
    }
    outcome(
        worst <= 1e-9,
        format!("{checked} sets, max deviation {worst:.2e} (<= 1e-9)"),
    )
}

// 3. Published metric pairs reproduce the printed deltas.
fn improvement_arithmetic() -> Outcome {
    let cases = [((0.8320, 0.8955), "7.63"), ((0.4513, 0.6156), "36.41")];
    let got: Vec<String> = cases
        .iter()
        .map(|((base, m), _)| format_percent(improvement(*m, *base).unwrap()))
        .collect();
    let pass = cases.iter().zip(&got).all(|((_, want), g)| g == want);
    outcome(
        pass,
        format!("AUROC {}%, AUPRC {}% (want 7.63%, 36.41%)", got[0], got[1]),
    )
}

fn note(vector: Vec<f64>, chart_time: f64) -> NoteEmbedding {
    NoteEmbedding { vector, chart_time }
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

// 4. Decay aggregation: causality, plain mean at zero decay, linearity and
// the two-note hand example.
fn decay_properties() -> Outcome {
    let tol = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dim = 6;
    let mut failures = Vec::new();
    for trial in 0..200 {
        let t = f64::from(rng.random_range(1..=48));
        let lambda = [0.0, 0.01, 0.05, 0.1, 0.5, 1.0][trial % 6];
        let notes: Vec<NoteEmbedding> = (0..rng.random_range(1..8))
            .map(|_| {
                note(
                    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    rng.random_range(0.0..48.0),
                )
            })
            .collect();
        let base = aggregate_at(&notes, t, lambda, dim);

        let mut mutated = notes.clone();
        for n in mutated.iter_mut().filter(|n| n.chart_time > t) {
            n.vector
                .iter_mut()
                .for_each(|x| *x = rng.random_range(-5.0..5.0));
        }
        if aggregate_at(&mutated, t, lambda, dim) != base {
            failures.push("causality");
        }

        let avail: Vec<&NoteEmbedding> = notes.iter().filter(|n| n.chart_time <= t).collect();
        if !avail.is_empty() {
            let mean: Vec<f64> = (0..dim)
                .map(|j| avail.iter().map(|n| n.vector[j]).sum::<f64>() / avail.len() as f64)
                .collect();
            if !close(&aggregate_at(&notes, t, 0.0, dim).unwrap(), &mean, tol) {
                failures.push("mean");
            }
        }

        let other: Vec<NoteEmbedding> = notes
            .iter()
            .map(|n| {
                note(
                    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    n.chart_time,
                )
            })
            .collect();
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let combo: Vec<NoteEmbedding> = notes
            .iter()
            .zip(&other)
            .map(|(x, y)| {
                note(
                    x.vector
                        .iter()
                        .zip(&y.vector)
                        .map(|(p, q)| a * p + b * q)
                        .collect(),
                    x.chart_time,
                )
            })
            .collect();
        if let (Some(ux), Some(uy), Some(uc)) = (
            base,
            aggregate_at(&other, t, lambda, dim),
            aggregate_at(&combo, t, lambda, dim),
        ) {
            let expect: Vec<f64> = ux.iter().zip(&uy).map(|(p, q)| a * p + b * q).collect();
            if !close(&uc, &expect, tol) {
                failures.push("linearity");
            }
        }
    }
    let e = vec![1.0, -2.0, 4.0];
    let hand = aggregate_at(
        &[note(e.clone(), 0.0), note(e.clone(), 1.0)],
        2.0,
        std::f64::consts::LN_2,
        3,
    )
    .unwrap();
    let expect: Vec<f64> = e.iter().map(|x| 0.375 * x).collect();
    if !close(&hand, &expect, tol) {
        failures.push("hand example");
    }
    failures.dedup();
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "200 random trials plus U_2 = 0.375 e, all at 1e-12".to_string()
        } else {
            format!("failed: {failures:?}")
        },
    )
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

// 5. Ablation ordering on the default generator, median over five seeds.
fn ablation_ordering() -> Outcome {
    let start = Instant::now();
    let seeds = [1u64, 2, 3, 4, 5];
    let mut per_variant: Vec<Vec<f64>> = vec![Vec::new(); ModelVariant::ALL.len()];
    let mut prevalence_ok = true;
    for &seed in &seeds {
        let episodes = generate_synthetic(&GeneratorConfig {
            seed,
            ..GeneratorConfig::default()
        })
        .unwrap();
        prevalence_ok &= (prevalence(&episodes) - 0.13).abs() <= 0.01;
        let config = ExperimentConfig {
            seed,
            ..ExperimentConfig::default()
        };
        let out = run_ablation(&episodes, &config, None, 1).unwrap();
        let row: Vec<String> = ModelVariant::ALL
            .iter()
            .map(|v| format!("{}={:.4}", v.as_str(), out.report.row(*v).unwrap().auprc))
            .collect();
        println!(
            "    seed {seed}: lambda {} AUPRC {}",
            out.lambda,
            row.join(" ")
        );
        for (k, v) in ModelVariant::ALL.iter().enumerate() {
            per_variant[k].push(out.report.row(*v).unwrap().auprc);
        }
    }
    let m: Vec<f64> = per_variant.into_iter().map(median).collect();
    let [ts, notes, expert, ts_notes, full] = [m[0], m[1], m[2], m[3], m[4]];
    let secs = start.elapsed().as_secs_f64();
    let pass = prevalence_ok
        && full >= ts_notes
        && ts_notes >= ts.max(notes)
        && notes > ts
        && expert > ts
        && secs < 1800.0;
    outcome(
        pass,
        format!(
            "median AUPRC ts_notes_expert {full:.4} >= ts_notes {ts_notes:.4} >= max(ts_only {ts:.4}, notes_only {notes:.4}); \
             expert_only {expert:.4} > ts_only; prevalence ok {prevalence_ok}; {secs:.0}s (< 1800s)"
        ),
    )
}

fn cli(args: &[&str]) -> std::path::PathBuf {
    let cli = Cli::try_parse_from(std::iter::once("ihm").chain(args.iter().copied())).unwrap();
    run(&cli.command).unwrap().out_dir
}

fn artifact_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = vec![
        "report.json".to_string(),
        "report.txt".to_string(),
        "subgroups.txt".to_string(),
    ];
    for v in ModelVariant::ALL {
        files.push(format!("checkpoints/{}.json", v.as_str()));
    }
    files
        .into_iter()
        .map(|f| {
            let bytes = std::fs::read(dir.join(&f)).unwrap();
            (f, bytes)
        })
        .collect()
}

// 6. Two ablation runs with one seed write identical reports and checkpoints.
fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let gen = root.join("gen");
    cli(&[
        "generate",
        "--out",
        &s(&gen),
        "--n-patients",
        "600",
        "--seed",
        "11",
    ]);
    let cohort = s(&gen.join("cohort.jsonl"));
    let (a, b) = (root.join("a"), root.join("b"));
    cli(&[
        "ablate",
        "--cohort",
        &cohort,
        "--out",
        &s(&a),
        "--seed",
        "3",
    ]);
    cli(&[
        "ablate",
        "--cohort",
        &cohort,
        "--out",
        &s(&b),
        "--seed",
        "3",
        "--parallel",
        "2",
    ]);
    let first = artifact_bytes(&a);
    cli(&[
        "ablate",
        "--cohort",
        &cohort,
        "--out",
        &s(&a),
        "--seed",
        "3",
        "--force",
    ]);
    let rerun = artifact_bytes(&a);
    let parallel = artifact_bytes(&b);
    let differing: Vec<&String> = first
        .iter()
        .zip(&rerun)
        .zip(&parallel)
        .filter(|(((_, x), (_, y)), (_, z))| x != y || x != z)
        .map(|(((f, _), _), _)| f)
        .collect();
    outcome(
        differing.is_empty(),
        format!(
            "{} artifacts compared across rerun and --parallel 2; differing: {differing:?}",
            first.len()
        ),
    )
}

struct Scripted {
    losses: Vec<f64>,
    epoch: usize,
}

impl EpochModel for Scripted {
    type Snapshot = usize;

    fn run_epoch(&mut self, epoch: usize) -> Result<EpochLosses, TrainError> {
        self.epoch = epoch;
        Ok(EpochLosses {
            train: 0.0,
            val: self.losses[epoch - 1],
        })
    }

    fn snapshot(&self) -> usize {
        self.epoch
    }
}

// 7. Scripted validation losses drive early stopping.
fn early_stopping() -> Outcome {
    let mut m = Scripted {
        losses: vec![1.0, 0.9, 0.91, 0.92, 0.93, 0.94, 0.95, 0.5, 0.4],
        epoch: 0,
    };
    let r = run_early_stopping(&mut m, 5, 100).unwrap();
    outcome(
        r.epochs_run == 7 && r.best_epoch == 2 && r.best == 2,
        format!(
            "stopped after epoch {}, restored epoch {} weights (want 7, 2)",
            r.epochs_run, r.best
        ),
    )
}

// 8. Linearly separable vitals: the time-series model fits the training set.
fn separable_toy() -> Outcome {
    let mut episodes = generate_synthetic(&GeneratorConfig {
        n_patients: 200,
        seed: 8,
        ..GeneratorConfig::default()
    })
    .unwrap();
    for e in &mut episodes {
        let level = if e.label == 1 { 140.0 } else { 60.0 };
        for (row, mask) in e.vitals.iter_mut().zip(&mut e.mask) {
            row[0] = level;
            mask[0] = 1;
        }
    }
    let mut config = ExperimentConfig {
        seed: 8,
        ..ExperimentConfig::default()
    };
    config.train.max_epochs = 50;
    let prep =
        PreparedCohort::new(&episodes, &config.featurize, config.split, config.seed).unwrap();
    let trained = train_variant(&prep, &config, ModelVariant::TsOnly, config.decay.lambda).unwrap();
    let train = prep.examples(SplitName::Train, config.decay.lambda);
    let scores = predict(&trained.params, &train).unwrap();
    let labels: Vec<u8> = train.iter().map(|e| e.label).collect();
    let a = auroc(&scores, &labels).unwrap();
    outcome(
        a == 1.0 && trained.manifest.epochs_run <= 50,
        format!(
            "train AUROC {a} after {} epochs (best {})",
            trained.manifest.epochs_run, trained.manifest.best_epoch
        ),
    )
}

// 9. Generator prevalence and split sizes.
fn generator_calibration() -> Outcome {
    let mut worst: f64 = 0.0;
    for (n, seed) in [(2000, 1), (2000, 2), (4000, 3), (15_337, 4)] {
        let eps = generate_synthetic(&GeneratorConfig {
            n_patients: n,
            seed,
            ..GeneratorConfig::default()
        })
        .unwrap();
        worst = worst.max((prevalence(&eps) - 0.13).abs());
    }
    let ids: Vec<String> = (0..15_337).map(|i| format!("e{i}")).collect();
    let sizes = split_cohort(&ids, SplitFractions::default(), 0)
        .unwrap()
        .sizes();
    outcome(
        worst <= 0.01 && sizes == (9203, 3067, 3067),
        format!("max |prevalence - 0.13| = {worst:.4} (<= 0.01); split sizes {sizes:?}"),
    )
}

type Check = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("gradient oracle", gradient_oracle),
        ("metric oracle", metric_oracle),
        ("improvement arithmetic", improvement_arithmetic),
        ("decay aggregation", decay_properties),
        ("ablation ordering", ablation_ordering),
        ("determinism", determinism),
        ("early stopping", early_stopping),
        ("separable toy", separable_toy),
        ("generator calibration", generator_calibration),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let r = check();
        let status = if r.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {} [{status}] {name}: {} ({:.1}s)",
            i + 1,
            r.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!r.pass);
    }
    if failed > 0 {
        println!("acceptance: {failed} criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
