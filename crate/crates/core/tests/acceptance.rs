//! The eight acceptance criteria. Each prints one PASS/FAIL line; the
//! process exits non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;

use common::{dsp_suite, gl_suite, grad_suite, metrics_suite, optim_suite};
use vocoder_fingerprint::corpus::{Manifest, Split};
use vocoder_fingerprint::eval::{self, MetricsReport};
use vocoder_fingerprint::features::io::{feature_path, read_features};
use vocoder_fingerprint::nnet::model::features_to_input;
use vocoder_fingerprint::nnet::Checkpoint;

const PER_CLASS: usize = 250;
const SPEAKERS: usize = 15;
const EPOCHS: usize = 30;
const BATCH: usize = 32;
const CROP_FRAMES: usize = 96;
const SEED: u64 = 7;
const MIN_TEST_F1: f64 = 0.90;
const MIN_SEPARABILITY: f64 = 1.5;

type Outcome = Result<String, String>;

fn vfp(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_vfp")).args(args).output().expect("spawn vfp");
    assert!(
        out.status.success(),
        "vfp {} failed: {}",
        args.first().unwrap_or(&""),
        String::from_utf8_lossy(&out.stderr).trim()
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn panic_text(e: Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|m| m.to_string()))
        .unwrap_or_else(|| "panic".into())
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| Err(panic_text(e)))
}

fn run_suite(suite: &[(&str, fn())]) -> Outcome {
    let failed: Vec<String> = suite
        .iter()
        .filter_map(|(name, check)| catch_unwind(*check).err().map(|e| format!("{name}: {}", panic_text(e))))
        .collect();
    if failed.is_empty() {
        Ok(format!("{} checks", suite.len()))
    } else {
        Err(failed.join("; "))
    }
}

/// Outputs of one full command-line pipeline run.
struct PipelineRun {
    manifest: PathBuf,
    features: PathBuf,
    run: PathBuf,
    report: PathBuf,
    embeddings: PathBuf,
}

struct PipelineArgs {
    per_class: usize,
    speakers: usize,
    epochs: usize,
    crop_frames: usize,
    min_duration: f64,
    max_duration: f64,
}

fn pipeline(root: &Path, a: &PipelineArgs) -> PipelineRun {
    let corpus = root.join("corpus");
    let manifest = corpus.join("manifest.split.tsv");
    let features = root.join("features");
    let run = root.join("run");
    let report = root.join("report.txt");
    let embeddings = root.join("embeddings.tsv");
    let seed = SEED.to_string();
    vfp(&[
        "synth-corpus",
        "--classes", "identity,griffin_lim,mulaw,lowpass",
        "--per-class", &a.per_class.to_string(),
        "--speakers", &a.speakers.to_string(),
        "--min-duration", &a.min_duration.to_string(),
        "--max-duration", &a.max_duration.to_string(),
        "--seed", &seed,
        "--out", s(&corpus),
    ]);
    vfp(&["split", "--manifest", s(&corpus.join("manifest.tsv")), "--fractions", "0.6,0.2,0.2", "--seed", &seed]);
    vfp(&["extract", "--feature", "lfcc", "--manifest", s(&manifest), "--out", s(&features)]);
    vfp(&[
        "train",
        "--model", "resnet_staged",
        "--feature", "lfcc",
        "--manifest", s(&manifest),
        "--features", s(&features),
        "--out", s(&run),
        "--epochs", &a.epochs.to_string(),
        "--batch-size", &BATCH.to_string(),
        "--crop-frames", &a.crop_frames.to_string(),
        "--seed", &seed,
    ]);
    let ck = run.join("model.vpck");
    let scoring = ["--checkpoint", s(&ck), "--manifest", s(&manifest), "--features", s(&features), "--split", "test"];
    vfp(&[&["eval"][..], &scoring, &["--out", s(&report)]].concat());
    vfp(&[&["embed"][..], &scoring, &["--out", s(&embeddings)]].concat());
    PipelineRun {
        manifest,
        features,
        run,
        report,
        embeddings,
    }
}

fn toy_corpus_result(p: &PipelineRun) -> Outcome {
    let m = Manifest::read(&p.manifest).map_err(|e| e.to_string())?;
    if m.len() != 4 * PER_CLASS || m.speakers().len() != SPEAKERS {
        return Err(format!("corpus has {} utterances and {} speakers", m.len(), m.speakers().len()));
    }
    let mut owner: BTreeMap<&str, Split> = BTreeMap::new();
    for r in m.records() {
        if *owner.entry(&r.speaker_id).or_insert(r.split) != r.split {
            return Err(format!("speaker {} appears in two splits", r.speaker_id));
        }
    }
    let report = MetricsReport::read(&p.report).map_err(|e| e.to_string())?;
    let log = fs::read_to_string(p.run.join("train.log")).map_err(|e| e.to_string())?;
    let per_class: Vec<String> = report.classes.iter().map(|c| format!("{}={:.3}", c.name, c.f1)).collect();
    let detail = format!(
        "test macro-F1 {:.4} over {} utterances after {} epochs ({})",
        report.macro_f1,
        report.n_utterances,
        log.lines().count(),
        per_class.join(" ")
    );
    if report.classes.len() == 4 && report.macro_f1 >= MIN_TEST_F1 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn separability_result(p: &PipelineRun) -> Outcome {
    let rows = eval::read_embeddings(&p.embeddings).map_err(|e| e.to_string())?;
    let ratio = eval::separability(&rows).map_err(|e| e.to_string())?;
    let detail = format!("between/within centroid distance ratio {ratio:.3} on {} test fingerprints", rows.len());
    if ratio > MIN_SEPARABILITY {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn tree_bytes(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let name = path.file_name().unwrap().to_string_lossy();
                // Run snapshots record absolute output paths.
                if name != "resolved_config.json" && !name.ends_with(".config.json") {
                    out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
                }
            }
        }
    }
    out
}

fn determinism_result(big: &PipelineRun) -> Outcome {
    let small = PipelineArgs {
        per_class: 12,
        speakers: 6,
        epochs: 3,
        crop_frames: 48,
        min_duration: 0.6,
        max_duration: 1.0,
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path(), &small);
    pipeline(b.path(), &small);
    let (ta, tb) = (tree_bytes(a.path()), tree_bytes(b.path()));
    let keys: BTreeSet<_> = ta.keys().chain(tb.keys()).collect();
    let differing: Vec<String> = keys
        .into_iter()
        .filter(|k| ta.get(*k) != tb.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    if !differing.is_empty() {
        return Err(format!("repeat run differs in {}", differing.join(", ")));
    }
    for required in ["corpus/manifest.tsv", "run/train.log", "report.txt", "embeddings.tsv", "run/model.vpck"] {
        if !ta.contains_key(Path::new(required)) {
            return Err(format!("{required} was not produced"));
        }
    }

    // Save and reload the trained model; inference must match bit for bit.
    let ck_path = big.run.join("model.vpck");
    let original = Checkpoint::read(&ck_path).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().unwrap();
    let copy = dir.path().join("copy.vpck");
    original.write(&copy).map_err(|e| e.to_string())?;
    if fs::read(&copy).unwrap() != fs::read(&ck_path).unwrap() {
        return Err("re-encoded checkpoint differs from the file it was read from".into());
    }
    let reloaded = Checkpoint::read(&copy).map_err(|e| e.to_string())?;
    let (m1, m2) = (
        original.to_model::<f32>().map_err(|e| e.to_string())?,
        reloaded.to_model::<f32>().map_err(|e| e.to_string())?,
    );
    let manifest = Manifest::read(&big.manifest).map_err(|e| e.to_string())?;
    let mut compared = 0;
    for r in manifest.split_records(Split::Test).take(16) {
        let f = read_features(&feature_path(&big.features, &r.id), &r.id).map_err(|e| e.to_string())?;
        let x = features_to_input::<f32>(&[&f]).map_err(|e| e.to_string())?;
        let (l1, f1) = m1.infer(x.clone()).map_err(|e| e.to_string())?;
        let (l2, f2) = m2.infer(x).map_err(|e| e.to_string())?;
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        if bits(l1.data()) != bits(l2.data()) || bits(f1.data()) != bits(f2.data()) {
            return Err(format!("reloaded model disagrees on {}", r.id));
        }
        compared += 1;
    }
    Ok(format!(
        "{} output files byte-identical across two seeded runs; reloaded checkpoint bit-identical on {compared} utterances",
        ta.len()
    ))
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let full = PipelineArgs {
        per_class: PER_CLASS,
        speakers: SPEAKERS,
        epochs: EPOCHS,
        crop_frames: CROP_FRAMES,
        min_duration: 1.0,
        max_duration: 2.0,
    };
    let run = catch_unwind(AssertUnwindSafe(|| pipeline(dir.path(), &full))).map_err(panic_text);

    let from_run = |f: fn(&PipelineRun) -> Outcome| -> Outcome {
        match &run {
            Ok(p) => guarded(|| f(p)),
            Err(e) => Err(format!("pipeline failed: {e}")),
        }
    };
    let results: Vec<(&str, Outcome)> = vec![
        ("toy-corpus end-to-end macro-F1 >= 0.90", from_run(toy_corpus_result)),
        ("gradient suite vs finite differences", run_suite(grad_suite::ALL)),
        ("DSP oracle suite", run_suite(dsp_suite::ALL)),
        ("metrics oracle suite", run_suite(metrics_suite::ALL)),
        ("Griffin-Lim consistency error non-increasing", run_suite(gl_suite::ALL)),
        ("optimization sanity", run_suite(optim_suite::ALL)),
        ("determinism and checkpoint persistence", from_run(determinism_result)),
        ("fingerprint separability > 1.5", from_run(separability_result)),
    ];

    let mut all_pass = true;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                all_pass = false;
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
            }
        }
    }
    if !all_pass {
        eprintln!("one or more acceptance criteria failed");
        std::process::exit(1);
    }
}
