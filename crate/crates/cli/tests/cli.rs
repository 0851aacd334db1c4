use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kanspot_core::encoder::{model_param_count, Variant, VariantConfig};
use kanspot_core::evaluator::parse_det;

fn kanspot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kanspot"))
        .args(args)
        .env_remove("KANSPOT_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = kanspot(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> (i32, String) {
    let out = kanspot(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "error is not one line: {err}");
    (out.status.code().unwrap(), err)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small corpus under `dir/data`.
fn synth(dir: &Path, workers: &str) -> PathBuf {
    let data = dir.join("data");
    ok(&[
        "synth",
        "--out",
        s(&data),
        "--train-positives",
        "8",
        "--train-negative-hours",
        "0.003",
        "--eval-positives",
        "8",
        "--eval-negative-hours",
        "0.005",
        "--noise-seconds",
        "1",
        "--seed",
        "3",
        "--workers",
        workers,
    ]);
    data
}

const TINY: &[&str] = &["--w", "6", "--expansion", "2", "--blocks", "1", "--kernel", "3", "--batch-size", "4"];

fn train(data: &Path, out: &Path, extra: &[&str]) {
    let manifest = data.join("train.manifest");
    let mut args = vec!["train", "--train", s(&manifest), "--out", s(out)];
    args.extend_from_slice(TINY);
    args.extend_from_slice(extra);
    ok(&args);
}

fn eval(data: &Path, model: &Path, out: &Path, extra: &[&str]) -> Vec<u8> {
    let manifest = data.join("eval.manifest");
    let mut args = vec!["eval", "--model", s(model), "--manifest", s(&manifest), "--out", s(out)];
    args.extend_from_slice(extra);
    ok(&args);
    std::fs::read(out).unwrap()
}

#[test]
fn paramcount_prints_one_integer() {
    let out = ok(&["paramcount", "--variant", "MLP", "--w", "72"]);
    assert_eq!(out, format!("{}\n", model_param_count(&VariantConfig::new(Variant::Mlp, 72))));
    let table = ok(&["paramcount", "--budget", "400000"]);
    assert_eq!(table.lines().count(), 1 + Variant::ALL.len());
    assert!(table.contains("GKAN_post\t61\t"));
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "# shape\nvariant = GKAN\nw = 10\nblocks=2\n").unwrap();
    let count = |v, w, blocks| {
        let cfg = VariantConfig {
            n_blocks: blocks,
            ..VariantConfig::new(v, w)
        };
        format!("{}\n", model_param_count(&cfg))
    };
    assert_eq!(ok(&["paramcount", "--config", s(&conf)]), count(Variant::Gkan, 10, 2));
    assert_eq!(ok(&["paramcount", "--w", "12", "--config", s(&conf)]), count(Variant::Gkan, 12, 2));
    assert_eq!(ok(&["paramcount", "--config", s(&conf), "--variant", "MLP"]), count(Variant::Mlp, 10, 2));

    std::fs::write(&conf, "width = 3\n").unwrap();
    let (code, err) = fails(&["paramcount", "--config", s(&conf)]);
    assert_eq!(code, 2);
    assert!(err.contains("kind=usage token=\"width\""), "{err}");
}

#[test]
fn usage_errors_name_the_offending_token() {
    let (code, err) = fails(&["paramcount", "--bogus", "1"]);
    assert_eq!(code, 2);
    assert!(err.starts_with("error kind=usage token=\"--bogus\""), "{err}");

    let (_, err) = fails(&["paramcount", "--variant", "GKAN_postt", "--w", "3"]);
    assert!(err.contains("token=\"GKAN_postt\""), "{err}");

    let (_, err) = fails(&["frobnicate"]);
    assert!(err.contains("token=\"frobnicate\""), "{err}");

    let (code, err) = fails(&["eval", "--model", "/nonexistent/m.ckpt", "--manifest", "/nonexistent/x", "--out", "/tmp/x"]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error kind=io token=\"/nonexistent/m.ckpt\""), "{err}");

    let (_, err) = fails(&["paramcount", "--variant", "GKAN", "--w", "0"]);
    assert!(err.starts_with("error kind=contract"), "{err}");
}

#[test]
fn help_lists_every_flag_with_a_default() {
    for sub in ["synth", "train", "eval", "sweep", "det", "paramcount"] {
        let help = ok(&[sub, "--help"]);
        let usage = help.lines().find(|l| l.starts_with("Usage:")).unwrap().to_string();
        let mut entries: Vec<String> = Vec::new();
        for line in help.lines().skip_while(|l| !l.starts_with("Options:")).skip(1) {
            if line.trim_start().starts_with('-') {
                entries.push(line.trim().to_string());
            } else if let Some(e) = entries.last_mut() {
                e.push(' ');
                e.push_str(line.trim());
            }
        }
        assert!(entries.len() > 3, "{sub}: {help}");
        for e in entries {
            let flag = e.split_whitespace().find(|t| t.starts_with("--")).unwrap();
            if matches!(flag, "--help" | "--version") {
                continue;
            }
            let required = usage.contains(&format!("{flag} <"));
            assert!(required || e.contains("[default:"), "{sub}: {flag} has no default: {e}");
        }
    }
}

#[test]
fn zero_learning_rate_leaves_evaluation_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "0");
    let run = dir.path().join("run");
    train(&data, &run, &["--lr", "0", "--epochs", "2", "--variant", "GKAN_post"]);
    assert_eq!(std::fs::read(run.join("model.ckpt")).unwrap(), std::fs::read(run.join("init.ckpt")).unwrap());
    let a = eval(&data, &run.join("init.ckpt"), &dir.path().join("a.txt"), &[]);
    let b = eval(&data, &run.join("model.ckpt"), &dir.path().join("b.txt"), &[]);
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.contains("variant = GKAN_post") && text.contains("[frr_percent]"));
    assert_eq!(std::fs::read_to_string(run.join("metrics.jsonl")).unwrap().lines().count(), 2);
}

#[test]
fn sweep_emits_one_row_per_variant_and_budget() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "0");
    let out = dir.path().join("sweep.tsv");
    let stdout = ok(&[
        "sweep",
        "--train",
        s(&data.join("train.manifest")),
        "--eval",
        s(&data.join("eval.manifest")),
        "--out",
        s(&out),
        "--variants",
        "MLP,GKAN_post",
        "--budget",
        "3000",
        "--blocks",
        "1",
        "--expansion",
        "2",
        "--epochs",
        "1",
    ]);
    let table = std::fs::read_to_string(&out).unwrap();
    assert_eq!(table, stdout);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("budget\tvariant\tw\tsize\tFRR@0.1"));
    assert!(lines[1].starts_with("3000\tMLP\t") && lines[2].starts_with("3000\tGKAN_post\t"));
}

fn pipeline(dir: &Path, workers: &str) -> Vec<(String, Vec<u8>)> {
    let data = synth(dir, workers);
    let run = dir.join("run");
    let noise = data.join("noise.list");
    train(
        &data,
        &run,
        &["--epochs", "2", "--noise-prob", "0.5", "--speed-prob", "0.5", "--noise-list", s(&noise), "--seed", "9", "--workers", workers],
    );
    let noisy = ["--condition", "noisy", "--eval-noise", s(&noise), "--seed", "9", "--workers", workers];
    eval(&data, &run.join("model.ckpt"), &dir.join("report.txt"), &noisy);
    let det = dir.join("det.csv");
    ok(&[
        "det",
        "--model",
        s(&run.join("model.ckpt")),
        "--manifest",
        s(&data.join("eval.manifest")),
        "--out",
        s(&det),
        "--workers",
        workers,
    ]);
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                files.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn identical_seeds_give_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = pipeline(a.path(), "1");
    let fb = pipeline(b.path(), "3");
    let names: Vec<&String> = fa.iter().map(|(n, _)| n).collect();
    for want in ["data/train.manifest", "run/model.ckpt", "run/epoch_02.ckpt", "report.txt", "det.csv"] {
        assert!(names.iter().any(|n| n.as_str() == want), "{want} missing from {names:?}");
    }
    assert_eq!(names, fb.iter().map(|(n, _)| n).collect::<Vec<_>>());
    for ((n, x), (_, y)) in fa.iter().zip(&fb) {
        assert!(x == y, "{n} differs");
    }
    let det = String::from_utf8(fa.iter().find(|(n, _)| n == "det.csv").unwrap().1.clone()).unwrap();
    assert_eq!(parse_det(&det).unwrap().len(), 4);
}

#[test]
fn workers_fall_back_to_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_kanspot"))
        .args(["paramcount", "--w", "8"])
        .env("KANSPOT_WORKERS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let bad = Command::new(env!("CARGO_BIN_EXE_kanspot"))
        .args(["paramcount", "--w", "8"])
        .env("KANSPOT_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("token=\"many\""));
}
