use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mobilehash::net::{Network, NetworkConfig};

fn mobilehash(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mobilehash"))
        .args(args)
        .env("MOBILEHASH_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mobilehash(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str], code: i32) -> String {
    let out = mobilehash(args);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stderr).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthetic dataset of 5 classes x `per_class` images.
fn synth(dir: &Path, per_class: usize) -> PathBuf {
    let data = dir.join("data");
    ok(&["gen-synth", "--out", s(&data), "--per-class", &per_class.to_string()]);
    data.join("manifest.csv")
}

#[test]
fn train_encode_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 40);
    let ckpt = dir.path().join("toy.ckpt");
    ok(&[
        "train", "--preset", "toy", "--manifest", s(&manifest), "--out", s(&ckpt),
        "--max-iters", "30", "--log-every", "10", "--batch", "8",
    ]);
    let log = std::fs::read_to_string(dir.path().join("toy.ckpt.log")).unwrap();
    let iters: Vec<&str> = log.lines().map(|l| l.split(' ').next().unwrap()).collect();
    assert_eq!(iters, ["10", "20", "30"]);

    let info = ok(&["inspect-checkpoint", "--checkpoint", s(&ckpt)]);
    assert!(info.contains("step=30"), "{info}");
    assert!(info.contains("bits=16"), "{info}");

    let codes = dir.path().join("codes.txt");
    ok(&["encode", "--checkpoint", s(&ckpt), "--manifest", s(&manifest), "--out", s(&codes)]);
    let text = std::fs::read_to_string(&codes).unwrap();
    let records: Vec<&str> = text.lines().skip(3).collect();
    assert_eq!(records.len(), 200);
    // K = 16 from the checkpoint: four hex digits per code
    assert!(records.iter().all(|r| r.rsplit(',').next().unwrap().len() == 4));

    let again = dir.path().join("codes2.txt");
    ok(&["encode", "--checkpoint", s(&ckpt), "--manifest", s(&manifest), "--out", s(&again)]);
    assert_eq!(std::fs::read(&codes).unwrap(), std::fs::read(&again).unwrap());

    let report = ok(&["eval", "--codes", s(&codes)]);
    assert!(report.lines().any(|l| l == "k=100"), "{report}");
    assert!(report.lines().any(|l| l == "num_queries=200"), "{report}");
    let per_query = dir.path().join("ap.csv");
    ok(&["eval", "--codes", s(&codes), "--k", "10", "--per-query", s(&per_query)]);
    assert_eq!(std::fs::read_to_string(&per_query).unwrap().lines().count(), 201);

    let hits = ok(&["index-query", "--codes", s(&codes), "--query", "img_00000", "--k", "5"]);
    assert_eq!(hits.lines().count(), 6);
    assert!(!hits.contains("img_00000,"));
}

#[test]
fn zero_iterations_writes_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 2);
    let ckpt = dir.path().join("init.ckpt");
    ok(&[
        "train", "--preset", "toy", "--manifest", s(&manifest), "--out", s(&ckpt),
        "--max-iters", "0", "--seed", "9",
    ]);
    let mut expected = Network::build(&NetworkConfig::builtin("toy").unwrap(), 9).unwrap();
    expected.round_to_f32();
    assert_eq!(std::fs::read(&ckpt).unwrap(), expected.to_checkpoint_bytes());
    assert_eq!(std::fs::read_to_string(dir.path().join("init.ckpt.log")).unwrap(), "");
}

#[test]
fn resume_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 2);
    let (a, b) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
    let base = ["train", "--preset", "toy", "--manifest", s(&manifest), "--batch", "4", "--log-every", "5"];
    ok(&[&base[..], &["--out", s(&a), "--max-iters", "5"]].concat());
    ok(&[&base[..], &["--out", s(&b), "--max-iters", "5", "--checkpoint", s(&a)]].concat());
    let info = ok(&["inspect-checkpoint", "--checkpoint", s(&b)]);
    assert!(info.contains("step=10"), "{info}");
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let err = fails(
        &["train", "--preset", "toy", "--manifest", s(&missing), "--out", s(&dir.path().join("x"))],
        2,
    );
    assert!(err.contains("nope.csv"), "{err}");

    let bad_codes = dir.path().join("bad.codes");
    std::fs::write(&bad_codes, "bits 8\ncount 2\nlabels a,b\nx,0,ff\ny,1,fff\n").unwrap();
    let err = fails(&["eval", "--codes", s(&bad_codes)], 2);
    assert!(err.contains("line 5"), "{err}");

    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "name bad\ninput 32x32x3\nbits 8\nclasses 2\nconv 2 8 3\ndw 1 16 3\navgpool\ndense 8\nsigmoid\ndense 2\nsoftmax\n").unwrap();
    let err = fails(&["cost-report", "--config", s(&cfg)], 2);
    assert!(err.contains("line 6"), "{err}");

    let err = fails(&["inspect-checkpoint", "--checkpoint", s(&cfg)], 2);
    assert!(err.contains("checkpoint"), "{err}");
}

#[test]
fn usage_errors_exit_1() {
    fails(&[], 1);
    fails(&["train"], 1);
    fails(&["eval", "--codes", "x", "--ap-norm", "median"], 1);
    fails(&["train", "--preset", "huge", "--manifest", "m", "--out", "o"], 1);
    let help = ok(&["train", "--help"]);
    for flag in ["--config", "--manifest", "--checkpoint", "--out", "--seed", "--lr", "--batch", "--max-iters", "--bits", "--preset"] {
        assert!(help.contains(flag), "{flag}");
    }
}

#[test]
fn divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 2);
    let err = fails(
        &[
            "train", "--preset", "toy", "--manifest", s(&manifest), "--out", s(&dir.path().join("d.ckpt")),
            "--lr", "1e300", "--max-iters", "20", "--batch", "4",
        ],
        3,
    );
    assert!(err.contains("iteration"), "{err}");
}

#[test]
fn separated_codebook_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let codes = dir.path().join("sep.codes");
    let mut text = String::from("bits 8\ncount 6\nlabels a,b\n");
    for (i, (label, hex)) in [(0, "00"), (0, "01"), (0, "02"), (1, "ff"), (1, "fe"), (1, "fd")].iter().enumerate() {
        text += &format!("i{i},{label},{hex}\n");
    }
    std::fs::write(&codes, text).unwrap();
    let report = ok(&["eval", "--codes", s(&codes)]);
    assert!(report.lines().any(|l| l == "map=1.0"), "{report}");
}

#[test]
fn cost_report_echoes_input_sizes() {
    let table = ok(&["cost-report", "--config", "table1-verbatim"]);
    for size in ["224x224x3", "112x112x32", "56x56x128", "28x28x256", "14x14x512", "7x7x1024", "1x1x1024"] {
        assert!(table.contains(size), "missing {size}\n{table}");
    }
    let kv = ok(&["cost-report", "--config", "mobilenet-standard", "--format", "kv"]);
    assert!(kv.lines().any(|l| l == "reference_params_total=4231976"), "{kv}");
    let narrow = ok(&["cost-report", "--config", "toy", "--bits", "32", "--format", "kv"]);
    assert!(narrow.lines().any(|l| l == "bits=32"), "{narrow}");
}
