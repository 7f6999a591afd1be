use std::path::{Path, PathBuf};

use deinterleave::cli::{main_with_args, run};
use deinterleave::Error;
use tempfile::TempDir;

fn args<'a>(parts: &'a [&'a str]) -> impl Iterator<Item = &'a str> {
    std::iter::once("deinterleave").chain(parts.iter().copied())
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// A small generated dataset: 16 / 4 / 4 trains of the desk scenario.
fn small_data(root: &Path) -> PathBuf {
    let out = root.join("data");
    run(args(&[
        "generate",
        "--out",
        &s(&out),
        "--n-trains",
        "16",
        "--n-val",
        "4",
        "--n-test",
        "4",
    ]))
    .unwrap();
    out
}

fn train_quick(data: &Path, out: &Path, model: &str, epochs: usize) {
    let epochs = epochs.to_string();
    run(args(&[
        "train",
        "--model",
        model,
        "--data",
        &s(data),
        "--out",
        &s(out),
        "--epochs",
        &epochs,
        "--quiet",
    ]))
    .unwrap();
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn generate_is_deterministic_and_writes_manifests() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        run(args(&[
            "generate",
            "--out",
            &s(out),
            "--n-trains",
            "5",
            "--n-val",
            "2",
            "--n-test",
            "2",
            "--seed",
            "9",
        ]))
        .unwrap();
    }
    for split in ["train", "val", "test"] {
        assert_eq!(
            read(&a.join(format!("{split}.jsonl"))),
            read(&b.join(format!("{split}.jsonl")))
        );
        assert!(a.join(format!("{split}.manifest.json")).exists());
    }
    assert_eq!(read(&a.join("train.jsonl")).lines().count(), 5);
    assert!(a.join("manifest.json").exists());
    // The splits come from distinct seeds.
    assert_ne!(read(&a.join("val.jsonl")), read(&a.join("test.jsonl")));
}

#[test]
fn zero_trains_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = s(&tmp.path().join("d"));
    assert_eq!(main_with_args(args(&["generate", "--out", &out, "--n-trains", "0"])), 2);
    assert!(
        !tmp.path().join("d").exists(),
        "a failed run leaves no output directory"
    );
}

#[test]
fn identity_cannot_be_trained() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(tmp.path());
    let err = run(args(&[
        "train",
        "--model",
        "identity",
        "--data",
        &s(&data),
        "--out",
        &s(&tmp.path().join("m")),
    ]))
    .unwrap_err();
    assert!(
        matches!(err, Error::Usage(ref m) if m.contains("identity model has no parameters")),
        "{err}"
    );
}

#[test]
fn resume_continues_epoch_numbering() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(tmp.path());
    let out = tmp.path().join("gru");
    train_quick(&data, &out, "gru", 1);
    run(args(&[
        "train",
        "--model",
        "gru",
        "--data",
        &s(&data),
        "--out",
        &s(&out),
        "--epochs",
        "2",
        "--resume",
        "--quiet",
    ]))
    .unwrap();
    let epochs: Vec<u64> = read(&out.join("train_log.jsonl"))
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["epoch"]
                .as_u64()
                .unwrap()
        })
        .collect();
    assert_eq!(epochs, vec![1, 2]);
    assert!(out.join("best.ckpt").exists() && out.join("last.ckpt").exists());
}

#[test]
fn evaluation_is_reproducible_and_complete() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(tmp.path());
    let model = tmp.path().join("tf");
    train_quick(&data, &model, "transformer", 1);
    let ckpt = s(&model.join("best.ckpt"));
    let outs = [tmp.path().join("e1"), tmp.path().join("e2")];
    for out in &outs {
        run(args(&[
            "evaluate",
            "--checkpoint",
            &ckpt,
            "--data",
            &s(&data),
            "--out",
            &s(out),
        ]))
        .unwrap();
    }
    for file in deinterleave::cli::REPORT_FILES {
        assert_eq!(read(&outs[0].join(file)), read(&outs[1].join(file)), "{file}");
    }
    let metrics: serde_json::Value = serde_json::from_str(&read(&outs[0].join("metrics.json"))).unwrap();
    assert_eq!(metrics["model"], "transformer");
    assert_eq!(metrics["n_trains"], 4);
}

#[test]
fn checkpoint_mismatch_names_the_fields() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(tmp.path());
    let model = tmp.path().join("tf");
    train_quick(&data, &model, "transformer", 1);
    let mut cfg = deinterleave::cli::RunConfig::desk();
    cfg.models.transformer.d_model = 16;
    cfg.models.transformer.n_heads = 4;
    let cfg_path = tmp.path().join("other.toml");
    std::fs::write(&cfg_path, cfg.to_toml_string()).unwrap();
    let err = run(args(&[
        "evaluate",
        "--config",
        &s(&cfg_path),
        "--model",
        "transformer",
        "--checkpoint",
        &s(&model.join("best.ckpt")),
        "--data",
        &s(&data),
        "--out",
        &s(&tmp.path().join("e")),
    ]))
    .unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("d_model") && msg.contains("n_heads"), "{msg}");
}

#[test]
fn sweep_writes_one_row_per_grid_value() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(tmp.path());
    let out = tmp.path().join("sweep");
    run(args(&[
        "sweep",
        "--model",
        "identity",
        "--data",
        &s(&data),
        "--out",
        &s(&out),
        "--grid",
        "5,10,20",
    ]))
    .unwrap();
    let mut reader = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    let sizes: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    assert_eq!(sizes, ["5", "10", "20"]);

    // The row for 5 is what evaluate reports with the same fixed settings.
    let eval = tmp.path().join("eval");
    run(args(&[
        "evaluate",
        "--model",
        "identity",
        "--data",
        &s(&data),
        "--out",
        &s(&eval),
        "--min-cluster-size",
        "5",
    ]))
    .unwrap();
    let metrics: serde_json::Value = serde_json::from_str(&read(&eval.join("metrics.json"))).unwrap();
    let swept: f64 = rows[0][2].parse().unwrap();
    assert_eq!(swept, metrics["ami"].as_f64().unwrap());
}

#[test]
fn non_positive_grid_values_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(tmp.path());
    for grid in ["0", "5,-1"] {
        let out = s(&tmp.path().join("sweep"));
        let code = main_with_args(args(&[
            "sweep",
            "--model",
            "identity",
            "--data",
            &s(&data),
            "--out",
            &out,
            "--grid",
            grid,
        ]));
        assert_eq!(code, 2, "grid {grid}");
    }
}

#[test]
fn evaluate_needs_a_checkpoint_for_trained_models() {
    let tmp = TempDir::new().unwrap();
    let data = small_data(tmp.path());
    let code = main_with_args(args(&[
        "evaluate",
        "--model",
        "gru",
        "--data",
        &s(&data),
        "--out",
        &s(&tmp.path().join("e")),
    ]));
    assert_eq!(code, 2);
}
