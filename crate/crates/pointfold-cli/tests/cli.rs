//! End-to-end runs of the `pointfold` binary: one small pipeline covering
//! every subcommand, plus the error-path contract (exit codes and the
//! single-line ERROR format).

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pointfold"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn pointfold");
    assert!(
        out.status.success(),
        "command {:?} failed:\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> String {
    path.to_str().unwrap().to_string()
}

/// Tiny-but-complete pipeline: gen-data, train, reconstruct, fold-stages,
/// interpolate, extract-features, classify, sweep-labels, verify-universal,
/// count-params. Sized to finish quickly.
#[test]
fn full_pipeline_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("data");
    let small = [
        "--set",
        "gen.per_class=6",
        "--set",
        "gen.test_per_class=3",
        "--set",
        "gen.points=48",
        "--set",
        "model.k=6",
        "--set",
        "model.codeword=16",
        "--set",
        "grid.m=25",
        "--seed",
        "11",
    ];

    run_ok(
        &[&["gen-data", "--out", &p(&data)], &small[..]].concat(),
    );
    assert!(data.join("train.csv").is_file());
    assert!(data.join("test.csv").is_file());
    assert!(data.join("manifest.json").is_file());

    let train_dir = root.join("run");
    run_ok(
        &[
            &[
                "train",
                "--data",
                &p(&data.join("train.csv")),
                "--out",
                &p(&train_dir),
                "--iterations",
                "12",
                "--set",
                "train.snapshot_every=6",
            ],
            &small[..],
        ]
        .concat(),
    );
    let model = train_dir.join("model.ckpt");
    assert!(model.is_file());
    assert!(train_dir.join("log.csv").is_file());
    assert!(train_dir.join("snapshots/iter0_stage0.ply").is_file());
    assert!(train_dir.join("snapshots/iter12_stage2.ply").is_file());
    assert!(train_dir.join("checkpoints/iter6.ckpt").is_file());
    let log = std::fs::read_to_string(train_dir.join("log.csv")).unwrap();
    assert_eq!(log.lines().count(), 13); // header + 12 iterations
    assert!(log.starts_with("iter,loss\n"));

    let sample = data.join("train/sphere_000.xyz");
    let rec_dir = root.join("rec");
    let out = run_ok(
        &[
            &[
                "reconstruct",
                "--model",
                &p(&model),
                "--input",
                &p(&sample),
                "--out",
                &p(&rec_dir),
            ],
            &small[..],
        ]
        .concat(),
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("chamfer "), "stdout: {stdout}");
    assert!(rec_dir.join("reconstruction.ply").is_file());
    assert!(rec_dir.join("reconstruction.xyz").is_file());

    let stages_dir = root.join("stages");
    run_ok(
        &[
            &[
                "fold-stages",
                "--model",
                &p(&model),
                "--input",
                &p(&sample),
                "--out",
                &p(&stages_dir),
            ],
            &small[..],
        ]
        .concat(),
    );
    for k in 0..=2 {
        assert!(stages_dir.join(format!("stage{k}.ply")).is_file());
    }

    let interp_dir = root.join("interp");
    run_ok(
        &[
            &[
                "interpolate",
                "--model",
                &p(&model),
                "--input-a",
                &p(&data.join("train/sphere_000.xyz")),
                "--input-b",
                &p(&data.join("train/plane_000.xyz")),
                "--steps",
                "4",
                "--out",
                &p(&interp_dir),
            ],
            &small[..],
        ]
        .concat(),
    );
    assert!(interp_dir.join("step_00.ply").is_file());
    assert!(interp_dir.join("step_03.ply").is_file());
    let trend = std::fs::read_to_string(interp_dir.join("trend.csv")).unwrap();
    assert!(trend.starts_with("step,t,chamfer_to_first\n"));
    assert_eq!(trend.lines().count(), 5);

    let feat_train = root.join("features-train");
    let feat_test = root.join("features-test");
    for (manifest, out_dir) in [("train.csv", &feat_train), ("test.csv", &feat_test)] {
        run_ok(
            &[
                &[
                    "extract-features",
                    "--model",
                    &p(&model),
                    "--data",
                    &p(&data.join(manifest)),
                    "--out",
                    &p(out_dir),
                ],
                &small[..],
            ]
            .concat(),
        );
        assert!(out_dir.join("codewords.csv").is_file());
    }
    let header = std::fs::read_to_string(feat_train.join("codewords.csv")).unwrap();
    assert!(header.starts_with("label,c_1,"));
    assert!(header.lines().next().unwrap().ends_with(",c_16"));

    let cls_dir = root.join("cls");
    let out = run_ok(
        &[
            &[
                "classify",
                "--train-features",
                &p(&feat_train.join("codewords.csv")),
                "--test-features",
                &p(&feat_test.join("codewords.csv")),
                "--out",
                &p(&cls_dir),
            ],
            &small[..],
        ]
        .concat(),
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("test_accuracy "), "stdout: {stdout}");

    let sweep_dir = root.join("sweep");
    run_ok(
        &[
            &[
                "sweep-labels",
                "--train-features",
                &p(&feat_train.join("codewords.csv")),
                "--test-features",
                &p(&feat_test.join("codewords.csv")),
                "--fractions",
                "0.5,1.0",
                "--out",
                &p(&sweep_dir),
            ],
            &small[..],
        ]
        .concat(),
    );
    let sweep = std::fs::read_to_string(sweep_dir.join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("fraction,used,degenerate,accuracy\n"));
    assert_eq!(sweep.lines().count(), 3);

    let uni_dir = root.join("uni");
    let out = run_ok(&[
        "verify-universal",
        "--m",
        "16",
        "--trials",
        "5",
        "--out",
        &p(&uni_dir),
        "--seed",
        "3",
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("gates=exact"), "stdout: {stdout}");
    let report = std::fs::read_to_string(uni_dir.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 6);

    let out = run_ok(&["count-params", "--decoder", "folding"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1056262");
    let out = run_ok(&["count-params", "--decoder", "fc"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "15213568");
}

#[test]
fn missing_dataset_exits_2_without_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("never-created");
    let out = bin()
        .args([
            "train",
            "--data",
            dir.path().join("missing.csv").to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists(), "no partial outputs on config failure");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("ERROR CONFIG: "), "stderr: {stderr}");
    assert_eq!(stderr.trim_end().lines().count(), 1);
}

#[test]
fn unknown_config_key_exits_2() {
    let out = bin()
        .args(["count-params", "--set", "train.learning=1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("ERROR CONFIG: "));
}

#[test]
fn non_square_regular_grid_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    let gen = bin()
        .args([
            "gen-data",
            "--out",
            data.to_str().unwrap(),
            "--set",
            "gen.per_class=2",
            "--set",
            "gen.test_per_class=1",
            "--set",
            "gen.points=24",
        ])
        .output()
        .unwrap();
    assert!(gen.status.success());
    let out = bin()
        .args([
            "train",
            "--data",
            data.join("train.csv").to_str().unwrap(),
            "--out",
            dir.path().join("run").to_str().unwrap(),
            "--set",
            "grid.m=2048",
            "--iterations",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corrupt_checkpoint_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let fake = dir.path().join("model.ckpt");
    std::fs::write(&fake, b"garbage").unwrap();
    let input = dir.path().join("in.xyz");
    std::fs::write(&input, "0 0 0\n1 1 1\n0.5 0 0.5\n").unwrap();
    let out = bin()
        .args([
            "reconstruct",
            "--model",
            fake.to_str().unwrap(),
            "--input",
            input.to_str().unwrap(),
            "--out",
            dir.path().join("o").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("ERROR FORMAT: "), "stderr: {stderr}");
}

#[test]
fn rerun_overwrites_deterministically() {
    // same config and seed: byte-identical log and checkpoint
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let data_s = p(&data);
    let manifest = p(&data.join("train.csv"));
    let out_dir = dir.path().join("run");
    let out_s = p(&out_dir);
    let args = [
        "--set",
        "gen.per_class=3",
        "--set",
        "gen.test_per_class=1",
        "--set",
        "gen.points=32",
        "--set",
        "model.k=4",
        "--set",
        "model.codeword=8",
        "--set",
        "grid.m=16",
        "--seed",
        "5",
    ];
    run_ok(&[&["gen-data", "--out", &data_s], &args[..]].concat());
    let train_args = [
        &[
            "train",
            "--data",
            &manifest,
            "--out",
            &out_s,
            "--iterations",
            "6",
        ],
        &args[..],
    ]
    .concat();
    run_ok(&train_args);
    let log1 = std::fs::read(out_dir.join("log.csv")).unwrap();
    let ckpt1 = std::fs::read(out_dir.join("model.ckpt")).unwrap();
    run_ok(&train_args);
    let log2 = std::fs::read(out_dir.join("log.csv")).unwrap();
    let ckpt2 = std::fs::read(out_dir.join("model.ckpt")).unwrap();
    assert_eq!(log1, log2);
    assert_eq!(ckpt1, ckpt2);
}

#[test]
fn compare_and_robustness_emit_tables() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let data_s = p(&data);
    let train_csv = p(&data.join("train.csv"));
    let test_csv = p(&data.join("test.csv"));
    let args = [
        "--set",
        "gen.per_class=3",
        "--set",
        "gen.test_per_class=2",
        "--set",
        "gen.points=32",
        "--set",
        "model.k=4",
        "--set",
        "model.codeword=8",
        "--set",
        "grid.m=16",
        "--set",
        "classifier.epochs=60",
        "--seed",
        "9",
    ];
    run_ok(&[&["gen-data", "--out", &data_s], &args[..]].concat());

    let cmp_dir = dir.path().join("cmp");
    let cmp_s = p(&cmp_dir);
    run_ok(
        &[
            &[
                "compare-decoders",
                "--train",
                &train_csv,
                "--test",
                &test_csv,
                "--out",
                &cmp_s,
                "--iterations",
                "4",
            ],
            &args[..],
        ]
        .concat(),
    );
    let table = std::fs::read_to_string(cmp_dir.join("compare.csv")).unwrap();
    assert!(table
        .starts_with("variant,grid_dim,grid_mode,grid_m,folds,decoder_params,final_loss,test_accuracy"));
    // five folding variants plus the FC baseline
    assert_eq!(table.lines().count(), 7);
    assert!(table.contains("regular_2d_3folds"));
    assert!(table.contains("uniform_2d_2folds"));
    assert!(table.contains("fc_baseline"));

    let rob_dir = dir.path().join("rob");
    let rob_s = p(&rob_dir);
    run_ok(
        &[
            &[
                "robustness",
                "--train",
                &train_csv,
                "--test",
                &test_csv,
                "--noise",
                "0.05",
                "--out",
                &rob_s,
                "--iterations",
                "4",
            ],
            &args[..],
        ]
        .concat(),
    );
    let table = std::fs::read_to_string(rob_dir.join("robustness.csv")).unwrap();
    assert!(table.starts_with("encoder,noise_fraction,final_loss,test_accuracy"));
    assert!(table.contains("graph,"));
    assert!(table.contains("no_graph,"));
}
