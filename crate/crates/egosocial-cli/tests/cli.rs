//! End-to-end tests of the `egosocial` binary: every subcommand, the
//! artifact formats it writes, its determinism guarantees, and its exit
//! codes (0 success, 2 validation, 3 divergence).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use egosocial_cli::formats;
use egosocial_core::dataset::InteractionSeries;
use egosocial_core::lstm::{LstmConfig, LstmModel};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_egosocial"))
}

/// Runs the binary with `--out dir` appended and returns its output.
fn run_in(dir: &Path, args: &[&str]) -> Output {
    let out = bin()
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary should launch");
    out
}

fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "expected success, got {:?}\nstdout: {}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn read(path: &PathBuf) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// A tiny, well-separated labeled corpus written straight to CSV.
fn write_tiny_corpus(path: &Path, per_class: usize, offset: usize) {
    let mut series = Vec::new();
    for i in 0..per_class {
        series.push(InteractionSeries {
            series_id: format!("pos-{}", i + offset),
            frames: (0..6)
                .map(|t| (60.0 + (i + t) as f64 * 3.0, -10.0 + t as f64 * 2.0))
                .collect(),
            label: Some(true),
        });
        series.push(InteractionSeries {
            series_id: format!("neg-{}", i + offset),
            frames: (0..6)
                .map(|t| (300.0 + (i + t) as f64 * 10.0, 50.0 + t as f64))
                .collect(),
            label: Some(false),
        });
    }
    std::fs::write(path, formats::write_series_csv(&series).unwrap()).unwrap();
}

#[test]
fn calibrate_then_tracks_produces_series() {
    let dir = TempDir::new().unwrap();
    let samples = dir.path().join("samples.csv");
    // Heights inversely proportional to distance, the pinhole relationship.
    let rows: Vec<(f64, f64)> = (4..20)
        .map(|i| {
            let h = 10.0 * i as f64;
            (h, 24.0 * 600.0 / h)
        })
        .collect();
    std::fs::write(&samples, formats::write_calibration_csv(&rows)).unwrap();

    let out = run_in(
        dir.path(),
        &["calibrate", "--samples", samples.to_str().unwrap()],
    );
    assert_success(&out);
    let model_path = dir.path().join("distance-model.txt");
    let model = formats::parse_distance_model(&read(&model_path)).unwrap();
    assert!(model.valid_range.0 < model.valid_range.1);

    let tracks_path = dir.path().join("tracks.jsonl");
    std::fs::write(
        &tracks_path,
        concat!(
            r#"{"sequence_id":"s1","person_id":"a","label":1,"frames":[{"t":0,"x_center_px":320,"face_height_px":150,"pose_deg":5},{"t":1,"x_center_px":322,"face_height_px":148,"pose_deg":null},{"t":2,"x_center_px":321,"face_height_px":151,"pose_deg":-10}]}"#,
            "\n",
            r#"{"sequence_id":"s1","person_id":"b","label":0,"frames":[{"t":0,"x_center_px":100,"face_height_px":45,"pose_deg":80}]}"#,
            "\n"
        ),
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &[
            "generate",
            "tracks",
            "--tracks",
            tracks_path.to_str().unwrap(),
            "--model",
            model_path.to_str().unwrap(),
        ],
    );
    assert_success(&out);
    let series = formats::parse_series_csv(&read(&dir.path().join("series.csv"))).unwrap();
    assert_eq!(series.len(), 2);
    assert_eq!(series[0].series_id, "s1:a");
    assert_eq!(series[0].frames.len(), 3);
    assert_eq!(series[0].label, Some(true));
    assert_eq!(series[1].label, Some(false));
    // The close, camera-facing person lands nearer than the far, averted one.
    assert!(series[0].frames[0].0 < series[1].frames[0].0);
    // Raw estimator poses snap onto the 15-degree vocabulary: 5 -> 0,
    // -10 -> -15; the gap imputes to the neighbor median -7.5, a tie that
    // rounds toward zero.
    let orientations: Vec<f64> = series[0].frames.iter().map(|f| f.1).collect();
    assert_eq!(orientations, vec![0.0, 0.0, -15.0]);
    assert_eq!(series[1].frames[0].1, 75.0);
}

#[test]
fn synthetic_split_augment_pipeline() {
    let dir = TempDir::new().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "generate",
            "synthetic",
            "--num-positive",
            "10",
            "--num-negative",
            "10",
            "--seed",
            "3",
        ],
    );
    assert_success(&out);
    let all = formats::parse_series_csv(&read(&dir.path().join("series.csv"))).unwrap();
    assert_eq!(all.len(), 20);

    let series_csv = dir.path().join("series.csv");
    let out = run_in(
        dir.path(),
        &[
            "generate",
            "split",
            "--input",
            series_csv.to_str().unwrap(),
            "--seed",
            "3",
        ],
    );
    assert_success(&out);
    let train = formats::parse_series_csv(&read(&dir.path().join("train.csv"))).unwrap();
    let val = formats::parse_series_csv(&read(&dir.path().join("val.csv"))).unwrap();
    let test = formats::parse_series_csv(&read(&dir.path().join("test.csv"))).unwrap();
    assert_eq!(train.len() + val.len() + test.len(), 20);
    let positives = train.iter().filter(|s| s.label == Some(true)).count();
    assert_eq!(positives * 2, train.len(), "balanced training split");

    let train_csv = dir.path().join("train.csv");
    let out = run_in(
        dir.path(),
        &[
            "generate",
            "augment",
            "--input",
            train_csv.to_str().unwrap(),
            "--copies",
            "2",
            "--seed",
            "3",
        ],
    );
    assert_success(&out);
    let augmented = formats::parse_series_csv(&read(&dir.path().join("augmented.csv"))).unwrap();
    assert_eq!(
        augmented.len(),
        train.len() * 3,
        "originals plus two copies each"
    );
}

#[test]
fn train_evaluate_report_round_trip() {
    let dir = TempDir::new().unwrap();
    let train_csv = dir.path().join("train.csv");
    let val_csv = dir.path().join("val.csv");
    write_tiny_corpus(&train_csv, 6, 0);
    write_tiny_corpus(&val_csv, 3, 100);

    let out = run_in(
        dir.path(),
        &[
            "train",
            "--train",
            train_csv.to_str().unwrap(),
            "--val",
            val_csv.to_str().unwrap(),
            "--blocks",
            "3",
            "--max-epochs",
            "40",
            "--learning-rate",
            "0.05",
            "--seed",
            "1",
        ],
    );
    assert_success(&out);
    let checkpoint = dir.path().join("checkpoint.txt");
    let metrics = formats::parse_metrics_csv(&read(&dir.path().join("metrics.csv"))).unwrap();
    assert!(!metrics.is_empty());
    assert_eq!(metrics[0].0, 1);

    // The checkpoint reloads to a model whose evaluation is reproducible.
    let out = run_in(
        dir.path(),
        &[
            "evaluate",
            "--model",
            checkpoint.to_str().unwrap(),
            "--data",
            val_csv.to_str().unwrap(),
        ],
    );
    assert_success(&out);
    let eval_text = read(&dir.path().join("eval.txt"));
    let (p, r, f) = formats::parse_eval_rates(&eval_text).unwrap();
    assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&r) && (0.0..=1.0).contains(&f));

    let eval_path = dir.path().join("eval.txt");
    let out = run_in(
        dir.path(),
        &[
            "report",
            &format!("LSTM={}", eval_path.display()),
            "--reference",
        ],
    );
    assert_success(&out);
    let table = read(&dir.path().join("report.txt"));
    assert!(table.contains("LSTM"));
    assert!(table.contains("Precision"));
    assert!(
        table.contains("82%"),
        "reference precision row present:\n{table}"
    );
}

#[test]
fn training_twice_writes_identical_artifacts() {
    let dir_a = TempDir::new().unwrap();
    let dir_b = TempDir::new().unwrap();
    let train_csv = dir_a.path().join("train.csv");
    let val_csv = dir_a.path().join("val.csv");
    write_tiny_corpus(&train_csv, 4, 0);
    write_tiny_corpus(&val_csv, 2, 100);

    let args = |_dir: &Path| {
        vec![
            "train".to_string(),
            "--train".into(),
            train_csv.display().to_string(),
            "--val".into(),
            val_csv.display().to_string(),
            "--blocks".into(),
            "2".into(),
            "--max-epochs".into(),
            "10".into(),
            "--seed".into(),
            "9".into(),
        ]
    };
    let run_a = run_in(
        dir_a.path(),
        &args(dir_a.path())
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    );
    let run_b = run_in(
        dir_b.path(),
        &args(dir_b.path())
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    );
    assert_success(&run_a);
    assert_success(&run_b);
    assert_eq!(
        read(&dir_a.path().join("checkpoint.txt")),
        read(&dir_b.path().join("checkpoint.txt")),
        "identical seeds and data must reproduce the checkpoint byte for byte"
    );
    assert_eq!(
        read(&dir_a.path().join("metrics.csv")),
        read(&dir_b.path().join("metrics.csv"))
    );
}

#[test]
fn search_artifacts_are_worker_count_invariant() {
    let dir_a = TempDir::new().unwrap();
    let dir_b = TempDir::new().unwrap();
    let train_csv = dir_a.path().join("train.csv");
    let val_csv = dir_a.path().join("val.csv");
    write_tiny_corpus(&train_csv, 4, 0);
    write_tiny_corpus(&val_csv, 2, 100);
    let config = dir_a.path().join("run.toml");
    std::fs::write(
        &config,
        "[search]\nnum_blocks = [2, 3]\nlearning_rate = [1e-2, 1e-1]\nmomentum = [0.1, 0.5]\nbatch_size = [2, 4]\n\n[train]\nmax_epochs = 3\n",
    )
    .unwrap();

    let mut outputs = Vec::new();
    for (dir, workers) in [(&dir_a, "1"), (&dir_b, "4")] {
        let out = run_in(
            dir.path(),
            &[
                "search",
                "--train",
                train_csv.to_str().unwrap(),
                "--val",
                val_csv.to_str().unwrap(),
                "--trials",
                "5",
                "--workers",
                workers,
                "--config",
                config.to_str().unwrap(),
                "--seed",
                "21",
            ],
        );
        assert_success(&out);
        let summary = read(&dir.path().join("search-summary.csv"));
        assert!(summary.starts_with(formats::SUMMARY_HEADER));
        outputs.push(summary);

        // The per-trial log is the ranking's input, in trial order.
        let trials = formats::parse_trials_jsonl(&read(&dir.path().join("trials.jsonl"))).unwrap();
        assert_eq!(trials.len(), 5);
        assert!(trials
            .windows(2)
            .all(|w| w[0].trial_index < w[1].trial_index));
    }
    assert_eq!(
        outputs[0], outputs[1],
        "summary must not depend on worker count"
    );
}

#[test]
fn baseline_sweep_writes_grid_rows() {
    let dir = TempDir::new().unwrap();
    let data_csv = dir.path().join("data.csv");
    write_tiny_corpus(&data_csv, 5, 0);
    let out = run_in(
        dir.path(),
        &[
            "baseline",
            "--data",
            data_csv.to_str().unwrap(),
            "--thresholds",
            "0.1,0.5,0.9",
        ],
    );
    assert_success(&out);
    let rows = formats::parse_sweep_csv(&read(&dir.path().join("sweep.csv"))).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].0, 0.1);
    // Interacting series here are fully interacting, so some threshold
    // separates the classes perfectly.
    assert!(rows.iter().any(|&(_, _, _, f)| f == 1.0));
}

#[test]
fn gradcheck_reports_and_enforces_tolerance() {
    let dir = TempDir::new().unwrap();
    let out = run_in(
        dir.path(),
        &["gradcheck", "--blocks", "2", "--frames", "5", "--seed", "4"],
    );
    assert_success(&out);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("max relative error"));

    let out = run_in(
        dir.path(),
        &[
            "gradcheck",
            "--blocks",
            "2",
            "--seed",
            "4",
            "--tolerance",
            "1e-300",
        ],
    );
    assert_exit(&out, 2);
}

#[test]
fn validation_failures_exit_2() {
    let dir = TempDir::new().unwrap();
    // Missing file.
    let out = run_in(dir.path(), &["calibrate", "--samples", "missing.csv"]);
    assert_exit(&out, 2);
    // Malformed calibration data.
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "wrong,header\n1,2\n").unwrap();
    let out = run_in(
        dir.path(),
        &["calibrate", "--samples", bad.to_str().unwrap()],
    );
    assert_exit(&out, 2);
    // Underdetermined fit: fewer than three distinct heights.
    let thin = dir.path().join("thin.csv");
    std::fs::write(&thin, "face_height_px,distance_cm\n100,10\n100,11\n").unwrap();
    let out = run_in(
        dir.path(),
        &["calibrate", "--samples", thin.to_str().unwrap()],
    );
    assert_exit(&out, 2);
    // Unsplittable request: balanced split needs both classes.
    let single = dir.path().join("single.csv");
    let series: Vec<InteractionSeries> = (0..4)
        .map(|i| InteractionSeries {
            series_id: format!("s{i}"),
            frames: vec![(50.0, 0.0)],
            label: Some(true),
        })
        .collect();
    std::fs::write(&single, formats::write_series_csv(&series).unwrap()).unwrap();
    let out = run_in(
        dir.path(),
        &["generate", "split", "--input", single.to_str().unwrap()],
    );
    assert_exit(&out, 2);
    // Bad config file.
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "[model]\nblocks = 3\n").unwrap();
    let out = run_in(
        dir.path(),
        &[
            "generate",
            "synthetic",
            "--config",
            config.to_str().unwrap(),
        ],
    );
    assert_exit(&out, 2);
}

#[test]
fn divergent_training_exits_3() {
    let dir = TempDir::new().unwrap();
    let train_csv = dir.path().join("train.csv");
    let val_csv = dir.path().join("val.csv");
    write_tiny_corpus(&train_csv, 2, 0);
    write_tiny_corpus(&val_csv, 2, 100);

    // A checkpoint whose weights are already not finite cannot train.
    let config = LstmConfig {
        num_blocks: 2,
        ..LstmConfig::default()
    };
    let mut model = LstmModel::init(config.clone()).unwrap();
    model.params_mut()[0] = f64::NAN;
    let poisoned = dir.path().join("poisoned.txt");
    std::fs::write(&poisoned, formats::write_checkpoint(&model)).unwrap();

    let out = run_in(
        dir.path(),
        &[
            "train",
            "--train",
            train_csv.to_str().unwrap(),
            "--val",
            val_csv.to_str().unwrap(),
            "--resume",
            poisoned.to_str().unwrap(),
            "--max-epochs",
            "3",
        ],
    );
    assert_exit(&out, 3);
}

#[test]
fn config_file_sets_defaults_and_flags_override() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "[synthetic]\nnum_positive = 4\nnum_negative = 2\nseed = 8\n",
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &[
            "generate",
            "synthetic",
            "--config",
            config.to_str().unwrap(),
        ],
    );
    assert_success(&out);
    let series = formats::parse_series_csv(&read(&dir.path().join("series.csv"))).unwrap();
    assert_eq!(series.len(), 6);

    // The flag wins over the file.
    let out = run_in(
        dir.path(),
        &[
            "generate",
            "synthetic",
            "--config",
            config.to_str().unwrap(),
            "--num-positive",
            "1",
        ],
    );
    assert_success(&out);
    let series = formats::parse_series_csv(&read(&dir.path().join("series.csv"))).unwrap();
    assert_eq!(series.len(), 3);
}
