use std::fs;
use std::path::Path;
use std::process::Command;

use freqmia::attacks::{read_scores_csv, AttackKind};
use freqmia::diffusion::{FnDenoiser, MemorizingDenoiser};
use freqmia::harness::{generate_dataset, run_experiment, run_experiment_with_denoiser, ExperimentConfig};
use freqmia::{Error, ImageTensor};

fn small_config(dir: &Path, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::default().with_seed(seed);
    c.dataset.image_size = 8;
    c.dataset.n_member = 24;
    c.dataset.n_holdout = 24;
    c.model.hidden = vec![32];
    c.model.embed_dim = 8;
    c.training.epochs = 3;
    c.output_dir = dir.to_path_buf();
    c
}

#[test]
fn memorizing_denoiser_separates_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 1);
    let samples = generate_dataset(&cfg.dataset).unwrap();
    let members: Vec<ImageTensor> = samples.iter().filter(|s| s.member).map(|s| s.image.clone()).collect();
    let den = MemorizingDenoiser::new(members, cfg.schedule.build().unwrap());
    let outcome = run_experiment_with_denoiser(&cfg, &den).unwrap();
    for (kind, records) in &outcome.scores {
        assert!(records.iter().filter(|r| !r.member).all(|r| r.score_raw > 0.0), "{kind}");
        let a = outcome.report.attack(*kind).unwrap();
        assert_eq!(a.raw.asr, 1.0, "{kind}");
        assert_eq!(a.raw.auc, 1.0, "{kind}");
    }
    assert!(!dir.path().join("model.fmia").exists());
    assert!(!dir.path().join("partial").exists());
}

#[test]
fn untrained_model_has_no_signal() {
    let dir = tempfile::tempdir().unwrap();
    let mut sums = [0.0; 3];
    let seeds = 5;
    for seed in 0..seeds {
        let mut cfg = ExperimentConfig::default().with_seed(100 + seed);
        cfg.training.epochs = 0;
        cfg.output_dir = dir.path().join(seed.to_string());
        let report = run_experiment(&cfg).unwrap().report;
        for (i, kind) in AttackKind::ALL.iter().enumerate() {
            sums[i] += report.attack(*kind).unwrap().raw.auc;
        }
    }
    for (kind, s) in AttackKind::ALL.iter().zip(sums) {
        let mean = s / seeds as f64;
        assert!((mean - 0.5).abs() <= 0.1, "{kind}: mean AUC {mean}");
    }
}

#[test]
fn writes_the_documented_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 2);
    let outcome = run_experiment(&cfg).unwrap();
    let mut names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let mut expected: Vec<String> = [
        "comparison.csv",
        "config.toml",
        "failed_hf.csv",
        "model.fmia",
        "report.json",
        "training_loss.csv",
    ]
    .map(String::from)
    .to_vec();
    for kind in ["naive", "pia", "secmi"] {
        for tag in ["raw", "filtered"] {
            expected.push(format!("metrics_{kind}_{tag}.json"));
            expected.push(format!("roc_{kind}_{tag}.csv"));
        }
        expected.push(format!("scores_{kind}.csv"));
    }
    expected.sort();
    assert_eq!(names, expected);

    let comparison = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    let lines: Vec<_> = comparison.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("Avg+,"));
    assert!(!comparison.contains('\r'));

    let text = fs::read(dir.path().join("scores_pia.csv")).unwrap();
    let records = read_scores_csv(&text[..], "scores_pia.csv").unwrap();
    assert_eq!(records.len(), 48);
    assert_eq!(records.len(), outcome.scores[1].1.len());

    let saved = ExperimentConfig::from_toml(&fs::read_to_string(dir.path().join("config.toml")).unwrap()).unwrap();
    assert_eq!(saved, cfg);
}

#[test]
fn raw_and_filtered_share_noise() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), 3);
    for a in &mut cfg.attacks {
        a.filter = Some(freqmia::FilterSpec::new(1.0, 5.0).unwrap());
    }
    let outcome = run_experiment(&cfg).unwrap();
    for (_, records) in &outcome.scores {
        for r in records {
            assert!((r.score_filtered.unwrap() - r.score_raw).abs() <= 1e-9 * r.score_raw.max(1.0));
        }
    }
}

#[test]
fn failed_stage_keeps_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 4);
    // blows up only at the SecMI timestep, after Naive and PIA have finished
    let nan = FnDenoiser(|x: &ImageTensor, t: usize| x.map(|v| if t == 100 { f64::NAN } else { 0.1 * v }));
    match run_experiment_with_denoiser(&cfg, &nan) {
        Err(Error::Stage { stage, .. }) => assert_eq!(stage, "attack:secmi"),
        other => panic!("expected a stage error, got {other:?}"),
    }
    let partial = dir.path().join("partial");
    assert!(partial.join("config.toml").exists());
    assert!(partial.join("scores_naive.csv").exists());
    assert!(partial.join("metrics_pia_filtered.json").exists());
    assert!(!partial.join("scores_secmi.csv").exists());
    assert!(!dir.path().join("report.json").exists());

    let mut diverging = small_config(dir.path(), 4);
    diverging.training.learning_rate = 1e6;
    diverging.training.clip_grad_norm = None;
    diverging.training.momentum = 0.0;
    diverging.training.epochs = 50;
    match run_experiment(&diverging) {
        Err(e @ Error::Stage { .. }) => {
            assert!(e.to_string().contains("training"), "{e}");
            assert!(!e.is_config());
        }
        other => panic!("expected a training failure, got {other:?}"),
    }
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_freqmia")).args(args).output().unwrap()
}

fn write_small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("c.toml");
    fs::write(&path, small_config(&dir.join("unused"), 0).to_toml()).unwrap();
    path
}

#[test]
fn cli_run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path());
    let config = config.to_str().unwrap();
    for out in ["a", "b"] {
        let out = dir.path().join(out);
        let o = cli(&["run", "--config", config, "--seed", "7", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for kind in ["naive", "pia", "secmi"] {
        let name = format!("scores_{kind}.csv");
        assert_eq!(
            fs::read(dir.path().join("a").join(&name)).unwrap(),
            fs::read(dir.path().join("b").join(&name)).unwrap()
        );
    }
    let o = cli(&["report", "--input", dir.path().join("a/report.json").to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("secmi"));
}

#[test]
fn cli_stepwise_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_small_config(dir.path());
    let config = config.to_str().unwrap();
    let out = dir.path().join("steps");
    let out = out.to_str().unwrap();

    let o = cli(&["gen-data", "--config", config, "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(Path::new(out).join("manifest.csv").exists());
    assert!(Path::new(out).join("s0000.pgm").exists());

    let o = cli(&["train", "--config", config, "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let o = cli(&["attack", "--config", config, "--out", out, "--s", "0.5", "--q", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let scores = Path::new(out).join("scores_naive.csv");
    let o = cli(&["eval", "--scores", scores.to_str().unwrap(), "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["raw"]["auc"].is_number() && v["filtered"]["asr"].is_number());
    assert!(Path::new(out).join("roc_scores_naive_filtered.csv").exists());
}

#[test]
fn cli_verify_prop() {
    let o = cli(&["verify-prop", "--lm", "1", "--lh", "1.2", "--hm", "0.5", "--hh", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["status"], "verified");
    assert_eq!(v["constraint"]["satisfied"], true);
    assert!(v["pass_fraction"].as_f64().unwrap() > 0.99);
}

#[test]
fn cli_exit_codes() {
    let o = cli(&["run", "--config", "/definitely/missing.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/definitely/missing.toml"));

    let o = cli(&["run", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());

    let o = cli(&["verify-prop", "--lm", "-1", "--lh", "1", "--hm", "1", "--hh", "1"]);
    assert_eq!(o.status.code(), Some(1));

    let o = cli(&["eval", "--scores", "/definitely/missing.csv"]);
    assert_eq!(o.status.code(), Some(2));

    assert_eq!(cli(&["--help"]).status.code(), Some(0));
}
