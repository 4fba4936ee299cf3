use std::path::Path;
use std::process::Command;

use spectra_core::linear_embed::Method;
use spectra_harness::{
    emit_report, run_stages, write_outputs, HarnessError, ReportKind, RunConfig, Stage, StageStatus,
};

fn small_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig {
        methods: vec![Method::Pca, Method::Cmds, Method::Isomap, Method::Lle],
        neighborhoods: vec![8, 15],
        dims: vec![1, 2, 3],
        degrees: vec![1, 2],
        folds: 5,
        clusters: vec![2, 3],
        dbi_dims: vec![2],
        out: out.to_path_buf(),
        ..RunConfig::default()
    };
    cfg.dataset.synthetic_instances = 120;
    cfg.dataset.synthetic_features = 80;
    cfg
}

#[test]
fn every_stage_succeeds_on_a_small_stand_in() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let state = run_stages(&cfg, &Stage::ALL).unwrap();
    for rec in &state.stages {
        assert_eq!(
            rec.status,
            StageStatus::Ok,
            "{:?}: {:?}",
            rec.stage,
            rec.error
        );
    }
    write_outputs(&state, &cfg.out).unwrap();
    for kind in ReportKind::ALL {
        assert!(
            dir.path().join(kind.file_name()).is_file(),
            "{}",
            kind.name()
        );
    }
    assert!(dir.path().join("manifest.json").is_file());
}

#[test]
fn report_without_its_stage_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let state = run_stages(&cfg, &[Stage::Regions]).unwrap();
    emit_report(&state, ReportKind::Table1, dir.path()).unwrap();
    for kind in [
        ReportKind::Table2,
        ReportKind::Table3,
        ReportKind::Table4,
        ReportKind::Dbi,
    ] {
        match emit_report(&state, kind, dir.path()) {
            Err(HarnessError::StageMissing(_)) => {}
            other => panic!("{}: {other:?}", kind.name()),
        }
    }
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_config(&dir.path().join("a"));
    let b = small_config(&dir.path().join("b"));
    for cfg in [&a, &b] {
        let state = run_stages(cfg, &[Stage::Embed, Stage::Cluster]).unwrap();
        std::fs::create_dir_all(&cfg.out).unwrap();
        emit_report(&state, ReportKind::Dbi, &cfg.out).unwrap();
    }
    let read = |cfg: &RunConfig| std::fs::read(cfg.out.join(ReportKind::Dbi.file_name())).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn cli_report_writes_one_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "dataset": { "synthetic_instances": 60, "synthetic_features": 40 },
        "regions": 4
    });
    let cfg_path = dir.path().join("config.json");
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    let out = dir.path().join("out");
    let run = Command::new(env!("CARGO_BIN_EXE_spectra"))
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .args(["report", "table1"])
        .output()
        .unwrap();
    assert!(run.status.success());
    assert!(String::from_utf8_lossy(&run.stdout)
        .trim()
        .ends_with("table1.csv"));
    let files: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(files, vec![std::ffi::OsString::from("table1.csv")]);
}

#[test]
fn cli_rejects_unknown_report() {
    let out = Command::new(env!("CARGO_BIN_EXE_spectra"))
        .args(["report", "table9"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown report"));
}
