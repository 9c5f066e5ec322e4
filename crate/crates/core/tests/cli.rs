mod common;

use std::path::Path;
use std::process::{Command, Output};

use roadatlas::store::{export_report, DefectFilter, ExportFormat, Store};
use roadatlas::synthetic::write_scene_dir;

const BIN: &str = env!("CARGO_BIN_EXE_roadatlas");

fn config_path() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/roadatlas.sample.toml")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("ROADATLAS_DATA_ROOT").output().unwrap()
}

fn process(input: &Path, root: &Path, extra: &[&str]) -> Output {
    let config = config_path();
    let mut args = vec![
        "process",
        "--input",
        input.to_str().unwrap(),
        "--data-root",
        root.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

#[test]
fn empty_folder() {
    let input = tempfile::tempdir().unwrap();
    let root = tempfile::tempdir().unwrap();
    let out = process(input.path(), root.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "processed=0 defects=0 markings=0 failures=0");
}

#[test]
fn scenes_match_ground_truth_and_rerun_is_idempotent() {
    let input = tempfile::tempdir().unwrap();
    let root = tempfile::tempdir().unwrap();
    let scenes = write_scene_dir(input.path(), 10..13).unwrap();
    let defects: usize = scenes.iter().map(|(_, s)| s.defects.len()).sum();
    let kept: usize = scenes.iter().map(|(_, s)| s.expected_kept(0.6).count()).sum();
    let out = process(input.path(), root.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out), format!("processed=3 defects={defects} markings={kept} failures=0"));

    let out = process(input.path(), root.path(), &["--skip-processed"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "processed=0 defects=0 markings=0 failures=0");
    let store = Store::open(root.path()).unwrap();
    assert_eq!(store.images().len(), 3);
}

#[test]
fn worker_count_does_not_change_results() {
    let input = tempfile::tempdir().unwrap();
    write_scene_dir(input.path(), 20..26).unwrap();
    let summarize = |jobs: &str| {
        let root = tempfile::tempdir().unwrap();
        let out = process(input.path(), root.path(), &["--jobs", jobs]);
        assert_eq!(out.status.code(), Some(0));
        let store = Store::open(root.path()).unwrap();
        let mut rows: Vec<String> = store
            .query_defects(&DefectFilter::default())
            .unwrap()
            .iter()
            .map(|d| {
                let img = store.get_image(&d.image_id).unwrap();
                format!("{} {:?} {:?} {:?} {}", img.source_name, d.class, d.bbox, d.geo, d.confidence)
            })
            .collect();
        rows.sort();
        (stdout(&out), rows)
    };
    assert_eq!(summarize("1"), summarize("4"));
}

#[test]
fn unreadable_image_gives_exit_one() {
    let input = tempfile::tempdir().unwrap();
    let root = tempfile::tempdir().unwrap();
    write_scene_dir(input.path(), [30]).unwrap();
    std::fs::write(input.path().join("zz_broken.jpg"), b"garbage").unwrap();
    std::fs::write(input.path().join("zz_broken.geo.json"), br#"{"lat": 1.0, "lon": 2.0}"#).unwrap();
    let out = process(input.path(), root.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).starts_with("processed=1 "));
    assert!(stdout(&out).ends_with(" failures=1"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zz_broken.jpg"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_str().unwrap();
    let out = run(&["process", "--input", root, "--data-root", root, "--config", "/nonexistent/roadatlas.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "overlap_threshold = 1.5\n").unwrap();
    let out = run(&["process", "--input", root, "--data-root", root, "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["export", "--data-root", root, "--format", "xml", "--out", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["export", "--data-root", "/nonexistent/root", "--format", "csv", "--out", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["process", "--input", root]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["process", "--input", root, "--data-root", root, "--config", "x", "--jobs", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn export_matches_library_and_env_root_works() {
    let input = tempfile::tempdir().unwrap();
    let root = tempfile::tempdir().unwrap();
    write_scene_dir(input.path(), 40..43).unwrap();
    let out = Command::new(BIN)
        .args(["process", "--input", input.path().to_str().unwrap(), "--config", config_path().to_str().unwrap()])
        .env("ROADATLAS_DATA_ROOT", root.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    for (fmt, format) in [("csv", ExportFormat::Csv), ("json", ExportFormat::Json)] {
        let dest = root.path().join(format!("report.{fmt}"));
        let out = run(&[
            "export",
            "--data-root",
            root.path().to_str().unwrap(),
            "--format",
            fmt,
            "--out",
            dest.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        let store = Store::open(root.path()).unwrap();
        let expected = export_report(&store, format, &DefectFilter::default(), false).unwrap();
        assert_eq!(std::fs::read(&dest).unwrap(), expected);
    }
}
